"""Reduced interface dynamics: Galerkin curve flow with slaved bulk density, and the meander ODE."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .curve import (CurveError, CurveSamples, MeanderParams, ModeBasis, build_curve,
                    xi_functions)
from .profile import ScalarConstants


class Slaving(str, Enum):
    LEADING = "leading"   # sigma0 - c0 m1^2 R0 p0 / m0
    MASS = "mass"         # first-order mass balance including the phi1 mass


class ReducedMode(str, Enum):
    FULL_CURVE = "FullCurve"
    MEANDER_ODE = "MeanderOde"


@dataclass(frozen=True)
class RclConfig:
    """Parameters of the reduced flow.

    Give either the mass ``M0`` or the initial bulk density ``sigma0``; the
    other is derived for the circle of radius ``R0``. ``alpha`` enters the
    normal velocity and, when given, the first-order equilibrium correction.
    """

    eps: float
    eta1: float
    eta2: float
    R0: float
    N1: int = 33
    M0: Optional[float] = None
    sigma0: Optional[float] = None
    alpha: Optional[float] = None
    area: float = (4.0 * np.pi) ** 2
    dt: Optional[float] = None
    t_end: float = 100.0
    slaving: Slaving = Slaving.LEADING
    delta: float = 0.5
    domain_C: float = 50.0
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "slaving", Slaving(self.slaving))
        if (self.M0 is None) == (self.sigma0 is None):
            raise ValueError("give exactly one of M0 and sigma0")
        if self.R0 <= 0 or self.eps <= 0 or self.area <= 0:
            raise ValueError("R0, eps and area must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def alpha_value(self) -> float:
        return 0.0 if self.alpha is None else float(self.alpha)

    @property
    def time_step(self) -> float:
        if self.dt is not None:
            return self.dt
        bmax = (self.N1 - 1) // 2
        return 0.1 / (self.eps**4 * bmax**4 / self.R0**4)

    def base_length(self) -> float:
        return 2.0 * np.pi * self.R0

    def B2_bar(self, c: ScalarConstants) -> float:
        """Mass of the dressed B_2 for the base circle.

        Under leading-order slaving this is its eps -> 0 limit B2_far |Omega|,
        consistent with sigma0; the eps C3 |Gamma| excess is kept for mass
        slaving only (C3 is large, so that term is O(1) at moderate eps).
        """
        if self.slaving is Slaving.MASS:
            return c.B2_far * self.area + self.eps * self.base_length() * c.B2_excess
        return c.B2_far * self.area

    def c0(self, c: ScalarConstants) -> float:
        return 2.0 * np.pi * c.m0**2 / (self.B2_bar(c) * c.m1**2)

    def mass(self, c: ScalarConstants) -> float:
        if self.M0 is not None:
            return float(self.M0)
        L0 = self.base_length()
        if self.slaving is Slaving.MASS:
            return L0 * (c.m0 + self.eps * c.eta_d * c.m2) + self.sigma0 * (
                c.B2_far * self.area + self.eps * L0 * c.B2_excess)
        return c.m0 * L0 + self.sigma0 * c.B2_far * self.area

    def leading_sigma0(self, c: ScalarConstants) -> float:
        return (self.mass(c) - c.m0 * self.base_length()) / (c.B2_far * self.area)


@dataclass(frozen=True)
class RclState:
    p: MeanderParams
    sigma: float
    time: float = 0.0


class DomainExit(RuntimeError):
    pass


def slaved_sigma(p: MeanderParams, cfg: RclConfig, c: ScalarConstants) -> float:
    """Bulk density fixed by the mass constraint at parameters ``p``."""
    if cfg.slaving is Slaving.MASS:
        length = cfg.base_length() * (1.0 + p.p0)
        num = cfg.mass(c) - length * (c.m0 + cfg.eps * c.eta_d * c.m2)
        return num / (c.B2_far * cfg.area + cfg.eps * length * c.B2_excess)
    return cfg.leading_sigma0(c) - cfg.c0(c) * c.m1**2 * cfg.R0 * p.p0 / c.m0


def stationary_sigma(cfg: RclConfig, c: ScalarConstants, radius: float) -> float:
    """Bulk density at which a circle of the given radius has zero normal velocity."""
    return c.sigma1_star - cfg.eps * (c.m1**2 / c.m0) * (0.5 / radius**2 + cfg.alpha_value)


def normal_velocity(curve: CurveSamples, sigma: float, cfg: RclConfig, c: ScalarConstants) -> np.ndarray:
    """eps^3 (m0/m1^2)(sigma1* - sigma) kappa - eps^4 (Lap_s kappa + kappa^3/2 + alpha kappa)."""
    k = curve.kappa
    eps = cfg.eps
    willmore = curve.laplace_beltrami(k) + 0.5 * k**3 + cfg.alpha_value * k
    return eps**3 * (c.m0 / c.m1**2) * (c.sigma1_star - sigma) * k - eps**4 * willmore


def parameter_rates(curve: CurveSamples, V: np.ndarray) -> np.ndarray:
    """Convert a normal velocity into dp/dt with the leading-order sensitivity table.

    The Galerkin coefficients of V are divided by R0/Theta_0 for p0, by
    1/sqrt(2) for the translations and by (1 + p0) for the shape modes.
    """
    b = curve.basis
    coef = curve.integrate(curve.modes() * V) / curve.scale
    rates = coef.copy()
    rates[0] = coef[0] * b.theta0 / b.R0
    rates[1:3] = coef[1:3] * np.sqrt(2.0)
    rates[3:] = coef[3:] / curve.scale
    return rates


def step_curve(state: RclState, cfg: RclConfig, c: ScalarConstants, basis: ModeBasis,
               curve: Optional[CurveSamples] = None) -> RclState:
    """One explicit Euler step of the projected curve flow, then re-slave sigma."""
    if curve is None:
        curve = build_curve(basis, state.p)
    V = normal_velocity(curve, state.sigma, cfg, c)
    rates = parameter_rates(curve, V)
    dt = cfg.time_step
    p = MeanderParams.from_vector(state.p.as_vector() + dt * rates)
    if not p.in_domain(cfg.delta, cfg.domain_C):
        raise DomainExit(f"parameters left the admissible set at t = {state.time + dt:.6g}")
    return RclState(p, slaved_sigma(p, cfg, c), state.time + dt)


def p0_star(cfg: RclConfig, c: ScalarConstants, first_order: Optional[bool] = None) -> float:
    """Equilibrium length parameter.

    The leading term is -(m0 / (c0 R0 m1^2)) (sigma1* - sigma0). With
    ``first_order`` (default: when alpha is given) the eps correction
    (1/(c0 R0)) (1/(2 R0^2 (1 + p00)^2) + alpha) is added; the constant
    from the mass expansion is taken as zero.
    """
    c0 = cfg.c0(c)
    p00 = -(c.m0 / (c0 * cfg.R0 * c.m1**2)) * (c.sigma1_star - cfg.leading_sigma0(c))
    if first_order is None:
        first_order = cfg.alpha is not None
    if not first_order:
        return p00
    corr = (0.5 / (cfg.R0**2 * (1.0 + p00) ** 2) + cfg.alpha_value) / (c0 * cfg.R0)
    return p00 + cfg.eps * corr


def equilibrium_p0(cfg: RclConfig, c: ScalarConstants) -> float:
    """p0 of the stationary circle of the curve flow under the configured slaving."""
    def g(p0):
        sig = slaved_sigma(MeanderParams(p0, 0.0, 0.0, np.zeros(cfg.N1 - 3)), cfg, c)
        return sig - stationary_sigma(cfg, c, cfg.R0 * (1.0 + p0))
    return brentq(g, -0.45, 5.0, xtol=1e-15)


def mass_for_radius(cfg: RclConfig, c: ScalarConstants, radius: float) -> float:
    """Mass M0 whose stationary circle has the given radius (p0 = radius/R0 - 1)."""
    probe = replace(cfg, M0=0.0, sigma0=None)
    p0 = radius / cfg.R0 - 1.0
    # sigma is affine in M0 for both slaving rules
    s_at_zero = slaved_sigma(MeanderParams(p0, 0.0, 0.0, np.zeros(cfg.N1 - 3)), probe, c)
    probe1 = replace(cfg, M0=1.0, sigma0=None)
    s_at_one = slaved_sigma(MeanderParams(p0, 0.0, 0.0, np.zeros(cfg.N1 - 3)), probe1, c)
    return (stationary_sigma(cfg, c, radius) - s_at_zero) / (s_at_one - s_at_zero)


def shape_U(basis: ModeBasis) -> np.ndarray:
    """U matrix restricted to the shape block, evaluated at p = 0."""
    curve = build_curve(basis, MeanderParams.zeros(basis.N1))
    return xi_functions(curve).U[:, 3:]


def meander_rhs(p: MeanderParams, cfg: RclConfig, c: ScalarConstants, U: np.ndarray,
                pstar: Optional[float] = None) -> np.ndarray:
    """Linear/bilinear meander vector field with the remainders dropped."""
    basis_beta = ((np.arange(p.N1) + 1) // 2)[3:].astype(float)
    D = np.diag(basis_beta**2)
    pstar = p0_star(cfg, c) if pstar is None else pstar
    eps, R0 = cfg.eps, cfg.R0
    c0 = cfg.c0(c)
    dp0 = p.p0 - pstar
    ph = np.asarray(p.p_hat, dtype=float)
    out = np.zeros(p.N1)
    out[0] = -eps**3 * (c0 / R0) * dp0
    I = np.eye(len(ph))
    out[3:] = -eps**3 * ((c0 / R0) * dp0 * (D + U.T) @ ph + (eps / R0**4) * ((D - I) @ (D - I)) @ ph)
    return out


def meander_rates(cfg: RclConfig, N1: Optional[int] = None) -> np.ndarray:
    """Decay rates eps^4 (beta^2 - 1)^2 / R0^4 of the shape modes at p0 = p0*."""
    N1 = cfg.N1 if N1 is None else N1
    beta = ((np.arange(N1) + 1) // 2)[3:].astype(float)
    return cfg.eps**4 * (beta**2 - 1.0) ** 2 / cfg.R0**4


def reduced_energy(curve: CurveSamples, sigma: float, cfg: RclConfig, c: ScalarConstants) -> float:
    """nu_s/2 int kappa^2 + (nu_b / 2 eps)(sigma - sigma1*)^2."""
    bend = 0.5 * c.nu_s * float(curve.integrate(curve.kappa**2))
    return bend + 0.5 * c.nu_b(cfg.area) / cfg.eps * (sigma - c.sigma1_star) ** 2


def _circle_energy(p0: float, sigma: float, cfg: RclConfig, c: ScalarConstants) -> float:
    R = cfg.R0 * (1.0 + p0)
    return 0.5 * c.nu_s * 2.0 * np.pi / R + 0.5 * c.nu_b(cfg.area) / cfg.eps * (sigma - c.sigma1_star) ** 2


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    params: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    length: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    V2sq: list = field(default_factory=list)
    V3sq: list = field(default_factory=list)
    halted: Optional[str] = None

    def append(self, t, p: MeanderParams, sigma, length, energy):
        self.times.append(float(t))
        self.params.append(p)
        self.sigma.append(float(sigma))
        self.length.append(float(length))
        self.energy.append(float(energy))
        self.V2sq.append(p.weighted_norm(2, 2) ** 2)
        self.V3sq.append(p.weighted_norm(3, 2) ** 2)

    @property
    def p0(self) -> np.ndarray:
        return np.array([q.p0 for q in self.params])

    def mode(self, j: int) -> np.ndarray:
        return np.array([q.as_vector()[j] for q in self.params])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time [nondim]", "p0 [-]", "sigma [nondim]", "length [nondim]", "energy [nondim]",
                        "V2sq [-]", "V3sq [-]"])
            for row in zip(self.times, self.p0, self.sigma, self.length, self.energy, self.V2sq, self.V3sq):
                w.writerow([f"{v:.12g}" for v in row])


def run_reduced(cfg: RclConfig, c: ScalarConstants, basis: ModeBasis, initial: RclState,
                mode: ReducedMode = ReducedMode.FULL_CURVE, pstar: Optional[float] = None,
                U: Optional[np.ndarray] = None) -> Trajectory:
    """Integrate either reduced level to ``cfg.t_end`` with explicit Euler.

    A departure from the admissible set, or a curve that can no longer be
    built, halts the run; the reason is stored in ``Trajectory.halted``.
    """
    mode = ReducedMode(mode)
    dt = cfg.time_step
    nsteps = int(round(cfg.t_end / dt))
    traj = Trajectory()
    state = RclState(initial.p, slaved_sigma(initial.p, cfg, c), initial.time)
    if mode is ReducedMode.MEANDER_ODE:
        U = shape_U(basis) if U is None else U
        pstar = p0_star(cfg, c) if pstar is None else pstar
    for n in range(nsteps + 1):
        if mode is ReducedMode.FULL_CURVE:
            try:
                curve = build_curve(basis, state.p)
            except CurveError as exc:
                traj.halted = str(exc)
                break
            if n % cfg.record_every == 0 or n == nsteps:
                traj.append(state.time, state.p, state.sigma, curve.total_length,
                            reduced_energy(curve, state.sigma, cfg, c))
            if n == nsteps:
                break
            try:
                state = step_curve(state, cfg, c, basis, curve)
            except DomainExit as exc:
                traj.halted = str(exc)
                break
        else:
            if n % cfg.record_every == 0 or n == nsteps:
                length = cfg.base_length() * (1.0 + state.p.p0)
                traj.append(state.time, state.p, state.sigma, length,
                            _circle_energy(state.p.p0, state.sigma, cfg, c))
            if n == nsteps:
                break
            v = state.p.as_vector() + dt * meander_rhs(state.p, cfg, c, U, pstar)
            p = MeanderParams.from_vector(v)
            if not p.in_domain(cfg.delta, cfg.domain_C):
                traj.halted = f"parameters left the admissible set at t = {state.time + dt:.6g}"
                break
            state = RclState(p, slaved_sigma(p, cfg, c), state.time + dt)
    return traj
