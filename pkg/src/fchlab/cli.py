"""Command line: configuration, experiment presets and output emission.

Usage::

    python -m fchlab <preset> [--config FILE] [--out DIR] [--strict]

Presets are ``figure1``, ``equilibrium``, ``decay-rates``, ``constants`` and
``residual``. The configuration file has ``key = value`` lines grouped in
``[sections]``; see :class:`RunConfig` for the keys. The output directory
may also be set with the ``FCHLAB_OUT`` environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .curve import MeanderParams, ModeBasis, build_curve
from .extract import ExtractConfig, ExtractionError, fit_modes, locate_interface, radial_mode_amplitudes
from .field import (BilayerProfiles, Grid2D, chemical_potential, default_ell, field_mass, save_field, save_png,
                    synthesize_bilayer)
from .pdeflow import BlowUp, PdeConfig, run
from .profile import pearling_check
from .rclflow import (ReducedMode, RclConfig, RclState, equilibrium_p0, mass_for_radius, meander_rates, p0_star,
                      run_reduced)
from .well import WellSpec, validate_well

log = logging.getLogger("fchlab")

PRESETS = ("figure1", "equilibrium", "decay-rates", "constants", "residual")
OUT_ENV = "FCHLAB_OUT"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _modes(text: str) -> dict:
    """Parse ``"5:0.01, 8:-0.02"`` into {5: 0.01, 8: -0.02}."""
    out = {}
    for item in text.replace(",", " ").split():
        j, _, a = item.partition(":")
        out[int(j)] = float(a)
    return out


@dataclass
class RunConfig:
    """All knobs of a run, grouped as in the configuration file."""

    # [well]
    b_minus: float = -1.0
    b_plus: float = 1.0
    tau: float = 0.1
    # [grid]
    N: int = 128
    L: float = 2.0 * np.pi
    # [physics]
    eps: float = 0.2
    eta1: float = 1.45
    eta2: float = 2.0
    alpha: Optional[float] = None
    S1: Optional[float] = None
    # [mass]: exactly one of these; sigma0_factor multiplies sigma1*
    M0: Optional[float] = None
    sigma0: Optional[float] = None
    sigma0_factor: Optional[float] = None
    # [curve]
    R0: float = 3.0
    N1: int = 17
    p0: float = 0.0
    modes: dict = field(default_factory=dict)
    # [solver]
    scheme: str = "Sbdf2"
    dt: float = 0.05
    t_end: float = 600.0
    snapshot_every: int = 400
    stabilization_c: Optional[float] = None
    # [reduced]
    reduced_dt: float = 1.0
    reduced_t_end: float = 3000.0
    slaving: str = "mass"
    # [extract]
    n_rays: int = 512
    # [study]
    eps_list: tuple = (0.2, 0.1)
    grid_list: tuple = (256, 512)
    decay_modes: tuple = (3, 4, 5, 6, 7, 8)
    decay_amplitude: float = 1e-3
    pde_decay: bool = False
    pde_decay_modes: tuple = (7,)
    pde_decay_amplitude: float = 0.4
    pde_decay_t_end: float = 200.0
    # [run]
    seed: int = 20240601
    preset: str = "figure1"
    out: str = "out"

    _SECTIONS = {
        "well": ("b_minus", "b_plus", "tau"),
        "grid": ("N", "L"),
        "physics": ("eps", "eta1", "eta2", "alpha", "S1"),
        "mass": ("M0", "sigma0", "sigma0_factor"),
        "curve": ("R0", "N1", "p0", "modes"),
        "solver": ("scheme", "dt", "t_end", "snapshot_every", "stabilization_c"),
        "reduced": ("reduced_dt", "reduced_t_end", "slaving"),
        "extract": ("n_rays",),
        "study": ("eps_list", "grid_list", "decay_modes", "decay_amplitude", "pde_decay", "pde_decay_modes",
                  "pde_decay_amplitude", "pde_decay_t_end"),
        "run": ("seed", "preset", "out"),
    }

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable configuration: {exc}") from exc
        values = {}
        for section in parser.sections():
            allowed = cls._SECTIONS.get(section)
            if allowed is None:
                raise ConfigError(f"[{section}]: unknown section")
            for key, raw in parser.items(section):
                if key not in allowed:
                    raise ConfigError(f"{section}.{key}: unknown key")
                values[key] = cls._convert(section, key, raw)
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    @staticmethod
    def _convert(section, key, raw):
        try:
            if key == "modes":
                return _modes(raw)
            if key in ("eps_list",):
                return _floats(raw)
            if key in ("grid_list", "decay_modes", "pde_decay_modes"):
                return _ints(raw)
            if raw.strip().lower() in ("none", ""):
                return None
            if key == "pde_decay":
                return raw.strip().lower() in ("1", "true", "yes", "on")
            if key in ("N", "N1", "snapshot_every", "n_rays", "seed"):
                return int(raw)
            if key in ("scheme", "slaving", "preset", "out"):
                return raw.strip()
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc

    # ------------------------------------------------------------ derived objects
    @property
    def spec(self) -> WellSpec:
        return WellSpec(self.b_minus, self.b_plus, self.tau)

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.L, self.N)

    @property
    def basis(self) -> ModeBasis:
        return ModeBasis(self.R0, self.N1)

    def initial_params(self) -> MeanderParams:
        p = MeanderParams.zeros(self.N1).with_mode(0, self.p0)
        for j, a in self.modes.items():
            p = p.with_mode(j, a)
        return p

    def validate(self, profiles: Optional[BilayerProfiles] = None) -> None:
        """Field-level checks, including the admissible pair and that the tube fits."""
        rep = validate_well(self.spec)
        if not rep.ok:
            raise ConfigError("well: " + "; ".join(rep.violations))
        for name in ("eps", "dt", "t_end", "R0", "L", "reduced_dt"):
            if not getattr(self, name) > 0:
                section = next(k for k, v in self._SECTIONS.items() if name in v)
                raise ConfigError(f"{section}.{name}: must be positive")
        try:
            grid = self.grid
        except ValueError as exc:
            raise ConfigError(f"grid.N: {exc}") from exc
        try:
            self.basis
        except ValueError as exc:
            raise ConfigError(f"curve: {exc}") from exc
        if any(not 3 <= j < self.N1 for j in self.modes):
            raise ConfigError("curve.modes: indices must lie in 3..N1-1")
        given = [x is not None for x in (self.M0, self.sigma0, self.sigma0_factor)]
        if sum(given) != 1:
            raise ConfigError("mass: give exactly one of M0, sigma0, sigma0_factor")
        if self.scheme not in ("SemiImplicitSplitting", "Sbdf2", "Rk4Explicit"):
            raise ConfigError(f"solver.scheme: unknown scheme {self.scheme!r}")
        if self.slaving not in ("leading", "mass"):
            raise ConfigError(f"reduced.slaving: unknown rule {self.slaving!r}")
        if self.n_rays < 4 * self.N1:
            raise ConfigError("extract.n_rays: must be at least 4 * N1")
        try:
            curve = build_curve(self.basis, self.initial_params())
            ell = default_ell(grid, curve)
        except ValueError as exc:
            raise ConfigError(f"curve.R0: the tube around the initial curve does not fit in the domain "
                              f"[-{self.L:g}, {self.L:g})^2 ({exc})") from exc
        decay = 5.0 / np.sqrt(self.spec.w2_far)
        if ell / self.eps < decay:
            raise ConfigError(f"curve.R0: tube half-width {ell:.3g} is below {decay:.3g} eps; "
                              "the profile would be cut before it decays")
        if profiles is not None:
            sig = self.initial_sigma(profiles)
            if abs(sig) > 10.0 * abs(profiles.constants.sigma1_star) + 10.0:
                raise ConfigError("mass: (Gamma_0, M0) is not an admissible pair (sigma0 is not O(1))")

    def initial_sigma(self, profiles: BilayerProfiles) -> float:
        c = profiles.constants
        if self.sigma0_factor is not None:
            return self.sigma0_factor * c.sigma1_star
        if self.sigma0 is not None:
            return self.sigma0
        return (self.M0 - 2.0 * np.pi * self.R0 * c.m0) / (c.B2_far * self.grid.area)

    def reduced_config(self, profiles: BilayerProfiles, M0: float, eps: Optional[float] = None, **kw) -> RclConfig:
        args = dict(eps=self.eps if eps is None else eps, eta1=self.eta1, eta2=self.eta2, R0=self.R0, N1=self.N1,
                    M0=M0, alpha=self.alpha, area=self.grid.area, dt=self.reduced_dt,
                    t_end=self.reduced_t_end, slaving=self.slaving)
        args.update(kw)
        return RclConfig(**args)

    def pde_config(self, **kw) -> PdeConfig:
        args = dict(eps=self.eps, eta1=self.eta1, eta2=self.eta2, dt=self.dt, t_end=self.t_end,
                    scheme=self.scheme, stabilization_c=self.stabilization_c,
                    snapshot_every=self.snapshot_every, spec=self.spec)
        args.update(kw)
        return PdeConfig(**args)


# -------------------------------------------------------------------- output

def write_csv(path, header, rows) -> None:
    """CSV with a header row; every column name carries its unit in brackets."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, (float, np.floating)) else v for v in row])


@dataclass
class Diagnostic:
    name: str
    value: float
    threshold: str
    passed: bool


def write_diagnostics(path, diags) -> None:
    write_csv(path, ["diagnostic [-]", "value [nondim]", "threshold [-]", "pass [bool]"],
              [(d.name, float(d.value), d.threshold, str(d.passed)) for d in diags])


# --------------------------------------------------------- shared experiments

@dataclass
class CrossRun:
    """PDE run from a synthesized circle with extraction, next to the reduced curve flow."""

    times: np.ndarray
    p0_pde: np.ndarray
    length_pde: np.ndarray
    energy_pde: np.ndarray
    mass_pde: np.ndarray
    reduced_times: np.ndarray
    p0_reduced: np.ndarray
    length_reduced: np.ndarray
    final_mode_amplitudes: np.ndarray
    final_radius: float
    final_field: np.ndarray
    M0: float
    sigma_initial: float


def cross_run(cfg: RunConfig, profiles: Optional[BilayerProfiles] = None, out: Optional[Path] = None,
              pngs: bool = False) -> CrossRun:
    profiles = profiles or BilayerProfiles.build(cfg.spec, cfg.eta1, cfg.eta2)
    cfg.validate(profiles)
    grid, basis = cfg.grid, cfg.basis
    p_init = cfg.initial_params()
    curve = build_curve(basis, p_init)
    sigma = cfg.initial_sigma(profiles)
    u0 = synthesize_bilayer(grid, curve, profiles, sigma, cfg.eps)
    M0 = field_mass(grid, u0, cfg.b_minus, cfg.eps)
    ex = ExtractConfig(n_rays=cfg.n_rays, N1=cfg.N1)
    vmin, vmax = cfg.b_minus, max(float(u0.max()), validate_well(cfg.spec).turning_point)

    def hook(u):
        try:
            I = locate_interface(grid, u, ex, cfg.spec)
        except ExtractionError as exc:
            log.warning("extraction failed: %s", exc)
            return float("nan"), float("nan")
        return I.length(), fit_modes(I, basis).p0

    frame = [0]

    def snap(t, u):
        if out is None:
            return
        save_field(out / f"field_{frame[0]:04d}.bin", grid, u, cfg.eps, t)
        if pngs:
            save_png(out / f"field_{frame[0]:04d}.png", grid, u, f"t = {t:g}", vmin, vmax)
        frame[0] += 1

    res = run(u0, grid, cfg.pde_config(), extract_hook=hook, snapshot_hook=snap)
    s = res.series
    if out is not None:
        s.to_csv(out / "timeseries.csv")

    rcfg = cfg.reduced_config(profiles, M0)
    tr = run_reduced(rcfg, profiles.constants, basis, RclState(p_init, 0.0))
    if out is not None:
        tr.to_csv(out / "reduced.csv")
    if tr.halted:
        log.warning("reduced flow halted: %s", tr.halted)

    I = locate_interface(grid, res.final, ex, cfg.spec)
    amps = radial_mode_amplitudes(I, kmax=max(8, cfg.N1 // 2))
    return CrossRun(np.array(s.times), np.array(s.p0_estimates), np.array(s.interface_length_estimates),
                    np.array(s.energy_values), np.array(s.mass_values), np.array(tr.times), tr.p0,
                    np.array(tr.length), amps, float(np.nanmean(I.radius)), res.final, M0, sigma)


def transient_agreement(r: CrossRun, fraction: float = 0.9) -> tuple[float, float]:
    """Worst p0 mismatch over the transient, relative to the PDE's total p0 change.

    The transient ends when the PDE has covered ``fraction`` of its total
    change. Also returns the relative difference of the final radii.
    """
    p_red = np.interp(r.times, r.reduced_times, r.p0_reduced)
    total = r.p0_pde[-1] - r.p0_pde[0]
    covered = np.abs(r.p0_pde - r.p0_pde[0]) >= fraction * abs(total)
    end = int(np.argmax(covered)) if np.any(covered) else len(r.times) - 1
    mismatch = np.max(np.abs(r.p0_pde[:end + 1] - p_red[:end + 1])) / abs(total)
    radius_pde = 1.0 + r.p0_pde[-1]
    radius_red = 1.0 + r.p0_reduced[-1]
    return float(mismatch), float(abs(radius_pde - radius_red) / radius_pde)


def residual_norms(profiles: BilayerProfiles, eps: float, N: int, R0: float = 3.0, L: float = 2.0 * np.pi,
                   first_order: bool = True) -> tuple[float, float]:
    """L2 and sup norms of Pi_0 F at the synthesized circle with sigma = sigma1*."""
    c = profiles.constants
    grid = Grid2D(L, N)
    curve = build_curve(ModeBasis(R0, 17), MeanderParams.zeros(17))
    u = synthesize_bilayer(grid, curve, profiles, c.sigma1_star, eps, first_order=first_order)
    F = chemical_potential(grid, u, eps, c.eta1, c.eta2, profiles.spec)
    F = F - F.mean()
    return grid.norm(F), float(np.max(np.abs(F)))


# -------------------------------------------------------------------- presets

def preset_constants(cfg: RunConfig, out: Path) -> list:
    profiles = BilayerProfiles.build(cfg.spec, cfg.eta1, cfg.eta2)
    c = profiles.constants
    sigma0 = cfg.initial_sigma(profiles)
    M0 = cfg.M0 if cfg.M0 is not None else (2.0 * np.pi * cfg.R0 * c.m0 + sigma0 * c.B2_far * cfg.grid.area)
    rcfg = cfg.reduced_config(profiles, M0, slaving="leading")
    rows = [("m0", c.m0), ("m1", c.m1), ("m2", c.m2), ("m3", c.m3), ("lambda0", c.lambda0),
            ("B2_far", c.B2_far), ("C3", c.B2_excess), ("sigma1_star", c.sigma1_star),
            ("sigma1_star_check", -(cfg.eta1 + cfg.eta2) * c.m1**2 / (2.0 * c.m0)),
            ("nu_s", c.nu_s), ("nu_b", c.nu_b(cfg.grid.area)),
            ("sigma0", rcfg.leading_sigma0(c)), ("c0", rcfg.c0(c)), ("p0_star", p0_star(rcfg, c)),
            ("p0_star_first_order", p0_star(rcfg, c, first_order=True))]
    if cfg.S1 is not None:
        rows.append(("pearling_lhs", pearling_check(c, cfg.S1, c.eta_d).lhs))
    write_csv(out / "constants.csv", ["name [-]", "value [nondim]"], rows)
    for k, v in rows:
        print(f"{k:>22s} = {v: .10g}")
    return []


def preset_residual(cfg: RunConfig, out: Path) -> list:
    profiles = BilayerProfiles.build(cfg.spec, cfg.eta1, cfg.eta2)
    eps_list = cfg.eps_list
    grids = list(cfg.grid_list) + [cfg.grid_list[-1]] * (len(eps_list) - len(cfg.grid_list))
    rows = []
    for eps, N in zip(eps_list, grids):
        w = residual_norms(profiles, eps, N, cfg.R0, cfg.L, True)
        wo = residual_norms(profiles, eps, N, cfg.R0, cfg.L, False)
        rows.append((eps, N, w[0], wo[0], w[1], wo[1]))
    write_csv(out / "residual.csv", ["eps [nondim]", "N [points]", "L2_with_phi1 [nondim]",
                                     "L2_without_phi1 [nondim]", "sup_with_phi1 [nondim]",
                                     "sup_without_phi1 [nondim]"], rows)
    diags = []
    if len(rows) >= 2:
        e = np.log(rows[0][0] / rows[1][0])
        slopes = [np.log(rows[0][i] / rows[1][i]) / e for i in range(2, 6)]
        write_csv(out / "residual_slopes.csv", ["norm [-]", "slope [nondim]"],
                  list(zip(["L2_with", "L2_without", "sup_with", "sup_without"], slopes)))
        diags = [Diagnostic("L2 slope with phi1", slopes[0], ">= 1.8", slopes[0] >= 1.8),
                 Diagnostic("L2 slope without phi1", slopes[1], "1.0 +- 0.3", abs(slopes[1] - 1.0) <= 0.3)]
        for name, s in zip(["L2 with", "L2 without", "sup with", "sup without"], slopes):
            print(f"slope {name:12s} {s:.3f}")
    return diags


def preset_equilibrium(cfg: RunConfig, out: Path) -> list:
    profiles = BilayerProfiles.build(cfg.spec, cfg.eta1, cfg.eta2)
    c = profiles.constants
    basis = ModeBasis(cfg.R0, 9)
    sigma0 = cfg.initial_sigma(profiles)
    rows, diags = [], []
    for eps in cfg.eps_list:
        rc = RclConfig(eps, cfg.eta1, cfg.eta2, R0=cfg.R0, N1=9, sigma0=sigma0, alpha=cfg.alpha,
                       area=cfg.grid.area, slaving="leading")
        rate = eps**3 * rc.c0(c) / cfg.R0
        rc = replace(rc, dt=0.05 / rate, t_end=30.0 / rate)
        tr = run_reduced(rc, c, basis, RclState(MeanderParams.zeros(9), 0.0))
        pred = (rc.mass(c) - c.sigma1_star * c.B2_far * rc.area) / c.m0
        err = tr.length[-1] / pred - 1.0
        rows.append((eps, tr.length[-1], pred, err, tr.sigma[-1]))
        print(f"eps = {eps:g}: length {tr.length[-1]:.6f}, predicted {pred:.6f}, rel. error {err:.2e}")
    write_csv(out / "equilibrium.csv", ["eps [nondim]", "length [nondim]", "predicted_length [nondim]",
                                        "rel_error [-]", "sigma_final [nondim]"], rows)
    if rows:
        diags.append(Diagnostic("equilibrium length error at largest eps", abs(rows[0][3]), "<= 0.03",
                                abs(rows[0][3]) <= 0.03))
    return diags


def _fit_rate(t, a) -> float:
    return float(-np.polyfit(t, np.log(np.abs(a)), 1)[0])


def preset_decay_rates(cfg: RunConfig, out: Path) -> list:
    profiles = BilayerProfiles.build(cfg.spec, cfg.eta1, cfg.eta2)
    c = profiles.constants
    basis = cfg.basis
    base = cfg.reduced_config(profiles, 0.0, slaving="leading")
    M0 = mass_for_radius(base, c, cfg.R0)
    rc = replace(base, M0=M0)
    lam = meander_rates(rc)
    fast = lam.max()
    rng = np.random.default_rng(cfg.seed)
    rows, diags = [], []
    worst = 0.0
    for k in cfg.decay_modes:
        lk = lam[k - 3]
        pe = equilibrium_p0(rc, c)
        amp = cfg.decay_amplitude * (1.0 if rng.random() < 0.5 else -1.0)
        p = MeanderParams(pe, 0.0, 0.0, np.zeros(cfg.N1 - 3)).with_mode(k, amp)
        dt = min(0.01 / lk, 0.5 / fast)
        r = replace(rc, dt=dt, t_end=1.0 / lk)
        full = run_reduced(r, c, basis, RclState(p, 0.0))
        ode = run_reduced(r, c, basis, RclState(p, 0.0), mode=ReducedMode.MEANDER_ODE, pstar=pe)
        # explicit Euler decays by (1 - dt lam) per step
        euler = -np.log(1.0 - dt * lk) / dt
        f_full = _fit_rate(np.array(full.times), full.mode(k))
        f_ode = _fit_rate(np.array(ode.times), ode.mode(k))
        rel = abs(f_full / euler - 1.0)
        worst = max(worst, rel)
        rows.append((k, int(basis.beta[k]), lk, f_ode, f_full, rel))
        print(f"mode {k}: predicted {lk:.4e}, MeanderOde {f_ode:.4e}, FullCurve {f_full:.4e}")
    if cfg.pde_decay:
        rows += _pde_decay_rows(cfg, profiles, rc)
    write_csv(out / "decay_rates.csv", ["mode [-]", "beta [-]", "predicted_rate [1/time]",
                                        "meander_ode_rate [1/time]", "full_curve_rate [1/time]",
                                        "rel_error_full [-]"], rows)
    diags.append(Diagnostic("FullCurve rate error (worst mode)", worst, "<= 0.10", worst <= 0.10))
    return diags


def _pde_decay_rows(cfg: RunConfig, profiles: BilayerProfiles, rc: RclConfig) -> list:
    """Decay of large shape perturbations in the PDE, fitted from extracted amplitudes."""
    rows = []
    grid, basis = cfg.grid, cfg.basis
    c = profiles.constants
    ex = ExtractConfig(n_rays=cfg.n_rays, N1=cfg.N1)
    for k in cfg.pde_decay_modes:
        p = MeanderParams.zeros(cfg.N1).with_mode(k, cfg.pde_decay_amplitude)
        curve = build_curve(basis, p)
        u0 = synthesize_bilayer(grid, curve, profiles, c.sigma1_star, cfg.eps)
        amps, times = [], []

        def hook(u):
            I = locate_interface(grid, u, ex, cfg.spec)
            amps.append(fit_modes(I, basis).as_vector()[k])
            return I.length(), float("nan")

        pc = cfg.pde_config(t_end=cfg.pde_decay_t_end, snapshot_every=max(1, int(round(5.0 / cfg.dt))))
        res = run(u0, grid, pc, extract_hook=hook)
        times = np.array(res.series.times)
        f = _fit_rate(times, np.array(amps))
        lk = meander_rates(rc)[k - 3]
        rows.append((k, int(basis.beta[k]), lk, float("nan"), f, abs(f / lk - 1.0)))
        print(f"PDE mode {k}: predicted {lk:.4e}, fitted {f:.4e}")
    return rows


def preset_figure1(cfg: RunConfig, out: Path) -> list:
    r = cross_run(cfg, out=out, pngs=True)
    p_red = np.interp(r.times, r.reduced_times, r.p0_reduced)
    write_csv(out / "comparison.csv", ["time [nondim]", "p0_pde [-]", "p0_reduced [-]", "length_pde [nondim]"],
              zip(r.times, r.p0_pde, p_red, r.length_pde))
    growth = r.length_pde[-1] / r.length_pde[0] - 1.0
    worst = float(np.max(r.final_mode_amplitudes) / r.final_radius)
    mismatch, radius_gap = transient_agreement(r)
    print(f"length change {growth:+.4f}, worst radial mode / radius {worst:.2e}")
    print(f"p0 transient mismatch {mismatch:.3f}, final radius gap {radius_gap:.3f}")
    return [Diagnostic("relative length increase", growth, ">= 0.05", growth >= 0.05),
            Diagnostic("max radial mode amplitude / R_final", worst, "<= 1e-2", worst <= 1e-2),
            Diagnostic("p0 transient mismatch vs reduced", mismatch, "<= 0.10", mismatch <= 0.10),
            Diagnostic("final radius gap vs reduced", radius_gap, "<= 0.05", radius_gap <= 0.05)]


_RUNNERS = {
    "figure1": preset_figure1,
    "equilibrium": preset_equilibrium,
    "decay-rates": preset_decay_rates,
    "constants": preset_constants,
    "residual": preset_residual,
}


def run_experiment(cfg: RunConfig, strict: bool = False) -> int:
    """Run the configured preset; returns the process exit status."""
    if cfg.preset not in _RUNNERS:
        raise ConfigError(f"run.preset: unknown preset {cfg.preset!r}")
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "seed.txt").write_text(f"{cfg.seed}\n")
    try:
        diags = _RUNNERS[cfg.preset](cfg, out)
    except BlowUp as exc:
        save_field(out / "last_finite.bin", cfg.grid, exc.last_state, cfg.eps, exc.time)
        log.error("%s", exc)
        return 3
    if diags:
        write_diagnostics(out / "diagnostics.csv", diags)
        for d in diags:
            print(f"[{'PASS' if d.passed else 'FAIL'}] {d.name}: {d.value:.4g} (want {d.threshold})")
    failed = [d for d in diags if not d.passed]
    return 1 if (strict and failed) else 0


def _default_config(preset: str) -> RunConfig:
    cfg = RunConfig(preset=preset, sigma0_factor=2.0)
    if preset == "equilibrium":
        cfg = replace(cfg, sigma0_factor=0.5, eps_list=(0.1, 0.05, 0.025))
    return cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fchlab", description=__doc__.split("\n")[0])
    ap.add_argument("preset", choices=PRESETS)
    ap.add_argument("--config", type=Path, help="key = value configuration file")
    ap.add_argument("--out", type=Path, help=f"output directory (overrides ${OUT_ENV})")
    ap.add_argument("--strict", action="store_true", help="nonzero exit if any diagnostic fails")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.from_file(args.config) if args.config else _default_config(args.preset)
        if args.config and cfg.sigma0_factor is None and cfg.sigma0 is None and cfg.M0 is None:
            cfg = replace(cfg, sigma0_factor=2.0)
        cfg = replace(cfg, preset=args.preset)
        out = args.out or os.environ.get(OUT_ENV)
        if out:
            cfg = replace(cfg, out=str(out))
        return run_experiment(cfg, strict=args.strict)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
