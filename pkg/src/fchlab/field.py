"""Periodic 2D fields: spectral calculus, bilayer synthesis, energy and chemical potential."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .curve import CurveSamples, signed_distance
from .profile import LineOperator, Profile1D, ScalarConstants, b_function, build_constants, build_phi0, solve_L0
from .well import WellSpec


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on [-L, L)^2 with N points per axis."""

    L: float
    N: int

    def __post_init__(self):
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def area(self) -> float:
        return (2.0 * self.L) ** 2

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray]:
        """Wavenumbers for rfft2 layout (axis 0 full, axis 1 half)."""
        kx = np.fft.fftfreq(self.N, d=1.0 / self.N) * np.pi / self.L
        ky = np.fft.rfftfreq(self.N, d=1.0 / self.N) * np.pi / self.L
        return kx[:, None], ky[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        kx, ky = self.k
        return kx**2 + ky**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kx, ky = self.k
        kmax = np.pi / self.L * self.N / 2
        return (np.abs(kx) < 2.0 / 3.0 * kmax) & (np.abs(ky) < 2.0 / 3.0 * kmax)

    def fft(self, u: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(u)

    def ifft(self, uh: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(uh, s=(self.N, self.N))

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.ifft(-self.ksq * self.fft(u))

    def integrate(self, u: np.ndarray) -> float:
        return float(np.sum(u) * self.h**2)

    def mean(self, u: np.ndarray) -> float:
        return float(np.mean(u))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(u * v) * self.h**2)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.inner(u, u)))


@dataclass
class Field2D:
    grid: Grid2D
    values: np.ndarray
    eps: float = float("nan")
    time: float = 0.0

    def save(self, path) -> None:
        save_field(path, self.grid, self.values, self.eps, self.time)


def save_field(path, grid: Grid2D, u: np.ndarray, eps: float, time: float) -> None:
    """Flat little-endian float64 row-major binary plus a key = value sidecar."""
    path = Path(path)
    np.ascontiguousarray(u, dtype="<f8").tofile(path)
    path.with_suffix(path.suffix + ".txt").write_text(
        f"N = {grid.N}\nL = {grid.L!r}\neps = {eps!r}\ntime = {time!r}\n")


def load_field(path) -> Field2D:
    path = Path(path)
    meta = {}
    for line in path.with_suffix(path.suffix + ".txt").read_text().splitlines():
        key, _, val = line.partition("=")
        meta[key.strip()] = val.strip()
    grid = Grid2D(float(meta["L"]), int(meta["N"]))
    u = np.fromfile(path, dtype="<f8").reshape(grid.N, grid.N)
    return Field2D(grid, u, float(meta["eps"]), float(meta["time"]))


def save_png(path, grid: Grid2D, u: np.ndarray, title: str = "", vmin=None, vmax=None) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.2, 4))
    im = ax.imshow(u.T, origin="lower", extent=(-grid.L, grid.L, -grid.L, grid.L),
                   cmap="viridis", vmin=vmin, vmax=vmax)
    fig.colorbar(im, ax=ax, fraction=0.046)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


# ---------------------------------------------------------------- dressing

def cutoff(t: np.ndarray) -> np.ndarray:
    """1 for t <= 1, 0 for t >= 2, cubic smoothstep in between."""
    x = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - x * x * (3.0 - 2.0 * x)


def default_ell(grid: Grid2D, curve: CurveSamples, margin: Optional[float] = None) -> float:
    """Tube half-width: half the mean radius, kept inside the domain."""
    center = curve.gamma.mean(axis=0)
    radii = np.hypot(*(curve.gamma - center).T)
    if margin is None:
        margin = 2.0 * grid.h
    room = grid.L - np.max(np.abs(curve.gamma)) - margin
    ell = min(0.5 * radii.min(), 0.5 * room)
    if ell <= 0:
        raise ValueError("the tube around the curve does not fit in the domain")
    return float(ell)


@dataclass
class Distance:
    """Signed distance to a curve on the grid, NaN outside the 2*ell tube."""

    r: np.ndarray
    ell: float


def distance_field(grid: Grid2D, curve: CurveSamples, ell: float) -> Distance:
    _, r = signed_distance(curve, grid.points, 2.0 * ell)
    return Distance(r, ell)


def dress(grid: Grid2D, curve: CurveSamples, z: np.ndarray, profile: np.ndarray, far_value: float,
          eps: float, ell: Optional[float] = None, distance: Optional[Distance] = None) -> np.ndarray:
    """Extend a profile of the scaled distance z = r/eps to the grid, cut off at |r| = 2 ell."""
    if distance is None:
        ell = default_ell(grid, curve) if ell is None else ell
        distance = distance_field(grid, curve, ell)
    ell = distance.ell
    r = distance.r
    inside = np.isfinite(r)
    out = np.full(r.shape, float(far_value))
    zz = r[inside] / eps
    if np.any(np.abs(zz) > z[-1]):
        # profile beyond its table is taken as the far value
        zz = np.clip(zz, z[0], z[-1])
    vals = CubicSpline(z, profile)(zz)
    chi = cutoff(np.abs(r[inside]) / ell)
    out[inside] = vals * chi + far_value * (1.0 - chi)
    return out


@dataclass
class BilayerProfiles:
    """One-dimensional ingredients for synthesizing bilayer fields."""

    spec: WellSpec
    profile: Profile1D
    operator: LineOperator
    constants: ScalarConstants
    B2: np.ndarray
    odd_source: np.ndarray  # L0^{-1}(z phi0')

    @classmethod
    def build(cls, spec: WellSpec, eta1: float, eta2: float, n: int = 4097) -> "BilayerProfiles":
        p = build_phi0(spec, n=n)
        L = LineOperator.from_profile(p)
        c = build_constants(p, L, eta1, eta2)
        return cls(spec, p, L, c, b_function(L, 2), solve_L0(L, p.z * p.phi0_prime, 1))

    @property
    def z(self) -> np.ndarray:
        return self.profile.z

    @property
    def b_minus(self) -> float:
        return self.spec.b_minus

    def phi1(self, sigma: float) -> np.ndarray:
        return sigma * self.B2 + 0.5 * self.constants.eta_d * self.odd_source


def synthesize_bilayer(grid: Grid2D, curve: CurveSamples, profiles: BilayerProfiles, sigma: float,
                       eps: float, ell: Optional[float] = None, first_order: bool = True,
                       distance: Optional[Distance] = None) -> np.ndarray:
    """phi0 dressed with far value b_minus, plus eps times phi1(sigma) dressed with far value sigma B2_far."""
    if distance is None:
        ell = default_ell(grid, curve) if ell is None else ell
        distance = distance_field(grid, curve, ell)
    bm = profiles.b_minus
    u = dress(grid, curve, profiles.z, profiles.profile.phi0, bm, eps, distance=distance)
    if first_order:
        far = sigma * profiles.constants.B2_far
        u = u + eps * dress(grid, curve, profiles.z, profiles.phi1(sigma), far, eps, distance=distance)
    return u


def field_mass(grid: Grid2D, u: np.ndarray, b_minus: float, eps: float) -> float:
    """M0 with <u - b_minus> = eps M0 / |Omega|."""
    return grid.integrate(u - b_minus) / eps


@dataclass
class SigmaSolution:
    sigma: float
    sigma_leading: float
    sigma0: float
    c0: float
    B2_bar: float


def sigma_of_p(grid: Grid2D, curve: CurveSamples, profiles: BilayerProfiles, M0: float, eps: float,
               ell: Optional[float] = None, R0: Optional[float] = None) -> SigmaSolution:
    """Bulk density making the synthesized field carry mass M0, exactly on the grid.

    The leading-order prediction sigma0 - c0 m1^2 R0 p0 / m0 is returned alongside.
    """
    if ell is None:
        ell = default_ell(grid, curve)
    dist = distance_field(grid, curve, ell)
    c = profiles.constants
    bm = profiles.b_minus
    base = synthesize_bilayer(grid, curve, profiles, 0.0, eps, distance=dist)
    slope_field = eps * dress(grid, curve, profiles.z, profiles.B2, c.B2_far, eps, distance=dist)
    target = eps * M0 / grid.area
    slope = grid.mean(slope_field)
    if abs(slope) < 1e-14:
        raise ValueError("degenerate mass coefficient")
    sigma = (target - grid.mean(base - bm)) / slope

    R0 = curve.basis.R0 if R0 is None else R0
    length0 = 2.0 * np.pi * R0
    if abs(M0 - c.m0 * length0) > 10.0 * c.m0 * length0:
        import warnings
        warnings.warn("mass is far from the admissible range for this base curve")
    sigma0 = (M0 - c.m0 * length0) / (c.B2_far * grid.area)
    B2_bar = grid.integrate(slope_field) / eps
    c0 = 2.0 * np.pi * c.m0**2 / (B2_bar * c.m1**2)
    lead = sigma0 - c0 * c.m1**2 * R0 * curve.p.p0 / c.m0
    return SigmaSolution(float(sigma), float(lead), float(sigma0), float(c0), float(B2_bar))


# ------------------------------------------------------ energy and potential

def chemical_potential(grid: Grid2D, u: np.ndarray, eps: float, eta1: float, eta2: float,
                       spec: WellSpec = WellSpec(), dealias: bool = False) -> np.ndarray:
    """(eps^2 Lap - W''(u))(eps^2 Lap u - W'(u)) + eps (eta1 eps^2 Lap u - eta2 W'(u))."""
    _, w1, w2, _ = spec.derivatives()
    uh = grid.fft(u)
    lap_u = grid.ifft(-grid.ksq * uh)
    wp = w1(u)
    wpp = w2(u)
    if dealias:
        m = grid.dealias_mask
        wp = grid.ifft(grid.fft(wp) * m)
        wpp = grid.ifft(grid.fft(wpp) * m)
    a = eps**2 * lap_u - wp
    prod = wpp * a
    if dealias:
        prod = grid.ifft(grid.fft(prod) * grid.dealias_mask)
    return eps**2 * grid.laplacian(a) - prod + eps * (eta1 * eps**2 * lap_u - eta2 * wp)


def fch_energy(grid: Grid2D, u: np.ndarray, eps: float, eta1: float, eta2: float,
               spec: WellSpec = WellSpec()) -> float:
    """Integral of (eps/2)(Lap u - W'/eps^2)^2 - (eta1/2)|grad u|^2 - eta2 W / eps^2."""
    w, w1, _, _ = spec.derivatives()
    uh = grid.fft(u)
    lap_u = grid.ifft(-grid.ksq * uh)
    # |grad u|^2 integrates to -u Lap u on the periodic grid
    dens = 0.5 * eps * (lap_u - w1(u) / eps**2) ** 2 + 0.5 * eta1 * u * lap_u - eta2 * w(u) / eps**2
    return grid.integrate(dens)


def zero_mass_projection(grid: Grid2D, f: np.ndarray) -> np.ndarray:
    return f - np.mean(f)
