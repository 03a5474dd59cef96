"""Interface recovery from a bilayer field and leading-order meander parameter fits.

This is a geometric surrogate for an orthogonal manifold projection: the
interface is the midline between the inner and outer flank of the bilayer
along rays from its centre, which agrees to leading order for nearly
circular interfaces.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from .curve import ModeBasis, MeanderParams
from .field import Grid2D
from .well import WellSpec, validate_well


def default_level(spec: WellSpec = WellSpec()) -> float:
    """Halfway between the far-field well and the profile's turning point."""
    ustar = validate_well(spec).turning_point
    return spec.b_minus + 0.5 * (ustar - spec.b_minus)


@dataclass(frozen=True)
class ExtractConfig:
    n_rays: int = 512
    level: Optional[float] = None
    center_seed: tuple = (0.0, 0.0)
    max_skip_fraction: float = 0.05
    N1: Optional[int] = None

    def __post_init__(self):
        if self.n_rays < 16:
            raise ValueError("n_rays must be at least 16")
        if self.N1 is not None and self.n_rays < 4 * self.N1:
            raise ValueError("n_rays must be at least 4 * N1")

    def resolved_level(self, spec: WellSpec = WellSpec()) -> float:
        return default_level(spec) if self.level is None else float(self.level)


class ExtractionError(RuntimeError):
    pass


@dataclass
class Interface:
    theta: np.ndarray
    radius: np.ndarray      # NaN on skipped rays
    center: np.ndarray
    inner: np.ndarray
    outer: np.ndarray
    skipped: int

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.radius)

    def points(self) -> np.ndarray:
        ok = self.valid
        d = np.stack([np.cos(self.theta[ok]), np.sin(self.theta[ok])], axis=1)
        return self.center + self.radius[ok, None] * d

    def length(self) -> float:
        pts = self.points()
        return float(np.sum(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta [rad]", "radius [nondim]", "x [nondim]", "y [nondim]"])
            for th, r in zip(self.theta, self.radius):
                x, y = self.center + r * np.array([np.cos(th), np.sin(th)])
                w.writerow([f"{th:.12g}", f"{r:.12g}", f"{x:.12g}", f"{y:.12g}"])


def _wrap(d: np.ndarray, L: float) -> np.ndarray:
    return (d + L) % (2.0 * L) - L


def _centroid(grid: Grid2D, u: np.ndarray, level: float, seed) -> np.ndarray:
    mask = u > level
    if not np.any(mask):
        raise ExtractionError("no point of the field exceeds the extraction level")
    rel = _wrap(grid.points[mask] - np.asarray(seed, dtype=float), grid.L)
    return np.asarray(seed, dtype=float) + rel.mean(axis=0)


class _Sampler:
    """Periodic cubic-spline interpolant of a grid field at physical points."""

    def __init__(self, grid: Grid2D, u: np.ndarray):
        self.grid = grid
        self.coef = spline_filter(u, order=3, mode="grid-wrap")

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        g = self.grid
        ix = (x + g.L) / g.h
        iy = (y + g.L) / g.h
        return map_coordinates(self.coef, [ix.ravel(), iy.ravel()], order=3, mode="grid-wrap",
                               prefilter=False).reshape(np.shape(x))


def locate_interface(grid: Grid2D, u: np.ndarray, cfg: ExtractConfig = ExtractConfig(),
                     spec: WellSpec = WellSpec()) -> Interface:
    """Radius of the bilayer midline along ``cfg.n_rays`` rays from its centroid.

    Rays with other than two level crossings are skipped; if more than
    ``cfg.max_skip_fraction`` are skipped an ExtractionError is raised.
    """
    level = cfg.resolved_level(spec)
    center = _centroid(grid, u, level, cfg.center_seed)
    sample = _Sampler(grid, u)
    theta = 2.0 * np.pi * np.arange(cfg.n_rays) / cfg.n_rays
    dr = grid.h / 4.0
    r = np.arange(0.0, grid.L, dr)
    cos, sin = np.cos(theta)[:, None], np.sin(theta)[:, None]
    vals = sample(center[0] + r[None, :] * cos, center[1] + r[None, :] * sin) - level

    sgn = np.signbit(vals)
    flips = sgn[:, 1:] != sgn[:, :-1]
    counts = flips.sum(axis=1)
    good = counts == 2
    skipped = int(np.sum(~good))
    if skipped > cfg.max_skip_fraction * cfg.n_rays:
        raise ExtractionError(f"{skipped} of {cfg.n_rays} rays do not cross the bilayer exactly twice")

    inner = np.full(cfg.n_rays, np.nan)
    outer = np.full(cfg.n_rays, np.nan)
    rows = np.nonzero(good)[0]
    if rows.size:
        idx = np.array([np.nonzero(flips[i])[0] for i in rows])  # (n_good, 2)
        for col, dest in ((0, inner), (1, outer)):
            lo = r[idx[:, col]].copy()
            hi = lo + dr
            c, s = cos[rows, 0], sin[rows, 0]
            flo = sample(center[0] + lo * c, center[1] + lo * s) - level
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                fm = sample(center[0] + mid * c, center[1] + mid * s) - level
                same = np.signbit(fm) == np.signbit(flo)
                lo = np.where(same, mid, lo)
                flo = np.where(same, fm, flo)
                hi = np.where(same, hi, mid)
            dest[rows] = 0.5 * (lo + hi)
    radius = 0.5 * (inner + outer)
    return Interface(theta, radius, center, inner, outer, skipped)


def fit_modes(interface: Interface, basis: ModeBasis, R0: Optional[float] = None) -> MeanderParams:
    """Meander parameters from a polar interface description.

    p0 comes from the measured length, which equals 2 pi R0 (1 + p0) exactly;
    the mean radius differs from R0 (1 + p0) at second order in the shape
    amplitudes. (p1, p2) are the centre divided by Theta_0, and the shape
    modes are Fourier coefficients of the radius rescaled to the
    unit-normalized modes.
    """
    R0 = basis.R0 if R0 is None else R0
    ok = interface.valid
    th, rad = interface.theta[ok], interface.radius[ok]
    if th.size < basis.N1:
        raise ExtractionError("too few valid rays to fit the requested modes")
    # least squares on the valid rays (reduces to the DFT when none are skipped)
    k = basis.beta
    cols = [np.ones_like(th)]
    for j in range(1, basis.N1):
        cols.append(np.cos(k[j] * th) if j % 2 else np.sin(k[j] * th))
    A = np.stack(cols, axis=1)
    a, *_ = np.linalg.lstsq(A, rad, rcond=None)
    p0 = interface.length() / (2.0 * np.pi * R0) - 1.0
    # r = (1 + p0)/A_norm (R0 + pbar), and (1 + p0)/A_norm = mean(r)/R0
    p_hat = a[3:] * np.sqrt(np.pi * R0) * R0 / a[0]
    # a[1], a[2] (first harmonic of r) measure the residual centre offset
    ctr = interface.center + np.array([a[1], a[2]])
    p12 = ctr * np.sqrt(2.0 * np.pi * R0)
    return MeanderParams(float(p0), float(p12[0]), float(p12[1]), p_hat)


def radial_mode_amplitudes(interface: Interface, kmax: int = 16) -> np.ndarray:
    """Amplitudes sqrt(a_k^2 + b_k^2) of the radius harmonics k = 1..kmax."""
    ok = interface.valid
    th, rad = interface.theta[ok], interface.radius[ok]
    ks = np.arange(1, kmax + 1)
    A = np.concatenate([np.ones((th.size, 1)), np.cos(th[:, None] * ks), np.sin(th[:, None] * ks)], axis=1)
    a, *_ = np.linalg.lstsq(A, rad, rcond=None)
    return np.hypot(a[1:kmax + 1], a[kmax + 1:])
