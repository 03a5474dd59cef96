"""Nearly circular closed curves parameterized by meander parameters.

A curve is described by p = (p0, p1, p2, p_hat): p0 rescales the length,
(p1, p2) translate, and p_hat holds the shape-mode amplitudes. Shape modes
are Laplace-Beltrami eigenfunctions of the base circle, evaluated in the
arclength of the perturbed curve itself, which makes the definition implicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class ModeBasis:
    """Orthonormal Fourier modes on the circle of radius ``R0``.

    Mode 0 is the constant, modes 2k-1 and 2k are cos and sin at wavenumber k.
    """

    R0: float
    N1: int = 33

    def __post_init__(self):
        if self.R0 <= 0:
            raise ValueError("R0 must be positive")
        if self.N1 < 4:
            raise ValueError("N1 must be at least 4")

    @property
    def beta(self) -> np.ndarray:
        j = np.arange(self.N1)
        return (j + 1) // 2

    @property
    def theta0(self) -> float:
        return 1.0 / np.sqrt(2.0 * np.pi * self.R0)

    def modes(self, s: np.ndarray, derivative: int = 0) -> np.ndarray:
        """Matrix (N1, len(s)) of the modes or their s-derivatives at base arclength ``s``."""
        s = np.asarray(s, dtype=float)
        out = np.empty((self.N1,) + s.shape)
        k = self.beta[1:, None] if s.ndim == 1 else self.beta[1:].reshape((-1,) + (1,) * s.ndim)
        arg = k * s / self.R0
        c = 1.0 / np.sqrt(np.pi * self.R0)
        w = (k / self.R0) ** derivative
        # d^n/ds^n of cos is cos(x + n pi/2), of sin is sin(x + n pi/2)
        shift = derivative * np.pi / 2
        cosm = c * w * np.cos(arg + shift)
        sinm = c * w * np.sin(arg + shift)
        out[0] = self.theta0 if derivative == 0 else 0.0
        out[1::2] = cosm[0::2]
        out[2::2] = sinm[1::2]
        return out

    def D(self) -> np.ndarray:
        """Diagonal of the weight matrix diag(beta_3^2, ..., beta_{N1-1}^2)."""
        return self.beta[3:].astype(float) ** 2


def n1_from_spectral_cutoff(eps: float, rho: float, R0: float) -> int:
    """Number of modes with eps^4 beta^4 / R0^4 <= rho (Weyl count on the circle)."""
    kmax = int(np.floor(R0 * rho**0.25 / eps))
    return max(4, 2 * kmax + 1)


@dataclass(frozen=True)
class MeanderParams:
    p0: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    p_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, N1: int) -> "MeanderParams":
        return cls(0.0, 0.0, 0.0, np.zeros(N1 - 3))

    @classmethod
    def from_vector(cls, v) -> "MeanderParams":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), v[3:].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.p0, self.p1, self.p2], np.asarray(self.p_hat, dtype=float)])

    @property
    def N1(self) -> int:
        return 3 + len(self.p_hat)

    def with_mode(self, j: int, value: float) -> "MeanderParams":
        v = self.as_vector()
        v[j] = value
        return MeanderParams.from_vector(v)

    def weighted_norm(self, r: float, k: int = 1) -> float:
        """(sum_j beta_j^{k r} |p_j|^k)^{1/k} over the shape modes j >= 3."""
        beta = ((np.arange(self.N1) + 1) // 2)[3:].astype(float)
        return float(np.sum(beta ** (k * r) * np.abs(self.p_hat) ** k) ** (1.0 / k))

    def in_domain(self, delta: float, C: float = 1.0) -> bool:
        """Membership of the admissible parameter set with constants (delta, C)."""
        return (self.p0 > -0.5
                and abs(self.p1) + abs(self.p2) + self.weighted_norm(2) <= C
                and self.weighted_norm(1) <= C * delta)


def _spectral_derivative(f: np.ndarray, period: float, order: int = 1) -> np.ndarray:
    m = len(f)
    k = np.fft.fftfreq(m, d=1.0 / m) * (2.0 * np.pi / period)
    if m % 2 == 0 and order % 2 == 1:
        k[m // 2] = 0.0
    return np.fft.ifft((1j * k) ** order * np.fft.fft(f)).real


def _periodic_antiderivative(f: np.ndarray, period: float) -> np.ndarray:
    """Integral from 0 of samples f on a uniform periodic grid, spectrally accurate.

    Returns mean(f) * s + (zero-mean periodic part).
    """
    m = len(f)
    fh = np.fft.fft(f)
    mean = fh[0].real / m
    k = np.fft.fftfreq(m, d=1.0 / m) * (2.0 * np.pi / period)
    gh = np.zeros_like(fh)
    nz = k != 0
    gh[nz] = fh[nz] / (1j * k[nz])
    if m % 2 == 0:
        gh[m // 2] = 0.0
    g = np.fft.ifft(gh).real
    s = np.arange(m) * period / m
    return mean * s + g - g[0]


@dataclass
class CurveSamples:
    basis: ModeBasis
    p: MeanderParams
    s: np.ndarray            # base parameter on [0, 2 pi R0)
    gamma: np.ndarray        # (M, 2)
    dgamma: np.ndarray       # (M, 2) derivative in s
    ddgamma: np.ndarray      # (M, 2)
    tilde_s: np.ndarray      # arclength of the curve at each sample
    speed: np.ndarray
    normal: np.ndarray       # outward unit normal, (M, 2)
    kappa: np.ndarray
    total_length: float
    A_norm: float
    pbar: np.ndarray         # shape perturbation p_bar at each sample
    iterations: int = 0
    _coef: Optional[np.ndarray] = None
    _tree: Optional[cKDTree] = None

    @property
    def M(self) -> int:
        return len(self.s)

    @property
    def period(self) -> float:
        return 2.0 * np.pi * self.basis.R0

    @property
    def ds(self) -> float:
        return self.period / self.M

    @property
    def scale(self) -> float:
        """1 + p0, the ratio of the curve length to the base circle length."""
        return 1.0 + self.p.p0

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Integral over the curve with respect to arclength (trapezoid in s)."""
        return np.sum(np.asarray(f) * self.speed, axis=-1) * self.ds

    def modes(self, derivative: int = 0) -> np.ndarray:
        """Shape modes evaluated in the curve's own arclength, (N1, M).

        Derivatives are taken with respect to that arclength.
        """
        sc = self.scale
        return self.basis.modes(self.tilde_s / sc, derivative) / sc**derivative

    def d_ds(self, f: np.ndarray) -> np.ndarray:
        """Derivative with respect to arclength."""
        return _spectral_derivative(f, self.period) / self.speed

    def laplace_beltrami(self, f: np.ndarray) -> np.ndarray:
        return self.d_ds(self.d_ds(f))

    # evaluation at arbitrary parameter values, used by the distance search
    def _coefficients(self) -> np.ndarray:
        if self._coef is None:
            z = self.gamma[:, 0] + 1j * self.gamma[:, 1]
            c = np.fft.fft(z) / self.M
            k = np.fft.fftfreq(self.M, d=1.0 / self.M)
            keep = np.abs(c) > 1e-15 * np.max(np.abs(c))
            keep &= np.abs(k) < self.M // 2
            self._coef = np.stack([k[keep], c[keep]])
        return self._coef

    def evaluate(self, s: np.ndarray, derivative: int = 0) -> np.ndarray:
        """Trigonometric interpolant of the curve at parameters ``s``, complex x + iy."""
        k, c = self._coefficients()
        k = k.real
        w = (1j * k / self.basis.R0) ** derivative * c
        phase = np.exp(1j * np.multiply.outer(np.asarray(s, dtype=float), k / self.basis.R0))
        return phase @ w

    def polyline(self) -> np.ndarray:
        return np.vstack([self.gamma, self.gamma[:1]])

    def to_text(self, path) -> None:
        np.savetxt(path, np.column_stack([self.tilde_s, self.gamma]), header="tilde_s x y")


class CurveError(RuntimeError):
    pass


def _segments_intersect(pts: np.ndarray) -> bool:
    """True if any two non-adjacent edges of the closed polygon cross."""
    a = pts
    b = np.roll(pts, -1, axis=0)
    m = len(pts)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    o1 = orient(A, B, C)
    o2 = orient(A, B, D)
    o3 = orient(C, D, A)
    o4 = orient(C, D, B)
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    gap = np.abs(i - j)
    gap = np.minimum(gap, m - gap)
    return bool(np.any(cross & (gap > 1)))


def build_curve(basis: ModeBasis, p: MeanderParams, M: Optional[int] = None, tol: float = 1e-10,
                maxit: int = 50, check_intersection: bool = True) -> CurveSamples:
    """Sample the curve for parameters ``p`` on ``M`` uniform base-parameter points.

    The shape perturbation is evaluated at the arclength of the curve being
    built, so the arclength is found by fixed-point iteration.
    """
    if p.N1 != basis.N1:
        raise ValueError("parameter vector length does not match the basis")
    if M is None:
        M = 8 * basis.N1 + (-(8 * basis.N1)) % 16
    if M < 8 * basis.N1:
        raise ValueError("M must be at least 8 * N1")
    if not p.p0 > -0.5:
        raise ValueError("p0 must exceed -1/2")

    R0 = basis.R0
    period = 2.0 * np.pi * R0
    sc = 1.0 + p.p0
    s = np.arange(M) * period / M
    e_r = np.stack([np.cos(s / R0), np.sin(s / R0)], axis=1)
    e_t = np.stack([-np.sin(s / R0), np.cos(s / R0)], axis=1)
    amps = np.asarray(p.p_hat, dtype=float)
    shape_active = np.any(amps != 0.0)

    def pbar_at(ts):
        if not shape_active:
            return np.zeros_like(ts)
        return amps @ basis.modes(ts / sc)[3:]

    tilde = sc * s
    A = 1.0
    it = 0
    for it in range(1, maxit + 1):
        q = pbar_at(tilde)
        dq = _spectral_derivative(q, period)
        base_speed = np.sqrt(dq**2 + ((R0 + q) / R0) ** 2)
        A = float(np.mean(base_speed))
        new = _periodic_antiderivative(sc * base_speed / A, period)
        change = np.max(np.abs(new - tilde))
        tilde = new
        if change < tol or not shape_active:
            break
    else:
        raise CurveError(f"arclength fixed point did not converge in {maxit} iterations")

    q = pbar_at(tilde)
    dq = _spectral_derivative(q, period)
    ddq = _spectral_derivative(q, period, 2)
    fac = sc / A
    shift = basis.theta0 * np.array([p.p1, p.p2])
    # gamma_pbar = (R0 + q) e_r, with e_r' = e_t / R0 and e_t' = -e_r / R0
    gam = fac * (R0 + q)[:, None] * e_r + shift
    dgam = fac * (dq[:, None] * e_r + ((R0 + q) / R0)[:, None] * e_t)
    ddgam = fac * ((ddq - (R0 + q) / R0**2)[:, None] * e_r + (2.0 * dq / R0)[:, None] * e_t)
    speed = np.hypot(dgam[:, 0], dgam[:, 1])
    if np.min(speed) < 1e-8:
        raise CurveError("degenerate parameterization speed")
    tangent = dgam / speed[:, None]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    kappa = np.sum(ddgam * normal, axis=1) / speed**2

    curve = CurveSamples(basis, p, s, gam, dgam, ddgam, tilde, speed, normal, kappa,
                         float(np.sum(speed) * period / M), A, q, it)
    if check_intersection and shape_active and _segments_intersect(gam):
        raise CurveError("self-intersection detected")
    return curve


def curvature(c: CurveSamples) -> np.ndarray:
    """Signed curvature gamma''.n / |gamma'|^2 from spectral derivatives in the parameter."""
    z = c.gamma[:, 0] + 1j * c.gamma[:, 1]
    dz = _spectral_derivative(z.real, c.period) + 1j * _spectral_derivative(z.imag, c.period)
    ddz = _spectral_derivative(z.real, c.period, 2) + 1j * _spectral_derivative(z.imag, c.period, 2)
    speed = np.abs(dz)
    if np.min(speed) < 1e-8:
        raise CurveError("degenerate parameterization speed")
    n = dz / speed * (-1j)  # rotate the tangent by -90 degrees
    return (ddz.real * n.real + ddz.imag * n.imag) / speed**2


@dataclass
class Projection:
    coefficients: np.ndarray
    reconstruction: np.ndarray


def galerkin_project(c: CurveSamples, f: np.ndarray, basis: Optional[ModeBasis] = None) -> Projection:
    """Project samples onto the first N1 modes in the curve's arclength."""
    th = c.modes()
    coef = c.integrate(th * f) / c.scale
    return Projection(coef, coef @ th)


@dataclass
class CurvatureProjections:
    A: np.ndarray
    B: np.ndarray


def curvature_projections(c: CurveSamples, basis: Optional[ModeBasis] = None, alpha: float = 0.0) -> CurvatureProjections:
    th = c.modes()
    k = c.kappa
    A = c.integrate(th * k)
    B = c.integrate(th * (-c.laplace_beltrami(k) - 0.5 * k**3 + alpha * k))
    return CurvatureProjections(A, B)


def linear_curvature(c: CurveSamples) -> np.ndarray:
    """kappa_{p,0} + Q_1: the curvature linearized in the shape amplitudes.

    kappa_{p,0} = -1/(R0 (1 + p0)) and
    Q_1 = sum_j (1 - beta_j^2) p_j Theta~_j / ((1 + p0) R0^2).
    """
    b = c.basis
    sc = c.scale
    th = c.modes()[3:]
    q1 = ((1.0 - b.beta[3:] ** 2) * np.asarray(c.p.p_hat)) @ th / (sc * b.R0**2)
    return -1.0 / (b.R0 * sc) + q1


def _log_A(basis: ModeBasis, p: MeanderParams, M: int) -> float:
    return np.log(build_curve(basis, p, M, check_intersection=False).A_norm)


@dataclass
class XiResult:
    xi: np.ndarray   # (N1, M)
    U: np.ndarray    # (N1 - 3, N1)


def xi_functions(c: CurveSamples, p: Optional[MeanderParams] = None, basis: Optional[ModeBasis] = None,
                 step: float = 1e-6) -> XiResult:
    """Normal sensitivities of the curve to each parameter, and the U matrix.

    Derivatives of ln A are central differences with the given step.
    """
    p = c.p if p is None else p
    basis = c.basis if basis is None else basis
    R0, N1, M = basis.R0, basis.N1, c.M
    sc = 1.0 + p.p0
    s = c.s
    n0 = np.stack([np.cos(s / R0), np.sin(s / R0)], axis=1)
    n0n = np.sum(n0 * c.normal, axis=1)

    dlnA = np.zeros(N1)
    v = p.as_vector()
    for j in [0] + list(range(3, N1)):
        vp, vm = v.copy(), v.copy()
        vp[j] += step
        vm[j] -= step
        dlnA[j] = (_log_A(basis, MeanderParams.from_vector(vp), M)
                   - _log_A(basis, MeanderParams.from_vector(vm), M)) / (2.0 * step)

    A = c.A_norm
    th = c.modes()
    dth = c.modes(1)
    pbar = c.pbar
    dpbar = c.d_ds(pbar)
    xi = np.empty((N1, M))
    xi[0] = -(((R0 + pbar) / A) * (1.0 - sc * dlnA[0]) - c.tilde_s * dpbar / A) * n0n
    xi[1] = -basis.theta0 * c.normal[:, 0]
    xi[2] = -basis.theta0 * c.normal[:, 1]
    for j in range(3, N1):
        xi[j] = -(th[j] - sc * dlnA[j] / A * (R0 + pbar)) * n0n

    U = c.integrate(c.tilde_s * dth[3:, None, :] * th[None, :, :]) / sc
    return XiResult(xi, U)


def xi_projection(c: CurveSamples, xi: np.ndarray) -> np.ndarray:
    """Matrix P[j, k] = -integral of xi_j times mode k over the curve."""
    return -c.integrate(xi[:, None, :] * c.modes()[None, :, :])


def signed_distance(c: CurveSamples, x, reach: float, newton_iters: int = 8):
    """Foot parameter and signed distance (positive outward) for points within ``reach``.

    ``x`` may be a single point or an array of shape (..., 2). Points outside
    the tube get NaN (for arrays) or ``None`` (for a single point).
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    flat = pts.reshape(-1, 2)
    if c._tree is None:
        c._tree = cKDTree(c.gamma)
    _, idx = c._tree.query(flat)
    sp = c.s[idx].astype(float)
    xc = flat[:, 0] + 1j * flat[:, 1]
    coarse = sp.copy()
    for _ in range(newton_iters):
        g = c.evaluate(sp)
        g1 = c.evaluate(sp, 1)
        g2 = c.evaluate(sp, 2)
        d = xc - g
        f = (d.conjugate() * g1).real
        df = -np.abs(g1) ** 2 + (d.conjugate() * g2).real
        step = np.divide(f, df, out=np.zeros_like(f), where=df < 0)
        step = np.clip(step, -c.ds * 4, c.ds * 4)
        sp = sp - step
        if np.max(np.abs(step)) < 1e-13 * c.period:
            break
    g = c.evaluate(sp)
    g1 = c.evaluate(sp, 1)
    bad = ~np.isfinite(sp)
    sp = np.where(bad, coarse, sp)
    n = g1 / np.abs(g1) * (-1j)
    d = xc - g
    r = (d.conjugate() * n).real
    sp = np.mod(sp, c.period)
    outside = np.abs(d) >= reach
    r = np.where(outside, np.nan, r)
    sp = np.where(outside, np.nan, sp)
    if single:
        if outside[0]:
            return None
        return float(sp[0]), float(r[0])
    shape = pts.shape[:-1]
    return sp.reshape(shape), r.reshape(shape)
