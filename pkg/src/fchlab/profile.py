"""Homoclinic bilayer profile, its linearization, and the scalar constants built from them.

The profile solves phi'' = W'(phi) on the line with phi -> b_minus at both ends.
It is computed from the first integral (phi')^2 = 2 W(phi) with the substitution
phi = u* - s^2, which removes the square-root singularity at the turning point.
The linearization L0 = -d^2/dz^2 + W''(phi0) is discretized by second-order
central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_banded, solveh_banded

from .well import WellSpec, validate_well


@dataclass(frozen=True)
class Profile1D:
    spec: WellSpec
    z: np.ndarray
    phi0: np.ndarray
    phi0_prime: np.ndarray
    far_field: float
    turning_point: float

    @property
    def h(self) -> float:
        return float(self.z[1] - self.z[0])

    def integrate(self, f) -> float:
        """Trapezoid rule on the z grid."""
        return float(np.trapezoid(f, dx=self.h))


def default_half_width(spec: WellSpec) -> float:
    """Half-width of the z domain; the profile tail is below 1e-10 there."""
    return 26.0 / np.sqrt(spec.w2_far)


def _turning_point_taylor(spec: WellSpec, ustar: float) -> Polynomial:
    """Q(t) with W(u* - s^2) = s^2 Q(s^2), exact for polynomial wells."""
    w = spec.polynomial()
    coeffs = []
    deriv = w
    fact = 1.0
    for k in range(1, w.degree() + 1):
        deriv = deriv.deriv()
        fact *= k
        coeffs.append(deriv(ustar) / fact * (-1.0) ** k)
    return Polynomial(coeffs)


def build_phi0(spec: WellSpec, L_z: Optional[float] = None, n: int = 4097) -> Profile1D:
    """Sample the even homoclinic profile on a uniform grid of ``n`` points on [-L_z, L_z].

    With phi = u* - s^2 the first integral reads dz = g(s) ds, g = sqrt(2 / Q(s^2)),
    where W(u* - s^2) = s^2 Q(s^2) and Q > 0 on [0, s_max), s_max^2 = u* - b_minus.
    The log singularity of z(s) at s_max is removed by s = s_max (1 - e^{-y}),
    after which z(y) is a smooth quadrature. Target z values are reached by
    Newton iteration on that quadrature.
    """
    report = validate_well(spec)
    if not report.ok:
        raise ValueError(f"invalid well: {', '.join(report.violations)}")
    if n < 512:
        raise ValueError("n must be at least 512")
    if L_z is None:
        L_z = default_half_width(spec)
    if L_z < 8.0 / np.sqrt(spec.w2_far):
        raise ValueError("L_z must be at least 8/sqrt(W''(b_minus))")

    ustar = report.turning_point
    q = _turning_point_taylor(spec, ustar)
    t_max = ustar - spec.b_minus
    s_max = np.sqrt(t_max)
    # Q has a double root at t_max (b_minus is a double root of W); divide it out
    r, rem = divmod(q, Polynomial([-t_max, 1.0]) ** 2)
    if np.max(np.abs(rem.coef)) > 1e-9 * np.max(np.abs(q.coef)):
        raise RuntimeError("well does not have a double root at b_minus")

    def dz_dy(y):
        e = np.exp(-y)
        s = s_max * (1.0 - e)
        return np.sqrt(2.0 / r(s * s)) / (s_max * (2.0 - e))

    nodes, weights = np.polynomial.legendre.leggauss(16)

    def panel_integral(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        y = mid[..., None] + half[..., None] * nodes
        return half * (dz_dy(y) @ weights)

    # y grows like sqrt(W''(b_minus)) z in the tail
    y_end = np.sqrt(spec.w2_far) * L_z + 10.0
    if y_end > 700.0:
        raise ValueError("L_z too large for double precision tail")
    edges = np.linspace(0.0, y_end, int(np.ceil(y_end / 0.05)) + 1)
    cum = np.concatenate([[0.0], np.cumsum(panel_integral(edges[:-1], edges[1:]))])
    if not np.all(np.isfinite(cum)) or cum[-1] < L_z:
        raise RuntimeError("profile quadrature did not converge")

    z = np.linspace(-L_z, L_z, n)
    zt = np.abs(z)
    idx = np.clip(np.searchsorted(cum, zt) - 1, 0, len(edges) - 2)
    y = edges[idx] + (zt - cum[idx]) / (cum[idx + 1] - cum[idx]) * (edges[idx + 1] - edges[idx])
    for _ in range(30):
        resid = cum[idx] + panel_integral(edges[idx], y) - zt
        step = resid / dz_dy(y)
        y = y - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, y_end):
            break
    else:
        raise RuntimeError("profile inversion did not converge")

    e = np.exp(-y)
    s = s_max * (1.0 - e)
    phi0 = spec.b_minus + s_max**2 * e * (2.0 - e)
    phi0_prime = -np.sign(z) * s * t_max * e * (2.0 - e) * np.sqrt(2.0 * r(s * s))
    return Profile1D(spec, z, phi0, phi0_prime, spec.b_minus, ustar)


class Moments(NamedTuple):
    m0: float
    m1: float
    m3: float


def moments(p: Profile1D) -> Moments:
    """Mass per unit length, L2 norm of phi0', and half the second moment of z phi0'."""
    m0 = p.integrate(p.phi0 - p.far_field)
    m1 = np.sqrt(p.integrate(p.phi0_prime**2))
    m3 = 0.5 * p.integrate((p.z * p.phi0_prime) ** 2)
    return Moments(m0, float(m1), m3)


@dataclass
class LineOperator:
    """Symmetric tridiagonal finite-difference form of L0 on the profile grid.

    Rows at the two ends use a reflecting closure, so constants are reproduced
    exactly in the far field where the potential equals W''(b_minus).
    """

    profile: Profile1D
    potential: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    _kernel: Optional[np.ndarray] = None
    _ground: Optional[tuple] = None

    @classmethod
    def from_profile(cls, p: Profile1D) -> "LineOperator":
        h = p.h
        pot = p.spec.derivatives()[2](p.phi0)
        diag = 2.0 / h**2 + pot
        diag[0] -= 1.0 / h**2
        diag[-1] -= 1.0 / h**2
        off = np.full(len(pot) - 1, -1.0 / h**2)
        return cls(p, pot, diag, off)

    @property
    def n(self) -> int:
        return len(self.diag)

    def apply(self, f: np.ndarray) -> np.ndarray:
        out = self.diag * f
        out[:-1] += self.off * f[1:]
        out[1:] += self.off * f[:-1]
        return out

    @property
    def norm_bound(self) -> float:
        return float(np.max(np.abs(self.diag)) + 2.0 * np.max(np.abs(self.off)))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def _banded(self, shift: float = 0.0) -> np.ndarray:
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.off
        ab[1] = self.diag - shift
        ab[2, :-1] = self.off
        return ab

    def _upper(self, shift: float) -> np.ndarray:
        ab = np.zeros((2, self.n))
        ab[0, 1:] = self.off
        ab[1] = self.diag - shift
        return ab

    def _inverse_iteration(self, shift, start, positive, deflate=None, tol=1e-14, maxit=500):
        solve = (lambda b: solveh_banded(self._upper(shift), b)) if positive else \
            (lambda b: solve_banded((1, 1), self._banded(shift), b))
        v = start / np.linalg.norm(start)
        lam = v @ self.apply(v)
        for _ in range(maxit):
            w = solve(v)
            if deflate is not None:
                w -= (deflate @ w) * deflate
            v = w / np.linalg.norm(w)
            lam = v @ self.apply(v)
            if np.linalg.norm(self.apply(v) - lam * v) <= tol * self.norm_bound:
                return lam, v
        raise RuntimeError("inverse iteration did not converge")

    def ground_state(self) -> tuple[float, np.ndarray]:
        if self._ground is None:
            shift = float(self.potential.min()) - 1.0
            start = np.exp(-self.profile.z**2)
            lam, v = self._inverse_iteration(shift, start, positive=True)
            # refine with a shift close to the eigenvalue
            lam, v = self._inverse_iteration(lam - 1e-3, v, positive=False)
            v = v * np.sign(v[self.n // 2])
            self._ground = (float(lam), v / np.sqrt(self.profile.h))
        return self._ground

    def kernel_vector(self) -> np.ndarray:
        """Unit (in the Euclidean sense) eigenvector of the discrete operator closest to 0."""
        if self._kernel is None:
            _, psi0 = self.ground_state()
            d = psi0 / np.linalg.norm(psi0)
            _, v = self._inverse_iteration(0.0, self.profile.phi0_prime, positive=False, deflate=d)
            self._kernel = v * np.sign(v @ self.profile.phi0_prime)
        return self._kernel


def ground_state(L: LineOperator) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of L0; the eigenfunction is L2-normalized and positive."""
    return L.ground_state()


class KernelProjectionWarning(UserWarning):
    pass


def solve_L0(L: LineOperator, f: np.ndarray, powers: int = 1, tol: float = 1e-10) -> np.ndarray:
    """Apply L0^{-powers} on the orthogonal complement of the translational kernel.

    The kernel component of ``f`` is projected out first; if it exceeds ``tol``
    relative to ``f`` a ``KernelProjectionWarning`` is issued.
    """
    if powers < 1:
        raise ValueError("powers must be >= 1")
    e = L.kernel_vector()
    f = np.asarray(f, dtype=float)
    comp = e @ f
    fn = np.linalg.norm(f)
    if fn > 0 and abs(comp) > tol * fn:
        import warnings
        warnings.warn(f"kernel component {abs(comp) / fn:.3e} projected out", KernelProjectionWarning)
    x = f - comp * e
    ab = L._banded()
    for _ in range(powers):
        x = solve_banded((1, 1), ab, x)
        x -= (e @ x) * e
    return x


def b_function(L: LineOperator, k: int) -> np.ndarray:
    """B_k = L0^{-k} 1."""
    return solve_L0(L, np.ones(L.n), k)


@dataclass(frozen=True)
class ScalarConstants:
    m0: float
    m1: float
    m2: float
    m3: float
    lambda0: float
    B2_far: float
    B2_bar_density: float
    B2_excess: float
    sigma1_star: float
    eta1: float
    eta2: float
    w2_far: float

    @property
    def eta_d(self) -> float:
        return self.eta1 - self.eta2

    @property
    def nu_s(self) -> float:
        return self.m1**2

    def nu_b(self, area: float) -> float:
        return area / self.w2_far**2


def sigma1_star(m0: float, m1: float, eta1: float, eta2: float) -> float:
    return -(eta1 + eta2) * m1**2 / (2.0 * m0)


def build_constants(p: Profile1D, L: LineOperator, eta1: float, eta2: float) -> ScalarConstants:
    """All scalar constants of the reduced theory for a given well and (eta1, eta2)."""
    mo = moments(p)
    lam0, _ = L.ground_state()
    w2 = p.spec.w2_far
    b2 = b_function(L, 2)
    m2 = 0.5 * p.integrate(solve_L0(L, p.z * p.phi0_prime, 1))
    return ScalarConstants(
        m0=mo.m0,
        m1=mo.m1,
        m2=m2,
        m3=mo.m3,
        lambda0=lam0,
        B2_far=1.0 / w2**2,
        B2_bar_density=1.0 / w2**2,
        B2_excess=p.integrate(b2 - 1.0 / w2**2),
        sigma1_star=sigma1_star(mo.m0, mo.m1, eta1, eta2),
        eta1=eta1,
        eta2=eta2,
        w2_far=w2,
    )


def phi1_profile(c: ScalarConstants, L: LineOperator, p: Profile1D, sigma: float, eta_d: float) -> np.ndarray:
    """First-order correction sigma B_2 + (eta_d/2) L0^{-1}(z phi0')."""
    out = np.zeros(L.n)
    if sigma != 0.0:
        out += sigma * b_function(L, 2)
    if eta_d != 0.0:
        out += 0.5 * eta_d * solve_L0(L, p.z * p.phi0_prime, 1)
    return out


def parity_parts(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Even and odd parts of samples on a grid symmetric about z = 0."""
    r = f[::-1]
    return 0.5 * (f + r), 0.5 * (f - r)


class PearlingCheck(NamedTuple):
    lhs: float
    stable: bool


def pearling_check(c: ScalarConstants, S1: float, eta_d: float) -> PearlingCheck:
    lhs = c.sigma1_star * S1 + eta_d * c.lambda0
    return PearlingCheck(lhs, lhs > 0)


def save_profile(path, z: np.ndarray, values: np.ndarray) -> None:
    np.savetxt(path, np.column_stack([z, values]), header="z value")
