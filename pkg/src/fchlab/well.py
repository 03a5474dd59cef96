"""Tilted double-well potential and its structural checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial


@dataclass(frozen=True)
class WellSpec:
    """Double well W with a left well ``b_minus`` and a deeper right well ``b_plus``.

    With ``coefficients`` unset the default tilted quartic is used,

        W(u) = (u - b_minus)^2 [ (u - b_plus)^2 / 2 + tau (u - b_plus - (b_plus - b_minus)/2) ].

    Otherwise ``coefficients`` are ascending power-series coefficients of a
    user polynomial, and ``tau`` is ignored.
    """

    b_minus: float = -1.0
    b_plus: float = 1.0
    tau: float = 0.1
    coefficients: Optional[Sequence[float]] = field(default=None)

    def polynomial(self) -> Polynomial:
        if self.coefficients is not None:
            return Polynomial(np.asarray(self.coefficients, dtype=float))
        bm, bp, tau = self.b_minus, self.b_plus, self.tau
        left = Polynomial([-bm, 1.0]) ** 2
        bracket = 0.5 * Polynomial([-bp, 1.0]) ** 2 + tau * Polynomial([-bp - 0.5 * (bp - bm), 1.0])
        return left * bracket

    def derivatives(self) -> tuple[Polynomial, ...]:
        """W, W', W'', W''' as polynomials."""
        w = self.polynomial()
        return (w, w.deriv(1), w.deriv(2), w.deriv(3))

    @property
    def w2_far(self) -> float:
        """W''(b_minus), the far-field stiffness."""
        return float(self.polynomial().deriv(2)(self.b_minus))


def eval_well(spec: WellSpec, u, order: int = 0):
    """Evaluate W or one of its first three derivatives at ``u``."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0, 1, 2 or 3, got {order!r}")
    return spec.derivatives()[order](u)


@dataclass(frozen=True)
class WellReport:
    ok: bool
    w2_at_bminus: float
    w_at_bplus: float
    turning_point: float
    violations: tuple[str, ...] = ()


def _bisect(f, lo: float, hi: float, tol: float = 1e-15, maxit: int = 200) -> float:
    flo = f(lo)
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def validate_well(spec: WellSpec, tol: float = 1e-12) -> WellReport:
    """Check the structural assumptions on W and return its landmarks.

    Never raises: failed conditions are listed in ``violations``.
    """
    w, w1, w2, _ = spec.derivatives()
    bm, bp = spec.b_minus, spec.b_plus
    violations = []
    if not np.all(np.isfinite(w.coef)):
        return WellReport(False, float("nan"), float("nan"), float("nan"), ("non-finite coefficients",))
    if not bm < bp:
        violations.append("b_minus < b_plus")
    scale = max(1.0, float(np.max(np.abs(w.coef))))
    if abs(w(bm)) > tol * scale:
        violations.append("W(b_minus) = 0")
    if abs(w1(bm)) > tol * scale:
        violations.append("W'(b_minus) = 0")
    if not w2(bm) > 0:
        violations.append("W''(b_minus) > 0")
    if abs(w1(bp)) > tol * scale:
        violations.append("W'(b_plus) = 0")
    if not w(bp) < -tol * scale:
        violations.append("W(b_plus) < 0")

    turning = float("nan")
    if not violations:
        # W > 0 just to the right of b_minus and W(b_plus) < 0, so a sign change is bracketed
        lo = bm + 1e-6 * (bp - bm)
        if w(lo) > 0:
            turning = _bisect(lambda x: float(w(x)), lo, bp)
            inner = np.linspace(bm, turning, 2001)[1:-1]
            if np.any(w(inner) <= 0):
                violations.append("W > 0 on (b_minus, u*)")
            roots = [r.real for r in w.roots() if abs(r.imag) < 1e-6 and bm + 1e-6 < r.real < bp - 1e-6]
            if len(roots) != 1:
                violations.append("unique turning point in (b_minus, b_plus)")
        else:
            violations.append("W > 0 on (b_minus, u*)")

    return WellReport(
        ok=not violations,
        w2_at_bminus=float(w2(bm)),
        w_at_bplus=float(w(bp)),
        turning_point=turning,
        violations=tuple(violations),
    )
