"""Real roots of the monic quartic that fixes the Lagrange multiplier.

For a support size ``k`` with prefix sums ``S1 = ||y_:k||_1`` and
``S2 = ||y_:k||_2^2`` the quartic is::

    psi(lam) = lam^4 - 2 S2 lam^3 + (S2^2 - k mu^2) lam^2
               + 2 mu^2 D lam - mu^2 S2 D,          D = k S2 - S1^2 >= 0

Two solvers are provided. :func:`roots_in_interval` handles one quartic at a
time through the companion matrix followed by Newton polishing.
:func:`bracketed_roots` runs a safeguarded Newton iteration over many quartics
at once, given a sign-change bracket for each.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

__all__ = (
    "TOL_RESIDUAL",
    "EPS_CS",
    "CauchySchwarzViolated",
    "PolishDivergence",
    "QuarticCoeffs",
    "IntervalRoots",
    "coeffs_from_sums",
    "roots_in_interval",
    "bracketed_roots",
)

TOL_RESIDUAL = 1e-10
EPS_CS = 1e-12
MAX_POLISH = 50
IMAG_TOL = 1e-8
MERGE_TOL = 1e-9
_NEAR = 1e-3
_SCALAR_MAX = 16

_EPS = np.finfo(np.float64).eps


class CauchySchwarzViolated(ValueError):
    """Prefix sums with ``S1^2 > k S2``; they cannot come from a real vector."""


class PolishDivergence(ArithmeticError):
    """Newton polishing did not reach the residual tolerance."""


@dataclass(frozen=True)
class QuarticCoeffs:
    """Coefficients of ``a0 + a1 x + a2 x^2 + a3 x^3 + a4 x^4`` with ``a4 = 1``."""

    a0: float
    a1: float
    a2: float
    a3: float
    a4: float = 1.0

    def __post_init__(self):
        if self.a4 != 1.0:
            raise ValueError(f"quartic must be monic, got a4={self.a4!r}")
        if not np.all(np.isfinite(self.coef)):
            raise ValueError("quartic coefficients must be finite")

    @property
    def coef(self) -> np.ndarray:
        """Coefficients in ascending order of degree."""
        return np.array([self.a0, self.a1, self.a2, self.a3, self.a4])

    def __call__(self, x):
        return (((x + self.a3) * x + self.a2) * x + self.a1) * x + self.a0

    def deriv(self, x):
        return ((4.0 * x + 3.0 * self.a3) * x + 2.0 * self.a2) * x + self.a1

    def scale(self, x):
        """Largest term magnitude at ``x``, floored at 1; residual yardstick."""
        if isinstance(x, float):
            ax = abs(x)
            return max(1.0, abs(self.a0), abs(self.a1) * ax, abs(self.a2) * ax * ax,
                       abs(self.a3) * ax ** 3, ax ** 4)
        ax = np.abs(x)
        return np.maximum.reduce([
            np.ones_like(ax), np.full_like(ax, abs(self.a0)),
            abs(self.a1) * ax, abs(self.a2) * ax ** 2,
            abs(self.a3) * ax ** 3, ax ** 4,
        ])


@dataclass(frozen=True)
class IntervalRoots:
    roots: tuple[float, ...]
    residuals: tuple[float, ...]

    def __len__(self):
        return len(self.roots)

    @property
    def largest(self) -> float | None:
        return self.roots[-1] if self.roots else None


def coeffs_from_sums(k: int, S1: float, S2: float, mu: float) -> QuarticCoeffs:
    """Build the quartic for support size ``k`` from its prefix sums.

    ``D = k S2 - S1^2`` is non-negative by Cauchy-Schwarz. A negative value
    within ``EPS_CS`` relative slack is rounding and is clamped to zero;
    anything beyond that raises :class:`CauchySchwarzViolated`.
    """
    if k < 2:
        raise ValueError(f"the quartic is defined for k >= 2, got {k}")
    if not (S1 > 0 and S2 > 0):
        raise ValueError("prefix sums must be positive")
    if S1 * S1 > k * S2 * (1.0 + EPS_CS):
        raise CauchySchwarzViolated(
            f"S1^2={S1 * S1!r} exceeds k*S2={k * S2!r}")
    D = max(k * S2 - S1 * S1, 0.0)
    mu2 = mu * mu
    return QuarticCoeffs(
        a0=-mu2 * S2 * D,
        a1=2.0 * mu2 * D,
        a2=S2 * S2 - k * mu2,
        a3=-2.0 * S2,
    )


def _polish(c: QuarticCoeffs, x: float) -> float:
    """Newton iteration on ``c`` from ``x``; raises if the residual stays large."""
    fx = c(x)
    for _ in range(MAX_POLISH):
        if fx == 0.0:
            break
        d = c.deriv(x)
        if d == 0.0 or not np.isfinite(d):
            break
        x_new = x - fx / d
        f_new = c(x_new)
        if abs(f_new) >= abs(fx):
            break
        step = abs(x_new - x)
        x, fx = x_new, f_new
        if step <= 4.0 * _EPS * abs(x):
            break
    if not abs(fx) <= TOL_RESIDUAL * c.scale(x):
        raise PolishDivergence(
            f"residual {abs(fx):.3e} at {x!r} exceeds tolerance")
    return x


def roots_in_interval(c: QuarticCoeffs, lo: float, hi: float) -> IntervalRoots:
    """Distinct real roots of ``c`` strictly inside ``(lo, hi)``, ascending.

    All four roots come from the companion-matrix eigenvalues of the quartic
    rescaled to ``|x| <= 1`` over the interval; near-real ones are polished
    by Newton's method on the original coefficients. Roots closer than
    ``1e-9 * max(|lo|, |hi|)`` are merged, and roots that close to an
    endpoint are treated as lying on it.
    """
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid interval ({lo!r}, {hi!r})")
    s = max(abs(lo), abs(hi))
    # monic quartic in t = x / s
    b = c.coef[:4] / s ** np.arange(4, 0, -1)
    comp = np.zeros((4, 4))
    comp[1:, :3] = np.eye(3)
    comp[:, 3] = -b
    eig = np.linalg.eigvals(comp)
    real = eig.real[np.abs(eig.imag) <= IMAG_TOL * (1.0 + np.abs(eig.real))]

    # roots within the merge distance of an endpoint count as on the boundary
    edge = MERGE_TOL * s
    # eigenvalues far outside the interval are not worth polishing
    near = real[(real * s > lo - _NEAR * s) & (real * s < hi + _NEAR * s)]
    found: list[tuple[float, float]] = []
    for t in np.sort(near):
        x = _polish(c, float(t) * s)
        if lo + edge < x < hi - edge:
            found.append((x, abs(float(c(x)))))
    found.sort()

    merged: list[tuple[float, float]] = []
    for x, res in found:
        if merged and x - merged[-1][0] <= MERGE_TOL * s:
            if res < merged[-1][1]:
                merged[-1] = (x, res)
            continue
        merged.append((x, res))
    return IntervalRoots(
        roots=tuple(x for x, _ in merged),
        residuals=tuple(r for _, r in merged),
    )


def _horner(coef, x):
    b0, b1, b2, b3 = coef
    f = (((x + b3) * x + b2) * x + b1) * x + b0
    df = ((4.0 * x + 3.0 * b3) * x + 2.0 * b2) * x + b1
    return f, df


def _newton_one(b, x, lo, hi, max_iter):
    """Scalar twin of :func:`_newton_batch`."""
    b0, b1, b2, b3 = b
    for _ in range(max_iter):
        f = (((x + b3) * x + b2) * x + b1) * x + b0
        df = ((4.0 * x + 3.0 * b3) * x + 2.0 * b2) * x + b1
        if f < 0:
            lo = x
        else:
            hi = x
        if f == 0.0 or hi - lo <= 4.0 * _EPS * abs(hi):
            break
        step = f / df if df != 0.0 else math.inf
        if abs(step) <= 4.0 * _EPS * abs(x):
            break
        xn = x - step
        x = xn if lo < xn < hi else 0.5 * (lo + hi)
    return x


def _newton_batch(coef, x, lo, hi, active, max_iter):
    """Safeguarded Newton on the rows in ``active``; updates ``x`` in place."""
    xa, la, ha = x[active], lo[active], hi[active]
    b = [v[active] for v in coef]
    for _ in range(max_iter):
        if active.size == 0:
            break
        f, df = _horner(b, xa)
        neg = f < 0
        la = np.where(neg, xa, la)
        ha = np.where(neg, ha, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        xn = xa - step
        # converged before the safeguard, which would bisect away from a root
        # sitting on the freshly moved bracket end
        done = ((f == 0.0)
                | (np.abs(step) <= 4.0 * _EPS * np.abs(xa))
                | (ha - la <= 4.0 * _EPS * np.abs(ha)))
        ok = np.isfinite(xn) & (xn > la) & (xn < ha)
        xn = np.where(done, xa, np.where(ok, xn, 0.5 * (la + ha)))
        x[active] = xn
        keep = ~done
        if keep.all():
            xa = xn
            continue
        active = active[keep]
        xa, la, ha = xn[keep], la[keep], ha[keep]
        b = [v[keep] for v in b]


def bracketed_roots(coef, lo, hi, x0=None, max_iter=100):
    """Vectorized safeguarded Newton for monic quartics with a sign change.

    Parameters
    ----------
    coef : sequence of 4 arrays
        ``(b0, b1, b2, b3)`` for ``x^4 + b3 x^3 + b2 x^2 + b1 x + b0``.
    lo, hi : arrays
        Brackets with ``f(lo) < 0 <= f(hi)``.
    x0 : array, optional
        Starting points; replaced by the bracket midpoint where outside it.
    max_iter : int
        Iteration cap, Newton and bisection steps combined.

    Returns
    -------
    roots : array
    residual : array
        ``|f(root)|`` divided by the largest term magnitude at the root.
    converged : bool array
        Whether the relative residual is below ``TOL_RESIDUAL``.
    """
    coef = [np.asarray(b, dtype=np.float64) for b in coef]
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    mid = 0.5 * (lo + hi)
    if x0 is None:
        x = mid
    else:
        x = np.asarray(x0, dtype=np.float64)
        x = np.where((x > lo) & (x < hi), x, mid)

    active = np.flatnonzero(hi > lo)
    if active.size <= _SCALAR_MAX:
        # per-call numpy overhead dominates for a handful of quartics
        for i in active:
            x[i] = _newton_one([float(v[i]) for v in coef], float(x[i]),
                               float(lo[i]), float(hi[i]), max_iter)
    else:
        _newton_batch(coef, x, lo, hi, active, max_iter)

    f, _ = _horner(coef, x)
    ax = np.abs(x)
    b0, b1, b2, b3 = coef
    scale = np.maximum.reduce([
        np.abs(b0), np.abs(b1) * ax, np.abs(b2) * ax ** 2,
        np.abs(b3) * ax ** 3, ax ** 4])
    with np.errstate(divide="ignore", invalid="ignore"):
        residual = np.where(scale > 0, np.abs(f) / scale, np.abs(f))
    return x, residual, residual <= TOL_RESIDUAL
