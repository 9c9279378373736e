"""Exact proximity operator of ``mu * ||x||_1 / ||x||_2``.

With ``y`` replaced by its sorted magnitudes, every prox point is ``r * u``
where ``u = (u_1 >= ... >= u_k > 0, 0, ..., 0)`` is a local but non-global
minimizer of::

    F(u) = -0.5 * <y_:k, u>^2 + mu * sum(u)      on the unit sphere S^{k-1}

There is at most one such ``u`` per support size ``k``. For ``k >= 2`` it is
fixed by a Lagrange multiplier ``lam`` in ``(S2 - y_k S1, S2)``, which is the
largest root of a quartic there, via::

    u = mu / (lam * (S2 - lam)) * (S1 * y_:k - (S2 - lam))

The prox is found by scanning all ``k``, keeping the smallest ``F``, and
comparing it with the value ``mu * a`` of the origin.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CanonicalForm, ProxMember, ProxProblem, ProxResult, canonicalize,
    q_value, reconstruct, validate,
)
from .quartic import (
    PolishDivergence, bracketed_roots, coeffs_from_sums, roots_in_interval,
)

__all__ = (
    "TIE_TOL",
    "POS_TOL",
    "Candidate",
    "PrefixSums",
    "SweepRecord",
    "SweepDiagnostics",
    "Enumeration",
    "existence_statistic",
    "existence_test",
    "candidate_for_k",
    "f_value_fast",
    "enumerate_candidates",
    "select",
    "prox",
    "prox_ratio",
)

TIE_TOL = 1e-9
POS_TOL = 1e-12
# mu / c^2 beyond these bounds changes nothing but keeps mu^2 finite
_MU_FLOOR = 1e-100

MODES = ("optimized", "naive")


@dataclass(frozen=True)
class Candidate:
    """Local non-global minimizer of ``F`` on ``S^{k-1}`` inside the positive orthant.

    For ``k = 1`` the direction is ``(1,)`` and ``lambda_star`` holds the
    stationarity multiplier ``y_1^2 - mu``.
    """

    k: int
    lambda_star: float
    u: np.ndarray
    f_value: float
    smaller_root: float | None = None


@dataclass(frozen=True)
class PrefixSums:
    """Running ``||y_:k||_1``, ``||y_:k||_2^2`` and ``k S2 - S1^2``.

    Accumulated in extended precision so that the Cauchy-Schwarz gap ``D``
    keeps its sign for long runs of equal magnitudes.
    """

    S1: np.ndarray
    S2: np.ndarray
    D: np.ndarray

    @classmethod
    def of(cls, sorted_mag) -> "PrefixSums":
        v = np.asarray(sorted_mag, dtype=np.longdouble)
        s1 = np.cumsum(v)
        s2 = np.cumsum(v * v)
        ks = np.arange(1, v.shape[0] + 1, dtype=np.longdouble)
        d = np.maximum(ks * s2 - s1 * s1, 0)
        return cls(S1=s1.astype(np.float64), S2=s2.astype(np.float64),
                   D=d.astype(np.float64))

    def __len__(self):
        return self.S1.shape[0]

    def at(self, k: int) -> tuple[float, float]:
        return float(self.S1[k - 1]), float(self.S2[k - 1])


def existence_statistic(k, S1, S2, D=None):
    """Pruning statistic ``A_k = ((k S2 - S1^2)^(1/3) + S1^(2/3)) / S2``.

    Works elementwise on arrays. ``D`` overrides ``k S2 - S1^2`` when a more
    accurate value is at hand.
    """
    S1 = np.asarray(S1, dtype=np.float64)
    S2 = np.asarray(S2, dtype=np.float64)
    if D is None:
        D = np.maximum(np.asarray(k) * S2 - S1 * S1, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (np.cbrt(D) + np.cbrt(S1 * S1)) / S2


def existence_test(k: int, S1: float, S2: float, mu: float) -> bool:
    """True iff a candidate for support size ``k >= 2`` can exist.

    The test is ``A_k <= mu^(-2/3)``. It only prunes; a surviving ``k`` still
    has to produce a multiplier inside the open interval and a strictly
    positive direction.
    """
    return bool(existence_statistic(k, S1, S2) <= mu ** (-2.0 / 3.0))


def f_value_fast(k: int, lambda_star: float, S1: float, S2: float, mu: float) -> float:
    """``F`` at the candidate in O(1) from the multiplier and the prefix sums.

    Equal at an exact root to
    ``-mu^2 S1^2 / (2 d^2) + mu^2 (S1^2 - k d) / (lam d)`` with ``d = S2 - lam``,
    but evaluated on the normalized direction ``w = S1 y_:k - d 1``::

        <y, w> = S1 lam,   sum(w) = S1^2 - k d,   ||w||^2 = S1^2 (lam - d) + k d^2

    That form is stationary in ``lam``, so root error enters only at second
    order. The other one loses digits like ``1/d^3`` when ``d`` is small.
    """
    return float(_f_fast(k, lambda_star, S2 - lambda_star, S1, mu))


def _f_fast(k, lam, gap, S1, mu):
    s1sq = S1 * S1
    w2 = s1sq * (lam - gap) + k * gap * gap
    return -0.5 * s1sq * lam * lam / w2 + mu * (s1sq - k * gap) / np.sqrt(w2)


def _raw_direction(yk, S1, lam, gap, mu):
    return mu / (lam * gap) * (S1 * yk - gap)


def _direction(yk, S1, lam, gap, mu):
    u = _raw_direction(yk, S1, lam, gap, mu)
    return u / np.linalg.norm(u)


def _f_direct(yk, u, mu):
    return -0.5 * float(np.dot(yk, u)) ** 2 + mu * float(u.sum())


def _first_candidate(y1: float, mu: float) -> Candidate:
    return Candidate(k=1, lambda_star=y1 * y1 - mu, u=np.ones(1),
                     f_value=-0.5 * y1 * y1 + mu)


def _quartic_candidate(k, yk, S1, S2, mu, prune):
    if prune and not existence_test(k, S1, S2, mu):
        return None
    lo = S2 - yk[-1] * S1
    # subnormal magnitudes can leave no representable interior
    if not (S1 > 0 and S2 > 0 and lo < S2):
        return None
    c = coeffs_from_sums(k, S1, S2, mu)
    found = roots_in_interval(c, lo, S2)
    if not found.roots:
        return None
    lam = found.largest
    gap = S2 - lam
    raw = _raw_direction(yk, S1, lam, gap, mu)
    if not raw.min() > POS_TOL:
        return None
    u = raw / np.linalg.norm(raw)
    return Candidate(
        k=k, lambda_star=lam, u=u, f_value=_f_direct(yk, u, mu),
        smaller_root=found.roots[0] if len(found) == 2 else None,
    )


def candidate_for_k(k: int, canon: CanonicalForm, sums: PrefixSums, mu: float,
                    *, prune: bool = True) -> Candidate | None:
    """Candidate with support size ``k``, or None if there is none.

    Solves the quartic for this ``k`` through the companion matrix. Raises
    :class:`~ratioprox.quartic.PolishDivergence` if root polishing fails.
    """
    if not 1 <= k <= canon.n:
        raise ValueError(f"k={k} outside 1..{canon.n}")
    yk = canon.sorted[:k]
    if not yk[-1] > 0:
        return None
    if k == 1:
        return _first_candidate(float(yk[0]), mu)
    S1, S2 = sums.at(k)
    return _quartic_candidate(k, yk, S1, S2, mu, prune)


SweepRecord = namedtuple(
    "SweepRecord", "k A_k exists lambda_star f_value q_value smaller_root")


@dataclass(frozen=True)
class SweepDiagnostics:
    """Per-``k`` record of the scan, one entry for every ``k`` in ``1..n``.

    Missing values are NaN. ``exists`` is the outcome of the pruning test
    (always true for ``k = 1`` when ``y != 0``); the candidate columns are
    filled only where a candidate was actually built.
    """

    A_k: np.ndarray
    exists: np.ndarray
    lambda_star: np.ndarray
    f_value: np.ndarray
    q_value: np.ndarray
    smaller_root: np.ndarray
    failures: tuple[int, ...] = ()

    def __len__(self):
        return self.A_k.shape[0]

    @property
    def has_candidate(self) -> np.ndarray:
        return np.isfinite(self.f_value)

    def records(self):
        for i in range(len(self)):
            yield SweepRecord(
                i + 1, float(self.A_k[i]), bool(self.exists[i]),
                *(_opt(arr[i]) for arr in (self.lambda_star, self.f_value,
                                           self.q_value, self.smaller_root)))


def _opt(v):
    v = float(v)
    return v if np.isfinite(v) else None


@dataclass(frozen=True)
class Enumeration:
    """Outcome of scanning all support sizes for one canonical form.

    ``sorted``, ``mu``, ``sums`` and ``gap`` are kept in units where the
    largest magnitude lies in ``[0.5, 1)``; ``scale`` is the power of two
    that maps back. ``diagnostics`` and candidates are in the caller's units.
    """

    sorted: np.ndarray
    mu: float
    mode: str
    sums: PrefixSums
    gap: np.ndarray
    diagnostics: SweepDiagnostics = field(repr=False)
    scale: float = 1.0

    @property
    def ks(self) -> np.ndarray:
        """Support sizes that carry a candidate, ascending."""
        return np.flatnonzero(self.diagnostics.has_candidate) + 1

    @property
    def f_values(self) -> np.ndarray:
        return self.diagnostics.f_value[self.ks - 1]

    def __len__(self):
        return int(self.ks.shape[0])

    def candidate(self, k: int) -> Candidate:
        i = k - 1
        if not (0 <= i < len(self.diagnostics)
                and self.diagnostics.has_candidate[i]):
            raise KeyError(k)
        lam = float(self.diagnostics.lambda_star[i])
        f = float(self.diagnostics.f_value[i])
        if k == 1:
            return Candidate(k=1, lambda_star=lam, u=np.ones(1), f_value=f)
        yk = self.sorted[:k]
        u = _direction(yk, float(self.sums.S1[i]), lam / self.scale ** 2,
                       float(self.gap[i]), self.mu)
        return Candidate(k=k, lambda_star=lam, u=u, f_value=f,
                         smaller_root=_opt(self.diagnostics.smaller_root[i]))

    @property
    def candidates(self) -> list[Candidate]:
        return [self.candidate(int(k)) for k in self.ks]


def _empty_diagnostics(n):
    nan = np.full(n, np.nan)
    return SweepDiagnostics(A_k=nan.copy(), exists=np.zeros(n, dtype=bool),
                            lambda_star=nan.copy(), f_value=nan.copy(),
                            q_value=nan.copy(), smaller_root=nan.copy())


_BLOCK = 1 << 14


def _solve_block(idx, y, ks, S1, S2, D, mu, lam, gap, F):
    k, s1, s2, d = ks[idx], S1[idx], S2[idx], D[idx]
    mu2 = mu * mu
    # psi(S2 (1 - s)) / S2^4 as a monic quartic in s = (S2 - lam) / S2
    m = k * mu2 / (s2 * s2)
    c = mu2 * d / (s2 * s2 * s2)
    s_int = y[idx] * s1 / s2
    s_top = 1.0 / (1.0 + np.cbrt(d / (s1 * s1)))
    s_hi = np.minimum(s_int, s_top)
    # factored form stays exact at s = 1, where equal magnitudes put a root
    g_hi = (1.0 - s_hi) ** 2 * (s_hi * s_hi - m) + c * (1.0 - 2.0 * s_hi)
    # g < 0 at s = 0; a root in (0, s_hi) needs g(s_hi) >= 0, and a root
    # sitting exactly at s_int is rejected below
    sel = np.flatnonzero(g_hi >= 0)
    if sel.size == 0:
        return []
    idx, k, s1, s2 = idx[sel], k[sel], s1[sel], s2[sel]
    m, c, s_int, s_hi = m[sel], c[sel], s_int[sel], s_hi[sel]
    coef = (c - m, 2.0 * (m - c), 1.0 - m, np.full_like(m, -2.0))
    s, _, conv = bracketed_roots(coef, np.zeros(sel.size), s_hi,
                                 x0=mu * s1 / s2 ** 1.5)
    failures = [int(v) for v in k[~conv]]

    g = s2 * s
    lm = s2 - g
    with np.errstate(divide="ignore", invalid="ignore"):
        last = _raw_direction(y[idx], s1, lm, g, mu)
    ok = conv & (s > 0) & (s < s_int) & (last > POS_TOL)
    at = idx[ok]
    lam[at], gap[at] = lm[ok], g[ok]
    F[at] = _f_fast(k[ok], lm[ok], g[ok], s1[ok], mu)
    return failures


def _scan_optimized(y, K, mu):
    sums = PrefixSums.of(y[:K])
    S1, S2, D = sums.S1, sums.S2, sums.D
    ks = np.arange(1, K + 1, dtype=np.float64)
    A = existence_statistic(ks, S1, S2, D)
    exists = A <= mu ** (-2.0 / 3.0)
    exists[0] = True

    lam = np.full(K, np.nan)
    gap = np.full(K, np.nan)
    F = np.full(K, np.nan)
    lam[0], gap[0], F[0] = y[0] ** 2 - mu, mu, -0.5 * y[0] ** 2 + mu
    failures: list[int] = []

    idx = np.flatnonzero(exists[1:]) + 1
    # blocks keep the temporaries cache-resident, so the scan stays linear
    for lo in range(0, idx.size, _BLOCK):
        failures += _solve_block(idx[lo:lo + _BLOCK], y, ks, S1, S2, D, mu,
                                 lam, gap, F)
    q = 0.5 * S2[-1] + F
    nan = np.full(K, np.nan)
    diag = SweepDiagnostics(A_k=A, exists=exists, lambda_star=lam, f_value=F,
                            q_value=q, smaller_root=nan,
                            failures=tuple(failures))
    return sums, gap, diag


def _scan_naive(y, K, mu):
    S1 = np.empty(K)
    S2 = np.empty(K)
    A = np.empty(K)
    exists = np.zeros(K, dtype=bool)
    lam = np.full(K, np.nan)
    gap = np.full(K, np.nan)
    F = np.full(K, np.nan)
    Q = np.full(K, np.nan)
    small = np.full(K, np.nan)
    failures = []
    for k in range(1, K + 1):
        yk = y[:k]
        s1, s2 = float(yk.sum()), float(np.dot(yk, yk))
        S1[k - 1], S2[k - 1] = s1, s2
        A[k - 1] = existence_statistic(k, s1, s2)
        exists[k - 1] = k == 1 or A[k - 1] <= mu ** (-2.0 / 3.0)
        if k == 1:
            cand = _first_candidate(float(y[0]), mu)
        else:
            try:
                cand = _quartic_candidate(k, yk, s1, s2, mu, prune=False)
            except PolishDivergence:
                failures.append(k)
                cand = None
        if cand is None:
            continue
        lam[k - 1], gap[k - 1] = cand.lambda_star, s2 - cand.lambda_star
        F[k - 1] = cand.f_value
        if cand.smaller_root is not None:
            small[k - 1] = cand.smaller_root
        x = np.zeros(y.shape[0])
        x[:k] = float(np.dot(yk, cand.u)) * cand.u
        Q[k - 1] = 0.5 * float(np.sum((y - x) ** 2)) + mu * float(cand.u.sum())
    sums = PrefixSums(S1=S1, S2=S2, D=np.maximum(np.arange(1, K + 1) * S2 - S1 ** 2, 0.0))
    diag = SweepDiagnostics(A_k=A, exists=exists, lambda_star=lam, f_value=F,
                            q_value=Q, smaller_root=small,
                            failures=tuple(failures))
    return sums, gap, diag


def enumerate_candidates(canon: CanonicalForm, mu: float,
                         mode: str = "optimized") -> Enumeration:
    """Scan every support size ``k`` with ``sorted[k-1] > 0``.

    ``mode="optimized"`` keeps prefix sums, prunes with the existence test
    and solves all surviving quartics in one vectorized bracketed Newton
    pass, evaluating ``F`` in O(1) per ``k``. ``mode="naive"`` recomputes the
    norms for each ``k``, solves every quartic through the companion matrix
    without pruning, and evaluates ``F`` on the constructed direction.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n, K = canon.n, canon.support
    diag = _empty_diagnostics(n)
    gap = np.full(n, np.nan)
    if K == 0:
        sums = PrefixSums(S1=np.zeros(0), S2=np.zeros(0), D=np.zeros(0))
        return Enumeration(canon.sorted, mu, mode, sums, gap, diag)

    # h is scale invariant: solve for y / c with mu / c^2, c a power of two
    # so the rescaling is exact and tiny or huge inputs stay representable
    e = int(np.frexp(canon.sorted[0])[1])
    c2 = np.ldexp(1.0, 2 * e)
    y = np.ldexp(canon.sorted, -e)
    with np.errstate(over="ignore"):
        mu_s = float(np.clip(np.ldexp(mu, -2 * e), _MU_FLOOR, 1.0 / _MU_FLOOR))
        a_unit = np.exp2(-4.0 * e / 3.0)

    scan = _scan_optimized if mode == "optimized" else _scan_naive
    sums, g, part = scan(y, K, mu_s)
    gap[:K] = g
    # magnitudes past the support still get a row, with A_k from the padded sums
    A = np.empty(n)
    A[:K] = part.A_k
    if K < n:
        A[K:] = existence_statistic(np.arange(K + 1, n + 1), sums.S1[-1], sums.S2[-1])
    diag.exists[:K] = part.exists
    for name in ("lambda_star", "f_value", "q_value", "smaller_root"):
        getattr(diag, name)[:K] = getattr(part, name) * c2
    # k = 1 needs no rescaling, and c^2 may underflow for tiny inputs
    y1, rest = canon.sorted[0], canon.sorted[1:]
    diag.lambda_star[0] = y1 * y1 - mu
    diag.f_value[0] = -0.5 * y1 * y1 + mu
    diag.q_value[0] = 0.5 * float(rest @ rest) + mu
    diag = SweepDiagnostics(A_k=A * a_unit, exists=diag.exists,
                            lambda_star=diag.lambda_star, f_value=diag.f_value,
                            q_value=diag.q_value, smaller_root=diag.smaller_root,
                            failures=part.failures)
    return Enumeration(y, mu_s, mode, sums, gap, diag, scale=float(np.ldexp(1.0, e)))


def select(candidates, canon: CanonicalForm, problem: ProxProblem,
           tie_tol: float = TIE_TOL) -> ProxResult:
    """Pick the minimizers among the candidates and the origin.

    ``candidates`` is an :class:`Enumeration` or an iterable of
    :class:`Candidate`. Candidates whose ``F`` is within
    ``tie_tol * (1 + |F_best|)`` of the best are all kept; the origin joins
    when ``mu * a`` ties with the best value too. Member Q values are
    ``0.5 ||y||^2 + F``; the points themselves are built on demand.
    """
    if isinstance(candidates, Enumeration):
        ks = candidates.ks
        fs = candidates.f_values
        lookup = candidates.candidate
        failures = candidates.diagnostics.failures
    else:
        cands = {c.k: c for c in candidates}
        ks = np.array(sorted(cands), dtype=int)
        fs = np.array([cands[k].f_value for k in ks])
        lookup = cands.__getitem__
        failures = ()

    zero = np.zeros(canon.n)
    origin = ProxMember.of(zero, 0, q_value(zero, problem))
    if ks.size == 0:
        return ProxResult((origin,), failures)

    best = float(np.min(fs))
    tol = tie_tol * (1.0 + abs(best))
    at_origin = problem.mu * problem.a
    half_sq = 0.5 * float(np.dot(canon.sorted, canon.sorted))
    members = []
    if best >= at_origin - tol:
        members.append(origin)
    if best <= at_origin + tol:
        for i in np.flatnonzero(fs <= best + tol):
            k = int(ks[i])
            members.append(ProxMember(
                k=k, q=half_sq + float(fs[i]),
                build=lambda k=k: reconstruct(canon, lookup(k))))
    return ProxResult(tuple(members), failures)


def prox(problem: ProxProblem, mode: str = "optimized",
         tie_tol: float = TIE_TOL) -> ProxResult:
    """All points of ``prox_{mu h}(y)`` for ``h = ||.||_1 / ||.||_2``, ``h(0) = a``."""
    validate(problem)
    canon = canonicalize(problem.y)
    enum = enumerate_candidates(canon, problem.mu, mode)
    return select(enum, canon, problem, tie_tol)


def prox_ratio(y, mu: float, a: float = 1.0) -> np.ndarray:
    """One prox point of ``mu * ||x||_1 / ||x||_2`` at ``y``.

    Convenience wrapper for use inside proximal-gradient loops. When the prox
    is set-valued this returns the member with the lowest objective.
    """
    return prox(ProxProblem(y, mu, a)).x
