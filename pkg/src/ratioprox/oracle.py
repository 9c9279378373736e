"""Brute-force reference minimizer for small prox problems.

Independent of the quartic machinery: it descends

    F(u) = -0.5 <|y|, u>^2 + mu * sum(u)

over the nonnegative part of the unit sphere from many starts, one set of
starts per support pattern, then applies the optimal radius ``r = <|y|, u>``.
Only meant for ``n <= 8``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple

import numpy as np

from .core import ProxProblem, validate

__all__ = ("OracleConfig", "OracleResult", "oracle_prox", "oracle_sphere_min",
           "MAX_N")

MAX_N = 8
_RANDOM_PATTERNS = 1000
_ARMIJO = 1e-4


@dataclass(frozen=True)
class OracleConfig:
    n_starts: int = 128
    max_iter: int = 3000
    step_tol: float = 1e-13
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1 or self.max_iter < 1:
            raise ValueError("n_starts and max_iter must be positive")
        if not self.step_tol > 0:
            raise ValueError("step_tol must be positive")


class OracleResult(NamedTuple):
    x: np.ndarray
    q: float


def _patterns(n, rng, support_size=None):
    """Boolean support masks; every pattern for small n, random ones beyond."""
    if n <= 4:
        masks = np.array(list(product((False, True), repeat=n)))[1:]
    else:
        masks = rng.random((_RANDOM_PATTERNS, n)) < rng.random((_RANDOM_PATTERNS, 1))
        masks[~masks.any(axis=1), 0] = True
        # the leading coordinates are the likeliest support; always try them
        lead = np.tril(np.ones((n, n), dtype=bool))
        masks = np.vstack([lead, masks])
    if support_size is not None:
        masks = masks[masks.sum(axis=1) == support_size]
        if not masks.size:
            # random draw missed every pattern of this size
            masks = np.zeros((1, n), dtype=bool)
            masks[0, rng.permutation(n)[:support_size]] = True
    return masks


def _project(w, mask):
    """Nearest point of the unit sphere inside the masked nonnegative face."""
    p = np.where(mask, np.maximum(w, 0.0), 0.0)
    nrm = np.linalg.norm(p, axis=1)
    empty = nrm == 0
    if empty.any():
        # whole step left the orthant: snap to the best vertex of the face
        j = np.argmax(np.where(mask[empty], w[empty], -np.inf), axis=1)
        p[empty] = 0.0
        p[np.flatnonzero(empty), j] = 1.0
        nrm[empty] = 1.0
    return p / nrm[:, None]


def _f(v, u, mu):
    return -0.5 * (u @ v) ** 2 + mu * u.sum(axis=1)


def _descend(v, mask, u, mu, cfg):
    """Projected gradient with step halving, run on every row at once."""
    u = _project(u, mask)
    F = _f(v, u, mu)
    t = np.full(u.shape[0], 1.0 / (v @ v + mu + 1.0))
    active = np.arange(u.shape[0])
    for _ in range(cfg.max_iter):
        if active.size == 0:
            break
        ua, ma, ta = u[active], mask[active], t[active]
        g = -(ua @ v)[:, None] * v + mu
        un = _project(ua - ta[:, None] * g, ma)
        Fn = _f(v, un, mu)
        moved = np.sum((un - ua) ** 2, axis=1)
        ok = Fn <= F[active] - _ARMIJO * moved / ta
        hit = active[ok]
        u[hit], F[hit] = un[ok], Fn[ok]
        t[active] = np.where(ok, 2.0 * ta, 0.5 * ta)
        still = np.where(ok, np.sqrt(moved) > cfg.step_tol,
                         0.5 * ta * np.linalg.norm(g, axis=1) > cfg.step_tol)
        active = active[still]
    return u, F


def _starts(v, masks, per, rng):
    rows = np.repeat(masks, per, axis=0)
    u = rng.random(rows.shape)
    # one start per pattern along |y| itself and one at the face centre
    u[::per] = v
    if per > 1:
        u[1::per] = 1.0
    return rows, u


def oracle_prox(problem: ProxProblem, cfg: OracleConfig | None = None,
                support_size: int | None = None) -> OracleResult:
    """Best point found by multi-start local descent on the prox objective.

    With ``support_size`` set, only that many nonzero coordinates are allowed
    and the origin is not considered.
    """
    cfg = cfg or OracleConfig()
    validate(problem)
    n, mu = problem.n, problem.mu
    if n > MAX_N:
        raise ValueError(f"oracle is limited to n <= {MAX_N}, got {n}")
    if support_size is not None and not 1 <= support_size <= n:
        raise ValueError(f"support_size must lie in [1, {n}]")
    y = problem.y
    v = np.abs(y)
    half = 0.5 * float(y @ y)
    q0 = half + mu * problem.a
    if support_size is None and not v.any():
        return OracleResult(np.zeros(n), q0)

    rng = np.random.default_rng(cfg.seed)
    masks = _patterns(n, rng, support_size)
    per = max(1, -(-cfg.n_starts // len(masks)))
    rows, u0 = _starts(v, masks, per, rng)
    u, F = _descend(v, rows, u0, mu, cfg)
    i = int(np.argmin(F))
    q = half + float(F[i])
    if support_size is None and q0 <= q:
        return OracleResult(np.zeros(n), q0)
    r = max(float(u[i] @ v), 0.0)
    return OracleResult(r * u[i] * np.sign(y), q)


def oracle_sphere_min(yk, mu: float, cfg: OracleConfig | None = None):
    """Minimize ``F`` over the nonnegative unit sphere in ``len(yk)`` dims.

    Dense random sampling picks the starts for projected-gradient refinement.
    Returns ``(u, F)``.
    """
    cfg = cfg or OracleConfig()
    v = np.abs(np.asarray(yk, dtype=np.float64).ravel())
    k = v.size
    if not 1 <= k <= MAX_N:
        raise ValueError(f"need 1 <= k <= {MAX_N}, got {k}")
    if k == 1:
        return np.ones(1), float(-0.5 * v[0] ** 2 + mu)
    rng = np.random.default_rng(cfg.seed)
    cloud = np.abs(rng.standard_normal((20000, k)))
    cloud = np.vstack([cloud, np.eye(k), np.ones((1, k)), v[None, :]])
    cloud = cloud[np.linalg.norm(cloud, axis=1) > 0]
    cloud /= np.linalg.norm(cloud, axis=1)[:, None]
    best = np.argsort(_f(v, cloud, mu))[:cfg.n_starts]
    u0 = np.vstack([cloud[best], np.ones((1, k)), np.eye(k)])
    u, F = _descend(v, np.ones(u0.shape, dtype=bool), u0, mu, cfg)
    i = int(np.argmin(F))
    return u[i], float(F[i])
