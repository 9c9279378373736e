"""Problem container, canonical sorted-magnitude form, and the prox objective.

The objective minimized by the proximity operator is::

    Q(x) = 0.5 * ||x - y||^2 + mu * h(x),    h(x) = ||x||_1 / ||x||_2,  h(0) = a

``h`` is invariant under signs, permutations and positive rescaling, so every
computation happens on the sorted magnitudes of ``y`` and the result is mapped
back with :func:`reconstruct`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = (
    "ProxInputError",
    "NonFinite",
    "BadMu",
    "BadA",
    "EmptyVector",
    "ProxProblem",
    "CanonicalForm",
    "ProxMember",
    "ProxResult",
    "validate",
    "canonicalize",
    "reconstruct",
    "q_value",
    "ratio",
)


class ProxInputError(ValueError):
    """Base class for rejected prox inputs."""


class NonFinite(ProxInputError):
    pass


class BadMu(ProxInputError):
    pass


class BadA(ProxInputError):
    pass


class EmptyVector(ProxInputError):
    pass


def _as_vector(y) -> np.ndarray:
    arr = np.array(y, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ProxInputError(f"expected a 1-D vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProxProblem:
    """Input of ``prox_{mu h}(y)``; ``a`` is the value of ``h`` at the origin.

    Construction only coerces ``y`` to a read-only float64 vector. Use
    :func:`validate` to check the parameter ranges.
    """

    y: np.ndarray
    mu: float
    a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "y", _as_vector(self.y))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "a", float(self.a))

    @property
    def n(self) -> int:
        return self.y.shape[0]


def validate(problem: ProxProblem) -> ProxProblem:
    """Return ``problem`` unchanged if it is a well-posed prox input.

    Raises
    ------
    EmptyVector
        ``y`` has no entries.
    NonFinite
        ``y`` contains NaN or an infinity.
    BadMu
        ``mu`` is not a finite positive number.
    BadA
        ``a`` lies outside ``[0, 1]``.
    """
    if problem.y.size == 0:
        raise EmptyVector("y must have at least one entry")
    if not np.all(np.isfinite(problem.y)):
        raise NonFinite("y contains NaN or Inf entries")
    if not (np.isfinite(problem.mu) and problem.mu > 0):
        raise BadMu(f"mu must be positive and finite, got {problem.mu!r}")
    if not (0.0 <= problem.a <= 1.0):
        raise BadA(f"a must lie in [0, 1], got {problem.a!r}")
    return problem


@dataclass(frozen=True)
class CanonicalForm:
    """Sorted magnitudes of ``y`` plus what is needed to undo the sort.

    ``sorted == abs(y)[perm]`` and ``signs == sign(y)``.
    """

    sorted: np.ndarray
    perm: np.ndarray
    signs: np.ndarray

    @property
    def n(self) -> int:
        return self.sorted.shape[0]

    @property
    def support(self) -> int:
        """Number of strictly positive magnitudes."""
        return int(np.count_nonzero(self.sorted > 0))

    def unsort(self, v: np.ndarray) -> np.ndarray:
        """Apply the inverse permutation to a vector in sorted coordinates."""
        out = np.empty(self.n, dtype=np.float64)
        out[self.perm] = v
        return out

    def restore(self) -> np.ndarray:
        """Recover ``y`` from the canonical form."""
        return self.unsort(self.sorted) * self.signs


def canonicalize(y) -> CanonicalForm:
    """Sort ``|y|`` non-increasingly; ties keep their original index order."""
    y = _as_vector(y)
    mag = np.abs(y)
    # stable argsort of the negated magnitudes == descending, ties by index
    perm = np.argsort(-mag, kind="stable")
    srt = mag[perm]
    signs = np.sign(y)
    for arr in (srt, perm, signs):
        arr.flags.writeable = False
    return CanonicalForm(sorted=srt, perm=perm, signs=signs)


def reconstruct(canon: CanonicalForm, candidate) -> np.ndarray:
    """Map a sorted-coordinate direction back to a prox point in ``y`` space.

    The point is ``r * P^{-1}(u, 0) * sign(y)`` with the optimal radius
    ``r = <sorted[:k], u>``.
    """
    u = np.asarray(candidate.u, dtype=np.float64)
    k = u.shape[0]
    if k > canon.n:
        raise ValueError(f"support size {k} exceeds dimension {canon.n}")
    r = float(np.dot(canon.sorted[:k], u))
    padded = np.zeros(canon.n, dtype=np.float64)
    padded[:k] = r * u
    return canon.unsort(padded) * canon.signs


def ratio(x, a: float = 1.0) -> float:
    """``||x||_1 / ||x||_2`` with the convention ``ratio(0) = a``."""
    x = np.asarray(x, dtype=np.float64)
    l2 = np.linalg.norm(x)
    if l2 == 0.0:
        return float(a)
    return float(np.abs(x).sum() / l2)


def q_value(x, problem: ProxProblem) -> float:
    """Prox objective ``0.5 ||x - y||^2 + mu h(x)``."""
    x = np.asarray(x, dtype=np.float64)
    diff = x - problem.y
    return 0.5 * float(np.dot(diff, diff)) + problem.mu * ratio(x, problem.a)


@dataclass(frozen=True, eq=False)
class ProxMember:
    """One minimizer: support size (0 for the origin), Q value, and the point.

    The point is built on first access, so results with many tied members
    stay cheap for long vectors.
    """

    k: int
    q: float
    build: Callable[[], np.ndarray] = field(repr=False)

    @classmethod
    def of(cls, x, k: int, q: float) -> "ProxMember":
        x = np.asarray(x, dtype=np.float64)
        return cls(k=k, q=q, build=lambda: x)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.array(self.build(), dtype=np.float64)
        x.flags.writeable = False
        return x


@dataclass(frozen=True)
class ProxResult:
    """All minimizers of Q found by the exact method.

    Members are ordered by support size, so the origin (if present) comes
    first. ``failures`` lists support sizes whose quartic could not be
    solved to tolerance.
    """

    members: tuple[ProxMember, ...]
    failures: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.members:
            raise ValueError("a prox result needs at least one member")
        object.__setattr__(
            self, "members", tuple(sorted(self.members, key=lambda m: m.k)))

    def __len__(self):
        return len(self.members)

    @property
    def contains_zero(self) -> bool:
        return any(m.k == 0 for m in self.members)

    @property
    def is_set_valued(self) -> bool:
        return len(self.members) >= 2

    @property
    def best(self) -> ProxMember:
        """Member with the lowest Q; the sparser one on an exact tie."""
        return min(self.members, key=lambda m: (m.q, m.k))

    @property
    def x(self) -> np.ndarray:
        return self.best.x

    @property
    def q(self) -> float:
        return self.best.q
