"""Exact proximity operator of the l1/l2 ratio ``||x||_1 / ||x||_2``."""

from .core import (
    BadA, BadMu, CanonicalForm, EmptyVector, NonFinite, ProxInputError,
    ProxMember, ProxProblem, ProxResult, canonicalize, q_value, reconstruct,
    validate,
)
from .prox import (
    Candidate, Enumeration, PrefixSums, SweepDiagnostics, candidate_for_k,
    enumerate_candidates, existence_test, f_value_fast, prox, prox_ratio,
    select,
)

__version__ = "0.1.0"
