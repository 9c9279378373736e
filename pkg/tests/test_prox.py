import numpy as np
import pytest

from invariants import (
    NON_MONOTONE, TABLE_ONE, TABLE_TWO, ZIGZAG, candidate_violations,
    random_problem_params,
)
from ratioprox import (
    PrefixSums, ProxProblem, canonicalize, candidate_for_k,
    enumerate_candidates, existence_test, f_value_fast, prox, prox_ratio,
    q_value, select,
)
from ratioprox.prox import existence_statistic

MODES = ("optimized", "naive")


@pytest.fixture(params=MODES)
def mode(request):
    return request.param


@pytest.mark.parametrize("y, mu, k, x, q", [
    (TABLE_ONE, 1.0, 6, [4.033, 4.033, 2.990, 2.990, 1.948, 1.948], 2.360),
    (TABLE_ONE, 13.0, 6, [4.455, 4.455, 2.423, 2.423, 0.392, 0.392], 29.403),
    (TABLE_TWO, 1.0, 5, [9.026, 7.004, 5.993, 3.970, 1.948], 2.051),
    (TABLE_TWO, 48.0, 4, [10.255, 6.362, 4.415, 0.521, 0.0], 90.740),
])
def test_table_rows(y, mu, k, x, q, mode):
    p = ProxProblem(y, mu, 1.0)
    res = prox(p, mode=mode)
    assert len(res) == 1 and not res.contains_zero
    m = res.best
    assert m.k == k
    np.testing.assert_allclose(m.x, x, atol=1e-3)
    assert abs(m.q - q) < 1e-3
    assert abs(q_value(m.x, p) - m.q) < 1e-9


@pytest.mark.parametrize("y, mu, k, q", [
    (TABLE_ONE, 13.0, 3, 30.610),
    (TABLE_TWO, 48.0, 2, 94.789),
])
def test_fixed_support_values(y, mu, k, q, mode):
    enum = enumerate_candidates(canonicalize(y), mu, mode)
    assert abs(enum.diagnostics.q_value[k - 1] - q) < 1e-3


@pytest.mark.parametrize("y, mu, ks", [
    (TABLE_ONE, 1.0, [1, 2, 3, 4, 5, 6]),
    (TABLE_ONE, 13.0, [1, 2, 3, 4, 5, 6]),
    (TABLE_TWO, 1.0, [1, 2, 3, 4, 5]),
    (TABLE_TWO, 48.0, [1, 2, 3, 4]),
])
def test_existence_sets(y, mu, ks, mode):
    assert enumerate_candidates(canonicalize(y), mu, mode).ks.tolist() == ks


@pytest.mark.parametrize("threshold, ks", [
    (0.795, {2, 4, 5, 6, 7}),
    (0.755, {4, 6, 7}),
])
def test_zigzag_prune(threshold, ks):
    s = PrefixSums.of(ZIGZAG)
    mu = threshold ** -1.5
    got = {k for k in range(2, 9) if existence_test(k, *s.at(k), mu)}
    assert got == ks


def test_long_existence_run():
    enum = enumerate_candidates(canonicalize(NON_MONOTONE), 1e-4)
    assert enum.ks.tolist() == list(range(1, 10))


def test_selection_scans_past_an_ascent():
    y = np.array([2.0, 1.7, 1.6, 1.5, 1.1, 0.8, 0.6, 0.5, 0.3, 0.2, 0.2])
    mu = 3.6837537983128565
    enum = enumerate_candidates(canonicalize(y), mu)
    d = np.diff(enum.f_values)
    assert (d > 0).any() and (d < 0).any()
    res = prox(ProxProblem(y, mu))
    assert res.best.k == int(enum.ks[np.argmin(enum.f_values)]) == 5


@pytest.mark.parametrize("y", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("k", [2, 5, 8])
def test_equal_components(y, k):
    canon = canonicalize(np.full(k, y))
    sums = PrefixSums.of(canon.sorted)
    mu = 0.6 * y * y * np.sqrt(k)
    c = candidate_for_k(k, canon, sums, mu)
    np.testing.assert_allclose(c.u, np.full(k, k ** -0.5), atol=1e-10)
    assert abs(c.lambda_star - (k * y * y - np.sqrt(k) * mu)) <= 1e-9
    want_f = -0.5 * k * y * y + mu * np.sqrt(k)
    assert f_value_fast(k, c.lambda_star, *sums.at(k), mu) == pytest.approx(want_f, rel=1e-12)
    for mu_big in (y * y * np.sqrt(k), 1.5 * y * y * np.sqrt(k)):
        assert candidate_for_k(k, canon, sums, mu_big) is None
        assert candidate_for_k(k, canon, sums, mu_big, prune=False) is None


def test_equal_components_prune_reduces_to_mu_bound():
    k, y = 4, 1.3
    S1, S2 = k * y, k * y * y
    assert existence_test(k, S1, S2, 0.999 * y * y * np.sqrt(k))
    assert not existence_test(k, S1, S2, 1.001 * y * y * np.sqrt(k))


def test_all_equal_large_mu_leaves_k1():
    canon = canonicalize(np.full(7, 2.0))
    enum = enumerate_candidates(canon, 4.0 * np.sqrt(7) * 1.01)
    assert enum.ks.tolist() == [1]


def test_first_candidate():
    canon = canonicalize([4.0, 1.0])
    c = candidate_for_k(1, canon, PrefixSums.of(canon.sorted), 1.0)
    assert c.u.tolist() == [1.0] and c.f_value == -7.0


def test_candidate_for_k_bounds():
    canon = canonicalize([3.0, 0.0])
    sums = PrefixSums.of(canon.sorted)
    with pytest.raises(ValueError):
        candidate_for_k(3, canon, sums, 1.0)
    assert candidate_for_k(2, canon, sums, 1.0) is None


def test_f_fast_matches_direct():
    rng = np.random.default_rng(11)
    seen = 0
    for _ in range(300):
        y, mu = random_problem_params(rng, 20, ties=False)
        canon = canonicalize(y)
        sums = PrefixSums.of(canon.sorted)
        for k in range(2, canon.n + 1):
            c = candidate_for_k(k, canon, sums, mu)
            if c is None:
                continue
            seen += 1
            direct = -0.5 * float(canon.sorted[:k] @ c.u) ** 2 + mu * c.u.sum()
            assert abs(f_value_fast(k, c.lambda_star, *sums.at(k), mu) - direct) <= 1e-8 * (1 + abs(direct))
    assert seen > 100


def test_candidate_invariants(mode):
    rng = np.random.default_rng(12)
    for _ in range(300):
        y, mu = random_problem_params(rng, 40)
        canon = canonicalize(y)
        for c in enumerate_candidates(canon, mu, mode).candidates:
            assert candidate_violations(c, canon.sorted, mu) == [], (y, mu, c.k)


def test_prune_soundness():
    rng = np.random.default_rng(13)
    for _ in range(300):
        y, mu = random_problem_params(rng, 16)
        canon = canonicalize(y)
        sums = PrefixSums.of(canon.sorted)
        thr = mu ** (-2 / 3)
        for k in range(2, canon.support + 1):
            A = float(existence_statistic(k, *sums.at(k)))
            if abs(A - thr) <= 1e-10 * thr:
                continue
            built = candidate_for_k(k, canon, sums, mu, prune=False) is not None
            # the test is necessary only: a root of the secular equation can
            # sit below S2 - y_k S1, where the direction is not positive
            if built:
                assert A <= thr, (y, mu, k)


def test_zero_input():
    res = prox(ProxProblem(np.zeros(4), 2.0, 0.3))
    assert len(res) == 1 and res.contains_zero
    assert res.q == pytest.approx(0.6)
    assert not res.x.any()


def test_zeros_cut_the_scan(mode):
    enum = enumerate_candidates(canonicalize([0.0, 3.0, 0.0, 1.0]), 0.1, mode)
    assert set(enum.ks.tolist()) <= {1, 2}
    assert len(enum.diagnostics) == 4
    assert np.isnan(enum.diagnostics.f_value[2:]).all()


def test_scalar_input():
    # x = y costs mu, x = 0 costs y^2/2 + mu a
    assert prox_ratio([5.0], 1.0).tolist() == [5.0]
    assert prox_ratio([-0.5], 1.0).tolist() == [-0.5]
    assert prox_ratio([-0.5], 1.0, a=0.0).tolist() == [0.0]


def test_prune_is_not_sufficient():
    # A_k passes, yet the only admissible root leaves the positive orthant
    y = np.array([1.91130658, 1.61022433, 1.08456056, 1.0202039, 0.843004575,
                  0.50665672, 0.43453718, 1.50446704e-03])
    mu = 0.25704944722809886
    canon = canonicalize(y)
    sums = PrefixSums.of(canon.sorted)
    assert existence_test(8, *sums.at(8), mu)
    assert candidate_for_k(8, canon, sums, mu, prune=False) is None


def test_set_valued_tie():
    p = ProxProblem([2.0], 2.0, 0.0)
    res = prox(p)
    assert res.is_set_valued and res.contains_zero
    assert sorted(m.k for m in res.members) == [0, 1]
    assert res.members[1].x.tolist() == [2.0]
    for m in res.members:
        assert m.q == pytest.approx(2.0)


def test_set_valued_equal_magnitudes_at_origin_tie():
    # mu a equals F_1 = -y^2/2 + mu  when a = 1 - y^2 / (2 mu)
    y, mu = 1.0, 2.0
    res = prox(ProxProblem([y, -y], mu, 1 - y * y / (2 * mu)))
    assert res.contains_zero and res.is_set_valued


def test_spike_keeps_its_direction():
    for t in (10.0, 1e3, 1e6):
        y = np.zeros(5)
        y[2] = t
        res = prox(ProxProblem(y, 1.0))
        np.testing.assert_array_equal(res.x, y)
        assert res.q == pytest.approx(1.0)


def test_selection_dominance(mode):
    rng = np.random.default_rng(14)
    for _ in range(300):
        y, mu = random_problem_params(rng, 30)
        a = float(rng.choice([0.0, 0.5, 1.0]))
        p = ProxProblem(y, mu, a)
        res = prox(p, mode=mode)
        q0 = 0.5 * float(y @ y) + mu * a
        for m in res.members:
            assert q_value(m.x, p) <= q0 + 1e-9 * (1 + abs(q0))
        assert res.contains_zero == any(m.k == 0 for m in res.members)
        if not res.contains_zero:
            assert res.q < q0


def test_members_share_objective():
    rng = np.random.default_rng(15)
    for _ in range(200):
        y, mu = random_problem_params(rng, 12)
        p = ProxProblem(np.round(y), mu)
        res = prox(p)
        qs = [q_value(m.x, p) for m in res.members]
        assert max(qs) - min(qs) <= 1e-8 * (1 + abs(min(qs)))


def test_equivariance():
    rng = np.random.default_rng(16)
    for _ in range(100):
        n = int(rng.integers(1, 20))
        y = rng.standard_normal(n)
        mu = 10.0 ** rng.uniform(-2, 1)
        base = prox(ProxProblem(y, mu)).x
        perm = rng.permutation(n)
        s = rng.choice([-1.0, 1.0], n)
        moved = prox(ProxProblem(y[perm] * s, mu)).x
        np.testing.assert_allclose(moved, base[perm] * s, atol=1e-12)


def test_modes_agree():
    rng = np.random.default_rng(17)
    for _ in range(200):
        y, mu = random_problem_params(rng, 32)
        canon = canonicalize(y)
        a = enumerate_candidates(canon, mu, "optimized")
        b = enumerate_candidates(canon, mu, "naive")
        assert a.ks.tolist() == b.ks.tolist()
        np.testing.assert_allclose(a.f_values, b.f_values, rtol=0,
                                   atol=1e-9 * (1 + np.abs(b.f_values).max(initial=0)))


def test_select_accepts_candidate_list():
    p = ProxProblem(TABLE_TWO, 48.0)
    canon = canonicalize(p.y)
    enum = enumerate_candidates(canon, p.mu)
    a = select(enum, canon, p)
    b = select(enum.candidates, canon, p)
    assert a.best.k == b.best.k == 4
    np.testing.assert_allclose(a.x, b.x, atol=1e-12)
    assert select([], canon, p).contains_zero


def test_tie_tolerance_is_tunable():
    p = ProxProblem([2.0], 2.0 * (1 + 1e-12), 0.0)
    assert prox(p).is_set_valued
    assert not prox(p, tie_tol=0.0).is_set_valued


def test_sweep_records():
    enum = enumerate_candidates(canonicalize(TABLE_TWO), 48.0)
    recs = list(enum.diagnostics.records())
    assert [r.k for r in recs] == [1, 2, 3, 4, 5]
    assert recs[4].f_value is None and recs[4].lambda_star is None
    assert recs[1].q_value == pytest.approx(94.789, abs=1e-3)


def test_bad_mode():
    with pytest.raises(ValueError):
        enumerate_candidates(canonicalize([1.0]), 1.0, "fast")


def test_long_vector_stays_light():
    y = np.random.default_rng(18).standard_normal(200_000)
    res = prox(ProxProblem(y, 1.0))
    assert res.x.shape == y.shape
    assert not res.failures
