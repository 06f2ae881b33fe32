import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixwass import (
    CostMatrix,
    DualPolytope,
    ProbVec,
    TopicMatrix,
    cost_matrix,
    kr_dual_value,
    restricted_polytope,
    support_batch,
    tv_distance,
    wasserstein_primal,
)
from mixwass.errors import DimError, InvalidCost, InvalidParam, InvalidSimplex

from oracles import transport_min_by_vertex_enumeration


def random_instance(rng, K):
    p = max(2 * K, 8)
    A = rng.uniform(size=(p, K))
    A /= A.sum(axis=0)
    return cost_matrix(TopicMatrix(A), "tv")


# --- ProbVec / TopicMatrix -------------------------------------------------


def test_probvec_validation():
    v = ProbVec([0.25, 0.75])
    assert v.dim == 2
    with pytest.raises(InvalidSimplex):
        ProbVec([0.5, 0.6])
    with pytest.raises(InvalidSimplex):
        ProbVec([1.5, -0.5])


def test_topic_matrix_validation():
    A = TopicMatrix(np.eye(3))
    assert A.p == 3 and A.K == 3
    with pytest.raises(InvalidSimplex):
        TopicMatrix(np.array([[0.5, 0.2], [0.4, 0.8]]))


# --- tv_distance ------------------------------------------------------------


def test_tv_trivial_cases():
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0


def test_tv_derived_value():
    # 0.5 * (|0.25| + |0.25| + |0.5|) = 0.5, by direct l1 sum.
    assert tv_distance([0.5, 0.5, 0.0], [0.25, 0.25, 0.5]) == pytest.approx(0.5, abs=1e-15)


def test_tv_dim_mismatch():
    with pytest.raises(DimError):
        tv_distance([1.0], [0.5, 0.5])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_tv_bounds_property(raw):
    u = np.array(raw) / np.sum(raw)
    v = np.roll(u, 1)
    d = tv_distance(u, v)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(tv_distance(v, u), abs=1e-15)


# --- cost_matrix ------------------------------------------------------------


def test_cost_identical_columns_zero():
    col = np.full(5, 0.2)
    A = TopicMatrix(np.column_stack([col, col, col]))
    C = cost_matrix(A, "tv")
    assert np.abs(C.entries).max() == 0.0


def test_cost_disjoint_tv():
    A = TopicMatrix(np.eye(2))
    C = cost_matrix(A, "tv")
    assert np.allclose(C.entries, [[0, 1], [1, 0]])


def test_cost_matches_pairwise_recomputation():
    rng = np.random.default_rng(5)
    A = rng.uniform(size=(12, 3))
    A /= A.sum(axis=0)
    C = cost_matrix(TopicMatrix(A), "tv")
    for k in range(3):
        for l in range(3):
            assert C.entries[k, l] == pytest.approx(tv_distance(A[:, k], A[:, l]), abs=1e-12)


def test_cost_triangle_inequality():
    rng = np.random.default_rng(6)
    for metric in ("tv", "l2"):
        A = rng.uniform(size=(20, 5))
        A /= A.sum(axis=0)
        C = cost_matrix(TopicMatrix(A), metric).entries
        for k in range(5):
            for l in range(5):
                for m in range(5):
                    assert C[k, l] <= C[k, m] + C[m, l] + 1e-10


def test_user_table_validation():
    ok = cost_matrix(TopicMatrix(np.eye(2)), np.array([[0.0, 0.3], [0.3, 0.0]]))
    assert ok.entries[0, 1] == 0.3
    with pytest.raises(InvalidCost):
        cost_matrix(TopicMatrix(np.eye(2)), np.array([[0.0, 0.3], [0.4, 0.0]]))
    with pytest.raises(InvalidCost):
        cost_matrix(TopicMatrix(np.eye(2)), np.array([[0.1, 0.3], [0.3, 0.0]]))


# --- wasserstein_primal -----------------------------------------------------


def test_primal_equal_weights_zero():
    rng = np.random.default_rng(1)
    cost = random_instance(rng, 4)
    a = rng.dirichlet(np.ones(4))
    value, plan = wasserstein_primal(a, a, cost)
    assert value <= 1e-10
    assert np.abs(plan.sum(axis=1) - a).max() <= 1e-9


def test_primal_k2_closed_form():
    rng = np.random.default_rng(2)
    cost = random_instance(rng, 2)
    a = np.array([0.7, 0.3])
    b = np.array([0.2, 0.8])
    value, _ = wasserstein_primal(a, b, cost)
    assert value == pytest.approx(abs(a[0] - b[0]) * cost.entries[0, 1], abs=1e-10)


def test_primal_matches_vertex_enumeration_and_dual():
    rng = np.random.default_rng(3)
    cost = random_instance(rng, 3)
    a = np.array([0.2, 0.3, 0.5])
    b = np.array([0.5, 0.3, 0.2])
    value, plan = wasserstein_primal(a, b, cost)
    oracle = transport_min_by_vertex_enumeration(a, b, cost.entries)
    assert value == pytest.approx(oracle, abs=1e-9)
    dual, _ = kr_dual_value(a - b, DualPolytope(cost))
    assert value == pytest.approx(dual, abs=1e-8)
    assert np.abs(plan.sum(axis=1) - a).max() <= 1e-9
    assert np.abs(plan.sum(axis=0) - b).max() <= 1e-9
    assert (plan * cost.entries).sum() == pytest.approx(value, abs=1e-9)


def test_primal_dim_mismatch():
    cost = random_instance(np.random.default_rng(0), 3)
    with pytest.raises(DimError):
        wasserstein_primal([0.5, 0.5], [0.2, 0.3, 0.5], cost)


def test_primal_k1_degenerate():
    value, plan = wasserstein_primal([1.0], [1.0], CostMatrix(np.zeros((1, 1))))
    assert value == 0.0
    assert plan.shape == (1, 1)


# --- kr_dual_value ----------------------------------------------------------


def test_dual_zero_direction():
    cost = random_instance(np.random.default_rng(4), 4)
    value, f = kr_dual_value(np.zeros(4), DualPolytope(cost))
    assert value == pytest.approx(0.0, abs=1e-12)
    assert f[0] == 0.0


def test_dual_k1_degenerate():
    poly = DualPolytope(CostMatrix(np.zeros((1, 1))))
    value, f = kr_dual_value(np.array([0.4]), poly)
    assert value == 0.0 and f.tolist() == [0.0]


def test_dual_strong_duality_random():
    rng = np.random.default_rng(8)
    for _ in range(30):
        K = int(rng.integers(2, 9))
        cost = random_instance(rng, K)
        a = rng.dirichlet(np.ones(K))
        b = rng.dirichlet(np.ones(K))
        primal, _ = wasserstein_primal(a, b, cost)
        dual, f = kr_dual_value(a - b, DualPolytope(cost))
        assert abs(primal - dual) <= 1e-8 * max(1.0, primal)
        assert f @ (a - b) == pytest.approx(dual, abs=1e-9)


def test_dual_inactive_facet_matches_unconstrained():
    rng = np.random.default_rng(9)
    cost = random_instance(rng, 4)
    a = rng.dirichlet(np.ones(4))
    b = rng.dirichlet(np.ones(4))
    base, _ = kr_dual_value(a - b, DualPolytope(cost))
    wide = restricted_polytope(cost, a, b, base, cost.max_entry() + 1.0)
    constrained, _ = kr_dual_value(a - b, wide)
    assert constrained == pytest.approx(base, abs=1e-9)


def test_dual_argmax_feasible():
    cost = random_instance(np.random.default_rng(10), 5)
    rng = np.random.default_rng(11)
    poly = DualPolytope(cost)
    for _ in range(10):
        u = rng.normal(size=5)
        _, f = kr_dual_value(u, poly)
        assert poly.contains(f, tol=1e-7)


# --- restricted_polytope ----------------------------------------------------


def test_restricted_null_case_is_full_polytope():
    cost = random_instance(np.random.default_rng(12), 3)
    a = np.array([0.3, 0.3, 0.4])
    poly = restricted_polytope(cost, a, a, 0.0, 0.0)
    rng = np.random.default_rng(13)
    base = DualPolytope(cost)
    for _ in range(5):
        u = rng.normal(size=3)
        v1, _ = kr_dual_value(u, poly)
        v2, _ = kr_dual_value(u, base)
        assert v1 == pytest.approx(v2, abs=1e-8)


def test_restricted_maximizers_stay_feasible():
    rng = np.random.default_rng(14)
    for _ in range(10):
        cost = random_instance(rng, 3)
        a = rng.dirichlet(np.ones(3))
        b = rng.dirichlet(np.ones(3))
        base = DualPolytope(cost)
        w, f = kr_dual_value(a - b, base)
        poly = restricted_polytope(cost, a, b, w, 0.0)
        assert poly.contains(f, tol=1e-7)
        w2, _ = kr_dual_value(a - b, poly)
        assert w2 == pytest.approx(w, abs=1e-8)


def test_restricted_rejects_negative_delta():
    cost = random_instance(np.random.default_rng(15), 3)
    with pytest.raises(InvalidParam):
        restricted_polytope(cost, np.full(3, 1 / 3), np.full(3, 1 / 3), 0.0, -0.1)


# --- properties: convexity, Dirac agreement, upper bound, stability ---------


def test_joint_convexity():
    rng = np.random.default_rng(16)
    for _ in range(40):
        K = int(rng.integers(2, 7))
        cost = random_instance(rng, K)
        a, a2, b, b2 = (rng.dirichlet(np.ones(K)) for _ in range(4))
        lam = rng.uniform()
        mixed, _ = wasserstein_primal(lam * a + (1 - lam) * a2, lam * b + (1 - lam) * b2, cost)
        w1, _ = wasserstein_primal(a, b, cost)
        w2, _ = wasserstein_primal(a2, b2, cost)
        assert mixed <= lam * w1 + (1 - lam) * w2 + 1e-8


def test_dirac_agreement():
    rng = np.random.default_rng(17)
    cost = random_instance(rng, 5)
    for k in range(5):
        for l in range(5):
            e_k = np.eye(5)[k]
            e_l = np.eye(5)[l]
            w, _ = wasserstein_primal(e_k, e_l, cost)
            assert w == pytest.approx(cost.entries[k, l], abs=1e-9)


def test_tv_upper_bound():
    rng = np.random.default_rng(18)
    for _ in range(40):
        K = int(rng.integers(2, 8))
        cost = random_instance(rng, K)
        a = rng.dirichlet(np.ones(K))
        b = rng.dirichlet(np.ones(K))
        w, _ = wasserstein_primal(a, b, cost)
        assert w <= cost.max_entry() * tv_distance(a, b) + 1e-8


def test_support_function_stability():
    rng = np.random.default_rng(19)
    for _ in range(20):
        K = int(rng.integers(2, 6))
        cost = random_instance(rng, K)
        noise = rng.uniform(-1, 1, size=(K, K)) * 0.03
        noise = (noise + noise.T) / 2.0
        np.fill_diagonal(noise, 0.0)
        cost2 = CostMatrix(np.clip(cost.entries + noise, 0.0, None))
        eps = float(np.abs(cost.entries - cost2.entries).max())
        u = rng.normal(size=K)
        u /= max(np.abs(u).sum(), 1.0)
        v1, _ = kr_dual_value(u, DualPolytope(cost))
        v2, _ = kr_dual_value(u, DualPolytope(cost2))
        assert abs(v1 - v2) <= eps + 1e-8


def test_metric_axioms_random_triples():
    rng = np.random.default_rng(20)
    for _ in range(25):
        K = int(rng.integers(2, 6))
        cost = random_instance(rng, K)
        a, b, c = (rng.dirichlet(np.ones(K)) for _ in range(3))
        w_ab, _ = wasserstein_primal(a, b, cost)
        w_ba, _ = wasserstein_primal(b, a, cost)
        w_ac, _ = wasserstein_primal(a, c, cost)
        w_cb, _ = wasserstein_primal(c, b, cost)
        assert abs(w_ab - w_ba) <= 1e-10 + 1e-8 * w_ab
        assert w_ab <= w_ac + w_cb + 1e-8


# --- vertex enumeration fast path -------------------------------------------


def test_vertices_match_lp():
    rng = np.random.default_rng(21)
    for K in (2, 3, 5, 7):
        cost = random_instance(rng, K)
        poly = DualPolytope(cost)
        V = poly.vertices()
        assert V is not None
        U = rng.normal(size=(20, K))
        fast = support_batch(poly, U)
        slow = np.array([kr_dual_value(u, poly)[0] for u in U])
        assert np.abs(fast - slow).max() <= 1e-8


def test_vertex_face_restriction_matches_lp():
    rng = np.random.default_rng(22)
    cost = random_instance(rng, 4)
    a = rng.dirichlet(np.ones(4))
    b = rng.dirichlet(np.ones(4))
    base = DualPolytope(cost)
    w, _ = kr_dual_value(a - b, base)
    for delta in (0.0, 0.05):
        poly = restricted_polytope(cost, a, b, w, delta)
        U = rng.normal(size=(15, 4))
        fast = support_batch(poly, U)
        slow = np.array([kr_dual_value(u, poly)[0] for u in U])
        # The facet slab carries FACET_SLACK_UNIT of feasibility slack, so
        # the engines agree to slack scale here, not LP scale.
        assert np.abs(fast - slow).max() <= 2e-5
