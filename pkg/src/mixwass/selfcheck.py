"""Runtime property suite behind the ``selftest`` CLI command.

Each check returns (name, ok, detail).  The same functions back the pytest
property tests, so the CLI and the test suite cannot drift apart.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import numlin
from .estimators import _debias_batch, _em_batch, debias, mle_objective, mle_weights, sigma_hat
from .inference import confidence_interval, limit_sampler
from .simulate import SimConfig, gen_topic_matrix, run_ci_experiment
from .transport import (
    DualPolytope,
    CostMatrix,
    cost_matrix,
    kr_dual_value,
    support_batch,
    tv_distance,
    wasserstein_primal,
)


def _random_cost(rng, K: int) -> CostMatrix:
    p = max(2 * K, 8)
    A = rng.uniform(size=(p, K))
    A /= A.sum(axis=0)
    return cost_matrix(A, "tv")


def check_duality(n_instances: int = 200, seed: int = 11) -> tuple[str, bool, str]:
    """|primal - dual| <= 1e-8 * max(1, value) on random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 11))
        cost = _random_cost(rng, K)
        a = rng.dirichlet(np.ones(K))
        b = rng.dirichlet(np.ones(K))
        primal, _ = wasserstein_primal(a, b, cost)
        dual, _ = kr_dual_value(a - b, DualPolytope(cost))
        worst = max(worst, abs(primal - dual) / max(1.0, primal))
    return ("strong-duality", worst <= 1e-8, f"max relative gap {worst:.2e}")


def check_metric_axioms(n_instances: int = 100, seed: int = 12) -> tuple[str, bool, str]:
    """Symmetry, identity, and triangle inequality of the distance."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 7))
        cost = _random_cost(rng, K)
        a, b, c = (rng.dirichlet(np.ones(K)) for _ in range(3))
        w_ab, _ = wasserstein_primal(a, b, cost)
        w_ba, _ = wasserstein_primal(b, a, cost)
        w_aa, _ = wasserstein_primal(a, a, cost)
        w_ac, _ = wasserstein_primal(a, c, cost)
        w_cb, _ = wasserstein_primal(c, b, cost)
        worst = max(worst, abs(w_ab - w_ba), abs(w_aa), w_ab - w_ac - w_cb)
    return ("metric-axioms", worst <= 1e-8, f"max violation {worst:.2e}")


def check_joint_convexity(n_instances: int = 100, seed: int = 13) -> tuple[str, bool, str]:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_instances):
        K = int(rng.integers(2, 7))
        cost = _random_cost(rng, K)
        a, a2, b, b2 = (rng.dirichlet(np.ones(K)) for _ in range(4))
        lam = rng.uniform()
        mix, _ = wasserstein_primal(lam * a + (1 - lam) * a2, lam * b + (1 - lam) * b2, cost)
        w1, _ = wasserstein_primal(a, b, cost)
        w2, _ = wasserstein_primal(a2, b2, cost)
        worst = max(worst, mix - lam * w1 - (1 - lam) * w2)
    return ("joint-convexity", worst <= 1e-8, f"max excess {worst:.2e}")


def check_dirac_agreement(n_instances: int = 50, seed: int = 14) -> tuple[str, bool, str]:
    """Distance between point masses reproduces the base metric (R2)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 7))
        cost = _random_cost(rng, K)
        k, l = rng.choice(K, size=2, replace=False)
        e_k = np.zeros(K)
        e_k[k] = 1.0
        e_l = np.zeros(K)
        e_l[l] = 1.0
        w, _ = wasserstein_primal(e_k, e_l, cost)
        worst = max(worst, abs(w - cost.entries[k, l]))
    return ("dirac-agreement", worst <= 1e-8, f"max |W - d| {worst:.2e}")


def check_tv_upper_bound(n_instances: int = 100, seed: int = 15) -> tuple[str, bool, str]:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_instances):
        K = int(rng.integers(2, 8))
        cost = _random_cost(rng, K)
        a = rng.dirichlet(np.ones(K))
        b = rng.dirichlet(np.ones(K))
        w, _ = wasserstein_primal(a, b, cost)
        worst = max(worst, w - cost.max_entry() * tv_distance(a, b))
    return ("tv-upper-bound", worst <= 1e-8, f"max excess {worst:.2e}")


def check_support_stability(n_instances: int = 50, seed: int = 16) -> tuple[str, bool, str]:
    """Support-function perturbation bound under cost-matrix noise."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_instances):
        K = int(rng.integers(2, 6))
        cost = _random_cost(rng, K)
        noise = rng.uniform(-1, 1, size=(K, K)) * 0.05
        noise = (noise + noise.T) / 2
        np.fill_diagonal(noise, 0.0)
        pert = np.clip(cost.entries + noise, 0.0, None)
        cost2 = CostMatrix(pert)
        eps = float(np.abs(cost.entries - cost2.entries).max())
        u = rng.normal(size=K)
        u /= max(np.abs(u).sum(), 1.0)  # ||u||_1 <= 1
        v1, _ = kr_dual_value(u, DualPolytope(cost))
        v2, _ = kr_dual_value(u, DualPolytope(cost2))
        worst = max(worst, abs(v1 - v2) - eps)
    return ("support-stability", worst <= 1e-8, f"max excess {worst:.2e}")


def check_vertex_lp_agreement(n_instances: int = 30, seed: int = 17) -> tuple[str, bool, str]:
    """Vertex-enumeration support values match the LP solver."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 7))
        cost = _random_cost(rng, K)
        poly = DualPolytope(cost)
        U = rng.normal(size=(10, K))
        fast = support_batch(poly, U)
        slow = np.array([kr_dual_value(u, poly)[0] for u in U])
        worst = max(worst, float(np.abs(fast - slow).max()))
    return ("vertex-lp-agreement", worst <= 1e-8, f"max |vertex - LP| {worst:.2e}")


def check_em_monotone(n_instances: int = 20, seed: int = 18) -> tuple[str, bool, str]:
    """EM objective is non-decreasing along the multiplicative updates."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_instances):
        K = int(rng.integers(2, 6))
        p = 6 * K
        A = rng.uniform(size=(p, K))
        A /= A.sum(axis=0)
        alpha = rng.dirichlet(np.ones(K))
        X = rng.multinomial(200, A @ alpha) / 200.0
        a = np.full(K, 1.0 / K)
        prev = mle_objective(a, X, A)
        supp = X > 0
        As, Xs = A[supp], X[supp]
        for _ in range(200):
            a = a * (As.T @ (Xs / (As @ a)))
            cur = mle_objective(a, X, A)
            worst = max(worst, prev - cur)
            prev = cur
    return ("em-monotone", worst <= 1e-12, f"max objective drop {worst:.2e}")


def check_debias_fixed_point(n_instances: int = 30, seed: int = 19) -> tuple[str, bool, str]:
    """Debias reproduces the MLE on interior, full-support instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 6))
        p = 4 * K
        A = rng.uniform(0.2, 1.0, size=(p, K))
        A /= A.sum(axis=0)
        alpha = rng.dirichlet(np.full(K, 5.0))
        X = A @ alpha  # noiseless interior instance
        est = mle_weights(X, A)
        deb = debias(est, X, A)
        if est.alpha.min() > 1e-8:
            worst = max(worst, float(np.abs(deb.alpha - est.alpha).max()))
    return ("debias-fixed-point", worst <= 1e-6, f"max |debias - mle| {worst:.2e}")


def check_sigma_nullspace(n_instances: int = 50, seed: int = 20) -> tuple[str, bool, str]:
    """Plug-in covariance annihilates the all-ones vector on full support."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 7))
        p = 5 * K
        A = rng.uniform(0.05, 1.0, size=(p, K))
        A /= A.sum(axis=0)
        alpha = rng.dirichlet(np.ones(K) * 3.0)
        cov = sigma_hat(alpha, A)
        worst = max(worst, float(np.abs(cov.sigma @ np.ones(K)).max()))
    return ("sigma-nullspace", worst <= 1e-8, f"max |Sigma 1| {worst:.2e}")


def check_pinv_psd(n_instances: int = 50, seed: int = 21) -> tuple[str, bool, str]:
    """pinv is PSD on PSD inputs and psd_sqrt_pinv squares to it."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 8))
        B = rng.normal(size=(K, max(1, K - 2)))
        M = B @ B.T
        P = numlin.pinv(M)
        S = numlin.psd_sqrt_pinv(M)
        worst = max(worst, float(np.abs(S @ S - P).max()))
        worst = max(worst, max(0.0, -float(np.linalg.eigvalsh(P).min())))
    return ("pinv-psd-sqrt", worst <= 1e-8, f"max defect {worst:.2e}")


def check_sampler_nonneg(seed: int = 22) -> tuple[str, bool, str]:
    """Limit samples are non-negative whenever f = 0 is feasible."""
    rng = np.random.default_rng(seed)
    K, p = 4, 40
    A = gen_topic_matrix(p, K, seed)
    cost = cost_matrix(A, "tv")
    alpha = rng.dirichlet(np.ones(K))
    X = rng.multinomial(300, A.matrix @ alpha) / 300.0
    est = mle_weights(X, A)
    s_plain = limit_sampler(est, est, A, cost, delta=None, M=200, seed=7)
    s_wide = limit_sampler(est, est, A, cost, delta=cost.max_entry() + 1.0, M=200, seed=7)
    ok = bool(s_plain.samples.min() >= 0 and s_wide.samples.min() >= 0)
    ok = ok and s_plain.zero_feasible and s_wide.zero_feasible
    return ("sampler-nonnegative", ok, f"min sample {min(s_plain.samples.min(), s_wide.samples.min()):.2e}")


def check_sampler_reproducible(seed: int = 23) -> tuple[str, bool, str]:
    rng = np.random.default_rng(seed)
    K, p = 3, 30
    A = gen_topic_matrix(p, K, seed)
    cost = cost_matrix(A, "tv")
    alpha = rng.dirichlet(np.ones(K))
    X = rng.multinomial(200, A.matrix @ alpha) / 200.0
    est = mle_weights(X, A)
    s1 = limit_sampler(est, est, A, cost, delta=None, M=100, seed=99)
    s2 = limit_sampler(est, est, A, cost, delta=None, M=100, seed=99)
    ok = bool(np.array_equal(s1.samples, s2.samples))
    return ("sampler-reproducible", ok, "bitwise equal" if ok else "mismatch")


def check_quantile_monotone(seed: int = 24) -> tuple[str, bool, str]:
    """CI quantile ordering: nested levels give nested intervals."""
    rng = np.random.default_rng(seed)
    from .inference import LimitSampleSet

    samples = LimitSampleSet(rng.exponential(size=500), delta=None, seed=seed, zero_feasible=True)
    wide = confidence_interval(0.5, samples, 0.05, 400, 400)
    narrow = confidence_interval(0.5, samples, 0.5, 400, 400)
    ok = wide.lower <= narrow.lower <= narrow.upper <= wide.upper and wide.width >= 0
    gammas = np.linspace(0.05, 0.95, 19)
    qs = [samples.quantile(g) for g in gammas]
    ok = ok and bool(np.all(np.diff(qs) >= 0))
    return ("quantile-monotone", bool(ok), f"width {wide.width:.3f} >= {narrow.width:.3f}")


def check_batch_matches_single(seed: int = 25) -> tuple[str, bool, str]:
    """Batched EM and debias agree with the single-document paths."""
    rng = np.random.default_rng(seed)
    K, p, B = 4, 60, 8
    A = gen_topic_matrix(p, K, seed).matrix
    alpha = rng.dirichlet(np.ones(K))
    XB = rng.multinomial(300, A @ alpha, size=B).T / 300.0
    mle_b, _, _ = _em_batch(XB, A)
    deb_b = _debias_batch(mle_b, XB, A)
    worst = 0.0
    for b in range(B):
        est = mle_weights(XB[:, b], A)
        worst = max(worst, float(np.abs(est.alpha - mle_b[:, b]).max()))
        worst = max(worst, float(np.abs(debias(est, XB[:, b], A).alpha - deb_b[:, b]).max()))
    return ("batch-vs-single", worst <= 1e-8, f"max deviation {worst:.2e}")


def check_worker_determinism(seed: int = 26) -> tuple[str, bool, str]:
    """Driver reports are identical under different worker counts."""
    cfg = SimConfig(K=3, p=40, N=120, n_reps=40, M=100, seed=seed, methods=("plugin",), level=0.3)
    r1 = run_ci_experiment(cfg)
    r2 = run_ci_experiment(dataclasses.replace(cfg, workers=2))
    ok = r1.failures == 0 and r1.fingerprint() == r2.fingerprint()
    return ("worker-determinism", ok, "fingerprints equal" if ok else "fingerprints differ")


def check_ci_length_decreases(seed: int = 27) -> tuple[str, bool, str]:
    """Mean plug-in CI length shrinks along N in {100, 500, 1000, 3000}."""
    lengths = []
    ok = True
    for N in (100, 500, 1000, 3000):
        cfg = SimConfig(K=3, p=60, N=N, n_reps=24, M=200, seed=seed, methods=("plugin",), level=0.1)
        rep = run_ci_experiment(cfg)
        ok = ok and rep.failures == 0
        lengths.append(rep.summary["plugin"]["mean_length"])
    ok = ok and bool(np.all(np.diff(lengths) < 0))
    return ("ci-length-decreasing", ok, "lengths " + ", ".join(f"{v:.4f}" for v in lengths))


ALL_CHECKS = [
    check_duality,
    check_metric_axioms,
    check_joint_convexity,
    check_dirac_agreement,
    check_tv_upper_bound,
    check_support_stability,
    check_vertex_lp_agreement,
    check_em_monotone,
    check_debias_fixed_point,
    check_sigma_nullspace,
    check_pinv_psd,
    check_sampler_nonneg,
    check_sampler_reproducible,
    check_quantile_monotone,
    check_batch_matches_single,
    check_worker_determinism,
    check_ci_length_decreases,
]


def run_selftest(quick: bool = False) -> list[tuple[str, bool, str]]:
    checks = ALL_CHECKS
    if quick:
        checks = [c for c in checks if c not in (check_worker_determinism, check_ci_length_decreases)]
    return [c() for c in checks]
