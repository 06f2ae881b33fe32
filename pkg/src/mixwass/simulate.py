"""Synthetic data generation and experiment drivers.

Data are generated exactly as in the simulation protocol the package
reproduces: topics with i.i.d. Unif(0,1) entries normalized per column,
dense weights uniform on the simplex (Dirichlet(1,...,1)), sparse weights
with a uniformly chosen support and Unif(0,1) entries, and multinomial
documents.  The drivers regenerate the reference tables at desk scale:
coverage/length of confidence intervals at the null and the alternative,
normality of the debiased estimator, speed of convergence to the limit
law, and the debiased-MLE versus WLS comparison.

Every random quantity is drawn from a numpy PCG64 generator seeded by a
(seed, stream, index...) tuple, so replicates are independent of chunking
and worker count, and a report is a deterministic function of its config.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from .errors import InvalidParam, MixwassError
from .estimators import (
    CountVector,
    _debias_batch,
    _em_batch,
    _sigma_from_weights,
    sigma_ls,
)
from .inference import (
    LimitSampleSet,
    confidence_interval,
    derivative_bootstrap,
    effective_root_n,
    ks_distance,
    ks_two_sample_pvalue,
    limit_sampler,
    m_out_of_n_bootstrap,
    theorem_delta,
)
from . import numlin
from .transport import (
    DualPolytope,
    ProbVec,
    TopicMatrix,
    cost_matrix,
    support_batch,
    wasserstein_primal,
)

RNG_FAMILY = "numpy PCG64 via SeedSequence streams"

METHOD_PLUGIN = "plugin"
METHOD_DERIV_BS = "deriv_bs"
METHOD_M_OF_N = "m_of_n"
METHODS = (METHOD_PLUGIN, METHOD_DERIV_BS, METHOD_M_OF_N)

EST_MLE_DEBIASED = "mle_debiased"
EST_WLS = "wls"
ESTIMATORS = (EST_MLE_DEBIASED, EST_WLS)

# Stream ids for SeedSequence-derived generators.
_S_TOPICS, _S_WEIGHTS, _S_DOCS, _S_MC, _S_BOOT, _S_LAW, _S_NOISE = range(7)

# Replicates are processed in fixed-size chunks so that batched linear
# algebra sees the same inputs regardless of the worker count.
_CHUNK = 32


@dataclass(frozen=True)
class SimConfig:
    """Settings of one simulation experiment."""

    K: int = 5
    p: int = 500
    N: int = 1000
    N_j: int | None = None
    tau: int = 0
    n_reps: int = 200
    n_outer: int = 10
    M: int = 1000
    B: int = 1000
    gamma: float = 0.5
    delta: float | str | None = 0.0
    metric: str = "tv"
    seed: int = 0
    design: str = "null"
    methods: tuple[str, ...] = (METHOD_PLUGIN,)
    estimators: tuple[str, ...] = (EST_MLE_DEBIASED,)
    level: float = 0.05
    quick: bool = False
    workers: int = 1
    a_noise: float = 0.0

    def __post_init__(self):
        if self.K < 1 or self.p < self.K:
            raise InvalidParam("need p >= K >= 1")
        if self.N < 1 or (self.N_j is not None and self.N_j < 1):
            raise InvalidParam("document sizes must be >= 1")
        if not (self.tau == 0 or 1 <= self.tau <= self.K):
            raise InvalidParam("tau must be 0 (dense) or in [1, K]")
        if self.n_reps < 1 or self.n_outer < 1:
            raise InvalidParam("replicate counts must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParam("gamma must be in (0, 1)")
        if not 0.0 < self.level < 1.0:
            raise InvalidParam("level must be in (0, 1)")
        if self.design not in ("null", "alternative"):
            raise InvalidParam("design must be 'null' or 'alternative'")
        for m in self.methods:
            if m not in METHODS:
                raise InvalidParam(f"unknown method {m!r}")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise InvalidParam(f"unknown estimator {e!r}")
        if isinstance(self.delta, str) and self.delta != "rate":
            raise InvalidParam("delta must be a float, None, or 'rate'")
        if isinstance(self.delta, (int, float)) and self.delta < 0:
            raise InvalidParam("delta must be >= 0")

    @property
    def N_i(self) -> int:
        return self.N

    def size_j(self) -> int:
        return self.N_j if self.N_j is not None else self.N

    def resolve_delta(self) -> float | None:
        if self.delta == "rate":
            return theorem_delta(min(self.N, self.size_j()), self.p)
        return self.delta

    def scaled(self) -> "SimConfig":
        """Desk-scale shrink when the quick flag is set."""
        if not self.quick:
            return self
        return dataclasses.replace(
            self,
            n_reps=min(self.n_reps, 100),
            M=min(self.M, 500),
            B=min(self.B, 500),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        d["estimators"] = list(self.estimators)
        return d


@dataclass
class ExperimentReport:
    """Aggregated results of one driver run.

    Everything except ``wall_clock_s`` and ``created_utc`` is a
    deterministic function of the config; ``fingerprint`` hashes exactly
    that deterministic payload.  The ``workers`` knob only schedules the
    computation, so it is excluded from the fingerprint as well.
    """

    kind: str
    config: dict
    seed: int
    summary: dict
    records: list
    failures: int = 0
    invalid: bool = False
    rng_family: str = RNG_FAMILY
    wall_clock_s: float = 0.0
    created_utc: str = ""

    def payload(self) -> dict:
        config = {k: v for k, v in self.config.items() if k != "workers"}
        return {
            "kind": self.kind,
            "config": config,
            "seed": self.seed,
            "rng_family": self.rng_family,
            "summary": self.summary,
            "records": self.records,
            "failures": self.failures,
            "invalid": self.invalid,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(_jsonable(self.payload()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_dict(self) -> dict:
        d = _jsonable(self.payload())
        d["wall_clock_s"] = self.wall_clock_s
        d["created_utc"] = self.created_utc
        d["fingerprint"] = self.fingerprint()
        return d


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


def _seed_int(*parts: int) -> int:
    """Collapse a stream address into a single 64-bit seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# Generators


def gen_topic_matrix(p: int, K: int, seed) -> TopicMatrix:
    """Topics with i.i.d. Unif(0,1) entries, each column normalized."""
    if not 1 <= K <= p:
        raise InvalidParam("need p >= K >= 1")
    rng = np.random.default_rng(seed)
    M = rng.uniform(size=(p, K))
    return TopicMatrix(M / M.sum(axis=0, keepdims=True))


def gen_weights(K: int, tau: int, seed) -> ProbVec:
    """Dense weights uniform on the simplex, or sparse with |supp| = tau."""
    if not (tau == 0 or 1 <= tau <= K):
        raise InvalidParam("tau must be 0 (dense) or in [1, K]")
    rng = np.random.default_rng(seed)
    if tau == 0:
        return ProbVec(rng.dirichlet(np.ones(K)))
    alpha = np.zeros(K)
    support = rng.choice(K, size=tau, replace=False)
    entries = rng.uniform(size=tau)
    alpha[support] = entries / entries.sum()
    return ProbVec(alpha)


def gen_document(r, N: int, seed) -> CountVector:
    """One multinomial document of N words from word distribution r."""
    if N < 1:
        raise InvalidParam("N must be >= 1")
    rv = r.values if isinstance(r, ProbVec) else np.asarray(r, dtype=float)
    rng = np.random.default_rng(seed)
    return CountVector(rng.multinomial(N, rv / rv.sum()))


def perturb_topics(A: TopicMatrix, noise: float, seed) -> TopicMatrix:
    """Multiplicative entrywise perturbation, columns renormalized.

    Exercises the estimated-topics code paths (cost, covariances) without
    implementing a topic estimator.
    """
    if noise < 0:
        raise InvalidParam("noise must be >= 0")
    if noise == 0:
        return A
    rng = np.random.default_rng(seed)
    M = A.matrix * (1.0 + noise * (2.0 * rng.uniform(size=A.matrix.shape) - 1.0))
    M = np.clip(M, 1e-300, None)
    return TopicMatrix(M / M.sum(axis=0, keepdims=True))


# ---------------------------------------------------------------------------
# Shared driver machinery


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _chunks(n: int) -> list[np.ndarray]:
    return [np.arange(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]


def _setup(config: SimConfig):
    """Topics, estimation topics (possibly noisy), cost, polytope."""
    A = gen_topic_matrix(config.p, config.K, [config.seed, _S_TOPICS])
    A_hat = perturb_topics(A, config.a_noise, [config.seed, _S_NOISE])
    cost_true = cost_matrix(A, config.metric)
    cost_hat = cost_matrix(A_hat, config.metric) if config.a_noise else cost_true
    poly = DualPolytope(cost_hat)
    poly.vertices()  # warm the cache before handing to workers
    return A, A_hat, cost_true, cost_hat, poly


def _finish(report: ExperimentReport, t0: float) -> ExperimentReport:
    report.wall_clock_s = time.time() - t0
    report.created_utc = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return report


# ---------------------------------------------------------------------------
# Confidence-interval experiment (null and alternative designs)


def _ci_chunk_worker(payload) -> list[dict]:
    (config, A_hat_m, poly, outer, reps, r_i, r_j, true_W, facet_delta) = payload
    N_i, N_j = config.N, config.size_j()
    # Draw the chunk's documents with per-replicate streams.
    docs_i = np.empty((config.p, reps.size))
    docs_j = np.empty((config.p, reps.size))
    counts_i, counts_j = [], []
    for c, rep in enumerate(reps):
        rng = np.random.default_rng([config.seed, _S_DOCS, outer, int(rep)])
        yi = rng.multinomial(N_i, r_i)
        yj = rng.multinomial(N_j, r_j)
        counts_i.append(yi)
        counts_j.append(yj)
        docs_i[:, c] = yi / N_i
        docs_j[:, c] = yj / N_j
    mle_i, _, _ = _em_batch(docs_i, A_hat_m)
    mle_j, _, _ = _em_batch(docs_j, A_hat_m)
    deb_i = _debias_batch(mle_i, docs_i, A_hat_m)
    deb_j = _debias_batch(mle_j, docs_j, A_hat_m)
    W_all = support_batch(poly, (deb_i - deb_j).T)

    records = []
    for c, rep in enumerate(reps):
        rec = {"outer": int(outer), "rep": int(rep), "true_W": float(true_W), "W_tilde": float(W_all[c]), "methods": {}, "error": None}
        try:
            for method in config.methods:
                if method == METHOD_PLUGIN:
                    samples = limit_sampler(
                        mle_i[:, c],
                        mle_j[:, c],
                        A_hat_m,
                        poly,
                        delta=facet_delta,
                        M=config.M,
                        seed=_seed_int(config.seed, _S_MC, outer, int(rep)),
                    )
                elif method == METHOD_DERIV_BS:
                    samples = derivative_bootstrap(
                        CountVector(counts_i[c]),
                        CountVector(counts_j[c]),
                        A_hat_m,
                        poly,
                        delta=facet_delta,
                        B=config.B,
                        seed=_seed_int(config.seed, _S_BOOT, 1, outer, int(rep)),
                    )
                else:
                    samples = m_out_of_n_bootstrap(
                        CountVector(counts_i[c]),
                        CountVector(counts_j[c]),
                        A_hat_m,
                        poly,
                        gamma=config.gamma,
                        B=config.B,
                        seed=_seed_int(config.seed, _S_BOOT, 2, outer, int(rep)),
                    )
                ci = confidence_interval(float(W_all[c]), samples, config.level, N_i, N_j)
                rec["methods"][method] = {
                    "lower": ci.lower,
                    "upper": ci.upper,
                    "length": ci.width,
                    "covered": bool(ci.lower <= true_W <= ci.upper),
                }
        except MixwassError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return records


def run_ci_experiment(config: SimConfig) -> ExperimentReport:
    """Coverage and length of distance confidence intervals.

    Null design: one dense mixture, pairs of documents from the same r.
    Alternative design: ``n_outer`` weight pairs, ``n_reps`` document pairs
    each; results are averaged over the outer pairs.  Topics are treated as
    known (optionally perturbed by ``a_noise``).  At the null the plug-in
    and derivative bootstrap sample the unrestricted polytope (the
    restriction set degenerates to the full polytope there); at the
    alternative both use the facet slab of width ``delta``.
    """
    t0 = time.time()
    config = config.scaled()
    A, A_hat, cost_true, cost_hat, poly = _setup(config)
    facet_delta = None if config.design == "null" else config.resolve_delta()

    tasks = []
    if config.design == "null":
        alpha = gen_weights(config.K, config.tau, [config.seed, _S_WEIGHTS]).values
        r = A.matrix @ alpha
        for reps in _chunks(config.n_reps):
            tasks.append((config, A_hat.matrix, poly, 0, reps, r, r, 0.0, facet_delta))
    else:
        for outer in range(config.n_outer):
            a_i = gen_weights(config.K, config.tau, [config.seed, _S_WEIGHTS, outer, 0]).values
            a_j = gen_weights(config.K, config.tau, [config.seed, _S_WEIGHTS, outer, 1]).values
            true_W, _ = wasserstein_primal(a_i, a_j, cost_true)
            r_i = A.matrix @ a_i
            r_j = A.matrix @ a_j
            for reps in _chunks(config.n_reps):
                tasks.append((config, A_hat.matrix, poly, outer, reps, r_i, r_j, true_W, facet_delta))

    records = [rec for out in _pmap(_ci_chunk_worker, tasks, config.workers) for rec in out]
    failures = sum(1 for r in records if r["error"] is not None)
    ok = [r for r in records if r["error"] is None]
    summary = {}
    for method in config.methods:
        lengths = np.array([r["methods"][method]["length"] for r in ok])
        covered = np.array([r["methods"][method]["covered"] for r in ok])
        summary[method] = {
            "coverage": float(covered.mean()) if ok else float("nan"),
            "mean_length": float(lengths.mean()) if ok else float("nan"),
            "se_length": float(lengths.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0,
            "n": len(ok),
        }
    report = ExperimentReport(
        kind=f"ci-{config.design}",
        config=config.to_dict(),
        seed=config.seed,
        summary=summary,
        records=records,
        failures=failures,
        invalid=failures > 0.01 * max(len(records), 1),
    )
    return _finish(report, t0)


# ---------------------------------------------------------------------------
# Normality of the weight estimators


def run_normality_experiment(config: SimConfig) -> ExperimentReport:
    """Standardized weight-estimate draws and per-coordinate KS tests.

    Standardization uses the true per-coordinate asymptotic variance
    (available because A is known in simulation): for coordinate k the draw
    is sqrt(N / Sigma_kk)(alpha_k_est - alpha_k).  The debiased estimator is
    expected to pass normality on active coordinates; the simplex-restricted
    MLE at a zero coordinate is the documented negative control.
    """
    t0 = time.time()
    config = config.scaled()
    A, A_hat, _, _, _ = _setup(config)
    alpha = gen_weights(config.K, config.tau, [config.seed, _S_WEIGHTS]).values
    r = A.matrix @ alpha
    sigma = _sigma_from_weights(alpha, A.matrix)
    n_reps = config.n_reps

    XB = np.empty((config.p, n_reps))
    for rep in range(n_reps):
        rng = np.random.default_rng([config.seed, _S_DOCS, 0, rep])
        XB[:, rep] = rng.multinomial(config.N, r) / config.N
    mle, _, _ = _em_batch(XB, A_hat.matrix)
    deb = _debias_batch(mle, XB, A_hat.matrix)

    draws = {"mle": mle, "debiased": deb}
    sigmas = {"mle": sigma, "debiased": sigma}
    if EST_WLS in config.estimators:
        d = A_hat.matrix.sum(axis=1)
        Bm = A_hat.matrix / d[:, None]
        M = A_hat.matrix.T @ Bm
        wls = np.linalg.solve(M, Bm.T @ XB)
        draws["wls"] = wls
        sigmas["wls"] = sigma_ls(alpha, r, A_hat).sigma

    records = []
    root_n = math.sqrt(config.N)
    for name, est in draws.items():
        sd = np.sqrt(np.clip(np.diag(sigmas[name]), 0.0, None))
        for k in range(config.K):
            if sd[k] <= 0:
                continue
            z = root_n * (est[k, :] - alpha[k]) / sd[k]
            stat, pval = sstats.kstest(z, "norm")
            records.append(
                {
                    "estimator": name,
                    "coord": k,
                    "active": bool(alpha[k] > 0),
                    "alpha_true": float(alpha[k]),
                    "ks_stat": float(stat),
                    "p_value": float(pval),
                    "draws": z.tolist(),
                }
            )
    summary = {
        "n_reps": n_reps,
        "ks": {
            name: {
                str(rec["coord"]): {"ks_stat": rec["ks_stat"], "p_value": rec["p_value"], "active": rec["active"]}
                for rec in records
                if rec["estimator"] == name
            }
            for name in draws
        },
    }
    report = ExperimentReport(
        kind="normality",
        config=config.to_dict(),
        seed=config.seed,
        summary=summary,
        records=records,
    )
    return _finish(report, t0)


# ---------------------------------------------------------------------------
# Speed of convergence to the limit law


def _conv_chunk_worker(payload) -> np.ndarray:
    (config, A_hat_m, poly, reps, r) = payload
    N = config.N
    docs_i = np.empty((config.p, reps.size))
    docs_j = np.empty((config.p, reps.size))
    for c, rep in enumerate(reps):
        rng = np.random.default_rng([config.seed, _S_DOCS, 0, int(rep)])
        docs_i[:, c] = rng.multinomial(N, r) / N
        docs_j[:, c] = rng.multinomial(N, r) / N
    mle_i, _, _ = _em_batch(docs_i, A_hat_m)
    mle_j, _, _ = _em_batch(docs_j, A_hat_m)
    deb_i = _debias_batch(mle_i, docs_i, A_hat_m)
    deb_j = _debias_batch(mle_j, docs_j, A_hat_m)
    return support_batch(poly, (deb_i - deb_j).T)


def run_convergence_experiment(config: SimConfig) -> ExperimentReport:
    """Two-sample KS between root-N distance draws and the simulated limit.

    Null case: both documents share one dense mixture.  The limit law is
    simulated with the true covariance and the true polytope; ``n_reps``
    distance draws are compared against ``M`` limit draws.
    """
    t0 = time.time()
    config = config.scaled()
    A, A_hat, cost_true, cost_hat, poly = _setup(config)
    alpha = gen_weights(config.K, config.tau, [config.seed, _S_WEIGHTS]).values
    r = A.matrix @ alpha

    tasks = [(config, A_hat.matrix, poly, reps, r) for reps in _chunks(config.n_reps)]
    W = np.concatenate(_pmap(_conv_chunk_worker, tasks, config.workers))
    stat_draws = effective_root_n(config.N, config.N) * W

    sigma = _sigma_from_weights(alpha, A.matrix)
    root = numlin.psd_sqrt(2.0 * sigma)
    rng = np.random.default_rng([config.seed, _S_LAW])
    Z = root @ rng.standard_normal(size=(config.K, config.M))
    true_poly = DualPolytope(cost_true)
    limit_draws = np.maximum(support_batch(true_poly, Z.T), 0.0)

    d = ks_distance(stat_draws, limit_draws)
    pval = ks_two_sample_pvalue(stat_draws, limit_draws)
    summary = {
        "ks_distance": d,
        "ks_pvalue": pval,
        "n_stat": int(stat_draws.size),
        "n_limit": int(limit_draws.size),
    }
    report = ExperimentReport(
        kind="ks-convergence",
        config=config.to_dict(),
        seed=config.seed,
        summary=summary,
        records=[{"stat_draws": stat_draws.tolist(), "limit_draws": limit_draws.tolist()}],
    )
    return _finish(report, t0)


# ---------------------------------------------------------------------------
# Debiased MLE vs weighted least squares


def _mle_ls_chunk_worker(payload) -> list[dict]:
    (config, A_hat_m, poly, outer, reps, r, quantiles) = payload
    N = config.N
    docs_i = np.empty((config.p, reps.size))
    docs_j = np.empty((config.p, reps.size))
    for c, rep in enumerate(reps):
        rng = np.random.default_rng([config.seed, _S_DOCS, outer, int(rep)])
        docs_i[:, c] = rng.multinomial(N, r) / N
        docs_j[:, c] = rng.multinomial(N, r) / N
    mle_i, _, _ = _em_batch(docs_i, A_hat_m)
    mle_j, _, _ = _em_batch(docs_j, A_hat_m)
    deb_i = _debias_batch(mle_i, docs_i, A_hat_m)
    deb_j = _debias_batch(mle_j, docs_j, A_hat_m)
    d = A_hat_m.sum(axis=1)
    Bm = A_hat_m / d[:, None]
    M = A_hat_m.T @ Bm
    ls_i = np.linalg.solve(M, Bm.T @ docs_i)
    ls_j = np.linalg.solve(M, Bm.T @ docs_j)
    W_deb = support_batch(poly, (deb_i - deb_j).T)
    W_ls = support_batch(poly, (ls_i - ls_j).T)
    root_n = math.sqrt(N)
    out = []
    for c, rep in enumerate(reps):
        rec = {"outer": int(outer), "rep": int(rep)}
        for name, w in (("mle_debiased", W_deb[c]), ("wls", W_ls[c])):
            q_lo, q_hi = quantiles[name]
            rec[name] = {
                "W": float(w),
                "covered": bool(w - q_hi / root_n <= 0.0 <= w - q_lo / root_n),
                "length": float((q_hi - q_lo) / root_n),
            }
        out.append(rec)
    return out


def run_mle_vs_wls_experiment(config: SimConfig) -> ExperimentReport:
    """Paired CI comparison of the debiased MLE and WLS distance estimates.

    Null design, limit laws treated as known (true covariances, true
    polytope); quantiles come from ``M`` common-random-number draws per
    law so the paired length difference is estimated with low noise.
    """
    t0 = time.time()
    config = config.scaled()
    A, A_hat, cost_true, cost_hat, poly = _setup(config)
    true_poly = DualPolytope(cost_true)
    tasks = []
    law_meta = []
    for outer in range(config.n_outer):
        alpha = gen_weights(config.K, config.tau, [config.seed, _S_WEIGHTS, outer]).values
        r = A.matrix @ alpha
        sig_mle = _sigma_from_weights(alpha, A.matrix)
        sig_ls = sigma_ls(alpha, r, A).sigma
        G = np.random.default_rng([config.seed, _S_LAW, outer]).standard_normal(size=(config.K, config.M))
        quantiles = {}
        for name, sig in (("mle_debiased", sig_mle), ("wls", sig_ls)):
            Z = numlin.psd_sqrt(2.0 * sig) @ G
            draws = np.sort(np.maximum(support_batch(true_poly, Z.T), 0.0))
            samp = LimitSampleSet(draws, delta=None, seed=config.seed, zero_feasible=True)
            quantiles[name] = (samp.quantile(config.level / 2), samp.quantile(1 - config.level / 2))
        law_meta.append({"outer": outer, "quantiles": {k: list(v) for k, v in quantiles.items()}})
        for reps in _chunks(config.n_reps):
            tasks.append((config, A_hat.matrix, poly, outer, reps, r, quantiles))

    records = [rec for out in _pmap(_mle_ls_chunk_worker, tasks, config.workers) for rec in out]
    root_n = math.sqrt(config.N)
    per_outer = []
    for meta in law_meta:
        q = meta["quantiles"]
        per_outer.append(
            {
                "outer": meta["outer"],
                "length_mle": (q["mle_debiased"][1] - q["mle_debiased"][0]) / root_n,
                "length_wls": (q["wls"][1] - q["wls"][0]) / root_n,
            }
        )
    diffs = np.array([o["length_wls"] - o["length_mle"] for o in per_outer])
    summary = {}
    for name in ("mle_debiased", "wls"):
        covered = np.array([r[name]["covered"] for r in records])
        lengths = np.array([r[name]["length"] for r in records])
        summary[name] = {
            "coverage": float(covered.mean()),
            "mean_length": float(lengths.mean()),
            "n": len(records),
        }
    summary["paired_length_diff"] = {
        "mean": float(diffs.mean()),
        "se": float(diffs.std(ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else 0.0,
        "per_outer": per_outer,
    }
    report = ExperimentReport(
        kind="mle-vs-wls",
        config=config.to_dict(),
        seed=config.seed,
        summary=summary,
        records=records,
    )
    return _finish(report, t0)
