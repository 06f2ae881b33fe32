"""Mixture-weight estimators from a single document's word counts.

Given (known or estimated) topics A, three estimators of the mixture
weights are provided:

* ``mle_weights`` -- the simplex-constrained maximum-likelihood estimate,
  computed by multiplicative (EM) updates;
* ``debias`` -- the one-step correction alpha_hat + Vhat^+ Psi(alpha_hat)
  that removes the boundary-induced asymptotic bias of the MLE and admits
  a Gaussian limit even for sparse weights;
* ``wls_weights`` -- the row-sum-preconditioned weighted least squares
  estimate, a closed-form alternative with a slightly wider limit law.

``sigma_hat`` and ``sigma_ls`` give the corresponding plug-in asymptotic
covariance matrices.  Batched variants (module-private) process many
documents against one topic matrix at once; the bootstrap and simulation
drivers depend on them for throughput.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import numlin
from .errors import (
    DegenerateSupport,
    InfeasibleRow,
    InvalidParam,
    SingularDesign,
    SingularInformation,
)
from .transport import _topics_array, _values

# Support threshold for Jhat = {j : Ahat_j . alpha > ZETA}; numerical
# stand-in for strict positivity of the fitted word probabilities.
ZETA = 1e-12
# A weight coordinate counts as active in KKT checks above this level.
TAU_SUPP = 1e-8
# Stationarity certificate tolerance.
TOL_KKT = 1e-6

EM_TOL = 1e-10
EM_MAX_ITER = 10_000


class Method(str, enum.Enum):
    MLE = "mle"
    DEBIASED = "debiased"
    WLS = "wls"


class CovMethod(str, enum.Enum):
    PLUGIN_MLE = "plugin_mle"
    PLUGIN_WLS = "plugin_wls"


@dataclass(frozen=True)
class CountVector:
    """Word counts of one document; N is the total number of words."""

    counts: np.ndarray
    N: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise InvalidParam("counts must be a nonempty 1-d array")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.equal(np.mod(c, 1), 0)):
                raise InvalidParam("counts must be integers")
            c = c.astype(np.int64)
        if c.min() < 0:
            raise InvalidParam("counts must be non-negative")
        total = int(c.sum())
        if total < 1:
            raise InvalidParam("document must contain at least one word")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "N", total)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.N


@dataclass(frozen=True)
class WeightEstimate:
    """Estimated mixture weights plus solver diagnostics.

    The MLE variant lies in the simplex; debiased and WLS variants sum to
    one but may have negative entries.  ``support`` records the word index
    set the estimator actually used.
    """

    alpha: np.ndarray
    method: Method
    support: np.ndarray
    iterations: int
    converged: bool
    kkt_gap: float | None = None

    @property
    def K(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class CovEstimate:
    """Plug-in asymptotic covariance matrix (symmetric, PSD up to roundoff)."""

    sigma: np.ndarray
    method: CovMethod
    rank: int


def _check_feasible_rows(X: np.ndarray, A: np.ndarray) -> np.ndarray:
    support = np.flatnonzero(X > 0)
    if support.size == 0:
        raise InvalidParam("frequency vector has empty support")
    row_mass = A[support].max(axis=1)
    bad = support[row_mass <= 0.0]
    if bad.size:
        raise InfeasibleRow(
            f"word {int(bad[0])} has positive count but zero probability under every topic"
        )
    return support


def mle_weights(X, A, tol: float = EM_TOL, max_iter: int = EM_MAX_ITER) -> WeightEstimate:
    """Simplex MLE of the mixture weights by multiplicative updates.

    Maximizes sum_j X_j log(A_j . alpha) over the simplex from the uniform
    start, iterating alpha_k <- alpha_k * sum_j X_j A_jk / (A_j . alpha)
    until the l1 step falls below ``tol``.  The update keeps iterates in
    the simplex and increases the objective monotonically.
    """
    Xv = _values(X, name="X")
    Am = _topics_array(A)
    if Xv.size != Am.shape[0]:
        raise InvalidParam(f"X has dim {Xv.size}, topics have {Am.shape[0]} rows")
    support = _check_feasible_rows(Xv, Am)
    As = np.ascontiguousarray(Am[support])
    Xs = Xv[support]
    K = Am.shape[1]
    alpha = np.full(K, 1.0 / K)
    converged = False
    iterations = 0
    for it in range(max_iter):
        r = As @ alpha
        g = As.T @ (Xs / r)
        new = alpha * g
        iterations = it + 1
        if np.abs(new - alpha).sum() <= tol:
            alpha = new
            converged = True
            break
        alpha = new
    alpha = alpha / alpha.sum()
    g = As.T @ (Xs / (As @ alpha))
    active = alpha > TAU_SUPP
    gap = float(np.max(np.where(active, np.abs(g - 1.0), np.clip(g - 1.0, 0.0, None))))
    return WeightEstimate(
        alpha=alpha,
        method=Method.MLE,
        support=support,
        iterations=iterations,
        converged=converged,
        kkt_gap=gap,
    )


def mle_objective(alpha, X, A) -> float:
    """Normalized log-likelihood sum_j X_j log(A_j . alpha) on supp(X)."""
    Xv = _values(X, name="X")
    Am = _topics_array(A)
    s = Xv > 0
    r = Am[s] @ np.asarray(alpha, dtype=float)
    if np.any(r <= 0):
        return -np.inf
    return float(Xv[s] @ np.log(r))


def debias(alpha_hat, X, A_hat, zeta: float = ZETA) -> WeightEstimate:
    """One-step bias correction of the simplex MLE.

    With Jhat = {j : Ahat_j . alpha_hat > zeta}, computes the score
    Psi(alpha_hat) = sum_{j in Jhat} (X_j - rhat_j)/rhat_j * Ahat_j and the
    weighting matrix Vhat = sum_{j in Jhat} Ahat_j Ahat_j^T / rhat_j, and
    returns alpha_hat + Vhat^+ Psi(alpha_hat).  The result sums to one but
    may leave the simplex.
    """
    base = alpha_hat if isinstance(alpha_hat, WeightEstimate) else None
    a = base.alpha if base is not None else np.asarray(alpha_hat, dtype=float)
    Xv = _values(X, name="X")
    Am = _topics_array(A_hat)
    r = Am @ a
    J = np.flatnonzero(r > zeta)
    if J.size == 0:
        raise DegenerateSupport("no word has fitted probability above the support threshold")
    AJ = Am[J]
    rJ = r[J]
    psi = AJ.T @ ((Xv[J] - rJ) / rJ)
    V = (AJ / rJ[:, None]).T @ AJ
    corrected = a + numlin.pinv(V) @ psi
    return WeightEstimate(
        alpha=corrected,
        method=Method.DEBIASED,
        support=J,
        iterations=base.iterations if base is not None else 0,
        converged=base.converged if base is not None else True,
        kkt_gap=base.kkt_gap if base is not None else None,
    )


def sigma_hat(alpha, A_hat, zeta: float = ZETA) -> CovEstimate:
    """Plug-in asymptotic covariance of the debiased weight estimator.

    sigma = (sum_{j in Jhat} Ahat_j Ahat_j^T / rhat_j)^{-1} - alpha alpha^T
    with rhat = Ahat alpha.  Raises :class:`SingularInformation` when the
    information matrix is singular at rank tolerance.
    """
    a = alpha.alpha if isinstance(alpha, WeightEstimate) else np.asarray(alpha, dtype=float)
    Am = _topics_array(A_hat)
    r = Am @ a
    J = r > zeta
    if not np.any(J):
        raise DegenerateSupport("fitted word probabilities are all below the support threshold")
    AJ = Am[J]
    rJ = r[J]
    H = (AJ / rJ[:, None]).T @ AJ
    try:
        Hinv = numlin.inv_at_rank(H)
    except numlin._SingularAtRank:
        raise SingularInformation("plug-in information matrix is singular") from None
    sigma = Hinv - np.outer(a, a)
    sigma = (sigma + sigma.T) / 2.0
    eig = numlin.sym_eig(sigma)
    return CovEstimate(sigma=sigma, method=CovMethod.PLUGIN_MLE, rank=eig.rank)


def wls_weights(X, A_hat) -> WeightEstimate:
    """Weighted least squares estimate Mhat^{-1} Ahat^T Dhat^{-1} X.

    Dhat is the diagonal of topic-row l1 norms; rows with zero mass are
    dropped.  The estimate sums to one (Mhat is doubly stochastic) but may
    have negative entries.
    """
    Xv = _values(X, name="X")
    Am = _topics_array(A_hat)
    if Xv.size != Am.shape[0]:
        raise InvalidParam(f"X has dim {Xv.size}, topics have {Am.shape[0]} rows")
    d = Am.sum(axis=1)
    keep = np.flatnonzero(d > 0)
    Ak = Am[keep]
    dk = d[keep]
    B = Ak / dk[:, None]  # Dhat^{-1} Ahat
    M = Ak.T @ B
    try:
        Minv = numlin.inv_at_rank(M)
    except numlin._SingularAtRank:
        raise SingularDesign("weighted design matrix Ahat^T Dhat^{-1} Ahat is singular") from None
    alpha = Minv @ (B.T @ Xv[keep])
    return WeightEstimate(
        alpha=alpha,
        method=Method.WLS,
        support=keep,
        iterations=0,
        converged=True,
    )


def sigma_ls(alpha, X_or_r, A_hat) -> CovEstimate:
    """Plug-in covariance of the WLS estimator.

    sigma = Ahat^+ diag(rhat) Ahat^{+T} - alpha alpha^T, where Ahat^+ is the
    preconditioned pseudo-inverse Mhat^{-1} Ahat^T Dhat^{-1} and rhat is the
    supplied frequency or probability vector.
    """
    a = alpha.alpha if isinstance(alpha, WeightEstimate) else np.asarray(alpha, dtype=float)
    rv = _values(X_or_r, name="X_or_r")
    Am = _topics_array(A_hat)
    d = Am.sum(axis=1)
    keep = d > 0
    Ak = Am[keep]
    dk = d[keep]
    B = Ak / dk[:, None]
    M = Ak.T @ B
    try:
        Minv = numlin.inv_at_rank(M)
    except numlin._SingularAtRank:
        raise SingularDesign("weighted design matrix Ahat^T Dhat^{-1} Ahat is singular") from None
    Aplus = Minv @ B.T  # K x |keep|
    sigma = (Aplus * rv[keep]) @ Aplus.T - np.outer(a, a)
    sigma = (sigma + sigma.T) / 2.0
    eig = numlin.sym_eig(sigma)
    return CovEstimate(sigma=sigma, method=CovMethod.PLUGIN_WLS, rank=eig.rank)


# ---------------------------------------------------------------------------
# Batched internals: many documents against one topic matrix.  Same fixed
# points as the public single-document paths (agreement is property-tested);
# used by the bootstrap loops and simulation drivers.


def _em_batch(
    XB: np.ndarray,
    A: np.ndarray,
    tol: float = EM_TOL,
    max_iter: int = EM_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """EM updates on a (p, B) matrix of frequency columns.

    Returns (alphas (K, B), iterations (B,), converged (B,)).  Sparse
    batches (bootstrap resamples with small m) are routed to a
    scatter-gather implementation of the same update.
    """
    nnz = int(np.count_nonzero(XB))
    if XB.size >= 4096 and nnz <= 0.25 * XB.size:
        return _em_batch_sparse(XB, A, tol, max_iter)
    return _em_batch_dense(XB, A, tol, max_iter)


def _em_batch_dense(XB, A, tol, max_iter):
    p, B = XB.shape
    K = A.shape[1]
    alphas = np.full((K, B), 1.0 / K)
    iterations = np.zeros(B, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    active = np.arange(B)
    X_act = XB
    for it in range(max_iter):
        R = A @ alphas[:, active]
        np.maximum(R, 1e-300, out=R)
        G = A.T @ (X_act / R)
        new = alphas[:, active] * G
        steps = np.abs(new - alphas[:, active]).sum(axis=0)
        alphas[:, active] = new
        iterations[active] = it + 1
        finished = steps <= tol
        if np.any(finished):
            done[active[finished]] = True
            active = active[~finished]
            X_act = XB[:, active]
            if active.size == 0:
                break
    alphas /= alphas.sum(axis=0, keepdims=True)
    return alphas, iterations, done


# Converged columns are compacted out of the flat arrays every this many
# iterations; between compactions they keep iterating at their fixed point,
# but their first-convergence snapshot is what gets returned.
_EM_COMPACT_EVERY = 128


def _em_batch_sparse(XB, A, tol, max_iter):
    """Same update as the dense path, on the nonzero cells only."""
    p, B = XB.shape
    K = A.shape[1]
    row_idx, col_idx = np.nonzero(XB)
    xv = XB[row_idx, col_idx]
    Arows = A[row_idx]  # (nnz, K)
    alphas = np.full((K, B), 1.0 / K)
    out = np.full((K, B), 1.0 / K)
    iterations = np.zeros(B, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    cols = np.arange(B)  # active columns, compacted lazily
    local = col_idx  # column positions within the active set
    it = 0
    while it < max_iter and cols.size:
        n_active = cols.size
        for _ in range(_EM_COMPACT_EVERY):
            if it >= max_iter:
                break
            act = alphas[:, cols]
            R = np.einsum("nk,nk->n", Arows, act[:, local].T)
            np.maximum(R, 1e-300, out=R)
            contrib = Arows * (xv / R)[:, None]
            G = np.empty((K, n_active))
            for k in range(K):
                G[k] = np.bincount(local, weights=contrib[:, k], minlength=n_active)
            new = act * G
            steps = np.abs(new - act).sum(axis=0)
            alphas[:, cols] = new
            running = ~done[cols]
            iterations[cols[running]] = it + 1
            it += 1
            fresh = (steps <= tol) & running
            if np.any(fresh):
                done[cols[fresh]] = True
                out[:, cols[fresh]] = new[:, fresh]
        keep = ~done[cols]
        if not np.all(keep):
            cols = cols[keep]
            mask = keep[local]
            row_idx, xv = row_idx[mask], xv[mask]
            Arows = Arows[mask]
            remap = np.cumsum(keep) - 1
            local = remap[local[mask]]
    out[:, ~done] = alphas[:, ~done]
    out /= out.sum(axis=0, keepdims=True)
    return out, iterations, done


def _debias_batch(alphas: np.ndarray, XB: np.ndarray, A: np.ndarray, zeta: float = ZETA) -> np.ndarray:
    """Vectorized one-step correction for a (K, B) batch of MLE columns."""
    K, B = alphas.shape
    R = A @ alphas  # (p, B)
    mask = R > zeta
    Rsafe = np.where(mask, R, 1.0)
    resid = np.where(mask, (XB - R) / Rsafe, 0.0)
    psi = A.T @ resid  # (K, B)
    weights = np.where(mask, 1.0 / Rsafe, 0.0)  # (p, B)
    V = np.einsum("jk,jb,jl->bkl", A, weights, A, optimize=True)  # (B, K, K)
    out = np.empty_like(alphas)
    for b in range(B):
        out[:, b] = alphas[:, b] + numlin.pinv(V[b]) @ psi[:, b]
    return out


def _sigma_from_weights(a: np.ndarray, A: np.ndarray, zeta: float = ZETA) -> np.ndarray:
    """Raw plug-in covariance matrix for a weight vector (no wrapper)."""
    r = A @ a
    J = r > zeta
    AJ = A[J]
    H = (AJ / r[J][:, None]).T @ AJ
    try:
        Hinv = numlin.inv_at_rank(H)
    except numlin._SingularAtRank:
        raise SingularInformation("plug-in information matrix is singular") from None
    sigma = Hinv - np.outer(a, a)
    return (sigma + sigma.T) / 2.0
