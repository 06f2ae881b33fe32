"""Metrics on the simplex, cost matrices, and discrete Wasserstein LPs.

The Wasserstein distance between two K-atom mixing measures is computed two
ways: as the primal transportation LP over couplings, and as the
Kantorovich-Rubinstein dual, the maximum of f^T(alpha - beta) over the
polytope of vectors satisfying f_k - f_l <= d(A_k, A_l) with f_1 = 0.
Both routes go through scipy's HiGHS solver; the dual polytope additionally
caches its vertex set (Qhull) so that Monte Carlo loops can evaluate the
support function as a single matrix product instead of one LP per draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection, QhullError

from .errors import (
    DimError,
    InvalidCost,
    InvalidParam,
    InvalidSimplex,
    LPFailure,
    Unbounded,
)

# Probability vectors must sum to one within this tolerance.
SIMPLEX_TOL = 1e-8

# Vertex enumeration is skipped above this dimension; the count explodes
# combinatorially and the LP path remains available.
_QHULL_MAX_K = 12

# Facet slabs get this much numerical slack so that an optimal face computed
# by one LP stays feasible for the next at HiGHS's ~1e-7 feasibility scale.
FACET_SLACK_UNIT = 1e-7


def facet_slack(target: float) -> float:
    return FACET_SLACK_UNIT * max(1.0, abs(target))

_METRICS = ("tv", "l2")


def _values(x, *, name: str = "vector") -> np.ndarray:
    """Coerce ProbVec / CountVector / array-like to a float 1-d array."""
    if isinstance(x, ProbVec):
        return x.values
    if hasattr(x, "frequencies"):  # CountVector
        return np.asarray(x.frequencies, dtype=float)
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidParam(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


class ProbVec:
    """A point of the probability simplex.

    Entries must be non-negative and sum to one within ``SIMPLEX_TOL``.
    Tiny negative entries (roundoff) are clipped to zero.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InvalidParam("probability vector must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise InvalidSimplex("probability vector has non-finite entries")
        if v.min() < -1e-9:
            raise InvalidSimplex(f"negative entry {v.min():.3e} in probability vector")
        v = np.clip(v, 0.0, None)
        s = v.sum()
        if abs(s - 1.0) > SIMPLEX_TOL:
            raise InvalidSimplex(f"entries sum to {s!r}, expected 1")
        self.values = v
        self.values.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        return f"ProbVec({self.values!r})"


class TopicMatrix:
    """p x K matrix whose columns are mixture components in the p-simplex."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2:
            raise InvalidParam(f"topic matrix must be 2-d, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InvalidSimplex("topic matrix has non-finite entries")
        if M.min() < -1e-9:
            raise InvalidSimplex("topic matrix has negative entries")
        M = np.clip(M, 0.0, None)
        sums = M.sum(axis=0)
        if np.abs(sums - 1.0).max() > SIMPLEX_TOL:
            k = int(np.abs(sums - 1.0).argmax())
            raise InvalidSimplex(f"column {k} sums to {sums[k]!r}, expected 1")
        self.matrix = M
        self.matrix.flags.writeable = False

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def K(self) -> int:
        return self.matrix.shape[1]

    def column(self, k: int) -> ProbVec:
        return ProbVec(self.matrix[:, k] / self.matrix[:, k].sum())


def tv_distance(u, v) -> float:
    """Total variation distance ||u - v||_1 / 2 between probability vectors."""
    a = _values(u, name="u")
    b = _values(v, name="v")
    if a.size != b.size:
        raise DimError(f"dimension mismatch: {a.size} vs {b.size}")
    return 0.5 * float(np.abs(a - b).sum())


def _topics_array(A) -> np.ndarray:
    return A.matrix if isinstance(A, TopicMatrix) else np.asarray(A, dtype=float)


class CostMatrix:
    """K x K symmetric non-negative distances between mixture components."""

    __slots__ = ("entries", "metric")

    def __init__(self, entries, metric: str = "table"):
        C = np.asarray(entries, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise InvalidCost(f"cost table must be square, got shape {C.shape}")
        if not np.all(np.isfinite(C)):
            raise InvalidCost("cost table has non-finite entries")
        if np.abs(np.diag(C)).max(initial=0.0) > 1e-12:
            raise InvalidCost("cost table has nonzero diagonal")
        if np.abs(C - C.T).max(initial=0.0) > 1e-10:
            raise InvalidCost("cost table is not symmetric")
        if C.min() < 0.0:
            raise InvalidCost("cost table has negative entries")
        C = (C + C.T) / 2.0
        np.fill_diagonal(C, 0.0)
        self.entries = C
        self.entries.flags.writeable = False
        self.metric = metric

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    def max_entry(self) -> float:
        return float(self.entries.max(initial=0.0))


def cost_matrix(A, metric="tv") -> CostMatrix:
    """Pairwise distances between the columns of a topic matrix.

    ``metric`` is ``"tv"`` (default), ``"l2"``, or a user-supplied K x K
    pairwise table (validated for symmetry and zero diagonal).
    """
    M = _topics_array(A)
    K = M.shape[1]
    if isinstance(metric, str):
        if metric == "tv":
            C = 0.5 * np.abs(M[:, :, None] - M[:, None, :]).sum(axis=0)
        elif metric == "l2":
            diff = M[:, :, None] - M[:, None, :]
            C = np.sqrt((diff * diff).sum(axis=0))
        else:
            raise InvalidParam(f"unknown metric {metric!r}, expected one of {_METRICS}")
        C = (C + C.T) / 2.0
        np.fill_diagonal(C, 0.0)
        return CostMatrix(C, metric=metric)
    table = np.asarray(metric, dtype=float)
    if table.shape != (K, K):
        raise InvalidCost(f"pairwise table must be {K}x{K}, got {table.shape}")
    return CostMatrix(table, metric="table")


@dataclass(frozen=True)
class FacetConstraint:
    """Slab |f^T u - target| <= delta added to the dual polytope."""

    direction: np.ndarray
    target: float
    delta: float


class DualPolytope:
    """Kantorovich-Rubinstein dual feasible set, anchored at f_1 = 0.

    Vectors live in R^K with the first coordinate fixed to zero; the LP acts
    on the remaining K-1 free coordinates.  Immutable after construction and
    safe to share across concurrent workers; the halfspace description and
    (when available) the vertex set are computed lazily and cached.
    """

    def __init__(self, cost: CostMatrix, facet: FacetConstraint | None = None):
        if not isinstance(cost, CostMatrix):
            cost = CostMatrix(cost)
        if facet is not None:
            u = np.asarray(facet.direction, dtype=float)
            if u.shape != (cost.K,):
                raise DimError(f"facet direction has shape {u.shape}, expected ({cost.K},)")
            if facet.delta < 0:
                raise InvalidParam("facet slack delta must be >= 0")
            facet = FacetConstraint(u, float(facet.target), float(facet.delta))
        self.cost = cost
        self.facet = facet
        self._halfspaces: tuple[np.ndarray, np.ndarray] | None = None
        self._vertices: np.ndarray | None = None
        self._vertices_tried = False

    @property
    def K(self) -> int:
        return self.cost.K

    # f_1 = 0 is encoded by dropping the first coordinate: x = f[1:].
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Inequalities (A, b) with A x <= b over the K-1 free coordinates."""
        if self._halfspaces is not None:
            return self._halfspaces
        K = self.K
        C = self.cost.entries
        rows = []
        rhs = []
        for k in range(K):
            for l in range(K):
                if k == l:
                    continue
                r = np.zeros(K - 1)
                if k > 0:
                    r[k - 1] = 1.0
                if l > 0:
                    r[l - 1] = -1.0
                rows.append(r)
                rhs.append(C[k, l])
        if self.facet is not None:
            u = self.facet.direction[1:]
            t, d = self.facet.target, self.facet.delta
            eps = facet_slack(t)
            rows.append(u)
            rhs.append(t + d + eps)
            rows.append(-u)
            rhs.append(-(t - d - eps))
        A = np.asarray(rows, dtype=float)
        b = np.asarray(rhs, dtype=float)
        self._halfspaces = (A, b)
        return self._halfspaces

    def _base_vertices(self) -> np.ndarray | None:
        """Vertices of the unrestricted polytope (no facet), or None."""
        K = self.K
        if K == 1:
            return np.zeros((1, 1))
        if K > _QHULL_MAX_K:
            return None
        base = DualPolytope(self.cost) if self.facet is not None else self
        A, b = base.halfspaces()
        V = _enumerate_vertices(A, b)
        if V is None:
            return None
        return np.column_stack([np.zeros(V.shape[0]), V])

    def vertices(self) -> np.ndarray | None:
        """Vertex set as rows of length K (f_1 = 0), or None if unavailable.

        With a zero-slack facet whose target is the polytope's own maximum,
        the restricted set is an optimal face and its vertices are the base
        vertices attaining the maximum.  Positive-slack slabs are enumerated
        directly when they have interior; otherwise callers fall back to LPs.
        """
        if self._vertices_tried:
            return self._vertices
        self._vertices_tried = True
        V = self._base_vertices()
        if V is None or self.facet is None:
            self._vertices = V
            return V
        u, t, d = self.facet.direction, self.facet.target, self.facet.delta
        eps = facet_slack(t)
        vals = V @ u
        top = float(vals.max())
        if d == 0.0:
            # Exact only on the optimal face; arbitrary targets need the LP.
            if t < top - eps or t > top + eps:
                self._vertices = None
                return None
            face = V[vals >= top - eps]
            self._vertices = face
            return face
        if t + d >= top - eps and t - d <= float(vals.min()) + eps:
            # Slab inactive: restriction equals the base polytope.
            self._vertices = V
            return V
        A, b = self.halfspaces()
        W = _enumerate_vertices(A, b)
        if W is None:
            self._vertices = None
            return None
        self._vertices = np.column_stack([np.zeros(W.shape[0]), W])
        return self._vertices

    def contains(self, f, tol: float = 1e-8) -> bool:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.K,):
            raise DimError(f"f has shape {f.shape}, expected ({self.K},)")
        if abs(f[0]) > tol:
            return False
        A, b = self.halfspaces()
        return bool(np.all(A @ f[1:] <= b + tol))


def _enumerate_vertices(A: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Vertices of {x : A x <= b}, or None when enumeration is unavailable.

    One-dimensional systems reduce to an interval; higher dimensions go
    through Qhull seeded at the Chebyshev center, which requires a
    full-dimensional polytope.
    """
    n = A.shape[1]
    if n == 1:
        a = A[:, 0]
        upper = np.inf
        lower = -np.inf
        for ai, bi in zip(a, b):
            if ai > 0:
                upper = min(upper, bi / ai)
            elif ai < 0:
                lower = max(lower, bi / ai)
            elif bi < 0:
                return np.empty((0, 1))
        if lower > upper + 1e-12 or not np.isfinite(lower) or not np.isfinite(upper):
            return np.empty((0, 1)) if lower > upper else None
        return np.array([[lower], [upper]])
    center = _chebyshev_center(A, b)
    if center is None or center[1] <= 1e-10:
        return None
    try:
        hs = HalfspaceIntersection(np.column_stack([A, -b]), center[0])
    except QhullError:
        return None
    return np.unique(np.round(hs.intersections, 10), axis=0)


def _chebyshev_center(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Strictly interior point via the Chebyshev-center LP."""
    n = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    res = linprog(
        np.concatenate([np.zeros(n), [-1.0]]),
        A_ub=np.column_stack([A, norms]),
        b_ub=b,
        bounds=[(None, None)] * n + [(0, None)],
        method="highs",
    )
    if res.status != 0:
        return None
    return res.x[:-1], float(res.x[-1])


def kr_dual_value(u, polytope: DualPolytope) -> tuple[float, np.ndarray]:
    """Maximize f^T u over the dual polytope by linear programming.

    Returns the optimum and one maximizer f in R^K with f_1 = 0.  The value
    is unique; the argmax may be any vertex maximizer.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (polytope.K,):
        raise DimError(f"direction has shape {u.shape}, expected ({polytope.K},)")
    K = polytope.K
    if K == 1:
        return 0.0, np.zeros(1)
    A, b = polytope.halfspaces()
    res = linprog(
        -u[1:],
        A_ub=A,
        b_ub=b,
        bounds=[(None, None)] * (K - 1),
        method="highs",
    )
    if res.status == 3:
        raise Unbounded("dual LP is unbounded for the given direction")
    if res.status != 0:
        raise LPFailure(f"dual LP failed with status {res.status}: {res.message}")
    f = np.concatenate([[0.0], res.x])
    return -float(res.fun), f


def support_batch(polytope: DualPolytope, directions) -> np.ndarray:
    """Support function of the polytope at many directions at once.

    ``directions`` has shape (n, K).  Uses the cached vertex set when
    enumeration succeeded, otherwise one LP per direction; both routes agree
    to LP tolerance and equality is enforced by the property suite.
    """
    U = np.asarray(directions, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.shape[1] != polytope.K:
        raise DimError(f"directions have dim {U.shape[1]}, expected {polytope.K}")
    V = polytope.vertices()
    if V is not None and V.shape[0] > 0:
        return (U @ V.T).max(axis=1)
    return np.array([kr_dual_value(u, polytope)[0] for u in U])


def restricted_polytope(cost: CostMatrix, alpha_hat, beta_hat, w_hat: float, delta: float) -> DualPolytope:
    """Dual polytope intersected with |f^T(alpha - beta) - w_hat| <= delta.

    ``w_hat`` should be the dual value of the same direction over the
    unrestricted polytope, in which case the optimal face stays feasible.
    """
    if delta < 0:
        raise InvalidParam("delta must be >= 0")
    a = _values(alpha_hat, name="alpha_hat")
    b = _values(beta_hat, name="beta_hat")
    if a.size != b.size or a.size != cost.K:
        raise DimError("alpha_hat/beta_hat dimensions must match the cost matrix")
    facet = FacetConstraint(direction=a - b, target=float(w_hat), delta=float(delta))
    return DualPolytope(cost, facet)


def wasserstein_primal(alpha, beta, cost: CostMatrix) -> tuple[float, np.ndarray]:
    """Exact Wasserstein distance between K-atom mixing measures.

    Solves the transportation LP min <gamma, cost> over couplings of alpha
    and beta; returns the optimal value and an optimal plan with row sums
    alpha and column sums beta.
    """
    a = _values(alpha, name="alpha")
    b = _values(beta, name="beta")
    K = cost.K
    if a.size != K or b.size != K:
        raise DimError(f"weights must have dim {K}, got {a.size} and {b.size}")
    if K == 1:
        return 0.0, np.array([[min(a[0], b[0])]])
    C = cost.entries
    # Equality constraints: K row sums and K-1 column sums (last is implied).
    A_eq = np.zeros((2 * K - 1, K * K))
    b_eq = np.zeros(2 * K - 1)
    for k in range(K):
        A_eq[k, k * K : (k + 1) * K] = 1.0
        b_eq[k] = a[k]
    for l in range(K - 1):
        A_eq[K + l, l::K] = 1.0
        b_eq[K + l] = b[l]
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise LPFailure(f"transportation LP failed with status {res.status}: {res.message}")
    plan = np.clip(res.x.reshape(K, K), 0.0, None)
    return max(float(res.fun), 0.0), plan
