"""Application-layer monitoring: routing matrices and their expansion
diagnostic, congested-link recovery from path measurements, path-similarity
graphs with a Laplacian eigenbasis for transform-domain monitoring, and
linear sketches for heavy-key recovery from streams."""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (
    BasisMatrix,
    ResourceLimitError,
    as_matrix,
    gen_sensing_matrix,
)
from . import solvers


# ---------------------------------------------------------------------------
# routing matrices


@dataclass
class RoutingMatrix:
    """0/1 incidence of paths (rows) over links (columns)."""

    entries: np.ndarray
    path_link_sets: list

    @property
    def n_paths(self):
        return self.entries.shape[0]

    @property
    def n_links(self):
        return self.entries.shape[1]


def build_routing(paths, n_links):
    """Binary routing matrix from per-path link sets."""
    sets = []
    for i, links in enumerate(paths):
        links = frozenset(int(l) for l in links)
        if not links:
            raise ValueError("build_routing: path %d is empty" % i)
        if max(links) >= n_links or min(links) < 0:
            raise ValueError("build_routing: path %d uses a link >= n_links" % i)
        sets.append(links)
    entries = np.zeros((len(sets), n_links))
    for i, links in enumerate(sets):
        entries[i, sorted(links)] = 1.0
    return RoutingMatrix(entries=entries, path_link_sets=sets)


@dataclass
class ExpanderReport:
    passed: bool
    d: int | None
    witness: tuple | None  # violating link subset, when one exists
    reason: str = ""


def expander_check(routing, s, eps, max_left=24):
    """Verify that the link/path bipartite graph is an (s, d, eps) expander:
    every link appears in exactly d paths and every link subset S with
    |S| <= s touches at least (1 - eps) * d * |S| distinct paths.

    Exhausts all subsets, so the left (link) side is capped at max_left.
    Returns a report carrying a violating witness subset when the check fails.
    """
    entries = routing.entries if isinstance(routing, RoutingMatrix) else np.asarray(routing)
    n_links = entries.shape[1]
    if n_links > max_left:
        raise ResourceLimitError(
            "expander_check: %d links exceeds the exhaustive cap %d" % (n_links, max_left)
        )
    degrees = entries.sum(axis=0).astype(int)
    if degrees.size == 0:
        return ExpanderReport(passed=False, d=None, witness=None, reason="no links")
    if not (degrees == degrees[0]).all():
        return ExpanderReport(
            passed=False, d=None, witness=None, reason="graph is not left-regular"
        )
    d = int(degrees[0])
    neigh = [frozenset(np.flatnonzero(entries[:, j]).tolist()) for j in range(n_links)]
    for size in range(1, min(s, n_links) + 1):
        for subset in combinations(range(n_links), size):
            reached = frozenset().union(*(neigh[j] for j in subset))
            if len(reached) < (1.0 - eps) * d * size:
                return ExpanderReport(
                    passed=False, d=d, witness=subset, reason="expansion violated"
                )
    return ExpanderReport(passed=True, d=d, witness=None)


def monitor_links(routing, y, solver_params=None, loss_rates=False):
    """Recover per-link metrics from per-path sums by sparse recovery on the
    column-normalized routing matrix, rescaled back afterwards.

    Additive metrics (delay) apply directly; with loss_rates=True the inputs
    are per-path loss fractions, mapped through -log(1-.) to the additive
    domain and back.
    """
    a = routing.entries if isinstance(routing, RoutingMatrix) else np.asarray(routing, float)
    y = np.asarray(y, dtype=float).ravel()
    if loss_rates:
        y = -np.log1p(-y)
    params = dict(solver_params or {})
    norms = np.linalg.norm(a, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    an = a / safe
    method = params.pop("method", "ista")
    if method == "ista":
        res = solvers.ista_lasso(
            an,
            y,
            params.pop("lam", 1e-3 * max(float(np.max(np.abs(an.T @ y))), 1e-300)),
            max_iter=params.pop("max_iter", 5000),
            tol=params.pop("tol", 1e-12),
        )
    elif method == "omp":
        res = solvers.omp(an, y, **params)
    else:
        raise ValueError("monitor_links: unknown method %r" % method)
    x = res.estimate / safe
    if loss_rates:
        x = -np.expm1(-x)
    return x


# ---------------------------------------------------------------------------
# path-similarity graph and transform-domain monitoring


@dataclass
class MeasurementGraph:
    """One vertex per monitored path; edge weights are the shared-link
    fraction |L_i & L_j| / |L_i | L_j| (1 on the diagonal)."""

    weights: np.ndarray
    paths: list = field(default_factory=list)

    @property
    def n(self):
        return self.weights.shape[0]


def measurement_graph(paths):
    sets = [frozenset(int(l) for l in p) for p in paths]
    if not sets:
        raise ValueError("measurement_graph: no paths")
    n = len(sets)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            inter = len(sets[i] & sets[j])
            union = len(sets[i] | sets[j])
            w[i, j] = w[j, i] = inter / union if union else 0.0
    return MeasurementGraph(weights=w, paths=sets)


def laplacian_eigensystem(weights):
    """Eigen-decomposition of the weighted graph Laplacian D - W (diagonal of
    W ignored), eigenvalues ascending, eigenvector signs canonicalized so the
    largest-magnitude entry of each column is positive."""
    w = np.asarray(weights, dtype=float).copy()
    np.fill_diagonal(w, 0.0)
    lap = np.diag(w.sum(axis=1)) - w
    vals, vecs = np.linalg.eigh(lap)
    for j in range(vecs.shape[1]):
        lead = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def _connected(weights):
    w = np.asarray(weights) > 0
    np.fill_diagonal(w, False)
    n = w.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(w[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def graph_basis(graph):
    """Orthonormal eigenbasis of the measurement-graph Laplacian, columns
    ordered by ascending eigenvalue; metrics that vary smoothly across
    overlapping paths compress well in it. Needs a connected graph."""
    weights = graph.weights if isinstance(graph, MeasurementGraph) else np.asarray(graph)
    if not _connected(weights):
        raise ValueError("graph_basis: measurement graph is disconnected")
    _, vecs = laplacian_eigensystem(weights)
    return BasisMatrix(entries=vecs, kind="graph_eigen")


def monitor_paths(y_s, selected, basis, lam, max_iter=5000, tol=1e-12):
    """Estimate metrics on every path from measurements on a subset: sparse
    basis coefficients are recovered from the selected rows of the basis and
    expanded back to the full path set."""
    selected = np.asarray(selected, dtype=int)
    if selected.size == 0:
        raise ValueError("monitor_paths: empty selection")
    if np.unique(selected).size != selected.size:
        raise ValueError("monitor_paths: selected indices must be distinct")
    b = as_matrix(basis)
    a = b[selected, :]
    res = solvers.ista_lasso(
        a, np.asarray(y_s, float).ravel(), lam, max_iter=max_iter, tol=tol
    )
    return b @ res.estimate


# ---------------------------------------------------------------------------
# stream sketches


@dataclass
class Sketch:
    """Linear sketch y = Phi * counts of a key stream; an update is one column
    addition, so the sketch of a concatenated stream is the sum of sketches.
    Single writer per sketch; distinct sketches are independent."""

    y: np.ndarray
    phi: object  # SensingMatrix
    n_keys: int


def new_sketch(m, n_keys, seed, recipe="gaussian"):
    phi = gen_sensing_matrix(recipe, m, n_keys, seed)
    return Sketch(y=np.zeros(m), phi=phi, n_keys=n_keys)


def sketch_update(sketch, key, count=1):
    """Record `count` arrivals of a key."""
    key = int(key)
    if not 0 <= key < sketch.n_keys:
        raise ValueError("sketch_update: key %d outside [0, %d)" % (key, sketch.n_keys))
    sketch.y += count * sketch.phi.entries[:, key]
    return sketch


def sketch_update_from_stream(sketch, lines):
    """Consume a stream of decimal keys, one per line; blank lines skipped."""
    for line in lines:
        line = line.strip()
        if line:
            sketch_update(sketch, int(line))
    return sketch


def sketch_recover(sketch, k, method="omp"):
    """Recover the k heaviest keys and their estimated counts."""
    if method == "omp":
        res = solvers.omp(sketch.phi, sketch.y, max_iter=k)
    elif method == "cosamp":
        res = solvers.cosamp(sketch.phi, sketch.y, k)
    else:
        raise ValueError("sketch_recover: unknown method %r" % method)
    order = np.argsort(-np.abs(res.estimate[res.support]), kind="stable")
    keys = res.support[order]
    return keys, res.estimate[keys]
