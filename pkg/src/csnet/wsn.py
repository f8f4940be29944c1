"""Sensor-network data collection: in-network aggregation of random
projections over a spanning tree, the hybrid raw/aggregated variant,
spike-tolerant recovery over a stacked dictionary, sparse-projection
dissemination and query, jointly sparse ensembles, and transport-cost
accounting across collection schemes."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GenerationError,
    as_matrix,
    gen_sensing_matrix,
    support_of,
)
from . import solvers


# ---------------------------------------------------------------------------
# network substrate


@dataclass
class SensorNetwork:
    """Node 0 is the base station (tree root); it holds a reading like any
    sensor but transmits nothing. tx_count entries are exact message counts."""

    coords: np.ndarray  # (n, 2)
    neighbors: list  # adjacency lists, sorted
    parent: np.ndarray  # parent[0] == -1
    hops: np.ndarray
    tx_count: np.ndarray = None

    def __post_init__(self):
        if self.tx_count is None:
            self.tx_count = np.zeros(self.n, dtype=int)
        self._dist_cache = {}

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def tree_edges(self):
        return [(int(self.parent[i]), i) for i in range(self.n) if self.parent[i] >= 0]

    def children(self):
        kids = [[] for _ in range(self.n)]
        for p, c in self.tree_edges:
            kids[p].append(c)
        return kids

    def reset_counters(self):
        self.tx_count[:] = 0

    def hop_distance(self, source):
        """BFS hop distances on the full adjacency (not just the tree)."""
        if source not in self._dist_cache:
            dist = np.full(self.n, -1, dtype=int)
            dist[source] = 0
            queue = [source]
            while queue:
                nxt = []
                for j in queue:
                    for k in self.neighbors[j]:
                        if dist[k] < 0:
                            dist[k] = dist[j] + 1
                            nxt.append(k)
                queue = nxt
            self._dist_cache[source] = dist
        return self._dist_cache[source]


def _bfs_tree(neighbors, root=0):
    n = len(neighbors)
    parent = np.full(n, -1, dtype=int)
    hops = np.full(n, -1, dtype=int)
    hops[root] = 0
    queue = [root]
    while queue:
        nxt = []
        for j in queue:
            for k in neighbors[j]:
                if hops[k] < 0:
                    hops[k] = hops[j] + 1
                    parent[k] = j
                    nxt.append(k)
        queue = nxt
    if (hops < 0).any():
        raise GenerationError("network is disconnected")
    return parent, hops


def build_network(n, topology, seed=0, radius=None, max_retries=50):
    """Build a connected network with a breadth-first shortest-path tree
    rooted at node 0 (the base station).

    topology "grid": sqrt(n) x sqrt(n) lattice, base station at the corner.
    topology "random_geometric": uniform points in the unit square joined
    within the given radius, re-drawn until connected.
    """
    if topology == "grid":
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError("build_network: grid needs a square node count")
        coords = np.array([(i // side, i % side) for i in range(n)], dtype=float)
        neighbors = [[] for _ in range(n)]
        for i in range(n):
            r, c = divmod(i, side)
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < side and 0 <= cc < side:
                    neighbors[i].append(rr * side + cc)
        neighbors = [sorted(v) for v in neighbors]
        parent, hops = _bfs_tree(neighbors)
        return SensorNetwork(coords=coords, neighbors=neighbors, parent=parent, hops=hops)

    if topology == "random_geometric":
        if radius is None:
            radius = 1.8 * math.sqrt(math.log(max(n, 2)) / (math.pi * n))
        rng = np.random.default_rng(seed)
        for _ in range(max_retries):
            coords = rng.random((n, 2))
            diff = coords[:, None, :] - coords[None, :, :]
            close = (diff**2).sum(-1) <= radius**2
            np.fill_diagonal(close, False)
            neighbors = [sorted(np.flatnonzero(close[i]).tolist()) for i in range(n)]
            try:
                parent, hops = _bfs_tree(neighbors)
            except GenerationError:
                continue
            return SensorNetwork(
                coords=coords, neighbors=neighbors, parent=parent, hops=hops
            )
        raise GenerationError(
            "build_network: no connected geometric graph in %d tries" % max_retries
        )

    raise ValueError("build_network: unknown topology %r" % topology)


def save_network(path, net):
    """Node count line, coordinate lines, then edge lines."""
    with open(path, "w") as fh:
        fh.write("%d\n" % net.n)
        for x, y in net.coords:
            fh.write("%.17g %.17g\n" % (x, y))
        for i in range(net.n):
            for j in net.neighbors[i]:
                if i < j:
                    fh.write("%d %d\n" % (i, j))


def load_network(path):
    with open(path) as fh:
        n = int(fh.readline())
        coords = np.array([[float(v) for v in fh.readline().split()] for _ in range(n)])
        neighbors = [[] for _ in range(n)]
        for line in fh:
            if not line.strip():
                continue
            i, j = (int(v) for v in line.split())
            neighbors[i].append(j)
            neighbors[j].append(i)
    neighbors = [sorted(v) for v in neighbors]
    parent, hops = _bfs_tree(neighbors)
    return SensorNetwork(coords=coords, neighbors=neighbors, parent=parent, hops=hops)


def phi_for_network(seed, m, n):
    """Projection coefficients agreed between base station and sensors: one
    run-level seed expanded counter-style so entry (j, i) depends only on
    (seed, j, i) and each sensor can generate its own column locally."""
    rows = np.empty((m, n))
    base = np.random.Philox(key=seed)
    for j in range(m):
        rows[j] = np.random.Generator(base.jumped(j + 1)).standard_normal(n)
    return rows / np.sqrt(m)


# ---------------------------------------------------------------------------
# tree-based collection


def cdg_collect(net, x, phi, return_partials=False):
    """Aggregated collection: for each of the m projection rows, partial sums
    climb the tree leaf-to-root, every sensor transmitting exactly one message
    per row (m total); the base station ends up holding y = Phi x."""
    a = as_matrix(phi)
    x = np.asarray(x, dtype=float).ravel()
    m, n = a.shape
    if n != net.n or x.size != net.n:
        raise ValueError("cdg_collect: matrix/signal size must match the network")
    net.reset_counters()
    partial = a * x[None, :]  # column i starts as phi[:, i] * x_i
    order = np.argsort(-net.hops, kind="stable")
    for node in order:
        if net.parent[node] >= 0:
            partial[:, net.parent[node]] += partial[:, node]
            net.tx_count[node] += m
    y = partial[:, 0].copy()
    if return_partials:
        return y, net.tx_count.copy(), partial
    return y, net.tx_count.copy()


def hybrid_collect(net, x, phi):
    """Hybrid collection: a node whose subtree holds fewer than m readings
    forwards them raw; once a subtree reaches m readings its root switches to
    aggregation, so no node ever sends more than m messages."""
    a = as_matrix(phi)
    x = np.asarray(x, dtype=float).ravel()
    m, n = a.shape
    if n != net.n or x.size != net.n:
        raise ValueError("hybrid_collect: matrix/signal size must match the network")
    net.reset_counters()
    raw = [[] for _ in range(net.n)]  # (origin index, reading) pairs held raw
    agg = np.zeros((m, net.n))  # aggregated partials held per node
    is_agg = np.zeros(net.n, dtype=bool)
    order = np.argsort(-net.hops, kind="stable")
    for node in order:
        raw[node].append((node, x[node]))
        if is_agg[node] or len(raw[node]) >= m:
            for i, xi in raw[node]:
                agg[:, node] += a[:, i] * xi
            raw[node] = []
            is_agg[node] = True
        p = net.parent[node]
        if p < 0:
            continue
        if is_agg[node]:
            agg[:, p] += agg[:, node]
            is_agg[p] = True
            net.tx_count[node] += m
        else:
            raw[p].extend(raw[node])
            net.tx_count[node] += len(raw[node])
            raw[node] = []
    # base station folds any raw leftovers in locally
    for i, xi in raw[0]:
        agg[:, 0] += a[:, i] * xi
    return agg[:, 0].copy(), net.tx_count.copy()


# ---------------------------------------------------------------------------
# recovery with injected spikes


def recover_anomalous(y, phi, psi, lam, max_iter=3000, tol=1e-10, debias=True):
    """Split a measured signal into a smooth part (sparse in the given basis)
    and a spike part (sparse in place) by l1 recovery over the stacked
    dictionary [basis | identity]. Returns (smooth, spikes); their sum is the
    signal estimate."""
    a = as_matrix(phi)
    b = as_matrix(psi)
    n = a.shape[1]
    stacked = np.hstack([a @ b, a])
    res = solvers.ista_lasso(stacked, y, lam, max_iter=max_iter, tol=tol)
    coef = res.estimate
    if debias and res.support.size:
        sup = res.support
        refit = np.linalg.lstsq(stacked[:, sup], y, rcond=None)[0]
        coef = np.zeros(2 * n)
        coef[sup] = refit
    smooth = b @ coef[:n]
    spikes = coef[n:]
    if not res.converged:
        warnings.warn("recover_anomalous: solver did not converge; partial result")
    return smooth, spikes


# ---------------------------------------------------------------------------
# sparse random projections


def srp_optimal_s(n, M_ratio, k):
    """Measurement-sparseness level balancing dissemination against query
    cost: n / (M_ratio * k * sqrt(ln n)), constant 1."""
    if not 0 < M_ratio <= 1:
        raise ValueError("srp_optimal_s: M_ratio must be in (0, 1]")
    if k < 1:
        raise ValueError("srp_optimal_s: k must be >= 1")
    return float(n / (M_ratio * k * math.sqrt(math.log(n))))


def srp_run(net, x, s, m, seed):
    """Two-phase sparse-projection collection.

    Dissemination: every sensor draws its {+1,-1,0} coefficient per
    measurement; nonzero projections travel hop-by-hop to that measurement's
    randomly chosen holder. Query: the base station pulls the m held
    measurements, each reply traveling hop-by-hop back to node 0. Returns the
    measurement vector and a cost/diagnostics dict.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = net.n
    if x.size != n:
        raise ValueError("srp_run: signal length must match the network")
    if m > n:
        raise ValueError("srp_run: more measurements than nodes")
    if s < 1:
        raise ValueError("srp_run: s must be >= 1")
    phi = gen_sensing_matrix("sparse_random", m, n, seed, s=s)
    rng = np.random.default_rng(seed + 0x5E9)
    holders = rng.choice(n, size=m, replace=False)
    dissemination_tx = 0
    y = np.zeros(m)
    for j in range(m):
        dist = net.hop_distance(int(holders[j]))
        contributors = np.flatnonzero(phi.entries[j])
        y[j] = phi.entries[j, contributors] @ x[contributors]
        dissemination_tx += int(dist[contributors].sum())
    dist0 = net.hop_distance(0)
    query_tx = int(dist0[holders].sum())
    return y, {
        "dissemination_tx": dissemination_tx,
        "query_tx": query_tx,
        "phi": phi,
        "holders": holders,
    }


# ---------------------------------------------------------------------------
# jointly sparse ensembles


@dataclass
class JsmEnsemble:
    """Ensemble of J signals sharing structure: a common component plus
    per-signal innovations, stored as basis-domain coefficients alongside the
    realized signals."""

    model: str  # JSM1 | JSM2 | JSM3
    signals: np.ndarray  # n x J
    common: np.ndarray  # coefficient vector of the shared part
    innovations: np.ndarray  # n x J coefficient matrix
    sparsities: tuple
    basis: object = None  # BasisMatrix or None for identity


def _draw_sparse(rng, n, k):
    v = np.zeros(n)
    idx = rng.choice(n, size=k, replace=False)
    v[idx] = rng.uniform(1.0, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    return v


def dcs_synthesize(model, n, J, k0, k, seed, psi=None):
    """Plant a jointly sparse ensemble. Coefficients are +-Uniform[1,2].

    JSM1: common part k0-sparse, innovations k-sparse.
    JSM2: no common part; innovations share one random size-k support.
    JSM3: common part dense (support wider than n/2), innovations k-sparse.
    """
    rng = np.random.default_rng(seed)
    b = as_matrix(psi) if psi is not None else None
    if model == "JSM1":
        if k0 + k > n:
            raise ValueError("dcs_synthesize: k0 + k exceeds n")
        common = _draw_sparse(rng, n, k0)
        innov = np.column_stack([_draw_sparse(rng, n, k) for _ in range(J)])
    elif model == "JSM2":
        if k > n:
            raise ValueError("dcs_synthesize: k exceeds n")
        common = np.zeros(n)
        sup = rng.choice(n, size=k, replace=False)
        innov = np.zeros((n, J))
        innov[sup, :] = rng.uniform(1.0, 2.0, (k, J)) * rng.choice([-1.0, 1.0], (k, J))
    elif model == "JSM3":
        if k0 <= n // 2:
            raise ValueError("dcs_synthesize: JSM3 common support must exceed n/2")
        common = _draw_sparse(rng, n, k0)
        innov = np.column_stack([_draw_sparse(rng, n, k) for _ in range(J)])
    else:
        raise ValueError("dcs_synthesize: unknown model %r" % model)
    coef = common[:, None] + innov
    signals = coef if b is None else b @ coef
    return JsmEnsemble(
        model=model,
        signals=signals,
        common=common,
        innovations=innov,
        sparsities=(k0, k),
        basis=psi,
    )


def _effective_matrices(phis, psi):
    b = as_matrix(psi) if psi is not None else None
    mats = []
    for p in phis:
        a = as_matrix(p)
        mats.append(a if b is None else a @ b)
    return mats


def dcs_recover(model, ys, phis, params=None):
    """Joint reconstruction of an ensemble from per-sensor measurements.

    JSM1: one stacked l1 problem over [common; innovation_1; ...] with the
    block measurement matrix, then an optional least-squares debias.
    JSM2: greedy pursuit with the selection score summed across sensors.
    JSM3: alternate a least-squares estimate of the dense common part (the
    sparse innovations average out across sensors) with per-sensor greedy
    recovery of the innovations.

    Returns (ensemble estimate, extra) where extra is the common support
    (JSM2), the common-part support (JSM1), or the rounds used (JSM3).
    """
    params = dict(params or {})
    psi = params.pop("psi", None)
    mats = _effective_matrices(phis, psi)
    J = len(ys)
    n = mats[0].shape[1]
    b = as_matrix(psi) if psi is not None else np.eye(n)

    if model == "JSM2":
        k = params.pop("k")
        norm_mats, colnorms = [], []
        for a in mats:
            nrm = np.linalg.norm(a, axis=0)
            nrm = np.where(nrm > 0, nrm, 1.0)
            norm_mats.append(a / nrm)
            colnorms.append(nrm)
        residuals = [np.asarray(y, float).copy() for y in ys]
        sup = []
        for _ in range(k):
            score = np.zeros(n)
            for a, r in zip(norm_mats, residuals):
                score += np.abs(a.T @ r)
            score[sup] = -1.0
            sup.append(int(np.argmax(score)))
            for j, (a, y) in enumerate(zip(norm_mats, ys)):
                coef = np.linalg.lstsq(a[:, sup], y, rcond=None)[0]
                residuals[j] = y - a[:, sup] @ coef
        innov = np.zeros((n, J))
        for j, (a, y) in enumerate(zip(norm_mats, ys)):
            coef = np.linalg.lstsq(a[:, sup], y, rcond=None)[0]
            innov[sup, j] = coef / colnorms[j][sup]
        sup_idx = np.array(sorted(sup), dtype=int)
        return JsmEnsemble(
            model=model,
            signals=b @ innov,
            common=np.zeros(n),
            innovations=innov,
            sparsities=(0, int(sup_idx.size)),
            basis=psi,
        ), sup_idx

    if model == "JSM1":
        lam = params.pop("lam", 1e-2)
        max_iter = params.pop("max_iter", 20000)
        debias = params.pop("debias", True)
        rows = sum(a.shape[0] for a in mats)
        stacked = np.zeros((rows, n * (J + 1)))
        ystack = np.concatenate([np.asarray(y, float).ravel() for y in ys])
        r0 = 0
        for j, a in enumerate(mats):
            stacked[r0 : r0 + a.shape[0], :n] = a
            stacked[r0 : r0 + a.shape[0], n * (j + 1) : n * (j + 2)] = a
            r0 += a.shape[0]
        res = solvers.ista_lasso(stacked, ystack, lam, max_iter=max_iter, tol=1e-10)
        coef = res.estimate
        if debias and res.support.size:
            refit = np.linalg.lstsq(stacked[:, res.support], ystack, rcond=None)[0]
            coef = np.zeros(n * (J + 1))
            coef[res.support] = refit
        common = coef[:n]
        innov = coef[n:].reshape(J, n).T
        return JsmEnsemble(
            model=model,
            signals=b @ (common[:, None] + innov),
            common=common,
            innovations=innov,
            sparsities=(int(support_of(common).size), 0),
            basis=psi,
        ), support_of(common)

    if model == "JSM3":
        k_innov = params.pop("k")
        rounds = params.pop("max_rounds", 10)
        repair = params.pop("repair", True)
        ys = [np.asarray(y, float).ravel() for y in ys]
        gram = sum(a.T @ a for a in mats)
        ridge = gram + 1e-10 * np.eye(n)
        innov = np.zeros((n, J))
        common = np.zeros(n)
        prev_supports = None
        used_rounds = 0

        def common_step():
            rhs = sum(
                a.T @ (y - a @ innov[:, j]) for j, (a, y) in enumerate(zip(mats, ys))
            )
            return np.linalg.solve(ridge, rhs)

        for rnd in range(rounds):
            used_rounds = rnd + 1
            common = common_step()
            supports = []
            for j, (a, y) in enumerate(zip(mats, ys)):
                innov[:, j] = _overselect_sparse_fit(a, y - a @ common, k_innov)
                supports.append(frozenset(np.flatnonzero(innov[:, j]).tolist()))
            if supports == prev_supports:
                break
            prev_supports = supports
        if repair:
            # noiseless consistency check: a sensor whose fit leaves residual
            # has a wrong support, and only those pay for the exact solver
            for j, (a, y) in enumerate(zip(mats, ys)):
                resid = np.linalg.norm(y - a @ (common + innov[:, j]))
                if resid > 1e-6 * max(np.linalg.norm(y), 1e-300):
                    innov[:, j] = solvers.l0_oracle(a, y - a @ common, k_innov).estimate
            for _ in range(2):
                common = common_step()
                for j, (a, y) in enumerate(zip(mats, ys)):
                    sup = np.flatnonzero(np.abs(innov[:, j]) > 1e-12)
                    innov[:, j] = 0.0
                    if sup.size:
                        coef = np.linalg.lstsq(a[:, sup], y - a @ common, rcond=None)[0]
                        innov[sup, j] = coef
        return JsmEnsemble(
            model=model,
            signals=b @ (common[:, None] + innov),
            common=common,
            innovations=innov,
            sparsities=(int(support_of(common).size), k_innov),
            basis=psi,
        ), used_rounds

    raise ValueError("dcs_recover: unknown model %r" % model)


def _overselect_sparse_fit(a, y, k, slack=2):
    """Greedy k-sparse fit hardened against single wrong picks: run a few
    extra pursuit steps, keep the k largest coefficients, refit."""
    res = solvers.omp(a, y, max_iter=k + slack)
    est = res.estimate
    keep = np.argsort(-np.abs(est), kind="stable")[:k]
    keep = keep[np.abs(est[keep]) > 0]
    out = np.zeros_like(est)
    if keep.size:
        out[keep] = np.linalg.lstsq(a[:, keep], y, rcond=None)[0]
    return out


# ---------------------------------------------------------------------------
# transport-cost accounting


def transport_cost_report(n_values, k, s, seeds):
    """Measure total transmissions for conventional, aggregated, and
    sparse-projection collection on grids, plus fitted log-log growth.

    Conventional forwards every raw reading up the tree (hop-by-hop count).
    Aggregated collection uses m = ceil(k ln(n/k)) projection rows, one
    message per sensor per row. The sparse variant counts one message per
    nonzero projection coefficient: measurements are formed among adjacent
    sensors, so per-message transport is a single hop and the expected cost
    ratio to the dense scheme is 1/s.
    """
    if len(n_values) < 3:
        raise ValueError("transport_cost_report: need at least 3 network sizes")
    rows = []
    for n in n_values:
        m = max(1, math.ceil(k * math.log(n / k)))
        net = build_network(n, "grid")
        conventional = int(net.hops[1:].sum())
        for seed in seeds:
            phi = gen_sensing_matrix("gaussian", m, n, seed)
            _, tx = cdg_collect(net, np.zeros(n), phi)
            cdg = int(tx.sum())
            sparse_phi = gen_sensing_matrix("sparse_random", m, n, seed, s=s)
            srp = int(np.count_nonzero(sparse_phi.entries[:, 1:]))
            rows.append(
                {
                    "n": n,
                    "seed": seed,
                    "m": m,
                    "conventional": conventional,
                    "cdg": cdg,
                    "cdg_srp": srp,
                }
            )
    ns = np.array(sorted(set(r["n"] for r in rows)), dtype=float)

    def mean_cost(key):
        return np.array([np.mean([r[key] for r in rows if r["n"] == n]) for n in ns])

    exponents = {
        key: float(np.polyfit(np.log(ns), np.log(mean_cost(key)), 1)[0])
        for key in ("conventional", "cdg", "cdg_srp")
    }
    cdg_vs_nm = [r["cdg"] / (r["n"] * r["m"]) for r in rows]
    srp_ratio = [r["cdg_srp"] / r["cdg"] for r in rows]
    return {
        "rows": rows,
        "exponents": exponents,
        "cdg_over_nm": (float(min(cdg_vs_nm)), float(max(cdg_vs_nm))),
        "srp_over_cdg": float(np.mean(srp_ratio)),
    }
