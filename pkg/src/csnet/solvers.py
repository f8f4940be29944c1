"""Sparse recovery engines: exhaustive l0 oracle, orthogonal matching pursuit,
CoSaMP, iterative soft-thresholding for the lasso, and simultaneous OMP for
jointly sparse signal ensembles."""

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import REL_ZERO_TOL, ResourceLimitError, as_matrix, support_of, zero_threshold


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    support: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool
    objective_trace: list | None = None

    @property
    def support_set(self):
        return frozenset(int(i) for i in self.support)


@dataclass
class MmvResult:
    estimate: np.ndarray  # n x l, zero off the common support
    common_support: np.ndarray
    iterations: int
    residual_norms: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def support_set(self):
        return frozenset(int(i) for i in self.common_support)


def _finalize(phi, y, x, iterations, converged, trace=None):
    """Prune below-tolerance coefficients and recompute the residual against
    the original matrix."""
    sup = support_of(x)
    est = np.zeros_like(x)
    est[sup] = x[sup]
    res = float(np.linalg.norm(y - phi @ est))
    return RecoveryResult(
        estimate=est,
        support=sup,
        iterations=iterations,
        residual_norm=res,
        converged=converged,
        objective_trace=trace,
    )


def _normalized(phi):
    """Unit-normalize columns; warn when the input was grossly unnormalized."""
    norms = np.linalg.norm(phi, axis=0)
    if norms.max() == 0:
        raise ValueError("all-zero measurement matrix")
    if np.max(np.abs(norms - 1.0)) > 0.1:
        warnings.warn(
            "measurement matrix columns deviate from unit norm by more than 10%; "
            "normalizing internally",
            stacklevel=3,
        )
    safe = np.where(norms > 0, norms, 1.0)
    return phi / safe, safe


# ---------------------------------------------------------------------------


def l0_oracle(phi, y, k_max):
    """Ground-truth solver: exhaustively least-squares every support of size
    0..k_max and return the smallest-support solution whose residual is zero
    within the global tolerance, else the minimum-residual one flagged
    not-converged. Intended for tiny instances only."""
    phi = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    m, n = phi.shape
    if not 0 <= k_max <= n:
        raise ValueError("l0_oracle: k_max=%d outside [0, %d]" % (k_max, n))
    if math.comb(n, k_max) > 1_000_000:
        raise ResourceLimitError(
            "l0_oracle: C(%d,%d) exceeds the 1e6 enumeration guard" % (n, k_max)
        )
    tol = REL_ZERO_TOL * max(np.linalg.norm(y), 1e-300)
    best = (np.inf, np.zeros(n), 0)  # residual, estimate, tried size
    for size in range(k_max + 1):
        for cols in combinations(range(n), size):
            cols = list(cols)
            if size == 0:
                coef = np.zeros(0)
                res = float(np.linalg.norm(y))
            else:
                coef = np.linalg.lstsq(phi[:, cols], y, rcond=None)[0]
                res = float(np.linalg.norm(y - phi[:, cols] @ coef))
            if res < best[0]:
                x = np.zeros(n)
                x[cols] = coef
                best = (res, x, size)
            if res <= tol:
                x = np.zeros(n)
                x[cols] = coef
                return _finalize(phi, y, x, iterations=size, converged=True)
    return _finalize(phi, y, best[1], iterations=k_max, converged=False)


def omp(phi, y, epsilon=0.0, max_iter=None):
    """Orthogonal matching pursuit: greedily select the column most correlated
    with the residual, least-squares refit on the accumulated support, update
    the residual by projection.

    Stops when the residual 2-norm falls to epsilon (a residual below the
    global zero tolerance relative to ||y|| always counts as zero) or after
    max_iter selections; never runs more than n iterations. Columns are
    unit-normalized internally; ties in the correlation go to the lowest index.
    """
    phi = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    if max_iter is not None and max_iter <= 0:
        raise ValueError("omp: max_iter must be positive")
    a, colnorm = _normalized(phi)
    m, n = a.shape
    cap = n if max_iter is None else min(max_iter, n)
    floor = max(epsilon, REL_ZERO_TOL * np.linalg.norm(y))

    sup = []
    coef = np.zeros(0)
    r = y.copy()
    it = 0
    while it < cap and np.linalg.norm(r) > floor:
        corr = np.abs(a.T @ r)
        corr[sup] = -1.0
        i = int(np.argmax(corr))
        if corr[i] <= zero_threshold(a.T @ r):
            break  # residual orthogonal to every remaining column
        sup.append(i)
        coef = np.linalg.lstsq(a[:, sup], y, rcond=None)[0]
        r = y - a[:, sup] @ coef
        it += 1

    x = np.zeros(n)
    if sup:
        x[sup] = coef / colnorm[sup]
    converged = np.linalg.norm(r) <= floor
    return _finalize(phi, y, x, iterations=it, converged=converged)


def cosamp(phi, y, k, max_iter=50, residual_eps=1e-10, proxy_eps=None):
    """Compressive sampling matching pursuit.

    Per iteration: signal proxy u = Phi^T z, merge the supports of the 2k
    largest proxy entries with the previous estimate, least-squares on the
    merged support, prune to the k largest, update the sample z = y - Phi x.

    Halting combines three modes: a fixed iteration budget, early exit on
    ||z||_2 <= residual_eps, and optionally ||u||_inf <= proxy_eps.
    """
    phi = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    m, n = phi.shape
    if k <= 0:
        raise ValueError("cosamp: k must be positive")
    if 2 * k > n:
        raise ValueError("cosamp: need 2k <= n (k=%d, n=%d)" % (k, n))

    x = np.zeros(n)
    z = y.copy()
    it = 0
    converged = np.linalg.norm(z) <= residual_eps
    while it < max_iter and not converged:
        it += 1
        u = phi.T @ z
        if proxy_eps is not None and np.max(np.abs(u)) <= proxy_eps:
            converged = True
            break
        omega = np.argsort(-np.abs(u), kind="stable")[: 2 * k]
        merged = np.union1d(omega, np.flatnonzero(x))
        b = np.linalg.lstsq(phi[:, merged], y, rcond=None)[0]
        full = np.zeros(n)
        full[merged] = b
        keep = np.argsort(-np.abs(full), kind="stable")[:k]
        x = np.zeros(n)
        x[keep] = full[keep]
        z = y - phi @ x
        if np.linalg.norm(z) <= residual_eps:
            converged = True
    return _finalize(phi, y, x, iterations=it, converged=converged)


def _spectral_norm_sq(phi, iters=100):
    """||Phi^T Phi||_2 by deterministic power iteration."""
    n = phi.shape[1]
    v = np.ones(n) / np.sqrt(n)
    est = 0.0
    for _ in range(iters):
        w = phi.T @ (phi @ v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def ista_lasso(phi, y, lam, max_iter=1000, tol=1e-8):
    """Iterative soft-thresholding for min 0.5||y - Phi x||_2^2 + lam ||x||_1.

    Step size is 1 over the power-iteration estimate of ||Phi^T Phi||_2 (with
    a small safety factor), which keeps the objective nonincreasing. Converged
    means the iterate moved less than tol in 2-norm.
    """
    phi = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    if lam <= 0:
        raise ValueError("ista_lasso: lambda must be positive")
    n = phi.shape[1]
    lip = _spectral_norm_sq(phi) * (1.0 + 1e-9)
    if lip == 0.0:
        return _finalize(phi, y, np.zeros(n), 0, True, trace=[])
    step = 1.0 / lip

    x = np.zeros(n)
    r = y.copy()
    trace = []
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        trace.append(0.5 * float(r @ r) + lam * float(np.sum(np.abs(x))))
        grad = phi.T @ r
        x_new = x + step * grad
        x_new = np.sign(x_new) * np.maximum(np.abs(x_new) - step * lam, 0.0)
        delta = float(np.linalg.norm(x_new - x))
        x = x_new
        r = y - phi @ x
        if delta < tol:
            converged = True
            break
    trace.append(0.5 * float(r @ r) + lam * float(np.sum(np.abs(x))))
    return _finalize(phi, y, x, iterations=it, converged=converged, trace=trace)


def _joint_scores(a, R, sup, subspace):
    """Per-index selection score for simultaneous greedy pursuit.

    Plain mode sums |a_i^T r_col| over measurement columns. Subspace mode
    correlates each column (projected off the selected span and renormalized)
    with an orthonormal basis of the residual column space, which is what
    makes the rank-k ensemble recoverable at m = k+1 measurements.
    """
    n = a.shape[1]
    if not subspace:
        score = np.sum(np.abs(a.T @ R), axis=1)
    else:
        u, sv, _ = np.linalg.svd(R, full_matrices=False)
        rank = max(1, int(np.sum(sv > REL_ZERO_TOL * max(sv[0], 1e-300))))
        basis = u[:, :rank]
        if sup:
            q, _ = np.linalg.qr(a[:, sup])
            proj = a - q @ (q.T @ a)
        else:
            proj = a
        norms = np.linalg.norm(proj, axis=0)
        usable = norms > 1e-10
        score = np.zeros(n)
        score[usable] = np.linalg.norm(basis.T @ proj[:, usable], axis=0) / norms[usable]
    score[sup] = -1.0
    return score


def somp(phi, Y, k, selection="auto"):
    """Simultaneous OMP for jointly sparse columns: greedy shared-index
    selection followed by a joint least-squares refit of every column on the
    shared support.

    selection: "plain" sums correlation magnitudes across columns, "subspace"
    uses rank-aware order-recursive scoring, "auto" (default) picks plain for
    a single column (exactly OMP) and subspace otherwise.
    """
    phi = as_matrix(phi)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if k <= 0:
        raise ValueError("somp: k must be positive")
    if Y.shape[1] < 1:
        raise ValueError("somp: need at least one measurement column")
    if selection == "auto":
        selection = "plain" if Y.shape[1] == 1 else "subspace"
    if selection not in ("plain", "subspace"):
        raise ValueError("somp: unknown selection %r" % selection)
    a, colnorm = _normalized(phi)
    m, n = a.shape

    sup = []
    R = Y.copy()
    coef = np.zeros((0, Y.shape[1]))
    floor = REL_ZERO_TOL * np.linalg.norm(Y)
    it = 0
    while it < min(k, n) and np.linalg.norm(R) > floor:
        score = _joint_scores(a, R, sup, subspace=(selection == "subspace"))
        i = int(np.argmax(score))
        if score[i] <= 0:
            break
        sup.append(i)
        coef = np.linalg.lstsq(a[:, sup], Y, rcond=None)[0]
        R = Y - a[:, sup] @ coef
        it += 1

    X = np.zeros((n, Y.shape[1]))
    if sup:
        X[sup, :] = coef / colnorm[sup, None]
    thr = zero_threshold(X)
    common = np.array(sorted(sup), dtype=int)
    common = common[np.max(np.abs(X[common, :]), axis=1) > thr] if common.size else common
    est = np.zeros_like(X)
    est[common, :] = X[common, :]
    res = np.linalg.norm(Y - phi @ est, axis=0)
    return MmvResult(
        estimate=est, common_support=common, iterations=it, residual_norms=res
    )


def coordinate_descent_lasso(phi, y, lam, sweeps=2000, tol=1e-12):
    """Cyclic coordinate descent on the same lasso objective; kept as an
    independent cross-check for the proximal solver."""
    phi = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    n = phi.shape[1]
    sq = np.sum(phi * phi, axis=0)
    x = np.zeros(n)
    r = y.copy()
    for _ in range(sweeps):
        biggest = 0.0
        for i in range(n):
            if sq[i] == 0:
                continue
            old = x[i]
            rho = phi[:, i] @ r + sq[i] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / sq[i]
            if new != old:
                r += phi[:, i] * (old - new)
                x[i] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return x


def lasso_objective(phi, y, x, lam):
    phi = as_matrix(phi)
    r = np.asarray(y, dtype=float).ravel() - phi @ x
    return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(x)))
