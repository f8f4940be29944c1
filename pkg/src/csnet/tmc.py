"""Traffic-matrix interpolation: synthetic diurnal generators, truncated-SVD
utilities, regularized low-rank factorization with temporal-difference and
row-similarity constraints, constraint scaling, and the local-interpolation
hybrid."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import REL_ZERO_TOL


@dataclass
class TrafficSeries:
    """Nonnegative flow-by-time volume matrix with a 0/1 observation mask and
    an optional link routing matrix (link loads = routing @ X)."""

    X: np.ndarray  # n_flows x m_times
    mask: np.ndarray
    routing: np.ndarray | None = None
    rank_input: int = 8

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.mask = np.asarray(self.mask, dtype=float)
        if self.X.shape != self.mask.shape:
            raise ValueError("TrafficSeries: data and mask shapes differ")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ValueError("TrafficSeries: mask entries must be 0 or 1")
        observed = self.X[self.mask == 1]
        if observed.size and (not np.isfinite(observed).all() or (observed < 0).any()):
            raise ValueError("TrafficSeries: observed entries must be finite and >= 0")

    @property
    def n_flows(self):
        return self.X.shape[0]

    @property
    def m_times(self):
        return self.X.shape[1]

    @property
    def observed(self):
        return self.X * self.mask


@dataclass
class Factorization:
    L: np.ndarray  # n_flows x r
    R: np.ndarray  # m_times x r
    objective_trace: list = field(default_factory=list)

    def full(self):
        return self.L @ self.R.T


# ---------------------------------------------------------------------------
# generators and SVD utilities


def synth_tm(n_flows, m_times, rank, diurnal_period, noise, seed):
    """Synthetic nonnegative traffic matrix: low-rank with sinusoidal daily
    cycles in the time factors plus smooth random components; elementwise
    noise is added and the result clipped at zero."""
    if rank > min(n_flows, m_times):
        raise ValueError("synth_tm: rank exceeds matrix dimensions")
    rng = np.random.default_rng(seed)
    t = np.arange(m_times)
    R0 = np.empty((m_times, rank))
    for c in range(rank):
        phase = rng.uniform(0, 2 * np.pi)
        if c < 2:
            R0[:, c] = 1.0 + 0.8 * np.sin(2 * np.pi * t / diurnal_period + phase)
        else:
            # slow random drift, kept positive
            freq = rng.uniform(0.5, 2.0) / m_times
            R0[:, c] = 1.0 + 0.6 * np.sin(2 * np.pi * freq * t + phase)
    L0 = rng.uniform(0.2, 2.0, size=(n_flows, rank))
    X = L0 @ R0.T
    if noise:
        X = X + noise * rng.standard_normal(X.shape) * X.mean()
    return np.clip(X, 0.0, None)


def rank_r_approx(X, r):
    """Best rank-r approximation in Frobenius norm (truncated SVD)."""
    u, sv, vt = np.linalg.svd(np.asarray(X, float), full_matrices=False)
    return (u[:, :r] * sv[:r]) @ vt[:r, :]


def svd_factors(X, r):
    """Balanced factor pair (L, R) with L R^T the best rank-r approximation."""
    u, sv, vt = np.linalg.svd(np.asarray(X, float), full_matrices=False)
    root = np.sqrt(sv[:r])
    return u[:, :r] * root, vt[:r, :].T * root


def nmae(X_true, X_est, mask_missing):
    """Normalized mean absolute error over the missing entries only:
    sum |est - true| / sum |true|."""
    mask_missing = np.asarray(mask_missing, dtype=bool)
    if not mask_missing.any():
        raise ValueError("nmae: empty missing set")
    truth = np.asarray(X_true, float)[mask_missing]
    est = np.asarray(X_est, float)[mask_missing]
    denom = float(np.sum(np.abs(truth)))
    if denom == 0:
        raise ValueError("nmae: all-zero truth on the missing set")
    return float(np.sum(np.abs(est - truth)) / denom)


# ---------------------------------------------------------------------------
# constraint matrices


def temporal_T(m):
    """Adjacent-difference Toeplitz matrix: 1 on the diagonal, -1 on the
    first superdiagonal. X @ T.T differences neighboring time columns (the
    last column passes through unchanged)."""
    if m < 2:
        raise ValueError("temporal_T: need m >= 2")
    return np.eye(m) - np.eye(m, k=1)


def baseline_interpolate(series, als_iters=30, ridge=1e-3):
    """Simple completion used to seed the spatial constraint: a rank-r fit of
    the observed entries (factors initialized from a row/column-mean filled
    matrix) pasted together with the direct measurements where present."""
    M = series.mask
    D = series.X
    if M.sum() == 0:
        raise ValueError("baseline_interpolate: empty mask")
    filled = _mean_fill(D, M)
    r = min(series.rank_input, min(filled.shape))
    L, R = svd_factors(filled, r)
    fac = srmf(series, r, ridge, max_iter=als_iters, init=(L, R))
    X_base = fac.full()
    return X_base * (1.0 - M) + D * M


def _mean_fill(D, M):
    obs = D * M
    total = obs.sum()
    grand = total / max(M.sum(), 1.0)
    row_cnt = M.sum(axis=1)
    col_cnt = M.sum(axis=0)
    row_mean = np.where(row_cnt > 0, obs.sum(axis=1) / np.maximum(row_cnt, 1), grand)
    col_mean = np.where(col_cnt > 0, obs.sum(axis=0) / np.maximum(col_cnt, 1), grand)
    fill = 0.5 * (row_mean[:, None] + col_mean[None, :])
    return np.where(M == 1, D, fill)


def spatial_S(X_hat, K):
    """Row-similarity differencing operator: for each row, regress it onto its
    K nearest rows (Euclidean distance) and store 1 on the diagonal and the
    negated regression weights on the neighbor columns."""
    X_hat = np.asarray(X_hat, dtype=float)
    n = X_hat.shape[0]
    if K <= 0:
        raise ValueError("spatial_S: K must be positive")
    if K >= n:
        raise ValueError("spatial_S: K must be smaller than the number of rows")
    S = np.eye(n)
    d2 = ((X_hat[:, None, :] - X_hat[None, :, :]) ** 2).sum(axis=2)
    for i in range(n):
        order = np.argsort(d2[i], kind="stable")
        neighbors = [j for j in order if j != i][:K]
        A = X_hat[neighbors, :].T
        w = np.linalg.lstsq(A, X_hat[i], rcond=None)[0]
        S[i, neighbors] = -w
    return S


def scale_constraints(S, T, X_hat, B, lam):
    """Rescale the constraint matrices so their penalty terms sit at the
    tolerated approximation level: ||S' X|| = 0.1 sqrt(lam) ||B|| and
    ||X T'^T|| = sqrt(lam) ||B||. The spatial term lands a factor 10 below
    the temporal one, which rests on firmer ground."""
    S = np.asarray(S, float)
    T = np.asarray(T, float)
    bn = float(np.linalg.norm(B))
    sn = float(np.linalg.norm(S @ X_hat))
    tn = float(np.linalg.norm(X_hat @ T.T))
    root = np.sqrt(lam)
    if sn <= REL_ZERO_TOL * max(bn, 1.0):
        warnings.warn("scale_constraints: ||S X|| is zero; leaving S unscaled")
        S_out = S
    else:
        S_out = S * (0.1 * root * bn / sn)
    if tn <= REL_ZERO_TOL * max(bn, 1.0):
        warnings.warn("scale_constraints: ||X T^T|| is zero; leaving T unscaled")
        T_out = T
    else:
        T_out = T * (root * bn / tn)
    return S_out, T_out


# ---------------------------------------------------------------------------
# regularized factorization


def _objective(series, L, R, lam, S, T):
    X = L @ R.T
    if series.routing is not None:
        data = np.linalg.norm(series.routing @ X - series.routing @ series.X) ** 2
    else:
        data = np.linalg.norm(series.mask * (X - series.X)) ** 2
    obj = data + lam * (np.linalg.norm(L) ** 2 + np.linalg.norm(R) ** 2)
    if S is not None:
        obj += np.linalg.norm(S @ X) ** 2
    if T is not None:
        obj += np.linalg.norm(X @ T.T) ** 2
    return float(obj)


def _solve_factor_rows(h_blocks, rhs, n, r):
    """Solve the (n*r) x (n*r) normal equations assembled as r x r blocks of
    n x n matrices; vec ordering is column-major (rows of the factor vary
    fastest)."""
    H = np.zeros((n * r, n * r))
    for c in range(r):
        for d in range(r):
            H[c * n : (c + 1) * n, d * n : (d + 1) * n] = h_blocks(c, d)
    sol = np.linalg.solve(H, rhs.reshape(-1, order="F"))
    return sol.reshape(n, r, order="F")


def srmf(series, r, lam, S=None, T=None, max_iter=50, tol=1e-8, seed=0, init=None):
    """Regularized low-rank completion by alternating exact least squares.

    Minimizes the observed-data misfit plus lam * (||L||^2 + ||R||^2) plus the
    squared norms of S (L R^T) and (L R^T) T^T when those constraint matrices
    are given. With S = T = None this is the plain sparsity-regularized SVD
    fit. Each half-step solves its normal equations exactly, so the recorded
    objective trace never increases. Stops when the relative objective change
    drops below tol.
    """
    if r < 1:
        raise ValueError("srmf: rank must be >= 1")
    n, m = series.X.shape
    if init is not None:
        L, R = (np.array(f, dtype=float, copy=True) for f in init)
    else:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(max(series.observed.sum() / max(series.mask.sum(), 1.0), 1e-6) / r)
        L = rng.standard_normal((n, r)) * scale
        R = rng.standard_normal((m, r)) * scale
    A = series.routing
    M = series.mask
    B = (A @ series.X) if A is not None else series.observed
    StS = None if S is None else np.asarray(S, float).T @ np.asarray(S, float)
    TtT = None if T is None else np.asarray(T, float).T @ np.asarray(T, float)
    AtA = None if A is None else A.T @ A
    AtB = None if A is None else A.T @ B
    eye_n = np.eye(n)
    eye_m = np.eye(m)

    trace = [_objective(series, L, R, lam, S, T)]
    for _ in range(max_iter):
        # L-step
        RtR = R.T @ R
        TR = None if T is None else np.asarray(T, float) @ R
        TRtTR = None if TR is None else TR.T @ TR

        def l_blocks(c, d, RtR=RtR, TRtTR=TRtTR):
            if A is not None:
                blk = RtR[c, d] * AtA
            else:
                blk = np.diag(M @ (R[:, c] * R[:, d]))
            if StS is not None:
                blk = blk + RtR[c, d] * StS
            if TRtTR is not None:
                blk = blk + TRtTR[c, d] * eye_n
            if c == d:
                blk = blk + lam * eye_n
            return blk

        rhs = (AtB @ R) if A is not None else (B @ R)
        L = _solve_factor_rows(l_blocks, rhs, n, r)

        # R-step
        LtL = L.T @ L
        W = None if S is None else np.asarray(S, float) @ L
        WtW = None if W is None else W.T @ W
        AL = None if A is None else A @ L
        ALtAL = None if AL is None else AL.T @ AL

        def r_blocks(c, d, LtL=LtL, WtW=WtW, ALtAL=ALtAL):
            if A is not None:
                blk = ALtAL[c, d] * eye_m
            else:
                blk = np.diag(M.T @ (L[:, c] * L[:, d]))
            if WtW is not None:
                blk = blk + WtW[c, d] * eye_m
            if TtT is not None:
                blk = blk + LtL[c, d] * TtT
            if c == d:
                blk = blk + lam * eye_m
            return blk

        rhs = (B.T @ AL) if A is not None else (B.T @ L)
        R = _solve_factor_rows(r_blocks, rhs, m, r)

        trace.append(_objective(series, L, R, lam, S, T))
        if abs(trace[-2] - trace[-1]) <= tol * max(abs(trace[-2]), 1.0):
            break
    else:
        if max_iter > 0 and abs(trace[-2] - trace[-1]) > tol * max(abs(trace[-2]), 1.0):
            warnings.warn("srmf: objective still moving at max_iter; trace attached")
    return Factorization(L=L, R=R, objective_trace=trace)


def srmf_knn(series, factorization, window=3):
    """Hybrid fill-in: a missing entry with any observed entry within `window`
    steps on its own row is patched from the nearest such neighbor (two-sided
    ties averaged); entries in fully missing windows take the factorization
    value. Observed entries pass through."""
    X_global = factorization.full() if isinstance(factorization, Factorization) else np.asarray(factorization)
    D = series.X
    M = series.mask
    n, m = D.shape
    out = np.where(M == 1, D, X_global)
    for i in range(n):
        missing = np.flatnonzero(M[i] == 0)
        observed = np.flatnonzero(M[i] == 1)
        if observed.size == 0 or missing.size == 0:
            continue
        for j in missing:
            lo = np.searchsorted(observed, j - window, side="left")
            hi = np.searchsorted(observed, j + window, side="right")
            nearby = observed[lo:hi]
            if nearby.size == 0:
                continue
            dist = np.abs(nearby - j)
            best = dist.min()
            out[i, j] = float(D[i, nearby[dist == best]].mean())
    return out
