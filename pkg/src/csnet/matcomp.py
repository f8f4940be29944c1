"""Low-rank matrix completion: sampling masks, the singular-vector spikiness
diagnostic, and fixed-point continuation with singular-value shrinkage."""

from dataclasses import dataclass

import numpy as np

from .core import REL_ZERO_TOL, GenerationError


@dataclass
class MaskedMatrix:
    """Partially observed matrix: data where mask==1 is trusted, the rest is
    unknown. Every row and every column must contain at least one sample."""

    data: np.ndarray
    mask: np.ndarray
    noise_bound: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.mask = np.asarray(self.mask, dtype=float)
        if self.data.shape != self.mask.shape:
            raise ValueError("MaskedMatrix: data and mask shapes differ")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ValueError("MaskedMatrix: mask entries must be 0 or 1")
        if self.noise_bound < 0:
            raise ValueError("MaskedMatrix: noise_bound must be >= 0")
        if (self.mask.sum(axis=1) == 0).any() or (self.mask.sum(axis=0) == 0).any():
            raise ValueError("MaskedMatrix: every row and column needs a sample")

    @property
    def observed(self):
        return self.data * self.mask


def sample_mask(n1, n2, m_samples, seed, max_tries=200_000):
    """Uniform random 0/1 mask with exactly m_samples ones, resampled until
    every row and column is hit. m_samples must be at least max(n1, n2) for
    coverage to be possible."""
    if m_samples < max(n1, n2):
        raise ValueError(
            "sample_mask: m_samples=%d cannot cover %d rows and %d columns"
            % (m_samples, n1, n2)
        )
    if m_samples > n1 * n2:
        raise ValueError("sample_mask: m_samples exceeds the number of entries")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        flat = rng.choice(n1 * n2, size=m_samples, replace=False)
        mask = np.zeros((n1, n2))
        mask.flat[flat] = 1.0
        if (mask.sum(axis=1) > 0).all() and (mask.sum(axis=0) > 0).all():
            return mask
    raise GenerationError(
        "sample_mask: no covering mask found in %d tries" % max_tries
    )


def incoherence_mu_b(M):
    """Smallest mu_B >= 1 such that every singular vector u_k, v_k satisfies
    ||u_k||_inf <= sqrt(mu_B/n1) and ||v_k||_inf <= sqrt(mu_B/n2); flat
    singular vectors give 1, spiky ones approach max(n1, n2)."""
    M = np.asarray(M, dtype=float)
    n1, n2 = M.shape
    u, sv, vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(sv > REL_ZERO_TOL * sv[0])) if sv[0] > 0 else 0
    if rank == 0:
        raise ValueError("incoherence_mu_b: zero matrix")
    u_inf = np.max(np.abs(u[:, :rank]), axis=0)
    v_inf = np.max(np.abs(vt[:rank, :]), axis=1)
    return float(max(n1 * np.max(u_inf**2), n2 * np.max(v_inf**2)))


def _svt(X, level):
    """Singular-value soft thresholding."""
    u, sv, vt = np.linalg.svd(X, full_matrices=False)
    sv = np.maximum(sv - level, 0.0)
    return (u * sv) @ vt


def fpc_objective(X, obs, lam):
    diff = obs.mask * (X - obs.data)
    nuc = float(np.sum(np.linalg.svd(X, compute_uv=False)))
    return 0.5 * float(np.sum(diff * diff)) + lam * nuc


def fpc_complete(obs, lam, max_iter=300, tol=1e-7, continuation=True, return_trace=False):
    """Nuclear-norm regularized completion by fixed-point iteration: gradient
    step on the sampled residual (unit step; the sampling operator is a
    coordinate projection) followed by singular-value shrinkage.

    With continuation the shrinkage level starts at the spectral norm of the
    observed matrix and decays by 0.7 per stage down to lam; max_iter bounds
    each stage. The optional trace records (stage_lambda, objective) pairs;
    within a stage the objective is nonincreasing.
    """
    if lam <= 0:
        raise ValueError("fpc_complete: lambda must be positive")
    Y = obs.observed
    X = np.zeros_like(Y)
    levels = [lam]
    if continuation:
        top = float(np.linalg.norm(Y, 2))
        levels = []
        cur = top
        while cur > lam:
            levels.append(cur)
            cur *= 0.7
        levels.append(lam)
        if not levels:
            levels = [lam]
    trace = []
    for level in levels:
        for _ in range(max_iter):
            trace.append((level, fpc_objective(X, obs, level)))
            X_new = _svt(X - obs.mask * (X - Y), level)
            moved = float(np.linalg.norm(X_new - X))
            X = X_new
            if moved < tol:
                break
        trace.append((level, fpc_objective(X, obs, level)))
    if return_trace:
        return X, trace
    return X
