"""Physical- and MAC-layer scenario generators and recoveries: random
demodulation on a Nyquist grid, digital spectrum sensing with cooperative
consensus, shift-dictionary echo detection, virtual-channel estimation,
erasure coding by random projection, and on-off random-access detection."""

from dataclasses import dataclass

import numpy as np

from .core import (
    SensingMatrix,
    as_matrix,
    gen_sensing_matrix,
    make_basis,
    shift_dictionary,
    signal_from_coefficients,
    support_of,
)
from . import solvers


# ---------------------------------------------------------------------------
# random demodulation (chip sequence -> filter -> low-rate sampler)


@dataclass
class AicConfig:
    """Discretized random-demodulator front end on an n-point Nyquist grid."""

    n: int
    m: int
    chips: np.ndarray  # +-1 sequence, length n
    filter: np.ndarray  # impulse response of the analog filter
    delta: int  # decimation factor: output i samples the filtered chain at i*delta

    def __post_init__(self):
        self.chips = np.asarray(self.chips, dtype=float).ravel()
        self.filter = np.asarray(self.filter, dtype=float).ravel()
        if self.chips.size != self.n:
            raise ValueError("AicConfig: chips must have length n")
        if not np.isin(self.chips, (-1.0, 1.0)).all():
            raise ValueError("AicConfig: chips must be +-1")
        if self.m * self.delta > self.n:
            raise ValueError("AicConfig: need m * delta <= n")


def make_aic_config(n, m, seed, filter_taps=None):
    """Random +-1 chips with an integrate-and-dump (boxcar) filter of length
    delta = n // m unless explicit taps are given."""
    delta = n // m
    if delta < 1:
        raise ValueError("make_aic_config: m exceeds the grid length")
    rng = np.random.default_rng(seed)
    chips = rng.choice([-1.0, 1.0], size=n)
    if filter_taps is None:
        filter_taps = np.ones(delta)
    return AicConfig(n=n, m=m, chips=chips, filter=filter_taps, delta=delta)


def aic_matrix(config, basis):
    """Equivalent measurement matrix of the demodulator chain:
    Phi[i, j] = sum_tau basis[tau, j] * chips[tau] * h[i*delta - tau]."""
    psi = as_matrix(basis)
    n = config.n
    if psi.shape[0] != n:
        raise ValueError("aic_matrix: basis rows must match the grid length")
    h = config.filter
    if h.size > n:
        raise ValueError("aic_matrix: filter longer than the grid")
    w = np.zeros((config.m, n))
    for i in range(config.m):
        t = i * config.delta
        lo = max(0, t - h.size + 1)
        taus = np.arange(lo, t + 1)
        w[i, taus] = config.chips[taus] * h[t - taus]
    return SensingMatrix(entries=w @ psi, recipe="custom", seed=0)


def aic_pipeline(config, x):
    """Direct time-domain simulation of the demodulator (modulate, filter,
    decimate); kept separate from aic_matrix as an independent cross-check."""
    x = np.asarray(x, dtype=float).ravel()
    chained = np.convolve(x * config.chips, config.filter)
    return chained[np.arange(config.m) * config.delta]


def aic_recover(config, y, basis, solver_params=None):
    """Recover the basis-domain coefficients from low-rate demodulator output
    and reconstruct the signal."""
    params = dict(solver_params or {})
    phi = aic_matrix(config, basis)
    method = params.pop("method", "omp")
    if method == "omp":
        res = solvers.omp(phi, y, **params)
    elif method == "ista":
        res = solvers.ista_lasso(phi, y, **params)
    else:
        raise ValueError("aic_recover: unknown method %r" % method)
    return signal_from_coefficients(res.estimate, basis)


# ---------------------------------------------------------------------------
# spectrum sensing


def spectrum_sense(x_nyquist, subsample_ratio, seed, solver_params=None, n_bands=32):
    """Occupied-band detection from randomly subsampled time-domain samples.

    The signal is modeled sparse in the real Fourier basis; the coefficient
    axis is split into n_bands contiguous bands and a band counts as occupied
    when its largest coefficient magnitude exceeds 3x the median magnitude.
    Full sampling (ratio 1) solves the square system directly.
    """
    x = np.asarray(x_nyquist, dtype=float).ravel()
    n = x.size
    if not 0 < subsample_ratio <= 1:
        raise ValueError("spectrum_sense: ratio must be in (0, 1]")
    if n % n_bands:
        raise ValueError("spectrum_sense: n_bands must divide the grid length")
    basis = make_basis("dft_real", n)
    m = int(round(subsample_ratio * n))
    if m >= n:
        coef = basis.entries.T @ x
    else:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n, size=m, replace=False))
        a = basis.entries[rows, :]
        params = dict(solver_params or {})
        lam = params.pop("lam", None)
        if lam is None:
            lam = 0.01 * float(np.max(np.abs(a.T @ x[rows])))
        res = solvers.ista_lasso(
            a,
            x[rows],
            lam,
            max_iter=params.pop("max_iter", 2000),
            tol=params.pop("tol", 1e-10),
        )
        coef = res.estimate
    return occupancy_from_coefficients(coef, n_bands)


def occupancy_from_coefficients(coef, n_bands):
    """Threshold coefficients at 3x the median magnitude and report which
    contiguous coefficient bands contain a survivor."""
    coef = np.asarray(coef, dtype=float)
    mags = np.abs(coef)
    thr = 3.0 * float(np.median(mags))
    width = coef.size // n_bands
    band_peaks = mags.reshape(n_bands, width).max(axis=1)
    return band_peaks > thr


# ---------------------------------------------------------------------------
# cooperative consensus


def metropolis_weights(adjacency):
    """Symmetric doubly stochastic weights w_jk = 1/(1 + max(deg_j, deg_k))."""
    adj = np.asarray(adjacency, dtype=float)
    if adj.shape[0] != adj.shape[1] or not np.allclose(adj, adj.T):
        raise ValueError("metropolis_weights: adjacency must be square symmetric")
    deg = adj.sum(axis=1)
    n = adj.shape[0]
    w = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            if j != k and adj[j, k]:
                w[j, k] = 1.0 / (1.0 + max(deg[j], deg[k]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def is_connected(adjacency):
    adj = np.asarray(adjacency) != 0
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        j = stack.pop()
        for k in np.flatnonzero(adj[j]):
            if not seen[k]:
                seen[k] = True
                stack.append(int(k))
    return bool(seen.all())


def consensus_run(U0, adjacency, iters):
    """Average-consensus iteration u_j += sum_k w_jk (u_k - u_j) with
    Metropolis weights; every row converges to the column mean on connected
    graphs. Returns the state after iters rounds."""
    U = np.atleast_2d(np.asarray(U0, dtype=float)).copy()
    if not is_connected(adjacency):
        raise ValueError("consensus_run: graph is disconnected")
    w = metropolis_weights(adjacency)
    for _ in range(iters):
        U = w @ U
    return U


# ---------------------------------------------------------------------------
# echo detection with a shift dictionary


def uwb_detect(s_pulse, received, k, solver_params=None):
    """Detect echo delays and amplitudes: build the circular-shift dictionary
    of the pulse, compress with a seeded gaussian matrix, and run greedy
    pursuit for the k strongest echoes. Returns (delays, amplitudes)."""
    if k <= 0:
        raise ValueError("uwb_detect: k must be positive")
    received = np.asarray(received, dtype=float).ravel()
    n = received.size
    params = dict(solver_params or {})
    m = params.pop("m", max(1, n // 10))
    seed = params.pop("seed", 0)
    pulse = np.asarray(s_pulse, dtype=float).ravel()
    dictionary = shift_dictionary(pulse, n)
    phi = gen_sensing_matrix("gaussian", m, n, seed)
    y = phi.entries @ received
    a = phi.entries @ dictionary.entries
    res = solvers.omp(a, y, max_iter=k, epsilon=params.pop("epsilon", 0.0))
    delays = res.support
    amplitudes = res.estimate[delays] / np.linalg.norm(pulse)
    order = np.argsort(delays)
    return delays[order], amplitudes[order]


def make_echo_signal(pulse, n, delays, amplitudes):
    """Superpose circular shifts of the pulse (scenario generator)."""
    padded = np.zeros(n)
    pulse = np.asarray(pulse, dtype=float).ravel()
    padded[: pulse.size] = pulse
    x = np.zeros(n)
    for d, a in zip(delays, amplitudes):
        x += a * np.roll(padded, int(d))
    return x


def gaussian_monocycle(width, length):
    """First derivative of a gaussian; the classic impulse-radio pulse."""
    t = np.arange(length) - length / 2.0
    p = -t * np.exp(-(t**2) / (2.0 * width**2))
    return p / np.max(np.abs(p))


# ---------------------------------------------------------------------------
# virtual multi-antenna channel


def _virtual_size(dims):
    n_rx, n_tx, n_delay, m_dop = dims
    return n_rx * n_tx * n_delay * (2 * m_dop + 1)


@dataclass
class VirtualChannel:
    """Sparse channel on the virtual angle/delay/Doppler grid; dims are
    (resolvable AoAs, AoDs, delays, one-sided Doppler extent)."""

    dims: tuple
    h_v: np.ndarray

    def __post_init__(self):
        self.h_v = np.asarray(self.h_v, dtype=float).ravel()
        if self.h_v.size != self.size:
            raise ValueError(
                "VirtualChannel: expected %d coefficients, got %d"
                % (self.size, self.h_v.size)
            )

    @property
    def size(self):
        return _virtual_size(self.dims)

    @property
    def d(self):
        return int(support_of(self.h_v).size)


def random_virtual_channel(dims, d, seed):
    """Plant d dominant paths directly on the virtual grid."""
    rng = np.random.default_rng(seed)
    h = np.zeros(_virtual_size(dims))
    idx = rng.choice(h.size, size=d, replace=False)
    h[idx] = rng.uniform(1.0, 2.0, size=d) * rng.choice([-1.0, 1.0], size=d)
    return VirtualChannel(dims=dims, h_v=h)


def channel_from_physical_paths(dims, paths):
    """Bin continuous physical paths onto the virtual grid.

    Each path is (gain, aoa, aod, delay, doppler) with aoa/aod in [-1/2, 1/2),
    delay in [0, 1), doppler in [-1/2, 1/2); gains landing in the same bin add.
    """
    n_rx, n_tx, n_delay, m_dop = dims
    h = np.zeros(_virtual_size(dims))
    dop_bins = 2 * m_dop + 1
    for gain, aoa, aod, delay, doppler in paths:
        i = min(int((aoa + 0.5) * n_rx), n_rx - 1)
        k = min(int((aod + 0.5) * n_tx), n_tx - 1)
        l = min(int(delay * n_delay), n_delay - 1)
        m_idx = min(int((doppler + 0.5) * dop_bins), dop_bins - 1)
        flat = ((i * n_tx + k) * n_delay + l) * dop_bins + m_idx
        h[flat] += gain
    return VirtualChannel(dims=dims, h_v=h)


def mimo_estimate(channel, m_train, seed, solver_params=None):
    """Estimate the virtual channel from m_train random training projections
    of its coefficient vector."""
    D = channel.size
    if not 1 <= m_train <= D:
        raise ValueError("mimo_estimate: need 1 <= m_train <= %d" % D)
    params = dict(solver_params or {})
    phi = gen_sensing_matrix("gaussian", m_train, D, seed)
    y = phi.entries @ channel.h_v
    k = params.pop("k", None)
    res = solvers.omp(phi, y, epsilon=params.pop("epsilon", 0.0), max_iter=k)
    return VirtualChannel(dims=channel.dims, h_v=res.estimate)


# ---------------------------------------------------------------------------
# erasure coding by random projection


@dataclass
class ErasureChannel:
    """Random projections survive or vanish; each measurement carries its
    serial number so the receiver knows which rows remain."""

    l: int
    kept: np.ndarray

    def __post_init__(self):
        self.kept = np.asarray(sorted(set(int(i) for i in self.kept)), dtype=int)
        if self.kept.size and (self.kept.min() < 0 or self.kept.max() >= self.l):
            raise ValueError("ErasureChannel: kept indices outside [0, l)")

    @property
    def e(self):
        return self.l - self.kept.size


def erasure_channel(l, e, seed):
    """Erase e of l measurement slots uniformly at random."""
    if not 0 <= e <= l:
        raise ValueError("erasure_channel: need 0 <= e <= l")
    rng = np.random.default_rng(seed)
    kept = np.sort(rng.choice(l, size=l - e, replace=False))
    return ErasureChannel(l=l, kept=kept)


def erasure_encode(x, psi, l, seed):
    """Encode a signal as l gaussian random projections; returns (y, phi).
    Compression and erasure protection happen in the same projection step."""
    x = np.asarray(x, dtype=float).ravel()
    phi = gen_sensing_matrix("gaussian", l, x.size, seed)
    return phi.entries @ x, phi


def erasure_decode(y_kept, kept, phi, psi=None, solver_params=None):
    """Recover the signal from surviving projections by sparse recovery over
    the surviving rows; psi is the sparsifying basis (identity when None)."""
    kept = np.asarray(kept, dtype=int)
    if kept.size == 0:
        raise ValueError("erasure_decode: no surviving measurements")
    params = dict(solver_params or {})
    a = as_matrix(phi)[kept, :]
    if psi is not None:
        a = a @ as_matrix(psi)
    method = params.pop("method", "omp")
    if method == "omp":
        res = solvers.omp(a, y_kept, **params)
    elif method == "ista":
        res = solvers.ista_lasso(a, y_kept, **params)
    else:
        raise ValueError("erasure_decode: unknown method %r" % method)
    coef = res.estimate
    return coef if psi is None else as_matrix(psi) @ coef


# ---------------------------------------------------------------------------
# on-off random access


def random_access_detect(y, codebook, mu, noise_std=0.0, amp_threshold=None):
    """Detect the active-user set by sparsity-weighted least squares
    (lasso with weight mu on the l1 term) followed by amplitude thresholding.

    The threshold defaults to max(3 * noise_std, a quarter of the largest
    recovered magnitude); pass amp_threshold to override.
    """
    a = as_matrix(codebook)
    res = solvers.ista_lasso(a, y, mu, max_iter=3000, tol=1e-10)
    est = res.estimate
    if amp_threshold is None:
        amp_threshold = max(
            3.0 * noise_std, 0.25 * float(np.max(np.abs(est), initial=0.0))
        )
    active = np.flatnonzero(np.abs(est) > amp_threshold)
    return active, est


def matched_filter_detect(y, codebook, noise_std=0.0, amp_threshold=None):
    """Single-user baseline: correlate each codeword with the raw signal and
    threshold, ignoring interference between users."""
    a = as_matrix(codebook)
    corr = a.T @ y
    if amp_threshold is None:
        amp_threshold = max(
            3.0 * noise_std, 0.25 * float(np.max(np.abs(corr), initial=0.0))
        )
    return np.flatnonzero(np.abs(corr) > amp_threshold), corr
