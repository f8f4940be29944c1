"""Signal and matrix primitives: norms, sparsity metrics, measurement-matrix
generation, orthonormal bases, and recoverability diagnostics."""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

# Global zero tolerance, relative to the largest magnitude involved.
REL_ZERO_TOL = 1e-8

INF = float("inf")


class ResourceLimitError(RuntimeError):
    """Raised when a brute-force computation would exceed its enumeration guard."""


class GenerationError(RuntimeError):
    """Raised when a randomized generator fails within its retry budget."""


def zero_threshold(x):
    """Absolute magnitude below which entries of x count as zero."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return REL_ZERO_TOL * float(np.max(np.abs(x)))


def support_of(x):
    """Indices whose magnitude exceeds the global zero tolerance (sorted)."""
    x = np.asarray(x, dtype=float)
    return np.flatnonzero(np.abs(x) > zero_threshold(x))


# ---------------------------------------------------------------------------
# domain types


@dataclass
class BasisMatrix:
    """Columns form the sparsifying basis; square orthonormal except for
    redundant shift dictionaries."""

    entries: np.ndarray
    kind: str  # identity | dft_real | haar | graph_eigen | shift_dictionary

    @property
    def n(self):
        return self.entries.shape[0]

    def is_orthonormal(self, tol=1e-10):
        b = self.entries
        if b.shape[0] != b.shape[1]:
            return False
        return np.max(np.abs(b.T @ b - np.eye(b.shape[1]))) <= tol


@dataclass
class SensingMatrix:
    """Dense measurement matrix tagged with its generation recipe and seed."""

    entries: np.ndarray
    recipe: str  # gaussian | bernoulli | sparse_random | binary_routing | custom
    seed: int = 0
    s: int | None = None  # row/column sparseness parameter where the recipe uses one

    @property
    def shape(self):
        return self.entries.shape

    def regenerate(self):
        """Rebuild from (recipe, seed, m, n); bit-identical to the original."""
        if self.recipe == "custom":
            raise ValueError("custom matrices carry no generation recipe")
        m, n = self.entries.shape
        return gen_sensing_matrix(self.recipe, m, n, self.seed, s=self.s)


@dataclass
class SparseSignal:
    """A signal vector plus the basis in which it is sparse and its support
    (index set of above-tolerance coefficients in that basis)."""

    values: np.ndarray
    basis: BasisMatrix | None = None  # None means identity
    support: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def sparsity(self):
        return int(self.support.size)


def signal_from_coefficients(coef, basis=None):
    """Build a SparseSignal from basis-domain coefficients."""
    coef = np.asarray(coef, dtype=float)
    values = coef if basis is None else basis.entries @ coef
    return SparseSignal(values=values, basis=basis, support=support_of(coef))


@dataclass
class DiagnosticsResult:
    """Recoverability diagnostics of a sensing matrix."""

    mu: float
    spark: int | None  # None: no dependent subset found within the search cap
    delta_k: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# norms and sparsity metrics


def lp_norm(x, p):
    """l_p norm of a vector; p=0 counts above-tolerance entries, p=inf is the
    max magnitude, otherwise (sum |x_i|^p)^(1/p)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("lp_norm: empty vector")
    if p == 0:
        return float(support_of(x).size)
    if p == INF:
        return float(np.max(np.abs(x)))
    if p < 0:
        raise ValueError("lp_norm: p must be nonnegative or inf, got %r" % (p,))
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def best_k_error(x, k, p):
    """Error of the optimal k-term approximation: keep the k largest-magnitude
    entries, zero the rest, return the l_p norm of what was dropped."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if not 0 <= k <= n:
        raise ValueError("best_k_error: k=%d outside [0, %d]" % (k, n))
    residual = x.copy()
    keep = np.argsort(-np.abs(x), kind="stable")[:k]
    residual[keep] = 0.0
    return lp_norm(residual, p)


def power_law_fit(x):
    """Least-squares fit of the sorted magnitudes to c * i^(-alpha).

    Magnitudes are sorted descending and regressed log-log against rank;
    returns (c, alpha). Zero entries are excluded from the fit.
    """
    mags = np.sort(np.abs(np.asarray(x, dtype=float).ravel()))[::-1]
    mags = mags[mags > zero_threshold(mags)]
    if mags.size == 0:
        raise ValueError("power_law_fit: all-zero input")
    if mags.size < 3:
        raise ValueError("power_law_fit: need at least 3 nonzero entries")
    ranks = np.arange(1, mags.size + 1, dtype=float)
    slope, intercept = np.polyfit(np.log(ranks), np.log(mags), 1)
    return float(np.exp(intercept)), float(-slope)


# ---------------------------------------------------------------------------
# coherence / spark / RIP diagnostics


def _unit_columns(mat):
    mat = np.asarray(mat, dtype=float)
    norms = np.linalg.norm(mat, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return mat / safe


def mutual_coherence(phi, psi, normalize=True):
    """sqrt(n) times the largest |<phi_k, psi_j>| over all column pairs.

    Columns are normalized to unit length first unless normalize=False
    (callers that pre-normalize can skip the extra work).
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape[0] != psi.shape[0]:
        raise ValueError(
            "mutual_coherence: row dimensions differ (%d vs %d)"
            % (phi.shape[0], psi.shape[0])
        )
    if normalize:
        phi, psi = _unit_columns(phi), _unit_columns(psi)
    n = phi.shape[0]
    return float(np.sqrt(n) * np.max(np.abs(phi.T @ psi)))


def matrix_coherence(phi):
    """Largest off-diagonal |<phi_i, phi_j>| over unit-normalized columns.

    This is the single-matrix coherence that lower-bounds the spark via
    spark >= 1 + 1/mu.
    """
    u = _unit_columns(phi)
    gram = np.abs(u.T @ u)
    np.fill_diagonal(gram, 0.0)
    return float(np.max(gram))


def spark_bruteforce(phi, max_cols=None):
    """Smallest number of linearly dependent columns, found by exhausting all
    column subsets of size 1..max_cols.

    Returns None when every tested subset is independent (the search cap was
    reached without finding dependence). Dependence means the smallest
    singular value of the subset falls below the global zero tolerance
    relative to the largest singular value of the whole matrix.
    """
    phi = np.asarray(phi, dtype=float)
    m, n = phi.shape
    if max_cols is None:
        if n > 24:
            raise ResourceLimitError(
                "spark_bruteforce: n=%d needs an explicit max_cols cap" % n
            )
        max_cols = n
    max_cols = min(max_cols, n)
    scale = float(np.linalg.norm(phi, 2))
    tol = REL_ZERO_TOL * scale
    for size in range(1, max_cols + 1):
        if size > m:
            return size  # more columns than rows are always dependent
        for cols in combinations(range(n), size):
            smin = np.linalg.svd(phi[:, cols], compute_uv=False)[-1]
            if smin <= tol:
                return size
    return None


def rip_constant_bruteforce(phi, k):
    """Isometry constant delta_k by exhaustive enumeration of all size-k
    column subsets: max over subsets of max(1 - lambda_min, lambda_max - 1)
    of the subset Gram matrix."""
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[1]
    if not 1 <= k <= n:
        raise ValueError("rip_constant_bruteforce: k=%d outside [1, %d]" % (k, n))
    if math.comb(n, k) > 1_000_000:
        raise ResourceLimitError(
            "rip_constant_bruteforce: C(%d,%d) exceeds the 1e6 enumeration guard"
            % (n, k)
        )
    worst = 0.0
    for cols in combinations(range(n), k):
        sub = phi[:, cols]
        eigs = np.linalg.eigvalsh(sub.T @ sub)
        worst = max(worst, 1.0 - eigs[0], eigs[-1] - 1.0)
    return float(worst)


def diagnose(phi, ks=(), max_cols=None):
    """Convenience bundle: matrix coherence, brute-force spark, delta_k per k."""
    return DiagnosticsResult(
        mu=matrix_coherence(phi),
        spark=spark_bruteforce(phi, max_cols=max_cols),
        delta_k={k: rip_constant_bruteforce(phi, k) for k in ks},
    )


# ---------------------------------------------------------------------------
# measurement-matrix generation


def gen_sensing_matrix(recipe, m, n, seed, s=None):
    """Generate an m-by-n sensing matrix; deterministic in (recipe, seed, m, n, s).

    Recipes:
      gaussian       i.i.d. N(0, 1/m)
      bernoulli      +-1/sqrt(m) each with probability 1/2
      sparse_random  {+1, -1, 0} with probabilities {1/2s, 1/2s, 1 - 1/s}
      binary_routing 0/1 rows with exactly s ones each (random path of s links)
    """
    if m < 1 or n < 1:
        raise ValueError("gen_sensing_matrix: m and n must be >= 1")
    rng = np.random.default_rng(seed)
    if recipe == "gaussian":
        entries = rng.standard_normal((m, n)) / np.sqrt(m)
    elif recipe == "bernoulli":
        entries = (2.0 * rng.integers(0, 2, size=(m, n)) - 1.0) / np.sqrt(m)
    elif recipe == "sparse_random":
        if s is None or s < 1:
            raise ValueError("gen_sensing_matrix: sparse_random needs s >= 1")
        u = rng.random((m, n))
        entries = np.where(u < 0.5 / s, 1.0, np.where(u < 1.0 / s, -1.0, 0.0))
    elif recipe == "binary_routing":
        if s is None or not 1 <= s <= n:
            raise ValueError("gen_sensing_matrix: binary_routing needs 1 <= s <= n")
        entries = np.zeros((m, n))
        for i in range(m):
            entries[i, rng.choice(n, size=s, replace=False)] = 1.0
    else:
        raise ValueError("gen_sensing_matrix: unknown recipe %r" % recipe)
    return SensingMatrix(entries=entries, recipe=recipe, seed=seed, s=s)


def as_matrix(phi):
    """Accept a raw ndarray, SensingMatrix, or BasisMatrix."""
    if isinstance(phi, (SensingMatrix, BasisMatrix)):
        return phi.entries
    return np.asarray(phi, dtype=float)


# ---------------------------------------------------------------------------
# orthonormal bases and dictionaries


def _dft_real(n):
    t = np.arange(n)
    cols = [np.full(n, 1.0 / np.sqrt(n))]
    for k in range(1, (n - 1) // 2 + 1):
        cols.append(np.sqrt(2.0 / n) * np.cos(2 * np.pi * k * t / n))
        cols.append(np.sqrt(2.0 / n) * np.sin(2 * np.pi * k * t / n))
    if n % 2 == 0:
        cols.append(np.cos(np.pi * t) / np.sqrt(n))
    return np.column_stack(cols)


def _haar(n):
    if n & (n - 1) or n < 1:
        raise ValueError("haar basis needs n to be a power of 2, got %d" % n)
    h = np.array([[1.0]])
    while h.shape[0] < n:
        k = h.shape[0]
        top = np.kron(h, [1.0, 1.0])
        bot = np.kron(np.eye(k), [1.0, -1.0])
        h = np.vstack([top, bot]) / np.sqrt(2.0)
    return h.T  # columns orthonormal


def shift_dictionary(pulse, n):
    """Redundant dictionary whose columns are unit-normalized circular shifts
    of the pulse on an n-point grid."""
    pulse = np.asarray(pulse, dtype=float).ravel()
    if pulse.size > n:
        raise ValueError("shift_dictionary: pulse longer than the grid")
    padded = np.zeros(n)
    padded[: pulse.size] = pulse
    cols = np.column_stack([np.roll(padded, i) for i in range(n)])
    return BasisMatrix(entries=_unit_columns(cols), kind="shift_dictionary")


def make_basis(kind, n, pulse=None):
    """Build a named basis: identity | dft_real | haar | shift_dictionary.

    Graph eigenbases are built from a measurement graph, see netmon.graph_basis.
    """
    if kind == "identity":
        return BasisMatrix(entries=np.eye(n), kind="identity")
    if kind == "dft_real":
        return BasisMatrix(entries=_dft_real(n), kind="dft_real")
    if kind == "haar":
        return BasisMatrix(entries=_haar(n), kind="haar")
    if kind == "shift_dictionary":
        if pulse is None:
            raise ValueError("make_basis: shift_dictionary needs a pulse")
        return shift_dictionary(pulse, n)
    raise ValueError("make_basis: unknown kind %r" % kind)


# ---------------------------------------------------------------------------
# measurement-count calculator


def sample_bound(kind, k=None, n=None, c=1.0, mu=None, mu_b=None, s=None, M=None):
    """Evaluate the requested measurement-count formula exactly.

    kinds: spark  -> 2k
           mip    -> c * mu^2 * k * ln(n)
           rip    -> c * k * ln(n/k)
           srp    -> c * s * M^2 * k^2 * ln(n)
           mc     -> c * mu_b^4 * n * ln(n)^2
    The multiplicative constant c defaults to 1 and is caller-adjustable;
    these are advisory order-of-growth values, not certified thresholds.
    """

    def need(**kwargs):
        for name, val in kwargs.items():
            if val is None:
                raise ValueError("sample_bound(%r): missing parameter %r" % (kind, name))

    if kind == "spark":
        need(k=k)
        return 2.0 * k
    if kind == "mip":
        need(k=k, n=n, mu=mu)
        return c * mu**2 * k * math.log(n)
    if kind == "rip":
        need(k=k, n=n)
        return c * k * math.log(n / k)
    if kind == "srp":
        need(k=k, n=n, s=s, M=M)
        return c * s * M**2 * k**2 * math.log(n)
    if kind == "mc":
        need(n=n, mu_b=mu_b)
        return c * mu_b**4 * n * math.log(n) ** 2
    raise ValueError("sample_bound: unknown kind %r" % kind)
