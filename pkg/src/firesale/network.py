"""Sampling of the sparse holdings matrix and portfolio-weight normalization.

Holdings are stored in coordinate form; the sampler never allocates a dense
``n_assets x n_banks`` array, so ensembles with dimensions in the thousands
stay cheap.  Each sample owns its random stream: use :func:`spawn_rng` to
derive independent per-sample generators from ``(seed, sample_index)``
without any coordination between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.integrate
import scipy.sparse as sp

from .params import HeterogeneityParams, ModelParams


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Extend a base seed (int or SeedSequence) by an index path.

    Children with different paths are statistically independent and the
    mapping is reproducible across processes, so Monte Carlo reductions are
    invariant under the worker count.
    """
    path = tuple(int(k) for k in key)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + path
        )
    return np.random.SeedSequence(seed, spawn_key=path)


def spawn_rng(seed, *key: int) -> np.random.Generator:
    """Generator for the stream at ``child_seed(seed, *key)``.

    A live Generator passes through unchanged (and cannot be re-keyed).
    """
    if isinstance(seed, np.random.Generator):
        if key:
            raise ValueError("cannot derive a keyed stream from a live Generator")
        return seed
    return np.random.default_rng(child_seed(seed, *key))


@dataclass(frozen=True)
class HoldingsMatrix:
    """Sparse investment matrix in coordinate form (values are heavy/light)."""

    n_assets: int
    n_banks: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    seed: object = None

    @property
    def nnz(self) -> int:
        return self.values.size

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, (self.rows, self.cols)),
            shape=(self.n_assets, self.n_banks),
        )

    def column_sums(self) -> np.ndarray:
        """Total amount invested by each institution."""
        return np.bincount(self.cols, weights=self.values, minlength=self.n_banks)

    def column_degrees(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n_banks)

    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n_assets)


@dataclass(frozen=True)
class PortfolioWeights:
    """Column-stochastic portfolio weights sharing the support of a sample."""

    n_assets: int
    n_banks: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    empty_columns: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def nnz(self) -> int:
        return self.values.size

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, (self.rows, self.cols)),
            shape=(self.n_assets, self.n_banks),
        )


def _uniform_index_subset(rng: np.random.Generator, total: int, n: int) -> np.ndarray:
    """Uniformly distributed n-subset of range(total), O(n) memory.

    Draws with replacement and deduplicates; conditioned on its size the
    accumulated distinct set is exchangeable, hence uniform, so dropping a
    uniformly chosen excess keeps uniformity.
    """
    if n >= total:
        return np.arange(total, dtype=np.int64)
    got = np.empty(0, dtype=np.int64)
    while got.size < n:
        need = n - got.size
        batch = rng.integers(0, total, size=need + need // 4 + 16, dtype=np.int64)
        got = np.unique(np.concatenate([got, batch]))
    if got.size > n:
        keep = rng.permutation(got.size)[:n]
        got = np.sort(got[keep])
    return got


def sample_holdings(p: ModelParams, h: HeterogeneityParams, seed) -> HoldingsMatrix:
    """Draw one holdings matrix from the sparse two-point ensemble.

    Every (asset, bank) pair is occupied independently with probability
    ``q / sqrt(n_assets*n_banks)``; occupied entries take the heavy value
    with probability ``p_heavy`` and the light value otherwise.
    Deterministic for a given seed.
    """
    rng = spawn_rng(seed)
    total = p.n_assets * p.n_banks
    nnz = int(rng.binomial(total, p.fill_probability))
    lin = _uniform_index_subset(rng, total, nnz)
    rows = lin // p.n_banks
    cols = lin - rows * p.n_banks
    values = np.where(rng.random(nnz) < h.p_heavy, h.heavy, h.light)
    return HoldingsMatrix(p.n_assets, p.n_banks, rows, cols, values, seed=seed)


def to_weights(x: HoldingsMatrix) -> PortfolioWeights:
    """Normalize each institution's holdings to portfolio proportions.

    Institutions with no investments contribute an all-zero column (they
    never trade); their indices are reported in ``empty_columns`` rather
    than being resampled, which would bias the ensemble.
    """
    colsum = x.column_sums()
    empty = np.flatnonzero(colsum == 0.0).astype(np.int64)
    denom = colsum[x.cols]
    values = x.values / denom
    return PortfolioWeights(
        x.n_assets, x.n_banks, x.rows, x.cols, values, empty_columns=empty
    )


@dataclass(frozen=True)
class EnsembleStats:
    """Empirical ensemble moments; each pair is (mean, standard error)."""

    n_samples: int
    fill_fraction: tuple
    mean_entry: tuple
    mean_weight: tuple
    empty_column_fraction: tuple
    row_degree_hist: np.ndarray
    col_degree_hist: np.ndarray


def _mean_se(values: np.ndarray) -> tuple:
    m = float(np.mean(values))
    if values.size < 2:
        return m, 0.0
    return m, float(np.std(values, ddof=1) / math.sqrt(values.size))


def ensemble_stats(samples) -> EnsembleStats:
    """Summarize an iterable of holdings samples (fill, moments, degrees)."""
    fills, entries, weights, empties = [], [], [], []
    row_hist = np.zeros(0, dtype=np.int64)
    col_hist = np.zeros(0, dtype=np.int64)
    n = 0
    for x in samples:
        n += 1
        total = x.n_assets * x.n_banks
        fills.append(x.nnz / total)
        entries.append(x.values.sum() / total)
        w = to_weights(x)
        weights.append(w.values.sum() / total)
        empties.append(w.empty_columns.size / x.n_banks)
        rd = np.bincount(x.row_degrees())
        cd = np.bincount(x.column_degrees())
        if rd.size > row_hist.size:
            row_hist = np.pad(row_hist, (0, rd.size - row_hist.size))
        if cd.size > col_hist.size:
            col_hist = np.pad(col_hist, (0, cd.size - col_hist.size))
        row_hist[: rd.size] += rd
        col_hist[: cd.size] += cd
    if n == 0:
        raise ValueError("ensemble_stats requires at least one sample")
    return EnsembleStats(
        n_samples=n,
        fill_fraction=_mean_se(np.asarray(fills)),
        mean_entry=_mean_se(np.asarray(entries)),
        mean_weight=_mean_se(np.asarray(weights)),
        empty_column_fraction=_mean_se(np.asarray(empties)),
        row_degree_hist=row_hist,
        col_degree_hist=col_hist,
    )


def expected_mean_weight(p: ModelParams) -> float:
    """Exact finite-size ensemble mean of a weight entry.

    E[W_ij] = -(1/N) ((1 - q/sqrt(NM))^N - 1) with N = n_assets; the
    investment-size law drops out for strictly positive sizes.
    """
    n = p.n_assets
    return -((1.0 - p.fill_probability) ** n - 1.0) / n


def expected_empty_fraction(p: ModelParams) -> float:
    """Probability that an institution invests in nothing: (1-p)^N."""
    return (1.0 - p.fill_probability) ** p.n_assets


def weight_second_moment_exact(p: ModelParams, h: HeterogeneityParams) -> float:
    """E[W_ij^2] by quadrature of the exact finite-size integral.

    Uses 1/n^2 = int_0^inf t*exp(-t*n) dt and the independence of entries
    within a column; serves as the unbiased oracle against which the
    large-size closed forms are audited.
    """
    pr = p.fill_probability
    n = p.n_assets

    def integrand(t):
        e_h = math.exp(-t * h.heavy)
        e_l = math.exp(-t * h.light)
        m0 = h.p_heavy * e_h + h.p_light * e_l
        m2 = h.p_heavy * h.heavy**2 * e_h + h.p_light * h.light**2 * e_l
        return t * pr * m2 * (1.0 - pr + pr * m0) ** (n - 1)

    val, _ = scipy.integrate.quad(integrand, 0.0, np.inf, limit=200)
    return val


def weight_cross_moment_exact(p: ModelParams, h: HeterogeneityParams) -> float:
    """E[W_ik W_jk] for i != j, by the same quadrature route."""
    pr = p.fill_probability
    n = p.n_assets

    def integrand(t):
        e_h = math.exp(-t * h.heavy)
        e_l = math.exp(-t * h.light)
        m0 = h.p_heavy * e_h + h.p_light * e_l
        m1 = h.p_heavy * h.heavy * e_h + h.p_light * h.light * e_l
        return t * (pr * m1) ** 2 * (1.0 - pr + pr * m0) ** (n - 2)

    val, _ = scipy.integrate.quad(integrand, 0.0, np.inf, limit=200)
    return val


def dump_triplets(obj, path) -> None:
    """Write a sparse sample as text triplets for cross-tool debugging.

    Header carries dimensions and seed; rows are ``asset bank value``.
    """
    path = Path(path)
    seed = getattr(obj, "seed", None)
    lines = [f"# assets {obj.n_assets} banks {obj.n_banks} seed {seed}"]
    for i, j, v in zip(obj.rows, obj.cols, obj.values):
        lines.append(f"{i} {j} {float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def load_triplets(path) -> HoldingsMatrix:
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split()
    n_assets, n_banks = int(header[2]), int(header[4])
    seed = header[6]
    rows, cols, vals = [], [], []
    for line in lines[1:]:
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    return HoldingsMatrix(
        n_assets,
        n_banks,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals),
        seed=seed,
    )
