"""Matrix-free largest-eigenvalue computation for the feedback operator.

The endogenous-return operator acts on asset space as
``v -> prefactor * F (F^T v)`` for an ``n_assets x n_banks`` factor matrix
``F`` (portfolio weights for the exact operator, raw holdings for the
surrogate used by the cavity route).  The Gram product is never formed:
both passes are sparse matrix-vector products, so a single apply costs
O(nnz).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .network import sample_holdings, spawn_rng, to_weights
from .params import HeterogeneityParams, ModelParams, phi_prefactor

DEFAULT_TOL = 1e-10


class PhiOperator:
    """Positive-semidefinite operator ``prefactor * F F^T`` applied matrix-free."""

    def __init__(self, matrix: sp.spmatrix, prefactor: float):
        self.matrix = sp.csr_matrix(matrix)
        self.matrix_t = sp.csr_matrix(self.matrix.T)
        self.prefactor = float(prefactor)

    @classmethod
    def from_weights(cls, weights, p: ModelParams) -> "PhiOperator":
        """Exact feedback operator ((eta-1)/gamma) * alpha^2 * W W^T."""
        return cls(weights.to_csr(), phi_prefactor(p))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.prefactor * (self.matrix @ (self.matrix_t @ v))

    matmat = matvec  # sparse @ dense works column-wise for both

    def rayleigh(self, v: np.ndarray) -> float:
        """Rayleigh quotient; a lower bound on the largest eigenvalue."""
        u = self.matrix_t @ v
        return self.prefactor * float(u @ u) / float(v @ v)

    def to_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(
            (self.n, self.n), matvec=self.matvec, matmat=self.matvec, dtype=float
        )

    def to_dense(self) -> np.ndarray:
        """Materialize the n_assets x n_assets matrix (oracles and tiny cases only)."""
        w = self.matrix.toarray()
        return self.prefactor * (w @ w.T)

    def scaled(self, c: float) -> "PhiOperator":
        return PhiOperator(self.matrix, self.prefactor * c)


@dataclass(frozen=True)
class SolveResult:
    """Largest-eigenvalue solve outcome (best iterate if not converged)."""

    value: float
    iterations: int
    converged: bool
    vector: np.ndarray


@dataclass(frozen=True)
class EigEstimate:
    """A largest-eigenvalue estimate with Monte Carlo uncertainty.

    ``method`` is one of ``diagonalization`` (sample average of exact
    solves), ``corsi`` (closed form on the ensemble-averaged matrix) or
    ``replica`` (population-dynamics edge of the sparse surrogate).
    """

    value: float
    stderr: float
    samples: int
    method: str
    iterations: int = 0
    n_unconverged: int = 0

    def __post_init__(self) -> None:
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if self.method == "diagonalization" and self.value < -1e-12:
            raise ValueError("PSD operator cannot have a negative top eigenvalue")


def lambda_max(
    op: PhiOperator,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    v0: np.ndarray | None = None,
    method: str = "power",
) -> SolveResult:
    """Largest eigenvalue of a PSD feedback operator to relative accuracy tol.

    ``method="power"`` runs power iteration with Rayleigh-quotient
    convergence checks (two consecutive relative changes below tol);
    ``method="lanczos"`` delegates to ARPACK on the matrix-free apply.  For
    a PSD operator the dominant eigenvalue is the spectral radius, so both
    converge to the same value; on non-convergence the best iterate is
    returned with ``converged=False``.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    n = op.n
    if v0 is None:
        v0 = np.ones(n)
    if method == "lanczos":
        return _lanczos_lambda_max(op, tol, max_iter, v0)  # tol 0 = machine eps
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    tol = max(tol, 1e-15)
    if max_iter is None:
        max_iter = 10 * n

    v = v0 / np.linalg.norm(v0)
    lam_prev = math.inf
    delta_prev = math.inf
    hits = 0
    for it in range(1, max_iter + 1):
        w = op.matvec(v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            # v0 is strictly positive by default and the operator has
            # nonnegative entries, so annihilation implies a zero operator.
            return SolveResult(0.0, it, True, v)
        lam = float(v @ w)
        v = w / nrm
        delta = abs(lam - lam_prev)
        # Rayleigh increments shrink geometrically; extrapolate the remaining
        # error from the observed ratio so a slow mode cannot fake
        # convergence by stalling.
        if delta_prev > 0 and math.isfinite(delta_prev):
            ratio = min(delta / delta_prev, 0.999)
            remaining = delta * ratio / (1.0 - ratio)
        else:
            remaining = delta
        if delta <= tol * abs(lam) and remaining <= tol * abs(lam):
            hits += 1
            if hits >= 2:
                return SolveResult(lam, it, True, v)
        else:
            hits = 0
        delta_prev = delta
        lam_prev = lam
    return SolveResult(lam_prev, max_iter, False, v)


def _lanczos_lambda_max(op, tol, max_iter, v0) -> SolveResult:
    n = op.n
    if n < 3:
        vals, vecs = np.linalg.eigh(op.to_dense())
        return SolveResult(float(vals[-1]), 1, True, vecs[:, -1])
    try:
        vals, vecs = spla.eigsh(
            op.to_linear_operator(),
            k=1,
            which="LA",
            v0=v0,
            tol=tol,
            maxiter=max_iter,
        )
        return SolveResult(float(vals[0]), 0, True, vecs[:, 0])
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues.size:
            return SolveResult(float(exc.eigenvalues[-1]), 0, False, v0)
        return SolveResult(0.0, 0, False, v0)


def dense_lambda_max(op: PhiOperator) -> float:
    """Full dense diagonalization of the materialized operator (oracle path)."""
    return float(np.linalg.eigvalsh(op.to_dense())[-1])


def sample_phi(
    p: ModelParams, h: HeterogeneityParams, seed, surrogate: bool = False
) -> PhiOperator:
    """Draw one feedback operator; ``surrogate=True`` builds the sparse
    holdings Gram operator with the first-moment-matched prefactor instead
    of the exact weight-based one."""
    x = sample_holdings(p, h, seed)
    if surrogate:
        from .replica import approx_prefactor

        return PhiOperator(x.to_csr(), approx_prefactor(p))
    return PhiOperator.from_weights(to_weights(x), p)


def _one_sample(p, h, seed, method, tol, max_iter, surrogate, index):
    op = sample_phi(p, h, spawn_rng(seed, index), surrogate=surrogate)
    res = lambda_max(op, tol=tol, max_iter=max_iter, method=method)
    return res.value, res.iterations, res.converged


def mc_lambda_max(
    p: ModelParams,
    h: HeterogeneityParams,
    n_samples: int,
    seed,
    workers: int = 1,
    method: str = "power",
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    surrogate: bool = False,
) -> EigEstimate:
    """Monte Carlo average of the largest eigenvalue over i.i.d. samples.

    Per-sample streams derive from (seed, sample index), and the reduction
    runs in sample-index order, so the result is bit-identical for any
    worker count.  Non-converged solves are counted, not dropped.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    fn = partial(_one_sample, p, h, seed, method, tol, max_iter, surrogate)
    if workers <= 1:
        results = [fn(i) for i in range(n_samples)]
    else:
        chunk = max(1, n_samples // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, range(n_samples), chunksize=chunk))
    values = np.array([r[0] for r in results])
    iters = max(r[1] for r in results)
    bad = sum(0 if r[2] else 1 for r in results)
    stderr = 0.0
    if n_samples > 1:
        stderr = float(np.std(values, ddof=1) / math.sqrt(n_samples))
    return EigEstimate(
        value=float(values.mean()),
        stderr=stderr,
        samples=n_samples,
        method="diagonalization",
        iterations=iters,
        n_unconverged=bad,
    )
