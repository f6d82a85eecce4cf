import numpy as np
import pytest
import scipy.sparse as sp

from firesale import (
    EigEstimate,
    HeterogeneityParams,
    ModelParams,
    PhiOperator,
    dense_lambda_max,
    lambda_max,
    mc_lambda_max,
    phi_prefactor,
    sample_phi,
    solve_heterogeneity,
)
from firesale.network import child_seed


def _operator(rows, cols, values, shape, prefactor=1.0):
    return PhiOperator(sp.csr_matrix((values, (rows, cols)), shape=shape), prefactor)


def test_rank_one_column(benchmark_params):
    # one institution fully invested in one asset: W W^T is a projector
    kappa0 = phi_prefactor(benchmark_params)
    op = _operator([2], [0], [1.0], (5, 3), kappa0)
    res = lambda_max(op)
    assert res.converged
    assert res.value == pytest.approx(kappa0, rel=1e-12)


def test_two_institutions_one_asset(benchmark_params):
    kappa0 = phi_prefactor(benchmark_params)
    op = _operator([1, 1], [0, 1], [1.0, 1.0], (4, 2), kappa0)
    res = lambda_max(op)
    assert res.value == pytest.approx(2.0 * kappa0, rel=1e-12)


@pytest.mark.filterwarnings("ignore:q=.*is not small")
def test_small_instance_matches_dense_eigendecomposition():
    p = ModelParams(5, 5, 1.5, 1.0, 0.04, 0.01, 10.0)
    h = solve_heterogeneity(0.6, 0.3)
    for i in range(10):
        op = sample_phi(p, h, child_seed(21, i))
        res = lambda_max(op, tol=1e-12, max_iter=100_000)
        assert res.value == pytest.approx(dense_lambda_max(op), rel=1e-8, abs=1e-14)


@pytest.mark.parametrize("method", ["power", "lanczos"])
def test_both_solvers_pass_dense_oracle(method, tiny_params, benchmark_het):
    for i in range(8):
        op = sample_phi(tiny_params, benchmark_het, child_seed(22, i))
        res = lambda_max(op, tol=1e-11, max_iter=200_000, method=method)
        dense = dense_lambda_max(op)
        assert res.value == pytest.approx(dense, rel=1e-8, abs=1e-14)


def test_zero_operator():
    op = _operator([], [], [], (6, 4), 2.0)
    res = lambda_max(op)
    assert res.value == 0.0 and res.converged


def test_prefactor_linearity(tiny_params, benchmark_het):
    op = sample_phi(tiny_params, benchmark_het, 5)
    base = lambda_max(op, tol=1e-12).value
    scaled = lambda_max(op.scaled(3.5), tol=1e-12).value
    assert scaled == pytest.approx(3.5 * base, rel=1e-10)


def test_rayleigh_lower_bound(benchmark_params, benchmark_het):
    op = sample_phi(benchmark_params, benchmark_het, 31)
    top = lambda_max(op, tol=1e-12).value
    rng = np.random.default_rng(0)
    for _ in range(10):
        probe = rng.normal(size=op.n)
        assert op.rayleigh(probe) <= top * (1 + 1e-10)


def test_non_convergence_flag(benchmark_params, benchmark_het):
    op = sample_phi(benchmark_params, benchmark_het, 31)
    res = lambda_max(op, tol=1e-14, max_iter=2)
    assert not res.converged
    assert res.iterations == 2
    assert res.value > 0


def test_invalid_tolerance(tiny_params, benchmark_het):
    op = sample_phi(tiny_params, benchmark_het, 1)
    with pytest.raises(ValueError):
        lambda_max(op, tol=-1e-3)
    with pytest.raises(ValueError):
        lambda_max(op, method="qr")


def test_single_sample_equals_direct_solve(benchmark_params, benchmark_het):
    est = mc_lambda_max(benchmark_params, benchmark_het, 1, seed=77)
    op = sample_phi(benchmark_params, benchmark_het, child_seed(77, 0))
    res = lambda_max(op)
    assert est.value == res.value
    assert est.stderr == 0.0
    assert est.samples == 1


def test_mc_worker_invariance(benchmark_params, benchmark_het):
    serial = mc_lambda_max(benchmark_params, benchmark_het, 12, seed=5, method="lanczos")
    pooled = mc_lambda_max(
        benchmark_params, benchmark_het, 12, seed=5, method="lanczos", workers=2
    )
    assert serial.value == pooled.value
    assert serial.stderr == pooled.stderr


def test_mc_requires_samples(benchmark_params, benchmark_het):
    with pytest.raises(ValueError):
        mc_lambda_max(benchmark_params, benchmark_het, 0, seed=0)


def test_estimate_validation():
    with pytest.raises(ValueError):
        EigEstimate(value=1.0, stderr=-0.1, samples=3, method="diagonalization")
    with pytest.raises(ValueError):
        EigEstimate(value=-0.5, stderr=0.1, samples=3, method="diagonalization")


def test_surrogate_flag_changes_operator(benchmark_params, benchmark_het):
    exact = mc_lambda_max(
        benchmark_params, benchmark_het, 6, seed=9, method="lanczos"
    )
    surrogate = mc_lambda_max(
        benchmark_params, benchmark_het, 6, seed=9, method="lanczos", surrogate=True
    )
    # the raw-holdings surrogate overestimates at moderate diversification
    assert surrogate.value > exact.value
