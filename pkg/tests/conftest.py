import numpy as np
import pytest

from firesale import HeterogeneityParams, ModelParams, solve_heterogeneity


@pytest.fixture
def benchmark_params() -> ModelParams:
    """Low-asset-count benchmark regime (alpha = sqrt(200/300))."""
    return ModelParams(
        n_assets=200, n_banks=300, q=8.0,
        zeta=1.85, sigma_s2=0.009, sigma_d2=0.03, gamma=50.0,
        sigma_f2=0.0, sigma_nu2=1e-4,
    )


@pytest.fixture
def wide_params() -> ModelParams:
    """High-asset-count regime (alpha = sqrt(400/300))."""
    return ModelParams(
        n_assets=400, n_banks=300, q=8.0,
        zeta=1.85, sigma_s2=0.009, sigma_d2=0.03, gamma=50.0,
        sigma_f2=0.0, sigma_nu2=1e-4,
    )


@pytest.fixture
def benchmark_het() -> HeterogeneityParams:
    """Heavy/light split used throughout the benchmark sweeps."""
    return solve_heterogeneity(0.9, 7.0 / 27.0)


@pytest.fixture
def tiny_params() -> ModelParams:
    return ModelParams(
        n_assets=12, n_banks=15, q=1.2,
        zeta=1.0, sigma_s2=0.04, sigma_d2=0.01, gamma=10.0,
        sigma_nu2=1e-4,
    )


def mean_se(values):
    values = np.asarray(values, dtype=float)
    return values.mean(), values.std(ddof=1) / np.sqrt(values.size)
