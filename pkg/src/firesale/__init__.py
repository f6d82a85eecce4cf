"""Stability analysis of sparse bank-asset investment networks.

The market is unstable when the average largest eigenvalue of the
rebalancing-feedback operator exceeds one; this package samples the sparse
holdings ensemble and estimates that eigenvalue three ways (Monte Carlo
diagonalization, closed form on the averaged matrix, population dynamics on
a moment-matched sparse surrogate), then sweeps parameter grids to map the
stability transition.
"""

__version__ = "0.1.0"

from .params import (
    HeterogeneityParams,
    LeverageError,
    ModelParams,
    ParameterError,
    leverage_gain,
    phi_prefactor,
    second_moment,
    solve_heterogeneity,
    target_leverage,
)
from .network import (
    EnsembleStats,
    HoldingsMatrix,
    PortfolioWeights,
    child_seed,
    dump_triplets,
    ensemble_stats,
    expected_empty_fraction,
    expected_mean_weight,
    load_triplets,
    sample_holdings,
    spawn_rng,
    to_weights,
)
from .spectral import (
    EigEstimate,
    PhiOperator,
    SolveResult,
    dense_lambda_max,
    lambda_max,
    mc_lambda_max,
    sample_phi,
)
from .corsi import (
    ExpectedPhi,
    corsi_estimate,
    corsi_lambda_max,
    corsi_lambda_max_finite,
    expected_phi,
)
from .replica import (
    ApproxPhiSpec,
    PopulationState,
    approx_phi_sample,
    approx_prefactor,
    replica_lambda_max,
    scaling_constant,
)
from .dynamics import (
    AgentStepResult,
    BankLedger,
    InsolvencyError,
    MarketState,
    ShockModel,
    agent_step,
    linear_step,
    linearization_check,
    rebalanced_holdings,
    simulate_linear,
)
from .sweep import (
    CellResult,
    SweepConfig,
    SweepResult,
    classify,
    run_gap_analysis,
    run_phase_diagram,
    run_q_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
