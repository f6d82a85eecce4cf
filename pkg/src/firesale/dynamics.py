"""Time-domain validation: linear endogenous-return process and the
balance-sheet simulator it linearizes.

The linear process iterates ``e_t = Phi (e_{t-1} + eps_t)`` with exogenous
shocks ``eps = f + nu`` (static common factor plus per-step idiosyncratic
noise).  The agent model tracks each institution's equity, assets and
leverage target explicitly: returns move balance sheets, the gap to the
target generates trades along fixed portfolio proportions, and a linear
price-impact rule converts net asset demand into endogenous returns.
Rebalancing along the existing proportions leaves the weight matrix
invariant, which is what makes the linear reduction possible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .network import sample_holdings, spawn_rng, to_weights
from .params import HeterogeneityParams, ModelParams, target_leverage
from .spectral import PhiOperator


class InsolvencyError(RuntimeError):
    """An institution's equity dropped to zero or below; the model has no
    default-resolution mechanics, so the simulation halts."""

    def __init__(self, banks, t):
        self.banks = list(banks)
        self.t = t
        super().__init__(f"insolvent institutions {self.banks} at step {t}")


@dataclass(frozen=True)
class MarketState:
    """Endogenous return vector at one time step."""

    e: np.ndarray
    t: int = 0
    diverged: bool = False


@dataclass(frozen=True)
class ShockModel:
    """Exogenous return shocks eps_{i,t} = f_i + nu_{i,t}.

    The factor f is drawn once per path; the idiosyncratic noise is redrawn
    every step.  Per-step variance is sigma_f2 + sigma_nu2.
    """

    sigma_f2: float
    sigma_nu2: float

    @property
    def variance(self) -> float:
        return self.sigma_f2 + self.sigma_nu2

    def draw_path(self, rng, n_assets: int, horizon: int) -> np.ndarray:
        """(horizon, n_assets) array of shocks for one path."""
        f = rng.normal(0.0, np.sqrt(self.sigma_f2), size=n_assets)
        nu = rng.normal(0.0, np.sqrt(self.sigma_nu2), size=(horizon, n_assets))
        return f[None, :] + nu


def linear_step(state: MarketState, op: PhiOperator, shock: np.ndarray) -> MarketState:
    """One step of the linear process e_t = Phi (e_{t-1} + eps_t)."""
    if shock.shape != state.e.shape:
        raise ValueError("shock dimension does not match state")
    if state.diverged:
        return replace(state, t=state.t + 1)
    e = op.matvec(state.e + shock)
    diverged = not np.all(np.isfinite(e))
    if diverged:
        e = np.zeros_like(state.e)
    return MarketState(e=e, t=state.t + 1, diverged=diverged)


def simulate_linear(
    op: PhiOperator, shocks: np.ndarray, e0: np.ndarray | None = None
) -> tuple[np.ndarray, bool]:
    """Run the linear process over a (horizon, n) shock array.

    Returns the (horizon, n) trace of endogenous returns and a divergence
    flag (overflow is the expected signature of an unstable instance).
    """
    horizon, n = shocks.shape
    state = MarketState(np.zeros(n) if e0 is None else np.asarray(e0, dtype=float))
    trace = np.empty((horizon, n))
    for t in range(horizon):
        state = linear_step(state, op, shocks[t])
        trace[t] = state.e
        if state.diverged:
            trace[t:] = np.nan
            return trace, True
    return trace, False


@dataclass(frozen=True)
class BankLedger:
    """Per-institution balance sheets under a common leverage target.

    ``targets`` holds the post-rebalance asset level eta * equity from the
    previous step, which is what current-step trading responds to.
    """

    equity: np.ndarray
    assets: np.ndarray
    targets: np.ndarray
    eta: float
    gamma: float

    @classmethod
    def uniform(cls, p: ModelParams, equity: float = 1.0) -> "BankLedger":
        """All institutions start at the leverage target with equal equity."""
        eta = target_leverage(p)
        eq = np.full(p.n_banks, float(equity))
        return cls(equity=eq, assets=eta * eq, targets=eta * eq, eta=eta,
                   gamma=p.gamma)

    def with_target_jitter(self, rng, rel: float) -> "BankLedger":
        """Multiplicatively perturb balance sheets by 1 + rel*uniform(-1,1)."""
        factor = 1.0 + rel * rng.uniform(-1.0, 1.0, size=self.targets.size)
        return BankLedger(
            equity=self.equity * factor,
            assets=self.assets * factor,
            targets=self.targets * factor,
            eta=self.eta,
            gamma=self.gamma,
        )


@dataclass(frozen=True)
class AgentStepResult:
    bank_demands: np.ndarray   # money each institution must trade
    asset_demands: np.ndarray  # net demand aggregated per asset
    endogenous: np.ndarray     # price-impact return vector
    ledger: "BankLedger"


def agent_step(ledger: BankLedger, weights, r: np.ndarray) -> AgentStepResult:
    """One step of the balance-sheet model given realized asset returns.

    Portfolio returns are W^T r; the money institution j trades is
    (eta-1) * target_j * portfolio return; trades spread along the fixed
    proportions, so per-asset demand is (eta-1) * W diag(targets) W^T r.
    Market capitalization is estimated as (mean target) / alpha^2, and the
    endogenous return is demand / (gamma * capitalization).
    """
    w = weights.to_csr()
    n_assets, n_banks = w.shape
    alpha2 = n_assets / n_banks
    r_p = w.T @ r
    demands = (ledger.eta - 1.0) * ledger.targets * r_p
    asset_demand = w @ demands
    mean_target = float(ledger.targets.mean())
    capitalization = mean_target / alpha2
    endogenous = asset_demand / (ledger.gamma * capitalization)

    gains = r_p * ledger.targets
    equity = ledger.equity + gains
    assets = ledger.targets + gains
    insolvent = np.flatnonzero(equity <= 0.0)
    if insolvent.size:
        raise InsolvencyError(insolvent, t=-1)
    new_ledger = BankLedger(
        equity=equity,
        assets=assets,
        targets=ledger.eta * equity,
        eta=ledger.eta,
        gamma=ledger.gamma,
    )
    return AgentStepResult(demands, asset_demand, endogenous, new_ledger)


def rebalanced_holdings(x_csr, bank_demands: np.ndarray):
    """Post-trade holdings X * (1 + demand_j / column_sum_j), sparse."""
    import scipy.sparse as sp

    colsum = np.asarray(x_csr.sum(axis=0)).ravel()
    scale = np.ones_like(colsum)
    nz = colsum != 0
    scale[nz] = 1.0 + bank_demands[nz] / colsum[nz]
    return x_csr @ sp.diags(scale)


def linearization_check(
    p: ModelParams,
    h: HeterogeneityParams,
    seed,
    horizon: int,
    target_jitter: float = 0.0,
    hold_targets_uniform: bool | None = None,
) -> float:
    """Maximum per-step relative deviation between agent and linear paths.

    With ``hold_targets_uniform`` (the default when targets start equal),
    the cross-sectional dispersion that the agent model would accumulate is
    projected out after every step, making the balance-sheet identity exact
    and the two paths equal to floating-point accuracy.  With jittered
    targets and no projection the deviation is first order in the jitter.
    """
    if hold_targets_uniform is None:
        hold_targets_uniform = target_jitter == 0.0
    rng = spawn_rng(seed)
    x = sample_holdings(p, h, rng)
    weights = to_weights(x)
    op = PhiOperator.from_weights(weights, p)
    shock_model = ShockModel(p.sigma_f2, p.sigma_nu2)
    shocks = shock_model.draw_path(rng, p.n_assets, horizon)

    ledger = BankLedger.uniform(p)
    if target_jitter > 0.0:
        ledger = ledger.with_target_jitter(rng, target_jitter)
    lin = MarketState(np.zeros(p.n_assets))
    e_agent = np.zeros(p.n_assets)
    worst = 0.0
    for t in range(horizon):
        lin = linear_step(lin, op, shocks[t])
        r = e_agent + shocks[t]
        step = agent_step(ledger, weights, r)
        e_agent = step.endogenous
        ledger = step.ledger
        if hold_targets_uniform:
            ledger = BankLedger(
                equity=np.full_like(ledger.equity, ledger.equity.mean()),
                assets=np.full_like(ledger.assets, ledger.assets.mean()),
                targets=np.full_like(ledger.targets, ledger.targets.mean()),
                eta=ledger.eta,
                gamma=ledger.gamma,
            )
        scale = max(float(np.linalg.norm(lin.e)), 1e-300)
        worst = max(worst, float(np.linalg.norm(e_agent - lin.e)) / scale)
    return worst


def dump_trace(path, trace: np.ndarray, paths_axis: bool = False) -> None:
    """Write a simulated trace as CSV rows (path, t, asset, e, var_running).

    ``trace`` is (horizon, n_assets) for a single path or
    (n_paths, horizon, n_assets) with ``paths_axis=True``; the running
    variance is the cumulative per-asset variance of e up to each step.
    """
    arr = trace if paths_axis else trace[None, ...]
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "t", "asset", "e", "var_running"])
        for ip in range(arr.shape[0]):
            mean = np.zeros(arr.shape[2])
            m2 = np.zeros(arr.shape[2])
            for t in range(arr.shape[1]):
                row = arr[ip, t]
                delta = row - mean
                mean += delta / (t + 1)
                m2 += delta * (row - mean)
                var = m2 / t if t > 0 else np.zeros_like(m2)
                for i in range(arr.shape[2]):
                    writer.writerow(
                        [ip, t, i, repr(float(row[i])), repr(float(var[i]))]
                    )
