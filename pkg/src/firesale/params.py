"""Model parameters, the two-point investment-size constraints, and derived scalars.

The market holds ``n_assets`` assets and ``n_banks`` institutions.  Each
institution invests in each asset independently with probability
``q / sqrt(n_assets * n_banks)``; a realized investment is either heavy
(``heavy`` monetary units, probability ``p_heavy``) or light (``light``,
probability ``1 - p_heavy``).  Two constraints pin the four investment-size
parameters to a single heterogeneity knob ``phi = 1 - light/heavy``:

* probabilities sum to one, and
* the expected invested amount per investment is one, which keeps the total
  capital injected into the market comparable across heterogeneity levels.

Institutions lever up to a regulatory target set by a saturated
value-at-risk rule; the target grows with diversification because the
diversifiable part of portfolio risk shrinks as ``1 / (alpha * q)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

CONSTRAINT_TOL = 1e-12

# Fraction of sqrt(n_assets * n_banks) above which the ensemble is no longer
# meaningfully sparse and the analytic approximations degrade.
SPARSITY_WARN_FRACTION = 0.1


class ParameterError(ValueError):
    """A model parameter violates its domain."""


class LeverageError(ParameterError):
    """The implied leverage target is <= 1, so rebalancing feedback vanishes
    or flips sign and the stability analysis does not apply."""


@dataclass(frozen=True)
class ModelParams:
    """Scalar inputs of the investment-network model.

    Attributes:
        n_assets: number of assets (rows of the holdings matrix).
        n_banks: number of institutions (columns).
        q: diversification parameter; investment probability is
            ``q / sqrt(n_assets * n_banks)`` and the mean portfolio size is
            ``q * alpha``.
        zeta: risk-appetite multiplier in the value-at-risk rule.
        sigma_s2: systematic (undiversifiable) portfolio variance.
        sigma_d2: diversifiable portfolio variance.
        gamma: asset liquidity; larger values damp price impact.
        sigma_f2: variance of the static common factor in exogenous returns.
        sigma_nu2: variance of the per-step idiosyncratic return noise.
    """

    n_assets: int
    n_banks: int
    q: float
    zeta: float
    sigma_s2: float
    sigma_d2: float
    gamma: float
    sigma_f2: float = 0.0
    sigma_nu2: float = 0.0

    def __post_init__(self) -> None:
        if self.n_assets < 1 or self.n_banks < 1:
            raise ParameterError("n_assets and n_banks must be >= 1")
        if not self.q > 0:
            raise ParameterError(f"q must be > 0, got {self.q}")
        if not self.zeta > 0:
            raise ParameterError(f"zeta must be > 0, got {self.zeta}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        for name in ("sigma_s2", "sigma_d2", "sigma_f2", "sigma_nu2"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        scale = math.sqrt(self.n_assets * self.n_banks)
        if self.q > scale:
            raise ParameterError(
                f"q={self.q} exceeds sqrt(n_assets*n_banks)={scale:.4g}; "
                "the investment probability would exceed 1"
            )
        if self.q > SPARSITY_WARN_FRACTION * scale:
            warnings.warn(
                f"q={self.q} is not small against sqrt(n_assets*n_banks)="
                f"{scale:.4g}; the sparse-ensemble approximations may be poor",
                stacklevel=2,
            )
        # Fails with a distinct error when the implied leverage target is <= 1.
        eta = target_leverage(self)
        if eta <= 1.0:
            raise LeverageError(
                f"target leverage eta={eta:.6g} <= 1; the rebalancing "
                "feedback prefactor (eta-1) must be positive"
            )

    @property
    def alpha(self) -> float:
        """Structure parameter sqrt(n_assets / n_banks)."""
        return math.sqrt(self.n_assets / self.n_banks)

    @property
    def fill_probability(self) -> float:
        """Bernoulli probability of a single (asset, bank) investment."""
        return self.q / math.sqrt(self.n_assets * self.n_banks)

    @property
    def shock_variance(self) -> float:
        """Per-step exogenous return variance sigma_f2 + sigma_nu2."""
        return self.sigma_f2 + self.sigma_nu2


@dataclass(frozen=True)
class HeterogeneityParams:
    """Two-point investment-size distribution.

    ``heavy >= 1 >= light > 0`` and ``p_heavy*heavy + p_light*light = 1``.
    """

    heavy: float
    light: float
    p_heavy: float
    p_light: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_heavy <= 1.0):
            raise ParameterError(f"p_heavy must lie in [0, 1], got {self.p_heavy}")
        if self.p_heavy + self.p_light != 1.0:
            raise ParameterError("p_heavy + p_light must equal 1 exactly")
        if not (self.heavy >= 1.0 >= self.light > 0.0):
            raise ParameterError(
                f"sizes must satisfy heavy >= 1 >= light > 0, got "
                f"heavy={self.heavy}, light={self.light}"
            )
        mean = self.p_heavy * self.heavy + self.p_light * self.light
        if abs(mean - 1.0) > CONSTRAINT_TOL:
            raise ParameterError(
                f"expected investment size must be 1 (got {mean!r}); "
                "parameters violate the capital-normalization constraint"
            )

    @property
    def spread(self) -> float:
        """Heterogeneity level phi = 1 - light/heavy in [0, 1)."""
        return 1.0 - self.light / self.heavy

    @classmethod
    def homogeneous(cls) -> "HeterogeneityParams":
        """Unit-size investments; recovers the equal-weight reference model."""
        return cls(heavy=1.0, light=1.0, p_heavy=1.0, p_light=0.0)


def solve_heterogeneity(phi: float, p_heavy: float) -> HeterogeneityParams:
    """Solve the two normalization constraints for the investment sizes.

    Given the heterogeneity level ``phi = 1 - light/heavy`` and the heavy
    probability, the constraints have the unique solution

        heavy = 1 / (1 - phi * (1 - p_heavy)),   light = (1 - phi) * heavy.

    ``phi >= 1`` is rejected (it would force light = 0).  ``p_heavy = 0`` or
    ``p_heavy = 1`` are accepted only at ``phi = 0``, where the model
    degenerates to homogeneous unit investments; at ``phi > 0`` these corners
    are contradictory and raise.
    """
    if not (0.0 <= phi < 1.0):
        raise ParameterError(f"phi must lie in [0, 1), got {phi}")
    if not (0.0 <= p_heavy <= 1.0):
        raise ParameterError(f"p_heavy must lie in [0, 1], got {p_heavy}")
    if phi == 0.0:
        return HeterogeneityParams(1.0, 1.0, p_heavy, 1.0 - p_heavy)
    if p_heavy == 0.0:
        raise ParameterError(
            "p_heavy=0 with phi>0 is unsatisfiable: no heavy investments "
            "exist, yet the constraints would require heavy > 1"
        )
    if p_heavy == 1.0:
        raise ParameterError(
            "p_heavy=1 with phi>0 is contradictory: the normalization forces "
            "heavy=1 while phi>0 demands heavy > light"
        )
    heavy = 1.0 / (1.0 - phi * (1.0 - p_heavy))
    light = (1.0 - phi) * heavy
    return HeterogeneityParams(heavy, light, p_heavy, 1.0 - p_heavy)


def target_leverage(p: ModelParams) -> float:
    """Regulatory leverage target from the saturated value-at-risk rule.

    eta = 1 / (zeta * sqrt(sigma_s2 + sigma_d2 / (alpha*q))).  Monotonically
    increasing in q: diversification shrinks portfolio risk, letting
    institutions lever up.
    """
    risk2 = p.sigma_s2 + p.sigma_d2 / (p.alpha * p.q)
    if risk2 <= 0.0:
        raise ParameterError(
            "portfolio variance sigma_s2 + sigma_d2/(alpha*q) must be > 0"
        )
    return 1.0 / (p.zeta * math.sqrt(risk2))


def leverage_gain(p: ModelParams) -> float:
    """Rebalancing feedback gain (eta - 1) / gamma."""
    return (target_leverage(p) - 1.0) / p.gamma


def phi_prefactor(p: ModelParams) -> float:
    """Prefactor of the endogenous-return operator: ((eta-1)/gamma) * alpha^2."""
    return leverage_gain(p) * p.alpha**2


def second_moment(h: HeterogeneityParams) -> float:
    """Second moment b = p_heavy*heavy^2 + p_light*light^2 of the size law.

    Equals 1 exactly in the homogeneous case and exceeds 1 otherwise
    (Jensen), making it the single statistic through which heterogeneity
    enters the closed-form eigenvalue estimate.
    """
    return h.p_heavy * h.heavy**2 + h.p_light * h.light**2
