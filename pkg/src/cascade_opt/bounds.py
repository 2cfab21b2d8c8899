"""Finite-sample planning bounds for the threshold search.

Three tools: a Hoeffding-plus-union generalization radius for the regret
of grid-searched thresholds, a minimum detectable regret difference for
sizing the selection set, and a grid resolution recommendation derived
from it.  All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Rational approximation coefficients for the inverse standard normal CDF
# (central region |p - 0.5| <= 0.47575, plus symmetric tails).  Absolute
# error stays below 1.2e-9 across (0, 1).
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF by rational-polynomial approximation."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
                ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def generalization_epsilon(
    num_models: int, grid_resolution: int, n_ss: int, delta: float
) -> float:
    """Uniform deviation radius over the threshold grid.

    sqrt(((m - 1) * ln K - ln delta) / (2 * n_ss)): Hoeffding for one
    candidate, union bound over the K^(m-1) grid.  Empirical and population
    regret of every candidate agree within this radius with probability
    1 - delta; the selected candidate's excess population regret over the
    grid optimum is at most twice it.
    """
    if num_models < 2:
        raise ValueError(f"cascade needs >= 2 models, got {num_models}")
    if grid_resolution < 3:
        raise ValueError(f"grid resolution must be >= 3, got {grid_resolution}")
    if n_ss < 1:
        raise ValueError(f"n_ss must be >= 1, got {n_ss}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    numerator = (num_models - 1) * math.log(grid_resolution) - math.log(delta)
    return math.sqrt(numerator / (2.0 * n_ss))


def excess_regret_bound(
    num_models: int, grid_resolution: int, n_ss: int, delta: float
) -> float:
    """Bound on selected-minus-optimal population regret: two radii."""
    return 2.0 * generalization_epsilon(num_models, grid_resolution, n_ss, delta)


def mdc(regret_a: float, regret_b: float, n_ss: int, alpha: float = 0.05) -> float:
    """Minimum detectable regret difference between two threshold vectors.

    Two-proportion normal test at level alpha: z_(1 - alpha/2) times the
    combined binomial standard error of the two empirical regrets on the
    same selection-set size.
    """
    for name, value in (("regret_a", regret_a), ("regret_b", regret_b)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    if n_ss < 1:
        raise ValueError(f"n_ss must be >= 1, got {n_ss}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    z = normal_quantile(1.0 - alpha / 2.0)
    variance = (regret_a * (1.0 - regret_a) + regret_b * (1.0 - regret_b)) / n_ss
    return z * math.sqrt(variance)


def mdc_cap(n_ss: int, alpha: float = 0.05) -> float:
    """Worst-case mdc, attained at regrets of one half each."""
    return mdc(0.5, 0.5, n_ss, alpha)


def recommended_grid_resolution(n_ss: int, alpha: float = 0.05) -> int:
    """Grid resolution matched to the resolvable regret scale.

    Steps finer than the worst-case minimum detectable difference cannot
    be told apart on n_ss records, so the recommendation is
    floor(1 / cap) + 2 clamped to [3, 10].  Advisory only; any resolution
    >= 3 is accepted everywhere else.
    """
    cap = mdc_cap(n_ss, alpha)
    return max(3, min(10, math.floor(1.0 / cap) + 2))


@dataclass(frozen=True)
class BoundInputs:
    """Inputs shared by the planning bounds."""

    num_models: int
    grid_resolution: int
    n_ss: int
    delta: float
    alpha: float = 0.05

    def __post_init__(self) -> None:
        # Reuse the range checks of the bound functions themselves.
        generalization_epsilon(self.num_models, self.grid_resolution, self.n_ss, self.delta)
        mdc_cap(self.n_ss, self.alpha)


def bound_report(inputs: BoundInputs) -> dict[str, float | int]:
    """All planning bounds for one configuration, for reports."""
    eps = generalization_epsilon(
        inputs.num_models, inputs.grid_resolution, inputs.n_ss, inputs.delta
    )
    return {
        "num_models": inputs.num_models,
        "grid_resolution": inputs.grid_resolution,
        "n_ss": inputs.n_ss,
        "delta": inputs.delta,
        "alpha": inputs.alpha,
        "epsilon": eps,
        "excess_regret_bound": 2.0 * eps,
        "mdc_cap": mdc_cap(inputs.n_ss, inputs.alpha),
        "recommended_grid_resolution": recommended_grid_resolution(
            inputs.n_ss, inputs.alpha
        ),
    }
