"""Ready-made systems used in the examples, tests and configs/ directory."""

from __future__ import annotations

import math

from .model import BonusMalusSystem, DistributionSpec, geometric_weights

TEN_LEVELS = (0.4, 0.8, 1.0, 1.2, 1.4, 1.5, 1.7, 1.8, 2.0, 2.2)
LAMBDA1 = 18.0
LAMBDA2 = 11.0


def gamma_bms() -> BonusMalusSystem:
    """Ten levels with geometric weights (ratio 1.1), gamma(3, rate 6) claims.

    D has exactly three zeros in the left half-plane, so the series is exact.
    """
    return BonusMalusSystem.from_weights(TEN_LEVELS, geometric_weights(10, 1.1),
                                         DistributionSpec.gamma(3, 6.0), LAMBDA1, LAMBDA2)


def halfnormal_bms() -> BonusMalusSystem:
    """Ten equally likely levels, half-normal claims with sigma = 1."""
    return BonusMalusSystem.from_weights(TEN_LEVELS, [0.1] * 10, DistributionSpec.half_normal(1.0),
                                         LAMBDA1, LAMBDA2)


def maxwell_bms() -> BonusMalusSystem:
    """Ten equally likely levels, Maxwell (chi, 3 dof) claims with sigma = 1/sqrt(2)."""
    return BonusMalusSystem.from_weights(TEN_LEVELS, [0.1] * 10,
                                         DistributionSpec.maxwell(1 / math.sqrt(2.0)), LAMBDA1, LAMBDA2)


def exponential_ds(a: float = 1.0, b: float = 1.0) -> BonusMalusSystem:
    """Exponential premiums (rate a) and claims (rate b): a single zero, exact solution."""
    return BonusMalusSystem(DistributionSpec.exponential(a), DistributionSpec.exponential(b),
                            LAMBDA1, LAMBDA2)


def exponential_ds_exact(a: float = 1.0, b: float = 1.0, lambda1: float = LAMBDA1,
                         lambda2: float = LAMBDA2) -> tuple[float, float]:
    """``(coefficient, exponent)`` of ``psi(u) = coefficient * exp(exponent * u)``.

    From ``D(s) = 0`` reduced to a linear factor: the exponent is
    ``-(lambda1 b - lambda2 a)/(lambda1 + lambda2)``.
    """
    total = lambda1 + lambda2
    return lambda2 * (a + b) / (b * total), -(lambda1 * b - lambda2 * a) / total


PRESETS = {
    "gamma_bms": gamma_bms,
    "halfnormal_bms": halfnormal_bms,
    "maxwell_bms": maxwell_bms,
    "exponential_ds": exponential_ds,
}
