"""Power-ladder feature gaussianization.

Skewed feature distributions make Gaussian class models a poor fit. The
ladder-of-powers transform raises every entry to a power lam (or takes the
logarithm at lam == 0), which pulls long right tails in and makes the
per-class distributions closer to normal before any covariance is
estimated.

Feature extractors with ReLU outputs produce nonnegative features, where
the transform is well defined. Extractors that emit negative values can be
handled by disabling the transform outright or by the bypass policy, which
leaves the batch untouched and lets the caller record that it did so.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from fecam.errors import DataError


class NegativePolicy(enum.Enum):
    """What to do when lam != 0 and the batch contains negative entries."""

    ERROR = "error"
    BYPASS = "bypass"


@dataclass(frozen=True)
class TukeyConfig:
    """Configuration for the power transform.

    Attributes:
        lam: Ladder exponent. 0 selects the logarithm branch; 1 is the
            identity.
        enabled: When False the transform is the identity map.
        negative_policy: Behavior on negative entries with lam not in {0, 1}.
    """

    lam: float = 0.5
    enabled: bool = True
    negative_policy: NegativePolicy = NegativePolicy.ERROR


def tukey_bypasses(features: np.ndarray, config: TukeyConfig) -> bool:
    """True when the bypass policy would leave this batch untransformed."""
    if not config.enabled or config.lam == 1.0 or config.lam == 0.0:
        return False
    if config.negative_policy is not NegativePolicy.BYPASS:
        return False
    return bool(np.min(features) < 0) if np.asarray(features).size else False


def tukey(features: np.ndarray, config: TukeyConfig) -> np.ndarray:
    """Apply the power transform elementwise.

    Args:
        features: Any-shape float array (rows of features, or a prototype).
        config: Transform settings.

    Returns:
        The transformed array; the input itself when the transform is
        disabled, lam == 1, or the bypass policy fires.

    Raises:
        DataError: Negative entries under the error policy, or nonpositive
            entries on the logarithm branch. No epsilon-clamping is done;
            silently shifting values would distort every downstream
            distance.
    """
    x = np.asarray(features, dtype=np.float64)
    if not config.enabled:
        return x
    if config.lam == 1.0:
        # Exact identity on any input, negatives included.
        return x
    if config.lam == 0.0:
        if x.size and np.min(x) <= 0:
            raise DataError(
                "logarithm branch (lam == 0) requires strictly positive entries"
            )
        return np.log(x)
    if x.size and np.min(x) < 0:
        if config.negative_policy is NegativePolicy.BYPASS:
            return x
        raise DataError(
            f"negative entries are outside the domain of x**{config.lam}; "
            "disable the transform or use the bypass policy"
        )
    return np.power(x, config.lam)
