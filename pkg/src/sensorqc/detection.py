"""Two-sided p-value test of observations against predictive Gaussians."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np
from scipy.special import erfc

from .kalman import Prediction


class Label(str, enum.Enum):
    VALID = "Valid"
    SUSPECT = "Suspect"


def p_value_two_sided(x, mu, var):
    """``1 - 2|0.5 - Phi((x - mu)/sigma)|``, evaluated as ``erfc(|z|/sqrt(2))``.

    The two forms are identical; the complementary error function keeps
    full relative precision in the tails. Accepts scalars or arrays.
    """
    var = np.asarray(var, dtype=float)
    if np.any(~(var > 0)):
        raise ValueError("predictive variance must be positive")
    z = (np.asarray(x, dtype=float) - mu) / np.sqrt(var)
    p = erfc(np.abs(z) / math.sqrt(2.0))
    return float(p) if np.ndim(p) == 0 else p


def label_for(p_value: float, threshold: float) -> Label:
    return Label.SUSPECT if p_value < threshold else Label.VALID


@dataclass(frozen=True)
class Verdict:
    sample_time: datetime | int
    observed: float
    predicted_mean: float
    predicted_std: float
    p_value: float
    label: Label

    @property
    def suspect(self) -> bool:
        return self.label is Label.SUSPECT


def classify(x: float, prediction: Prediction, threshold: float = 0.1, sample_time=0) -> Verdict:
    p = p_value_two_sided(x, prediction.mu_obs, prediction.var_obs)
    return Verdict(
        sample_time=sample_time,
        observed=float(x),
        predicted_mean=float(prediction.mu_obs),
        predicted_std=prediction.std_obs,
        p_value=p,
        label=label_for(p, threshold),
    )
