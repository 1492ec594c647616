"""Long-run extinction/persistence classification."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InconsistentParameterError, InvalidParameterError
from .simulate import SamplePath


class Regime(str, Enum):
    EXTINCT = "Extinct"
    PERSISTENT = "Persistent"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Verdict:
    regime: Regime
    r0: float
    level: Optional[float] = None
    conditions: list[tuple[str, bool]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        rec = {"regime": self.regime.value, "r0": self.r0, "level": self.level}
        rec.update({name: ok for name, ok in self.conditions})
        if self.notes:
            rec["notes"] = list(self.notes)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=False)


def classify_natural(stationary_mean: float, gamma: float) -> Verdict:
    """Classify from ``R0 = E[Y_inf]/gamma``; persistence level ``1 - gamma/E[Y_inf]``.

    The level is the inverse of ``f(x) = -1/(1-x)`` at ``-E[Y_inf]/gamma``.
    Both long-run conditions are strict, so ``R0 == 1`` is Inconclusive.
    """
    if not (math.isfinite(gamma) and gamma > 0):
        raise InvalidParameterError(f"gamma must be > 0, got {gamma!r}")
    if not (math.isfinite(stationary_mean) and stationary_mean >= 0):
        raise InvalidParameterError(f"stationary mean must be >= 0, got {stationary_mean!r}")
    r0 = stationary_mean / gamma
    conditions = [("R0<1", r0 < 1.0), ("R0>1", r0 > 1.0)]
    if r0 < 1.0:
        return Verdict(Regime.EXTINCT, r0, None, conditions)
    if r0 > 1.0:
        return Verdict(Regime.PERSISTENT, r0, 1.0 - 1.0 / r0, conditions)
    return Verdict(Regime.INCONCLUSIVE, r0, None, conditions)


def gray_r0(beta: float, gamma: float, sigma: float) -> float:
    return beta / gamma - sigma**2 / (2.0 * gamma)


def gray_level(beta: float, gamma: float, sigma: float) -> float:
    """Oscillation level xi of the Gray SDE; ``(beta - gamma)/beta`` at sigma = 0."""
    disc = beta**2 - 2.0 * sigma**2 * gamma
    if disc < 0:
        raise InconsistentParameterError(
            f"beta^2 - 2 sigma^2 gamma = {disc:.6g} < 0: persistence level undefined"
        )
    # (sqrt(disc) - beta + s2)/s2, rationalised so sigma -> 0 is stable.
    return 1.0 - 2.0 * gamma / (math.sqrt(disc) + beta)


def classify_gray(beta: float, gamma: float, sigma: float) -> Verdict:
    """Thresholds of the additive-noise SDE ``dI = (beta I(1-I) - gamma I)dt + sigma I(1-I) dB``."""
    if not (math.isfinite(beta) and beta > 0 and math.isfinite(gamma) and gamma > 0):
        raise InvalidParameterError("beta and gamma must be finite and > 0")
    if not (math.isfinite(sigma) and sigma >= 0):
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma!r}")
    r0 = gray_r0(beta, gamma, sigma)
    s2 = sigma**2
    small_noise = r0 < 1.0 and s2 < beta
    large_noise = s2 > max(beta, beta / gamma)
    conditions = [
        ("R0<1 and sigma^2<beta", small_noise),
        ("sigma^2>max(beta,beta/gamma)", large_noise),
        ("R0>1", r0 > 1.0),
    ]
    if small_noise or large_noise:
        return Verdict(Regime.EXTINCT, r0, None, conditions)
    if r0 > 1.0:
        return Verdict(Regime.PERSISTENT, r0, gray_level(beta, gamma, sigma), conditions)
    verdict = Verdict(Regime.INCONCLUSIVE, r0, None, conditions)
    if s2 == 0.0:
        verdict.notes.append("sigma = 0 and R0 = 1: deterministic boundary")
    return verdict


def ergodic_average(path) -> float:
    """Trapezoidal time average ``(1/T) int_0^T Y ds`` over a uniform-grid path."""
    values = np.asarray(path.values if isinstance(path, SamplePath) else path, dtype=float)
    if values.size < 2:
        raise InvalidParameterError("path needs at least two nodes")
    inner = values[1:-1].sum()
    return float((0.5 * (values[0] + values[-1]) + inner) / (values.size - 1))


def batch_means_stderr(values, n_batches: int = 20) -> float:
    """Standard error of a time average from non-overlapping batch means."""
    values = np.asarray(values, dtype=float)
    usable = values.size - values.size % n_batches
    if usable < 2 * n_batches:
        raise InvalidParameterError("path too short for the requested batch count")
    means = values[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def oscillates_about(values, level: float, burn_in: float = 0.25) -> bool:
    """True when the path crosses ``level`` at least once after the burn-in fraction."""
    values = np.asarray(values, dtype=float)
    tail = values[int(math.floor(burn_in * (values.size - 1))):] - level
    return bool(np.any(tail[:-1] * tail[1:] <= 0) and np.any(tail != 0))
