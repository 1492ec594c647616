"""Perturbation processes for the transmission rate.

Each named model is a one-dimensional diffusion ``dY = a(Y) dt + b(Y) dB``.
For the perturbation series the coefficients are written as
``a = c * a_tilde`` and ``b = sqrt(c) * b_tilde``; :class:`CoefficientPair`
carries ``(a_tilde, b_tilde, c)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidParameterError, NotErgodicError

Coefficient = Callable[[np.ndarray], np.ndarray]

DEFAULT_PROBE_POINTS = 512
ZERO_DIFFUSION_TOL = 1e-12


def _positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not (math.isfinite(value) and value > 0):
            raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")


def _volatility(sigma: float) -> None:
    # sigma = 0 is the deterministic reduction
    if not (math.isfinite(sigma) and sigma >= 0):
        raise InvalidParameterError(f"sigma must be finite and >= 0, got {sigma!r}")


@dataclass(frozen=True)
class CIRParams:
    """``dY = a (b - Y) dt + sigma sqrt(Y) dB``, ``Y_0 = y0``."""

    a: float
    b: float
    sigma: float
    y0: float

    def __post_init__(self):
        _positive(a=self.a, b=self.b, y0=self.y0)
        _volatility(self.sigma)

    @property
    def feller_ratio(self) -> float:
        if self.sigma == 0:
            return math.inf
        return 2.0 * self.a * self.b / self.sigma**2

    @property
    def is_ergodic(self) -> bool:
        return self.feller_ratio > 1.0

    def scaled(self, c: float) -> "CIRParams":
        """Effective process when (a, sigma) describe the unscaled coefficients.

        Returns the CIR process with drift ``c a (b - y)`` and diffusion
        ``sqrt(c) sigma sqrt(y)``; the Feller ratio is unchanged.
        """
        if not (0.0 < c < 1.0):
            raise InvalidParameterError(f"scale c must lie in (0, 1), got {c!r}")
        return CIRParams(self.a * c, self.b, self.sigma * math.sqrt(c), self.y0)


@dataclass(frozen=True)
class LogisticParams:
    """``dY = Y (a - b Y) dt + sigma Y dB``, ``Y_0 = y0``."""

    a: float
    b: float
    sigma: float
    y0: float

    def __post_init__(self):
        _positive(a=self.a, b=self.b, y0=self.y0)
        _volatility(self.sigma)

    @property
    def ergodicity_ratio(self) -> float:
        if self.sigma == 0:
            return math.inf
        return 2.0 * self.a / self.sigma**2

    @property
    def is_ergodic(self) -> bool:
        return self.ergodicity_ratio > 1.0

    def scaled(self, c: float) -> "LogisticParams":
        if not (0.0 < c < 1.0):
            raise InvalidParameterError(f"scale c must lie in (0, 1), got {c!r}")
        return LogisticParams(self.a * c, self.b * c, self.sigma * math.sqrt(c), self.y0)


@dataclass(frozen=True)
class GrayParams:
    """Additive white-noise perturbation ``beta dt -> beta dt + sigma dB``.

    ``sigma = sigma_tilde * sqrt(scale_c)`` is the effective noise amplitude.
    """

    beta: float
    gamma: float
    sigma_tilde: float
    scale_c: float

    def __post_init__(self):
        _positive(beta=self.beta, gamma=self.gamma)
        if not (math.isfinite(self.sigma_tilde) and self.sigma_tilde >= 0):
            raise InvalidParameterError(f"sigma_tilde must be >= 0, got {self.sigma_tilde!r}")
        if not (0.0 <= self.scale_c < 1.0):
            raise InvalidParameterError(f"scale_c must lie in [0, 1), got {self.scale_c!r}")

    @property
    def sigma(self) -> float:
        return self.sigma_tilde * math.sqrt(self.scale_c)


NamedModel = Union[CIRParams, LogisticParams]


@dataclass(frozen=True)
class CoefficientPair:
    """Unscaled drift/diffusion ``(a_tilde, b_tilde)`` and the scale ``c``.

    ``ergodic`` is True/False when known for a named model and None
    ("unverified") for user-supplied coefficients.
    """

    drift_tilde: Coefficient
    diff_tilde: Coefficient
    scale_c: float
    ergodic: Optional[bool] = None
    name: str = "generic"

    def __post_init__(self):
        if not (0.0 <= self.scale_c < 1.0):
            raise InvalidParameterError(f"scale_c must lie in [0, 1), got {self.scale_c!r}")

    @property
    def degenerate(self) -> bool:
        """True when the perturbation is switched off (c == 0)."""
        return self.scale_c == 0.0

    def drift(self, y):
        return self.scale_c * np.asarray(self.drift_tilde(y), dtype=float)

    def diffusion(self, y):
        return math.sqrt(self.scale_c) * np.asarray(self.diff_tilde(y), dtype=float)


def as_coefficient_pair(model: NamedModel, scale_c: float) -> CoefficientPair:
    """Split a named model's coefficients into ``c * a_tilde`` and ``sqrt(c) * b_tilde``.

    With ``scale_c == 0`` the unscaled coefficients are the model's own and the
    pair is flagged degenerate: its effective coefficients vanish.
    """
    if not (0.0 <= scale_c < 1.0):
        raise InvalidParameterError(f"scale_c must lie in [0, 1), got {scale_c!r}")
    ca = scale_c if scale_c > 0 else 1.0
    cb = math.sqrt(ca)
    a, b, sigma = model.a, model.b, model.sigma
    if isinstance(model, CIRParams):
        drift = lambda y: a * (b - np.asarray(y, dtype=float)) / ca
        diff = lambda y: sigma * np.sqrt(np.maximum(np.asarray(y, dtype=float), 0.0)) / cb
        name = "cir"
    elif isinstance(model, LogisticParams):
        drift = lambda y: np.asarray(y, dtype=float) * (a - b * np.asarray(y, dtype=float)) / ca
        diff = lambda y: sigma * np.asarray(y, dtype=float) / cb
        name = "logistic"
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")
    return CoefficientPair(drift, diff, scale_c, ergodic=model.is_ergodic, name=name)


@dataclass
class AssumptionReport:
    drift_nonnegative_on_grid: bool
    diffusion_nonnegative_on_grid: bool
    drift_at_zero_nonnegative: bool
    diffusion_vanishes_at_zero: bool
    ergodic: Optional[bool]
    notes: list[str] = field(default_factory=list)

    @property
    def ergodicity(self) -> str:
        return {True: "verified", False: "violated", None: "unverified"}[self.ergodic]

    @property
    def passed(self) -> bool:
        """Positivity-relevant conditions hold and ergodicity is not violated.

        Drift sign on the interior grid is reported but not required: the CIR
        drift ``a(b - y)`` is negative for ``y > b`` while the process stays
        nonnegative.
        """
        return (
            self.diffusion_nonnegative_on_grid
            and self.drift_at_zero_nonnegative
            and self.diffusion_vanishes_at_zero
            and self.ergodic is not False
        )


def default_probe_grid(n: int = DEFAULT_PROBE_POINTS) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def check_natural_assumptions(
    coeffs: CoefficientPair, probe_grid=None
) -> AssumptionReport:
    """Probe the coefficients for the conditions that keep ``Y`` nonnegative."""
    grid = default_probe_grid() if probe_grid is None else np.asarray(probe_grid, dtype=float)
    if grid.size == 0 or np.any((grid <= 0) | (grid >= 1)):
        raise InvalidParameterError("probe grid must be nonempty with values in (0, 1)")
    a = np.broadcast_to(coeffs.drift_tilde(grid), grid.shape)
    b = np.broadcast_to(coeffs.diff_tilde(grid), grid.shape)
    a0 = float(np.asarray(coeffs.drift_tilde(np.array([0.0])), dtype=float).ravel()[0])
    b0 = float(np.asarray(coeffs.diff_tilde(np.array([0.0])), dtype=float).ravel()[0])
    report = AssumptionReport(
        drift_nonnegative_on_grid=bool(np.all(a >= 0)),
        diffusion_nonnegative_on_grid=bool(np.all(b >= 0)),
        drift_at_zero_nonnegative=a0 >= 0,
        diffusion_vanishes_at_zero=abs(b0) <= ZERO_DIFFUSION_TOL,
        ergodic=coeffs.ergodic,
    )
    if not report.drift_nonnegative_on_grid:
        report.notes.append(f"drift negative at {int(np.sum(a < 0))} of {grid.size} probe points")
    if coeffs.degenerate:
        report.notes.append("scale c = 0: perturbation switched off")
    return report


def _require_ergodic(model: NamedModel) -> None:
    if isinstance(model, CIRParams):
        if not model.is_ergodic:
            raise NotErgodicError(
                f"CIR Feller condition 2ab/sigma^2 > 1 fails: {model.feller_ratio:.6g}"
            )
    elif isinstance(model, LogisticParams):
        if not model.is_ergodic:
            raise NotErgodicError(
                f"logistic condition 2a > sigma^2 fails: 2a={2 * model.a:.6g}, "
                f"sigma^2={model.sigma**2:.6g}"
            )
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")


@dataclass(frozen=True)
class StationaryLaw:
    """Gamma law with shape ``lam`` and rate ``omega``."""

    lam: float
    omega: float

    @property
    def mean(self) -> float:
        return self.lam / self.omega

    @property
    def variance(self) -> float:
        return self.lam / self.omega**2

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise InvalidParameterError("stationary density is defined for x > 0")
        log_norm = self.lam * math.log(self.omega) - math.lgamma(self.lam)
        return np.exp(log_norm + (self.lam - 1.0) * np.log(x) - self.omega * x)


def stationary_law(model: NamedModel) -> StationaryLaw:
    """Gamma invariant law; undefined (point mass) when sigma = 0."""
    _require_ergodic(model)
    if model.sigma == 0:
        raise InvalidParameterError("sigma = 0: the invariant law is a point mass")
    s2 = model.sigma**2
    if isinstance(model, CIRParams):
        return StationaryLaw(2.0 * model.a * model.b / s2, 2.0 * model.a / s2)
    return StationaryLaw(2.0 * model.a / s2 - 1.0, 2.0 * model.b / s2)


def stationary_mean(model: NamedModel) -> float:
    """Mean of ``Y`` under its invariant law: ``b`` (CIR), ``(2a - sigma^2)/(2b)`` (logistic)."""
    _require_ergodic(model)
    if isinstance(model, CIRParams):
        return model.b
    return (2.0 * model.a - model.sigma**2) / (2.0 * model.b)


def stationary_pdf(model: NamedModel, x):
    return stationary_law(model).pdf(x)


def cir_mean(t, params: CIRParams):
    """``E[Y_t] = y e^{-at} + b (1 - e^{-at})``; exactly ``b`` when ``y0 == b``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParameterError("t must be >= 0")
    if params.y0 == params.b:
        out = np.full_like(t, params.b)
    else:
        decay = np.exp(-params.a * t)
        out = params.y0 * decay + params.b * (1.0 - decay)
    return out if out.ndim else float(out)
