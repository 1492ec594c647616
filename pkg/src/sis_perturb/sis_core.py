"""Closed-form deterministic SIS dynamics.

With the population normalised to one, the susceptible fraction is
``S = 1 - I`` and the two-compartment system reduces to the logistic-type ODE

    dI/dt = I (1 - I) beta - gamma I.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameterError
from .quadrature import integrate_checked

# Switch to the beta == gamma formula when |beta-gamma| t < DEGENERACY_TOL (1 + beta t).
DEGENERACY_TOL = 1e-14
# Above this exponent the closed form is evaluated divided through by exp(z).
LARGE_EXPONENT = 30.0


def _check_rate(name: str, value: float, *, strictly_positive: bool = False) -> None:
    if not math.isfinite(value) or value < 0 or (strictly_positive and value == 0):
        bound = "> 0" if strictly_positive else ">= 0"
        raise InvalidParameterError(f"{name} must be finite and {bound}, got {value!r}")


@dataclass(frozen=True)
class SISParams:
    """Transmission rate, recovery rate and initial infected fraction."""

    beta: float
    gamma: float
    x0: float

    def __post_init__(self):
        _check_rate("beta", self.beta)
        _check_rate("gamma", self.gamma, strictly_positive=True)
        if not (0.0 < self.x0 < 1.0):
            raise InvalidParameterError(f"x0 must lie in (0, 1), got {self.x0!r}")

    @property
    def r0(self) -> float:
        return r0_deterministic(self.beta, self.gamma)


def r0_deterministic(beta: float, gamma: float) -> float:
    """Deterministic reproduction number beta/gamma."""
    _check_rate("beta", beta)
    _check_rate("gamma", gamma, strictly_positive=True)
    return beta / gamma


def deterministic_limit(beta: float, gamma: float) -> float:
    """Long-run infected fraction of the deterministic model."""
    if r0_deterministic(beta, gamma) <= 1.0:
        return 0.0
    return (beta - gamma) / beta


def _exprel(z):
    """(exp(z) - 1)/z, continuous at z = 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(safe) / safe)


def _flow(t, x, beta, gamma):
    """Unvalidated, broadcasting closed-form flow. Accepts x in [0, 1]."""
    t, x, beta = np.broadcast_arrays(
        np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(beta, dtype=float)
    )
    d = beta - gamma
    z = t * d
    degenerate = np.abs(z) < DEGENERACY_TOL * (1.0 + np.abs(beta) * t)
    large = z > LARGE_EXPONENT
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # I = x e^z / (1 + x beta t (e^z - 1)/z); no 0/0 at beta == gamma.
        zm = np.where(large | degenerate, 0.0, z)
        regular = x * np.exp(zm) / (1.0 + x * beta * t * _exprel(zm))
        # Divided through by e^z: I = x / (e^-z + x beta (1 - e^-z)/d).
        zl = np.where(large, z, 1.0)
        dl = np.where(large, d, 1.0)
        big = x / (np.exp(-zl) + x * beta * (-np.expm1(-zl)) / dl)
        limit = x / (1.0 + x * beta * t)
    out = np.where(degenerate, limit, np.where(large, big, regular))
    return out if out.ndim else float(out)


def flow(t, x, beta: float, gamma: float):
    """Infected fraction at time ``t`` of the deterministic SIS model.

    Vectorised over ``t`` and ``x``. Uses the analytic ``beta == gamma``
    limit ``x/(1 + x beta t)`` in the degenerate regime and an overflow-free
    rearrangement for large positive exponents.
    """
    _check_rate("beta", beta)
    _check_rate("gamma", gamma, strictly_positive=True)
    xa = np.asarray(x, dtype=float)
    if np.any(~((xa > 0.0) & (xa < 1.0))):
        raise InvalidParameterError("x must lie in (0, 1)")
    ta = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(ta)) or np.any(ta < 0):
        raise InvalidParameterError("t must be finite and >= 0")
    return _flow(t, x, beta, gamma)


def ode_rhs(x, beta_eff, gamma):
    """Right-hand side x(1-x) beta_eff - gamma x of the SIS ODE."""
    return x * (1.0 - x) * beta_eff - gamma * x


def integral_form(
    t: float,
    x: float,
    gamma: float,
    integrated_beta: Callable[[np.ndarray], np.ndarray],
    panels: int = 16,
    order: int = 8,
) -> float:
    """Infected fraction expressed through the time integral of beta.

    ``integrated_beta(s)`` must return the cumulative transmission
    ``int_0^s beta(r) dr`` (vectorised, zero at ``s = 0``). The inner time
    integral is computed by composite Gauss-Legendre quadrature and checked
    against a refined rule.
    """
    _check_rate("gamma", gamma, strictly_positive=True)
    if not (0.0 < x < 1.0):
        raise InvalidParameterError(f"x must lie in (0, 1), got {x!r}")
    if t < 0 or not math.isfinite(t):
        raise InvalidParameterError(f"t must be finite and >= 0, got {t!r}")
    if t == 0:
        return float(x)

    def growth(s):
        return np.exp(np.asarray(integrated_beta(s), dtype=float) - gamma * s)

    inner = integrate_checked(lambda s: gamma * growth(s), 0.0, t, panels, order)
    g_t = float(growth(np.array([t]))[0])
    return x * g_t / (1.0 + x * (g_t - 1.0 + inner))
