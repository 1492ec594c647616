"""Perturbation-series corrections to moments of the infected fraction.

Writing ``u(t, x, y) = E[phi(I_t) | I_0 = x, Y_0 = y]`` as ``sum_n u_n c^n``,
the zeroth term is ``phi`` composed with the deterministic flow and each
further term solves a transport equation whose source is the generator of
the unscaled perturbation applied to the previous term. Along the
characteristic ``X_s = I^D_{t-s}(x, y)``:

    u_n(t, x, y) = int_0^t [ 1/2 b~(y)^2 d2/dy2 + a~(y) d/dy ] u_{n-1}(s, X_s, y) ds

The y-derivatives act on ``u_{n-1}(s, X, y)`` at fixed ``X`` and are taken
by central differences; the time integral uses composite Gauss-Legendre.
The additive-noise model of Gray et al. has the analogous recursion in ``x``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .diffusions import CoefficientPair, GrayParams
from .errors import ConvergenceWarning, InvalidParameterError
from .quadrature import richardson, unit_rule
from .sis_core import _flow, flow

MAX_ORDER = 2


@dataclass(frozen=True)
class Observable:
    phi: Callable[[np.ndarray], np.ndarray]
    name: str

    def __call__(self, x):
        return self.phi(x)


IDENTITY = Observable(lambda x: x, "identity")
SQUARE = Observable(lambda x: x * x, "square")


@dataclass(frozen=True)
class CorrectionConfig:
    """Numerical settings of the correction engine.

    ``derivative_scope`` selects what the y-derivative acts on:
    ``"characteristic"`` holds the characteristic point fixed (the Duhamel
    source term); ``"total"`` also moves the characteristic with y and is kept
    only for comparison. ``gray_weight`` picks the x-diffusion weight of the
    additive-noise generator: ``"sde"`` is ``x^2 (1-x)^2``, ``"printed"`` is
    ``x (1-x)``.
    """

    panels: int = 16
    nodes_per_panel: int = 8
    fd_step_y: float = 1e-4
    fd_step_x: float = 1e-4
    max_order: int = 1
    richardson: bool = False
    check_convergence: bool = False
    plateau_rtol: float = 1e-4
    derivative_scope: str = "characteristic"
    gray_weight: str = "sde"

    def __post_init__(self):
        if self.quad_nodes < 8:
            raise InvalidParameterError("at least 8 quadrature nodes are required")
        for name in ("fd_step_y", "fd_step_x"):
            h = getattr(self, name)
            if not (1e-8 < h < 1e-1):
                raise InvalidParameterError(f"{name} must lie in (1e-8, 1e-1), got {h!r}")
        if not (0 <= self.max_order <= MAX_ORDER):
            raise InvalidParameterError(f"max_order must be in [0, {MAX_ORDER}]")
        if self.derivative_scope not in ("characteristic", "total"):
            raise InvalidParameterError(f"unknown derivative_scope {self.derivative_scope!r}")
        if self.gray_weight not in ("sde", "printed"):
            raise InvalidParameterError(f"unknown gray_weight {self.gray_weight!r}")

    @property
    def quad_nodes(self) -> int:
        return self.panels * self.nodes_per_panel

    def refined(self) -> "CorrectionConfig":
        """Twice the panels and half the difference steps."""
        return replace(
            self,
            panels=2 * self.panels,
            fd_step_y=self.fd_step_y / 2,
            fd_step_x=self.fd_step_x / 2,
            check_convergence=False,
        )


DEFAULT_CONFIG = CorrectionConfig()


@dataclass
class SeriesEval:
    terms: list
    scale_c: float
    diagnostics: dict = field(default_factory=dict)

    def value_at(self, c: float):
        return sum(term * c**n for n, term in enumerate(self.terms))

    @property
    def value(self):
        return self.value_at(self.scale_c)


def _arr(v):
    return np.asarray(v, dtype=float)


def _derivatives(f, z, h, cfg: CorrectionConfig, need_first: bool = True):
    """Central first and second differences of ``f`` at ``z`` with step ``h``."""

    def plain(step):
        fp, f0, fm = f(z + step), f(z), f(z - step)
        d1 = (fp - fm) / (2.0 * step) if need_first else 0.0
        d2 = (fp - 2.0 * f0 + fm) / step**2
        return d1, d2

    d1, d2 = plain(h)
    if cfg.richardson:
        e1, e2 = plain(0.5 * h)
        d1 = richardson(d1, e1) if need_first else 0.0
        d2 = richardson(d2, e2)
    return d1, d2


def _u(n, t, x, y, phi, coeffs: CoefficientPair, gamma, cfg):
    if n == 0:
        return phi(_flow(t, x, y, gamma))
    nodes, weights = unit_rule(cfg.panels, cfg.nodes_per_panel)
    t_, x_, y_ = (_arr(v)[..., None] for v in (t, x, y))
    s = t_ * nodes
    h = cfg.fd_step_y * np.maximum(1.0, np.abs(y_))
    if cfg.derivative_scope == "characteristic":
        xs = _flow(t_ - s, x_, y_, gamma)
        f = lambda yy: _u(n - 1, s, xs, yy, phi, coeffs, gamma, cfg)
    else:
        f = lambda yy: _u(n - 1, s, _flow(t_ - s, x_, yy, gamma), yy, phi, coeffs, gamma, cfg)
    d1, d2 = _derivatives(f, y_, h, cfg)
    source = 0.5 * _arr(coeffs.diff_tilde(y_)) ** 2 * d2 + _arr(coeffs.drift_tilde(y_)) * d1
    return np.sum(t_ * weights * source, axis=-1)


def _gray_weight(x, cfg):
    w = x * (1.0 - x)
    return w * w if cfg.gray_weight == "sde" else w


def _g(n, t, x, phi, p: GrayParams, cfg):
    if n == 0:
        return phi(_flow(t, x, p.beta, p.gamma))
    nodes, weights = unit_rule(cfg.panels, cfg.nodes_per_panel)
    t_, x_ = (_arr(v)[..., None] for v in (t, x))
    s = t_ * nodes
    xs = _flow(t_ - s, x_, p.beta, p.gamma)
    # Relative step keeps the stencil inside (0, 1).
    h = cfg.fd_step_x * np.minimum(xs, 1.0 - xs)
    ok = h > 0
    h_safe = np.where(ok, h, 1.0)
    f = lambda xx: _g(n - 1, s, xx, phi, p, cfg)
    _, d2 = _derivatives(f, xs, h_safe, cfg, need_first=False)
    source = np.where(ok, 0.5 * p.sigma_tilde**2 * _gray_weight(xs, cfg) * d2, 0.0)
    return np.sum(t_ * weights * source, axis=-1)


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def _validate_point(t, x):
    t = _arr(t)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidParameterError("t must be finite and >= 0")
    x = _arr(x)
    if np.any(~((x > 0) & (x < 1))):
        raise InvalidParameterError("x must lie in (0, 1)")


def _check(value, refine: Callable, cfg: CorrectionConfig, label: str, diagnostics: Optional[dict] = None):
    if not cfg.check_convergence:
        return
    fine = refine(cfg.refined())
    delta = np.max(np.abs(np.asarray(fine) - np.asarray(value)))
    scale = max(float(np.max(np.abs(value))), 1e-12)
    if diagnostics is not None:
        diagnostics[label] = delta / scale
    if delta > cfg.plateau_rtol * scale:
        warnings.warn(
            f"{label}: refined evaluation moved by {delta:.3g} (relative {delta / scale:.3g})",
            ConvergenceWarning,
            stacklevel=3,
        )


def u0(t, x, y, phi: Callable, gamma: float):
    """Zeroth-order term ``phi(I^D_t(x, y))``: the mean-field value."""
    return _scalar(phi(flow(t, x, y, gamma)))


def u_n(n: int, t, x, y, phi: Callable, coeffs: CoefficientPair, gamma: float, cfg: CorrectionConfig = DEFAULT_CONFIG):
    """Order-``n`` correction for the natural perturbation (vectorised over t, x)."""
    if n < 0 or n > cfg.max_order:
        raise InvalidParameterError(f"order {n} outside [0, {cfg.max_order}]")
    _validate_point(t, x)
    if y < 0:
        raise InvalidParameterError("y must be >= 0")
    value = _u(n, t, x, y, phi, coeffs, gamma, cfg)
    _check(value, lambda c: _u(n, t, x, y, phi, coeffs, gamma, c), cfg, f"u_{n}")
    return _scalar(value)


def g_n(n: int, t, x, phi: Callable, gray: GrayParams, cfg: CorrectionConfig = DEFAULT_CONFIG):
    """Order-``n`` correction for the additive-noise perturbation."""
    if n < 0 or n > cfg.max_order:
        raise InvalidParameterError(f"order {n} outside [0, {cfg.max_order}]")
    _validate_point(t, x)
    value = _g(n, t, x, phi, gray, cfg)
    _check(value, lambda c: _g(n, t, x, phi, gray, c), cfg, f"g_{n}")
    return _scalar(value)


def expectation_series(
    t,
    x,
    phi: Callable,
    model: Union[CoefficientPair, GrayParams],
    *,
    y: Optional[float] = None,
    gamma: Optional[float] = None,
    cfg: CorrectionConfig = DEFAULT_CONFIG,
    c: Optional[float] = None,
) -> SeriesEval:
    """Terms ``0..cfg.max_order`` and their sum in powers of ``c``.

    For a :class:`CoefficientPair` both ``y`` and ``gamma`` are required; for
    :class:`GrayParams` the transmission and recovery rates come from the model.
    """
    c = model.scale_c if c is None else c
    if not (0.0 <= c < 1.0):
        raise InvalidParameterError(f"c must lie in [0, 1), got {c!r}")
    _validate_point(t, x)
    diagnostics: dict = {}
    if isinstance(model, GrayParams):
        fn = lambda n, cf: _g(n, t, x, phi, model, cf)
        label = "g"
    else:
        if y is None or gamma is None:
            raise InvalidParameterError("y and gamma are required for a coefficient pair")
        fn = lambda n, cf: _u(n, t, x, y, phi, model, gamma, cf)
        label = "u"
    terms = []
    for n in range(cfg.max_order + 1):
        term = fn(n, cfg)
        if n > 0:
            _check(term, lambda cf, n=n: fn(n, cf), cfg, f"{label}_{n}", diagnostics)
        terms.append(_scalar(term))
    return SeriesEval(terms, c, diagnostics)


def variance_first_order(t, x, y, coeffs: CoefficientPair, gamma: float, cfg: CorrectionConfig = DEFAULT_CONFIG, c: Optional[float] = None):
    """First-order variance ``c (u1[x^2] - 2 u0[x] u1[x])``."""
    c = coeffs.scale_c if c is None else c
    if not (0.0 <= c < 1.0):
        raise InvalidParameterError(f"c must lie in [0, 1), got {c!r}")
    _validate_point(t, x)
    first = _u(0, t, x, y, IDENTITY, coeffs, gamma, cfg)
    u1_id = _u(1, t, x, y, IDENTITY, coeffs, gamma, cfg)
    u1_sq = _u(1, t, x, y, SQUARE, coeffs, gamma, cfg)
    return _scalar(c * (u1_sq - 2.0 * first * u1_id))


@dataclass
class ComparisonTable:
    t: np.ndarray
    u0: np.ndarray
    g0: np.ndarray
    cir_first_order: np.ndarray
    gray_first_order: np.ndarray

    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.cir_first_order - self.gray_first_order)))


def compare_perturbations(
    times,
    x: float,
    coeffs: CoefficientPair,
    gray: GrayParams,
    cfg: CorrectionConfig = DEFAULT_CONFIG,
    phi: Callable = IDENTITY,
) -> ComparisonTable:
    """First-order expectations under a mean-matched natural and additive perturbation.

    The natural perturbation is started at ``y = gray.beta`` (its constant
    mean), so both share the zeroth-order term.
    """
    if coeffs.scale_c != gray.scale_c:
        raise InvalidParameterError("both perturbations must use the same scale c")
    times = _arr(times)
    _validate_point(times, x)
    c, beta = gray.scale_c, gray.beta
    u_0 = _u(0, times, x, beta, phi, coeffs, gray.gamma, cfg)
    g_0 = _g(0, times, x, phi, gray, cfg)
    cir = u_0 + c * _u(1, times, x, beta, phi, coeffs, gray.gamma, cfg)
    gry = g_0 + c * _g(1, times, x, phi, gray, cfg)
    return ComparisonTable(times, u_0, g_0, cir, gry)
