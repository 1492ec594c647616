"""Composite Gauss-Legendre rules and Richardson extrapolation."""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import QuadratureError


@lru_cache(maxsize=32)
def unit_rule(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on [0, 1].

    The interval is split into ``panels`` equal pieces, each carrying an
    ``order``-point Gauss-Legendre rule. Returned arrays are read-only.
    """
    if panels < 1 or order < 1:
        raise ValueError("panels and order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    left = np.arange(panels) / panels
    nodes = (left[:, None] + x[None, :] / panels).ravel()
    weights = np.tile(w / panels, panels)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    panels: int = 16,
    order: int = 8,
) -> float:
    """Integrate a vectorised ``f`` over [a, b]."""
    nodes, weights = unit_rule(panels, order)
    h = b - a
    return float(h * np.dot(weights, f(a + h * nodes)))


def integrate_checked(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    panels: int = 16,
    order: int = 8,
    rtol: float = 1e-10,
    atol: float = 1e-13,
) -> float:
    """Like :func:`integrate` but compares against a rule with twice the panels.

    Raises QuadratureError when the two estimates disagree beyond
    ``atol + rtol*|value|``.
    """
    coarse = integrate(f, a, b, panels, order)
    fine = integrate(f, a, b, 2 * panels, order)
    if abs(fine - coarse) > atol + rtol * abs(fine):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] not converged: {coarse!r} vs {fine!r} "
            f"(panels {panels} -> {2 * panels}, order {order})"
        )
    return fine


def richardson(coarse, fine, order: int = 2):
    """Eliminate the leading h**order error term from two step sizes h, h/2."""
    k = 2.0**order
    return (k * fine - coarse) / (k - 1.0)
