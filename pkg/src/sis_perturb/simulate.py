"""Seeded path simulation and Monte Carlo ensembles.

Every path owns a ``numpy.random.Generator`` seeded from ``(base_seed, index)``,
so a path is the same whether it is simulated alone or inside an ensemble
batch. Kernels advance a block of paths together, one time step at a time.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .diffusions import CIRParams, CoefficientPair, GrayParams, LogisticParams
from .errors import IntegratorError, InvalidParameterError
from .sis_core import SISParams, ode_rhs

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
BATCH_SIZE = 128  # fixed so reductions do not depend on the worker count
NORMAL_CHUNK = 4096
RANGE_TOL = 1e-12
MAX_HALVINGS = 20
THREADS_ENV = "SIS_PERTURB_THREADS"


def mix_seed(base_seed: int, index: int) -> int:
    """SplitMix64 finalizer applied to ``base_seed + (index + 1) * golden``."""
    z = (int(base_seed) + (int(index) + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def path_seeds(base_seed: int, n_paths: int, start: int = 0) -> list[int]:
    return [mix_seed(base_seed, i) for i in range(start, start + n_paths)]


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise InvalidParameterError(f"t_end must be > 0, got {self.t_end!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidParameterError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @classmethod
    def from_dt(cls, t_end: float, dt: float) -> "TimeGrid":
        return cls(t_end, max(1, int(round(t_end / dt))))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass
class SamplePath:
    grid: TimeGrid
    values: np.ndarray
    seed: Optional[int] = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()


@dataclass
class EnsembleStats:
    grid: TimeGrid
    mean: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray
    n_paths: int
    variance_defined: bool = True


class PathFactory(Protocol):
    grid: TimeGrid

    def __call__(self, seeds: Sequence[int]) -> np.ndarray: ...


class _Normals:
    """Standard normals for a block of per-path generators, drawn in time chunks."""

    def __init__(self, seeds: Sequence[int], n_steps: int):
        self.rngs = [np.random.default_rng(s) for s in seeds]
        self.n_steps = n_steps
        self._start = 0
        self._buf = np.empty((len(self.rngs), 0))

    def row(self, k: int) -> np.ndarray:
        if k - self._start >= self._buf.shape[1]:
            self._start = k
            count = min(NORMAL_CHUNK, self.n_steps - k)
            self._buf = np.stack([r.standard_normal(count) for r in self.rngs])
        return self._buf[:, k - self._start]


def _nonfinite(values: np.ndarray, step: int, seeds: Sequence[int], what: str) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise IntegratorError(f"{what}: non-finite state at step {step} (seed {seeds[i]})")


def _cir_block(params: CIRParams, grid: TimeGrid, seeds: Sequence[int]) -> np.ndarray:
    dt, sq = grid.dt, math.sqrt(grid.dt)
    z = _Normals(seeds, grid.n_steps)
    out = np.empty((len(seeds), grid.n_nodes))
    y = np.full(len(seeds), params.y0, dtype=float)
    out[:, 0] = y
    for k in range(grid.n_steps):
        yp = np.maximum(y, 0.0)
        y = y + params.a * (params.b - yp) * dt + params.sigma * np.sqrt(yp) * sq * z.row(k)
        _nonfinite(y, k + 1, seeds, "CIR")
        out[:, k + 1] = np.maximum(y, 0.0)
    return out


def _logistic_block(params: LogisticParams, grid: TimeGrid, seeds: Sequence[int]) -> np.ndarray:
    dt, sq = grid.dt, math.sqrt(grid.dt)
    z = _Normals(seeds, grid.n_steps)
    out = np.empty((len(seeds), grid.n_nodes))
    log_y = np.full(len(seeds), math.log(params.y0))
    out[:, 0] = params.y0
    drift0 = params.a - 0.5 * params.sigma**2
    for k in range(grid.n_steps):
        log_y = log_y + (drift0 - params.b * np.exp(log_y)) * dt + params.sigma * sq * z.row(k)
        _nonfinite(log_y, k + 1, seeds, "logistic")
        out[:, k + 1] = np.exp(log_y)
    return out


def _generic_block(coeffs: CoefficientPair, y0: float, grid: TimeGrid, seeds: Sequence[int]) -> np.ndarray:
    dt, sq = grid.dt, math.sqrt(grid.dt)
    z = _Normals(seeds, grid.n_steps)
    out = np.empty((len(seeds), grid.n_nodes))
    y = np.full(len(seeds), float(y0))
    out[:, 0] = y
    for k in range(grid.n_steps):
        yp = np.maximum(y, 0.0)
        y = y + coeffs.drift(yp) * dt + coeffs.diffusion(yp) * sq * z.row(k)
        _nonfinite(y, k + 1, seeds, "generic diffusion")
        out[:, k + 1] = np.maximum(y, 0.0)
    return out


def _rk4_step(x, beta_eff, gamma, dt):
    k1 = ode_rhs(x, beta_eff, gamma)
    k2 = ode_rhs(x + 0.5 * dt * k1, beta_eff, gamma)
    k3 = ode_rhs(x + 0.5 * dt * k2, beta_eff, gamma)
    k4 = ode_rhs(x + dt * k3, beta_eff, gamma)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rode_block(sis: SISParams, y_values: np.ndarray, grid: TimeGrid, seeds=None) -> np.ndarray:
    y_values = np.atleast_2d(y_values)
    if y_values.shape[1] != grid.n_nodes:
        raise InvalidParameterError("perturbation path is not on the simulation grid")
    if np.any(y_values < 0):
        raise InvalidParameterError("perturbation path must be nonnegative")
    dt = grid.dt
    out = np.empty_like(y_values, dtype=float)
    x = np.full(y_values.shape[0], sis.x0)
    out[:, 0] = x
    for k in range(grid.n_steps):
        x = _rk4_step(x, y_values[:, k], sis.gamma, dt)
        bad = ~((x >= -RANGE_TOL) & (x < 1.0 + RANGE_TOL))
        if np.any(bad):
            i = int(np.argmax(bad))
            who = f" (seed {seeds[i]})" if seeds is not None else ""
            raise IntegratorError(f"SIS state {x[i]!r} left [0, 1) at step {k + 1}{who}")
        out[:, k + 1] = x
    return out


def _gray_drift(x, p: GrayParams):
    return p.beta * x * (1.0 - x) - p.gamma * x


def _gray_refine(x: float, dt: float, db: float, p: GrayParams, rng, depth: int) -> float:
    """Advance one rejected step by splitting it with a Brownian bridge."""
    if depth > MAX_HALVINGS:
        raise IntegratorError(f"Gray step rejected after {MAX_HALVINGS} halvings")
    h = 0.5 * dt
    db1 = 0.5 * db + math.sqrt(0.25 * dt) * rng.standard_normal()
    db2 = db - db1
    for inc in (db1, db2):
        trial = x + _gray_drift(x, p) * h + p.sigma * x * (1.0 - x) * inc
        if 0.0 <= trial < 1.0:
            x = trial
        else:
            x = _gray_refine(x, h, inc, p, rng, depth + 1)
    return x


def _gray_block(p: GrayParams, x0: float, grid: TimeGrid, seeds: Sequence[int]) -> np.ndarray:
    dt, sq = grid.dt, math.sqrt(grid.dt)
    z = _Normals(seeds, grid.n_steps)
    bridges = [np.random.default_rng(mix_seed(s, 0xB1D6E)) for s in seeds]
    out = np.empty((len(seeds), grid.n_nodes))
    x = np.full(len(seeds), float(x0))
    out[:, 0] = x
    for k in range(grid.n_steps):
        db = sq * z.row(k)
        trial = x + _gray_drift(x, p) * dt + p.sigma * x * (1.0 - x) * db
        rejected = np.flatnonzero(~((trial >= 0.0) & (trial < 1.0)))
        for i in rejected:
            try:
                trial[i] = _gray_refine(x[i], dt, db[i], p, bridges[i], 1)
            except IntegratorError as exc:
                raise IntegratorError(f"{exc} at step {k + 1} (seed {seeds[i]})") from None
        x = trial
        out[:, k + 1] = x
    return out


@dataclass
class CIRPaths:
    params: CIRParams
    grid: TimeGrid

    def __call__(self, seeds):
        return _cir_block(self.params, self.grid, seeds)


@dataclass
class LogisticPaths:
    params: LogisticParams
    grid: TimeGrid

    def __call__(self, seeds):
        return _logistic_block(self.params, self.grid, seeds)


@dataclass
class GenericPaths:
    coeffs: CoefficientPair
    y0: float
    grid: TimeGrid

    def __call__(self, seeds):
        return _generic_block(self.coeffs, self.y0, self.grid, seeds)


@dataclass
class PerturbedSISPaths:
    """Infected fraction driven by perturbation paths from ``driver``."""

    sis: SISParams
    driver: PathFactory

    @property
    def grid(self) -> TimeGrid:
        return self.driver.grid

    def __call__(self, seeds):
        return _rode_block(self.sis, self.driver(seeds), self.grid, seeds)


@dataclass
class GrayPaths:
    params: GrayParams
    x0: float
    grid: TimeGrid

    def __call__(self, seeds):
        return _gray_block(self.params, self.x0, self.grid, seeds)


@dataclass
class Observed:
    """Apply ``fn`` to every value produced by ``inner`` (e.g. squares)."""

    inner: PathFactory
    fn: Callable[[np.ndarray], np.ndarray]

    @property
    def grid(self) -> TimeGrid:
        return self.inner.grid

    def __call__(self, seeds):
        return self.fn(self.inner(seeds))


def _warn_cir(params: CIRParams, grid: TimeGrid) -> None:
    if not params.is_ergodic:
        warnings.warn(f"Feller ratio {params.feller_ratio:.4g} <= 1", RuntimeWarning, stacklevel=3)
    if grid.dt * params.a >= 1:
        raise InvalidParameterError("time step too large: dt * a must be < 1")


def simulate_cir(params: CIRParams, grid: TimeGrid, seed: int) -> SamplePath:
    """Full-truncation Euler-Maruyama path of the CIR process."""
    _warn_cir(params, grid)
    return SamplePath(grid, _cir_block(params, grid, [seed])[0], seed)


def simulate_logistic(params: LogisticParams, grid: TimeGrid, seed: int) -> SamplePath:
    """Euler-Maruyama on ``log Y`` for the stochastic logistic equation."""
    if not params.is_ergodic:
        warnings.warn("2a <= sigma^2: no stationary law", RuntimeWarning, stacklevel=2)
    return SamplePath(grid, _logistic_block(params, grid, [seed])[0], seed)


def simulate_generic(coeffs: CoefficientPair, y0: float, grid: TimeGrid, seed: int) -> SamplePath:
    return SamplePath(grid, _generic_block(coeffs, y0, grid, [seed])[0], seed)


def simulate_perturbed_sis(sis: SISParams, y_path: SamplePath, grid: Optional[TimeGrid] = None) -> SamplePath:
    """Integrate the SIS random ODE with ``Y`` frozen on each step (RK4)."""
    grid = y_path.grid if grid is None else grid
    if grid != y_path.grid:
        raise InvalidParameterError("perturbation path is not on the simulation grid")
    values = _rode_block(sis, y_path.values[None, :], grid)[0]
    return SamplePath(grid, values, y_path.seed)


def simulate_gray_sis(params: GrayParams, x0: float, grid: TimeGrid, seed: int) -> SamplePath:
    """Euler-Maruyama for the Gray et al. SDE with boundary step halving."""
    if not (0.0 <= x0 < 1.0):
        raise InvalidParameterError(f"x0 must lie in [0, 1), got {x0!r}")
    return SamplePath(grid, _gray_block(params, x0, grid, [seed])[0], seed)


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return n


def _batches(base_seed: int, n_paths: int):
    for start in range(0, n_paths, BATCH_SIZE):
        yield path_seeds(base_seed, min(BATCH_SIZE, n_paths - start), start)


def _map_batches(fn, base_seed: int, n_paths: int, workers: Optional[int]):
    workers = worker_count() if workers is None else workers
    batches = list(_batches(base_seed, n_paths))
    if workers <= 1 or len(batches) == 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, batches))  # map keeps batch order


def ensemble_paths(factory: PathFactory, n_paths: int, base_seed: int, workers: Optional[int] = None) -> np.ndarray:
    """All paths as an ``(n_paths, n_nodes)`` array, rows in path-index order."""
    if n_paths < 1:
        raise InvalidParameterError("n_paths must be >= 1")
    return np.concatenate(_map_batches(factory, base_seed, n_paths, workers), axis=0)


def ensemble(factory: PathFactory, n_paths: int, base_seed: int, workers: Optional[int] = None) -> EnsembleStats:
    """Pointwise mean, unbiased variance and standard error over seeded paths.

    Batch partial statistics are merged in batch order, so the result is
    bit-identical for any worker count.
    """
    if n_paths < 1:
        raise InvalidParameterError("n_paths must be >= 1")

    def reduce(seeds):
        block = factory(seeds)
        shifted = block - block[0]  # identical paths give exactly zero spread
        offset = shifted.mean(axis=0)
        return len(seeds), block[0] + offset, ((shifted - offset) ** 2).sum(axis=0)

    count, mean, m2 = 0, None, None
    for n_b, mean_b, m2_b in _map_batches(reduce, base_seed, n_paths, workers):
        if mean is None:
            count, mean, m2 = n_b, mean_b, m2_b
            continue
        total = count + n_b
        delta = mean_b - mean
        mean = mean + delta * (n_b / total)
        m2 = m2 + m2_b + delta**2 * (count * n_b / total)
        count = total
    if count < 2:
        zero = np.zeros_like(mean)
        return EnsembleStats(factory.grid, mean, zero, zero.copy(), count, variance_defined=False)
    variance = np.maximum(m2 / (count - 1), 0.0)
    return EnsembleStats(factory.grid, mean, variance, np.sqrt(variance / count), count)
