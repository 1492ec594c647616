"""Scenario files: flat INI sections of scalar parameters.

Example::

    [scenario]
    model = cir
    coefficients = unscaled

    [sis]
    beta = 0.2
    gamma = 0.1
    x0 = 0.3

    [cir]
    a = 0.02
    b = 0.2
    sigma = 0.032
    y0 = 0.2

    [grid]
    t_end = 42
    dt = 0.01

    [ensemble]
    n_paths = 1500
    base_seed = 7

    [corrections]
    c = 0.1
"""
from __future__ import annotations

import configparser
import io
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .corrections import CorrectionConfig
from .diffusions import CIRParams, CoefficientPair, GrayParams, LogisticParams, as_coefficient_pair
from .errors import InvalidParameterError
from .simulate import CIRPaths, GenericPaths, GrayPaths, LogisticPaths, PerturbedSISPaths, TimeGrid
from .sis_core import SISParams

MODELS = ("cir", "logistic", "gray", "generic")
COEFFICIENT_MODES = ("effective", "unscaled")
_EXPR_NAMESPACE = {
    "np": np, "sqrt": np.sqrt, "exp": np.exp, "log": np.log, "abs": np.abs,
    "maximum": np.maximum, "minimum": np.minimum, "pi": math.pi,
}


class ScenarioError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


@dataclass(frozen=True)
class GenericSpec:
    """User-supplied unscaled coefficients as numpy expressions in ``y``."""

    drift_tilde: str
    diffusion_tilde: str
    y0: float

    def __post_init__(self):
        self.coefficient_pair(0.1)

    def _compile(self, expr: str, label: str):
        where = f"generic.{label}"
        try:
            code = compile(expr, f"<{label}>", "eval")
        except SyntaxError as exc:
            raise ScenarioError(f"{where}: {exc.msg}", field=where) from None
        if any("__" in name for name in code.co_names):
            raise ScenarioError(f"{where}: dunder names are not allowed", field=where)

        def fn(y):
            y = np.asarray(y, dtype=float)
            return np.broadcast_to(eval(code, {"__builtins__": {}}, {**_EXPR_NAMESPACE, "y": y}), y.shape)

        try:
            probe = fn(np.array([0.0, 0.5, 1.0]))
        except Exception as exc:
            raise ScenarioError(f"{where}: cannot evaluate {expr!r} ({exc})", field=where) from None
        if not np.all(np.isfinite(probe)):
            raise ScenarioError(f"{where}: {expr!r} is not finite on [0, 1]", field=where)
        return fn

    def coefficient_pair(self, c: float) -> CoefficientPair:
        return CoefficientPair(
            self._compile(self.drift_tilde, "drift_tilde"),
            self._compile(self.diffusion_tilde, "diffusion_tilde"),
            c,
            ergodic=None,
            name="generic",
        )


@dataclass(frozen=True)
class Scenario:
    model: str
    sis: SISParams
    grid: TimeGrid
    n_paths: int = 1500
    base_seed: int = 0
    c: float = 0.1
    correction: CorrectionConfig = field(default_factory=CorrectionConfig)
    coefficients: str = "effective"
    cir: Optional[CIRParams] = None
    logistic: Optional[LogisticParams] = None
    gray_sigma_tilde: Optional[float] = None
    generic: Optional[GenericSpec] = None
    output_stride: int = 1
    series_nodes: int = 51
    out_dir: str = "out"
    name: str = ""

    def __post_init__(self):
        if self.model not in MODELS:
            raise ScenarioError(f"scenario.model must be one of {MODELS}, got {self.model!r}", "scenario.model")
        if self.coefficients not in COEFFICIENT_MODES:
            raise ScenarioError(f"scenario.coefficients must be one of {COEFFICIENT_MODES}", "scenario.coefficients")
        section = {"cir": self.cir, "logistic": self.logistic, "gray": self.gray_sigma_tilde, "generic": self.generic}[self.model]
        if section is None:
            raise ScenarioError(f"model={self.model} requires a [{self.model}] section", self.model)
        if not (0.0 <= self.c < 1.0):
            raise ScenarioError(f"corrections.c must lie in [0, 1), got {self.c!r}", "corrections.c")
        if self.coefficients == "unscaled" and self.c == 0.0 and self.model in ("cir", "logistic"):
            raise ScenarioError("unscaled coefficients need corrections.c > 0", "corrections.c")
        if self.n_paths < 1:
            raise ScenarioError("ensemble.n_paths must be >= 1", "ensemble.n_paths")
        if not (0 <= self.base_seed < 2**64):
            raise ScenarioError("ensemble.base_seed must be an unsigned 64-bit integer", "ensemble.base_seed")
        if self.output_stride < 1 or self.series_nodes < 2:
            raise ScenarioError("output.stride must be >= 1 and output.series_nodes >= 2", "output")

    @property
    def natural(self):
        """The named perturbation as given in the file."""
        return self.cir if self.model == "cir" else self.logistic if self.model == "logistic" else None

    def effective_model(self):
        """The named perturbation actually simulated."""
        model = self.natural
        if model is None:
            return None
        return model.scaled(self.c) if self.coefficients == "unscaled" else model

    def coefficient_pair(self) -> CoefficientPair:
        if self.model == "generic":
            return self.generic.coefficient_pair(self.c)
        if self.model == "gray":
            raise ScenarioError("gray model has no coefficient pair", "scenario.model")
        return as_coefficient_pair(self.effective_model(), self.c)

    def initial_perturbation(self) -> float:
        if self.model == "generic":
            return self.generic.y0
        if self.model == "gray":
            return self.sis.beta
        return self.natural.y0

    def gray_params(self) -> GrayParams:
        sigma_tilde = self.gray_sigma_tilde
        if sigma_tilde is None:
            raise ScenarioError("a [gray] section is required", "gray")
        return GrayParams(self.sis.beta, self.sis.gamma, sigma_tilde, self.c)

    def perturbation_factory(self):
        if self.model == "cir":
            return CIRPaths(self.effective_model(), self.grid)
        if self.model == "logistic":
            return LogisticPaths(self.effective_model(), self.grid)
        if self.model == "generic":
            return GenericPaths(self.coefficient_pair(), self.generic.y0, self.grid)
        return None

    def infected_factory(self):
        if self.model == "gray":
            return GrayPaths(self.gray_params(), self.sis.x0, self.grid)
        return PerturbedSISPaths(self.sis, self.perturbation_factory())

    # -- serialisation -------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["scenario"] = {"model": self.model, "coefficients": self.coefficients, "name": self.name}
        cp["sis"] = {"beta": repr(self.sis.beta), "gamma": repr(self.sis.gamma), "x0": repr(self.sis.x0)}
        for key, params in (("cir", self.cir), ("logistic", self.logistic)):
            if params is not None:
                cp[key] = {f.name: repr(getattr(params, f.name)) for f in fields(params)}
        if self.gray_sigma_tilde is not None:
            cp["gray"] = {"sigma_tilde": repr(self.gray_sigma_tilde)}
        if self.generic is not None:
            cp["generic"] = {
                "drift_tilde": self.generic.drift_tilde,
                "diffusion_tilde": self.generic.diffusion_tilde,
                "y0": repr(self.generic.y0),
            }
        cp["grid"] = {"t_end": repr(self.grid.t_end), "n_steps": str(self.grid.n_steps)}
        cp["ensemble"] = {"n_paths": str(self.n_paths), "base_seed": str(self.base_seed)}
        corr = {"c": repr(self.c)}
        for f in fields(CorrectionConfig):
            value = getattr(self.correction, f.name)
            corr[f.name] = repr(value) if isinstance(value, float) else str(value)
        cp["corrections"] = corr
        cp["output"] = {"dir": self.out_dir, "stride": str(self.output_stride), "series_nodes": str(self.series_nodes)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_dict(self) -> dict:
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(self.to_ini())
        return {s: dict(cp[s]) for s in cp.sections()}


def _get(cp, section, key, conv, default=None, required=False):
    where = f"{section}.{key}"
    if not cp.has_section(section) or not cp.has_option(section, key):
        if required:
            raise ScenarioError(f"missing required field {where}", where)
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError:
        raise ScenarioError(f"{where}: cannot parse {raw!r}", where) from None


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _section_params(cp, section, cls):
    if not cp.has_section(section):
        return None
    values = {f.name: _get(cp, section, f.name, float, required=True) for f in fields(cls)}
    try:
        return cls(**values)
    except InvalidParameterError as exc:
        raise ScenarioError(f"[{section}] {exc}", section) from None


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column 1: expected a [section] header", line=exc.lineno, column=1) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ScenarioError(f"parse error at line {line}, column 1: {exc.errors[0][1] if exc.errors else ''}", line=line, column=1) from None
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ScenarioError(f"parse error at line {line}, column 1: {exc.message}", line=line, column=1) from None

    model = _get(cp, "scenario", "model", str, required=True).strip()
    try:
        sis = SISParams(
            _get(cp, "sis", "beta", float, required=True),
            _get(cp, "sis", "gamma", float, required=True),
            _get(cp, "sis", "x0", float, required=True),
        )
    except InvalidParameterError as exc:
        raise ScenarioError(f"[sis] {exc}", "sis") from None

    t_end = _get(cp, "grid", "t_end", float, required=True)
    n_steps = _get(cp, "grid", "n_steps", int)
    dt = _get(cp, "grid", "dt", float)
    try:
        if n_steps is not None:
            grid = TimeGrid(t_end, n_steps)
        elif dt is not None:
            if not dt > 0:
                raise InvalidParameterError("dt must be > 0")
            grid = TimeGrid.from_dt(t_end, dt)
        else:
            raise ScenarioError("grid needs n_steps or dt", "grid.dt")
    except InvalidParameterError as exc:
        raise ScenarioError(f"[grid] {exc}", "grid") from None

    corr_kwargs = {}
    for f in fields(CorrectionConfig):
        conv = {"int": int, "float": float, "bool": _bool, "str": str}[f.type if isinstance(f.type, str) else f.type.__name__]
        value = _get(cp, "corrections", f.name, conv)
        if value is not None:
            corr_kwargs[f.name] = value
    try:
        correction = CorrectionConfig(**corr_kwargs)
    except InvalidParameterError as exc:
        raise ScenarioError(f"[corrections] {exc}", "corrections") from None

    generic = None
    if cp.has_section("generic"):
        generic = GenericSpec(
            _get(cp, "generic", "drift_tilde", str, required=True),
            _get(cp, "generic", "diffusion_tilde", str, required=True),
            _get(cp, "generic", "y0", float, required=True),
        )

    return Scenario(
        model=model,
        sis=sis,
        grid=grid,
        n_paths=_get(cp, "ensemble", "n_paths", int, 1500),
        base_seed=_get(cp, "ensemble", "base_seed", int, 0),
        c=_get(cp, "corrections", "c", float, 0.1),
        correction=correction,
        coefficients=_get(cp, "scenario", "coefficients", str, "effective").strip(),
        cir=_section_params(cp, "cir", CIRParams),
        logistic=_section_params(cp, "logistic", LogisticParams),
        gray_sigma_tilde=_get(cp, "gray", "sigma_tilde", float),
        generic=generic,
        output_stride=_get(cp, "output", "stride", int, 1),
        series_nodes=_get(cp, "output", "series_nodes", int, 51),
        out_dir=_get(cp, "output", "dir", str, "out"),
        name=_get(cp, "scenario", "name", str, ""),
    )


def load_scenario(path) -> Scenario:
    """Read an INI scenario, or the ``scenario_ini`` entry of a metadata JSON file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            text = json.loads(text)["scenario_ini"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ScenarioError(f"{path}: not a metadata file ({exc})") from None
    return parse_scenario(text)


def with_overrides(scenario: Scenario, seed=None, paths=None, dt=None, out=None) -> Scenario:
    changes = {}
    if seed is not None:
        changes["base_seed"] = seed
    if paths is not None:
        changes["n_paths"] = paths
    if dt is not None:
        changes["grid"] = TimeGrid.from_dt(scenario.grid.t_end, dt)
    if out is not None:
        changes["out_dir"] = str(out)
    return replace(scenario, **changes) if changes else scenario
