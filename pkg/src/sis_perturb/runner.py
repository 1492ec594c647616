"""Scenario execution and figure reproduction; writes CSV and JSON outputs."""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import Regime, Verdict, classify_gray, classify_natural, ergodic_average
from .config import Scenario, ScenarioError
from .corrections import IDENTITY, compare_perturbations, expectation_series, variance_first_order
from .diffusions import CIRParams, stationary_mean
from .errors import NotErgodicError
from .presets import FIGURE_DT, FigurePreset, get_preset
from .simulate import (
    BATCH_SIZE,
    CIRPaths,
    PerturbedSISPaths,
    TimeGrid,
    ensemble,
    ensemble_paths,
    mix_seed,
    path_seeds,
)
from .sis_core import SISParams

VERSION = f"sis_perturb v{__version__}"
PATH_STRIDE = 10


def write_csv(path: Path, header: Sequence[str], columns: Iterable) -> Path:
    """Write columns with 17 significant digits so reruns compare byte for byte."""
    cols = [np.atleast_1d(np.asarray(c, dtype=float)) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(format(v, ".17g") for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def series_indices(grid: TimeGrid, n_nodes: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, grid.n_steps, n_nodes)).astype(int))


def stride_indices(grid: TimeGrid, stride: int) -> np.ndarray:
    idx = np.arange(0, grid.n_nodes, stride)
    return idx if idx[-1] == grid.n_steps else np.append(idx, grid.n_steps)


def scenario_verdict(scn: Scenario, workers=None) -> Verdict:
    if scn.model == "gray":
        gp = scn.gray_params()
        return classify_gray(gp.beta, gp.gamma, gp.sigma)
    if scn.model == "generic":
        stats = ensemble(scn.perturbation_factory(), scn.n_paths, scn.base_seed, workers)
        mean = ergodic_average(stats.mean)
        verdict = classify_natural(mean, scn.sis.gamma)
        verdict.notes.append(f"stationary mean estimated by time average over [0, {scn.grid.t_end}]: {mean!r}")
        return verdict
    try:
        mean = stationary_mean(scn.effective_model())
    except NotErgodicError as exc:
        return Verdict(Regime.INCONCLUSIVE, float("nan"), None, [("ergodic", False)], [str(exc)])
    return classify_natural(mean, scn.sis.gamma)


def _metadata(scn: Scenario, command: str, files: Sequence[Path], extra: Optional[dict] = None) -> dict:
    meta = {
        "version": VERSION,
        "command": command,
        "model": scn.model,
        "dt": scn.grid.dt,
        "t_end": scn.grid.t_end,
        "n_steps": scn.grid.n_steps,
        "n_paths": scn.n_paths,
        "base_seed": scn.base_seed,
        "seed_scheme": "path i uses splitmix64 finalizer of base_seed + (i + 1) * 0x9E3779B97F4A7C15",
        "first_path_seeds": path_seeds(scn.base_seed, min(3, scn.n_paths)),
        "batch_size": BATCH_SIZE,
        "parameters": scn.to_dict(),
        "scenario_ini": scn.to_ini(),
        "files": [p.name for p in files],
    }
    if scn.model in ("cir", "logistic"):
        eff = scn.effective_model()
        meta["effective_perturbation"] = {"a": eff.a, "b": eff.b, "sigma": eff.sigma, "y0": eff.y0}
    if extra:
        meta.update(extra)
    return meta


def _out(scn: Scenario, out_dir) -> Path:
    path = Path(out_dir if out_dir is not None else scn.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _ensemble_csv(scn: Scenario, out: Path, indices: np.ndarray, workers=None, name="ensemble.csv") -> Path:
    stats = ensemble(scn.infected_factory(), scn.n_paths, scn.base_seed, workers)
    t = scn.grid.times()[indices]
    return write_csv(out / name, ("t", "mean", "variance", "stderr"),
                     (t, stats.mean[indices], stats.variance[indices], stats.stderr[indices]))


def _series_csv(scn: Scenario, out: Path) -> list[Path]:
    t = scn.grid.times()[series_indices(scn.grid, scn.series_nodes)]
    files = []
    if scn.model == "gray":
        series = expectation_series(t, scn.sis.x0, IDENTITY, scn.gray_params(), cfg=scn.correction)
    else:
        coeffs = scn.coefficient_pair()
        y = scn.initial_perturbation()
        series = expectation_series(t, scn.sis.x0, IDENTITY, coeffs, y=y, gamma=scn.sis.gamma, cfg=scn.correction)
    u1 = series.terms[1] if len(series.terms) > 1 else np.zeros_like(t)
    files.append(write_csv(out / "series.csv", ("t", "u0", "u1", "series_value"), (t, series.terms[0], u1, series.value)))
    return files


def _variance_csv(scn: Scenario, out: Path) -> Path:
    t = scn.grid.times()[series_indices(scn.grid, scn.series_nodes)]
    var = variance_first_order(t, scn.sis.x0, scn.initial_perturbation(), scn.coefficient_pair(), scn.sis.gamma, scn.correction)
    return write_csv(out / "var_correction.csv", ("t", "var_correction"), (t, var))


def _comparison_csv(scn: Scenario, out: Path) -> Path:
    if scn.model not in ("cir", "logistic", "generic"):
        raise ScenarioError("compare needs a natural perturbation model", "scenario.model")
    gray = scn.gray_params()
    if scn.model == "cir" and not (scn.cir.b == scn.cir.y0 == scn.sis.beta):
        raise ScenarioError("compare needs a mean-matched CIR perturbation: y0 = b = beta", "cir")
    t = scn.grid.times()[series_indices(scn.grid, scn.series_nodes)]
    table = compare_perturbations(t, scn.sis.x0, scn.coefficient_pair(), gray, scn.correction)
    return write_csv(out / "comparison.csv", ("t", "u0", "cir_first_order", "gray_first_order", "g0"),
                     (table.t, table.u0, table.cir_first_order, table.gray_first_order, table.g0))


def _verdict_json(scn: Scenario, out: Path, notes: Sequence[str] = (), workers=None) -> Path:
    verdict = scenario_verdict(scn, workers)
    verdict.notes.extend(notes)
    return write_json(out / "verdict.json", verdict.to_record())


def run_command(command: str, scn: Scenario, out_dir=None, workers=None) -> list[Path]:
    """Execute one CLI subcommand; returns the files written."""
    out = _out(scn, out_dir)
    files: list[Path] = []
    if command in ("simulate", "run"):
        files.append(_ensemble_csv(scn, out, stride_indices(scn.grid, scn.output_stride), workers))
    if command in ("correct", "run"):
        files.extend(_series_csv(scn, out))
    if command == "correct" and scn.model != "gray":
        files.append(_variance_csv(scn, out))
    if command in ("classify", "run"):
        files.append(_verdict_json(scn, out, workers=workers))
    if command == "compare":
        files.append(_comparison_csv(scn, out))
    if not files:
        raise ValueError(f"unknown command {command!r}")
    meta = out / "metadata.json"
    files.append(write_json(meta, _metadata(scn, command, files + [meta])))
    return files


def run_scenario(scn: Scenario, out_dir=None, workers=None) -> list[Path]:
    """Ensemble CSV, series CSV, verdict record and metadata for one scenario."""
    return run_command("run", scn, out_dir, workers)


def preset_scenario(preset: FigurePreset, dt: float = FIGURE_DT) -> Scenario:
    unscaled = preset.c is not None
    return Scenario(
        model="cir",
        sis=SISParams(preset.beta, preset.gamma, preset.x0),
        grid=TimeGrid.from_dt(preset.horizon(), dt),
        n_paths=preset.n_paths,
        base_seed=preset.base_seed,
        c=preset.c if unscaled else 0.1,
        coefficients="unscaled" if unscaled else "effective",
        cir=CIRParams(preset.a, preset.b, preset.sigma, preset.b),
        gray_sigma_tilde=preset.sigma if preset.kind == "compare" else None,
        name=preset.id,
    )


def reproduce_figure(fig_id: str, out_dir, seed=None, paths=None, dt=None, workers=None) -> list[Path]:
    """Write the plot-ready data behind one figure plus its verdict record."""
    preset = get_preset(fig_id)
    scn = preset_scenario(preset, FIGURE_DT if dt is None else dt)
    if seed is not None:
        scn = replace(scn, base_seed=seed)
    if paths is not None:
        scn = replace(scn, n_paths=paths)
    out = _out(scn, out_dir)
    files: list[Path] = []
    notes = [preset.note] if preset.note else []
    if preset.kind == "paths":
        seeds = path_seeds(scn.base_seed, scn.n_paths)
        y_block = ensemble_paths(scn.perturbation_factory(), scn.n_paths, scn.base_seed, workers)
        i_block = ensemble_paths(scn.infected_factory(), scn.n_paths, scn.base_seed, workers)
        idx = stride_indices(scn.grid, PATH_STRIDE)
        t = scn.grid.times()[idx]
        for i in range(scn.n_paths):
            files.append(write_csv(out / f"path_infected_{i}.csv", ("t", "value"), (t, i_block[i, idx])))
            files.append(write_csv(out / f"path_perturbation_{i}.csv", ("t", "value"), (t, y_block[i, idx])))
    elif preset.kind in ("series", "variance"):
        idx = series_indices(scn.grid, scn.series_nodes)
        files.append(_ensemble_csv(scn, out, idx, workers))
        files.extend(_series_csv(scn, out) if preset.kind == "series" else [_variance_csv(scn, out)])
    else:
        files.append(_comparison_csv(scn, out))
    files.append(_verdict_json(scn, out, notes, workers))
    meta = out / "metadata.json"
    extra = {
        "figure": fig_id,
        "horizon_rule": "fixed" if preset.t_end is not None else "deterministic flow within 1% of its limit, rounded up",
        "coefficient_reading": "figure (a, sigma) are unscaled; simulated CIR is (c a, b, sqrt(c) sigma)" if preset.c else "figure parameters simulated as given",
        "notes": notes,
    }
    files.append(write_json(meta, _metadata(scn, f"reproduce {fig_id}", files + [meta], extra)))
    return files
