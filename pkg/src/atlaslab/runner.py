"""Experiment execution and artifact emission for the CLI.

Every experiment is a pure function of the run configuration, so rerunning a
config, or reordering its experiment list, reproduces byte-identical numeric
content. Floats in CSV files are rendered with 17 significant digits (enough
to round-trip IEEE doubles); JSON summaries carry the experiment name, a full
config echo, residual statistics, and fitted rates.

File layout per experiment (under the configured output directory):

* ``simulate``        -> simulate_logx.csv, simulate_summary.json
* ``verify_<claim>``  -> <claim>_residuals.csv, <claim>_summary.json
  (``verify_lemma4`` writes lemma4_residuals.csv plus one summary per side)
* ``convergence``     -> convergence_residuals.csv, convergence_summary.json
* ``coincidence``     -> coincidence_fractions.csv, coincidence_summary.json
* ``remark_probe``    -> remark_probe_residuals.csv, remark_probe_summary.json

Residual CSVs carry per-path rows ``(path_id, claim, sup_residual,
endpoint_residual)`` at the finest refinement level; per-level aggregates
live in the summaries. For ``prop1`` the per-path CSV value is the worst
rank's residual; per-rank means are in the summary.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig
from .errors import NumericalError, ValidationError
from .models import simulate_atlas, simulate_brownian, simulate_rank_based
from .ranks import coincidence_stats, ranked_ensemble
from .verify import ConvergenceReport, convergence_study, verify_rank_representation

__all__ = ["run", "emit_csv", "emit_summary"]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def emit_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows as CSV with a header, floats at 17 significant digits."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and np.isnan(obj):
        return None
    return obj


def emit_summary(path: Path, payload: dict) -> None:
    """Write a JSON summary (sorted keys, NaN rendered as null)."""
    try:
        with open(path, "w") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write summary {path}: {exc}") from exc


def _study_summary(report: ConvergenceReport, config: RunConfig) -> dict:
    rate = report.fitted_rate
    return {
        "claim": report.claim,
        "levels": list(report.levels),
        "step_sizes": report.step_sizes,
        "mean_residual": report.mean_residual,
        "max_residual": report.max_residual,
        "fitted_rate": None if np.isnan(rate) else rate,
        "paths": config.paths,
        **{k: v for k, v in report.extras.items()},
        "config": config.echo,
    }


def _residual_rows(report: ConvergenceReport):
    finest = report.per_level[-1]
    sup, end = finest.sup, finest.endpoint
    if sup.ndim == 2:  # rank-major: collapse to the worst rank per path
        sup, end = sup.max(axis=0), end.max(axis=0)
    return [(p, finest.claim, sup[p], end[p]) for p in range(sup.shape[0])]


def _run_study(config: RunConfig, claim: str, threads: int) -> ConvergenceReport:
    return convergence_study(
        claim,
        config.model,
        config.grid.T,
        config.levels,
        config.paths,
        config.rng,
        generator=config.generator,
        band_delta=config.band_delta,
        threads=threads,
    )


def _simulate(config: RunConfig, threads: int):
    model = config.model
    if config.model_kind == "atlas":
        return simulate_atlas(model, config.grid, config.rng, config.paths, threads=threads)
    if config.model_kind == "brownian":
        return simulate_brownian(model, config.grid, config.rng, config.paths, threads=threads)
    return simulate_rank_based(model, config.grid, config.rng, config.paths, threads=threads)


def _exp_simulate(config: RunConfig, out: Path, threads: int) -> list[Path]:
    ens = _simulate(config, threads)
    t = ens.grid.points()
    header = ["path_id", "t"] + [f"log_x_{i}" for i in range(ens.num_assets)]

    def rows():
        for p in range(ens.num_paths):
            for m in range(ens.grid.M + 1):
                yield (p, t[m], *ens.values[p, :, m])

    csv_path = out / "simulate_logx.csv"
    emit_csv(csv_path, header, rows())
    terminal = ens.values[:, :, -1]
    summary = {
        "experiment": "simulate",
        "terminal_log_mean": terminal.mean(axis=0),
        "terminal_log_std": terminal.std(axis=0, ddof=1) if ens.num_paths > 1
        else np.zeros(ens.num_assets),
        "config": config.echo,
    }
    json_path = out / "simulate_summary.json"
    emit_summary(json_path, summary)
    return [csv_path, json_path]


def _exp_verify(config: RunConfig, out: Path, claim: str, threads: int) -> list[Path]:
    report = _run_study(config, claim, threads)
    csv_path = out / f"{claim}_residuals.csv"
    emit_csv(
        csv_path,
        ["path_id", "claim", "sup_residual", "endpoint_residual"],
        _residual_rows(report),
    )
    summary = _study_summary(report, config)
    summary["experiment"] = f"verify_{claim}"
    if claim == "prop1":
        summary["per_rank_mean_residual"] = report.per_level[-1].sup.mean(axis=1)
    json_path = out / f"{claim}_summary.json"
    emit_summary(json_path, summary)
    return [csv_path, json_path]


def _exp_verify_lemma4(config: RunConfig, out: Path, threads: int) -> list[Path]:
    rows = []
    written = []
    for claim in ("lemma4_max", "lemma4_min"):
        report = _run_study(config, claim, threads)
        rows.extend(_residual_rows(report))
        summary = _study_summary(report, config)
        summary["experiment"] = "verify_lemma4"
        json_path = out / f"{claim}_summary.json"
        emit_summary(json_path, summary)
        written.append(json_path)
    csv_path = out / "lemma4_residuals.csv"
    emit_csv(csv_path, ["path_id", "claim", "sup_residual", "endpoint_residual"], rows)
    return [csv_path, *written]


def _exp_convergence(config: RunConfig, out: Path, threads: int) -> list[Path]:
    report = _run_study(config, config.convergence_claim, threads)
    csv_path = out / "convergence_residuals.csv"
    emit_csv(
        csv_path,
        ["path_id", "claim", "sup_residual", "endpoint_residual"],
        _residual_rows(report),
    )
    summary = _study_summary(report, config)
    summary["experiment"] = "convergence"
    json_path = out / "convergence_summary.json"
    emit_summary(json_path, summary)
    return [csv_path, json_path]


def _exp_coincidence(config: RunConfig, out: Path, threads: int) -> list[Path]:
    report = _run_study(config, "coincidence", threads)
    csv_path = out / "coincidence_fractions.csv"
    rows = []
    for level, res in zip(report.levels, report.per_level):
        rows.extend((p, level, res.sup[p]) for p in range(res.sup.shape[0]))
    emit_csv(csv_path, ["path_id", "level", "band_fraction"], rows)
    summary = _study_summary(report, config)
    summary["experiment"] = "coincidence"
    summary["band_fraction_se"] = np.asarray(
        [res.sup.std(ddof=1) / np.sqrt(res.sup.shape[0]) if res.sup.shape[0] > 1 else 0.0
         for res in report.per_level]
    )
    json_path = out / "coincidence_summary.json"
    emit_summary(json_path, summary)
    return [csv_path, json_path]


def _exp_remark_probe(config: RunConfig, out: Path, threads: int) -> list[Path]:
    ens = _simulate(config, threads)
    _, frames = ranked_ensemble(ens)
    res = verify_rank_representation(ens, frames)
    sup, end = res.sup.max(axis=0), res.endpoint.max(axis=0)
    csv_path = out / "remark_probe_residuals.csv"
    emit_csv(
        csv_path,
        ["path_id", "claim", "sup_residual", "endpoint_residual"],
        [(p, "prop1", sup[p], end[p]) for p in range(sup.shape[0])],
    )
    delta = np.sqrt(config.grid.h) if config.band_delta is None else config.band_delta
    stats = coincidence_stats(ens, delta)
    summary = {
        "experiment": "remark_probe",
        "claim": "prop1",
        "is_atlas": bool(getattr(config.model, "is_atlas", False)),
        "per_rank_mean_residual": res.sup.mean(axis=1),
        "per_rank_max_residual": res.sup.max(axis=1),
        "band_delta": float(delta),
        "pair_band_fraction": stats.band_fraction,
        "triple_points": stats.triple_points,
        "triple_points_per_path_mean": float(stats.triple_points_per_path.mean()),
        "config": config.echo,
    }
    json_path = out / "remark_probe_summary.json"
    emit_summary(json_path, summary)
    return [csv_path, json_path]


def run(config: RunConfig, out_dir: Path | None = None, threads: int = 1) -> list[Path]:
    """Execute every experiment in the config; return the files written.

    ``out_dir`` overrides the configured output directory. Raises
    :class:`ValidationError` for bad inputs, :class:`NumericalError` family
    for runtime numeric failures, and ``OSError`` for I/O problems.
    """
    if threads < 1:
        raise ValidationError(f"thread count must be >= 1, got {threads}")
    out = Path(out_dir) if out_dir is not None else config.output_dir
    out.mkdir(parents=True, exist_ok=True)

    dispatch = {
        "simulate": _exp_simulate,
        "verify_lemma4": _exp_verify_lemma4,
        "convergence": _exp_convergence,
        "coincidence": _exp_coincidence,
        "remark_probe": _exp_remark_probe,
    }
    written: list[Path] = []
    for name in config.experiments:
        try:
            if name in dispatch:
                written += dispatch[name](config, out, threads)
            elif name.startswith("verify_"):
                written += _exp_verify(config, out, name.removeprefix("verify_"), threads)
            else:  # unreachable after config validation
                raise ValidationError(f"unknown experiment {name!r}")
        except NumericalError as exc:
            raise type(exc)(f"experiment {name!r}: {exc}") from exc
    return written
