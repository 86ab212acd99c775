"""CSV ingestion, report rendering, and report serialization.

CSV dialect throughout: comma-separated, header row required, '.' decimal
separator, UTF-8.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .palette import Dataset
from .postprocess import PosteriorReport, TransitionEstimate
from .samplers import SampleMeta, SampleStore

Array = np.ndarray


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [name.strip() for name in header]
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValidationError(f"{path}: no records")
    return header, rows


def _parse_cell(path, row_index, column, cell) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ValidationError(
            f"{path}: row {row_index}, column '{column}': could not parse {cell!r}"
        ) from None
    if math.isnan(value) or math.isinf(value):
        raise ValidationError(
            f"{path}: row {row_index}, column '{column}': non-finite value"
        )
    return value


def _column(path, header, rows, name) -> Array:
    if name not in header:
        raise ValidationError(f"{path}: missing column '{name}' (header: {header})")
    j = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows, start=1):
        if j >= len(row):
            raise ValidationError(f"{path}: row {i}: missing cell in column '{name}'")
        out[i - 1] = _parse_cell(path, i, name, row[j])
    return out


def load_dataset_csv(path, response: str, covariates, center=()) -> Dataset:
    """Read a dataset from CSV, picking one response column and the named
    covariate columns; columns listed in ``center`` are mean-centered."""
    header, rows = _read_table(path)
    y = _column(path, header, rows, response)
    names = list(covariates)
    cols = [_column(path, header, rows, name) for name in names]
    for name in center:
        if name not in names:
            raise ValidationError(f"cannot center '{name}': not a covariate column")
        j = names.index(name)
        cols[j] = cols[j] - cols[j].mean()
    x = np.column_stack(cols) if cols else np.empty((y.size, 0))
    return Dataset(y, x)


def load_chain_csv(path, expected_dim: int, hyper_column: str = "V"):
    """Read a stored parameter chain: one named column per coordinate, plus an
    optional shared-hyperparameter column.

    Returns (chain matrix, hyper vector or None, coordinate names).
    """
    header, rows = _read_table(path)
    names = [name for name in header if name != hyper_column]
    if len(names) != expected_dim:
        extras = names[expected_dim:] if len(names) > expected_dim else []
        detail = f"; unexpected column(s): {', '.join(repr(n) for n in extras)}" if extras else ""
        raise ValidationError(
            f"{path}: expected {expected_dim} coordinate columns plus optional "
            f"'{hyper_column}', found {len(names)}{detail}"
        )
    chain = np.column_stack([_column(path, header, rows, name) for name in names])
    hyper = _column(path, header, rows, hyper_column) if hyper_column in header else None
    return chain, hyper, names


# ---------------------------------------------------------------------------
# sample stores


def write_store_csv(store: SampleStore, path) -> Path:
    path = Path(path)
    names = [f"psi_{j + 1}" for j in range(store.d)]
    if store.hyper_draws is not None:
        names.append("V")
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(store.n_draws):
            row = [repr(float(v)) for v in store.psi_draws[i]]
            if store.hyper_draws is not None:
                row.append(repr(float(store.hyper_draws[i])))
            writer.writerow(row)
    return path


def load_store_csv(path, model_id: int, expected_dim: int) -> SampleStore:
    chain, hyper, names = load_chain_csv(path, expected_dim)
    expected_names = [f"psi_{j + 1}" for j in range(expected_dim)]
    if names != expected_names:
        raise ValidationError(
            f"{path}: store columns must be {expected_names} (optional trailing 'V'), got {names}"
        )
    return SampleStore(model_id, chain, hyper, SampleMeta(chain.shape[0]))


# ---------------------------------------------------------------------------
# report rendering


def _fmt(value, digits=6) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{digits}f}"


def _probability_table(report: PosteriorReport) -> list[str]:
    k = len(report.model_names)
    ses = report.mc_standard_errors
    headers = ["model", "prior", "indicator", "rao_blackwell", "stationary",
               "se(rb)", "se(stationary)"]
    lines = ["  ".join(f"{h:>14}" for h in headers)]
    for i in range(k):
        cells = [
            f"{i + 1}: {report.model_names[i]}",
            _fmt(report.prior_weights_used[i]),
            _fmt(None if report.probs_indicator is None else report.probs_indicator[i]),
            _fmt(None if report.probs_rao_blackwell is None else report.probs_rao_blackwell[i]),
            _fmt(None if report.probs_stationary is None else report.probs_stationary[i]),
            _fmt(None if "rao_blackwell" not in ses else float(ses["rao_blackwell"][i])),
            _fmt(None if "stationary" not in ses else float(ses["stationary"][i])),
        ]
        lines.append("  ".join(f"{c:>14}" for c in cells))
    return lines


def _matrix_block(matrix: Array, digits=4) -> list[str]:
    return ["  ".join(f"{v:.{digits}f}" for v in row) for row in matrix]


def render_report_text(report: PosteriorReport, config_echo: dict | None = None) -> str:
    """Human-readable report with deterministic ordering and formatting."""
    lines = ["Model weighing report", "=" * 21, ""]
    lines.append(f"models: " + ", ".join(
        f"{i + 1}={name}" for i, name in enumerate(report.model_names)))
    lines.append(f"seed: {report.seed}")
    if report.iterations:
        lines.append(
            f"indicator chains: {report.chains} x {report.iterations} iterations, "
            f"burn-in {report.burnin_iterations} per chain")
    if report.draws_per_model:
        lines.append(f"transition draws per model: {report.draws_per_model}")
    lines.append("")

    headline = report.probs_rao_blackwell
    headline_kind = "Rao-Blackwellized"
    if headline is None:
        headline = report.probs_stationary
        headline_kind = "stationary"
    if headline is not None:
        summary = ", ".join(
            f"Pr(M_{i + 1} | y) = {p:.2f}" for i, p in enumerate(headline))
        lines.append(f"summary ({headline_kind}): {summary}")
        lines.append("")

    lines.append("Posterior model probabilities")
    lines.extend(_probability_table(report))
    lines.append("")

    if report.bayes_factors is not None:
        lines.append("Bayes factors (row model against column model)")
        lines.extend(_matrix_block(report.bayes_factors))
        k = report.bayes_factors.shape[0]
        for j in range(k):
            for h in range(k):
                if j != h:
                    lines.append(f"BF_{j + 1}{h + 1} = {report.bayes_factors[j, h]:.6g}")
        lines.append("")

    if report.transition is not None:
        lines.append("Between-model transition matrix (sampling weights)")
        lines.extend(_matrix_block(report.transition.matrix))
        lines.append("")

    if report.visit_frequencies is not None:
        lines.append("visit frequencies: "
                     + ", ".join(f"{v:.4f}" for v in report.visit_frequencies))
    lines.append("sampling weights:  "
                 + ", ".join(f"{w:.6g}" for w in report.sampling_weights))
    if report.diagnostics:
        lines.append("")
        lines.append("Diagnostics:")
        lines.extend(f"  - {d}" for d in report.diagnostics)
    if config_echo:
        lines.append("")
        lines.append("Config echo:")
        lines.append(json.dumps(config_echo, sort_keys=True, indent=2))
    lines.append("")
    return "\n".join(lines)


def write_trace_csvs(report: PosteriorReport, directory, basename="trace") -> list[Path]:
    """One CSV per chain: iteration plus the running mean probability of each
    model."""
    if report.cumulative_trace is None or report.cumulative_trace.shape[1] == 0:
        raise ValidationError("no post-burn-in iterations")
    directory = Path(directory)
    paths = []
    k = report.cumulative_trace.shape[2]
    header = ["iteration"] + [f"model_{i + 1}" for i in range(k)]
    for c in range(report.cumulative_trace.shape[0]):
        path = directory / f"{basename}_chain{c + 1}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            trace = report.cumulative_trace[c]
            for j in range(trace.shape[0]):
                writer.writerow([j + 1] + [f"{v:.8f}" for v in trace[j]])
        paths.append(path)
    return paths


def emit_report(report: PosteriorReport, directory, formats=("text",),
                config_echo: dict | None = None, basename="report") -> list[Path]:
    """Write the report in the requested formats, plus trace CSVs when the
    report carries chains. Output is deterministic for a fixed report."""
    if (report.probs_indicator is None and report.probs_rao_blackwell is None
            and report.probs_stationary is None):
        raise ValidationError("report holds no estimates to emit")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    formats = (formats,) if isinstance(formats, str) else tuple(formats)
    for fmt in formats:
        if fmt == "text":
            path = directory / f"{basename}.txt"
            path.write_text(render_report_text(report, config_echo), encoding="utf-8")
            written.append(path)
        elif fmt == "csv":
            written.extend(_emit_report_csvs(report, directory, basename))
        elif fmt == "json":
            path = directory / f"{basename}.json"
            save_report_json(report, path)
            written.append(path)
        else:
            raise ValidationError(f"unknown report format: {fmt!r}")
    if report.cumulative_trace is not None:
        written.extend(write_trace_csvs(report, directory))
    return written


def _emit_report_csvs(report: PosteriorReport, directory: Path, basename: str) -> list[Path]:
    written = []
    path = directory / f"{basename}_probabilities.csv"
    ses = report.mc_standard_errors
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "name", "prior_weight", "prob_indicator",
                         "prob_rao_blackwell", "prob_stationary",
                         "se_rao_blackwell", "se_stationary"])
        for i, name in enumerate(report.model_names):
            writer.writerow([
                i + 1, name,
                repr(float(report.prior_weights_used[i])),
                "" if report.probs_indicator is None else repr(float(report.probs_indicator[i])),
                "" if report.probs_rao_blackwell is None else repr(float(report.probs_rao_blackwell[i])),
                "" if report.probs_stationary is None else repr(float(report.probs_stationary[i])),
                "" if "rao_blackwell" not in ses else repr(float(ses["rao_blackwell"][i])),
                "" if "stationary" not in ses else repr(float(ses["stationary"][i])),
            ])
    written.append(path)
    if report.bayes_factors is not None:
        path = directory / f"{basename}_bayes_factors.csv"
        np.savetxt(path, report.bayes_factors, delimiter=",", fmt="%.12g")
        written.append(path)
    if report.transition is not None:
        path = directory / f"{basename}_transition.csv"
        np.savetxt(path, report.transition.matrix, delimiter=",", fmt="%.12g")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# report serialization


def _array_or_none(value):
    return None if value is None else np.asarray(value, dtype=float)


def report_to_dict(report: PosteriorReport) -> dict:
    def listify(value):
        return None if value is None else np.asarray(value).tolist()

    return {
        "model_names": list(report.model_names),
        "prior_weights_used": listify(report.prior_weights_used),
        "sampling_weights": listify(report.sampling_weights),
        "probs_indicator": listify(report.probs_indicator),
        "probs_rao_blackwell": listify(report.probs_rao_blackwell),
        "probs_stationary": listify(report.probs_stationary),
        "bayes_factors": listify(report.bayes_factors),
        "transition": None if report.transition is None else {
            "matrix": report.transition.matrix.tolist(),
            "counts": report.transition.counts.tolist(),
        },
        "mc_standard_errors": {k: np.asarray(v).tolist()
                               for k, v in sorted(report.mc_standard_errors.items())},
        "cumulative_trace": listify(report.cumulative_trace),
        "visit_frequencies": listify(report.visit_frequencies),
        "seed": report.seed,
        "iterations": report.iterations,
        "chains": report.chains,
        "burnin_iterations": report.burnin_iterations,
        "draws_per_model": report.draws_per_model,
        "diagnostics": list(report.diagnostics),
    }


def report_from_dict(payload: dict) -> PosteriorReport:
    transition = None
    if payload.get("transition") is not None:
        transition = TransitionEstimate(
            np.asarray(payload["transition"]["matrix"], dtype=float),
            np.asarray(payload["transition"]["counts"], dtype=int),
        )
    return PosteriorReport(
        model_names=tuple(payload["model_names"]),
        prior_weights_used=np.asarray(payload["prior_weights_used"], dtype=float),
        sampling_weights=np.asarray(payload["sampling_weights"], dtype=float),
        probs_indicator=_array_or_none(payload.get("probs_indicator")),
        probs_rao_blackwell=_array_or_none(payload.get("probs_rao_blackwell")),
        probs_stationary=_array_or_none(payload.get("probs_stationary")),
        bayes_factors=_array_or_none(payload.get("bayes_factors")),
        transition=transition,
        mc_standard_errors={k: np.asarray(v, dtype=float)
                            for k, v in payload.get("mc_standard_errors", {}).items()},
        cumulative_trace=_array_or_none(payload.get("cumulative_trace")),
        visit_frequencies=_array_or_none(payload.get("visit_frequencies")),
        seed=payload.get("seed"),
        iterations=payload.get("iterations", 0),
        chains=payload.get("chains", 0),
        burnin_iterations=payload.get("burnin_iterations", 0),
        draws_per_model=payload.get("draws_per_model"),
        diagnostics=tuple(payload.get("diagnostics", ())),
    )


def save_report_json(report: PosteriorReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report_to_dict(report), sort_keys=True, indent=2),
                    encoding="utf-8")
    return path


def load_report_json(path) -> PosteriorReport:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    return report_from_dict(json.loads(path.read_text(encoding="utf-8")))
