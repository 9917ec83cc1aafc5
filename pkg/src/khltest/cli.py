"""Command-line surface: test, pairwise, diagnostics, simulate.

Input data is a CSV with a header row; response columns are prefixed
``y_`` and factor columns are referenced by name. All floating-point
output is printed with 17 significant digits so values round-trip
exactly. Exit codes: 0 success, 2 validation error, 3 numerical failure;
every failure writes one line of JSON to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .design import (
    ContrastMatrix,
    DesignBundle,
    factor_by_name,
    level_pair_contrast,
    one_way_design,
    padded_contrast,
    pairwise_contrast,
    two_way_additive_design,
)
from .diagnostics import cook_distances, discriminant_coordinates, projection_tables
from .errors import ComputationError, InputError, KhltestError, ValidationError
from .kernel import KernelSpec, cross_gram, gram
from .model import fit, pairwise_tests, tkhl_test
from .nystrom import build_anchors, landmark_design, landmark_residual_gram, nystrom_test, sample_landmarks
from .sim import SimConfig, run_level_experiment, run_power_experiment

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def format_float(x: float) -> str:
    """17 significant digits: enough to reproduce any double exactly."""
    return format(float(x), ".17g")


def _json_fragment(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            raise InputError("cannot serialize a non-finite number")
        out.append(format_float(x))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _json_fragment(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        for i, value in enumerate(seq):
            if i:
                out.append(", ")
            _json_fragment(value, out)
        out.append("]")
    else:
        raise InputError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    out: list = []
    _json_fragment(obj, out)
    return "".join(out)


def _csv_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(rows, header, path_or_handle) -> None:
    def _write(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])

    if isinstance(path_or_handle, (str, Path)):
        with open(path_or_handle, "w", newline="") as handle:
            _write(handle)
    else:
        _write(path_or_handle)


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out_path).write_text(text if text.endswith("\n") else text + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line errors, exit code 2
        raise InputError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="input CSV (y_* response columns)")
    sub.add_argument(
        "--factors", required=True, help="comma-separated factor column names (1 or 2)"
    )
    sub.add_argument(
        "--kernel", default="gaussian", choices=["gaussian", "linear", "polynomial"]
    )
    sub.add_argument("--bandwidth", type=float, default=None)
    sub.add_argument("--degree", type=int, default=2, help="polynomial degree")
    sub.add_argument("--offset", type=float, default=1.0, help="polynomial offset")
    sub.add_argument(
        "--contrast",
        default=None,
        help="global:FACTOR | pair:FACTOR:A,B | csv:PATH (default: global on the first factor)",
    )
    sub.add_argument(
        "--truncation", default="1", help="spectral truncation, an integer or comma list"
    )
    sub.add_argument("--alpha", type=float, default=0.05)
    sub.add_argument("--nystrom-landmarks", type=int, default=None, dest="nystrom_landmarks")
    sub.add_argument("--nystrom-anchors", type=int, default=None, dest="nystrom_anchors")
    sub.add_argument(
        "--nystrom-strategy",
        default="uniform",
        choices=["uniform", "stratified"],
        dest="nystrom_strategy",
    )
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default=None, help="output path (default: stdout)")
    sub.add_argument("--format", default="json", choices=["json", "csv"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="khltest", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p_test = commands.add_parser("test", parents=[], help="run one contrast test")
    _add_common(p_test)
    p_test.set_defaults(func=cmd_test)

    p_pair = commands.add_parser("pairwise", help="all level-pair tests with BH adjustment")
    _add_common(p_pair)
    p_pair.add_argument(
        "--pair-factor",
        default=None,
        dest="pair_factor",
        help="factor whose levels are compared (default: first factor)",
    )
    p_pair.set_defaults(func=cmd_pairwise)

    p_diag = commands.add_parser("diagnostics", help="projection, axis, and influence tables")
    _add_common(p_diag)
    p_diag.set_defaults(func=cmd_diagnostics)

    p_sim = commands.add_parser("simulate", help="Monte Carlo level/power run")
    p_sim.add_argument("--config", required=True, help="simulation config JSON")
    p_sim.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    p_sim.add_argument(
        "--rep-csv", default=None, dest="rep_csv", help="per-replicate statistics CSV path"
    )
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def _kernel_from_args(args) -> KernelSpec:
    if args.kernel == "gaussian":
        return KernelSpec("gaussian", bandwidth=args.bandwidth)
    if args.kernel == "linear":
        return KernelSpec("linear")
    return KernelSpec("polynomial", degree=args.degree, offset=args.offset)


def _load_table(path: str):
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise InputError(f"data file not found: {path}") from exc
    except Exception as exc:  # malformed CSV
        raise InputError(f"could not parse CSV {path}: {exc}") from exc
    y_cols = [c for c in frame.columns if c.startswith("y_")]
    if not y_cols:
        raise InputError("data has no response columns (names prefixed y_)")
    try:
        data = frame[y_cols].to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"response columns must be numeric: {exc}") from exc
    return frame, data


def _build_design(frame: pd.DataFrame, factors_arg: str) -> DesignBundle:
    names = [name.strip() for name in factors_arg.split(",") if name.strip()]
    if not 1 <= len(names) <= 2:
        raise InputError("expected 1 or 2 factor columns")
    for name in names:
        if name not in frame.columns:
            raise InputError(f"factor column {name!r} not present in the data")
    if len(names) == 1:
        return one_way_design(frame[names[0]].astype(str).tolist(), name=names[0])
    return two_way_additive_design(
        frame[names[0]].astype(str).tolist(),
        frame[names[1]].astype(str).tolist(),
        name_a=names[0],
        name_b=names[1],
    )


def _resolve_contrast(spec: str | None, design: DesignBundle) -> ContrastMatrix:
    if spec is None:
        spec = f"global:{design.factors[0].name}"
    kind, _, rest = spec.partition(":")
    if kind == "global":
        factor = factor_by_name(design, rest)
        inner = pairwise_contrast(len(factor.levels))
        return padded_contrast(inner, factor.offset, design.p)
    if kind == "pair":
        factor_name, _, pair = rest.partition(":")
        a, sep, b = pair.partition(",")
        if not sep:
            raise InputError("pair contrast syntax is pair:FACTOR:LEVEL_A,LEVEL_B")
        return level_pair_contrast(design, factor_name, a.strip(), b.strip())
    if kind == "csv":
        try:
            values = np.loadtxt(rest, delimiter=",", ndmin=2)
        except OSError as exc:
            raise InputError(f"contrast file not found: {rest}") from exc
        except ValueError as exc:
            raise InputError(f"could not parse contrast CSV {rest}: {exc}") from exc
        if values.shape[1] != design.p:
            raise InputError(
                f"contrast CSV has {values.shape[1]} columns, design has {design.p}"
            )
        return ContrastMatrix(values)
    raise InputError(f"unknown contrast spec {spec!r}")


def _truncations(arg: str) -> list[int]:
    try:
        values = [int(part) for part in str(arg).split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"bad truncation list {arg!r}") from exc
    if not values or any(t < 1 for t in values):
        raise InputError("truncations must be integers >= 1")
    return values


def _nystrom_pieces(args, data, design, model_gram):
    """Landmarks, anchors and cross-Gram from the CLI flags, or None."""
    if args.nystrom_landmarks is None:
        return None
    q = args.nystrom_landmarks
    groups = None
    if args.nystrom_strategy == "stratified":
        groups = list(design.factors[0].labels) if design.factors else None
        if groups is None:
            raise InputError("stratified sampling needs a factor to stratify on")
    plan = sample_landmarks(
        design.n, q, groups=groups, strategy=args.nystrom_strategy, seed=args.seed
    )
    lm = landmark_design(design, plan.indices)
    gram_z = gram(data[plan.indices], model_gram.spec)
    k_e_z = landmark_residual_gram(gram_z, lm)
    if args.nystrom_anchors is not None:
        m = args.nystrom_anchors
    else:
        from .model import EIGVAL_RTOL

        w = np.linalg.eigvalsh(k_e_z)[::-1]
        rank = int(np.count_nonzero(w > EIGVAL_RTOL * max(w[0], 0.0)))
        m = min(max(rank, 1), 50)
    anchors = build_anchors(k_e_z, m, lm)
    cross = cross_gram(data[plan.indices], data, model_gram.spec)
    return anchors, cross


def cmd_test(args) -> int:
    frame, data = _load_table(args.data)
    design = _build_design(frame, args.factors)
    contrast = _resolve_contrast(args.contrast, design)
    spec = _kernel_from_args(args)
    gm = gram(data, spec)
    truncations = _truncations(args.truncation)
    ny = _nystrom_pieces(args, data, design, gm)
    results = []
    if ny is None:
        model = fit(gm, design)
        for t in truncations:
            results.append(tkhl_test(model, contrast, t).to_dict())
    else:
        anchors, cross = ny
        for t in truncations:
            results.append(nystrom_test(anchors, cross, design, contrast, t).to_dict())
    if args.format == "json":
        _emit(dumps(results), args.out)
    else:
        header = ["statistic", "df", "p_value", "truncation", "method"]
        buf = io.StringIO()
        write_csv([[r[k] for k in header] for r in results], header, buf)
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_pairwise(args) -> int:
    frame, data = _load_table(args.data)
    design = _build_design(frame, args.factors)
    spec = _kernel_from_args(args)
    gm = gram(data, spec)
    model = fit(gm, design)
    factor_name = args.pair_factor or design.factors[0].name
    factor = factor_by_name(design, factor_name)
    truncations = _truncations(args.truncation)
    if len(truncations) != 1:
        raise InputError("pairwise testing takes a single truncation")
    entries = pairwise_tests(model, factor.labels, truncations[0])
    levels = list(factor.levels)
    matrix = np.zeros((len(levels), len(levels)))
    payload_pairs = []
    for entry in entries:
        a, b = entry.levels
        ia, ib = levels.index(a), levels.index(b)
        matrix[ia, ib] = matrix[ib, ia] = entry.result.statistic
        payload_pairs.append(
            {
                "level_a": a,
                "level_b": b,
                **entry.result.to_dict(),
                "adjusted_p": entry.adjusted_p,
            }
        )
    if args.format == "json":
        payload = {
            "factor": factor_name,
            "pairs": payload_pairs,
            "statistic_matrix": {"levels": levels, "values": matrix},
        }
        _emit(dumps(payload), args.out)
    else:
        buf = io.StringIO()
        write_csv(
            [
                [
                    p["level_a"],
                    p["level_b"],
                    p["statistic"],
                    p["df"],
                    p["p_value"],
                    p["truncation"],
                    p["method"],
                    p["adjusted_p"],
                ]
                for p in payload_pairs
            ],
            ["level_a", "level_b", "statistic", "df", "p_value", "truncation", "method", "adjusted_p"],
            buf,
        )
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_diagnostics(args) -> int:
    frame, data = _load_table(args.data)
    design = _build_design(frame, args.factors)
    contrast = _resolve_contrast(args.contrast, design)
    spec = _kernel_from_args(args)
    gm = gram(data, spec)
    model = fit(gm, design)
    truncations = _truncations(args.truncation)
    if len(truncations) != 1:
        raise InputError("diagnostics take a single truncation")
    t = min(truncations[0], model.rank)
    tables = projection_tables(model, t)
    axes = discriminant_coordinates(model, contrast, t)
    cook = cook_distances(model, contrast, t)

    if args.format == "json":
        payload = {
            "truncation": t,
            "response_proj": tables.response_proj,
            "residual_proj": tables.residual_proj,
            "prediction_proj": tables.prediction_proj,
            "axis_eigvals": axes.axis_eigvals,
            "sample_coords": axes.sample_coords,
            "cook": cook,
        }
        _emit(dumps(payload), args.out)
        return EXIT_OK

    factor_names = [f.name for f in design.factors]
    factor_cols = [list(f.labels) for f in design.factors]

    def rows_for(matrix: np.ndarray):
        for i in range(design.n):
            yield [i, *[col[i] for col in factor_cols], *matrix[i]]

    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    proj_header = ["obs_id", *factor_names, *[f"t{s + 1}" for s in range(t)]]
    named = {
        "response_projections.csv": (tables.response_proj, proj_header),
        "residual_projections.csv": (tables.residual_proj, proj_header),
        "prediction_projections.csv": (tables.prediction_proj, proj_header),
        "discriminant_coordinates.csv": (
            axes.sample_coords,
            ["obs_id", *factor_names, *[f"axis{s + 1}" for s in range(axes.a)]],
        ),
        "cook_distances.csv": (cook.reshape(-1, 1), ["obs_id", *factor_names, "cook"]),
    }
    for filename, (matrix, header) in named.items():
        write_csv(rows_for(matrix), header, out_dir / filename)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    mode = raw.pop("mode", None)
    config = SimConfig.from_dict(raw)
    if mode is None:
        mode = "level" if np.all(config.shifts() == 0.0) else "power"
    if mode == "level":
        report = run_level_experiment(config)
    elif mode == "power":
        report = run_power_experiment(config)
    else:
        raise InputError(f"unknown simulation mode {mode!r}")
    _emit(dumps(report.to_dict()), args.out)
    if args.rep_csv:
        write_csv(report.per_rep.tolist(), list(report.per_rep_columns), args.rep_csv)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        _report_error("validation", exc)
        return EXIT_VALIDATION
    except ComputationError as exc:
        _report_error("numerical", exc)
        return EXIT_NUMERICAL
    except KhltestError as exc:
        _report_error("error", exc)
        return EXIT_NUMERICAL


def _report_error(kind: str, exc: Exception) -> None:
    message = " ".join(str(exc).split())
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
