"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 numeric or domain error,
3 flatness scan failed (max |R| above tolerance).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from fraccurv import fracderiv as fd
from fraccurv import geometry as geo
from fraccurv.errors import FracCurvError, ParseError
from fraccurv.mittag_leffler import MLParams, h_function, ml_truncated

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_NOT_FLAT = 0, 1, 2, 3

GLOBAL_DEFAULTS = {"output": "json", "mode": "closed-form"}
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "ml": {"trunc": 1},
    "deriv": {"tol": 1e-6},
    "christoffel": {"tol": 0.0},
    "riemann": {"tol": 1e-9},
    "flatness": {"tol": 1e-9},
    "geodesic": {"output": "csv", "steps": 1000, "T": 1.0},
    "isometry": {},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class Report:
    data: dict
    table: tuple[list[str], list[list]] | None = None
    exit_code: int = EXIT_OK
    extra_files: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------- parsing helpers


def _floats(text, what: str) -> list[float]:
    if isinstance(text, (list, tuple)):
        values = text
    else:
        values = [v for v in str(text).replace(" ", "").split(",") if v]
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _range(text: str, what: str) -> tuple[float, float, float]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"{what}: expected lo:hi:step, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise UsageError(f"{what}: expected numbers in lo:hi:step, got {text!r}") from None


def _alpha_sweep(text: str) -> list[float]:
    lo, hi, step = _range(text, "--alpha-sweep")
    if not step > 0 or hi < lo:
        raise UsageError("--alpha-sweep needs lo <= hi and a positive step")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def _grid(spec, n: int) -> list[list[float]]:
    if isinstance(spec, list):
        axes = spec
    elif isinstance(spec, str) and spec.strip().startswith("["):
        try:
            axes = json.loads(spec)
        except json.JSONDecodeError as err:
            raise UsageError(f"--grid: invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from None
    else:
        axes = []
        for part in str(spec).split(";"):
            lo, hi, count = _range(part, "--grid")
            if count < 1 or not float(count).is_integer():
                raise UsageError("--grid count must be a positive integer")
            axes.append(np.linspace(lo, hi, int(count)).tolist())
    if len(axes) == 1:
        axes = axes * n
    if len(axes) != n or not all(isinstance(a, list) and a for a in axes):
        raise UsageError(f"--grid must describe 1 or {n} non-empty axes")
    return [[float(v) for v in a] for a in axes]


def _load_json_source(text: str, what: str):
    source = text.strip()
    origin = "<inline>"
    if not source.startswith("{"):
        if not os.path.exists(source):
            raise UsageError(f"{what}: {source!r} is neither inline JSON nor an existing file")
        origin = source
        with open(source, encoding="utf-8") as fh:
            source = fh.read()
    try:
        return json.loads(source)
    except json.JSONDecodeError as err:
        raise UsageError(
            f"{what}: malformed JSON in {origin} at line {err.lineno} column {err.colno}: {err.msg}"
        ) from None


def _metric(opts: dict, alpha: float | None = None):
    if opts.get("metric") is not None:
        spec = opts["metric"]
        if isinstance(spec, str):
            spec = _load_json_source(spec, "--metric")
        return geo.metric_from_spec(spec, alpha if alpha is not None else opts.get("alpha"))
    if opts.get("op") is None:
        raise UsageError("a metric is required: pass --metric or --op with --n and --alpha")
    a = alpha if alpha is not None else opts.get("alpha")
    if a is None or opts.get("n") is None:
        raise UsageError("--op needs --alpha and --n to build a diagonal metric")
    return geo.DiagonalMetric.from_operator(fd.parse_operator_spec(opts["op"], float(a)), int(opts["n"]))


def _require(opts: dict, *names: str):
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


# ---------------------------------------------------------------- commands


def cmd_ml(opts: dict) -> Report:
    _require(opts, "gamma", "beta", "rho", "delta", "p", "q", "z")
    params = MLParams(
        opts["gamma"], opts["beta"], opts["rho"], opts["delta"], opts["p"], opts["q"], int(opts["trunc"])
    )
    z = float(opts["z"])
    value = ml_truncated(params, z)
    return Report({"value": value, "h_function": h_function(params, z), "z": z, "trunc": params.trunc})


def cmd_deriv(opts: dict) -> Report:
    _require(opts, "op", "alpha", "f")
    alpha = float(opts["alpha"])
    op = fd.parse_operator_spec(opts["op"], alpha)
    f = fd.ScalarFunction.from_text(opts["f"])
    tol = float(opts["tol"])
    t = opts.get("t")
    if opts.get("limit_at_zero") or t == 0:
        schedule = _floats(opts["t_schedule"], "--t-schedule") if opts.get("t_schedule") else None
        value = fd.value_at_zero(op, f, schedule, tol)
        return Report({"value": value, "t": 0.0, "limit_at_zero": True, "operator": op.kind.value})
    _require(opts, "t")
    t = float(t)
    value = fd.apply(op, f, t)
    data = {"value": value, "t": t, "operator": op.kind.value, "alpha": alpha}
    if not opts.get("check_limit_def"):
        return Report(data)
    if op.ml is None:
        raise UsageError("--check-limit-def requires a truncated-v operator")
    eps = _floats(opts["eps_schedule"], "--eps-schedule") if opts.get("eps_schedule") else None
    limit = fd.apply_limit_def(op.ml, alpha, f, t, eps, tol)
    diff = abs(limit.value - value)
    data.update(
        closed_form=value,
        limit_def=limit.value,
        error_estimate=limit.error,
        difference=diff,
        tol=tol,
    )
    data["pass"] = bool(diff <= tol * max(1.0, abs(value)))
    return Report(data, exit_code=EXIT_OK if data["pass"] else EXIT_NUMERIC)


def cmd_christoffel(opts: dict) -> Report:
    _require(opts, "point")
    metric = _metric(opts)
    x = _floats(opts["point"], "--point")
    use_diagonal = opts.get("diagonal") and isinstance(metric, geo.DiagonalMetric)
    values = (geo.christoffel_diagonal if use_diagonal else geo.christoffel_general)(metric, x)
    tol = float(opts["tol"])
    rows = []
    for idx in zip(*np.nonzero(np.abs(values.values) > tol)):
        rows.append([int(v) + 1 for v in idx] + [float(values.values[idx])])
    data = {
        "point": list(values.point),
        "method": "diagonal" if use_diagonal else "general",
        "components": [{"index": r[:3], "value": r[3]} for r in rows],
    }
    return Report(data, (["k", "i", "j", "value"], rows))


def cmd_riemann(opts: dict) -> Report:
    _require(opts, "point")
    metric = _metric(opts)
    x = _floats(opts["point"], "--point")
    h = opts.get("h")
    values = geo.riemann(metric, x, opts["mode"], None if h is None else float(h))
    tol = float(opts["tol"])
    rows = [list(idx) + [v] for idx, v in values.nonzero(tol)]
    data = {
        "point": list(values.point),
        "mode": geo.Mode(opts["mode"]).value,
        "max_abs_R": values.max_abs,
        "tol": tol,
        "pass": values.max_abs <= tol,
        "components": [{"index": r[:4], "value": r[4]} for r in rows],
    }
    return Report(data, (["i", "j", "k", "l", "value"], rows))


def cmd_flatness(opts: dict) -> Report:
    _require(opts, "grid")
    tol = float(opts["tol"])
    h = opts.get("h")
    h = None if h is None else float(h)
    alphas = _alpha_sweep(opts["alpha_sweep"]) if opts.get("alpha_sweep") else [None]
    results = []
    table_rows = []
    for a in alphas:
        metric = _metric(opts, a)
        grid = _grid(opts["grid"], metric.n)
        report = geo.flatness_scan(metric, grid, tol, opts["mode"], h, keep_points=True)
        entry = report.to_dict()
        if isinstance(metric, geo.DiagonalMetric):
            entry["alpha"] = metric.alpha
        results.append(entry)
        for pt, m in report.per_point:
            table_rows.append([entry.get("alpha", "")] + list(pt) + [m])
    worst = max(range(len(results)), key=lambda k: (results[k]["max_abs_R"], -k))
    passed = all(r["pass"] for r in results)
    if alphas == [None]:
        data = results[0]
    else:
        data = {
            "max_abs_R": results[worst]["max_abs_R"],
            "argmax_point": results[worst]["argmax_point"],
            "argmax_alpha": results[worst].get("alpha"),
            "pass": passed,
            "tol": tol,
            "mode": results[0]["mode"],
            "alpha_sweep": results,
        }
    n = len(results[0]["argmax_point"])
    header = ["alpha"] + [f"x{i + 1}" for i in range(n)] + ["max_abs_R"]
    return Report(data, (header, table_rows), EXIT_OK if passed else EXIT_NOT_FLAT)


def cmd_geodesic(opts: dict) -> Report:
    _require(opts, "x0", "v0")
    metric = _metric(opts)
    x0 = _floats(opts["x0"], "--x0")
    v0 = _floats(opts["v0"], "--v0")
    T = float(opts["T"])
    steps = int(opts["steps"])
    path = geo.geodesic_integrate(metric, x0, v0, T, steps)
    dt = T / steps
    rows = [[k * dt] + [float(v) for v in p] for k, p in enumerate(path)]
    header = ["t"] + [f"x{i + 1}" for i in range(path.shape[1])]
    data = {"T": T, "steps": steps, "path": [r[1:] for r in rows]}
    return Report(data, (header, rows))


def cmd_isometry(opts: dict) -> Report:
    _require(opts, "base", "point")
    metric = _metric(opts)
    if not isinstance(metric, geo.DiagonalMetric):
        raise UsageError("isometry is defined for diagonal alpha-metrics only")
    base = _floats(opts["base"], "--base")
    points = opts["point"]
    if isinstance(points, str) or (points and not isinstance(points[0], (list, str))):
        points = [points]
    mapped = []
    rows = []
    for p in points:
        x = _floats(p, "--point")
        phi = geo.isometry_map(metric, base, x)
        mapped.append({"point": x, "image": phi.tolist()})
        rows.append(x + phi.tolist())
    n = metric.n
    header = [f"x{i + 1}" for i in range(n)] + [f"phi{i + 1}" for i in range(n)]
    return Report({"base": base, "mapped": mapped}, (header, rows))


COMMANDS: dict[str, Callable[[dict], Report]] = {
    "ml": cmd_ml,
    "deriv": cmd_deriv,
    "christoffel": cmd_christoffel,
    "riemann": cmd_riemann,
    "flatness": cmd_flatness,
    "geodesic": cmd_geodesic,
    "isometry": cmd_isometry,
}


# ---------------------------------------------------------------- argument parser


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--output", choices=("json", "csv", "pretty"))
    common.add_argument("--tol", type=float)
    common.add_argument("--mode", choices=[m.value for m in geo.Mode])
    common.add_argument("--config", help="JSON file whose keys mirror the flag names")
    return common


def _metric_options(p: argparse.ArgumentParser):
    p.add_argument("--metric", help="metric spec as inline JSON or a path to a JSON file")
    p.add_argument("--op", help="operator spec; builds a diagonal alpha-metric with --n and --alpha")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(
        prog="fraccurv",
        description="Local fractional derivatives and curvature of the alpha-metric.",
        parents=[common],
        argument_default=argparse.SUPPRESS,
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ml", parents=[common], argument_default=argparse.SUPPRESS,
                       help="truncated six-parameter Mittag-Leffler function")
    for name in ("gamma", "beta", "rho", "delta", "p", "q", "z"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--trunc", type=int)

    p = sub.add_parser("deriv", parents=[common], argument_default=argparse.SUPPRESS,
                       help="apply a local fractional derivative")
    p.add_argument("--op")
    p.add_argument("--alpha", type=float)
    p.add_argument("--f", help="function of t")
    p.add_argument("--t", type=float)
    p.add_argument("--t-schedule", help="decreasing t values for --limit-at-zero")
    p.add_argument("--eps-schedule", help="decreasing epsilon values for --check-limit-def")
    p.add_argument("--limit-at-zero", action="store_true")
    p.add_argument("--check-limit-def", action="store_true")

    p = sub.add_parser("christoffel", parents=[common], argument_default=argparse.SUPPRESS,
                       help="Christoffel symbols at a point")
    _metric_options(p)
    p.add_argument("--point")
    p.add_argument("--diagonal", action="store_true", help="use the closed form for alpha-metrics")

    p = sub.add_parser("riemann", parents=[common], argument_default=argparse.SUPPRESS,
                       help="Riemann curvature components at a point")
    _metric_options(p)
    p.add_argument("--point")
    p.add_argument("--h", type=float, help="relative finite-difference step")

    p = sub.add_parser("flatness", parents=[common], argument_default=argparse.SUPPRESS,
                       help="scan max |R| over a grid")
    _metric_options(p)
    p.add_argument("--grid", help="lo:hi:count (all axes), per-axis list separated by ';', or JSON")
    p.add_argument("--alpha-sweep", help="lo:hi:step")
    p.add_argument("--h", type=float)
    p.add_argument("--per-point-csv", help="also write per-point maxima to this CSV file")

    p = sub.add_parser("geodesic", parents=[common], argument_default=argparse.SUPPRESS,
                       help="integrate a geodesic with RK4")
    _metric_options(p)
    p.add_argument("--x0")
    p.add_argument("--v0")
    p.add_argument("--T", type=float)
    p.add_argument("--steps", type=int)

    p = sub.add_parser("isometry", parents=[common], argument_default=argparse.SUPPRESS,
                       help="map points to Euclidean coordinates")
    _metric_options(p)
    p.add_argument("--base")
    p.add_argument("--point", action="append")
    return parser


def _load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"--config: file {path!r} does not exist")
    data = _load_json_source(path, "--config")
    if not isinstance(data, dict):
        raise UsageError("--config: top level must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve_options(argv: Sequence[str]) -> tuple[str, dict]:
    ns = vars(build_parser().parse_args(list(argv)))
    command = ns.pop("command", None)
    if command is None:
        raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
    config = _load_config(ns["config"]) if "config" in ns else {}
    opts = {**GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[command], **config, **ns}
    if opts.get("tol") is not None and not float(opts["tol"]) >= 0:
        raise UsageError("--tol must be non-negative")
    return command, opts


# ---------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def format_report(report: Report, output: str) -> str:
    if output == "json":
        return json.dumps(_jsonable(report.data), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if output == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if report.table is not None:
            header, rows = report.table
            writer.writerow(header)
            writer.writerows([repr(v) if isinstance(v, float) else v for v in row] for row in rows)
        else:
            writer.writerow(["key", "value"])
            for key in sorted(report.data):
                writer.writerow([key, report.data[key]])
        return buf.getvalue()
    lines = []
    for key in sorted(report.data):
        value = report.data[key]
        if isinstance(value, (list, dict)) and len(json.dumps(_jsonable(value))) > 70:
            lines.append(f"{key}:")
            items = value.items() if isinstance(value, dict) else enumerate(value)
            for k, v in items:
                lines.append(f"  {k}: {json.dumps(_jsonable(v), sort_keys=True)}")
        else:
            lines.append(f"{key}: {json.dumps(_jsonable(value), sort_keys=True)}")
    return "\n".join(lines) + "\n"


def run(argv: Sequence[str], stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        command, opts = resolve_options(argv)
        report = COMMANDS[command](opts)
        if opts.get("per_point_csv") and report.table is not None:
            with open(opts["per_point_csv"], "w", encoding="utf-8", newline="") as fh:
                fh.write(format_report(Report({}, report.table), "csv"))
        stdout.write(format_report(report, opts["output"]))
        return report.exit_code
    except UsageError as err:
        stderr.write(f"error: {err}\n")
        return EXIT_USAGE
    except ParseError as err:
        stderr.write(f"parse error: {err}\n")
        if err.text:
            stderr.write(f"  {err.text}\n  {' ' * len(err.text.encode()[:err.offset].decode(errors='ignore'))}^\n")
        return EXIT_USAGE
    except (FracCurvError, ValueError, ArithmeticError) as err:
        stderr.write(f"error: {err}\n")
        return EXIT_NUMERIC


def main(argv: Sequence[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
