"""Command-line front end.

Config files are ``key = value`` lines, optionally grouped under
``[model]``, ``[experiment]`` and ``[thresholds]``. Keys may also appear
before any section header. Outputs of ``run`` are ``report.json``,
``samples.csv`` and ``fits.csv`` in the output directory.

Exit codes: 0 when every check passes, 2 when a threshold fails (the
report is still written), 1 on any error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import acceptance, coherent
from .experiments import DEFAULT_THRESHOLDS, EXPERIMENT_KINDS, ExperimentSpec, Report, ValidationError, run_experiment
from .geometry import MODEL_KINDS, make_model
from .hilbert import cached_level

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2

_ROOT = "__root__"
SECTION_KEYS = {
    "model": {"model", "epsilon", "tau"},
    "experiment": {"experiment", "f", "g", "ladder", "n_res", "out", "jobs", "power"},
    "thresholds": set(DEFAULT_THRESHOLDS),
}
SAMPLE_COLUMNS = ("m", "raw", "fitted", "residual", "threshold", "pass")
FIT_COLUMNS = ("fit", "key", "index", "value")


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownKey(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown key {self.name!r}"


def _parse_ladder(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise ValidationError("ladder", f"expected comma-separated integers, got {text!r}") from exc


def _convert(key: str, raw: str):
    try:
        if key in ("epsilon",) or key in DEFAULT_THRESHOLDS:
            return float(raw)
        if key in ("n_res", "jobs", "power"):
            return int(raw)
    except ValueError as exc:
        raise ValidationError(key, f"cannot parse {raw!r}") from exc
    if key == "ladder":
        return _parse_ladder(raw)
    if key == "tau":
        try:
            return make_model("torus", tau=raw).tau
        except ValueError as exc:
            raise ValidationError("tau", f"cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str) -> ExperimentSpec:
    """Parse and validate a config; defaults fill anything not given."""
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str.lower
    try:
        parser.read_string(f"[{_ROOT}]\n" + text)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] - 1 if exc.errors else 0
        raise ParseError(line, "expected 'key = value'") from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError((exc.lineno or 1) - 1, str(exc).split(":")[-1].strip()) from exc
    except configparser.Error as exc:
        raise ParseError(getattr(exc, "lineno", 0) or 0, str(exc)) from exc

    values: dict = {}
    thresholds: dict[str, float] = {}
    for section in parser.sections():
        if section == _ROOT:
            allowed = SECTION_KEYS["model"] | SECTION_KEYS["experiment"]
        elif section in SECTION_KEYS:
            allowed = SECTION_KEYS[section]
        else:
            raise UnknownKey(f"[{section}]")
        for key, raw in parser.items(section, raw=True):
            if key not in allowed:
                raise UnknownKey(key)
            target = thresholds if section == "thresholds" else values
            if key in target:
                raise ValidationError(key, "given more than once")
            target[key] = _convert(key, raw.strip())
    for key in ("model", "experiment"):
        if key not in values:
            raise ValidationError(key, "missing")
    if values["model"] not in MODEL_KINDS:
        raise ValidationError("model", f"unknown kind {values['model']!r}")
    spec = ExperimentSpec(thresholds=thresholds, **values)
    return spec.validate()


def _apply_overrides(spec: ExperimentSpec, args: argparse.Namespace) -> ExperimentSpec:
    changes = {}
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.out is not None:
        changes["out"] = args.out
    if args.ladder is not None:
        changes["ladder"] = _parse_ladder(args.ladder)
    if args.nres is not None:
        changes["n_res"] = args.nres
    return replace(spec, **changes).validate() if changes else spec


# serialization -------------------------------------------------------------


def to_jsonable(obj):
    """Plain JSON types; complex numbers become [re, im], non-finite floats null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return to_jsonable(c.real) if c.imag == 0 else [to_jsonable(c.real), to_jsonable(c.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(data) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"


def report_schema() -> dict:
    text = resources.files("btlab").joinpath("report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _flatten(prefix: str, obj, rows: list) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            if isinstance(v, (dict, list)):
                _flatten(f"{prefix}[{i}]", v, rows)
            else:
                rows.append((prefix, i, v))
    else:
        rows.append((prefix, "", obj))


def write_outputs(report: Report, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    data = to_jsonable(report.as_dict())
    (out / "report.json").write_text(dump_json(data), encoding="utf-8")
    with open(out / "samples.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLE_COLUMNS)
        for row in data["samples"]:
            w.writerow(["" if row[c] is None else row[c] for c in SAMPLE_COLUMNS])
    with open(out / "fits.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(FIT_COLUMNS)
        for name in sorted(data["fits"]):
            rows: list = []
            _flatten("", data["fits"][name], rows)
            for key, idx, value in rows:
                w.writerow([name, key, idx, "" if value is None else value])


def summarize_report(data: dict) -> str:
    spec = data.get("spec", {})
    lines = [
        f"model: {spec.get('model')}  experiment: {spec.get('experiment')}  "
        f"f: {spec.get('f')}  g: {spec.get('g')}",
        f"ladder: {spec.get('ladder')}",
        "",
        f"{'m':>6}  {'raw':>14}  {'fitted':>14}  {'residual':>10}",
    ]
    for row in data.get("samples", []):
        def fmt(v, width=14):
            if v is None:
                return " " * (width - 1) + "-"
            if isinstance(v, list):
                return f"{v[0]:.6e}{v[1]:+.1e}j".rjust(width)
            return f"{v:{width}.6e}"

        lines.append(f"{row['m']:>6}  {fmt(row['raw'])}  {fmt(row['fitted'])}  {fmt(row['residual'], 10)}")
    lines.append("")
    for name, c in sorted(data.get("checks", {}).items()):
        status = "PASS" if c["pass"] else "FAIL"
        lines.append(f"[{status}] {name}: {c['value']} (threshold {c['threshold']})")
    if data.get("error"):
        lines.append(f"error: {data['error']}")
    lines.append(f"overall: {'PASS' if data.get('passed') else 'FAIL'}")
    return "\n".join(lines)


# subcommands ---------------------------------------------------------------


def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"btlab.cli: cannot read config {args.config}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_ERROR
    spec = _apply_overrides(parse_config(text), args)
    report = run_experiment(spec)
    out = Path(spec.out or "btlab_out")
    write_outputs(report, out)
    print(summarize_report(to_jsonable(report.as_dict())))
    print(f"wrote {out / 'report.json'}, {out / 'samples.csv'}, {out / 'fits.csv'}")
    if report.error:
        print(f"btlab.experiments: {report.error}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if report.passed else EXIT_THRESHOLD


def _cmd_list_models(args) -> int:
    for kind in MODEL_KINDS:
        print(kind)
    return EXIT_OK


def _cmd_list_observables(args) -> int:
    model = make_model(args.model)
    for name in sorted(model.observables):
        print(name)
    return EXIT_OK


def clear_caches() -> None:
    cached_level.cache_clear()
    coherent.fs_sign.cache_clear()


def verify_report(numbers=None) -> dict:
    """Run the acceptance criteria; numeric fields are separate from timing."""
    t0 = time.perf_counter()
    results = acceptance.run_all(numbers)
    return {
        "criteria": [
            {"number": r.number, "title": r.title, "pass": r.passed, "metrics": to_jsonable(r.metrics)}
            for r in results
        ],
        "passed": all(r.passed for r in results),
        "timing": {
            "total_seconds": time.perf_counter() - t0,
            "criteria": {str(r.number): r.seconds for r in results},
        },
    }


def _numeric_part(report: dict) -> str:
    return dump_json({k: v for k, v in report.items() if k != "timing"})


def _cmd_verify(args) -> int:
    numbers = [int(v) for v in args.criteria.split(",")] if args.criteria else None
    report = verify_report(numbers)
    print(f"{'':7}{'#':>3}  {'criterion':<88}{'seconds':>8}")
    for row in report["criteria"]:
        status = "PASS" if row["pass"] else "FAIL"
        secs = report["timing"]["criteria"][str(row["number"])]
        print(f"[{status}] {row['number']:>3}  {row['title']:<88}{secs:8.2f}")
    total = report["timing"]["total_seconds"]
    budget_ok = total < acceptance.VERIFY_BUDGET_S
    print(f"total {total:.1f} s (budget {acceptance.VERIFY_BUDGET_S} s: {'ok' if budget_ok else 'exceeded'})")
    if args.check_determinism:
        clear_caches()
        again = verify_report(numbers)
        same = _numeric_part(report) == _numeric_part(again)
        report["deterministic"] = same
        print(f"rerun byte-identical: {'yes' if same else 'NO'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(dump_json(report), encoding="utf-8")
    ok = report["passed"] and budget_ok and report.get("deterministic", True)
    return EXIT_OK if ok else EXIT_THRESHOLD


def _cmd_report(args) -> int:
    path = Path(args.dir) / "report.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"btlab.cli: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_ERROR
    print(summarize_report(data))
    return EXIT_OK if data.get("passed") else EXIT_THRESHOLD


class _Seedless(argparse.Action):
    """Reserved flag: accepted bare, rejected with a value."""

    def __init__(self, option_strings, dest, **kwargs):
        super().__init__(option_strings, dest, nargs=0, default=False, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=None, help="max concurrent level cells")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--ladder", default=None, help="comma-separated levels, e.g. 8,16,32")
    common.add_argument("--nres", type=int, default=None, help="quadrature resolution override")
    common.add_argument("--seedless", action=_Seedless, help="no-op; nothing here uses an RNG")

    parser = argparse.ArgumentParser(prog="btlab", description="Berezin-Toeplitz quantization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one experiment from a config file")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("list-models", parents=[common], help="list model kinds")
    p.set_defaults(func=_cmd_list_models)
    p = sub.add_parser("list-observables", parents=[common], help="list named observables of a model")
    p.add_argument("model", choices=MODEL_KINDS)
    p.set_defaults(func=_cmd_list_observables)
    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--criteria", default=None, help="comma-separated subset, e.g. 1,5,9")
    p.add_argument("--check-determinism", action="store_true", help="rerun with cold caches and compare")
    p.set_defaults(func=_cmd_verify)
    p = sub.add_parser("report", parents=[common], help="summarize a written report directory")
    p.add_argument("dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except Exception as exc:
        print(f"{type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
