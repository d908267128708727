"""Command-line batch runner.

Every subcommand builds a JSON report, writes it to the output directory
(``--output-dir``, overridden by the ``OUTPUT_DIR`` environment variable)
and prints it.  ``run --config FILE`` executes a list of experiments read
from a JSON file checked against :data:`CONFIG_SCHEMA`.

Exit status
-----------
0
    Every residual vanished and every tolerance was met.
1
    A numerical failure, or a check that did not hold.
2
    Usage, schema or validation error.

CSV tables
----------
``scan``
    ``lambda,norm_mid,norm_far,s`` (one row per level and Sobolev order).
``verify``
    ``draw,dim,kernel_pairs,coupled,r,residual``.
"""

import argparse
import csv
import io as _stdio
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import io as _io
from .boundary import BoundaryCondition
from .calderon import (block_formula_projection, calderon_subspaces, constant_pair,
                       decay_scan, duality_check, find_lambda0, graph_representation,
                       projection_defects)
from .errors import ConfigError, DiracLabError, DimensionError, ValidationError
from .evolution import CoefficientPath, validate_path
from .examples import (build_family, cylinder_family, hyperbolic_even_model, hyperbolic_odd_model,
                       mu_model, shipped_paths)
from .index_lab import DEFAULT_DIMS, THEOREMS, adjoint_sum, ext_index, run_batch, verify_windgen
from .spectral_core import check_dirac_data, eigendecompose, spectral_subspace, validate_dirac_data
from .subspace import span

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

DUALITY_TOL = 1e-8
SCAN_SLACK = 0.3
VERIFY_COLUMNS = ("draw", "dim", "kernel_pairs", "coupled", "r", "residual")
EXAMPLES = ("hyperbolic-even", "hyperbolic-odd", "mu")

_matrix = {"type": "array", "items": {"type": "array", "items": {
    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}}
_system = {"type": "object", "required": ["a0", "gamma"],
           "properties": {"a0": _matrix, "gamma": _matrix, "alpha": _matrix,
                          "dim": {"type": "integer"}, "tol": {"type": "number"}}}
_source = {"file": {"type": "string"}, "system": _system}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "diraclab experiment configuration",
    "type": "object",
    "required": ["experiments"],
    "additionalProperties": False,
    "properties": {
        "output_dir": {"type": "string"},
        "experiments": {"type": "array", "items": {"$ref": "#/$defs/experiment"}},
    },
    "$defs": {
        "experiment": {
            "type": "object",
            "required": ["command"],
            "properties": {"command": {"enum": ["validate", "calderon", "index", "verify",
                                                "example", "scan"]}},
            "allOf": [
                {"if": {"properties": {"command": {"const": "validate"}}},
                 "then": {"$ref": "#/$defs/validate"}},
                {"if": {"properties": {"command": {"const": "calderon"}}},
                 "then": {"$ref": "#/$defs/calderon"}},
                {"if": {"properties": {"command": {"const": "index"}}},
                 "then": {"$ref": "#/$defs/index"}},
                {"if": {"properties": {"command": {"const": "verify"}}},
                 "then": {"$ref": "#/$defs/verify"}},
                {"if": {"properties": {"command": {"const": "example"}}},
                 "then": {"$ref": "#/$defs/example"}},
                {"if": {"properties": {"command": {"const": "scan"}}},
                 "then": {"$ref": "#/$defs/scan"}},
            ],
        },
        "validate": {"additionalProperties": False,
                     "properties": {"command": {}, **_source},
                     "oneOf": [{"required": ["file"]}, {"required": ["system"]}]},
        "calderon": {"additionalProperties": False,
                     "properties": {"command": {}, "path": {"$ref": "#/$defs/path"},
                                    "method": {"enum": ["shooting", "fundamental"]},
                                    "resolution": {"type": "integer", "minimum": 2}},
                     "required": ["path"]},
        "path": {"oneOf": [
            {"type": "string"},
            {"type": "object", "additionalProperties": False, "required": ["family"],
             "properties": {"family": {"enum": ["cylinder", "coupled-2d", "random",
                                                "even-block", "odd-block"]},
                            "params": {"type": "object"}}},
            {"type": "object", "additionalProperties": False,
             "required": ["gamma", "knots", "A"],
             "properties": {"gamma": _matrix,
                            "knots": {"type": "array", "minItems": 1,
                                      "items": {"type": "number"}},
                            "A": {"type": "array", "items": _matrix},
                            "V": {"type": "array", "items": _matrix}}}]},
        "index": {"additionalProperties": False,
                  "properties": {"command": {}, **_source,
                                 "rel": {"enum": ["<", "<=", ">", ">="]},
                                 "lam": {"type": "number"},
                                 "frame": _matrix},
                  "oneOf": [{"required": ["file"]}, {"required": ["system"]}]},
        "verify": {"additionalProperties": False,
                   "properties": {"command": {}, "theorem": {"enum": sorted(THEOREMS)},
                                  "dim": {"type": "integer", "minimum": 2, "multipleOf": 2},
                                  "dims": {"type": "array", "minItems": 1, "items": {
                                      "type": "integer", "minimum": 2, "multipleOf": 2}},
                                  "draws": {"type": "integer", "minimum": 0},
                                  "seed": {"type": "integer", "minimum": 0}},
                   "required": ["theorem"]},
        "example": {"additionalProperties": False,
                    "properties": {"command": {}, "name": {"enum": list(EXAMPLES)},
                                   "K": {"type": "integer", "minimum": 1},
                                   "mu": {"type": "number"},
                                   "T": {"type": "array", "items": {"type": "number",
                                                                    "exclusiveMinimum": 0}}},
                    "required": ["name"]},
        "scan": {"additionalProperties": False,
                 "properties": {"command": {}, "K": {"type": "integer", "minimum": 2},
                                "coupling": {"type": "number"},
                                "lambdas": {"type": "array", "minItems": 4,
                                            "items": {"type": "number", "exclusiveMinimum": 0}},
                                "s": {"type": "array", "minItems": 1,
                                      "items": {"type": "number"}}}},
    },
}


# ---------------------------------------------------------------------------
# config handling

def _pointer(path):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_config(cfg):
    """Check ``cfg`` against :data:`CONFIG_SCHEMA`.

    Raises
    ------
    ConfigError
        With ``pointer`` set to the first offending field (the deepest error
        reported by the validator).
    """
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = list(validator.iter_errors(cfg))
    if errors:
        err = max(errors, key=lambda e: (len(e.absolute_path), str(e.absolute_path)))
        leaf = jsonschema.exceptions.best_match([err])
        while leaf.context:
            leaf = max(leaf.context, key=lambda e: len(e.absolute_path))
        raise ConfigError(leaf.message, _pointer(leaf.absolute_path),
                          {"validator": leaf.validator})
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "") from None
    return validate_config(cfg)


def _load_system_obj(exp, pointer):
    if "system" in exp:
        return exp["system"], pointer + "/system"
    try:
        obj = json.loads(Path(exp["file"]).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load system file: {exc}", pointer + "/file") from None
    try:
        jsonschema.validate(obj, _system)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, pointer + "/file" + _pointer(exc.absolute_path)) from None
    return obj, pointer + "/file"


def _decode_system(obj, pointer):
    try:
        a0 = _io.decode_matrix(obj["a0"])
        gamma = _io.decode_matrix(obj["gamma"])
        alpha = _io.decode_matrix(obj["alpha"]) if obj.get("alpha") is not None else None
    except ValueError as exc:
        raise ConfigError(str(exc), pointer) from None
    return a0, gamma, alpha


# ---------------------------------------------------------------------------
# experiments; each returns (report, csv_text or None, ok)

def exp_validate(exp, pointer=""):
    obj, ptr = _load_system_obj(exp, pointer)
    a0, gamma, alpha = _decode_system(obj, ptr)
    rep = check_dirac_data(a0, gamma, alpha, obj.get("tol"))
    report = {"command": "validate", **rep.to_dict()}
    if not rep.ok:
        err = ValidationError("invalid Dirac data", rep.violations)
        report["error"] = {"code": err.code, "pointer": ptr}
    return report, None, rep.ok


def build_path(spec, pointer="/path"):
    """Coefficient path from a config value.

    A string names a shipped path; ``{"family", "params"}`` instantiates a
    family; ``{"gamma", "knots", "A", "V"}`` gives piecewise-linear tables.
    """
    if isinstance(spec, str):
        paths = shipped_paths()
        if spec not in paths:
            raise ConfigError(f"unknown path {spec!r}; choose from {sorted(paths)}", pointer)
        return spec, paths[spec]
    if "family" in spec:
        try:
            return spec["family"], build_family(spec["family"], **dict(spec.get("params", {})))
        except TypeError as exc:
            raise ConfigError(str(exc), pointer + "/params") from None
    try:
        gamma = _io.decode_matrix(spec["gamma"])
        A = np.array([_io.decode_matrix(M) for M in spec["A"]])
        V = np.array([_io.decode_matrix(M) for M in spec["V"]]) if "V" in spec else None
    except ValueError as exc:
        raise ConfigError(str(exc), pointer) from None
    if len(A) != len(spec["knots"]) or (V is not None and len(V) != len(A)):
        raise ConfigError("one matrix per knot is required", pointer + "/A")
    d = validate_dirac_data(A[0], gamma)
    path = CoefficientPath.from_tables(d, spec["knots"], A, V)
    validate_path(path)
    return "table", path


def exp_calderon(exp, pointer=""):
    name, path = build_path(exp["path"], pointer + "/path")
    pair = calderon_subspaces(path, method=exp.get("method", "shooting"),
                              resolution=exp.get("resolution"))
    d = path.d
    dual = duality_check(pair, d)
    lam0 = find_lambda0(pair, d)
    gd = graph_representation(pair, d, lam0)
    block = float(np.linalg.norm(block_formula_projection(gd) - pair.p_ext, 2))
    ok = dual < DUALITY_TOL and block < DUALITY_TOL
    report = {"command": "calderon", "path": name, "dim": pair.dim,
              "dim_c_max": pair.c_max.dim, "dim_c_ext": pair.c_ext.dim,
              "duality_residual": dual, "lambda0": lam0,
              "block_formula_residual": block,
              "projection_defects": projection_defects(pair),
              "stats": pair.stats, "tolerance": DUALITY_TOL, "ok": ok}
    return report, None, ok


def exp_index(exp, pointer=""):
    obj, ptr = _load_system_obj(exp, pointer)
    a0, gamma, alpha = _decode_system(obj, ptr)
    d = validate_dirac_data(a0, gamma, alpha, obj.get("tol"))
    pair = constant_pair(d)
    if "frame" in exp:
        try:
            frame = _io.decode_matrix(exp["frame"], order="col", shape=(d.dim, None))
        except ValueError as exc:
            raise ConfigError(str(exc), pointer + "/frame") from None
        B = BoundaryCondition(span(frame, ambient_dim=d.dim), "frame")
    else:
        rel = exp.get("rel", "<=")
        lam = float(exp.get("lam", 0.0))
        B = BoundaryCondition(spectral_subspace(eigendecompose(d), rel, lam),
                              f"spectral({rel}{lam:g})")
    rep = ext_index(B, pair, d)
    adj = adjoint_sum(B, pair, d)
    residuals = {"windgen": verify_windgen(B, pair, d), "adjoint_sum": adj["residual"]}
    ok = all(v == 0 for v in residuals.values())
    report = {"command": "index", "condition": B.label, "dim_B": B.dim,
              **rep.to_dict(), "residuals": residuals, "ok": ok}
    return report, None, ok


def _verify_csv(results):
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VERIFY_COLUMNS)
    for r in results:
        p = r["params"]
        w.writerow([p["index"], p["dim"], p["kernel_pairs"], int(p["coupled"]),
                    format(p["r"], ".17g"), r["residual"]])
    return buf.getvalue()


def exp_verify(exp, pointer=""):
    if "dims" in exp:
        dims = tuple(exp["dims"])
    elif "dim" in exp:
        dims = (int(exp["dim"]),)
    else:
        dims = DEFAULT_DIMS
    draws = int(exp.get("draws", 200))
    rep = run_batch(exp["theorem"], draws, int(exp.get("seed", 0)), dims)
    report = {"command": "verify", **rep}
    return report, _verify_csv(rep["results"]), rep["ok"]


def exp_example(exp, pointer=""):
    name = exp["name"]
    if name == "hyperbolic-even":
        K = int(exp.get("K", 5))
        if K < 2:
            raise ConfigError("K must be at least 2", pointer + "/K")
        _, rep = hyperbolic_even_model(K)
        ok = rep["count"] == K - 1
    elif name == "hyperbolic-odd":
        K = int(exp.get("K", 3))
        rep = hyperbolic_odd_model(K, tuple(exp.get("T", (10.0, 20.0, 40.0, 80.0))))
        ok = abs(rep["growth_slope"] - 1.0) <= 0.05
    else:
        rep = mu_model(float(exp.get("mu", 1.0)), tuple(exp.get("T", (10.0, 100.0, 1000.0))))
        ok = True
    return {"command": "example", "name": name, **rep, "ok": bool(ok)}, None, bool(ok)


def scan_bounds(s):
    """Exponent bounds (plus slack) for the middle and far scan norms."""
    return -0.5 - s + SCAN_SLACK, -1.0 + SCAN_SLACK


def exp_scan(exp, pointer=""):
    K = int(exp.get("K", 64))
    coupling = float(exp.get("coupling", 0.5))
    lambdas = [float(x) for x in exp.get("lambdas", (4.0, 8.0, 16.0, 32.0))]
    s_values = [float(x) for x in exp.get("s", (-0.5, 0.0, 0.5))]
    path = cylinder_family(K, coupling)
    pair = calderon_subspaces(path)
    sc = decay_scan(pair, path.d, lambdas, s_values)
    checks = {}
    ok = True
    for s in s_values:
        bm, bf = scan_bounds(s)
        mid, far = sc.slope_mid[s], sc.slope_far[s]
        good = (mid is None or mid <= bm) and (far is None or far <= bf)
        checks[format(s, "g")] = {"slope_mid": mid, "bound_mid": bm, "slope_far": far,
                                  "bound_far": bf, "ok": good}
        ok = ok and good
    report = {"command": "scan", "K": K, "coupling": coupling, "lambdas": lambdas,
              "s": s_values, **sc.to_dict(), "checks": checks, "ok": ok}
    return report, sc.to_csv(), ok


EXPERIMENTS = {"validate": exp_validate, "calderon": exp_calderon, "index": exp_index,
               "verify": exp_verify, "example": exp_example, "scan": exp_scan}


# ---------------------------------------------------------------------------
# output

def output_dir(default="reports"):
    return Path(os.environ.get("OUTPUT_DIR") or default)


def emit_report(results, out_dir, stem="report", tables=None):
    """Write ``results`` as deterministic JSON (plus optional CSV tables).

    ``tables`` maps a file suffix to CSV text.  Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"{stem}.json"
    target.write_text(_io.dumps_report(results))
    written = [target]
    for suffix, text in (tables or {}).items():
        p = out_dir / f"{stem}{suffix}.csv"
        p.write_text(text)
        written.append(p)
    return written


def _error_report(exc, command):
    out = {"command": command, "ok": False, "error": exc.to_dict()}
    if isinstance(exc, ConfigError):
        out["error"]["pointer"] = exc.pointer
    return out


def _exit_for(exc):
    if isinstance(exc, (ConfigError, ValidationError, DimensionError)):
        return EXIT_USAGE
    return EXIT_FAILURE


def run_one(exp, pointer=""):
    """Run one experiment dict; returns ``(report, csv_text, exit_code)``."""
    command = exp["command"]
    try:
        report, table, ok = EXPERIMENTS[command](exp, pointer)
    except DiracLabError as exc:
        return _error_report(exc, command), None, _exit_for(exc)
    if ok:
        return report, table, EXIT_OK
    return report, table, EXIT_USAGE if command == "validate" else EXIT_FAILURE


def run_config(cfg, out_dir=None):
    """Execute every experiment of a validated config.

    Returns ``(reports, exit_code)``; the exit code is the largest one seen,
    so a usage problem in any experiment dominates a numerical failure.
    """
    out_dir = output_dir(cfg.get("output_dir", "reports")) if out_dir is None else Path(out_dir)
    reports, code = [], EXIT_OK
    for i, exp in enumerate(cfg["experiments"]):
        report, table, rc = run_one(exp, f"/experiments/{i}")
        reports.append(report)
        if table is not None:
            emit_report(report, out_dir, f"{i:03d}-{exp['command']}", {"": table})
        code = max(code, rc)
    emit_report(reports, out_dir, "reports")
    return reports, code


# ---------------------------------------------------------------------------
# argument parsing

def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="diraclab", description="Dirac-Schrödinger system laboratory")
    p.add_argument("--version", action="version", version=f"diraclab {__version__}")
    p.add_argument("--output-dir", default="reports",
                   help="directory for reports (OUTPUT_DIR overrides it)")
    p.add_argument("--quiet", action="store_true", help="do not echo the report")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run the experiments of a JSON config")
    s.add_argument("--config", required=True)

    s = sub.add_parser("schema", help="print the config JSON schema")

    s = sub.add_parser("validate", help="check a system file")
    s.add_argument("--file", required=True)

    s = sub.add_parser("calderon", help="Calderón pair of a shipped path")
    s.add_argument("--path", required=True,
                   help="shipped path name (" + ", ".join(sorted(shipped_paths())) + ")")
    s.add_argument("--method", choices=["shooting", "fundamental"], default="shooting")
    s.add_argument("--resolution", type=int)

    s = sub.add_parser("index", help="extended index of a constant system")
    s.add_argument("--file", required=True)
    s.add_argument("--rel", choices=["<", "<=", ">", ">="], default="<=")
    s.add_argument("--lam", type=float, default=0.0)

    s = sub.add_parser("verify", help="randomized verification batch")
    s.add_argument("theorem", choices=sorted(THEOREMS))
    s.add_argument("--dim", type=int)
    s.add_argument("--dims", type=_ints)
    s.add_argument("--draws", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("example", help="analytic example models")
    s.add_argument("name", choices=EXAMPLES)
    s.add_argument("--K", type=int)
    s.add_argument("--mu", type=float)
    s.add_argument("--T", type=_floats)

    s = sub.add_parser("scan", help="decay scan on the cylinder family")
    s.add_argument("--K", type=int, default=64)
    s.add_argument("--coupling", type=float, default=0.5)
    s.add_argument("--lambdas", type=_floats, default=[4.0, 8.0, 16.0, 32.0])
    s.add_argument("--s", type=_floats, default=[-0.5, 0.0, 0.5])
    return p


def _experiment_from_args(args):
    exp = {"command": args.command}
    for key in ("file", "path", "method", "resolution", "rel", "lam", "theorem", "dim", "dims",
                "draws", "seed", "name", "K", "mu", "T", "coupling", "lambdas", "s"):
        val = getattr(args, key, None)
        if val is not None:
            exp[key] = val
    return exp


def _echo(obj, quiet):
    if not quiet:
        sys.stdout.write(_io.dumps_report(obj))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "schema":
        sys.stdout.write(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    out_dir = output_dir(args.output_dir)
    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            report = _error_report(exc, "run")
            emit_report([report], out_dir, "reports")
            _echo(report, args.quiet)
            return EXIT_USAGE
        if "output_dir" in cfg and not os.environ.get("OUTPUT_DIR"):
            out_dir = Path(cfg["output_dir"])
        reports, code = run_config(cfg, out_dir)
        _echo(reports, args.quiet)
        return code
    exp = _experiment_from_args(args)
    try:
        validate_config({"experiments": [exp]})
    except ConfigError as exc:
        exc.pointer = exc.pointer.removeprefix("/experiments/0")
        report = _error_report(exc, args.command)
        emit_report(report, out_dir, args.command)
        _echo(report, args.quiet)
        return EXIT_USAGE
    report, table, code = run_one(exp)
    emit_report(report, out_dir, args.command, {"": table} if table is not None else None)
    _echo(report, args.quiet)
    return code


def main_entry():  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
