"""Command-line front end.

Every subcommand reads its parameters from an optional INI file (one
section per subcommand, keys named like the long flags with dashes or
underscores) and from flags; flags win.  Output is text, JSON or CSV.  CSV
and JSON carry the package version and a hash of the resolved parameters.

Exit codes: 0 success, 1 non-convergence, 2 configuration error, 3
degenerate input.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from typing import Callable, Optional

import numpy as np

from . import __version__
from .grassmann import FIELD_PRESETS, ModeLattice, verify_unit_jacobian
from .loop_amplitudes import (
    ANOMALY_LIMIT,
    PERMUTATIONS,
    CutoffPair,
    Kinematics,
    NonConvergence,
    contracted_deviation,
    contracted_triangle,
    gamma_AAA,
    gamma_AAA_direct,
    ir_second_derivative_scan,
    uv_scan,
)
from .quadrature import WORKERS_ENV, R4Integrand, integrate_r4
from .tensor_basis import DegenerateKinematics, decompose
from .vsti import anomaly_obstruction, relations_report, solve_relations

EXIT_OK, EXIT_NONCONVERGENCE, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2, 3

FUJIKAWA_REFERENCE = 1.0 / (16.0 * math.pi**2)


class ConfigError(ValueError):
    """Malformed configuration value or file."""


# ---------------------------------------------------------------------------
# value parsers

def _float(s) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _vector(s) -> tuple:
    v = tuple(_float(x) for x in str(s).replace(" ", "").split(","))
    if len(v) != 4:
        raise ValueError(f"{s!r} is not a 4-vector")
    return v


def _float_list(s) -> tuple:
    return tuple(_float(x) for x in str(s).replace(" ", "").split(",") if x)


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _choice(*options) -> Callable:
    def parse(s):
        if s not in options:
            raise ValueError(f"{s!r} not in {options}")
        return s
    return parse


def _derivative(s) -> tuple:
    """``"2:0,3:1"`` -> ((2, 0), (3, 1)); empty string -> ()."""
    out = []
    for item in str(s).replace(" ", "").split(","):
        if item:
            leg, comp = item.split(":")
            out.append((int(leg), int(comp)))
    return tuple(out)


def _assignments(s) -> tuple:
    """``"sigma_long=0.3,delta_g=0.1"`` -> sorted (key, value) pairs."""
    out = {}
    for item in str(s).replace(" ", "").split(","):
        if item:
            k, v = item.split("=")
            out[k] = v
    return tuple(sorted(out.items()))


EQUILATERAL_P2 = (-0.5, 0.5 * math.sqrt(3.0), 0.0, 0.0)
EQUILATERAL_P3 = (-0.5, -0.5 * math.sqrt(3.0), 0.0, 0.0)

FAMILY_KEYS = ("sigma_long", "sigma_psibar_psi", "delta_g", "g", "alpha", "M", "sigma_trans")

# per subcommand: name -> (parser, default, help)
PARAMS = {
    "anomaly": {
        "p2": (_vector, EQUILATERAL_P2, "momentum p2 as a,b,c,d"),
        "p3": (_vector, EQUILATERAL_P3, "momentum p3 as a,b,c,d"),
        "lambda0": (_float, 1e3, "UV cutoff"),
        "tol": (_float, 1e-9, "absolute quadrature tolerance"),
    },
    "triangle": {
        "p2": (_vector, EQUILATERAL_P2, "momentum p2"),
        "p3": (_vector, EQUILATERAL_P3, "momentum p3"),
        "lam": (_float, 0.1, "IR flow parameter"),
        "lambda0": (_float, 50.0, "UV cutoff"),
        "tol": (_float, 1e-8, "tolerance of the Feynman-parameter route"),
        "oracle": (_bool, False, "also evaluate the direct loop integral"),
        "oracle_tol": (_float, 1e-5, "tolerance of the direct loop integral"),
        "permute": (_bool, False, "evaluate all six Bose permutations"),
    },
    "relations": {
        "solution": (_choice("zero", "family"), "zero", "which solution of the relations"),
        "family": (_assignments, (), "family parameters k=v,..."),
        "p2": (_vector, EQUILATERAL_P2, "renormalization point p2"),
        "p3": (_vector, EQUILATERAL_P3, "renormalization point p3"),
        "lambda0": (_float, 1e3, "UV cutoff for the obstruction"),
        "tol": (_float, 1e-10, "quadrature tolerance"),
    },
    "jacobian": {
        "fields": (_choice(*FIELD_PRESETS), "reduced", "field content"),
        "modes": (str, "3x1x1x1", "mode box, e.g. 3x1x1x1"),
        "lambda0": (_float, 2.0, "cutoff in units of 2 pi/L"),
        "constants": (_assignments, (("R1", "1"), ("R2", "1"), ("R3", "1"), ("R4", "1")),
                      "R1..R4 as k=v,..."),
        "g": (_float, 1.0, "gauge coupling"),
        "alpha": (_float, 1.0, "gauge parameter"),
        "mutate": (_choice("none", "diag", "offdiag"), "none", "plant a defect"),
    },
    "scan": {
        "kind": (_choice("uv", "ir", "fujikawa"), "uv", "which scan"),
        "p2": (_vector, EQUILATERAL_P2, "momentum p2 (uv)"),
        "p3": (_vector, EQUILATERAL_P3, "momentum p3"),
        "lambda0_list": (_float_list, (1e2, 10**2.5, 1e3, 10**3.5), "UV cutoffs (uv)"),
        "derivative": (_derivative, (), "derivative multi-index leg:comp,... (uv)"),
        "lambda_list": (_float_list, (0.1, 10**-1.5, 0.01), "IR regulators in units of |p3| (ir)"),
        "lambda0": (_float, 30.0, "UV cutoff (ir)"),
        "tol": (_float, 1e-6, "quadrature tolerance"),
    },
}


# ---------------------------------------------------------------------------
# configuration

def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _show_default(value) -> str:
    # tuples of pairs print as k=v,...; plain tuples as comma lists
    if value == ():
        return "none"
    if isinstance(value, tuple):
        if isinstance(value[0], tuple):
            return ",".join(f"{k}={v}" for k, v in value)
        return ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiral-anomaly", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="INI file with one section per subcommand")
    p.add_argument("--workers", type=int, help=f"quadrature worker threads (default ${WORKERS_ENV})")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--output", help="write the primary output here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)
    for name, params in PARAMS.items():
        sp = sub.add_parser(name)
        for key, (_, default, helptext) in params.items():
            if key == "kind":
                sp.add_argument("kind", nargs="?", default=None, help=helptext)
            elif key in ("oracle", "permute"):
                sp.add_argument(_flag(key), action="store_const", const="true", default=None,
                                help=helptext)
            else:
                sp.add_argument(_flag(key), default=None,
                                help=f"{helptext} (default {_show_default(default)})")
        if name == "relations":
            sp.add_argument("--json", action="store_true", help="same as --format json")
    return p


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file section, then flags."""
    params = PARAMS[command]
    raw = {}
    if args.config:
        cp = configparser.ConfigParser()
        try:
            with open(args.config) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        extra = set(cp.sections()) - set(PARAMS)
        if extra:
            raise ConfigError(f"unknown config sections {sorted(extra)}")
        if cp.has_section(command):
            for k, v in cp.items(command):
                key = k.replace("-", "_")
                if key not in params:
                    raise ConfigError(f"unknown key {k!r} in section [{command}]")
                raw[key] = v
    for key in params:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    out = {}
    for key, (parse, default, _) in params.items():
        if key in raw:
            try:
                out[key] = parse(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
        else:
            out[key] = default
    return out


def config_hash(command: str, config: dict) -> str:
    blob = json.dumps({"command": command, **config}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _kinematics(config: dict) -> Kinematics:
    kin = Kinematics.from_p2_p3(config["p2"], config["p3"])
    if not kin.non_exceptional():
        raise DegenerateKinematics("exceptional momenta: a partial sum vanishes")
    return kin


# ---------------------------------------------------------------------------
# subcommands; each returns (summary dict, csv header, csv rows)

def cmd_anomaly(config: dict):
    kin = _kinematics(config)
    lam0 = config["lambda0"]
    ct = contracted_triangle(kin, lam0, config["tol"], strict=True)
    dev = contracted_deviation(kin, lam0, min(config["tol"], 1e-12), strict=True)
    summary = {
        "coefficient": ct.coefficient,
        "error": ct.error_estimate,
        "reference": ANOMALY_LIMIT,
        "relative_deviation": abs(ct.coefficient - ANOMALY_LIMIT) / ANOMALY_LIMIT,
        "deviation_from_limit": abs(dev.coefficient),
        "evaluations": ct.evaluations,
        "converged": ct.converged,
        "trace_sign": ct.trace_sign,
    }
    header = ["lambda0", "coefficient", "error", "reference", "relative_deviation",
              "deviation_from_limit"]
    rows = [[lam0, ct.coefficient, ct.error_estimate, ANOMALY_LIMIT,
             summary["relative_deviation"], summary["deviation_from_limit"]]]
    return summary, header, rows


def _bose_residual(kin: Kinematics, cutoffs: CutoffPair, tol: float, base: np.ndarray):
    res, err = 0.0, 0.0
    for order in PERMUTATIONS:
        t = gamma_AAA(kin.permuted(order), cutoffs, tol, strict=True)
        axes = [order.index(str(j + 1)) for j in range(3)]
        res = max(res, float(np.abs(np.transpose(t.components, axes) - base).max()))
        err = max(err, t.max_error())
    return res, err


def cmd_triangle(config: dict):
    kin = _kinematics(config)
    try:
        cutoffs = CutoffPair(config["lam"], config["lambda0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    t = gamma_AAA(kin, cutoffs, config["tol"], strict=True)
    inv = decompose(t.components, kin)
    summary = {
        "max_abs": float(np.abs(t.components).max()),
        "max_error": t.max_error(),
        "invariants": {f"A{i + 1}": float(v) for i, v in enumerate(inv.a)},
        "condition_number": inv.condition_number,
        "decomposition_residual": inv.residual,
    }
    header = ["mu", "nu", "rho", "value", "error"]
    direct = None
    if config["oracle"]:
        direct = gamma_AAA_direct(kin, cutoffs, config["oracle_tol"], strict=True)
        header += ["direct", "direct_error"]
        scale = float(np.abs(t.components).max())
        summary["oracle_max_abs_difference"] = float(np.abs(direct.components - t.components).max())
        summary["oracle_max_relative_difference"] = summary["oracle_max_abs_difference"] / scale
    if config["permute"]:
        res, err = _bose_residual(kin, cutoffs, config["tol"], t.components)
        summary["bose_max_residual"] = res
        summary["bose_max_error"] = err
    rows = []
    for idx in np.ndindex(4, 4, 4):
        row = [*idx, float(t.components[idx]), float(t.error[idx])]
        if direct is not None:
            row += [float(direct.components[idx]), float(direct.error[idx])]
        rows.append(row)
    return summary, header, rows


def cmd_relations(config: dict):
    # family parameters select the family solution; the zero solution is the
    # family member with all of them at their defaults
    fam = dict(config["family"]) if config["solution"] == "family" or config["family"] else {}
    unknown = set(fam) - set(FAMILY_KEYS)
    if unknown:
        raise ConfigError(f"unknown family parameters {sorted(unknown)}")
    try:
        c = solve_relations(**fam)
    except (ZeroDivisionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    kin = _kinematics(config)
    obs = anomaly_obstruction(config["lambda0"], kin, config["tol"], constants=c)
    rep = relations_report(c, obstruction=obs)
    summary = rep.to_dict()
    summary["verdict"] = rep.notes["verdict"]
    summary["obstruction"] = {k: v for k, v in obs.to_dict().items()
                              if k not in ("value_w0", "values_w1")}
    header = ["relation", "value", "passed"]
    rows = [[k, e["value"], e["passed"]] for k, e in summary["entries"].items()]
    return summary, header, rows


def cmd_jacobian(config: dict):
    try:
        modes = ModeLattice.parse(config["modes"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    consts = dict(config["constants"])
    cert = verify_unit_jacobian(modes, config["lambda0"], consts, g=config["g"],
                                alpha=config["alpha"], field_content=config["fields"],
                                mutate=None if config["mutate"] == "none" else config["mutate"])
    summary = cert.to_dict()
    summary["verdict"] = "PASS" if cert.passed else "FAIL"
    summary["text"] = cert.to_text()
    header = ["check", "passed", "detail"]
    rows = [[n, ok, d] for n, ok, d in cert.checks]
    return summary, header, rows


def cmd_scan(config: dict):
    kind = config["kind"]
    if kind == "fujikawa":
        res = integrate_r4(R4Integrand(lambda k: np.exp(-np.sum(k * k, axis=1)), 50.0, 10.0),
                           tol=1e-12, rtol=1e-10)
        v = float(res.value)
        summary = {"value": v, "error": float(res.error_estimate),
                   "reference": FUJIKAWA_REFERENCE,
                   "abs_difference": abs(v - FUJIKAWA_REFERENCE)}
        return summary, ["value", "error", "reference"], [[v, summary["error"], FUJIKAWA_REFERENCE]]
    if kind == "uv":
        kin = _kinematics(config)
        rep = uv_scan(kin, config["lambda0_list"], config["derivative"], tol=min(config["tol"], 1e-11))
        summary = {"fitted_slope": rep.slope, "derivative": [list(w) for w in rep.derivative]}
        rows = [[float(l), float(d), float(e), rep.slope]
                for l, d, e in zip(rep.lambda0, rep.deviation, rep.error)]
        return summary, ["lambda0", "deviation", "error", "fitted_slope"], rows
    p3 = np.asarray(config["p3"])
    norm = float(np.linalg.norm(p3))
    if norm == 0:
        raise DegenerateKinematics("p3 must be nonzero")
    lams = [x * norm for x in config["lambda_list"]]
    rep = ir_second_derivative_scan(p3, lams, config["lambda0"], tol=config["tol"])
    summary = {"log_coefficient": rep.log_coefficient,
               "reference": rep.log_coefficient_reference,
               "relative_deviation": rep.relative_deviation,
               "mu2": rep.mu2, "r_squared": rep.r_squared, "bound_ok": rep.bound_ok}
    rows = [[float(l), float(c), float(e), float(f), float(b), rep.log_coefficient]
            for l, c, e, f, b in zip(rep.lambdas, rep.coefficient, rep.error,
                                     rep.remainder, rep.bound)]
    return summary, ["lambda", "coefficient", "error", "remainder", "bound",
                     "log_coefficient"], rows


COMMANDS = {"anomaly": cmd_anomaly, "triangle": cmd_triangle, "relations": cmd_relations,
            "jacobian": cmd_jacobian, "scan": cmd_scan}


# ---------------------------------------------------------------------------
# output

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)


def render(fmt: str, command: str, config: dict, summary: dict, header, rows) -> str:
    h = config_hash(command, config)
    if fmt == "json":
        doc = {"version": __version__, "command": command, "config_hash": h,
               "config": _jsonable(config), "result": _jsonable(summary),
               "table": {"columns": header, "rows": _jsonable(rows)}}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# chiral_anomaly {__version__} {command} config={h}\n")
        scalars = {k: v for k, v in summary.items()
                   if isinstance(v, (int, float, str, bool)) and k != "text"}
        buf.write(f"# summary {json.dumps(_jsonable(scalars), sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
        return buf.getvalue()
    lines = [f"{command} (chiral_anomaly {__version__}, config {h})"]
    if "text" in summary:
        lines.append(summary["text"])
    for k, v in summary.items():
        if k in ("text", "entries", "checks", "determinants", "notes"):
            continue
        lines.append(f"{k}: {json.dumps(_jsonable(v), sort_keys=True)}")
    if "entries" in summary:
        for k, e in summary["entries"].items():
            lines.append(f"  {k}: {e['value']} [{'ok' if e['passed'] else 'nonzero'}]")
    return "\n".join(lines) + "\n"


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    if args.workers is not None:
        if args.workers < 1:
            print("error: --workers must be positive", file=sys.stderr)
            return EXIT_CONFIG
        os.environ[WORKERS_ENV] = str(args.workers)
    fmt = "json" if getattr(args, "json", False) else args.format
    try:
        config = resolve(args.command, args)
        summary, header, rows = COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateKinematics as exc:
        print(f"degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    text = render(fmt, args.command, config, summary, header, rows)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
