"""Command-line entry point: ``brqw <command> [options]``.

Every command writes machine-readable output (CSV or JSON) to ``--out`` /
``--out-dir`` or to stdout.  JSON outputs carry ``"schema": 1`` and the
validated configuration.  Options can also come from ``--config FILE``, a
``key = value`` file using the long option names; command-line flags win.

Exit codes: 0 success, 2 invalid configuration, 3 budget exceeded,
4 I/O error, 5 cross-check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path as FsPath

from . import correlation, dynamics, paths, polymer
from .coin import coin_from_name
from .errors import BudgetExceeded
from .graph import Graph, Norm

SCHEMA = 1
EXIT_VALIDATION, EXIT_BUDGET, EXIT_IO, EXIT_CROSSCHECK = 2, 3, 4, 5
Z_LIMIT = 4.0

SIMULATE_HEADER = ["n", "alpha", "mean", "stderr"]
EXACT_HEADER = ["n", "alpha", "S_n", "class_count", "zero_class_count", "paths_in_zero_classes"]
PARTITION_HEADER = ["n", "alpha", "Z_n"]
FREE_ENERGY_HEADER = ["alpha", "lambda_lower", "lambda_upper"]
ALPHA_C_HEADER = ["family", "alpha_lower", "alpha_upper"]
SUSCEPTIBILITY_HEADER = ["alpha", "z", "chi", "n_max", "diagnostic"]
MASS_HEADER = ["L", "G_L", "mass"]
CROSSCHECK_HEADER = ["n", "alpha", "exact", "mc_mean", "mc_stderr", "difference", "z_score"]

# never embedded in outputs: they change neither results nor their meaning
_NOT_CONFIG = {"command", "config", "out", "out_dir", "workers", "timing", "handler"}


class ConfigError(ValueError):
    """Invalid option value; ``field`` names the offending option."""

    def __init__(self, field: str, message: str):
        super().__init__(f"invalid value for '{field}': {message}")
        self.field = field


# -- parsing helpers ------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                lo, hi = part.split(":")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or ranges like 2:6, got {text!r}")
    return out


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("BRQW_WORKERS", "1")))
    except ValueError:
        return 1


def read_config(path: str) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("_", "-")] = value
    return out


def _config_argv(sub: argparse.ArgumentParser, entries: dict[str, str]) -> list[str]:
    """Turn config entries into flags for ``sub``; unknown keys are rejected."""
    flags = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:]] = action
    argv = []
    for key, value in entries.items():
        action = flags.get(key)
        if action is None or key == "config":
            raise ConfigError(key, "unknown option in config file")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(key, f"expected a boolean, got {value!r}")
        else:
            argv.extend([f"--{key}", value])
    return argv


# -- validation ---------------------------------------------------------------------

def _check(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(field, message)


def validate(args: argparse.Namespace) -> None:
    ns = vars(args)
    if "d" in ns and ns["d"] is not None:
        _check(args.d >= 1, "d", "must be >= 1")
    for key in ("n", "n_max", "L_max"):
        v = ns.get(key)
        if isinstance(v, list):
            _check(len(v) > 0, key, "must not be empty")
            _check(all(x >= 0 for x in v), key, "must be >= 0")
        elif v is not None:
            _check(v >= 0, key, "must be >= 0")
    if ns.get("samples") is not None:
        _check(args.samples >= 1, "samples", "must be >= 1")
        _check(args.samples >= 2, "samples", "need at least 2 samples for a standard error")
    for key in ("alpha", "z"):
        v = ns.get(key)
        if v is not None:
            vals = v if isinstance(v, list) else [v]
            _check(len(vals) > 0, key, "must not be empty")
            _check(all(x >= 0 and math.isfinite(x) for x in vals), key, "must be finite and >= 0")
    _check(args.workers >= 1, "workers", "must be >= 1")
    if ns.get("norm") is not None:
        try:
            norm = Norm.parse(args.norm)
            Graph(args.graph, args.d).norm(Graph(args.graph, args.d).origin, norm)
        except (ValueError, TypeError) as exc:
            raise ConfigError("norm", str(exc))
    if ns.get("tau0") is not None:
        _check(0 <= args.tau0 < 2 * args.d, "tau0", f"must be in 0..{2 * args.d - 1}")


def _graph(args) -> Graph:
    return Graph(args.graph, args.d)


def _norm(args) -> Norm | None:
    return Norm.parse(args.norm) if getattr(args, "norm", None) else None


def _coin(args):
    try:
        return coin_from_name(args.coin, args.d)
    except OSError:
        raise
    except ValueError as exc:
        raise ConfigError("coin", str(exc))


def config_dict(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


# -- output -----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(command: str, args, payload: dict) -> str:
    doc = {"schema": SCHEMA, "command": command, "config": config_dict(args)}
    doc.update(payload)
    return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def summary(args, lines: list[str]) -> None:
    """Human-readable table: stdout when data went to a file, else stderr."""
    to_file = bool(getattr(args, "out", None) and args.out != "-") or bool(getattr(args, "out_dir", None))
    stream = sys.stdout if to_file else sys.stderr
    for line in lines:
        print(line, file=stream)


def _table(header: list[str], rows: list[list]) -> list[str]:
    cells = [[str(h) for h in header]] + [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in r]
                                          for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    return ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]


# -- commands ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    g, coin, norm = _graph(args), _coin(args), _norm(args)
    t0 = time.perf_counter()
    res = dynamics.mc_moments(g, coin, args.tau0, args.n, args.alpha, norm, args.samples,
                              args.seed, args.workers, node_budget=args.node_budget)
    runtime = time.perf_counter() - t0
    mean, err = res.mean()[args.n], res.stderr()[args.n]
    rows = [[args.n, a, float(mean[i]), float(err[i])] for i, a in enumerate(args.alpha)]
    fmt = args.format or ("json" if len(args.alpha) == 1 else "csv")
    if fmt == "csv":
        emit(csv_text(SIMULATE_HEADER, rows), args.out)
    else:
        payload = {"params": {"graph": str(g), "n": args.n, "samples": args.samples, "seed": args.seed},
                   "results": [dict(zip(SIMULATE_HEADER, r)) for r in rows]}
        if len(rows) == 1:
            payload["mean"], payload["stderr"] = rows[0][2], rows[0][3]
        if args.timing:
            payload["runtime"] = runtime
        emit(json_text("simulate", args, payload), args.out)
    summary(args, _table(SIMULATE_HEADER, rows))
    return 0


def cmd_exact_sum(args) -> int:
    g, coin, norm = _graph(args), _coin(args), _norm(args)
    rows = []
    for n in args.n:
        table = paths.build_class_table(g, n, args.tau0, coin, args.workers, args.budget)
        count, zero, zero_paths = table.zero_census()
        for a in args.alpha:
            rows.append([n, a, table.s_n(a, norm), count, zero, zero_paths])
    emit(csv_text(EXACT_HEADER, rows), args.out)
    summary(args, _table(EXACT_HEADER, rows))
    return 0


def cmd_classes(args) -> int:
    g, coin = _graph(args), _coin(args)
    _check(args.n <= 6, "n", "class dumps are limited to n <= 6")
    table = paths.build_class_table(g, args.n, args.tau0, coin, args.workers, args.budget)
    count, zero, zero_paths = table.zero_census()
    payload = {"class_count": count, "zero_class_count": zero, "paths_in_zero_classes": zero_paths}
    if args.dump:
        payload["classes"] = table.dump()
    emit(json_text("classes", args, payload), args.out)
    summary(args, _table(["n", "classes", "zero_classes", "paths_in_zero_classes"],
                         [[args.n, count, zero, zero_paths]]))
    return 0


def cmd_polymer(args) -> int:
    g, norm = _graph(args), _norm(args)
    fam = polymer.PathFamily(args.family, g)
    n_max, w = args.n_max, args.workers
    _check(n_max >= 1, "n-max", "must be >= 1")
    part = [[n, a, polymer.partition_function(fam, n, a, norm, w)]
            for a in args.alpha for n in range(n_max + 1)]
    free, lam_json = [], []
    for a in args.alpha:
        upper, lower = polymer.lambda_bounds(fam, a, n_max, norm, w)
        free.append([a, lower, upper.value])
        lam_json.append({"alpha": a, "lower": lower, "upper": upper.value})
    lo, hi = polymer.alpha_c_bracket(g, n_max, fam.tag, w)
    alpha_c = [[fam.tag, lo, hi]]
    sus = []
    for a in args.alpha:
        for z in args.z:
            s = polymer.susceptibility(fam, a, z, n_max, norm, w)
            sus.append([a, z, s.value, n_max, s.diagnostic])
    conn = polymer.connective_estimate(fam, n_max, w)
    bounds = _bounds(g.d)
    summary_doc = {"family": fam.tag, "graph": str(g), "n_max": n_max,
                   "connective_constant": {"lower": conn[0], "upper": conn[1]},
                   "free_energy": lam_json,
                   "alpha_c": {"lower": lo, "upper": hi},
                   "bounds": bounds}
    files = {"partition.csv": csv_text(PARTITION_HEADER, part),
             "free_energy.csv": csv_text(FREE_ENERGY_HEADER, free),
             "alpha_c.csv": csv_text(ALPHA_C_HEADER, alpha_c),
             "susceptibility.csv": csv_text(SUSCEPTIBILITY_HEADER, sus),
             "summary.json": json_text("polymer", args, summary_doc)}
    if args.out_dir:
        out = FsPath(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8")
    else:
        emit(files["summary.json"], args.out)
    lines = _table(FREE_ENERGY_HEADER, free)
    lines.append(f"connective constant in [{conn[0]:.6g}, {conn[1]:.6g}]")
    lines.append(f"alpha_c in [{lo:.6g}, {hi:.6g}]")
    summary(args, lines)
    return 0


def cmd_mass(args) -> int:
    _check(args.graph == "lattice", "graph", "the mass is defined for the lattice only")
    _check(args.d >= 2, "d", "must be >= 2 for the mass estimate")
    z = 1.0 / (2 * args.d) if args.z_critical else args.z
    _check(z is not None, "z", "give --z or --z-critical")
    _check(z > 0, "z", "must be > 0")
    _check(args.L_max >= 1, "L-max", "must be >= 1")
    m = correlation.mass_estimate(args.d, z, args.L_max, args.n_max, workers=args.workers)
    rows = [[L, g_L, per] for L, (g_L, per) in enumerate(zip(m.G_L, m.per_L), start=1)]
    xi = 1.0 / m.sup_estimate if m.sup_estimate > 0 else math.inf
    doc = {"z": z, "mass": m.sup_estimate, "xi": xi, "n_max": m.n_max, "L_max": m.L_max,
           "bias": "over-estimate of the mass (under-estimate of xi)",
           "sandwich": list(m.sandwich), "caveats": list(m.caveats),
           "unconditional_bound": correlation.UNCONDITIONAL_BOUND,
           "best_bound": max(xi, correlation.UNCONDITIONAL_BOUND) if args.z_critical else None}
    if args.out_dir:
        out = FsPath(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mass.csv").write_text(csv_text(MASS_HEADER, rows), encoding="utf-8")
        (out / "mass.json").write_text(json_text("mass", args, doc), encoding="utf-8")
    else:
        emit(csv_text(MASS_HEADER, rows), args.out)
    lines = _table(MASS_HEADER, rows)
    lines.append(f"mass estimate {m.sup_estimate:.6g}, xi {xi:.6g} (non-certified: mass over-estimated)")
    lines.extend(f"caveat: {c}" for c in m.caveats)
    summary(args, lines)
    return 0


def _bounds(d: int) -> dict:
    q = 2 * d - 1
    out = {"tree_saw_alpha_c": math.log(2 * d / q), "lattice_alpha_c_upper": math.log(2),
           "localisation_length_lower": 1.0 / math.log(2)}
    if d >= 2:
        t, check = polymer.decorated_tree_bound(d)
        disp = polymer.threshold_power_form(d)
        z = 1.0 / (2 * d)
        c1, c2 = polymer.decorated_conditions(d, z, t)
        out.update({"tree_decorated_threshold": t, "tree_decorated_threshold_power_form": disp,
                    "forms_agree": abs(t - disp) <= 1e-15,
                    "tree_localisation_length_lower": 1.0 / t,
                    "asymptotic_check": check,
                    "condition_z2": c1, "condition_z_alpha": c2})
    t10, check10 = polymer.decorated_tree_bound(10)
    out["asymptotic_check_d10"] = check10
    return out


def cmd_report(args) -> int:
    _check(args.bounds, "bounds", "only --bounds reports are available")
    doc = {"d": args.d, "bounds": _bounds(args.d)}
    if args.mu is not None:
        try:
            doc["linf_alpha_c_upper"] = polymer.linf_alpha_bound(args.d, args.mu)
        except ValueError as exc:
            raise ConfigError("mu", str(exc))
    emit(json_text("report", args, doc), args.out)
    summary(args, [f"{k}: {v}" for k, v in doc["bounds"].items()])
    return 0


def crosscheck_rows(g, coin, tau0, n_max, alphas, norm, samples, seed, workers) -> list[list]:
    res = dynamics.mc_moments(g, coin, tau0, n_max, alphas, norm, samples, seed, workers)
    mean, err = res.mean(), res.stderr()
    rows = []
    for n in range(1, n_max + 1):
        for i, a in enumerate(alphas):
            exact = paths.exact_S_n(g, n, coin, a, tau0, norm, workers)
            m, s = float(mean[n, i]), float(err[n, i])
            rows.append([n, a, exact, m, s, m - exact, dynamics.z_score(m, s, exact)])
    return rows


def cmd_crosscheck(args) -> int:
    g, coin, norm = _graph(args), _coin(args), _norm(args)
    _check(args.n >= 1, "n", "must be >= 1")
    rows = crosscheck_rows(g, coin, args.tau0, args.n, args.alpha, norm, args.samples,
                           args.seed, args.workers)
    emit(csv_text(CROSSCHECK_HEADER, rows), args.out)
    worst = max(abs(r[-1]) for r in rows)
    lines = _table(CROSSCHECK_HEADER, rows)
    lines.append(f"max |z| = {worst:.3g} (limit {Z_LIMIT})")
    summary(args, lines)
    if worst > Z_LIMIT:
        print(f"crosscheck failed: max |z| = {worst:.3g} > {Z_LIMIT}", file=sys.stderr)
        return EXIT_CROSSCHECK
    return 0


# -- parser -----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, coin: bool = True, norm: bool = True) -> None:
    p.add_argument("--graph", choices=["lattice", "tree"], default="lattice")
    p.add_argument("--d", type=int, default=2)
    if coin:
        p.add_argument("--coin", default="hadamard", help="fourier, hadamard or a CSV matrix file")
        p.add_argument("--tau0", type=int, default=0, help="initial coin state (letter index)")
    if norm:
        p.add_argument("--norm", default=None, help="depth, l1, linf or lp:<p> (default: graph's own)")
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help="worker count (default: $BRQW_WORKERS or 1)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--config", default=None, help="key = value file of option defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brqw", description="Balanced random quantum walk laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo disorder average of the exponential moment")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=_float_list, default=[0.0])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--node-budget", type=int, default=dynamics.DEFAULT_NODE_BUDGET)
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--timing", action="store_true", help="include wall-clock runtime in JSON")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("exact-sum", help="exact disorder average by phase-content classes")
    _common(p)
    p.add_argument("--n", type=_int_list, required=True, help="lengths, e.g. 4 or 1:6")
    p.add_argument("--alpha", type=_float_list, default=[0.0])
    p.add_argument("--budget", type=int, default=paths.DEFAULT_PATH_BUDGET)
    p.set_defaults(handler=cmd_exact_sum)

    p = sub.add_parser("classes", help="phase-content class census, optional JSON dump")
    _common(p, norm=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dump", action="store_true")
    p.add_argument("--budget", type=int, default=paths.DEFAULT_PATH_BUDGET)
    p.set_defaults(handler=cmd_classes)

    p = sub.add_parser("polymer", help="SAW/SP partition functions and free-energy bounds")
    _common(p, coin=False)
    p.add_argument("--family", choices=["SAW", "SP", "saw", "sp"], default="SAW")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--alpha", type=_float_list, default=[0.0])
    p.add_argument("--z", type=_float_list, default=[0.1])
    p.add_argument("--out-dir", default=None, help="write CSV files and summary.json here")
    p.set_defaults(handler=cmd_polymer)

    p = sub.add_parser("mass", help="SAW mass and correlation length from plane generating functions")
    _common(p, coin=False, norm=False)
    p.add_argument("--z", type=float, default=None)
    p.add_argument("--z-critical", action="store_true", help="use z = 1/(2d)")
    p.add_argument("--L-max", dest="L_max", type=int, default=correlation.DEFAULT_L_MAX)
    p.add_argument("--n-max", type=int, default=correlation.DEFAULT_N_MAX)
    p.add_argument("--out-dir", default=None, help="write mass.csv and mass.json here")
    p.set_defaults(handler=cmd_mass)

    p = sub.add_parser("report", help="closed-form bounds on alpha_c and the localisation length")
    _common(p, coin=False, norm=False)
    p.add_argument("--bounds", action="store_true")
    p.add_argument("--mu", type=float, default=None,
                   help="connective-constant estimate in dimension d-1 for the l-infinity bound")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("crosscheck", help="Monte-Carlo against exact enumeration, per-alpha z-scores")
    _common(p)
    p.add_argument("--n", type=int, default=5, help="largest number of steps")
    p.add_argument("--alpha", type=_float_list, default=[0.0, 0.1, 0.2])
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_crosscheck)
    return parser


def _find_config(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    choices = parser._subparsers._group_actions[0].choices
    cfg = _find_config(argv)
    if cfg is not None and argv and argv[0] in choices:
        extra = _config_argv(choices[argv[0]], read_config(cfg))
        # config flags first so that explicit command-line flags override them
        argv = [argv[0]] + extra + argv[1:]
    args = parser.parse_args(argv)
    validate(args)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
        return args.handler(args)
    except ConfigError as exc:
        print(f"brqw: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetExceeded as exc:
        print(f"brqw: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"brqw: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
