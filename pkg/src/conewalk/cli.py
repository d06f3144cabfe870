"""Command-line interface.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines
(``#`` starts a comment); explicit flags override the file.  The seed may
also come from the ``CONEWALK_SEED`` environment variable, which overrides
the file but not the flag.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import conformal, exact, moments, studies
from .model import GamblerConfig
from .montecarlo import McOptions, StepCapExceeded, estimate

SEED_ENV = "CONEWALK_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# argument types


def _start(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"start must look like A,B, got {text!r}") from None
    return a, b


def _starts(text: str) -> list[tuple[int, int]]:
    return [_start(t) for t in text.replace(" ", "").split(";") if t]


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; keys are normalized to flag destinations."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with defaults for these flags")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default: csv)")
    p.add_argument("--output", help="also write the output to this path")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=_positive_float, default=exact.DEFAULT_TOL,
                   help="relative residual tolerance of the linear solver (default: 1e-12)")
    p.add_argument("--solver", choices=("cg", "direct"), default="cg",
                   help="cg: Jacobi-preconditioned conjugate gradients; direct: sparse LU (default: cg)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conewalk", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    quantities = sorted(exact.QUANTITIES)

    p = sub.add_parser("exact", help="exact probability by a linear solve")
    _common(p)
    _solver_flags(p)
    p.add_argument("--N", type=int, required=True, help="total capital")
    p.add_argument("--start", type=_start, default=(1, 1), help="capitals A,B (default: 1,1)")
    p.add_argument("--quantity", choices=quantities, default="p321", help="default: p321")

    p = sub.add_parser("mc", help="Monte Carlo estimate (seed required)")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--start", type=_start, default=(1, 1), help="default: 1,1")
    p.add_argument("--quantity", choices=quantities, default="p321", help="default: p321")
    p.add_argument("--trials", type=int, default=100000, help="default: 100000")
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"required; falls back to ${SEED_ENV}")
    p.add_argument("--workers", type=int, default=1, help="affects wall time only (default: 1)")
    p.add_argument("--second-stage", choices=("analytic", "simulated"), default="analytic",
                   help="default: analytic")

    p = sub.add_parser("bm", help="Brownian-motion probability via the conformal map")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--start", type=_start, default=(1, 1), help="default: 1,1")
    p.add_argument("--quantity", choices=("p321", "third-first"), default="p321", help="default: p321")

    p = sub.add_parser("asym", help="closed-form large-N prediction")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--start", type=_start, default=(1, 1), help="default: 1,1")
    p.add_argument("--quantity", choices=("p321", "third-first"), default="p321", help="default: p321")

    p = sub.add_parser("moments", help="check the step-moment identities")
    _common(p)

    p = sub.add_parser("sweep", help="grid of (N, start, quantity, method) records")
    _common(p)
    _solver_flags(p)
    p.add_argument("--Ns", type=_ints, required=True, help="comma-separated list of N")
    p.add_argument("--starts", type=_starts, default=[(1, 1)], help="';'-separated A,B pairs (default: 1,1)")
    p.add_argument("--quantities", default="p321", help="comma-separated (default: p321)")
    p.add_argument("--methods", default="exact", help="comma-separated from exact,mc,bm,asym (default: exact)")
    p.add_argument("--trials", type=int, default=100000, help="Monte Carlo trials (default: 100000)")
    p.add_argument("--seed", type=_seed, default=None, help=f"required with mc; falls back to ${SEED_ENV}")
    p.add_argument("--workers", type=int, default=1, help="default: 1")
    p.add_argument("--timing", action="store_true", help="fill the seconds column (not reproducible)")

    p = sub.add_parser("rate", help="decay exponent of |P321 - P321_bm|")
    _common(p)
    p.add_argument("--Ns", type=_ints, default=[40, 80, 120, 160, 200, 240], help="default: 40,...,240")
    p.add_argument("--start", type=_start, default=(1, 1), help="default: 1,1")

    p = sub.add_parser("theorem1", help="Green-function layer and ray scaling")
    _common(p)
    p.add_argument("--Ns", type=_ints, default=[120, 240], help="default: 120,240")
    p.add_argument("--start", type=_start, default=(1, 1), help="default: 1,1")
    p.add_argument("--js", type=_ints, default=[1, 2, 4, 8], help="layer offsets (default: 1,2,4,8)")
    p.add_argument("--rho", type=float, default=0.2, help="central sub-cone parameter (default: 0.2)")

    p = sub.add_parser("theorem2", help="harmonic-measure identity and profile")
    _common(p)
    p.add_argument("--Ns", type=_ints, default=[50, 120, 240], help="default: 50,120,240")
    p.add_argument("--start", type=_start, default=(1, 1), help="default: 1,1")

    p = sub.add_parser("lazy-check", help="lazy and standard walks share the exit law")
    _common(p)
    p.add_argument("--Ns", type=_ints, default=[3, 10, 30], help="default: 3,10,30")

    p = sub.add_parser("truncation", help="one-step defect of the Brownian solution")
    _common(p)
    p.add_argument("--N", type=int, default=120, help="default: 120")
    return parser


# ---------------------------------------------------------------------------
# rendering


def _long_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("N", "item", "key", "value"))
    for r in rows:
        w.writerow([studies._fmt(x) for x in r])
    return buf.getvalue()


def _render_records(records, fmt: str) -> str:
    return studies.records_to_csv(records) if fmt == "csv" else studies.records_to_json(records) + "\n"


def _render_report(obj, rows, fmt: str) -> str:
    if fmt == "json":
        payload = studies._jsonable(asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj)
        payload.setdefault("schema_version", studies.SCHEMA_VERSION)
        return json.dumps(payload, indent=2) + "\n"
    return _long_csv(rows)


# ---------------------------------------------------------------------------
# commands


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return _seed(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"${SEED_ENV} is not a valid seed: {env!r}") from None
    if getattr(args, "_config_seed", None) is not None:
        return _seed(args._config_seed)
    raise UsageError("a seed is required (--seed, $CONEWALK_SEED or config file)")


def _cmd_exact(args) -> str:
    cfg = GamblerConfig(args.N, args.start)
    recs = studies.sweep([args.quantity], [cfg.N], [cfg.start], ("exact",), tol=args.tol, solver=args.solver)
    if recs[0].value is None:
        raise exact.SolverError("exact solve failed", float("nan"), 0, None)
    return _render_records(recs, args.format)


def _cmd_mc(args) -> str:
    cfg = GamblerConfig(args.N, args.start)
    opts = McOptions(args.trials, _seed_from(args), args.workers, args.second_stage)
    est = estimate(args.quantity, cfg.N, cfg.start, opts)
    rec = studies.SweepRecord(cfg.N, *cfg.start, args.quantity, "mc", est.mean, est.stderr)
    return _render_records([rec], args.format)


def _cmd_bm(args) -> str:
    cfg = GamblerConfig(args.N, args.start)
    rec = studies.SweepRecord(cfg.N, *cfg.start, args.quantity, "bm",
                              studies._bm_value(args.quantity, cfg.start, cfg.N))
    return _render_records([rec], args.format)


def _cmd_asym(args) -> str:
    cfg = GamblerConfig(args.N, args.start)
    rec = studies.SweepRecord(cfg.N, *cfg.start, args.quantity, "asym",
                              studies._asym_value(args.quantity, cfg.start, cfg.N))
    return _render_records([rec], args.format)


def _cmd_moments(args) -> str:
    rep = moments.verify_moment_table()
    rows = [("", name, "passed", ok) for name, ok in rep.items()]
    out = _render_report({"identities": rep, "all_passed": all(rep.values())}, rows, args.format)
    args._failed = not all(rep.values())
    return out


def _cmd_sweep(args) -> str:
    methods = [m for m in args.methods.split(",") if m]
    quantities = [q for q in args.quantities.split(",") if q]
    for q in quantities:
        exact.quantity(q)
    mc = McOptions(args.trials, _seed_from(args), args.workers) if "mc" in methods else None
    recs = studies.sweep(quantities, args.Ns, args.starts, methods, mc, args.tol, args.solver,
                         args.timing, args.workers)
    return _render_records(recs, args.format)


def _cmd_rate(args) -> str:
    rep = studies.rate_report(args.Ns, args.start)
    rows = []
    for N, p, q, d in zip(rep.Ns, rep.exact, rep.brownian, rep.deltas):
        rows += [(N, "p321", "exact", p), (N, "p321", "brownian", q), (N, "p321", "delta", d)]
    rows += [("", "fit", "slope", rep.slope), ("", "fit", "slope_stderr", rep.slope_stderr),
             ("", "fit", "proven_rate_ok", rep.proven_rate_ok),
             ("", "fit", "closer_to_conjectured", rep.closer_to_conjectured)]
    return _render_report(rep, rows, args.format)


def _cmd_theorem1(args) -> str:
    rep = studies.theorem1_report(args.Ns, args.start, args.js, args.rho)
    rows = []
    for N in args.Ns:
        for j in args.js:
            rows += [(N, f"j={j}", "layer_mass", rep.layer_masses[N][j]),
                     (N, f"j={j}", "normalized_mass", rep.normalized_mass[N][j]),
                     (N, f"j={j}", "local_bound", rep.local_bound[N][j]),
                     (N, f"j={j}", "three_integral_h", rep.integral_h[N][j])]
            rows += [(N, f"j={j}", f"ray={r}", v) for r, v in rep.local_profile[N][j].items()]
    return _render_report(rep, rows, args.format)


def _cmd_theorem2(args) -> str:
    rep = studies.theorem2_report(args.Ns, args.start)
    rows = []
    for N in rep.Ns:
        rows += [(N, "B3", "identity_defect", rep.identity_defect[N]),
                 (N, "B3", "edge_total_defect", rep.edge_total_defect[N])]
        rows += [(N, "profile", f"y/N={f}", v) for f, v in rep.profile[N].items()]
    return _render_report(rep, rows, args.format)


def _cmd_lazy(args) -> str:
    rep = studies.lazy_equivalence_report(args.Ns)
    rows = []
    for N in rep.Ns:
        rows += [(N, "lazy", "max_exit_law_gap", rep.max_exit_law_gap[N]),
                 (N, "lazy", "exit_time_ratio", rep.exit_time_ratio[N]),
                 (N, "lazy", "hold_invariance_gap", rep.hold_invariance_gap[N])]
    rows.append(("", "lazy", "passed", rep.passed))
    args._failed = not rep.passed
    return _render_report(rep, rows, args.format)


def _cmd_truncation(args) -> str:
    rows_ = studies.truncation_profile(args.N)
    rows = []
    for r in rows_:
        rows += [(args.N, f"k={r.k}", "delta", r.delta), (args.N, f"k={r.k}", "f", r.f),
                 (args.N, f"k={r.k}", "scaled", r.scaled)]
    payload = {"N": args.N, "rows": [asdict(r) for r in rows_]}
    return _render_report(payload, rows, args.format)


COMMANDS = {
    "exact": _cmd_exact, "mc": _cmd_mc, "bm": _cmd_bm, "asym": _cmd_asym,
    "moments": _cmd_moments, "sweep": _cmd_sweep, "rate": _cmd_rate,
    "theorem1": _cmd_theorem1, "theorem2": _cmd_theorem2, "lazy-check": _cmd_lazy,
    "truncation": _cmd_truncation,
}


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    path = _config_path(argv)
    command = next((t for t in argv if not t.startswith("-")), None)
    sub = parser._subparsers._group_actions[0].choices.get(command)
    seed = None
    if path is not None and sub is not None:
        try:
            conf = read_config(path)
        except OSError as err:
            raise UsageError(f"cannot read config: {err}") from None
        actions = {a.dest: a for a in sub._actions}
        unknown = set(conf) - set(actions)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        seed = conf.pop("seed", None)
        for key, value in conf.items():
            act = actions[key]
            # store_true flags take yes/no style values
            if act.nargs == 0:
                value = value.lower() in ("1", "true", "yes", "on")
            act.default = value
            act.required = False
    args = parser.parse_args(argv)
    args._config_seed = seed
    return args


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
        text = COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except (exact.SolverError, conformal.QuadratureError, conformal.PoleError, StepCapExceeded) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return 1
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    return 2 if getattr(args, "_failed", False) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
