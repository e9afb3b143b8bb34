"""Command-line front-end.

Exit codes: 0 success, 1 usage or validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .coa import CoaParams
from .errors import BadTarget, MicrodispatchError, ParseError, TopologyError, ValidationError
from .grid import load_case
from .pipeline import RunConfig, compare_modes, run_study
from .uncertainty import (
    generate_scenarios,
    read_scenarios_csv,
    reduce_scenarios,
    reduction_fidelity,
    write_scenarios_csv,
)

THREADS_ENV = "MICRODISPATCH_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _nonneg(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def _scenario_out(out: str) -> Path:
    p = Path(out)
    if p.suffix.lower() == ".csv":
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / "scenarios_full.csv"


def cmd_validate(args) -> int:
    case = load_case(args.case)
    nb, nl = len(case.buses), len(case.branches)
    print(f"{nb} bus{'es' if nb != 1 else ''}, {nl} branch{'es' if nl != 1 else ''}, radial: ok")
    return 0


def cmd_scenarios(args) -> int:
    case = load_case(args.case)
    s = generate_scenarios(case, args.n, args.seed)
    path = _scenario_out(args.out)
    write_scenarios_csv(s, path)
    print(f"wrote {len(s)} scenarios to {path}")
    return 0


def cmd_reduce(args) -> int:
    full = read_scenarios_csv(args.inp)
    red = reduce_scenarios(full, args.to)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scenarios_csv(red, out)
    fid = reduction_fidelity(full, red)
    print(f"reduced {len(full)} -> {len(red)} scenarios, wrote {out}")
    for q, e in fid.max_rel_error.items():
        print(f"  {q}: max relative error of hourly mean {e:.4%}")
    return 0


def _coa_params(args) -> CoaParams:
    kw = {"max_iterations": args.iters}
    if args.population is not None:
        kw["n_initial"] = args.population
    return CoaParams(**kw)


def cmd_dispatch(args) -> int:
    cfg = RunConfig(
        case_path=args.case,
        seed=args.seed,
        n_generate=args.scenarios,
        n_reduced=args.reduce_to,
        coa=_coa_params(args),
        mode="deterministic" if args.deterministic else "stochastic",
        out_dir=args.out,
        compare=args.compare,
        n_out_of_sample=args.oos,
        weights=tuple(args.weights) if args.weights else None,
        threads=_threads(args.threads),
    )
    res = run_study(cfg)
    if args.trace:
        res.primary.opt.write_trace(args.trace)
    _print_rows(res.comparison_rows())
    print(f"outputs in {args.out}")
    return 0


def _print_rows(rows) -> None:
    print(f"{'seed':>6} {'mode':<14} {'in-sample Z':>14} {'out-of-sample Z':>16} {'feasible':>9}")
    for r in rows:
        print(f"{r['seed']:>6} {r['mode']:<14} {r['in_sample_z']:>14.4f} {r['out_of_sample_z']:>16.4f} "
              f"{r['out_of_sample_feasible_share']:>9.1%}")


def cmd_report(args) -> int:
    d = Path(args.inp)
    rep_path = d / "report.json"
    if not rep_path.is_file():
        raise FileNotFoundError(f"{rep_path} not found")
    rep = json.loads(rep_path.read_text(encoding="utf-8"))
    print(f"case {rep['case']}  mode {rep['mode']}  seed {rep['seed']}")
    for part in ("in_sample", "out_of_sample"):
        r = rep[part]
        print(f"{part.replace('_', '-'):>14}: Z={r['z']:.4f}  F1={r['f1']:.4f}  F2={r['f2']:.6f}  "
              f"penalty={r['penalty']:.4f}  EIR={r['eir']:.6f}  feasible={r['feasible']}")
    opt = rep["optimizer"]
    print(f"     optimizer: {opt['iterations']} iterations, {opt['evaluations']} evaluations, "
          f"converged={opt['converged']}")
    red = rep["reduction"]
    print(f"     scenarios: {red['n_generate']} -> {red['n_reduced']}, max relative error of "
          f"hourly mean load {red['max_rel_error']['load_mult']:.4%}")
    ph = d / "per_hour.csv"
    if ph.is_file():
        with open(ph, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        cols = [c for c in rows[0] if c != "hour" and not c.startswith("v_")]
        print("hour " + " ".join(f"{c:>10.10}" for c in cols))
        for r in rows:
            print(f"{int(r['hour']):>4} " + " ".join(f"{float(r[c]):>10.3f}" for c in cols))
    cmp_path = d / "comparison.csv"
    if cmp_path.is_file():
        with open(cmp_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            for k in ("in_sample_z", "out_of_sample_z", "out_of_sample_feasible_share"):
                r[k] = float(r[k])
        _print_rows(rows)
    return 0


def cmd_compare(args) -> int:
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be a comma-separated list of integers, got {args.seeds!r}") from None
    if not seeds:
        raise UsageError("--seeds is empty")
    base = RunConfig(
        case_path=args.case,
        n_generate=args.scenarios,
        n_reduced=args.reduce_to,
        coa=_coa_params(args),
        n_out_of_sample=args.oos,
        threads=_threads(args.threads),
    )
    table = compare_modes(args.case, seeds, out_dir=args.out, base=base)
    _print_rows(table.rows)
    for mode, m in table.means().items():
        print(f"mean out-of-sample Z ({mode}): {m:.4f}")
    return 0


def _study_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, help="case JSON file")
    p.add_argument("--scenarios", type=_positive, default=1000, help="scenarios to generate (default 1000)")
    p.add_argument("--reduce-to", type=_positive, default=30, help="scenarios kept after reduction (default 30)")
    p.add_argument("--iters", type=_nonneg, default=200, help="COA iterations (default 200)")
    p.add_argument("--population", type=_positive, default=None, help="initial COA population (default 20)")
    p.add_argument("--oos", type=_positive, default=1000, help="out-of-sample scenarios (default 1000)")
    p.add_argument("--threads", type=_positive, default=None,
                   help=f"worker threads (default ${THREADS_ENV} or the core count)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="microdispatch", description="Stochastic day-ahead microgrid scheduling.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a case file and print a summary")
    p.add_argument("--case", required=True, help="case JSON file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenarios", help="generate scenarios to CSV")
    p.add_argument("--case", required=True, help="case JSON file")
    p.add_argument("--n", type=_positive, default=1000, help="number of scenarios (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", required=True, help="output directory, or a .csv file path")
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("reduce", help="backward-reduce a scenario CSV")
    p.add_argument("--in", dest="inp", required=True, help="input scenario CSV")
    p.add_argument("--to", type=_positive, default=30, help="scenarios to keep (default 30)")
    p.add_argument("--out", required=True, help="output scenario CSV")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("dispatch", help="run a full study")
    _study_flags(p)
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--weights", type=float, nargs=2, metavar=("H1", "H2"), default=None,
                   help="objective weights (default: from the case)")
    p.add_argument("--deterministic", action="store_true", help="optimize on the forecast scenario only")
    p.add_argument("--compare", action="store_true", help="also run the other mode for comparison")
    p.add_argument("--trace", default=None, help="extra copy of the convergence CSV at this path")
    p.set_defaults(func=cmd_dispatch)

    p = sub.add_parser("report", help="summarize a study output directory")
    p.add_argument("--in", dest="inp", required=True, help="study output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="stochastic vs deterministic over several seeds")
    _study_flags(p)
    p.add_argument("--seeds", required=True, help='comma-separated seeds, e.g. "1,2,3"')
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except (ParseError, ValidationError, TopologyError, BadTarget, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (MicrodispatchError, OSError, RuntimeError, ArithmeticError) as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
