"""End-to-end study: scenarios, reduction, optimization and scoring.

A stochastic run optimizes the expected objective over the reduced scenario
set; a deterministic run optimizes the objective on the single forecast
scenario. Either way the resulting schedule is also scored out of sample on a
fresh scenario set drawn with a seed derived from (and different to) the
training seed.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
import traceback
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import coa
from .evaluate import DispatchSchedule, EvaluationReport, Evaluator
from .grid import NetworkCase, load_case
from .uncertainty import (
    ScenarioSet,
    forecast_scenario,
    generate_scenarios,
    reduce_scenarios,
    reduction_fidelity,
    scenarios_to_csv,
)

MODES = ("stochastic", "deterministic")
OUTPUT_FILES = (
    "scenarios_full.csv",
    "scenarios_reduced.csv",
    "schedule.json",
    "report.json",
    "per_scenario.csv",
    "per_hour.csv",
    "convergence.csv",
    "comparison.csv",
    "run_config.json",
)
FAILED_MARKER = "FAILED"


def _default_coa() -> coa.CoaParams:
    return coa.CoaParams(max_iterations=200)


@dataclass(frozen=True)
class RunConfig:
    """Everything a study depends on. The COA seed is taken from ``seed``."""

    case_path: str
    seed: int = 0
    n_generate: int = 1000
    n_reduced: int = 30
    coa: coa.CoaParams = field(default_factory=_default_coa)
    mode: str = "stochastic"
    out_dir: str | None = None
    compare: bool = False
    n_out_of_sample: int = 1000
    weights: tuple[float, float] | None = None
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 1 <= self.n_reduced <= self.n_generate:
            raise ValueError("need 1 <= n_reduced <= n_generate")
        if self.n_out_of_sample < 1:
            raise ValueError("n_out_of_sample must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["case_path"] = str(self.case_path)
        d["coa"] = self.coa.to_dict()
        d["weights"] = list(self.weights) if self.weights is not None else None
        d.pop("threads")  # does not affect results
        d.pop("out_dir")
        return d


@dataclass
class ModeResult:
    mode: str
    schedule: DispatchSchedule
    in_sample: EvaluationReport
    out_of_sample: EvaluationReport
    opt: coa.OptResult


@dataclass
class StudyResult:
    config: RunConfig
    case: NetworkCase
    full: ScenarioSet
    reduced: ScenarioSet
    out_of_sample_seed: int
    primary: ModeResult
    other: ModeResult | None
    evaluations: int
    wall_clock_s: float

    @property
    def schedule(self) -> DispatchSchedule:
        return self.primary.schedule

    def comparison_rows(self) -> list[dict]:
        rows = [_mode_row(self.config.seed, self.primary)]
        if self.other is not None:
            rows.append(_mode_row(self.config.seed, self.other))
        return sorted(rows, key=lambda r: MODES.index(r["mode"]))


def out_of_sample_seed(seed: int) -> int:
    """Seed for the evaluation set; never equal to the training seed."""
    derived = int(np.random.SeedSequence([int(seed), 0x0005]).generate_state(1)[0])
    if derived == seed:
        derived += 1
    return derived


def _with_weights(case: NetworkCase, weights) -> NetworkCase:
    if weights is None:
        return case
    h1, h2 = (float(w) for w in weights)
    return replace(case, weights=replace(case.weights, h1=h1, h2=h2))


def optimize_schedule(
    case: NetworkCase, scenarios: ScenarioSet, params: coa.CoaParams, threads: int = 1
) -> tuple[DispatchSchedule, coa.OptResult]:
    """Minimize the expected objective over ``scenarios`` with COA."""
    ev = Evaluator(case, scenarios, threads=threads)
    res = coa.optimize(ev.z, (ev.lower, ev.upper), params, vectorized=True)
    return DispatchSchedule.from_vector(case, res.best_position), res


def _run_mode(mode, case, reduced, oos, params, threads) -> ModeResult:
    train = reduced if mode == "stochastic" else forecast_scenario(case)
    schedule, opt = optimize_schedule(case, train, params, threads)
    in_sample = Evaluator(case, train, threads=threads).report(schedule)
    out = Evaluator(case, oos, threads=threads).report(schedule)
    return ModeResult(mode, schedule, in_sample, out, opt)


def _mode_row(seed: int, m: ModeResult) -> dict:
    o = m.out_of_sample
    return {
        "seed": seed,
        "mode": m.mode,
        "in_sample_z": m.in_sample.z,
        "out_of_sample_z": o.z,
        "out_of_sample_f1": o.f1,
        "out_of_sample_f2": o.f2,
        "out_of_sample_penalty": o.penalty,
        "out_of_sample_feasible_share": float(o.probability @ (o.per_scenario["penalty"] == 0.0)),
        "evaluations": m.opt.evaluations,
    }


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _summary(rep: EvaluationReport) -> dict:
    return {
        "z": rep.z,
        "f1": rep.f1,
        "f2": rep.f2,
        "penalty": rep.penalty,
        "aens_kwh": rep.aens,
        "eir": rep.eir,
        "feasible": rep.feasible,
        "expected": dict(rep.expected),
    }


def study_files(result: StudyResult) -> dict[str, str]:
    """Render every output file to text, keyed by file name."""
    cfg, case, p = result.config, result.case, result.primary
    rep = p.in_sample
    fid = reduction_fidelity(result.full, result.reduced)
    report = {
        "case": case.name,
        "mode": p.mode,
        "seed": cfg.seed,
        "out_of_sample_seed": result.out_of_sample_seed,
        "in_sample": _summary(rep),
        "out_of_sample": _summary(p.out_of_sample),
        "optimizer": {
            "best_fitness": p.opt.best_fitness,
            "evaluations": p.opt.evaluations,
            "iterations": p.opt.iterations,
            "converged": p.opt.converged,
        },
        "reduction": {
            "n_generate": len(result.full),
            "n_reduced": len(result.reduced),
            "max_rel_error": fid.max_rel_error,
            "max_abs_error": fid.max_abs_error,
            "cv": fid.cv,
        },
        "soc_kwh": {k: v.tolist() for k, v in rep.soc.items()},
    }
    ps_keys = list(rep.per_scenario)
    per_scenario = _csv_text(
        ["scenario_id", "probability", *ps_keys],
        ([int(sid), float(pr), *(float(rep.per_scenario[k][i]) for k in ps_keys)]
         for i, (sid, pr) in enumerate(zip(rep.scenario_ids, rep.probability))),
    )
    ph_keys = list(rep.per_hour)
    per_hour = _csv_text(
        ["hour", *ph_keys],
        ([t, *(float(rep.per_hour[k][t]) for k in ph_keys)] for t in range(case.horizon.steps)),
    )
    conv = io.StringIO()
    w = csv.writer(conv, lineterminator="\n")
    w.writerow(["iteration", "best_fitness", "mean_fitness", "evaluations"])
    for h in p.opt.history:
        w.writerow([h["iteration"], repr(h["best_fitness"]), repr(h["mean_fitness"]), h["evaluations"]])
    rows = result.comparison_rows()
    comparison = _csv_text(list(rows[0]), (list(r.values()) for r in rows))
    return {
        "scenarios_full.csv": scenarios_to_csv(result.full),
        "scenarios_reduced.csv": scenarios_to_csv(result.reduced),
        "schedule.json": _json_text({"mode": p.mode, **p.schedule.to_dict(case)}),
        "report.json": _json_text(report),
        "per_scenario.csv": per_scenario,
        "per_hour.csv": per_hour,
        "convergence.csv": conv.getvalue(),
        "comparison.csv": comparison,
        "run_config.json": _json_text(cfg.to_dict()),
    }


def _write(out: Path, name: str, text: str) -> None:
    with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_study(cfg: RunConfig) -> StudyResult:
    """Run one study and, when ``cfg.out_dir`` is set, write all artifacts.

    On failure a ``FAILED`` marker with the traceback is left in the output
    directory and the error is re-raised.
    """
    out = Path(cfg.out_dir) if cfg.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        marker = out / FAILED_MARKER
        if marker.exists():
            marker.unlink()
    try:
        result = _run(cfg)
        if out is not None:
            for name, text in study_files(result).items():
                _write(out, name, text)
        return result
    except Exception:
        if out is not None:
            _write(out, FAILED_MARKER, traceback.format_exc())
        raise


def _run(cfg: RunConfig) -> StudyResult:
    t0 = time.perf_counter()
    case = _with_weights(load_case(cfg.case_path), cfg.weights)
    params = replace(cfg.coa, seed=cfg.seed)
    full = generate_scenarios(case, cfg.n_generate, cfg.seed)
    reduced = reduce_scenarios(full, cfg.n_reduced)
    oos_seed = out_of_sample_seed(cfg.seed)
    assert oos_seed != cfg.seed
    oos = generate_scenarios(case, cfg.n_out_of_sample, oos_seed)
    primary = _run_mode(cfg.mode, case, reduced, oos, params, cfg.threads)
    other = None
    if cfg.compare:
        other_mode = MODES[1 - MODES.index(cfg.mode)]
        other = _run_mode(other_mode, case, reduced, oos, params, cfg.threads)
    evals = primary.opt.evaluations + (other.opt.evaluations if other else 0)
    return StudyResult(cfg, case, full, reduced, oos_seed, primary, other, evals, time.perf_counter() - t0)


@dataclass
class Comparison:
    """Out-of-sample objective per seed and mode (long format)."""

    rows: list[dict]

    def column(self, mode: str) -> np.ndarray:
        return np.array([r["out_of_sample_z"] for r in self.rows if r["mode"] == mode])

    def means(self) -> dict[str, float]:
        return {m: float(np.mean(self.column(m))) for m in MODES if self.column(m).size}

    def to_csv(self) -> str:
        return _csv_text(list(self.rows[0]), (list(r.values()) for r in self.rows))

    def summary_csv(self) -> str:
        means = self.means()
        return _csv_text(["mode", "mean_out_of_sample_z", "seeds"],
                         ([m, v, len(self.column(m))] for m, v in means.items()))


def compare_modes(
    case_path: str,
    seeds,
    out_dir: str | None = None,
    base: RunConfig | None = None,
) -> Comparison:
    """Run both modes for each seed and tabulate out-of-sample objectives.

    With ``out_dir`` each seed's artifacts go to ``seed_<n>/`` and the table
    to ``comparison.csv`` / ``comparison_summary.csv``.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    base = base or RunConfig(case_path=case_path)
    rows = []
    for s in seeds:
        sub = os.path.join(out_dir, f"seed_{s}") if out_dir else None
        cfg = replace(base, case_path=case_path, seed=s, mode="stochastic", compare=True, out_dir=sub)
        rows.extend(run_study(cfg).comparison_rows())
    table = Comparison(rows)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write(out, "comparison.csv", table.to_csv())
        _write(out, "comparison_summary.csv", table.summary_csv())
    return table
