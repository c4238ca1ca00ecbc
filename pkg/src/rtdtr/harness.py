"""Replicate orchestration, study aggregation and report tables.

All randomness of a study flows from one root seed: replicate r uses the
sub-seed derive_seed(study_seed, r), and the replicate-world hyperdraw is
shared across a study's replicates (drawn from the study seed), so method
comparisons within and across replicates see the same super-population.
Runtimes cover posterior sampling plus optimization only; data generation
and evaluation simulation are excluded.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import OXYTOCIN_LINEXP
from .csl import CslConfig, evaluate_csl_policy, generate_csl_like_cohort, load_csl_config
from .errors import ConfigError
from .inference import McmcConfig, sample_posterior
from .bpm import bpm_optimize, fit_bpm
from .policy import (
    DEFAULT_ESS_FRACTION,
    DeConfig,
    optimize_eta,
    unopt_baseline,
    weight_diagnostics,
)
from .simgen import (
    SIM_CASES,
    CaseConfig,
    draw_replicate_params,
    evaluate_policy_loss,
    generate_cohort,
)

METHODS = ("unopt", "proposed", "bpm")
CSL_CASE = "csl_like"


def derive_seed(root: int, *tags) -> int:
    return int(np.random.SeedSequence((root,) + tuple(tags)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ReplicateOptions:
    """Per-replicate knobs; studies override the params seed so every
    replicate shares one hyperdraw."""

    n_eval: int = 2000
    params_seed: Optional[int] = None
    mcmc: Optional[McmcConfig] = None
    de: Optional[DeConfig] = None
    ess_fraction: float = DEFAULT_ESS_FRACTION
    search: str = "shift"
    bpm_de: Optional[DeConfig] = None
    bpm_draws_used: int = 40
    bpm_traj_per_draw: int = 10
    delta: Optional[float] = None
    csl_config_path: Optional[str] = None


@dataclass(frozen=True)
class MethodResult:
    evaluated_loss: Optional[float]
    runtime_seconds: Optional[float]
    params: Optional[np.ndarray]
    diagnostics: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass(frozen=True)
class ReplicateResult:
    case_id: str
    n: int
    seed: int
    methods: dict


@dataclass(frozen=True)
class StudyRow:
    case_id: str
    n: int
    method: str
    loss_mean: Optional[float]
    loss_sd: Optional[float]
    rt_mean: Optional[float]
    rt_sd: Optional[float]
    n_reps: int


@dataclass(frozen=True)
class StudyTable:
    rows: list
    replicates: list = field(default_factory=list)


class _World:
    """Uniform interface over the four simulation cases and the synthetic
    labor-dose setting."""

    def __init__(self, case_id: str, options: ReplicateOptions, seed: int):
        self.case_id = case_id
        self.options = options
        if case_id in SIM_CASES:
            self.cfg = CaseConfig(case_id)
            params_seed = options.params_seed if options.params_seed is not None else seed
            self.rp = draw_replicate_params(self.cfg, params_seed)
            self.family = self.cfg.policy_family
            self.grid = self.cfg.grid
        elif case_id == CSL_CASE:
            cfg = load_csl_config(options.csl_config_path)
            if options.delta is not None:
                cfg = cfg.with_delta(options.delta)
            self.cfg = cfg
            self.rp = None
            self.family = OXYTOCIN_LINEXP
            self.grid = cfg.grid
        else:
            raise ConfigError(f"unknown case_id {case_id!r}")

    def training_cohort(self, n: int, seed: int):
        if self.case_id in SIM_CASES:
            return generate_cohort(
                self.cfg, self.rp, self.cfg.observational_switching(), n, seed
            )
        return generate_csl_like_cohort(self.cfg, n, seed)

    def evaluate(self, eta, seed: int) -> float:
        if self.case_id in SIM_CASES:
            return evaluate_policy_loss(
                self.cfg, self.rp, eta, self.family, self.options.n_eval, seed
            )
        return evaluate_csl_policy(self.cfg, eta, self.options.n_eval, seed)

    @property
    def supports_bpm(self) -> bool:
        return self.case_id in SIM_CASES


def run_replicate(
    case_id: str,
    n: int,
    seed: int,
    methods: Sequence[str] = ("unopt", "proposed"),
    options: Optional[ReplicateOptions] = None,
) -> ReplicateResult:
    """One full replicate: training data, per-method learning, evaluation.

    A method failure is recorded on its own entry without aborting the rest.
    """
    if n < 10:
        raise ConfigError(f"replicate size must be >= 10, got {n}")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    options = options or ReplicateOptions()
    world = _World(case_id, options, seed)
    cohort = world.training_cohort(n, derive_seed(seed, 1))
    eval_seed = derive_seed(seed, 2)
    mcmc = options.mcmc or McmcConfig(seed=derive_seed(seed, 3) % 2**31)

    results: dict = {}
    draws = None
    t_sample = 0.0
    if "unopt" in methods or "proposed" in methods:
        try:
            t0 = time.perf_counter()
            draws = sample_posterior(cohort, world.family, mcmc, grid=world.grid)
            t_sample = time.perf_counter() - t0
        except Exception as exc:  # recorded per dependent method below
            msg = f"posterior sampling failed: {exc}"
            for m in ("unopt", "proposed"):
                if m in methods:
                    results[m] = MethodResult(None, None, None, error=msg)

    if "unopt" in methods and "unopt" not in results:
        try:
            base = unopt_baseline(cohort, draws)
            results["unopt"] = MethodResult(
                evaluated_loss=base.observed_mean_loss,
                runtime_seconds=None,
                params=base.theta_hat,
            )
        except Exception as exc:
            results["unopt"] = MethodResult(None, None, None, error=str(exc))

    if "proposed" in methods and "proposed" not in results:
        try:
            de_cfg = options.de
            if de_cfg is not None:
                de_cfg = replace(de_cfg, seed=derive_seed(seed, 4) % 2**31)
            else:
                de_cfg = None if options.search != "shift" else DeConfig(
                    bounds=((0.0, 3.0),), seed=derive_seed(seed, 4) % 2**31
                )
            t0 = time.perf_counter()
            est = optimize_eta(
                cohort,
                draws,
                world.family,
                de_cfg,
                grid=world.grid,
                ess_fraction=options.ess_fraction,
                search=options.search,
            )
            rt = t_sample + (time.perf_counter() - t0)
            evaluated = world.evaluate(est.eta, eval_seed)
            results["proposed"] = MethodResult(
                evaluated_loss=evaluated,
                runtime_seconds=rt,
                params=est.eta,
                diagnostics={
                    "estimated_loss": est.loss,
                    "ess": est.ess,
                    "low_overlap": est.low_overlap,
                    "evaluations": est.evaluations,
                },
            )
        except Exception as exc:
            results["proposed"] = MethodResult(None, None, None, error=str(exc))

    if "bpm" in methods:
        if not world.supports_bpm:
            results["bpm"] = MethodResult(
                None, None, None, error=f"bpm unsupported for {case_id}"
            )
        else:
            try:
                t0 = time.perf_counter()
                post = fit_bpm(cohort, world.cfg, mcmc)
                bpm_de = options.bpm_de or DeConfig(
                    population_size=16, generations=25,
                    bounds=tuple((-5.0, 5.0) for _ in range(3)),
                    seed=derive_seed(seed, 5) % 2**31,
                )
                est = bpm_optimize(
                    post,
                    world.cfg,
                    bpm_de,
                    n_draws_used=options.bpm_draws_used,
                    n_traj_per_draw=options.bpm_traj_per_draw,
                    seed=derive_seed(seed, 6) % 2**31,
                )
                rt = time.perf_counter() - t0
                evaluated = world.evaluate(est.eta, eval_seed)
                results["bpm"] = MethodResult(
                    evaluated_loss=evaluated,
                    runtime_seconds=rt,
                    params=est.eta,
                    diagnostics={"predicted_loss": est.loss},
                )
            except Exception as exc:
                results["bpm"] = MethodResult(None, None, None, error=str(exc))

    return ReplicateResult(case_id=case_id, n=n, seed=seed, methods=results)


def replicate_seed(study_seed: int, rep: int) -> int:
    """Pure function giving replicate r's sub-seed; re-running one replicate
    standalone with this seed (and the study's params seed) reproduces its
    row."""
    return derive_seed(study_seed, 100 + rep)


def run_study(
    case_id: str,
    n_list: Sequence[int],
    n_reps: int,
    methods: Sequence[str] = ("unopt", "proposed"),
    study_seed: int = 0,
    options: Optional[ReplicateOptions] = None,
) -> StudyTable:
    """Aggregate replicates into per-(case, n, method) loss and runtime rows."""
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    options = options or ReplicateOptions()
    if options.params_seed is None:
        options = replace(options, params_seed=derive_seed(study_seed, 0))
    rows = []
    reps_all = []
    for n in n_list:
        reps = [
            run_replicate(case_id, n, replicate_seed(study_seed, r), methods, options)
            for r in range(n_reps)
        ]
        reps_all.extend(reps)
        for method in methods:
            losses = [
                r.methods[method].evaluated_loss
                for r in reps
                if r.methods.get(method) and r.methods[method].evaluated_loss is not None
            ]
            rts = [
                r.methods[method].runtime_seconds
                for r in reps
                if r.methods.get(method) and r.methods[method].runtime_seconds is not None
            ]
            rows.append(
                StudyRow(
                    case_id=case_id,
                    n=n,
                    method=method,
                    loss_mean=float(np.mean(losses)) if losses else None,
                    loss_sd=float(np.std(losses, ddof=1)) if len(losses) > 1 else None,
                    rt_mean=float(np.mean(rts)) if rts else None,
                    rt_sd=float(np.std(rts, ddof=1)) if len(rts) > 1 else None,
                    n_reps=len(losses),
                )
            )
    return StudyTable(rows=rows, replicates=reps_all)


def run_csl_sweep(
    deltas: Sequence[float],
    n: int,
    seed: int,
    options: Optional[ReplicateOptions] = None,
) -> dict:
    """Fit and optimize at each stratification threshold.

    Returns per-threshold posterior-mean switching parameters, optimized
    policy parameters, the in-sample optimized loss estimate (the published
    analysis's headline quantity) and a fresh-world evaluation.
    """
    options = options or ReplicateOptions()
    out = {}
    for delta in deltas:
        opts = replace(options, delta=float(delta))
        rep = run_replicate(CSL_CASE, n, seed, ("unopt", "proposed"), opts)
        unopt = rep.methods["unopt"]
        prop = rep.methods["proposed"]
        out[float(delta)] = {
            "theta_hat": unopt.params,
            "unopt_loss": unopt.evaluated_loss,
            "eta_opt": prop.params,
            "estimated_loss": (prop.diagnostics or {}).get("estimated_loss"),
            "evaluated_loss": prop.evaluated_loss,
            "error": prop.error,
        }
    return out


def _fmt(x, digits=3):
    if x is None:
        return "NA"
    return f"{x:.{digits}f}"


REPORT_COLUMNS = ("case", "n", "method", "loss_mean", "loss_sd", "rt_mean", "rt_sd")


def report_table(study: StudyTable, fmt: str = "csv") -> str:
    """Render study rows with a stable column order; unavailable cells are NA."""
    if not study.rows:
        raise ConfigError("empty study table")
    records = []
    for row in study.rows:
        rt_mean = None if row.method == "unopt" else row.rt_mean
        rt_sd = None if row.method == "unopt" else row.rt_sd
        records.append(
            (
                row.case_id,
                str(row.n),
                row.method,
                _fmt(row.loss_mean),
                _fmt(row.loss_sd),
                _fmt(rt_mean),
                _fmt(rt_sd),
            )
        )
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(records)
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(REPORT_COLUMNS) + " |",
            "|" + "|".join("---" for _ in REPORT_COLUMNS) + "|",
        ]
        for rec in records:
            lines.append("| " + " | ".join(rec) + " |")
        single = any(row.n_reps == 1 for row in study.rows)
        if single:
            lines.append("")
            lines.append("NA standard deviations: single replicate.")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")
