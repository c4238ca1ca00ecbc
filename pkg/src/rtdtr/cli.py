"""Command-line interface.

Verbs: simulate, fit-theta, optimize, evaluate, replicate, study, report,
serve. Configuration comes from an optional YAML file whose keys mirror the
config dataclasses; command-line flags override file values. Exit codes:
0 success, 2 configuration error, 3 data error, 4 diagnostic failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np
import yaml

from .core import LINEXP, OXYTOCIN_LINEXP, SIGMOID_SWITCH
from .csl import generate_csl_like_cohort, load_csl_config
from .errors import ConfigError, DataError, DiagnosticError
from .harness import (
    CSL_CASE,
    ReplicateOptions,
    report_table,
    run_replicate,
    run_study,
)
from .inference import McmcConfig, PosteriorDraws, posterior_summary, sample_posterior
from .io_ import read_cohort, write_cohort
from .policy import DeConfig, optimize_eta
from .simgen import SIM_CASES, CaseConfig, draw_replicate_params, evaluate_policy_loss, generate_cohort

FAMILIES = (LINEXP, SIGMOID_SWITCH, OXYTOCIN_LINEXP)


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a mapping")
    return cfg


def _mcmc_from(cfg: dict, seed) -> McmcConfig:
    section = dict(cfg.get("mcmc", {}))
    if seed is not None:
        section["seed"] = seed
    return McmcConfig(**section)


def _options_from(cfg: dict, args) -> ReplicateOptions:
    section = dict(cfg.get("replicate", {}))
    opts = ReplicateOptions(**section)
    if "mcmc" in cfg:
        opts = replace(opts, mcmc=McmcConfig(**cfg["mcmc"]))
    if "de" in cfg:
        de = dict(cfg["de"])
        if "bounds" in de:
            de["bounds"] = tuple(tuple(b) for b in de["bounds"])
        opts = replace(opts, de=DeConfig(**de))
    if getattr(args, "n_eval", None):
        opts = replace(opts, n_eval=args.n_eval)
    if getattr(args, "delta", None) is not None:
        opts = replace(opts, delta=args.delta)
    if getattr(args, "params_seed", None) is not None:
        opts = replace(opts, params_seed=args.params_seed)
    if getattr(args, "csl_config", None):
        opts = replace(opts, csl_config_path=args.csl_config)
    return opts


def _save_posterior(draws: PosteriorDraws, path):
    with open(path, "w") as fh:
        json.dump(
            {
                "family": draws.family,
                "acceptance_rate": draws.acceptance_rate,
                "draws": draws.draws.tolist(),
            },
            fh,
        )


def _load_posterior(path) -> PosteriorDraws:
    try:
        with open(path) as fh:
            obj = json.load(fh)
        return PosteriorDraws(
            draws=np.asarray(obj["draws"], dtype=float),
            acceptance_rate=float(obj["acceptance_rate"]),
            family=obj["family"],
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad posterior file {path}: {exc}") from exc


def cmd_simulate(args):
    cfg_file = _load_config(args.config)
    if args.case == CSL_CASE:
        csl = load_csl_config(args.csl_config)
        if args.delta is not None:
            csl = csl.with_delta(args.delta)
        cohort = generate_csl_like_cohort(csl, args.n, args.seed)
    elif args.case in SIM_CASES:
        case_cfg = CaseConfig(args.case)
        params_seed = args.params_seed if args.params_seed is not None else args.seed
        rp = draw_replicate_params(case_cfg, params_seed)
        cohort = generate_cohort(
            case_cfg, rp, case_cfg.observational_switching(), args.n, args.seed
        )
    else:
        raise ConfigError(f"unknown case {args.case!r}")
    write_cohort(cohort, args.out, include_latent=args.include_latent)
    print(f"wrote {cohort.n} units to {args.out}")
    return 0


def cmd_fit_theta(args):
    cfg_file = _load_config(args.config)
    cohort = read_cohort(args.cohort)
    mcmc = _mcmc_from(cfg_file, args.seed)
    draws = sample_posterior(cohort, args.family, mcmc)
    _save_posterior(draws, args.out)
    summ = posterior_summary(draws)
    print(f"retained {draws.draws.shape[0]} draws, acceptance {draws.acceptance_rate:.2f}")
    print("posterior mean:", np.round(summ["mean"], 4).tolist())
    print("posterior sd:  ", np.round(summ["sd"], 4).tolist())
    print("split-R:       ", np.round(summ["split_r"], 3).tolist())
    return 0


def cmd_optimize(args):
    cfg_file = _load_config(args.config)
    cohort = read_cohort(args.cohort)
    draws = _load_posterior(args.posterior)
    de = None
    if "de" in cfg_file:
        de_section = dict(cfg_file["de"])
        if "bounds" in de_section:
            de_section["bounds"] = tuple(tuple(b) for b in de_section["bounds"])
        de_section["seed"] = args.seed
        de = DeConfig(**de_section)
    est = optimize_eta(
        cohort,
        draws,
        draws.family,
        de,
        ess_fraction=args.ess_fraction,
        search=args.search,
    )
    result = {
        "eta": est.eta.tolist(),
        "loss": est.loss,
        "ess": est.ess,
        "evaluations": est.evaluations,
        "low_overlap": est.low_overlap,
    }
    with open(args.out, "w") as fh:
        json.dump(result, fh)
    print(json.dumps(result))
    return 0


def cmd_evaluate(args):
    eta = np.asarray([float(v) for v in args.eta.split(",")], dtype=float)
    if args.case == CSL_CASE:
        from .csl import evaluate_csl_policy

        csl = load_csl_config(args.csl_config)
        if args.delta is not None:
            csl = csl.with_delta(args.delta)
        loss = evaluate_csl_policy(csl, eta, args.n_eval, args.seed)
    elif args.case in SIM_CASES:
        case_cfg = CaseConfig(args.case)
        params_seed = args.params_seed if args.params_seed is not None else args.seed
        rp = draw_replicate_params(case_cfg, params_seed)
        loss = evaluate_policy_loss(case_cfg, rp, eta, case_cfg.policy_family, args.n_eval, args.seed)
    else:
        raise ConfigError(f"unknown case {args.case!r}")
    print(f"{loss:.6f}")
    return 0


def _method_result_obj(res):
    return {
        "evaluated_loss": res.evaluated_loss,
        "runtime_seconds": res.runtime_seconds,
        "params": None if res.params is None else np.asarray(res.params).tolist(),
        "diagnostics": {
            k: (v.tolist() if isinstance(v, np.ndarray) else v)
            for k, v in (res.diagnostics or {}).items()
        },
        "error": res.error,
    }


def cmd_replicate(args):
    cfg_file = _load_config(args.config)
    options = _options_from(cfg_file, args)
    methods = tuple(args.methods.split(","))
    rep = run_replicate(args.case, args.n, args.seed, methods, options)
    obj = {
        "case_id": rep.case_id,
        "n": rep.n,
        "seed": rep.seed,
        "methods": {m: _method_result_obj(r) for m, r in rep.methods.items()},
    }
    text = json.dumps(obj, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)
    failures = [m for m, r in rep.methods.items() if r.error]
    return 4 if failures else 0


def cmd_study(args):
    cfg_file = _load_config(args.config)
    options = _options_from(cfg_file, args)
    methods = tuple(args.methods.split(","))
    n_list = [int(v) for v in args.n_list.split(",")]
    study = run_study(args.case, n_list, args.reps, methods, args.seed, options)
    rows = [
        {
            "case": r.case_id,
            "n": r.n,
            "method": r.method,
            "loss_mean": r.loss_mean,
            "loss_sd": r.loss_sd,
            "rt_mean": r.rt_mean,
            "rt_sd": r.rt_sd,
            "n_reps": r.n_reps,
        }
        for r in study.rows
    ]
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=2)
    print(report_table(study, args.format))
    return 0


def cmd_report(args):
    from .harness import StudyRow, StudyTable

    try:
        with open(args.study) as fh:
            rows = json.load(fh)
        table = StudyTable(
            rows=[
                StudyRow(
                    case_id=r["case"],
                    n=int(r["n"]),
                    method=r["method"],
                    loss_mean=r.get("loss_mean"),
                    loss_sd=r.get("loss_sd"),
                    rt_mean=r.get("rt_mean"),
                    rt_sd=r.get("rt_sd"),
                    n_reps=int(r.get("n_reps", 0)),
                )
                for r in rows
            ]
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad study file {args.study}: {exc}") from exc
    print(report_table(table, args.format))
    return 0


def cmd_serve(args):
    import uvicorn

    from .recsvc import create_app

    csl = load_csl_config(args.csl_config)
    uvicorn.run(create_app(csl), host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtdtr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--csl-config", default=None, help="alternative synthetic-world config")

    p = sub.add_parser("simulate", help="generate an observational cohort file")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--params-seed", type=int, default=None)
    p.add_argument("--include-latent", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-theta", help="posterior sampling of the switching model")
    common(p)
    p.add_argument("--cohort", required=True)
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_theta)

    p = sub.add_parser("optimize", help="optimize policy parameters on a cohort")
    common(p)
    p.add_argument("--cohort", required=True)
    p.add_argument("--posterior", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--search", default="shift", choices=("shift", "box"))
    p.add_argument("--ess-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="fresh-world loss of a policy vector")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--eta", required=True, help="comma-separated values")
    p.add_argument("--n-eval", type=int, default=2000)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--params-seed", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("replicate", help="one training/learning/evaluation replicate")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--methods", default="unopt,proposed")
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--params-seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("study", help="aggregate replicates into a results table")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--n-list", required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--methods", default="unopt,proposed")
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--params-seed", type=int, default=None)
    p.add_argument("--format", default="csv", choices=("csv", "markdown"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("report", help="render a saved study as csv/markdown")
    common(p)
    p.add_argument("--study", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "markdown"))
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the recommendation HTTP service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DiagnosticError as exc:
        print(f"diagnostic failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
