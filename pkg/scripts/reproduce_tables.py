"""Desk-scale reproduction of the study tables and the threshold sweep.

Runs the four simulation studies (10 replicates, n=200; 5 for the heavy
fourth setting) and the labor-world threshold sweep, printing markdown
tables. Expect ~15 minutes.
"""

import argparse

import numpy as np

from rtdtr.harness import report_table, run_csl_sweep, run_study

STUDIES = (
    ("case1", 10, ("unopt", "proposed"), 32),
    ("case2", 10, ("unopt", "proposed"), 2),
    ("case3", 10, ("unopt", "proposed", "bpm"), 8),
    ("case4", 5, ("unopt", "proposed", "bpm"), 2),
)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--skip-csl", action="store_true")
    args = parser.parse_args()

    for case, reps, methods, seed in STUDIES:
        study = run_study(case, [args.n], reps, methods, study_seed=seed)
        print(f"\n## {case} (study seed {seed}, {reps} replicates)\n")
        print(report_table(study, "markdown"))

    if args.skip_csl:
        return
    print("\n## labor world, threshold sweep (seed 1)\n")
    sweep = run_csl_sweep((0.0, 2.0, 4.0, 6.0, 8.0), args.n, 1)
    print("| delta | theta_hat | eta_opt | unopt | est. optimized | fresh-world |")
    print("|---|---|---|---|---|---|")
    for delta, row in sweep.items():
        th = np.round(row["theta_hat"], 3).tolist()
        eta = np.round(row["eta_opt"], 3).tolist()
        print(
            f"| {delta} | {th} | {eta} | {row['unopt_loss']:.1f} "
            f"| {row['estimated_loss']:.1f} | {row['evaluated_loss']:.1f} |"
        )


if __name__ == "__main__":
    main()
