import json

import numpy as np
import pytest

from rtdtr.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestCliFlow:
    def test_simulate_fit_optimize_evaluate(self, tmp_path, capsys):
        cohort_path = tmp_path / "cohort.jsonl"
        posterior_path = tmp_path / "post.json"
        estimate_path = tmp_path / "est.json"
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(
            "mcmc:\n  n_iter: 600\n  burn_in: 300\n  thin: 2\n"
            "de:\n  population_size: 6\n  generations: 6\n  bounds: [[0.0, 2.5]]\n"
        )

        assert run_cli(
            "simulate", "--case", "case1", "--n", "80", "--seed", "3",
            "--out", str(cohort_path),
        ) == 0
        assert cohort_path.exists()

        assert run_cli(
            "fit-theta", "--cohort", str(cohort_path), "--family", "linexp",
            "--seed", "1", "--config", str(cfg_path), "--out", str(posterior_path),
        ) == 0
        post = json.loads(posterior_path.read_text())
        assert post["family"] == "linexp"
        assert len(post["draws"]) == 150

        assert run_cli(
            "optimize", "--cohort", str(cohort_path), "--posterior", str(posterior_path),
            "--seed", "2", "--config", str(cfg_path), "--out", str(estimate_path),
        ) == 0
        est = json.loads(estimate_path.read_text())
        assert len(est["eta"]) == 3
        assert est["ess"] > 0

        capsys.readouterr()
        assert run_cli(
            "evaluate", "--case", "case1", "--eta", ",".join(str(v) for v in est["eta"]),
            "--n-eval", "200", "--seed", "5", "--params-seed", "3",
        ) == 0
        out = capsys.readouterr().out.strip()
        assert float(out) > 0

    def test_replicate_and_study_and_report(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(
            "mcmc:\n  n_iter: 500\n  burn_in: 250\n  thin: 2\n"
            "de:\n  population_size: 6\n  generations: 4\n  bounds: [[0.0, 2.5]]\n"
            "replicate:\n  n_eval: 200\n"
        )
        study_path = tmp_path / "study.json"
        assert run_cli(
            "study", "--case", "case1", "--n-list", "60", "--reps", "2",
            "--methods", "unopt,proposed", "--seed", "4",
            "--config", str(cfg_path), "--out", str(study_path),
        ) == 0
        out = capsys.readouterr().out
        assert "case,n,method,loss_mean" in out
        assert ",unopt," in out and ",proposed," in out

        assert run_cli("report", "--study", str(study_path), "--format", "markdown") == 0
        md = capsys.readouterr().out
        assert md.startswith("| case |")

    def test_exit_code_config_error(self, capsys):
        assert run_cli("simulate", "--case", "bogus", "--n", "10", "--out", "/tmp/x.jsonl") == 2

    def test_exit_code_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        assert run_cli(
            "fit-theta", "--cohort", str(bad), "--family", "linexp", "--out", str(tmp_path / "p.json")
        ) == 3

    def test_csl_simulate_with_delta(self, tmp_path):
        out = tmp_path / "csl.jsonl"
        assert run_cli(
            "simulate", "--case", "csl_like", "--n", "30", "--seed", "2",
            "--delta", "2", "--out", str(out),
        ) == 0
        from rtdtr.io_ import read_cohort

        cohort = read_cohort(out)
        assert cohort.case_id == "csl_like"
        assert cohort.units[0].z2.size == 1
