import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from plgd.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VIOLATION,
    build_problem,
    check_experiment,
    execute,
    normalize_config,
    run_experiment,
    sweep,
)
from plgd.errors import InvalidConfig


def tight_config(outdir, alpha=0.5):
    return {
        "problem": {
            "family": "supervised",
            "model": {"kind": "linear", "in_dim": 2},
            "dataset": {"inline": {"inputs": [[1.0, 1.0]], "targets": [[4.0]]}},
            "integrand": {"kind": "least_squares"},
        },
        "certificates": {"mode": "analytic"},
        "descent": {"alpha": alpha, "max_iter": 100},
        "output": {"dir": str(outdir)},
    }


def rf_config(outdir, width=32, max_iter=100000, mode="analytic"):
    return {
        "problem": {
            "family": "supervised",
            "model": {"kind": "random_features", "in_dim": 3, "width": width, "seed": 1},
            "dataset": {
                "synthetic": {"kind": "gaussian", "d": 4, "in_dim": 3, "target_dim": 1, "seed": 3}
            },
            "integrand": {"kind": "least_squares"},
        },
        "certificates": {"mode": mode, "n_samples": 8, "seed": 0},
        "descent": {"alpha": "auto", "max_iter": max_iter},
        "output": {"dir": str(outdir)},
    }


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


class TestRunCommand:
    def test_tight_case_reports_and_files(self, tmp_path):
        out = tmp_path / "out"
        code = run_experiment(write_config(tmp_path, tight_config(out)))
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["ledger"]["q"] == 0.0
        assert report["iterations"]["actual"] == 1
        dist = next(v for v in report["verdicts"] if v["name"] == "dist_init")
        assert abs(dist["measured"] - dist["bound"]) <= 1e-12
        assert (out / "trace.csv").exists() and (out / "bounds.csv").exists()
        header = (out / "trace.csv").read_text().splitlines()[0]
        assert header == (
            "iter,loss,gap,q_bound,grad_norm,step_norm,step_bound,dist_init,dist_bound"
        )

    def test_alpha_at_boundary_is_config_error(self, tmp_path):
        cfg = tight_config(tmp_path / "out", alpha=1.0)  # 2/L for this problem
        assert run_experiment(write_config(tmp_path, cfg)) == EXIT_CONFIG

    def test_unknown_key_rejected_with_path(self, tmp_path, capsys):
        cfg = tight_config(tmp_path / "out")
        cfg["problem"]["typo"] = 1
        assert run_experiment(write_config(tmp_path, cfg)) == EXIT_CONFIG
        assert "config.problem" in capsys.readouterr().err

    def test_invalid_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"problem": \n  oops}', encoding="utf-8")
        assert run_experiment(str(path)) == EXIT_CONFIG
        assert "line 2" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert run_experiment(str(tmp_path / "nope.json")) == EXIT_CONFIG

    def test_dataset_from_file(self, tmp_path):
        data_path = tmp_path / "data.json"
        data_path.write_text(
            json.dumps({"inputs": [[1.0, 1.0]], "targets": [[4.0]]}), encoding="utf-8"
        )
        cfg = tight_config(tmp_path / "out")
        cfg["problem"]["dataset"] = {"path": str(data_path)}
        assert run_experiment(write_config(tmp_path, cfg)) == EXIT_OK

    def test_planted_wrong_gradient_exits_two_with_diagnostic(self, tmp_path):
        cfg = normalize_config(rf_config(tmp_path / "out", max_iter=10))
        problem = build_problem(cfg)
        buggy_model = dataclasses.replace(
            problem.model,
            jac_fn=lambda x, th, f=problem.model.jac_fn: 2.0 * f(x, th),
        )
        from plgd.problems import supervised
        from plgd.integrand import least_squares

        bad = supervised(buggy_model, problem.data, least_squares(k=1))
        report = execute(bad, cfg, tmp_path / "out")
        assert report["exit_code"] == EXIT_VIOLATION
        assert not report["gradient_check"]["passed"]
        assert report["gradient_check"]["max_fd_error"] > 1e-3

    def test_lying_certificates_exit_two(self, tmp_path):
        cfg = tight_config(tmp_path / "out", alpha="auto")
        cfg["certificates"]["overrides"] = {"K_F": 0.5, "lambda_F": 0.25}
        assert run_experiment(write_config(tmp_path, cfg)) == EXIT_VIOLATION
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["iterations"]["diverged"]

    def test_sampled_mode_refines_ball_and_passes(self, tmp_path):
        out = tmp_path / "out"
        code = run_experiment(write_config(tmp_path, rf_config(out, mode="sampled")))
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["ledger"]["provenance"] == "sampled"
        assert report["declared_ball_radius"] != 1e3  # refined from the default

    def test_gan_and_vae_families_run(self, tmp_path):
        gan_cfg = {
            "problem": {
                "family": "gan",
                "disc": {"kind": "shallow", "width": 6, "seed": 4, "squash": True},
                "gan_kind": "r1",
                "beta": 5.0,
                "dataset": {
                    "synthetic": {"kind": "two_gaussians", "n_real": 2, "n_gen": 2,
                                  "in_dim": 2, "seed": 0}
                },
            },
            "certificates": {"mode": "sampled", "n_samples": 8, "seed": 0},
            "descent": {"alpha": 0.05, "max_iter": 20},
            "output": {"dir": str(tmp_path / "gan_out")},
        }
        assert run_experiment(write_config(tmp_path, gan_cfg, "gan.json")) == EXIT_OK
        vae_cfg = {
            "problem": {
                "family": "vae",
                "encoder": {"width": 4, "seed": 2},
                "decoder": {"width": 4, "seed": 3},
                "latent_dim": 1,
                "beta": 1.0,
                "noise": {"count": 2, "seed": 5},
                "dataset": {"synthetic": {"kind": "gaussian", "d": 3, "in_dim": 2, "seed": 1}},
            },
            "certificates": {"mode": "sampled", "n_samples": 8, "seed": 0},
            "descent": {"alpha": 0.1, "max_iter": 20},
            "output": {"dir": str(tmp_path / "vae_out")},
        }
        assert run_experiment(write_config(tmp_path, vae_cfg, "vae.json")) == EXIT_OK
        report = json.loads((tmp_path / "vae_out" / "report.json").read_text())
        assert report["ledger"]["mode"] in ("no-uc", "minimal")


class TestCheckCommand:
    def test_ledger_only_no_trace(self, tmp_path):
        out = tmp_path / "out"
        code = check_experiment(write_config(tmp_path, tight_config(out)))
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert "ledger" in report and "verdicts" not in report
        assert not (out / "trace.csv").exists()


class TestDeterminism:
    def test_identical_config_and_seed_reproduce_report_bytes(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path, rf_config(out, max_iter=500, mode="sampled"))
        assert run_experiment(path) == EXIT_OK
        first = (out / "report.json").read_bytes()
        assert run_experiment(path) == EXIT_OK
        assert (out / "report.json").read_bytes() == first

    def test_seed_override_changes_sampled_report(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path, rf_config(out, max_iter=500, mode="sampled"))
        run_experiment(path, seed=0)
        first = (out / "report.json").read_bytes()
        run_experiment(path, seed=1)
        assert (out / "report.json").read_bytes() != first

    def test_reported_contraction_factor_traceable(self, tmp_path):
        # q in the report must equal its defining formula bit for bit
        out = tmp_path / "out"
        run_experiment(write_config(tmp_path, rf_config(out, max_iter=100)))
        led = json.loads((out / "report.json").read_text())["ledger"]
        q = 1.0 + led["L"] * led["lambda"] * led["alpha"] ** 2 - 2.0 * led["lambda"] * led["alpha"]
        assert abs(q - led["q"]) <= 1e-15 * max(abs(q), 1.0)


class TestSweep:
    def test_width_sweep_summary_and_trend(self, tmp_path):
        out = tmp_path / "sweep"
        cfg = rf_config(out, max_iter=300)
        path = write_config(tmp_path, cfg)
        assert sweep(path, "width", [2, 8, 32]) == EXIT_OK
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0] == "value,lambda_N,q,iterations,dist_from_init"
        rows = {float(l.split(",")[0]): l.split(",") for l in lines[1:]}
        assert len(rows) == 3
        lam_small = float(rows[2.0][1])
        lam_large = float(rows[32.0][1])
        assert lam_large > lam_small
        assert (out / "width=8" / "report.json").exists()

    def test_single_value_sweep_matches_run(self, tmp_path):
        cfg = rf_config(tmp_path / "single")
        path = write_config(tmp_path, cfg)
        assert sweep(path, "width", [32]) == EXIT_OK
        swept = json.loads((tmp_path / "single" / "width=32" / "report.json").read_text())
        cfg_run = rf_config(tmp_path / "direct")
        run_experiment(write_config(tmp_path, cfg_run, "direct.json"))
        direct = json.loads((tmp_path / "direct" / "report.json").read_text())
        assert swept["ledger"] == direct["ledger"]
        assert swept["iterations"] == direct["iterations"]
        assert swept["verdicts"] == direct["verdicts"]

    def test_alpha_sweep_contraction_minimized_near_inverse_l(self, tmp_path):
        base = rf_config(tmp_path / "pre", max_iter=50)
        check_experiment(write_config(tmp_path, base, "pre.json"))
        l_total = json.loads((tmp_path / "pre" / "report.json").read_text())["ledger"]["L"]
        inv = 1.0 / l_total
        values = [0.5 * inv, 0.75 * inv, inv, 1.25 * inv, 1.5 * inv]
        out = tmp_path / "asweep"
        cfg = rf_config(out, max_iter=50)
        assert sweep(write_config(tmp_path, cfg, "a.json"), "alpha", values) == EXIT_OK
        lines = (out / "summary.csv").read_text().splitlines()[1:]
        qs = [(float(l.split(",")[0]), float(l.split(",")[2])) for l in lines]
        best_alpha = min(qs, key=lambda t: t[1])[0]
        assert best_alpha == pytest.approx(inv, rel=1e-9)

    def test_unknown_axis_rejected(self, tmp_path):
        path = write_config(tmp_path, rf_config(tmp_path / "x"))
        assert sweep(path, "depth", [1.0]) == EXIT_CONFIG

    def test_datasize_requires_synthetic(self, tmp_path):
        cfg = tight_config(tmp_path / "x")
        path = write_config(tmp_path, cfg)
        assert sweep(path, "datasize", [4.0]) == EXIT_CONFIG


class TestConfigValidation:
    def test_family_specific_keys(self):
        with pytest.raises(InvalidConfig):
            normalize_config({"problem": {"family": "mystery"}})
        with pytest.raises(InvalidConfig):
            normalize_config({"problem": {"family": "supervised"}})  # missing keys

    def test_dataset_choice_exclusive(self, tmp_path):
        cfg = tight_config(tmp_path)
        cfg["problem"]["dataset"]["synthetic"] = {"kind": "gaussian", "d": 1, "in_dim": 1}
        with pytest.raises(InvalidConfig):
            normalize_config(cfg)

    def test_defaults_applied(self, tmp_path):
        cfg = normalize_config(tight_config(tmp_path))
        assert cfg["certificates"]["mode"] == "analytic"
        assert cfg["certificates"]["n_samples"] == 32
        assert cfg["descent"]["max_iter"] == 100
        assert cfg["output"]["formats"] == ["csv", "json"]
