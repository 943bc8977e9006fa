import json

import numpy as np
import pytest

from gdssm import cli
from gdssm.model import load_checkpoint, param_dict
from gdssm.training import init_model

TINY_VERIFY = ["--verify.seeds", "1", "--verify.etas", "1.0", "--verify.dims", "1,2",
               "--verify.contexts", "1,2", "--verify.layers", "2",
               "--verify.outer-trials", "5"]

TINY_TRAIN = ["--f", "2", "--n-context", "3", "--total-steps", "4",
              "--train.batch-size", "2", "--train.eval-every", "2",
              "--train.eval-tasks", "4"]


def run(tmp_path, command, *extra) -> tuple[int, dict]:
    code = cli.main([command, "--out-dir", str(tmp_path), *extra])
    manifests = [json.loads(p.read_text()) for p in tmp_path.glob("*_manifest.json")]
    matching = [m for m in manifests if m["command"] == command]
    return code, matching[-1] if matching else {}


class TestConfigParsing:
    def test_comments_blanks_and_dotted_keys(self):
        text = """
        # a full-line comment
        seed = 3
        train.total_steps = 12   # an inline comment

        oracle.eta = 1.5
        """
        kv = cli.parse_config_text(text)
        assert kv == {"seed": "3", "train.total_steps": "12", "oracle.eta": "1.5"}

    def test_aliases_and_hyphens_normalize(self):
        kv = cli.parse_config_text("total-steps = 7\nvariant = 1d\n")
        assert kv == {"train.total_steps": "7", "train.variant": "1d"}

    def test_malformed_line_names_its_number(self):
        with pytest.raises(cli.ConfigError, match="line 2"):
            cli.parse_config_text("seed = 1\nnot a pair\n")

    def test_empty_key_rejected(self):
        with pytest.raises(cli.ConfigError, match="empty key"):
            cli.parse_config_text("= 5\n")

    def test_overrides_both_spellings(self):
        kv = cli.parse_overrides(["--seed", "4", "--train.lr-ssm=0.01", "--eta", "2.0"])
        assert kv == {"seed": "4", "train.lr_ssm": "0.01", "oracle.eta": "2.0"}

    def test_override_missing_value_rejected(self):
        with pytest.raises(cli.ConfigError, match="missing a value"):
            cli.parse_overrides(["--seed"])

    def test_override_requires_flag_syntax(self):
        with pytest.raises(cli.ConfigError, match="--key"):
            cli.parse_overrides(["seed", "4"])

    def test_precedence_defaults_file_override(self):
        cfg = cli.resolve_config({"seed": "5", "f": "7"}, {"f": "9"})
        assert cfg["seed"] == 5
        assert cfg["f"] == 9
        assert cfg["n_context"] == 10  # untouched default

    def test_unknown_key_rejected(self):
        with pytest.raises(cli.ConfigError, match="unknown config key"):
            cli.resolve_config({"training.variant": "nd"})

    def test_uncastable_value_names_the_key(self):
        with pytest.raises(cli.ConfigError, match="'seed'"):
            cli.resolve_config({"seed": "many"})

    def test_run_id_is_stable_and_command_scoped(self):
        cfg = cli.resolve_config({})
        a = cli.run_id_for("train", cfg)
        assert a == cli.run_id_for("train", dict(cfg))
        assert len(a) == 12
        assert a != cli.run_id_for("eval", cfg)
        assert a != cli.run_id_for("train", cli.resolve_config({"seed": "1"}))


class TestExitCodes:
    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        code = cli.main(["eval", "--bogus", "1"])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_malformed_config_file_exits_2(self, tmp_path, capsys):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("just junk\n")
        code = cli.main(["train", "--config", str(cfg_file)])
        assert code == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_config_file_exits_2(self, capsys):
        assert cli.main(["train", "--config", "/nonexistent.cfg"]) == 2

    def test_unknown_command_is_an_argparse_error(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["serve"])

    def test_verify_failure_exits_1_and_names_the_property(self, tmp_path, capsys,
                                                           monkeypatch):
        monkeypatch.setattr(cli, "verify_battery",
                            lambda cfg: [("construct_1d_matches_gd", 1.0, 1e-10)])
        code, manifest = run(tmp_path, "verify")
        assert code == 1
        assert "construct_1d_matches_gd" in capsys.readouterr().err
        assert manifest["failed_property"] == "construct_1d_matches_gd"
        assert manifest["status"] == "failed (exit 1)"
        csv = next(tmp_path.glob("*_verify.csv")).read_text().splitlines()
        assert csv[0] == cli.VERIFY_HEADER
        assert csv[1].endswith(",fail")


class TestVerifyCommand:
    def test_tiny_battery_passes(self, tmp_path, capsys):
        code, manifest = run(tmp_path, "verify", *TINY_VERIFY)
        assert code == 0
        assert manifest["status"] == "ok"
        lines = next(tmp_path.glob("*_verify.csv")).read_text().splitlines()
        assert lines[0] == cli.VERIFY_HEADER
        names = {line.split(",")[0] for line in lines[1:]}
        assert "construct_1d_matches_gd" in names
        assert "grad_check_nonlinear" in names
        assert all(line.endswith(",pass") for line in lines[1:])

    def test_reruns_are_byte_identical(self, tmp_path):
        run(tmp_path, "verify", *TINY_VERIFY)
        path = next(tmp_path.glob("*_verify.csv"))
        first = path.read_bytes()
        run(tmp_path, "verify", *TINY_VERIFY)
        assert path.read_bytes() == first


class TestTrainCommand:
    def test_artifacts_and_manifest(self, tmp_path):
        code, manifest = run(tmp_path, "train", *TINY_TRAIN)
        assert code == 0
        rid = manifest["run_id"]
        history = tmp_path / f"{rid}_history.csv"
        ck_csv = tmp_path / f"{rid}_checkpoint.csv"
        ck_json = tmp_path / f"{rid}_checkpoint.json"
        assert history.exists() and ck_csv.exists() and ck_json.exists()
        assert manifest["command"] == "train"
        assert manifest["status"] == "ok"
        assert isinstance(manifest["wall_clock_s"], float)
        assert sorted(manifest["artifacts"]) == [
            f"{rid}_checkpoint.csv", f"{rid}_checkpoint.json", f"{rid}_history.csv",
        ]
        lines = history.read_text().splitlines()
        assert lines[0] == "step,lr_ssm,lr_global,train_loss,eval_loss"
        assert [int(l.split(",")[0]) for l in lines[1:]] == [2, 4]
        meta = json.loads(ck_json.read_text())
        assert meta["run_id"] == rid
        assert meta["variant"] == "nd"

    def test_zero_step_run_checkpoints_the_initialization(self, tmp_path):
        code, manifest = run(tmp_path, "train", "--f", "2", "--n-context", "3",
                             "--total-steps", "0", "--train.eval-tasks", "4")
        assert code == 0
        rid = manifest["run_id"]
        loaded = load_checkpoint(str(tmp_path / f"{rid}_checkpoint.csv"),
                                 str(tmp_path / f"{rid}_checkpoint.json"))
        cfg = cli.resolve_config({"f": "2", "n_context": "3",
                                  "train.total_steps": "0",
                                  "train.eval_tasks": "4"})
        reference = init_model(cli.build_train_config(cfg))
        for name, arr in param_dict(reference).items():
            np.testing.assert_array_equal(param_dict(loaded)[name], arr, err_msg=name)
        history = (tmp_path / f"{rid}_history.csv").read_text().splitlines()
        assert len(history) == 2 and history[1].startswith("0,")

    def test_reruns_are_byte_identical(self, tmp_path):
        _, manifest = run(tmp_path, "train", *TINY_TRAIN)
        rid = manifest["run_id"]
        files = [f"{rid}_history.csv", f"{rid}_checkpoint.csv", f"{rid}_checkpoint.json"]
        first = {name: (tmp_path / name).read_bytes() for name in files}
        run(tmp_path, "train", *TINY_TRAIN)
        for name in files:
            assert (tmp_path / name).read_bytes() == first[name], name

    def test_divergence_reports_exit_1(self, tmp_path, capsys):
        code, manifest = run(tmp_path, "train", "--f", "2", "--n-context", "3",
                             "--total-steps", "2", "--train.batch-size", "2",
                             "--train.eval-tasks", "2",
                             "--train.init-scale", "500.0")
        assert code == 1
        assert manifest["status"].startswith("failed: diverged")
        assert "diverged" in capsys.readouterr().err


class TestEvalCommand:
    def test_linear_auto_predictors(self, tmp_path):
        code, manifest = run(tmp_path, "eval", "--f", "2", "--n-context", "3",
                             "--eval.n-tasks", "20", "--eta", "1.0")
        assert code == 0
        rid = manifest["run_id"]
        lines = (tmp_path / f"{rid}_results.csv").read_text().splitlines()
        assert lines[0] == cli.RESULT_HEADER if hasattr(cli, "RESULT_HEADER") else True
        tags = [line.split(",")[0] for line in lines[1:]]
        assert tags == ["zero", "gd-oracle(1)", "newton", "constructed-gdssm", "lsa"]
        assert manifest["chosen_eta"]["gd-oracle"] == {"eta": 1.0, "tuned": False}

    def test_sine_auto_predictors_and_tuning(self, tmp_path):
        code, manifest = run(tmp_path, "eval", "--f", "2", "--n-context", "3",
                             "--task-kind", "sine", "--eval.n-tasks", "10",
                             "--oracle.tune-tasks", "20")
        assert code == 0
        rid = manifest["run_id"]
        tags = [line.split(",")[0] for line in
                (tmp_path / f"{rid}_results.csv").read_text().splitlines()[1:]]
        assert tags == ["zero", "gd-oracle(1)", "nonlinear-gd-oracle(1)"]
        assert manifest["chosen_eta"]["gd-oracle"]["tuned"] is True
        assert manifest["chosen_eta"]["nonlinear-gd-oracle"]["tuned"] is True

    def test_checkpoint_adds_the_trained_predictor(self, tmp_path):
        _, train_manifest = run(tmp_path, "train", *TINY_TRAIN)
        ck = tmp_path / f"{train_manifest['run_id']}_checkpoint.csv"
        code, manifest = run(tmp_path, "eval", "--f", "2", "--n-context", "3",
                             "--eval.n-tasks", "10", "--eta", "1.0",
                             "--checkpoint", str(ck))
        assert code == 0
        rid = manifest["run_id"]
        tags = [line.split(",")[0] for line in
                (tmp_path / f"{rid}_results.csv").read_text().splitlines()[1:]]
        assert "trained-gdssm" in tags

    def test_trained_predictor_without_checkpoint_exits_2(self, tmp_path, capsys):
        code, manifest = run(tmp_path, "eval", "--f", "2", "--n-context", "3",
                             "--eval.n-tasks", "5", "--eta", "1.0",
                             "--eval.predictors", "trained-gdssm")
        assert code == 2
        assert "eval.checkpoint" in capsys.readouterr().err

    def test_dangling_checkpoint_path_exits_2(self, tmp_path, capsys):
        code, _ = run(tmp_path, "eval", "--checkpoint", str(tmp_path / "no.csv"))
        assert code == 2


class TestCompareCommand:
    def test_constructed_vs_oracle_rows(self, tmp_path):
        code, manifest = run(tmp_path, "compare", "--f", "3", "--n-context", "4",
                             "--compare.n-tasks", "10",
                             "--compare.sensitivity-tasks", "5", "--eta", "1.0")
        assert code == 0
        rid = manifest["run_id"]
        lines = (tmp_path / f"{rid}_results.csv").read_text().splitlines()
        metrics = [line.split(",")[1] for line in lines[1:]]
        assert metrics == ["prediction_l2_mean", "prediction_l2_max",
                           "target_norm_mean", "sensitivity_cosine_mean",
                           "sensitivity_l2_mean", "sensitivity_undefined_count"]
        values = {line.split(",")[1]: line.split(",")[6] for line in lines[1:]}
        assert float(values["prediction_l2_mean"]) < 1e-12
        assert float(values["sensitivity_cosine_mean"]) == pytest.approx(1.0, abs=1e-10)
        assert not list(tmp_path.glob("*_alignment.csv"))

    def test_trained_vs_constructed_writes_alignment(self, tmp_path):
        _, train_manifest = run(tmp_path, "train", *TINY_TRAIN)
        ck = tmp_path / f"{train_manifest['run_id']}_checkpoint.csv"
        code, manifest = run(tmp_path, "compare", "--f", "2", "--n-context", "3",
                             "--compare.a", "trained-gdssm",
                             "--compare.b", "constructed-gdssm",
                             "--compare.n-tasks", "8",
                             "--compare.sensitivity-tasks", "4",
                             "--eta", "1.0", "--checkpoint", str(ck))
        assert code == 0
        rid = manifest["run_id"]
        lines = (tmp_path / f"{rid}_alignment.csv").read_text().splitlines()
        assert lines[0] == cli.ALIGNMENT_HEADER
        assert {line.split(",")[0] for line in lines[1:]} == {
            "Q", "q", "lambda", "beta", "emb_x", "emb_y"}


class TestSweepCommand:
    def test_alpha_sweep_rows(self, tmp_path):
        code, manifest = run(tmp_path, "sweep", "--f", "2", "--n-context", "3",
                             "--sweep.values", "0.5,1.0", "--sweep.n-tasks", "10",
                             "--eta", "1.0")
        assert code == 0
        rid = manifest["run_id"]
        lines = (tmp_path / f"{rid}_results.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 3  # grid x {zero, gd-oracle, constructed}
        alphas = {line.split(",")[4] for line in lines[1:]}
        assert alphas == {"0.5", "1.0"}

    def test_dimension_sweep_rejects_a_checkpoint(self, tmp_path, capsys):
        _, train_manifest = run(tmp_path, "train", *TINY_TRAIN)
        ck = tmp_path / f"{train_manifest['run_id']}_checkpoint.csv"
        code, _ = run(tmp_path, "sweep", "--sweep.kind", "dimension",
                      "--sweep.values", "2,3", "--sweep.n-tasks", "5",
                      "--eta", "1.0", "--checkpoint", str(ck))
        assert code == 2

    def test_bad_sweep_kind_exits_2(self, tmp_path):
        code, _ = run(tmp_path, "sweep", "--sweep.kind", "eta")
        assert code == 2


class TestAblateCommand:
    def test_windowed_variant_trains_three_models(self, tmp_path):
        code, manifest = run(tmp_path, "ablate", "--f", "2", "--n-context", "3",
                             "--train.batch-size", "2", "--train.eval-tasks", "2",
                             "--ablate.total-steps", "2", "--ablate.n-tasks", "10",
                             "--eta", "1.0")
        assert code == 0
        rid = manifest["run_id"]
        lines = (tmp_path / f"{rid}_results.csv").read_text().splitlines()
        tags = [line.split(",")[0] for line in lines[1:]]
        assert tags == ["trained-gdssm", "trained-gdssm[window]",
                        "trained-gdssm[skip]", "gd-oracle(1)", "zero",
                        "trained-gdssm[window]", "trained-gdssm[skip]"]
        metrics = [line.split(",")[1] for line in lines[1:]]
        assert metrics.count("loss_ratio_vs_full") == 2
        for ablation in ("none", "window", "skip"):
            assert (tmp_path / f"{rid}_checkpoint_{ablation}.csv").exists()
            assert (tmp_path / f"{rid}_checkpoint_{ablation}.json").exists()

    def test_scalar_variant_trains_the_input_ablation(self, tmp_path):
        code, manifest = run(tmp_path, "ablate", "--variant", "1d", "--f", "2",
                             "--n-context", "3", "--train.batch-size", "2",
                             "--train.eval-tasks", "2", "--ablate.total-steps", "2",
                             "--ablate.n-tasks", "10", "--eta", "1.0")
        assert code == 0
        rid = manifest["run_id"]
        tags = [line.split(",")[0] for line in
                (tmp_path / f"{rid}_results.csv").read_text().splitlines()[1:]]
        assert "trained-gdssm[input]" in tags

    def test_multilayer_variant_rejected(self, tmp_path):
        code, _ = run(tmp_path, "ablate", "--variant", "multilayer")
        assert code == 2


class TestManifestLifecycle:
    def test_manifest_finalizes_with_timing_and_artifacts(self, tmp_path):
        code, manifest = run(tmp_path, "train", *TINY_TRAIN)
        assert code == 0
        assert manifest["version"]
        assert manifest["started_utc"] <= manifest["finished_utc"]
        assert manifest["wall_clock_s"] >= 0.0
        assert manifest["config"]["f"] == 2
        assert all(manifest["run_id"] in name for name in manifest["artifacts"])
