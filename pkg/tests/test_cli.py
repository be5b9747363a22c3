import json
import os
from pathlib import Path

import pytest

from gapatch.cli import main

FAST_FLAGS = ["--identities", "4", "--photos", "3",
              "--impostor-pairs", "150", "--iters", "6", "--batch", "2",
              "--restart-interval", "3"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGenCorpus:
    def test_writes_pngs_and_manifest(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "gen-corpus", "--out", str(tmp_path),
                               "--identities", "3", "--photos", "2")
        assert code == 0
        assert len(list(tmp_path.glob("*.png"))) == 6
        assert (tmp_path / "manifest.json").exists()
        assert str(tmp_path / "manifest.json") in out

    def test_idempotent_bytes(self, tmp_path, capsys):
        args = ("gen-corpus", "--out", str(tmp_path), "--identities", "2",
                "--photos", "2")
        run_cli(capsys, *args)
        first = (tmp_path / "id0_photo0.png").read_bytes()
        run_cli(capsys, *args)
        assert (tmp_path / "id0_photo0.png").read_bytes() == first

    def test_single_identity_is_validation_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "gen-corpus", "--out", str(tmp_path),
                               "--identities", "1")
        assert code == 2
        assert "error" in err


class TestOptimize:
    def test_zero_iterations_writes_zero_patch(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "optimize", "--out", str(tmp_path),
                               *FAST_FLAGS, "--iters", "0")
        assert code == 0
        doc = json.loads((tmp_path / "patch.json").read_text())
        assert all(v == 0.0 for v in doc["values"])
        report = json.loads((tmp_path / "run_report.json").read_text())
        assert report["queries"]["total_queries"] == 0
        assert "optimization_queries=0" in out

    def test_query_accounting_in_report(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "optimize", "--out", str(tmp_path),
                               *FAST_FLAGS, "--iters", "10", "--batch", "8")
        assert code == 0
        report = json.loads((tmp_path / "run_report.json").read_text())
        assert report["queries"]["per_phase"]["optimization"] == 320

    def test_seed_determinism_bytewise(self, tmp_path, capsys):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            code, _, _ = run_cli(capsys, "optimize", "--out", str(out),
                                 *FAST_FLAGS, "--seed", "42")
            assert code == 0
        assert (out_a / "patch.json").read_bytes() == (out_b / "patch.json").read_bytes()
        assert (out_a / "trace.csv").read_bytes() == (out_b / "trace.csv").read_bytes()

    def test_printed_paths_exist(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "optimize", "--out", str(tmp_path),
                               *FAST_FLAGS)
        assert code == 0
        for line in out.splitlines():
            if line.startswith(str(tmp_path)):
                assert Path(line).exists()


class TestEvalAndFriends:
    @pytest.fixture
    def patch_file(self, tmp_path, capsys):
        out = tmp_path / "opt"
        run_cli(capsys, "optimize", "--out", str(out), *FAST_FLAGS)
        return out / "patch.json"

    def test_eval(self, tmp_path, capsys, patch_file):
        out = tmp_path / "eval"
        code, stdout, _ = run_cli(capsys, "eval", "--patch", str(patch_file),
                                  "--out", str(out), "--identities", "4",
                                  "--photos", "3", "--impostor-pairs", "150")
        assert code == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert 0.0 <= report["asr"] <= 1.0
        assert "asr=" in stdout

    def test_eval_missing_patch_is_io_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "eval", "--patch",
                               str(tmp_path / "nope.json"), "--out",
                               str(tmp_path), "--identities", "4",
                               "--photos", "3", "--impostor-pairs", "150")
        assert code == 4
        assert "I/O error" in err

    def test_sweep_drop_all_row_matches_zero_patch(self, tmp_path, capsys,
                                                   patch_file):
        out = tmp_path / "sweep"
        code, _, _ = run_cli(capsys, "sweep", "--patch", str(patch_file),
                             "--out", str(out), "--identities", "4",
                             "--photos", "3", "--impostor-pairs", "150")
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        rows = [line.split(",") for line in lines[1:]]
        top_full = next(r for r in rows if r[0] == "trim_top" and r[1] == "28")
        bottom_full = next(r for r in rows if r[0] == "trim_bottom" and r[1] == "28")
        assert top_full[2] == bottom_full[2]  # both are the blank-patch loss

    def test_curve_checkpoint_zero(self, tmp_path, capsys):
        out = tmp_path / "curve"
        code, _, _ = run_cli(capsys, "curve", "--out", str(out), *FAST_FLAGS,
                             "--runs", "2", "--checkpoints", "0,48")
        assert code == 0
        report = json.loads((out / "curve.json").read_text())
        assert report["checkpoints"][0]["queries"] == 0
        assert (out / "curve.csv").read_text().startswith("queries,mean_asr,run1,run2")

    def test_ablate_degenerate(self, tmp_path, capsys):
        out = tmp_path / "abl"
        code, stdout, _ = run_cli(capsys, "ablate", "--out", str(out),
                                  *FAST_FLAGS, "--ablate-seeds", "1")
        assert code == 0
        table = json.loads((out / "ablation.json").read_text())
        assert "sym=yes,color=gray,restarts=yes" in table["cells"]

    def test_export_png(self, tmp_path, capsys, patch_file):
        png = tmp_path / "patch.png"
        code, _, _ = run_cli(capsys, "export-png", "--patch", str(patch_file),
                             "--png", str(png))
        assert code == 0
        assert png.exists()


class TestConfigHandling:
    def test_config_file_plus_flag_override(self, tmp_path, capsys):
        cfg = {"optimizer": {"n_iters": 3, "batch_size": 2,
                             "restart_interval": 2},
               "corpus": {"n_identities": 4, "photos_per_identity": 3},
               "evaluation": {"n_impostor_pairs": 150}}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "run"
        code, _, _ = run_cli(capsys, "optimize", "--config", str(cfg_path),
                             "--out", str(out), "--iters", "5")
        assert code == 0
        report = json.loads((out / "run_report.json").read_text())
        assert report["config"]["optimizer"]["n_iters"] == 5  # flag wins
        assert report["config"]["optimizer"]["batch_size"] == 2

    def test_unknown_config_key_rejected_before_any_query(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"optimizzer": {}}))
        code, _, err = run_cli(capsys, "optimize", "--config", str(cfg_path),
                               "--out", str(tmp_path))
        assert code == 2
        assert "unknown config key" in err

    def test_env_var_overrides_oracle_url(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GAP_ORACLE_URL", "http://127.0.0.1:9")
        # Remote oracle with unreachable endpoint -> oracle error exit 3.
        code, _, err = run_cli(capsys, "optimize", "--out", str(tmp_path),
                               *FAST_FLAGS, "--oracle", "remote")
        assert code == 3
        assert "oracle error" in err

    def test_remote_without_url_is_validation_error(self, tmp_path, capsys,
                                                    monkeypatch):
        monkeypatch.delenv("GAP_ORACLE_URL", raising=False)
        code, _, _ = run_cli(capsys, "optimize", "--out", str(tmp_path),
                             *FAST_FLAGS, "--oracle", "remote")
        assert code == 2

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for name in ["gen-corpus", "optimize", "eval", "ablate", "sweep",
                     "curve", "export-png"]:
            assert name in out
