"""CLI subcommands, exit codes, and file round-trips."""
import json

import numpy as np
import pytest

from sapd import ArrayConfig, DoaEstimate, Scene
from sapd.cli import main


def write_scene(tmp_path, angles=(0.0, 8.0), amplitudes=(30.0, 30.0), snr_db=15.0):
    scene = Scene(angles=angles, amplitudes=amplitudes, snr_db=snr_db)
    p = tmp_path / "scene.json"
    p.write_text(scene.to_json())
    return p


class TestSimulate:
    def test_writes_snapshot_and_truth(self, tmp_path, capsys):
        scene = write_scene(tmp_path)
        out = tmp_path / "snap.json"
        rc = main(["simulate", "--scene", str(scene), "--out", str(out), "--seed", "7"])
        assert rc == 0
        assert out.exists()
        truth = json.loads(out.with_suffix(".json.truth.json").read_text())
        assert truth["angles_deg"] == [0.0, 8.0]

    def test_deterministic(self, tmp_path):
        scene = write_scene(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["simulate", "--scene", str(scene), "--out", str(a), "--seed", "7"])
        main(["simulate", "--scene", str(scene), "--out", str(b), "--seed", "7"])
        assert a.read_text() == b.read_text()

    def test_invalid_scene_exit_2(self, tmp_path):
        angles = tuple(float(v) for v in range(-40, 40, 10))
        scene = write_scene(tmp_path, angles=angles, amplitudes=(30.0,) * 8)
        rc = main(["simulate", "--scene", str(scene), "--out",
                   str(tmp_path / "x.json")])
        assert rc == 2

    def test_missing_file_exit_2(self, tmp_path):
        rc = main(["simulate", "--scene", str(tmp_path / "absent.json"),
                   "--out", str(tmp_path / "x.json")])
        assert rc == 2


class TestEstimate:
    def test_round_trip(self, tmp_path, capsys):
        scene = write_scene(tmp_path)
        snap = tmp_path / "snap.json"
        main(["simulate", "--scene", str(scene), "--out", str(snap), "--seed", "7"])
        out = tmp_path / "est.json"
        rc = main(["estimate", "--snapshot", str(snap), "--out", str(out)])
        assert rc == 0
        est = DoaEstimate.from_json_dict(json.loads(out.read_text()))
        assert len(est.angles) == 2
        assert abs(est.angles[0] - 0.0) < 0.5
        assert abs(est.angles[1] - 8.0) < 0.5
        printed = capsys.readouterr().out
        assert "2 target(s)" in printed

    def test_params_override_epsilon(self, tmp_path, capsys):
        scene = write_scene(tmp_path)
        snap = tmp_path / "snap.json"
        main(["simulate", "--scene", str(scene), "--out", str(snap), "--seed", "7"])
        out = tmp_path / "est.json"
        rc = main(["estimate", "--snapshot", str(snap), "--out", str(out),
                   "--params", "epsilon=1e9"])
        assert rc == 0
        est = json.loads(out.read_text())
        assert est["patch_rounds"] == 0

    def test_unknown_param_exit_2(self, tmp_path):
        scene = write_scene(tmp_path)
        snap = tmp_path / "snap.json"
        main(["simulate", "--scene", str(scene), "--out", str(snap)])
        rc = main(["estimate", "--snapshot", str(snap), "--params", "bogus=1"])
        assert rc == 2

    def test_noise_only_reports_zero_targets(self, tmp_path, capsys):
        from sapd.array_model import Snapshot
        rng = np.random.default_rng(0)
        n = 0.1 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
        snap = tmp_path / "noise.json"
        snap.write_text(Snapshot(n).to_json())
        rc = main(["estimate", "--snapshot", str(snap)])
        assert rc == 0
        assert "0 targets" in capsys.readouterr().out


class TestBench:
    def test_smoke_preset_writes_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "rows.csv"
        rc = main(["bench", "--preset", "example5_patch", "--trials", "5",
                   "--out", str(out)])
        text = out.read_text()
        assert text.startswith("scenario,")
        summary = json.loads(out.with_suffix(".json").read_text())
        assert summary["scenario"] == "example5_patch"
        assert rc in (0, 3)  # tiny trial counts may miss the embedded bands

    def test_unknown_preset_exit_2(self, tmp_path):
        rc = main(["bench", "--preset", "nonsense"])
        assert rc == 2

    def test_stdout_csv_when_no_out(self, capsys):
        rc = main(["bench", "--preset", "example5_patch", "--trials", "3"])
        out = capsys.readouterr().out
        assert out.startswith("scenario,")
        assert rc in (0, 3)


class TestUsage:
    def test_no_command_exit_2(self, capsys):
        assert main([]) == 2

    def test_config_file_round_trip(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(ArrayConfig().to_json())
        scene = write_scene(tmp_path)
        snap = tmp_path / "snap.json"
        rc = main(["simulate", "--scene", str(scene), "--out", str(snap),
                   "--config", str(cfgfile)])
        assert rc == 0
