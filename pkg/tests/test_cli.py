import json
from pathlib import Path

import pytest

from crosstalksim.cli import main
from crosstalksim.device import Triplet
from crosstalksim.noise import CrosstalkInjection

from conftest import chain_snapshot, fixture_bytes, snapshot_to_json


@pytest.fixture(scope="module")
def calib_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("calib") / "ehningen.json"
    path.write_bytes(fixture_bytes("ehningen_topology.json"))
    return str(path)


@pytest.fixture(scope="module")
def toy_path(tmp_path_factory):
    # 3-qubit path with the middle qubit driving one edge, leaf driving the other
    snap = chain_snapshot(3)
    doc = json.loads(snapshot_to_json(snap))
    doc["edges"] = [
        {"drive": 1, "target": 0, "cx_error": 0.01, "cx_duration_ns": 300.0},
        {"drive": 2, "target": 1, "cx_error": 0.01, "cx_duration_ns": 300.0},
    ]
    path = tmp_path_factory.mktemp("toy") / "toy.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestPlan:
    def test_ehningen_summary(self, calib_path, tmp_path, capsys):
        out = tmp_path / "plan"
        assert main(["plan", "--calibration", calib_path, "--out", str(out)]) == 0
        message = capsys.readouterr().out
        assert "triplets" in message and "batches" in message
        batches = json.loads((out / "batches.json").read_text())
        triplets = json.loads((out / "triplets.json").read_text())
        assert len(batches) <= 13
        assert sum(len(b) for b in batches) == len(triplets)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "plan"

    def test_toy_single_triplet(self, toy_path, tmp_path, capsys):
        out = tmp_path / "plan"
        assert main(["plan", "--calibration", toy_path, "--out", str(out)]) == 0
        assert "1 triplets, 1 batches" in capsys.readouterr().out

    def test_malformed_json_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        code = main(["plan", "--calibration", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "parse" in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["plan", "--calibration", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_byte_identical_reruns(self, calib_path, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["plan", "--calibration", calib_path, "--out", str(out1)])
        main(["plan", "--calibration", calib_path, "--out", str(out2)])
        assert (out1 / "batches.json").read_bytes() == (out2 / "batches.json").read_bytes()
        assert (out1 / "triplets.json").read_bytes() == (out2 / "triplets.json").read_bytes()


class TestCollisions:
    def test_resonant_pair_reported(self, tmp_path, capsys):
        snap = chain_snapshot(2)
        doc = json.loads(snapshot_to_json(snap))
        doc["qubits"][0]["frequency_ghz"] = 5.0
        doc["qubits"][1]["frequency_ghz"] = 5.001
        path = tmp_path / "res.json"
        path.write_text(json.dumps(doc))
        assert main(["collisions", "--calibration", str(path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert any(r["rule"] == "R1" for r in payload)

    def test_clean_device_empty(self, toy_path, capsys):
        assert main(["collisions", "--calibration", toy_path]) == 0
        assert json.loads(capsys.readouterr().out) == []

    def test_custom_thresholds(self, toy_path, tmp_path, capsys):
        thresholds = tmp_path / "thr.json"
        thresholds.write_text(json.dumps({"r1": 0.2, "r2": 0.0001, "r3": 0.0001, "r4": 0.0001}))
        assert main(["collisions", "--calibration", toy_path, "--thresholds", str(thresholds)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert any(r["rule"] == "R1" for r in payload)  # 70 MHz spacing < 200 MHz

    def test_r2_exact_resonance_fixture(self, tmp_path, capsys):
        snap = chain_snapshot(2)
        doc = json.loads(snapshot_to_json(snap))
        doc["qubits"][0]["frequency_ghz"] = 5.0
        doc["qubits"][1]["frequency_ghz"] = 5.34
        doc["qubits"][1]["anharmonicity_ghz"] = -0.34
        path = tmp_path / "r2.json"
        path.write_text(json.dumps(doc))
        assert main(["collisions", "--calibration", str(path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        r2 = [r for r in payload if r["rule"] == "R2"]
        assert any(abs(r["detuning_ghz"]) < 1e-12 for r in r2)


class TestCharacterize:
    def test_toy_closed_loop(self, toy_path, tmp_path, capsys):
        out = tmp_path / "char"
        code = main(
            ["characterize", "--calibration", toy_path, "--config", "desk", "--seed", "3",
             "--out", str(out)]
        )
        assert code == 0
        table = json.loads((out / "table.json").read_text())
        assert len(table) == 1
        diagnostics = json.loads((out / "diagnostics.json").read_text())
        assert diagnostics["config"]["shots"] == 2000

    def test_injection_elevates_entry(self, toy_path, tmp_path):
        inject_path = tmp_path / "inject.json"
        inject = CrosstalkInjection({Triplet(1, 0, 2): 0.08})
        inject_path.write_text(json.dumps(inject.to_json()))
        out_plain = tmp_path / "plain"
        out_hot = tmp_path / "hot"
        main(["characterize", "--calibration", toy_path, "--config", "desk", "--seed", "3",
              "--out", str(out_plain)])
        main(["characterize", "--calibration", toy_path, "--config", "desk", "--seed", "3",
              "--inject", str(inject_path), "--out", str(out_hot)])
        plain = json.loads((out_plain / "table.json").read_text())[0]["cx_sim_error"]
        hot = json.loads((out_hot / "table.json").read_text())[0]["cx_sim_error"]
        assert hot > plain * 1.5

    def test_missing_calibration_exit_2(self, tmp_path):
        assert main(["characterize", "--calibration", str(tmp_path / "x.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_byte_identical_table(self, toy_path, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            main(["characterize", "--calibration", toy_path, "--config", "desk", "--seed", "9",
                  "--out", str(out)])
        assert (out1 / "table.json").read_bytes() == (out2 / "table.json").read_bytes()


class TestSweep:
    def test_toy_sweep_standard(self, toy_path, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(
            ["sweep", "--calibration", toy_path, "--ladder", "2", "--model", "standard",
             "--shots", "400", "--seed", "2", "--out", str(out)]
        )
        assert code == 0
        rows = (out / "records.csv").read_text().strip().splitlines()
        # header + 4 directed 2-chains x 3 sources
        assert rows[0] == "layout,source,fidelity,flagged"
        assert len(rows) == 1 + 4 * 3
        comparison = json.loads((out / "comparison.json").read_text())
        assert "model-standard vs measured-run-1" in comparison["rms"]
        plot = json.loads((out / "plot_data.json").read_text())
        assert "model-standard" in plot["panels"]

    def test_ladder_too_big_exit_2(self, toy_path, tmp_path):
        assert main(["sweep", "--calibration", toy_path, "--ladder", "30",
                     "--out", str(tmp_path / "o")]) == 2

    def test_crosstalk_requires_table(self, toy_path, tmp_path):
        assert main(["sweep", "--calibration", toy_path, "--ladder", "2", "--model", "crosstalk",
                     "--out", str(tmp_path / "o")]) == 2

    def test_twirl_runs(self, toy_path, tmp_path):
        out = tmp_path / "tw"
        code = main(
            ["sweep", "--calibration", toy_path, "--ladder", "2", "--model", "standard",
             "--twirl", "3x50", "--shots", "150", "--seed", "4", "--out", str(out)]
        )
        assert code == 0

    def test_manifest_replay_byte_identical(self, toy_path, tmp_path):
        out1 = tmp_path / "orig"
        main(["sweep", "--calibration", toy_path, "--ladder", "2", "--model", "standard",
              "--shots", "300", "--seed", "6", "--out", str(out1)])
        manifest = json.loads((out1 / "manifest.json").read_text())
        records_before = (out1 / "records.csv").read_bytes()
        # replay rewrites the same outputs from the recorded argv
        assert main(["--manifest", str(out1 / "manifest.json")]) == 0
        assert (out1 / "records.csv").read_bytes() == records_before


class TestTopLevel:
    def test_no_command_shows_help(self, capsys):
        assert main([]) == 2

    def test_unknown_manifest(self, tmp_path):
        assert main(["--manifest", str(tmp_path / "missing.json")]) == 2
