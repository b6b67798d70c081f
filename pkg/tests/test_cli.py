import json

import numpy as np
import pytest

from logsparse import parse_matrix_csv, parse_vector_csv, save_scene, TdoaScene
from logsparse.cli import main

RECEIVERS = ((0.0, 0.0), (10000.0, 0.0), (0.0, 10000.0), (10000.0, 10000.0), (5000.0, 2000.0), (2000.0, 7000.0))


@pytest.fixture
def out(tmp_path):
    return tmp_path / "results"


@pytest.fixture
def example_files(tmp_path):
    matrix = tmp_path / "example.csv"
    matrix.write_text("2,3\n1,0,-1\n0,1,-1\n", encoding="utf-8")
    b = tmp_path / "rhs.csv"
    b.write_text("2,1\n1\n0\n", encoding="utf-8")
    return matrix, b


def report(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestSolve:
    def test_example(self, example_files, out):
        matrix, b = example_files
        assert main(["solve", str(matrix), str(b), "--p", "0.01", "--out-dir", str(out)]) == 0
        np.testing.assert_allclose(parse_vector_csv(out / "example_solution.csv"), [1.0, 0.0, 0.0], atol=1e-6)
        data = report(out / "example_solve.json")
        assert data["run"]["command"] == "solve"
        assert data["support"] == [0]
        assert data["p"] == 0.01
        assert (out / "example_trace.csv").read_text(encoding="utf-8").startswith("iteration,objective\n0,")

    def test_constrained(self, example_files, out):
        matrix, b = example_files
        assert main(["solve", str(matrix), str(b), "--mode", "constrained", "--epsilon", "0.01", "--out-dir", str(out)]) == 0
        assert report(out / "example_solve.json")["mode"] == "constrained"

    def test_malformed(self, tmp_path, example_files, out):
        _, b = example_files
        broken = tmp_path / "broken.csv"
        broken.write_text("2,3\n1,0,-1\n0,one,-1\n", encoding="utf-8")
        assert main(["solve", str(broken), str(b), "--out-dir", str(out)]) == 2

    def test_missing_file(self, tmp_path, example_files, out):
        _, b = example_files
        assert main(["solve", str(tmp_path / "nope.csv"), str(b), "--out-dir", str(out)]) == 2

    def test_row_mismatch(self, tmp_path, example_files, out):
        matrix, _ = example_files
        b = tmp_path / "long.csv"
        b.write_text("3,1\n1\n0\n0\n", encoding="utf-8")
        assert main(["solve", str(matrix), str(b), "--out-dir", str(out)]) == 3

    def test_bad_params(self, example_files, out):
        matrix, b = example_files
        assert main(["solve", str(matrix), str(b), "--q", "2", "--out-dir", str(out)]) == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["factor"])


class TestAnalyze:
    def test_identity(self, tmp_path, out):
        matrix = tmp_path / "eye.csv"
        matrix.write_text("3,3\n1,0,0\n0,1,0\n0,0,1\n", encoding="utf-8")
        assert main(["analyze", str(matrix), "--k", "1", "--out-dir", str(out)]) == 0
        data = report(out / "eye_analysis.json")
        assert data["coherence"]["value"] == 0.0
        assert data["omp_guarantee_k"]["value"] == 3
        assert data["nsc"]["l1"]["error"] == "TrivialNullSpace"

    def test_example(self, example_files, out):
        matrix, _ = example_files
        assert main(["analyze", str(matrix), "--k", "1", "--rip", "--out-dir", str(out)]) == 0
        data = report(out / "example_analysis.json")
        assert data["nsc"]["l1"]["value"] == pytest.approx(0.5)
        assert data["nsc"]["h"]["value"] == pytest.approx(0.5)
        assert data["nsc"]["l1"]["stability_constant"] == pytest.approx(6.0)
        assert "value" in data["rip"]["delta_k"]

    def test_rip_too_large(self, tmp_path, out, rng):
        A = rng.standard_normal((10, 30))
        matrix = tmp_path / "wide.csv"
        matrix.write_text("10,30\n" + "\n".join(",".join(repr(float(v)) for v in row) for row in A) + "\n", encoding="utf-8")
        assert main(["analyze", str(matrix), "--k", "2", "--rip", "--samples", "50", "--out-dir", str(out)]) == 0
        data = report(out / "wide_analysis.json")
        assert data["rip"]["delta_k"]["error"] == "TooLarge"
        assert "value" in data["coherence"]


class TestLocalization:
    def test_simulate_then_locate(self, tmp_path, out):
        scene = save_scene(tmp_path / "scene.json", TdoaScene(receivers=RECEIVERS, targets=((3000.0, 4500.0),)))
        assert main(["simulate", str(scene), "--out-dir", str(out)]) == 0
        delays = out / "scene_delays.csv"
        assert parse_matrix_csv(delays).shape == (5, 1)

        assert main(["locate", str(scene), str(delays), "--out-dir", str(out)]) == 0
        np.testing.assert_allclose(parse_matrix_csv(out / "scene_delays_positions.csv"), [[3000.0, 4500.0]])
        data = report(out / "scene_delays_locate.json")
        assert data["matched_errors"] == pytest.approx([0.0], abs=1e-6)

    def test_locate_needs_receivers(self, tmp_path, out):
        scene = tmp_path / "scene.json"
        scene.write_text('{"targets": [[1, 1]]}', encoding="utf-8")
        delays = tmp_path / "delays.csv"
        delays.write_text("1,1\n5\n", encoding="utf-8")
        assert main(["locate", str(scene), str(delays), "--out-dir", str(out)]) == 2

    def test_receiver_mismatch(self, tmp_path, out):
        scene = save_scene(tmp_path / "scene.json", TdoaScene(receivers=RECEIVERS, targets=((3000.0, 4500.0),)))
        delays = tmp_path / "delays.csv"
        delays.write_text("2,1\n5\n6\n", encoding="utf-8")
        assert main(["locate", str(scene), str(delays), "--out-dir", str(out)]) == 3


class TestSweep:
    def test_repeatable(self, tmp_path):
        spec = tmp_path / "small.ini"
        spec.write_text("[SWEEP]\ntargets = 1\nreceivers = 6\nnoise_ns = 0\ntrials = 2\nnx = 11\nny = 11\n", encoding="utf-8")
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["sweep", str(spec), "--no-progress", "--seed", "7", "--out-dir", str(first)]) == 0
        assert main(["sweep", str(spec), "--no-progress", "--seed", "7", "--out-dir", str(second)]) == 0
        assert (first / "small_trials.csv").read_bytes() == (second / "small_trials.csv").read_bytes()
        assert report(first / "small_sweep.json")["run"]["seed"] == 7
        assert not (first / "small_baseline.csv").exists()

    def test_threads_same_bytes(self, tmp_path):
        spec = tmp_path / "small.ini"
        spec.write_text("[SWEEP]\ntargets = 1,2\nreceivers = 6\nnoise_ns = 0,1\ntrials = 2\nnx = 11\nny = 11\nbaseline = true\n", encoding="utf-8")
        single, pooled = tmp_path / "single", tmp_path / "pooled"
        assert main(["sweep", str(spec), "--no-progress", "--threads", "1", "--out-dir", str(single)]) == 0
        assert main(["sweep", str(spec), "--no-progress", "--threads", "2", "--out-dir", str(pooled)]) == 0
        for name in ("small_trials.csv", "small_summary.csv", "small_baseline.csv"):
            assert (single / name).read_bytes() == (pooled / name).read_bytes()

    def test_single_noiseless_trial(self, tmp_path, out):
        spec = tmp_path / "one.ini"
        spec.write_text("[SWEEP]\ntargets = 1\nreceivers = 6\nnoise_ns = 0\ntrials = 1\n", encoding="utf-8")
        assert main(["sweep", str(spec), "--no-progress", "--out-dir", str(out)]) == 0
        header, row = (out / "one_trials.csv").read_text(encoding="utf-8").splitlines()
        assert header == "seed,K,m,noise_ns,success,rmse_m,iterations"
        assert row.split(",")[4] == "1"
