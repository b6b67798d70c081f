import math

import numpy as np
import pytest

from logsparse import (
    ParseError,
    SweepSpec,
    TdoaScene,
    TrialRecord,
    aggregate,
    build_system,
    load_sweep_spec,
    omp_guarantee_k,
    run_sweep,
    run_trial,
    true_delays,
    write_baseline,
    write_summary,
    write_trials,
)

SMALL = SweepSpec(targets=(1,), receivers=(6,), noise_ns=(0.0,), trials=2, seed=3, nx=11, ny=11)


class TestTrial:
    def test_seed(self):
        record = run_trial(SMALL, 1, 6, 0.0, 1)
        assert record.seed == 4
        assert (record.K, record.m, record.noise_ns) == (1, 6, 0.0)

    def test_on_grid_success(self):
        record = run_trial(SMALL, 1, 6, 0.0, 0)
        assert record.success
        assert record.rmse_m == pytest.approx(0.0, abs=1e-6)

    def test_baseline(self):
        spec = SweepSpec(targets=(1,), receivers=(6,), noise_ns=(0.0,), trials=1, nx=11, ny=11, baseline=True)
        record = run_trial(spec, 1, 6, 0.0, 0)
        assert record.baseline_success is not None
        assert record.baseline_rmse_m is not None
        # a lone noiseless emitter is its own best matching column
        assert record.omp_success
        assert record.omp_rmse_m == pytest.approx(0.0, abs=1e-6)

    def test_no_baseline_fields(self):
        record = run_trial(SMALL, 1, 6, 0.0, 0)
        assert record.omp_success is None and record.baseline_success is None

    def test_off_grid(self):
        spec = SweepSpec(targets=(1,), receivers=(6,), noise_ns=(0.0,), trials=2, seed=3, nx=11, ny=11, off_grid=True)
        on = run_trial(SMALL, 1, 6, 0.0, 0)
        off = run_trial(spec, 1, 6, 0.0, 0)
        assert on.rmse_m == pytest.approx(0.0, abs=1e-6)
        assert 0.0 < off.rmse_m < math.inf


class TestSweep:
    def test_order_and_seeds(self):
        spec = SweepSpec(targets=(1, 2), receivers=(6,), noise_ns=(0.0,), trials=2, seed=10, nx=11, ny=11)
        records = run_sweep(spec, progress=False)
        assert [(r.K, r.seed) for r in records] == [(1, 10), (1, 11), (2, 10), (2, 11)]

    def test_repeatable(self, tmp_path):
        first = write_trials(tmp_path / "a.csv", run_sweep(SMALL, progress=False))
        second = write_trials(tmp_path / "b.csv", run_sweep(SMALL, threads=2, progress=False))
        assert first.read_bytes() == second.read_bytes()

    def test_aggregate(self):
        records = [
            TrialRecord(0, 1, 6, 0.0, True, 1.0, 3),
            TrialRecord(1, 1, 6, 0.0, False, math.inf, 0),
            TrialRecord(0, 2, 6, 0.0, True, 2.0, 5),
        ]
        summaries = aggregate(records)
        assert [(s.K, s.trials) for s in summaries] == [(1, 2), (2, 1)]
        assert summaries[0].success_ratio == 0.5
        assert summaries[0].mean_rmse_m == 1.0
        assert summaries[0].baseline_success_ratio is None

    def test_aggregate_greedy(self):
        records = [
            TrialRecord(0, 1, 6, 0.0, True, 1.0, 3, True, 1.0, True, 1.0),
            TrialRecord(1, 1, 6, 0.0, True, 1.0, 3, False, 9.0, False, 9.0),
            TrialRecord(2, 1, 6, 0.0, True, 1.0, 3, False, 9.0, True, 2.0),
            TrialRecord(3, 1, 6, 0.0, True, 1.0, 3, False, 9.0, True, 2.0),
        ]
        (summary,) = aggregate(records)
        assert summary.baseline_success_ratio == 0.25
        assert summary.omp_success_ratio == 0.75

    def test_baseline_file(self, tmp_path):
        records = [TrialRecord(0, 1, 6, 0.0, True, 1.0, 3, True, 1.0, False, 2.5), TrialRecord(1, 1, 6, 0.0, True, 1.0, 3)]
        path = write_baseline(tmp_path / "baseline.csv", records)
        assert path.read_text(encoding="utf-8") == "seed,K,m,noise_ns,success,rmse_m,omp_success,omp_rmse_m\n0,1,6,0,1,1,0,2.5\n"

    def test_summary_file(self, tmp_path):
        summaries = aggregate([TrialRecord(0, 1, 6, 10.0, True, 1.5, 3)])
        path = write_summary(tmp_path / "summary.csv", summaries)
        assert path.read_text(encoding="utf-8") == "K,m,noise_ns,trials,success_ratio,mean_rmse_m\n1,6,10,1,1,1.5\n"

    @pytest.mark.slow
    def test_five_targets_more_receivers(self):
        spec = SweepSpec(targets=(5,), receivers=(6, 8), noise_ns=(1.0,), trials=20)
        six, eight = (s.success_ratio for s in aggregate(run_sweep(spec, threads=4, progress=False)))
        assert six >= 0.8
        assert eight >= six - 0.05

    @pytest.mark.slow
    def test_harder_cells_do_worse(self):
        spec = SweepSpec(targets=(1, 5), receivers=(6,), noise_ns=(10.0,), trials=20)
        ratios = [s.success_ratio for s in aggregate(run_sweep(spec, threads=4, progress=False))]
        assert ratios[0] >= ratios[1] - 0.15


class TestSpecFile:
    def test_ranges(self, tmp_path):
        path = tmp_path / "sweep.ini"
        path.write_text("[SWEEP]\ntargets = 1..3\nreceivers = 6,8\nnoise_ns = 0, 1.5\ntrials = 4\nG = 1\nbaseline = true\noff_grid = true\n", encoding="utf-8")
        spec = load_sweep_spec(path)
        assert spec.targets == (1, 2, 3)
        assert spec.receivers == (6, 8)
        assert spec.noise_ns == (0.0, 1.5)
        assert spec.trials == 4 and spec.G == 1 and spec.baseline
        assert spec.off_grid
        assert len(spec.cells()) == 12

    def test_bad_list(self, tmp_path):
        path = tmp_path / "sweep.ini"
        path.write_text("[SWEEP]\ntargets = 1..x\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_sweep_spec(path)

    def test_too_few_receivers(self, tmp_path):
        path = tmp_path / "sweep.ini"
        path.write_text("[SWEEP]\nreceivers = 1\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_sweep_spec(path)

    def test_missing_section(self, tmp_path):
        path = tmp_path / "sweep.ini"
        path.write_text("[OTHER]\nx = 1\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_sweep_spec(path)


def first_unguaranteed_k(spec: SweepSpec) -> int:
    grid = spec.grid()
    receivers = np.random.default_rng(spec.seed).uniform(spec.zone_min, spec.zone_max, size=(spec.receivers[0], 2))
    for K in range(1, 9):
        scene = TdoaScene(receivers=tuple(map(tuple, receivers)), targets=tuple(map(tuple, grid.points[:K])))
        if omp_guarantee_k(build_system(grid, receivers, true_delays(scene), K).A) < K:
            return K
    return 8


@pytest.mark.slow
def test_beats_l1_start():
    layout = SweepSpec(targets=(1,), receivers=(6,), noise_ns=(1.0,))
    K = first_unguaranteed_k(layout)
    spec = SweepSpec(targets=(K,), receivers=(6,), noise_ns=(1.0,), trials=100, baseline=True)
    (summary,) = aggregate(run_sweep(spec, threads=4, progress=False))
    assert summary.success_ratio >= summary.baseline_success_ratio
