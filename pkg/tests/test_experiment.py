"""Benchmark harness tests at a reduced chain size."""

import json
import os

import numpy as np
import pytest

from qcadapt.experiment import (
    CSV_COLUMNS,
    STRATEGIES,
    ExperimentConfig,
    fit_slope,
    run_experiment,
    summary_dict,
    write_csv,
    write_summary,
)


@pytest.fixture(scope="module")
def small_result():
    config = ExperimentConfig(n_half=150, max_dof=70)
    return config, run_experiment(config)


class TestFitSlope:
    def test_exact_power_law(self):
        dofs = np.array([10, 20, 40, 80, 160])
        values = 3.0 * dofs.astype(float) ** -1.5
        assert fit_slope(dofs, values) == pytest.approx(-1.5, abs=1e-12)

    def test_last_decade_only(self):
        dofs = [1, 2, 400, 800]
        values = [1e9, 1e9, 1e-2, 5e-3]
        slope = fit_slope(dofs, values)
        assert slope == pytest.approx(np.log(2.0) / np.log(0.5), abs=1e-12)

    def test_degenerate_inputs(self):
        assert np.isnan(fit_slope([], []))
        assert np.isnan(fit_slope([10], [1.0]))
        assert np.isnan(fit_slope([10, 20], [0.0, -1.0]))


class TestRunExperiment:
    def test_all_strategies_present(self, small_result):
        config, result = small_result
        assert set(result.strategies) == set(STRATEGIES)
        for name in STRATEGIES:
            sr = result.strategies[name]
            assert sr.records, name
            for rec in sr.records:
                assert rec.strategy == name
                assert rec.dof < config.max_dof
                assert rec.rel_grad_error > 0.0
                assert rec.grad_bound >= rec.rel_grad_error
                assert rec.energy_bound >= rec.rel_energy_error
            dofs = [r.dof for r in sr.records]
            assert dofs == sorted(dofs)

    def test_bound_violation_counter(self, small_result):
        _, result = small_result
        for sr in result.strategies.values():
            assert sr.bound_violations == 0

    def test_reference_denominators_positive(self, small_result):
        _, result = small_result
        assert result.grad_denominator > 0.0
        assert result.energy_denominator > 0.0

    def test_strategy_subset(self):
        config = ExperimentConfig(n_half=100, max_dof=40)
        result = run_experiment(config, strategies=("adaptive_gradient",))
        assert list(result.strategies) == ["adaptive_gradient"]

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError):
            run_experiment(ExperimentConfig(n_half=100), strategies=("bogus",))

    def test_parallel_matches_serial(self):
        config = ExperimentConfig(n_half=100, max_dof=50)
        serial = run_experiment(config, max_workers=1)
        parallel = run_experiment(config, max_workers=3)
        for name in STRATEGIES:
            a = serial.strategies[name].records
            b = parallel.strategies[name].records
            assert [r.dof for r in a] == [r.dof for r in b]
            assert [r.rel_grad_error for r in a] == [r.rel_grad_error for r in b]


class TestOutputs:
    def test_csv_columns_and_rows(self, small_result, tmp_path):
        _, result = small_result
        paths = write_csv(result, tmp_path)
        assert [os.path.basename(p) for p in paths] == [
            f"{name}.csv" for name in STRATEGIES
        ]
        for name, path in zip(STRATEGIES, paths):
            lines = open(path).read().splitlines()
            assert lines[0] == ",".join(CSV_COLUMNS)
            assert len(lines) == 1 + len(result.strategies[name].records)
            first = lines[1].split(",")
            assert first[0] == name
            assert int(first[1]) == result.strategies[name].records[0].dof

    def test_csv_rerun_byte_identical(self, tmp_path):
        config = ExperimentConfig(n_half=100, max_dof=50)
        blobs = []
        for tag in ("one", "two"):
            out = tmp_path / tag
            write_csv(run_experiment(config), out)
            blobs.append(
                {name: (out / f"{name}.csv").read_bytes() for name in STRATEGIES}
            )
        assert blobs[0] == blobs[1]

    def test_summary_schema(self, small_result, tmp_path):
        config, result = small_result
        path = write_summary(result, tmp_path)
        back = json.loads(open(path).read())
        assert back["config"]["n_half"] == config.n_half
        assert set(back["strategies"]) == set(STRATEGIES)
        for block in back["strategies"].values():
            for key in (
                "status",
                "records",
                "final_dof",
                "grad_slope",
                "energy_slope",
                "bound_violations",
                "wall_time_ms",
            ):
                assert key in block
        assert back["reference"]["grad_denominator"] > 0.0

    def test_summary_matches_result(self, small_result):
        _, result = small_result
        summary = summary_dict(result)
        for name in STRATEGIES:
            block = summary["strategies"][name]
            sr = result.strategies[name]
            assert block["records"] == len(sr.records)
            assert block["final_dof"] == sr.records[-1].dof
