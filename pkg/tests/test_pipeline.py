import csv
import hashlib
import os

import pytest

from geoinr.grids import generate_archipelago
from geoinr.pipeline import (
    RunPlan,
    SweepPlan,
    filter_table,
    plan_from_manifest,
    read_manifest,
    read_sweep_csv,
    run_sweep,
    run_training,
    write_manifest,
)


@pytest.fixture(scope="module")
def grid():
    return generate_archipelago(
        n_continents=1,
        n_islands=5,
        island_radius_deg=(2.5, 4.0),
        resolution_deg=2.0,
        seed=13,
    )


def tiny_plan(**overrides):
    base = dict(
        encoding="sh:L=4",
        n_samples=500,
        seed=0,
        hidden_dim=12,
        n_layers=1,
        max_epochs=5,
        learning_rate=1e-3,
        batch_size=256,
        eval_samples=1500,
    )
    base.update(overrides)
    return RunPlan(**base)


class TestManifest:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "manifest.txt"
        entries = {"a": 1, "b.c": "text", "lr": 0.0001}
        write_manifest(path, entries)
        back = read_manifest(path)
        assert back["a"] == "1"
        assert back["b.c"] == "text"
        assert float(back["lr"]) == 0.0001

    def test_plan_survives_manifest(self, grid, tmp_path):
        plan = tiny_plan(weight_decay=1e-4, early_stop_patience=None)
        result = run_training(grid, plan, out_dir=tmp_path)
        entries = read_manifest(tmp_path / "manifest.txt")
        assert plan_from_manifest(entries) == plan


class TestRunTraining:
    def test_validation_extends_sample(self, grid):
        plan = tiny_plan(n_samples=500)
        result = run_training(grid, plan)
        assert int(result.manifest["sampling.n_validation"]) == 100

    def test_deterministic_checkpoint(self, grid, tmp_path):
        a = run_training(grid, tiny_plan(), out_dir=tmp_path / "a")
        b = run_training(grid, tiny_plan(), out_dir=tmp_path / "b")
        assert a.model.fingerprint() == b.model.fingerprint()
        ha = hashlib.sha256((tmp_path / "a" / "checkpoint.bin").read_bytes()).hexdigest()
        hb = hashlib.sha256((tmp_path / "b" / "checkpoint.bin").read_bytes()).hexdigest()
        assert ha == hb

    def test_stratified_written_with_subgroups(self, grid, tmp_path):
        run_training(grid, tiny_plan(), out_dir=tmp_path)
        with open(tmp_path / "stratified.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        names = {r["subgroup"] for r in rows}
        assert "total" in names and "sea" in names

    def test_eval_sample_capped_at_grid(self, grid):
        plan = tiny_plan(eval_samples=10**9)
        result = run_training(grid, plan)
        assert len(result.eval_set) == grid.n_cells


class TestSweep:
    def _sweep(self):
        return SweepPlan(
            samples=[400, 700],
            weight_decays=[1e-4, 1e-3],
            encodings=["sh:L=3", "sw:N=8,M=2,Q=2,k=6"],
            seeds=[0, 1],
            base=tiny_plan(),
        )

    def test_expand_combinatorics(self):
        assert len(self._sweep().expand()) == 2 * 2 * 2 * 2

    def test_rows_and_resume(self, grid, tmp_path):
        out = tmp_path / "sweep"
        table, failures = run_sweep(grid, self._sweep(), out)
        assert not failures
        assert len(table.rows) == 16
        first = (out / "sweep.csv").read_bytes()
        # delete one run artifact: resume recomputes only that one
        victim = table.rows[0].config_id
        os.remove(out / "runs" / victim / "row.csv")
        table2, failures2 = run_sweep(grid, self._sweep(), out)
        assert not failures2
        assert len(table2.rows) == 16
        assert (out / "sweep.csv").read_bytes() == first

    def test_table_round_trip_and_filter(self, grid, tmp_path):
        out = tmp_path / "sweep2"
        table, _ = run_sweep(grid, self._sweep(), out)
        back = read_sweep_csv(out / "sweep.csv")
        assert [r.config_id for r in back.rows] == [r.config_id for r in table.rows]
        sh_only = filter_table(back, "sh:L=3")
        assert all(r.encoder == "sh:L=3" for r in sh_only.rows)
        assert len(sh_only.rows) == 8

    def test_failures_recorded_and_sweep_continues(self, grid, tmp_path):
        bad = SweepPlan(
            samples=[400, 10**9],  # second stratum cannot be sampled
            weight_decays=[1e-4],
            encodings=["sh:L=3"],
            seeds=[0],
            base=tiny_plan(),
        )
        out = tmp_path / "sweep3"
        table, failures = run_sweep(grid, bad, out)
        assert len(table.rows) == 1
        assert len(failures) == 1
        assert (out / "failures.csv").exists()
