import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from geoinr.fairness import (
    SweepRow,
    SweepTable,
    UndefinedCorrelationError,
    binned_error_grid,
    country_extremes,
    pearson,
    stratify,
    sweep_correlation,
    write_correlation_csv,
    write_error_grid_csv,
    write_stratified_csv,
)


class TestStratify:
    def test_single_group(self):
        report = stratify([0.5, 1.5, 1.0], ["land"] * 3)
        assert report.groups["land"].mean == pytest.approx(1.0)
        assert report.total.mean == pytest.approx(1.0)

    def test_two_groups(self):
        report = stratify([0.0, 1.0], ["a", "b"])
        assert report.groups["a"].mean == 0.0
        assert report.groups["b"].mean == 1.0
        assert report.total.mean == 0.5

    def test_counts_sum_to_total(self):
        rng = np.random.default_rng(0)
        losses = rng.random(1000)
        labels = rng.choice(["sea", "land", "island"], size=1000)
        report = stratify(losses, labels)
        assert sum(g.count for g in report.groups.values()) == report.total.count

    def test_empty_group_absent(self):
        report = stratify([1.0, 2.0], ["land", "land"])
        assert "island" not in report.groups

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            stratify([], [])

    def test_matches_brute_force_regrouping(self):
        rng = np.random.default_rng(5)
        losses = rng.random(10_000)
        labels = rng.choice(["a", "b", "c", "d"], size=10_000)
        report = stratify(losses, labels)
        for name in np.unique(labels):
            bucket = [l for l, s in zip(losses, labels) if s == name]
            assert report.groups[str(name)].count == len(bucket)
            assert report.groups[str(name)].mean == pytest.approx(
                sum(bucket) / len(bucket), abs=1e-12
            )

    def test_weighted_recombination(self):
        rng = np.random.default_rng(7)
        losses = rng.random(5000)
        labels = rng.choice(["x", "y", "z"], size=5000)
        report = stratify(losses, labels)
        recombined = sum(g.count * g.mean for g in report.groups.values()) / sum(
            g.count for g in report.groups.values()
        )
        assert recombined == pytest.approx(report.total.mean, abs=1e-12)


class TestPearson:
    def test_perfect_affine(self):
        xs = np.array([1.0, 2.0, 3.0])
        assert pearson(xs, 2.0 * xs + 3.0) == pytest.approx(1.0)

    def test_perfect_negation(self):
        xs = np.array([1.0, 2.0, 3.0])
        assert pearson(xs, -xs) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6)

    def test_zero_variance_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_few_points(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0], [2.0])

    @given(
        xs=st.lists(st.floats(-100.0, 100.0), min_size=3, max_size=30),
        a=st.floats(0.1, 10.0),
        b=st.floats(-5.0, 5.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_scale_shift_invariance(self, xs, a, b):
        xs = np.asarray(xs)
        assume(np.ptp(xs) > 1e-3)  # keep variance visible after the affine map
        rng = np.random.default_rng(0)
        ys = rng.normal(size=len(xs))
        base = pearson(xs, ys)
        assert pearson(a * xs + b, ys) == pytest.approx(base, abs=1e-9)
        assert pearson(-a * xs + b, ys) == pytest.approx(-base, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        xs, ys = rng.normal(size=20), rng.normal(size=20)
        assert pearson(xs, ys) == pytest.approx(pearson(ys, xs), abs=1e-12)


def _row(config_id, samples, encoder, seed, land, island):
    return SweepRow(
        config_id=config_id,
        training_samples=samples,
        encoder=encoder,
        hyperparameters=(("weight_decay", 1e-4),),
        subgroup_losses=(("island", island), ("land", land)),
        seed=seed,
    )


class TestSweepCorrelation:
    def test_constructed_anticorrelation(self):
        rng = np.random.default_rng(2)
        rows = []
        for i in range(8):
            land = float(rng.uniform(0.1, 0.5))
            island = 1.0 - land + float(rng.normal(scale=1e-3))
            rows.append(_row(f"c{i:02d}", 5000, "sh:L=20", i, land, island))
        table = SweepTable(rows=rows)
        out = sweep_correlation(table)
        assert len(out) == 1
        assert out[0].stratum == 5000
        assert out[0].r < -0.99
        assert out[0].n_runs == 8

    def test_single_run_stratum_skipped_with_warning(self):
        table = SweepTable(
            rows=[
                _row("a", 5000, "sh", 0, 0.2, 0.8),
                _row("b", 5000, "sh", 1, 0.3, 0.7),
                _row("c", 10000, "sh", 0, 0.1, 0.9),
            ]
        )
        with pytest.warns(UserWarning, match="stratum"):
            out = sweep_correlation(table)
        assert [row.stratum for row in out] == [5000]

    def test_stable_row_order(self):
        rows = [_row(f"{i}", 5000, "sh", i, 0.1 * i + 0.1, 0.5) for i in range(3)]
        table = SweepTable(rows=list(reversed(rows)))
        assert [r.config_id for r in table.rows] == ["0", "1", "2"]


class TestCountryExtremes:
    def test_single_qualifying_country(self):
        losses = np.concatenate([np.full(150, 0.25), np.full(10, 9.0)])
        countries = np.array(["FI"] * 150 + ["XX"] * 10)
        result = country_extremes(losses, countries, min_points=100)
        assert result.best == result.worst == "FI"
        assert result.qualifying == 1

    def test_below_threshold_never_reported(self):
        losses = np.concatenate([np.full(150, 0.5), np.full(99, 0.0)])
        countries = np.array(["AA"] * 150 + ["ZZ"] * 99)
        result = country_extremes(losses, countries, min_points=100)
        assert result.best == "AA" and result.worst == "AA"

    def test_three_countries_ordered(self):
        losses = np.concatenate([np.full(120, 0.1), np.full(120, 0.2), np.full(120, 0.3)])
        countries = np.array(["AA"] * 120 + ["BB"] * 120 + ["CC"] * 120)
        result = country_extremes(losses, countries, min_points=100)
        assert result.best == "AA" and result.worst == "CC"
        assert result.best_mean == pytest.approx(0.1)
        assert result.worst_mean == pytest.approx(0.3)

    def test_no_qualifying_country_warns(self):
        with pytest.warns(UserWarning, match="no country"):
            result = country_extremes([1.0, 2.0], ["AA", "BB"], min_points=100)
        assert result.best is None and result.qualifying == 0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        losses = rng.random(600)
        countries = rng.choice(["AA", "BB", "CC"], size=600)
        base = country_extremes(losses, countries, min_points=50)
        perm = rng.permutation(600)
        shuffled = country_extremes(losses[perm], countries[perm], min_points=50)
        assert base == shuffled


class TestBinnedErrorGrid:
    def test_single_global_bin_row(self):
        rng = np.random.default_rng(4)
        losses = rng.random(500)
        lat = rng.uniform(-89, 89, 500)
        lon = rng.uniform(-179, 179, 500)
        grid = binned_error_grid(losses, lat, lon, 180.0)
        assert grid.mean.shape == (1, 2)
        total = np.nansum(grid.mean * grid.count) / grid.count.sum()
        assert total == pytest.approx(losses.mean(), abs=1e-12)

    def test_all_mass_in_one_bin(self):
        losses = [1.0, 2.0, 3.0]
        grid = binned_error_grid(losses, [5.0, 5.5, 6.0], [10.0, 10.5, 11.0], 30.0)
        assert int((grid.count > 0).sum()) == 1
        assert np.nanmax(grid.mean) == pytest.approx(2.0)

    def test_counts_conserved(self):
        rng = np.random.default_rng(8)
        n = 10_000
        losses = rng.random(n)
        lat = rng.uniform(-90, 90, n)
        lon = rng.uniform(-180, 180, n)
        grid = binned_error_grid(losses, lat, lon, 10.0)
        assert int(grid.count.sum()) == n

    def test_matches_brute_force_assignment(self):
        rng = np.random.default_rng(9)
        n = 10_000
        losses = rng.random(n)
        lat = rng.uniform(-89.99, 89.99, n)
        lon = rng.uniform(-179.99, 179.99, n)
        grid = binned_error_grid(losses, lat, lon, 10.0)
        sums = {}
        counts = {}
        for l, la, lo in zip(losses, lat, lon):
            key = (int((90.0 - la) // 10.0), int((lo + 180.0) // 10.0))
            sums[key] = sums.get(key, 0.0) + l
            counts[key] = counts.get(key, 0) + 1
        for (i, j), total in sums.items():
            assert grid.mean[i, j] == pytest.approx(total / counts[(i, j)], abs=1e-12)

    def test_invalid_bin(self):
        with pytest.raises(ValueError):
            binned_error_grid([1.0], [0.0], [0.0], 7.0)


class TestCsvWriters:
    def test_stratified_schema(self, tmp_path):
        report = stratify([0.1, 0.2, 0.3], ["a", "a", "b"])
        path = tmp_path / "stratified.csv"
        write_stratified_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "subgroup,count,mean,std"
        assert len(lines) == 4  # a, b, total

    def test_correlation_schema(self, tmp_path):
        rows = sweep_correlation(
            SweepTable(rows=[_row("a", 1000, "sh", 0, 0.1, 0.9), _row("b", 1000, "sh", 1, 0.2, 0.8)])
        )
        path = tmp_path / "correlation.csv"
        write_correlation_csv(rows, path)
        assert path.read_text().splitlines()[0] == "stratum,group_a,group_b,r,n"

    def test_error_grid_schema_skips_empty_bins(self, tmp_path):
        grid = binned_error_grid([1.0], [45.0], [10.0], 90.0)
        path = tmp_path / "error_grid.csv"
        write_error_grid_csv(grid, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "lat_bin,lon_bin,mean,count"
        assert len(lines) == 2
