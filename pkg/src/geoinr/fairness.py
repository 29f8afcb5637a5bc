"""Subgroup-stratified metrics and cross-run correlation analysis.

All operations are pure aggregations over immutable inputs, exact up to
floating-point associativity, and order-invariant where the contract says
so. CSV writers pin the fixed report schemas:

* ``stratified.csv``  - subgroup,count,mean,std
* ``correlation.csv`` - stratum,group_a,group_b,r,n
* ``countries.csv``   - country,count,mean
* ``error_grid.csv``  - lat_bin,lon_bin,mean,count
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation is requested for degenerate inputs."""


@dataclass(frozen=True)
class GroupStats:
    count: int
    mean: float
    std: float


@dataclass
class StratifiedReport:
    """Per-subgroup loss statistics. Groups with zero points are absent,
    never reported as zero loss. Standard deviations are population (ddof=0)."""

    groups: dict
    total: GroupStats
    manifest_ref: str = ""

    def group_names(self) -> list[str]:
        return sorted(self.groups)

    def to_rows(self) -> list[tuple]:
        rows = [
            (name, self.groups[name].count, self.groups[name].mean, self.groups[name].std)
            for name in self.group_names()
        ]
        rows.append(("total", self.total.count, self.total.mean, self.total.std))
        return rows


def stratify(losses, labels, manifest_ref: str = "") -> StratifiedReport:
    """Group per-point losses by subgroup label; count/mean/std per group."""
    losses = np.asarray(losses, dtype=float)
    labels = np.asarray(labels)
    if losses.size == 0:
        raise ValueError("cannot stratify an empty loss set")
    if losses.shape != labels.shape:
        raise ValueError("losses and labels must have equal length")
    groups = {}
    for name in np.unique(labels):
        sel = losses[labels == name]
        groups[str(name)] = GroupStats(int(sel.size), float(sel.mean()), float(sel.std()))
    total = GroupStats(int(losses.size), float(losses.mean()), float(losses.std()))
    return StratifiedReport(groups=groups, total=total, manifest_ref=manifest_ref)


def pearson(xs, ys) -> float:
    """Sample Pearson correlation; raises on n < 2 or zero variance."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("inputs must be 1-d and of equal length")
    if xs.size < 2:
        raise UndefinedCorrelationError(f"need at least 2 points, got {xs.size}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for zero-variance input")
    r = float(np.sum(dx * dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class SweepRow:
    """One completed training run in a sweep."""

    config_id: str
    training_samples: int
    encoder: str
    hyperparameters: tuple  # sorted (key, value) pairs
    subgroup_losses: tuple  # sorted (subgroup, mean loss) pairs
    seed: int

    def hyperparameter(self, key: str):
        for k, v in self.hyperparameters:
            if k == key:
                return v
        raise KeyError(key)

    def subgroup_loss(self, name: str) -> float:
        for k, v in self.subgroup_losses:
            if k == name:
                return float(v)
        raise KeyError(name)

    def has_subgroup(self, name: str) -> bool:
        return any(k == name for k, _ in self.subgroup_losses)


@dataclass
class SweepTable:
    """Rows from one or many runs; ordering is stable by config id."""

    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.config_id)

    def add(self, row: SweepRow) -> None:
        self.rows.append(row)
        self.rows.sort(key=lambda r: r.config_id)

    def encoders(self) -> list[str]:
        return sorted({r.encoder for r in self.rows})


@dataclass(frozen=True)
class CorrelationRow:
    stratum: object
    group_a: str
    group_b: str
    r: float
    n_runs: int


def sweep_correlation(
    table: SweepTable,
    group_a: str = "land",
    group_b: str = "island",
    stratify_by: str = "training_samples",
) -> list[CorrelationRow]:
    """Correlation between two subgroups' mean losses across runs, per
    stratum. Strata with fewer than 2 usable runs are skipped with a
    warning, as are zero-variance strata."""
    strata: dict = {}
    for row in table.rows:
        if stratify_by == "training_samples":
            key = row.training_samples
        elif stratify_by == "encoder":
            key = row.encoder
        elif stratify_by == "seed":
            key = row.seed
        else:
            key = row.hyperparameter(stratify_by)
        if not (row.has_subgroup(group_a) and row.has_subgroup(group_b)):
            continue
        strata.setdefault(key, []).append(
            (row.subgroup_loss(group_a), row.subgroup_loss(group_b))
        )
    out = []
    for key in sorted(strata):
        pairs = strata[key]
        if len(pairs) < 2:
            warnings.warn(
                f"stratum {key!r} has {len(pairs)} run(s); need >= 2 for a correlation",
                stacklevel=2,
            )
            continue
        a = [p[0] for p in pairs]
        b = [p[1] for p in pairs]
        try:
            r = pearson(a, b)
        except UndefinedCorrelationError as exc:
            warnings.warn(f"stratum {key!r} skipped: {exc}", stacklevel=2)
            continue
        out.append(CorrelationRow(key, group_a, group_b, r, len(pairs)))
    return out


@dataclass(frozen=True)
class CountryExtremes:
    best: str | None
    worst: str | None
    best_mean: float
    worst_mean: float
    qualifying: int


def country_extremes(losses, countries, min_points: int = 100) -> CountryExtremes:
    """Best (lowest mean loss) and worst countries among those with at
    least ``min_points`` evaluated points. Ties break toward the
    lexicographically smaller country code. Empty labels are ignored."""
    losses = np.asarray(losses, dtype=float)
    countries = np.asarray(countries)
    if losses.shape != countries.shape:
        raise ValueError("losses and country labels must have equal length")
    stats = []
    for code in np.unique(countries):
        name = str(code)
        if not name:
            continue
        sel = losses[countries == code]
        if sel.size >= min_points:
            # sorted summation makes the result exactly permutation-invariant
            stats.append((name, float(np.sort(sel).sum() / sel.size), int(sel.size)))
    if not stats:
        warnings.warn(f"no country has >= {min_points} points; empty result", stacklevel=2)
        return CountryExtremes(None, None, math.nan, math.nan, 0)
    best = min(stats, key=lambda s: (s[1], s[0]))
    worst = min(stats, key=lambda s: (-s[1], s[0]))
    return CountryExtremes(best[0], worst[0], best[1], worst[1], len(stats))


@dataclass
class BinnedErrorGrid:
    """Mean per-point loss on a coarse lat/lon raster; NaN marks empty bins."""

    bin_deg: float
    mean: np.ndarray
    count: np.ndarray

    def lat_bin_centers(self) -> np.ndarray:
        return 90.0 - self.bin_deg / 2.0 - self.bin_deg * np.arange(self.mean.shape[0])

    def lon_bin_centers(self) -> np.ndarray:
        return -180.0 + self.bin_deg / 2.0 + self.bin_deg * np.arange(self.mean.shape[1])


def binned_error_grid(losses, lat_deg, lon_deg, bin_deg: float) -> BinnedErrorGrid:
    """Aggregate per-point losses into bin_deg x bin_deg cells.

    ``bin_deg`` must divide 180. Bin counts sum to the number of points.
    """
    if not (bin_deg > 0) or abs(180.0 / bin_deg - round(180.0 / bin_deg)) > 1e-9:
        raise ValueError(f"bin size must divide 180 degrees, got {bin_deg!r}")
    losses = np.asarray(losses, dtype=float)
    lat = np.asarray(lat_deg, dtype=float)
    lon = np.asarray(lon_deg, dtype=float)
    if not (losses.shape == lat.shape == lon.shape):
        raise ValueError("losses and coordinates must have equal length")
    n_lat = round(180.0 / bin_deg)
    n_lon = round(360.0 / bin_deg)
    i = np.clip(np.floor((90.0 - lat) / bin_deg).astype(int), 0, n_lat - 1)
    j = np.clip(np.floor((lon + 180.0) / bin_deg).astype(int), 0, n_lon - 1)
    flat = i * n_lon + j
    count = np.bincount(flat, minlength=n_lat * n_lon)
    total = np.bincount(flat, weights=losses, minlength=n_lat * n_lon)
    with np.errstate(invalid="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return BinnedErrorGrid(
        bin_deg=float(bin_deg),
        mean=mean.reshape(n_lat, n_lon),
        count=count.reshape(n_lat, n_lon),
    )


# ---------------------------------------------------------------------------
# fixed-schema CSV writers
# ---------------------------------------------------------------------------


def write_stratified_csv(report: StratifiedReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subgroup", "count", "mean", "std"])
        for name, count, mean, std in report.to_rows():
            writer.writerow([name, count, f"{mean:.17g}", f"{std:.17g}"])


def write_correlation_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stratum", "group_a", "group_b", "r", "n"])
        for row in rows:
            writer.writerow([row.stratum, row.group_a, row.group_b, f"{row.r:.17g}", row.n_runs])


def write_countries_csv(losses, countries, path, min_points: int = 100) -> None:
    losses = np.asarray(losses, dtype=float)
    countries = np.asarray(countries)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "count", "mean"])
        for code in np.unique(countries):
            name = str(code)
            if not name:
                continue
            sel = losses[countries == code]
            if sel.size >= min_points:
                writer.writerow([name, sel.size, f"{float(sel.mean()):.17g}"])


def write_error_grid_csv(grid: BinnedErrorGrid, path) -> None:
    lats = grid.lat_bin_centers()
    lons = grid.lon_bin_centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lat_bin", "lon_bin", "mean", "count"])
        for i in range(grid.mean.shape[0]):
            for j in range(grid.mean.shape[1]):
                if grid.count[i, j] > 0:
                    writer.writerow(
                        [f"{lats[i]:g}", f"{lons[j]:g}",
                         f"{grid.mean[i, j]:.17g}", int(grid.count[i, j])]
                    )
