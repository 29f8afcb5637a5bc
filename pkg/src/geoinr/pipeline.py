"""Run orchestration: manifests, single training runs, resumable sweeps.

A run is fully described by its manifest (plain-text key=value, sorted);
re-executing a manifest on the same grid reproduces checkpoints and
metrics CSVs byte for byte. Sweeps expand a declared cross-product of
(samples x weight decay x encodings x seeds), key each config by a content
hash, and skip configs whose row file already exists, so an interrupted
sweep resumes without duplicate rows.
"""

from __future__ import annotations

import csv
import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .encoders import make_encoder, parse_encoding_spec
from .fairness import (
    StratifiedReport,
    SweepRow,
    SweepTable,
    stratify,
    write_stratified_csv,
)
from .grids import GridDataset, SampleSet, sample_points
from .siren import (
    TrainConfig,
    TrainHistory,
    SirenModel,
    evaluate,
    fit_siren,
    save_checkpoint,
    siren_init,
)


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def write_manifest(path, entries: dict) -> None:
    """Plain-text key=value, keys sorted; values rendered with repr-exact
    floats so a manifest re-run reproduces the configuration exactly."""
    with open(path, "w") as fh:
        for key in sorted(entries):
            value = entries[key]
            if isinstance(value, float):
                value = f"{value!r}"
            fh.write(f"{key}={value}\n")


def read_manifest(path) -> dict:
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ValueError(f"{path}: malformed manifest line {line!r}")
            entries[key.strip()] = value.strip()
    return entries


# ---------------------------------------------------------------------------
# single runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunPlan:
    """Everything needed to reproduce one training run on a given grid."""

    encoding: str
    n_samples: int
    sampling_mode: str = "grid_uniform"
    seed: int = 0
    init_seed: int | None = None  # None: model init follows the data seed
    hidden_dim: int = 64
    n_layers: int = 2
    omega0: float = 30.0
    learning_rate: float = 1e-4
    batch_size: int = 2048
    max_epochs: int = 500
    weight_decay: float = 0.0
    validation_fraction: float = 0.2
    early_stop_patience: int | None = None
    eval_samples: int = 50000
    eval_seed: int = 9999

    def canonical(self) -> str:
        spec = parse_encoding_spec(self.encoding).to_string()
        fields = [
            ("encoding", spec),
            ("n_samples", self.n_samples),
            ("sampling_mode", self.sampling_mode),
            ("seed", self.seed),
            ("init_seed", self.init_seed),
            ("hidden_dim", self.hidden_dim),
            ("n_layers", self.n_layers),
            ("omega0", f"{self.omega0:g}"),
            ("learning_rate", f"{self.learning_rate:g}"),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("weight_decay", f"{self.weight_decay:g}"),
            ("validation_fraction", f"{self.validation_fraction:g}"),
            ("early_stop_patience", self.early_stop_patience),
            ("eval_samples", self.eval_samples),
            ("eval_seed", self.eval_seed),
        ]
        return ";".join(f"{k}={v}" for k, v in fields)

    def config_id(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


@dataclass
class RunResult:
    plan: RunPlan
    model: SirenModel
    history: TrainHistory
    eval_set: SampleSet
    eval_losses: np.ndarray
    eval_predictions: np.ndarray
    stratified: StratifiedReport | None
    manifest: dict


def _take(samples: SampleSet, sl: slice) -> SampleSet:
    return replace(
        samples,
        lat_deg=samples.lat_deg[sl],
        lon_deg=samples.lon_deg[sl],
        values=samples.values[sl],
        subgroup=None if samples.subgroup is None else samples.subgroup[sl],
        country=None if samples.country is None else samples.country[sl],
        rows=samples.rows[sl],
        cols=samples.cols[sl],
    )


def run_training(
    grid: GridDataset,
    plan: RunPlan,
    out_dir=None,
    extra_manifest: dict | None = None,
) -> RunResult:
    """Sample, encode, train, and evaluate one configuration.

    Training points and the held-out validation set (a further
    validation_fraction * n_samples points) come from a single seeded
    without-replacement draw, so every encoder sees identical data at a
    given seed. Evaluation uses an independent fixed-seed sample so runs
    within a sweep stay comparable.
    """
    n_val = int(round(plan.validation_fraction * plan.n_samples))
    total = plan.n_samples + n_val
    samples = sample_points(grid, total, mode=plan.sampling_mode, seed=plan.seed)
    train = _take(samples, slice(0, plan.n_samples))
    val = _take(samples, slice(plan.n_samples, total))

    encoder = make_encoder(plan.encoding)
    train_X = encoder.transform(train.latlon())
    val_X = encoder.transform(val.latlon()) if len(val) else None

    init_seed = plan.seed if plan.init_seed is None else plan.init_seed
    model = siren_init(
        input_dim=train_X.shape[1],
        hidden_dim=plan.hidden_dim,
        n_layers=plan.n_layers,
        omega0=plan.omega0,
        seed=init_seed,
        task=grid.task,
    )
    config = TrainConfig(
        learning_rate=plan.learning_rate,
        batch_size=plan.batch_size,
        max_epochs=plan.max_epochs,
        weight_decay=plan.weight_decay,
        seed=init_seed,
        validation_fraction=plan.validation_fraction,
        early_stop_patience=plan.early_stop_patience,
    )
    model, history = fit_siren(
        train_X,
        train.values,
        model,
        config,
        val_X=val_X,
        val_y=val.values if len(val) else None,
    )

    n_eval = min(plan.eval_samples, grid.n_cells)
    eval_set = sample_points(grid, n_eval, mode="grid_uniform", seed=plan.eval_seed)
    losses, predictions = evaluate(model, encoder.transform(eval_set.latlon()), eval_set.values)
    stratified = None
    if eval_set.subgroup is not None:
        stratified = stratify(losses, eval_set.subgroup_names(), manifest_ref=plan.config_id())

    manifest = {
        "tool_version": __version__,
        "task": grid.task,
        "dataset.fingerprint": grid.fingerprint(),
        "dataset.resolution_deg": f"{grid.resolution_deg!r}",
        "encoding": parse_encoding_spec(plan.encoding).to_string(),
        "encoding.fingerprint": parse_encoding_spec(plan.encoding).fingerprint(),
        "sampling.mode": plan.sampling_mode,
        "sampling.n_samples": plan.n_samples,
        "sampling.n_validation": n_val,
        "sampling.seed": plan.seed,
        "model.init_seed": plan.init_seed,
        "eval.samples": n_eval,
        "eval.seed": plan.eval_seed,
        "model.hidden_dim": plan.hidden_dim,
        "model.n_layers": plan.n_layers,
        "model.omega0": f"{plan.omega0!r}",
        "train.learning_rate": f"{plan.learning_rate!r}",
        "train.batch_size": plan.batch_size,
        "train.max_epochs": plan.max_epochs,
        "train.weight_decay": f"{plan.weight_decay!r}",
        "train.validation_fraction": f"{plan.validation_fraction!r}",
        "train.early_stop_patience": plan.early_stop_patience,
        "run.config_id": plan.config_id(),
    }
    if extra_manifest:
        manifest.update(extra_manifest)

    result = RunResult(
        plan=plan,
        model=model,
        history=history,
        eval_set=eval_set,
        eval_losses=losses,
        eval_predictions=predictions,
        stratified=stratified,
        manifest=manifest,
    )
    if out_dir is not None:
        write_run_artifacts(result, out_dir)
    return result


def write_run_artifacts(result: RunResult, out_dir) -> list[str]:
    """checkpoint.bin, history.csv, eval.csv, stratified.csv, manifest.txt.

    history.csv deliberately omits wall time so re-runs are byte-identical.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "checkpoint.bin")
    spec_fp = result.manifest.get("encoding.fingerprint", "")
    save_checkpoint(path, result.model, spec_fp)
    written.append(path)

    path = os.path.join(out_dir, "history.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tr, vl) in enumerate(zip(result.history.train_loss, result.history.val_loss)):
            writer.writerow([i, f"{tr:.17g}", f"{vl:.17g}"])
    written.append(path)

    path = os.path.join(out_dir, "eval.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["lat_deg", "lon_deg", "target", "prediction", "loss"]
        has_subgroup = result.eval_set.subgroup is not None
        has_country = result.eval_set.country is not None
        if has_subgroup:
            header.append("subgroup")
        if has_country:
            header.append("country")
        writer.writerow(header)
        names = result.eval_set.subgroup_names() if has_subgroup else None
        for i in range(len(result.eval_set)):
            row = [
                f"{result.eval_set.lat_deg[i]:.9g}",
                f"{result.eval_set.lon_deg[i]:.9g}",
                f"{result.eval_set.values[i]:.9g}",
                f"{result.eval_predictions[i]:.17g}",
                f"{result.eval_losses[i]:.17g}",
            ]
            if has_subgroup:
                row.append(names[i])
            if has_country:
                row.append(str(result.eval_set.country[i]))
            writer.writerow(row)
    written.append(path)

    if result.stratified is not None:
        path = os.path.join(out_dir, "stratified.csv")
        write_stratified_csv(result.stratified, path)
        written.append(path)

    path = os.path.join(out_dir, "manifest.txt")
    write_manifest(path, result.manifest)
    written.append(path)
    return written


def plan_from_manifest(entries: dict) -> RunPlan:
    """Rebuild the run plan recorded by :func:`run_training`."""

    def opt_int(key):
        raw = entries.get(key, "None")
        return None if raw in ("None", "") else int(raw)

    return RunPlan(
        encoding=entries["encoding"],
        n_samples=int(entries["sampling.n_samples"]),
        sampling_mode=entries["sampling.mode"],
        seed=int(entries["sampling.seed"]),
        init_seed=opt_int("model.init_seed"),
        hidden_dim=int(entries["model.hidden_dim"]),
        n_layers=int(entries["model.n_layers"]),
        omega0=float(entries["model.omega0"]),
        learning_rate=float(entries["train.learning_rate"]),
        batch_size=int(entries["train.batch_size"]),
        max_epochs=int(entries["train.max_epochs"]),
        weight_decay=float(entries["train.weight_decay"]),
        validation_fraction=float(entries["train.validation_fraction"]),
        early_stop_patience=opt_int("train.early_stop_patience"),
        eval_samples=int(entries["eval.samples"]),
        eval_seed=int(entries["eval.seed"]),
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepPlan:
    """Declared cross-product: samples x weight decay x encodings x seeds."""

    samples: list
    weight_decays: list
    encodings: list
    seeds: list
    base: RunPlan = field(
        default_factory=lambda: RunPlan(encoding="sh:L=20", n_samples=10000)
    )

    def expand(self) -> list[RunPlan]:
        plans = []
        for n in self.samples:
            for wd in self.weight_decays:
                for enc in self.encodings:
                    for seed in self.seeds:
                        plans.append(
                            replace(
                                self.base,
                                encoding=enc,
                                n_samples=int(n),
                                weight_decay=float(wd),
                                seed=int(seed),
                            )
                        )
        return plans


_SWEEP_COLUMNS = [
    "config_id",
    "encoder",
    "training_samples",
    "weight_decay",
    "seed",
    "loss_total",
    "loss_land",
    "loss_sea",
    "loss_coastline",
    "loss_island",
]


def _row_from_result(result: RunResult) -> dict:
    rep = result.stratified
    row = {
        "config_id": result.plan.config_id(),
        "encoder": parse_encoding_spec(result.plan.encoding).to_string(),
        "training_samples": result.plan.n_samples,
        "weight_decay": f"{result.plan.weight_decay:g}",
        "seed": result.plan.seed,
        "loss_total": f"{float(np.mean(result.eval_losses)):.17g}",
    }
    for name in ("land", "sea", "coastline", "island"):
        if rep is not None and name in rep.groups:
            row[f"loss_{name}"] = f"{rep.groups[name].mean:.17g}"
        else:
            row[f"loss_{name}"] = ""
    return row


def _execute_sweep_run(grid: GridDataset, plan: RunPlan, run_dir: str) -> dict:
    result = run_training(grid, plan, out_dir=run_dir)
    row = _row_from_result(result)
    row_path = os.path.join(run_dir, "row.csv")
    with open(row_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerow(row)
    return row


def _read_row(run_dir: str) -> dict:
    with open(os.path.join(run_dir, "row.csv"), newline="") as fh:
        return next(csv.DictReader(fh))


def run_sweep(
    grid: GridDataset, sweep: SweepPlan, out_dir, workers: int = 1
) -> tuple[SweepTable, list[tuple[str, str]]]:
    """Execute (or resume) a sweep; aggregate ``sweep.csv``.

    Completed configs (an existing row.csv under runs/<config_id>) are
    skipped. Individual run failures are recorded under failures.csv and
    the sweep continues. Returns the aggregated table and failures.
    """
    os.makedirs(out_dir, exist_ok=True)
    runs_root = os.path.join(out_dir, "runs")
    os.makedirs(runs_root, exist_ok=True)
    plans = sweep.expand()

    pending = []
    for plan in plans:
        run_dir = os.path.join(runs_root, plan.config_id())
        if not os.path.exists(os.path.join(run_dir, "row.csv")):
            pending.append((plan, run_dir))

    failures: list[tuple[str, str]] = []
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_execute_sweep_run, grid, plan, run_dir): plan
                for plan, run_dir in pending
            }
            for future, plan in futures.items():
                try:
                    future.result()
                except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
                    failures.append((plan.config_id(), repr(exc)))
    else:
        for plan, run_dir in pending:
            try:
                _execute_sweep_run(grid, plan, run_dir)
            except Exception as exc:  # noqa: BLE001
                failures.append((plan.config_id(), repr(exc)))

    rows = []
    for plan in plans:
        run_dir = os.path.join(runs_root, plan.config_id())
        if os.path.exists(os.path.join(run_dir, "row.csv")):
            rows.append(_read_row(run_dir))
    rows.sort(key=lambda r: r["config_id"])

    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    if failures:
        with open(os.path.join(out_dir, "failures.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config_id", "error"])
            writer.writerows(failures)

    return sweep_table_from_rows(rows), failures


def sweep_table_from_rows(rows) -> SweepTable:
    out = []
    for row in rows:
        losses = []
        for name in ("land", "sea", "coastline", "island"):
            raw = row.get(f"loss_{name}", "")
            if raw:
                losses.append((name, float(raw)))
        losses.append(("total", float(row["loss_total"])))
        out.append(
            SweepRow(
                config_id=row["config_id"],
                training_samples=int(row["training_samples"]),
                encoder=row["encoder"],
                hyperparameters=(("weight_decay", float(row["weight_decay"])),),
                subgroup_losses=tuple(sorted(losses)),
                seed=int(row["seed"]),
            )
        )
    return SweepTable(rows=out)


def read_sweep_csv(path) -> SweepTable:
    with open(path, newline="") as fh:
        return sweep_table_from_rows(list(csv.DictReader(fh)))


def filter_table(table: SweepTable, encoder: str) -> SweepTable:
    return SweepTable(rows=[r for r in table.rows if r.encoder == encoder])
