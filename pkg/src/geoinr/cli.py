"""Command-line surface: synth, train, sweep, report, bench, encode.

Every artifact-producing command writes a manifest sufficient to
reproduce the run bit-exactly; ``train --from-manifest`` re-executes one.
The worker pool for sweeps is capped by the GEOINR_THREADS environment
variable. Exit code is 0 exactly when all requested outputs were written.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .encoders import encoding_benchmark, make_encoder, parse_encoding_spec
from .fairness import (
    binned_error_grid,
    country_extremes,
    stratify,
    sweep_correlation,
    write_correlation_csv,
    write_countries_csv,
    write_error_grid_csv,
    write_stratified_csv,
)
from .grids import (
    ISLAND_MAX_KM2,
    SUBGROUP_CODES,
    generate_archipelago,
    generate_checkerboard,
    read_grid,
    write_grid,
)
from .pipeline import (
    RunPlan,
    SweepPlan,
    filter_table,
    plan_from_manifest,
    read_manifest,
    read_sweep_csv,
    run_sweep,
    run_training,
    write_manifest,
    write_run_artifacts,
)

# benchmark rows from the reference timing table: size -> (sh degree bound,
# wavelet rotations, wavelet dilations)
BENCH_SIZES = {
    25: (4, 25, 1),
    100: (9, 25, 4),
    625: (24, 125, 5),
    900: (29, 150, 6),
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"geoinr: error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoinr",
        description="Location encodings and INRs for Earth signals, with "
        "subgroup-stratified evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"geoinr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic grid")
    p.add_argument("kind", choices=["checkerboard", "archipelago"])
    p.add_argument("--out", required=True, help="output grid path (.csv or binary)")
    p.add_argument("--resolution", type=float, default=None, help="grid resolution in degrees")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cell-deg", type=float, default=15.0, help="checkerboard cell size")
    p.add_argument("--continents", type=int, default=3)
    p.add_argument("--islands", type=int, default=40)
    p.add_argument("--island-radius", type=float, nargs=2, default=(0.3, 2.0),
                   metavar=("MIN", "MAX"))
    p.add_argument("--island-max-km2", type=float, default=ISLAND_MAX_KM2)
    p.add_argument("--coast-band-km", type=float, default=100.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on a grid")
    p.add_argument("--grid", help="grid file to train on")
    p.add_argument("--encoding", default="sh:L=20", help="encoder spec string")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--sampling", choices=["grid_uniform", "area_weighted"],
                   default="grid_uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--omega0", type=float, default=30.0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--validation-fraction", type=float, default=0.2)
    p.add_argument("--early-stop-patience", type=int, default=None)
    p.add_argument("--eval-samples", type=int, default=50000)
    p.add_argument("--eval-seed", type=int, default=9999)
    p.add_argument("--from-manifest", help="re-execute a recorded manifest")
    p.add_argument("--out", required=True, help="output run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a hyperparameter cross-product")
    p.add_argument("--grid", required=True)
    p.add_argument("--config", required=True, help="sweep config file (ini key=value)")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="fairness reports for a run or sweep directory")
    p.add_argument("target", help="run directory (with eval.csv) or sweep directory")
    p.add_argument("--out", default=None, help="output directory (default: target)")
    p.add_argument("--bin-deg", type=float, default=None, help="emit a binned error grid")
    p.add_argument("--min-points", type=int, default=100, help="country report threshold")
    p.add_argument("--group-a", default="land")
    p.add_argument("--group-b", default="island")
    p.add_argument("--loss-scale", type=float, default=1.0,
                   help="display factor applied to reported losses (recorded in "
                   "report_meta.txt; stored metrics stay unscaled)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="encoding generation timing table")
    p.add_argument("--sizes", type=int, nargs="+", default=sorted(BENCH_SIZES))
    p.add_argument("--points", type=int, default=200, help="points encoded per repetition")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--out", default=None, help="optional CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("encode", help="stream lat,lon rows to encoding CSV")
    p.add_argument("--encoding", required=True)
    p.add_argument("--input", default="-", help="CSV of lat_deg,lon_deg ('-' for stdin)")
    p.add_argument("--output", default="-", help="output CSV ('-' for stdout)")
    p.set_defaults(func=cmd_encode)

    return parser


def _print_grid_summary(grid) -> None:
    print(f"cells: {grid.n_lat} x {grid.n_lon} = {grid.n_cells} at {grid.resolution_deg} deg")
    if grid.subgroup is not None:
        counts = np.bincount(grid.subgroup.ravel(), minlength=4)
        for name, code in sorted(SUBGROUP_CODES.items()):
            print(f"  {name}: {int(counts[code])}")
    land = int(grid.values.sum()) if grid.task == "binary_classification" else None
    if land is not None:
        print(f"  land fraction: {land / grid.n_cells:.4f}")


def cmd_synth(args) -> int:
    entries = {
        "tool_version": __version__,
        "synth.kind": args.kind,
        "synth.seed": args.seed,
        "output.path": os.path.abspath(args.out),
    }
    if args.kind == "checkerboard":
        resolution = args.resolution if args.resolution is not None else 1.0
        grid = generate_checkerboard(args.cell_deg, resolution_deg=resolution, seed=args.seed)
        entries["synth.cell_deg"] = f"{args.cell_deg!r}"
    else:
        resolution = args.resolution if args.resolution is not None else 0.5
        grid = generate_archipelago(
            n_continents=args.continents,
            n_islands=args.islands,
            island_radius_deg=tuple(args.island_radius),
            resolution_deg=resolution,
            seed=args.seed,
            island_max_km2=args.island_max_km2,
            coast_band_km=args.coast_band_km,
        )
        entries.update(
            {
                "synth.continents": args.continents,
                "synth.islands": args.islands,
                "synth.island_radius_deg": f"{tuple(args.island_radius)}",
                "subgroups.island_max_km2": f"{args.island_max_km2!r}",
                "subgroups.coast_band_km": f"{args.coast_band_km!r}",
            }
        )
    entries["synth.resolution_deg"] = f"{resolution!r}"
    write_grid(grid, args.out)
    entries["dataset.fingerprint"] = grid.fingerprint()
    write_manifest(str(args.out) + ".manifest.txt", entries)
    _print_grid_summary(grid)
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    if args.from_manifest:
        entries = read_manifest(args.from_manifest)
        plan = plan_from_manifest(entries)
        grid_path = args.grid or entries.get("dataset.path")
        if not grid_path:
            raise ValueError("manifest lacks dataset.path; pass --grid explicitly")
        grid = read_grid(grid_path)
        recorded = entries.get("dataset.fingerprint")
        if recorded and recorded != grid.fingerprint():
            raise ValueError(
                f"grid fingerprint mismatch: manifest {recorded[:12]}..., "
                f"file {grid.fingerprint()[:12]}..."
            )
    else:
        if not args.grid:
            raise ValueError("--grid is required (unless --from-manifest supplies it)")
        grid_path = args.grid
        grid = read_grid(grid_path)
        plan = RunPlan(
            encoding=args.encoding,
            n_samples=args.samples,
            sampling_mode=args.sampling,
            seed=args.seed,
            hidden_dim=args.hidden_dim,
            n_layers=args.layers,
            omega0=args.omega0,
            learning_rate=args.lr,
            batch_size=args.batch_size,
            max_epochs=args.epochs,
            weight_decay=args.weight_decay,
            validation_fraction=args.validation_fraction,
            early_stop_patience=args.early_stop_patience,
            eval_samples=args.eval_samples,
            eval_seed=args.eval_seed,
        )

    os.makedirs(args.out, exist_ok=True)
    written = []
    try:
        result = run_training(
            grid,
            plan,
            out_dir=None,
            extra_manifest={
                "dataset.path": os.path.abspath(grid_path),
                "output.dir": os.path.abspath(args.out),
            },
        )
        written = write_run_artifacts(result, args.out)
    except Exception:
        for name in ("checkpoint.bin", "history.csv", "eval.csv", "stratified.csv",
                     "manifest.txt"):
            path = os.path.join(args.out, name)
            if os.path.exists(path):
                os.remove(path)
        raise
    print(f"trained {plan.encoding} on {grid_path}: "
          f"{result.history.n_epochs} epochs, best epoch {result.history.best_epoch}, "
          f"best val loss {min(result.history.val_loss):.6f}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _parse_list(raw: str, cast):
    return [cast(item.strip()) for item in raw.split(",") if item.strip()]


def _expand_braces(text: str) -> list[str]:
    """Expand {a;b;c} alternation groups combinatorially, so grids like
    sw:N={50;90;130;170},M={3;4;5},Q=6,k=6 declare a whole encoder family."""
    start = text.find("{")
    if start == -1:
        return [text]
    end = text.find("}", start)
    if end == -1:
        raise ValueError(f"unbalanced brace in encoding pattern {text!r}")
    out = []
    for option in text[start + 1 : end].split(";"):
        out.extend(_expand_braces(text[:start] + option.strip() + text[end + 1 :]))
    return out


def load_sweep_config(path) -> SweepPlan:
    """Sweep config: ini sections [sweep], [model], [train], [eval].

    [sweep] declares the cross-product lists; encodings are |-separated
    because spec strings contain commas, and {a;b;c} groups inside one
    encoding expand combinatorially.
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValueError(f"could not read sweep config {path!r}")
    if "sweep" not in cp:
        raise ValueError(f"{path}: missing [sweep] section")
    sw = cp["sweep"]
    samples = _parse_list(sw.get("samples", "10000"), int)
    weight_decays = _parse_list(sw.get("weight_decay", "0"), float)
    seeds = _parse_list(sw.get("seeds", "0"), int)
    encodings = []
    for pattern in sw.get("encodings", "sh:L=20").split("|"):
        if pattern.strip():
            encodings.extend(_expand_braces(pattern.strip()))
    for enc in encodings:
        parse_encoding_spec(enc)

    model = cp["model"] if "model" in cp else {}
    train = cp["train"] if "train" in cp else {}
    ev = cp["eval"] if "eval" in cp else {}
    patience = train.get("early_stop_patience", "")
    base = RunPlan(
        encoding=encodings[0],
        n_samples=samples[0],
        sampling_mode=train.get("sampling", "grid_uniform"),
        hidden_dim=int(model.get("hidden_dim", 64)),
        n_layers=int(model.get("n_layers", 2)),
        omega0=float(model.get("omega0", 30.0)),
        learning_rate=float(train.get("learning_rate", 1e-4)),
        batch_size=int(train.get("batch_size", 2048)),
        max_epochs=int(train.get("max_epochs", 500)),
        validation_fraction=float(train.get("validation_fraction", 0.2)),
        early_stop_patience=int(patience) if patience else None,
        eval_samples=int(ev.get("samples", 50000)),
        eval_seed=int(ev.get("seed", 9999)),
    )
    return SweepPlan(
        samples=samples,
        weight_decays=weight_decays,
        encodings=encodings,
        seeds=seeds,
        base=base,
    )


def cmd_sweep(args) -> int:
    grid = read_grid(args.grid)
    sweep = load_sweep_config(args.config)
    workers = args.workers
    cap = os.environ.get("GEOINR_THREADS")
    if cap:
        workers = max(1, min(workers, int(cap)))
    table, failures = run_sweep(grid, sweep, args.out, workers=workers)
    with open(args.config) as fh:
        config_text = fh.read()
    write_manifest(
        os.path.join(args.out, "sweep_manifest.txt"),
        {
            "tool_version": __version__,
            "dataset.path": os.path.abspath(args.grid),
            "dataset.fingerprint": grid.fingerprint(),
            "sweep.config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
            "sweep.n_configs": len(sweep.expand()),
            "output.dir": os.path.abspath(args.out),
        },
    )
    print(f"sweep complete: {len(table.rows)} rows -> {os.path.join(args.out, 'sweep.csv')}")
    if failures:
        print(f"{len(failures)} run(s) failed; see failures.csv", file=sys.stderr)
        return 1
    return 0


def _read_eval_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no evaluation records")
    lat = np.array([float(r["lat_deg"]) for r in rows])
    lon = np.array([float(r["lon_deg"]) for r in rows])
    losses = np.array([float(r["loss"]) for r in rows])
    subgroup = (
        np.array([r["subgroup"] for r in rows]) if "subgroup" in rows[0] else None
    )
    country = np.array([r["country"] for r in rows]) if "country" in rows[0] else None
    return lat, lon, losses, subgroup, country


def cmd_report(args) -> int:
    out_dir = args.out or args.target
    os.makedirs(out_dir, exist_ok=True)
    wrote_any = False
    report_manifest = {
        "tool_version": __version__,
        "target": os.path.abspath(args.target),
        "options": {
            "bin_deg": args.bin_deg,
            "min_points": args.min_points,
            "group_a": args.group_a,
            "group_b": args.group_b,
            "loss_scale": args.loss_scale,
        },
        "outputs": [],
    }
    run_manifest_path = os.path.join(args.target, "manifest.txt")
    if os.path.exists(run_manifest_path):
        report_manifest["run_manifest"] = read_manifest(run_manifest_path)
    if args.loss_scale != 1.0:
        with open(os.path.join(out_dir, "report_meta.txt"), "w") as fh:
            fh.write(f"loss_scale={args.loss_scale!r}\n")
        print(f"note: reported losses scaled by {args.loss_scale:g} for display")

    def emit(name):
        path = os.path.join(out_dir, name)
        report_manifest["outputs"].append(os.path.abspath(path))
        print(f"wrote {path}")
        return path

    eval_path = os.path.join(args.target, "eval.csv")
    if os.path.exists(eval_path):
        lat, lon, losses, subgroup, country = _read_eval_csv(eval_path)
        losses = losses * args.loss_scale
        if subgroup is not None:
            report = stratify(losses, subgroup)
            write_stratified_csv(report, os.path.join(out_dir, "stratified.csv"))
            emit("stratified.csv")
            wrote_any = True
        if country is not None:
            write_countries_csv(losses, country, os.path.join(out_dir, "countries.csv"),
                                min_points=args.min_points)
            extremes = country_extremes(losses, country, min_points=args.min_points)
            if extremes.best is not None:
                print(f"best country: {extremes.best} ({extremes.best_mean:.6g}); "
                      f"worst: {extremes.worst} ({extremes.worst_mean:.6g})")
            emit("countries.csv")
            wrote_any = True
        if args.bin_deg is not None:
            grid = binned_error_grid(losses, lat, lon, args.bin_deg)
            write_error_grid_csv(grid, os.path.join(out_dir, "error_grid.csv"))
            emit("error_grid.csv")
            wrote_any = True

    sweep_path = os.path.join(args.target, "sweep.csv")
    if os.path.exists(sweep_path):
        table = read_sweep_csv(sweep_path)
        encoders = table.encoders()
        rows = []
        for encoder in encoders:
            sub_rows = sweep_correlation(
                filter_table(table, encoder), group_a=args.group_a, group_b=args.group_b
            )
            for row in sub_rows:
                stratum = row.stratum if len(encoders) == 1 else f"{encoder}|{row.stratum}"
                rows.append(type(row)(stratum, row.group_a, row.group_b, row.r, row.n_runs))
        if rows:
            write_correlation_csv(rows, os.path.join(out_dir, "correlation.csv"))
            emit("correlation.csv")
            wrote_any = True

    if not wrote_any:
        raise ValueError(
            f"{args.target}: nothing to report (no eval.csv with labels, no sweep.csv)"
        )
    with open(os.path.join(out_dir, "report_manifest.json"), "w") as fh:
        json.dump(report_manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    rows_out = [("size", "encoder", "mean_ms", "std_ms")]
    for size in args.sizes:
        if size not in BENCH_SIZES:
            raise ValueError(
                f"unknown benchmark size {size}; known sizes: {sorted(BENCH_SIZES)}"
            )
        lmax, rotations, dilations = BENCH_SIZES[size]
        specs = [
            f"sh:L={lmax}",
            f"sw:N={rotations},M={dilations},Q=6,k=6",
        ]
        for row in encoding_benchmark(specs, n_points=args.points,
                                      repetitions=args.repetitions):
            rows_out.append((size, row.label, f"{row.mean_ms:.3f}", f"{row.std_ms:.3f}"))

    def _emit(fh):
        writer = csv.writer(fh)
        writer.writerows(rows_out)

    if args.out:
        with open(args.out, "w", newline="") as fh:
            _emit(fh)
        write_manifest(
            str(args.out) + ".manifest.txt",
            {
                "tool_version": __version__,
                "bench.sizes": ",".join(str(s) for s in args.sizes),
                "bench.points": args.points,
                "bench.repetitions": args.repetitions,
                "output.path": os.path.abspath(args.out),
            },
        )
        print(f"wrote {args.out}")
    else:
        _emit(sys.stdout)
    return 0


def cmd_encode(args) -> int:
    encoder = make_encoder(args.encoding)
    src = sys.stdin if args.input == "-" else open(args.input, newline="")
    dst = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    try:
        reader = csv.reader(src)
        writer = csv.writer(dst)
        d = encoder.n_features_out
        writer.writerow(["lat_deg", "lon_deg"] + [f"e{i}" for i in range(d)])
        for row in reader:
            if not row or row[0].strip().lower() in ("lat", "lat_deg"):
                continue
            lat, lon = float(row[0]), float(row[1])
            enc = encoder.transform([[lat, lon]])[0]
            writer.writerow([f"{lat:.9g}", f"{lon:.9g}"] + [f"{v:.17g}" for v in enc])
    finally:
        if src is not sys.stdin:
            src.close()
        if dst is not sys.stdout:
            dst.close()
    if args.output != "-":
        write_manifest(
            str(args.output) + ".manifest.txt",
            {
                "tool_version": __version__,
                "encoding": encoder.spec.to_string(),
                "encoding.fingerprint": encoder.spec.fingerprint(),
                "output.path": os.path.abspath(args.output),
            },
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
