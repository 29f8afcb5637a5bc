"""Equirectangular grid datasets: file formats, metadata derivation,
sampling, and synthetic generators.

A grid covers the full globe at a fixed resolution; cell centers start at
(+90 - d/2, -180 + d/2) with latitude descending along rows and longitude
ascending along columns. Signal and metadata planes are stored in float32
(files use 32-bit floats), so write/read round-trips are bit-exact.

Subgroup semantics: every cell belongs to exactly one of island,
coastline, land, sea. The island flag wins; otherwise a cell within
``coast_band_km`` of the land-sea boundary is coastline; the rest split
land/sea by the binary mask. Islands are landmasses smaller than
``ISLAND_MAX_KM2`` (30,000 sq miles by default; adjustable).
"""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .sphere import EARTH_RADIUS_KM, cell_area_km2, unit_vectors

SQ_MILE_KM2 = 2.589988
ISLAND_MAX_KM2 = 30000.0 * SQ_MILE_KM2  # 77699.64 km^2

SUBGROUP_SEA = 0
SUBGROUP_LAND = 1
SUBGROUP_COASTLINE = 2
SUBGROUP_ISLAND = 3
SUBGROUP_NAMES = {
    SUBGROUP_SEA: "sea",
    SUBGROUP_LAND: "land",
    SUBGROUP_COASTLINE: "coastline",
    SUBGROUP_ISLAND: "island",
}
SUBGROUP_CODES = {name: code for code, name in SUBGROUP_NAMES.items()}

FAIRGRID_MAGIC = b"FAIRGRID1"

TASK_CODES = {"binary_classification": 0, "regression": 1}
TASK_NAMES = {code: name for name, code in TASK_CODES.items()}

# optional planes in canonical file order: (name, array dtype)
_PLANE_ORDER = (
    ("landmass_id", np.int32),
    ("is_island", np.bool_),
    ("coast_distance_km", np.float32),
    ("country_code", None),  # string plane
    ("population_density", np.float32),
    ("subgroup", np.uint8),
)


class GridLoadError(ValueError):
    """Raised on malformed or incomplete grid files."""


@dataclass(eq=False)
class GridDataset:
    """Global grid of signal values plus optional metadata planes."""

    resolution_deg: float
    values: np.ndarray
    task: str = "binary_classification"
    landmass_id: np.ndarray | None = None
    is_island: np.ndarray | None = None
    coast_distance_km: np.ndarray | None = None
    country_code: np.ndarray | None = None
    population_density: np.ndarray | None = None
    subgroup: np.ndarray | None = None

    def __post_init__(self):
        if not (self.resolution_deg > 0):
            raise ValueError(f"resolution must be positive, got {self.resolution_deg!r}")
        if self.task not in TASK_CODES:
            raise ValueError(f"unknown task {self.task!r}")
        n_lat = round(180.0 / self.resolution_deg)
        n_lon = round(360.0 / self.resolution_deg)
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.shape != (n_lat, n_lon):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({n_lat}, {n_lon}) at {self.resolution_deg} degrees"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        if self.task == "binary_classification" and not np.all(
            np.isin(self.values, (0.0, 1.0))
        ):
            raise ValueError("binary task values must be 0 or 1")
        for name, dtype in _PLANE_ORDER:
            plane = getattr(self, name)
            if plane is None:
                continue
            if name == "country_code":
                plane = np.ascontiguousarray(plane, dtype="<U8")
            else:
                plane = np.ascontiguousarray(plane, dtype=dtype)
            if plane.shape != (n_lat, n_lon):
                raise ValueError(f"plane {name} has shape {plane.shape}, expected {(n_lat, n_lon)}")
            setattr(self, name, plane)

    @property
    def n_lat(self) -> int:
        return self.values.shape[0]

    @property
    def n_lon(self) -> int:
        return self.values.shape[1]

    @property
    def n_cells(self) -> int:
        return self.values.size

    def lat_centers(self) -> np.ndarray:
        d = self.resolution_deg
        return 90.0 - d / 2.0 - d * np.arange(self.n_lat)

    def lon_centers(self) -> np.ndarray:
        d = self.resolution_deg
        return -180.0 + d / 2.0 + d * np.arange(self.n_lon)

    def land_mask(self) -> np.ndarray:
        if self.task != "binary_classification":
            raise ValueError("land mask requires a binary grid")
        return self.values > 0.5

    def cell_areas_km2(self, radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
        """Per-row cell areas, broadcast to the full grid shape."""
        row = cell_area_km2(self.lat_centers(), self.resolution_deg, radius_km)
        return np.broadcast_to(row[:, None], self.values.shape)

    def subgroup_names(self) -> np.ndarray:
        if self.subgroup is None:
            raise ValueError("subgroup plane not derived yet")
        lut = np.array([SUBGROUP_NAMES[c] for c in range(len(SUBGROUP_NAMES))])
        return lut[self.subgroup]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(struct.pack("<d", self.resolution_deg))
        h.update(self.task.encode())
        h.update(self.values.tobytes())
        for name, _ in _PLANE_ORDER:
            plane = getattr(self, name)
            h.update(name.encode())
            h.update(b"\x01" + plane.tobytes() if plane is not None else b"\x00")
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridDataset):
            return NotImplemented
        if self.resolution_deg != other.resolution_deg or self.task != other.task:
            return False
        if not np.array_equal(self.values, other.values):
            return False
        for name, _ in _PLANE_ORDER:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _plane_columns(grid: GridDataset) -> list[str]:
    return [name for name, _ in _PLANE_ORDER if getattr(grid, name) is not None]


def write_grid(grid: GridDataset, path, format: str | None = None) -> None:
    """Write a grid as CSV or FAIRGRID1 binary (chosen by extension when
    ``format`` is None: .csv means CSV, anything else binary)."""
    fmt = format or ("csv" if str(path).lower().endswith(".csv") else "fairgrid")
    if fmt == "csv":
        _write_csv(grid, path)
    elif fmt == "fairgrid":
        _write_fairgrid(grid, path)
    else:
        raise ValueError(f"unknown grid format {fmt!r}")


def read_grid(path, format: str | None = None, task: str | None = None) -> GridDataset:
    """Read a CSV or FAIRGRID1 grid; the binary magic is auto-detected.

    CSV carries no task marker, so the task is inferred (0/1 values mean a
    binary grid) unless ``task`` overrides it; the binary format stores it.
    """
    if format is None:
        with open(path, "rb") as fh:
            format = "fairgrid" if fh.read(len(FAIRGRID_MAGIC)) == FAIRGRID_MAGIC else "csv"
    if format == "csv":
        return _read_csv(path, task=task)
    if format == "fairgrid":
        return _read_fairgrid(path)
    raise ValueError(f"unknown grid format {format!r}")


def _fmt_f32(v) -> str:
    # 9 significant digits uniquely identify a float32
    return f"{float(v):.9g}"


def _write_csv(grid: GridDataset, path) -> None:
    planes = _plane_columns(grid)
    lats, lons = grid.lat_centers(), grid.lon_centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lat_deg", "lon_deg", "value"] + planes)
        for i in range(grid.n_lat):
            for j in range(grid.n_lon):
                row = [_fmt_f32(lats[i]), _fmt_f32(lons[j]), _fmt_f32(grid.values[i, j])]
                for name in planes:
                    plane = getattr(grid, name)
                    if name == "landmass_id":
                        row.append(str(int(plane[i, j])))
                    elif name == "is_island":
                        row.append(str(int(plane[i, j])))
                    elif name == "country_code":
                        row.append(str(plane[i, j]))
                    elif name == "subgroup":
                        row.append(SUBGROUP_NAMES[int(plane[i, j])])
                    else:
                        row.append(_fmt_f32(plane[i, j]))
                writer.writerow(row)


def _read_csv(path, task: str | None = None) -> GridDataset:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GridLoadError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != ["lat_deg", "lon_deg", "value"]:
            raise GridLoadError(
                f"{path}: malformed header {header!r}, expected lat_deg,lon_deg,value,..."
            )
        known = [name for name, _ in _PLANE_ORDER]
        extra = header[3:]
        for name in extra:
            if name not in known:
                raise GridLoadError(f"{path}: unknown column {name!r}")
        rows = list(reader)
    if not rows:
        raise GridLoadError(f"{path}: no data records")

    lats = np.array([float(r[0]) for r in rows])
    lons = np.array([float(r[1]) for r in rows])
    uniq = np.unique(lats)
    if uniq.size > 1:
        res = float(np.min(np.diff(uniq)))
    else:
        res = 360.0 / np.unique(lons).size
    n_lat, n_lon = round(180.0 / res), round(360.0 / res)
    if n_lat < 1 or n_lon < 1 or not math.isfinite(res):
        raise GridLoadError(f"{path}: could not infer grid resolution")

    def _locate(lat, lon, record):
        i = round((90.0 - res / 2.0 - lat) / res)
        j = round((lon + 180.0 - res / 2.0) / res)
        if not (0 <= i < n_lat and 0 <= j < n_lon):
            raise GridLoadError(f"{path}: record {record}: ({lat}, {lon}) off-grid")
        if abs(90.0 - res / 2.0 - i * res - lat) > 1e-6 + res * 1e-6 or abs(
            -180.0 + res / 2.0 + j * res - lon
        ) > 1e-6 + res * 1e-6:
            raise GridLoadError(
                f"{path}: record {record}: ({lat}, {lon}) is not a cell center at "
                f"{res} degree resolution"
            )
        return i, j

    values = np.full((n_lat, n_lon), np.nan, dtype=np.float32)
    seen = np.zeros((n_lat, n_lon), dtype=bool)
    planes: dict[str, np.ndarray] = {}
    for name in extra:
        if name == "country_code":
            planes[name] = np.full((n_lat, n_lon), "", dtype="<U8")
        elif name == "landmass_id":
            planes[name] = np.zeros((n_lat, n_lon), dtype=np.int32)
        elif name == "is_island":
            planes[name] = np.zeros((n_lat, n_lon), dtype=bool)
        elif name == "subgroup":
            planes[name] = np.zeros((n_lat, n_lon), dtype=np.uint8)
        else:
            planes[name] = np.full((n_lat, n_lon), np.nan, dtype=np.float32)

    for rec_no, row in enumerate(rows, start=2):
        if len(row) != 3 + len(extra):
            raise GridLoadError(f"{path}: record {rec_no}: expected {3 + len(extra)} fields")
        lat, lon, val = float(row[0]), float(row[1]), float(row[2])
        if not math.isfinite(val):
            raise GridLoadError(f"{path}: record {rec_no}: non-finite value at ({lat}, {lon})")
        i, j = _locate(lat, lon, rec_no)
        if seen[i, j]:
            raise GridLoadError(f"{path}: record {rec_no}: duplicate cell ({lat}, {lon})")
        seen[i, j] = True
        values[i, j] = val
        for col, name in enumerate(extra, start=3):
            raw = row[col]
            if name == "country_code":
                planes[name][i, j] = raw
            elif name == "landmass_id":
                planes[name][i, j] = int(raw)
            elif name == "is_island":
                planes[name][i, j] = bool(int(raw))
            elif name == "subgroup":
                if raw not in SUBGROUP_CODES:
                    raise GridLoadError(f"{path}: record {rec_no}: unknown subgroup {raw!r}")
                planes[name][i, j] = SUBGROUP_CODES[raw]
            else:
                fv = float(raw)
                if math.isnan(fv):
                    raise GridLoadError(
                        f"{path}: record {rec_no}: non-finite {name} at ({lat}, {lon})"
                    )
                planes[name][i, j] = fv

    if not seen.all():
        i, j = np.argwhere(~seen)[0]
        lat = 90.0 - res / 2.0 - i * res
        lon = -180.0 + res / 2.0 + j * res
        raise GridLoadError(f"{path}: missing cell at (lat={lat:g}, lon={lon:g})")

    if task is None:
        task = (
            "binary_classification"
            if np.all(np.isin(values, (0.0, 1.0)))
            else "regression"
        )
    return GridDataset(resolution_deg=res, values=values, task=task, **planes)


def _write_fairgrid(grid: GridDataset, path) -> None:
    """FAIRGRID1 layout: magic, f64 resolution, u32 dims, u8 task, u16 plane
    count, plane directory, then row-major plane data. Numeric planes are
    32-bit little-endian floats; the country plane stores u16 indices into
    an embedded code table."""
    planes = _plane_columns(grid)
    with open(path, "wb") as fh:
        fh.write(FAIRGRID_MAGIC)
        fh.write(struct.pack("<dIIBH", grid.resolution_deg, grid.n_lat, grid.n_lon,
                             TASK_CODES[grid.task], 1 + len(planes)))
        payload = []
        for name in ["value"] + planes:
            nb = name.encode("ascii")
            fh.write(struct.pack("<B", len(nb)))
            fh.write(nb)
            if name == "country_code":
                codes, index = np.unique(grid.country_code, return_inverse=True)
                if codes.size > 0xFFFF:
                    raise ValueError("too many distinct country codes for the format")
                fh.write(struct.pack("<BI", 1, codes.size))
                for code in codes:
                    cb = str(code).encode("utf-8")
                    fh.write(struct.pack("<B", len(cb)))
                    fh.write(cb)
                payload.append(index.astype("<u2").tobytes())
            else:
                fh.write(struct.pack("<B", 0))
                plane = grid.values if name == "value" else getattr(grid, name)
                payload.append(np.ascontiguousarray(plane, dtype="<f4").tobytes())
        for chunk in payload:
            fh.write(chunk)


def _read_fairgrid(path) -> GridDataset:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(FAIRGRID_MAGIC)] != FAIRGRID_MAGIC:
        raise GridLoadError(f"{path}: bad magic, not a FAIRGRID1 file")
    off = len(FAIRGRID_MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(data):
            raise GridLoadError(f"{path}: truncated header")
        out = struct.unpack_from(fmt, data, off)
        off += size
        return out

    res, n_lat, n_lon, task_code, n_planes = take("<dIIBH")
    if task_code not in TASK_NAMES:
        raise GridLoadError(f"{path}: unknown task code {task_code}")
    directory = []
    for _ in range(n_planes):
        (name_len,) = take("<B")
        name = data[off : off + name_len].decode("ascii")
        off += name_len
        (ptype,) = take("<B")
        table = None
        if ptype == 1:
            (count,) = take("<I")
            table = []
            for _ in range(count):
                (clen,) = take("<B")
                table.append(data[off : off + clen].decode("utf-8"))
                off += clen
        directory.append((name, ptype, table))

    cells = n_lat * n_lon
    planes = {}
    for name, ptype, table in directory:
        if ptype == 1:
            raw = np.frombuffer(data, dtype="<u2", count=cells, offset=off)
            off += cells * 2
            lut = np.asarray(table, dtype="<U8")
            if raw.size and raw.max() >= lut.size:
                raise GridLoadError(f"{path}: plane {name}: index out of table range")
            planes[name] = lut[raw].reshape(n_lat, n_lon)
        else:
            raw = np.frombuffer(data, dtype="<f4", count=cells, offset=off)
            off += cells * 4
            planes[name] = raw.reshape(n_lat, n_lon)
    if "value" not in planes:
        raise GridLoadError(f"{path}: missing value plane")
    values = planes.pop("value")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values.reshape(n_lat, n_lon)))[0]
        raise GridLoadError(f"{path}: non-finite value at cell {tuple(bad)}")
    kwargs = {}
    for name, dtype in _PLANE_ORDER:
        if name not in planes:
            continue
        plane = planes[name]
        if name == "landmass_id":
            kwargs[name] = plane.astype(np.int32)
        elif name == "is_island":
            kwargs[name] = plane.astype(np.float32) > 0.5 if plane.dtype.kind == "f" else plane
        elif name == "subgroup":
            kwargs[name] = plane.astype(np.uint8)
        else:
            kwargs[name] = plane
    return GridDataset(
        resolution_deg=res, values=values, task=TASK_NAMES[task_code], **kwargs
    )


# ---------------------------------------------------------------------------
# metadata derivation
# ---------------------------------------------------------------------------

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def label_landmasses(grid: GridDataset) -> tuple[GridDataset, dict[int, float]]:
    """Connected-component labels over the land mask with longitude
    wraparound (no wrap across the poles).

    Components are 4-connected; ids are assigned in decreasing area order
    starting at 1 (sea cells keep 0). Returns the labeled grid and the
    id -> km^2 area table.
    """
    mask = grid.land_mask()
    labels, _ = ndimage.label(mask, structure=_FOUR_CONN)

    # merge components touching across the date line
    left, right = labels[:, 0], labels[:, -1]
    touching = (left > 0) & (right > 0)
    if np.any(touching):
        n_raw = labels.max()
        parent = np.arange(n_raw + 1)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in zip(left[touching], right[touching]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(n_raw + 1)])
        # densify; sea root 0 is the smallest, so it maps back to 0
        _, dense = np.unique(roots, return_inverse=True)
        labels = dense[labels]
    areas_by_label = np.bincount(labels.ravel(), weights=grid.cell_areas_km2().ravel())

    # relabel by decreasing area; ties broken by original label for determinism
    ids = np.arange(len(areas_by_label))
    land_ids = ids[ids > 0]
    order = land_ids[np.lexsort((land_ids, -areas_by_label[land_ids]))]
    remap = np.zeros(len(areas_by_label), dtype=np.int32)
    remap[order] = np.arange(1, len(order) + 1)
    new_labels = remap[labels]
    area_table = {int(remap[lab]): float(areas_by_label[lab]) for lab in order}
    return replace(grid, landmass_id=new_labels), area_table


def landmass_areas(grid: GridDataset) -> np.ndarray:
    """km^2 per landmass id (index = id; entry 0 is total sea area)."""
    if grid.landmass_id is None:
        raise ValueError("grid has no landmass labels; run label_landmasses first")
    return np.bincount(grid.landmass_id.ravel(), weights=grid.cell_areas_km2().ravel())


def _boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Cells with at least one 4-neighbor of the opposite class; longitude
    wraps, poles do not."""
    differs = np.zeros_like(mask, dtype=bool)
    differs |= mask != np.roll(mask, 1, axis=1)
    differs |= mask != np.roll(mask, -1, axis=1)
    differs[1:, :] |= mask[1:, :] != mask[:-1, :]
    differs[:-1, :] |= mask[:-1, :] != mask[1:, :]
    return differs


def derive_subgroups(
    grid: GridDataset,
    island_max_km2: float = ISLAND_MAX_KM2,
    coast_band_km: float = 100.0,
) -> GridDataset:
    """Attach is_island, coast_distance_km and the subgroup plane.

    Coast distance is the great-circle distance to the nearest boundary
    cell center (exact nearest via a KD-tree on unit vectors); boundary
    cells get exactly 0. Grids with no boundary at all get +inf.
    """
    if grid.landmass_id is None:
        raise ValueError("grid has no landmass labels; run label_landmasses first")
    mask = grid.landmass_id > 0
    boundary = _boundary_mask(mask)

    lat = np.repeat(grid.lat_centers(), grid.n_lon)
    lon = np.tile(grid.lon_centers(), grid.n_lat)
    theta = np.radians(90.0 - lat)
    phi = np.radians(lon)
    if boundary.any():
        vecs = unit_vectors(theta, phi)
        tree = cKDTree(vecs[boundary.ravel()])
        chord, _ = tree.query(vecs, k=1)
        arc = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
        coast = arc.reshape(grid.values.shape).astype(np.float32)
        coast[boundary] = 0.0
    else:
        coast = np.full(grid.values.shape, np.inf, dtype=np.float32)

    areas = landmass_areas(grid)
    island_ids = areas < island_max_km2
    island_ids[0] = False
    is_island = island_ids[grid.landmass_id]

    subgroup = np.where(mask, SUBGROUP_LAND, SUBGROUP_SEA).astype(np.uint8)
    subgroup[coast <= coast_band_km] = SUBGROUP_COASTLINE
    subgroup[is_island] = SUBGROUP_ISLAND
    return replace(
        grid,
        is_island=is_island,
        coast_distance_km=coast,
        subgroup=subgroup,
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass
class SampleSet:
    """Points drawn at grid cell centers, with targets and subgroup labels."""

    lat_deg: np.ndarray
    lon_deg: np.ndarray
    values: np.ndarray
    task: str
    subgroup: np.ndarray | None
    country: np.ndarray | None
    rows: np.ndarray
    cols: np.ndarray
    grid_fingerprint: str
    mode: str
    seed: int

    def __len__(self) -> int:
        return self.values.size

    def latlon(self) -> np.ndarray:
        """(n, 2) [lat_deg, lon_deg] array, the encoder input layout."""
        return np.column_stack([self.lat_deg, self.lon_deg])

    def subgroup_names(self) -> np.ndarray:
        if self.subgroup is None:
            raise ValueError("sample set carries no subgroup labels")
        lut = np.array([SUBGROUP_NAMES[c] for c in range(len(SUBGROUP_NAMES))])
        return lut[self.subgroup]


def sample_points(
    grid: GridDataset, n: int, mode: str = "grid_uniform", seed: int = 0
) -> SampleSet:
    """Draw ``n`` sample points at cell centers.

    ``grid_uniform`` draws cells uniformly without replacement (n bounded
    by the cell count); it inherits the equirectangular pole bias.
    ``area_weighted`` draws with replacement with probability proportional
    to cos(latitude), the bias-mitigating alternative. Both are
    deterministic per seed.
    """
    if n < 1:
        raise ValueError(f"sample count must be positive, got {n!r}")
    rng = np.random.default_rng([seed, 0])
    cells = grid.n_cells
    if mode == "grid_uniform":
        if n > cells:
            raise ValueError(f"cannot draw {n} cells from {cells} without replacement")
        flat = rng.choice(cells, size=n, replace=False)
    elif mode == "area_weighted":
        weights = np.repeat(np.cos(np.radians(grid.lat_centers())), grid.n_lon)
        weights = np.maximum(weights, 0.0)
        flat = rng.choice(cells, size=n, replace=True, p=weights / weights.sum())
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    rows, cols = np.divmod(flat, grid.n_lon)
    return SampleSet(
        lat_deg=grid.lat_centers()[rows],
        lon_deg=grid.lon_centers()[cols],
        values=grid.values[rows, cols].astype(float),
        task=grid.task,
        subgroup=None if grid.subgroup is None else grid.subgroup[rows, cols],
        country=None if grid.country_code is None else grid.country_code[rows, cols],
        rows=rows,
        cols=cols,
        grid_fingerprint=grid.fingerprint(),
        mode=mode,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------


def generate_checkerboard(
    cell_deg: float = 15.0, resolution_deg: float = 1.0, seed: int = 0
) -> GridDataset:
    """Binary labels alternating on a lat/lon checkerboard.

    The seed only flips the global parity; the board itself is fixed.
    """
    if not (0 < cell_deg <= 180) or not math.isfinite(cell_deg):
        raise ValueError(f"invalid checkerboard cell size {cell_deg!r}")
    parity = int(np.random.default_rng([seed, 0]).integers(2))
    n_lat = round(180.0 / resolution_deg)
    n_lon = round(360.0 / resolution_deg)
    lat = 90.0 - resolution_deg / 2.0 - resolution_deg * np.arange(n_lat)
    lon = -180.0 + resolution_deg / 2.0 + resolution_deg * np.arange(n_lon)
    bi = np.floor((90.0 - lat) / cell_deg).astype(int)[:, None]
    bj = np.floor((lon + 180.0) / cell_deg).astype(int)[None, :]
    values = ((bi + bj + parity) % 2).astype(np.float32)
    return GridDataset(
        resolution_deg=resolution_deg, values=values, task="binary_classification"
    )


def _random_sphere_point(rng) -> np.ndarray:
    z = rng.uniform(-1.0, 1.0)
    lon = rng.uniform(0.0, 2.0 * math.pi)
    s = math.sqrt(max(0.0, 1.0 - z * z))
    return np.array([s * math.cos(lon), s * math.sin(lon), z])


def _angular_distance_deg(v1: np.ndarray, v2: np.ndarray) -> float:
    return math.degrees(math.acos(min(1.0, max(-1.0, float(np.dot(v1, v2))))))


def generate_archipelago(
    n_continents: int = 3,
    n_islands: int = 40,
    island_radius_deg: tuple[float, float] = (0.3, 2.0),
    resolution_deg: float = 0.5,
    seed: int = 0,
    island_max_km2: float = ISLAND_MAX_KM2,
    coast_band_km: float = 100.0,
    max_retries: int = 200,
    cluster_fraction: float = 0.7,
) -> GridDataset:
    """Synthetic land-sea grid: a few continental blobs plus many small
    circular islands, labeled and subgroup-tagged.

    Continents are unions of spherical caps strung along a random arc so
    each blob spans at least 30 degrees. Island caps are rejection-placed
    so no two landmasses touch (margin of two cells); a
    ``cluster_fraction`` share of them anchors near existing land, forming
    the chains and fringes real archipelagos show, and the rest scatter
    uniformly. Deterministic per seed; raises after ``max_retries`` failed
    placements.
    """
    if n_continents < 0 or n_islands < 0:
        raise ValueError("counts must be nonnegative")
    lo, hi = island_radius_deg
    if not (0 < lo <= hi):
        raise ValueError(f"invalid island radius range {island_radius_deg!r}")
    rng = np.random.default_rng([seed, 0])

    n_lat = round(180.0 / resolution_deg)
    n_lon = round(360.0 / resolution_deg)
    lat = 90.0 - resolution_deg / 2.0 - resolution_deg * np.arange(n_lat)
    lon = -180.0 + resolution_deg / 2.0 + resolution_deg * np.arange(n_lon)
    theta = np.radians(90.0 - np.repeat(lat, n_lon))
    phi = np.radians(np.tile(lon, n_lat))
    cell_vecs = unit_vectors(theta, phi)

    margin = 2.0 * resolution_deg
    caps: list[tuple[np.ndarray, float]] = []  # (center unit vector, radius_deg)
    mask = np.zeros(n_lat * n_lon, dtype=bool)

    def paint(center, radius_deg):
        cos_r = math.cos(math.radians(radius_deg))
        mask[cell_vecs @ center >= cos_r] = True
        caps.append((center, radius_deg))

    # continents: caps along a random great-circle walk, total span >= 30 deg
    centers = []
    for _ in range(n_continents):
        for attempt in range(max_retries + 1):
            c = _random_sphere_point(rng)
            if all(_angular_distance_deg(c, other) >= 70.0 for other in centers):
                break
            if attempt == max_retries:
                raise RuntimeError("could not place continents; fewer or smaller blobs needed")
        centers.append(c)
        # walk direction tangent to the sphere at c
        step = np.zeros(3)
        while np.linalg.norm(step) < 1e-6:
            step = np.cross(c, _random_sphere_point(rng))
        step /= np.linalg.norm(step)
        pos = c
        for k in range(6):
            radius = float(rng.uniform(9.0, 14.0))
            paint(pos / np.linalg.norm(pos), radius)
            ang = math.radians(6.0 + float(rng.uniform(0.0, 2.0)))
            pos = pos * math.cos(ang) + step * math.sin(ang)
            wobble = np.cross(pos, step) * float(rng.uniform(-0.15, 0.15))
            step = step + wobble
            step -= pos * np.dot(step, pos) / np.dot(pos, pos)
            step /= np.linalg.norm(step)

    for _ in range(n_islands):
        for attempt in range(max_retries + 1):
            radius = float(rng.uniform(lo, hi))
            if caps and rng.random() < cluster_fraction:
                # chain off an existing cap: offshore of a continent or a
                # previously placed island
                anchor, anchor_r = caps[int(rng.integers(len(caps)))]
                gap = float(rng.uniform(margin, margin + 4.0))
                ang = math.radians(anchor_r + radius + gap)
                step = np.zeros(3)
                while np.linalg.norm(step) < 1e-6:
                    step = np.cross(anchor, _random_sphere_point(rng))
                step /= np.linalg.norm(step)
                c = anchor * math.cos(ang) + step * math.sin(ang)
            else:
                c = _random_sphere_point(rng)
            # snap to the nearest cell center so every island covers >= 1 cell
            nearest = int(np.argmax(cell_vecs @ c))
            c = cell_vecs[nearest]
            ok = all(
                _angular_distance_deg(c, cc) >= radius + r + margin for cc, r in caps
            )
            if ok:
                paint(c, radius)
                break
            if attempt == max_retries:
                raise RuntimeError(
                    f"could not place island after {max_retries} retries; "
                    "reduce count or radius"
                )

    grid = GridDataset(
        resolution_deg=resolution_deg,
        values=mask.reshape(n_lat, n_lon).astype(np.float32),
        task="binary_classification",
    )
    grid, _ = label_landmasses(grid)
    return derive_subgroups(grid, island_max_km2=island_max_km2, coast_band_km=coast_band_km)
