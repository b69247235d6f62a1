"""Dated rasters of SST, CHL and seascape class, with nearest-cell sampling.

Missing cells are stored as NaN internally and surface as ``None`` from the
scalar sampling API.
"""
from __future__ import annotations

import bisect
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError, ValidationError
from .geo import GeoPoint

VARIABLES = ("SST", "CHL", "SEA")
UNITS = {"SST": "degC", "CHL": "mg m-3", "SEA": "class"}
N_SEASCAPES = 30
KM_PER_DEGREE_AREA = 111.195
GRID_HEADER = "var,lat0,lon0,dlat,dlon,nrows,ncols,period_start"

# Most prevalent seascapes on the Patagonian Shelf.
SEASCAPE_NAMES = {
    1: "North Atlantic Spring, ACC Transition",
    2: "Subpolar-Subtropical Transition",
    7: "Temperate Transition",
    12: "Subpolar",
    14: "Cool Temperate Blooms Upwelling",
    15: "Tropical Seas",
    17: "Subtropical Transition (low nutrient stress)",
    19: "Arctic/Freshwater influenced Subpolar Shelves",
    21: "Warm, Blooms, High Nuts",
}
BLOOM_UPWELLING = 14


def seascape_name(class_id: int) -> str:
    return SEASCAPE_NAMES.get(int(class_id), f"Seascape {int(class_id)}")


def period_index(d: dt.date) -> int:
    """Zero-based 8-day composite index within ``d``'s year."""
    return (d.timetuple().tm_yday - 1) // 8


def period_start(d: dt.date) -> dt.date:
    return dt.date(d.year, 1, 1) + dt.timedelta(days=8 * period_index(d))


def period_end(start: dt.date) -> dt.date:
    """Last day covered by the composite starting at ``start``."""
    return min(start + dt.timedelta(days=7), dt.date(start.year, 12, 31))


def _validate_values(var, values):
    present = values[~np.isnan(values)]
    if var == "SEA":
        bad = present[(present != np.round(present)) | (present < 1) | (present > N_SEASCAPES)]
        if bad.size:
            raise ValidationError(f"SEA value {bad[0]!r} is not a class id in [1, {N_SEASCAPES}]")
    elif var == "CHL":
        if (present < 0).any():
            raise ValidationError("CHL values must be >= 0")
    if np.isinf(present).any():
        raise ValidationError("grid contains infinite values")


@dataclass(frozen=True, eq=False)
class GridField:
    var: str
    lat0: float
    lon0: float
    dlat: float
    dlon: float
    nrows: int
    ncols: int
    period_start: dt.date
    values: np.ndarray

    def __post_init__(self):
        if self.var not in VARIABLES:
            raise ValidationError(f"unknown grid variable {self.var!r}")
        if self.dlat == 0 or self.dlon == 0:
            raise ValidationError("cell size must be nonzero")
        if self.nrows <= 0 or self.ncols <= 0:
            raise ValidationError("grid shape must be positive")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.nrows * self.ncols:
            raise ValidationError(f"{values.size} values for a {self.nrows}x{self.ncols} grid")
        values = values.reshape(self.nrows, self.ncols)
        _validate_values(self.var, values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def geometry(self):
        return (self.lat0, self.lon0, self.dlat, self.dlon, self.nrows, self.ncols)

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        return (
            self.var == other.var
            and self.geometry() == other.geometry()
            and self.period_start == other.period_start
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    def cell_index(self, lat, lon):
        """Nearest cell row/col (half-way rounds up); may be out of bounds."""
        i = np.floor((np.asarray(lat, dtype=float) - self.lat0) / self.dlat + 0.5).astype(np.int64)
        j = np.floor((np.asarray(lon, dtype=float) - self.lon0) / self.dlon + 0.5).astype(np.int64)
        return i, j

    def sample_many(self, lats, lons) -> np.ndarray:
        i, j = self.cell_index(np.atleast_1d(lats), np.atleast_1d(lons))
        ok = (i >= 0) & (i < self.nrows) & (j >= 0) & (j < self.ncols)
        out = np.full(i.shape, np.nan)
        out[ok] = self.values[i[ok], j[ok]]
        return out

    def cell_lats(self) -> np.ndarray:
        return self.lat0 + np.arange(self.nrows) * self.dlat

    def cell_lons(self) -> np.ndarray:
        return self.lon0 + np.arange(self.ncols) * self.dlon


class GridStack:
    """Time-ordered fields of one variable sharing one lattice."""

    def __init__(self, fields):
        fields = sorted(fields, key=lambda f: f.period_start)
        if not fields:
            raise ArgumentError("a GridStack needs at least one field")
        var, geom = fields[0].var, fields[0].geometry()
        for f in fields[1:]:
            if f.var != var:
                raise ValidationError(f"mixed variables in stack: {var} and {f.var}")
            if f.geometry() != geom:
                raise ValidationError(f"field {f.period_start} lattice differs from {fields[0].period_start}")
        starts = [f.period_start for f in fields]
        if len(set(starts)) != len(starts):
            raise ValidationError("duplicate periods in stack")
        self.var = var
        self.fields = tuple(fields)
        self._starts = starts
        self._ordinals = [s.toordinal() for s in starts]

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def exact_field(self, d: dt.date):
        k = bisect.bisect_left(self._starts, period_start(d))
        if k < len(self._starts) and self._starts[k] == period_start(d):
            return self.fields[k]
        return None

    def field_for(self, d: dt.date) -> GridField:
        """Field whose period contains ``d``, else the nearest period (earlier on ties)."""
        exact = self.exact_field(d)
        if exact is not None:
            return exact
        o = d.toordinal()
        k = bisect.bisect_right(self._ordinals, o)
        best, best_gap = None, None
        for cand in (k - 1, k):
            if 0 <= cand < len(self.fields):
                start = self._ordinals[cand]
                end = period_end(self._starts[cand]).toordinal()
                gap = start - o if o < start else max(0, o - end)
                if best_gap is None or gap < best_gap:
                    best, best_gap = cand, gap
        return self.fields[best]

    def sample_many(self, lats, lons, dates) -> np.ndarray:
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        out = np.full(lats.shape, np.nan)
        groups = {}
        for n, d in enumerate(dates):
            groups.setdefault(id(self.field_for(d)), []).append(n)
        by_id = {id(f): f for f in self.fields}
        for key, idx in groups.items():
            idx = np.array(idx)
            out[idx] = by_id[key].sample_many(lats[idx], lons[idx])
        return out


def sample_nearest(s: GridStack, p: GeoPoint, d: dt.date):
    """Nearest-cell value at ``p`` on date ``d``; ``None`` when missing."""
    v = s.field_for(d).sample_many(p.lat, p.lon)[0]
    if math.isnan(v):
        return None
    return int(v) if s.var == "SEA" else float(v)


def seascape_area(g: GridField, class_id: int):
    """Return ``(cell_count, km2)`` covered by seascape ``class_id``."""
    if g.var != "SEA":
        raise ArgumentError(f"seascape_area needs a SEA grid, got {g.var}")
    if not 1 <= class_id <= N_SEASCAPES:
        raise ArgumentError(f"class id {class_id} outside [1, {N_SEASCAPES}]")
    mask = g.values == class_id
    count = int(mask.sum())
    if count == 0:
        return 0, 0.0
    row_km2 = (abs(g.dlat) * KM_PER_DEGREE_AREA) * (abs(g.dlon) * KM_PER_DEGREE_AREA * np.cos(np.radians(g.cell_lats())))
    return count, float((mask.sum(axis=1) * row_km2).sum())


# ---------------------------------------------------------------- Grid-CSV

def _fmt_number(x: float) -> str:
    return repr(float(x))


def _fmt_cell(var, x):
    if math.isnan(x):
        return "NA"
    if var == "SEA":
        return str(int(x))
    return repr(float(x))


def format_grid(g: GridField) -> str:
    lines = [
        GRID_HEADER,
        ",".join([
            g.var, _fmt_number(g.lat0), _fmt_number(g.lon0), _fmt_number(g.dlat), _fmt_number(g.dlon),
            str(g.nrows), str(g.ncols), g.period_start.isoformat(),
        ]),
    ]
    for row in g.values:
        lines.append(",".join(_fmt_cell(g.var, x) for x in row))
    return "\n".join(lines) + "\n"


def write_grid(g: GridField, path) -> None:
    Path(path).write_bytes(format_grid(g).encode("utf-8"))


def _parse_cell(tok, line_no):
    if tok == "NA":
        return math.nan
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"line {line_no}: non-numeric cell {tok!r}") from None
    if math.isnan(v):
        raise FormatError(f"line {line_no}: use NA for missing cells, not {tok!r}")
    return v


def parse_grid(text: str) -> GridField:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != GRID_HEADER:
        raise FormatError(f"line 1: expected header {GRID_HEADER!r}")
    if len(lines) < 2:
        raise FormatError("line 2: missing grid description")
    meta = lines[1].split(",")
    if len(meta) != 8:
        raise FormatError(f"line 2: expected 8 fields, found {len(meta)}")
    try:
        var = meta[0]
        lat0, lon0, dlat, dlon = (float(x) for x in meta[1:5])
        nrows, ncols = int(meta[5]), int(meta[6])
        start = dt.date.fromisoformat(meta[7])
    except ValueError as exc:
        raise FormatError(f"line 2: {exc}") from None
    body = lines[2:]
    if len(body) != nrows:
        raise FormatError(f"line {3 + min(len(body), nrows)}: declared {nrows} data rows, found {len(body)}")
    values = np.empty((nrows, ncols))
    for r, line in enumerate(body):
        toks = line.split(",")
        if len(toks) != ncols:
            raise FormatError(f"line {r + 3}: expected {ncols} cells, found {len(toks)}")
        values[r] = [_parse_cell(t, r + 3) for t in toks]
    return GridField(var, lat0, lon0, dlat, dlon, nrows, ncols, start, values)


def load_grid(path) -> GridField:
    try:
        return parse_grid(Path(path).read_text(encoding="utf-8"))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_stacks(paths) -> dict:
    """Group Grid-CSV files by variable into stacks."""
    by_var = {}
    for p in sorted(Path(x) for x in paths):
        g = load_grid(p)
        by_var.setdefault(g.var, []).append(g)
    return {var: GridStack(fields) for var, fields in by_var.items()}


def load_grid_dir(directory) -> dict:
    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise FormatError(f"{directory}: no Grid-CSV files found")
    return load_stacks(paths)
