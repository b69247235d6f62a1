"""AIS vessel-days: parsing, legality labels, feature rows and encoding."""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
import re
from collections import namedtuple
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geo
from .errors import ArgumentError, FormatError, IngestionError, ValidationError
from .geo import EezGeometry, GeoPoint, Zone

AIS_HEADER = ["mmsi", "date", "lat", "lon", "fishing_hours", "flag", "gear"]
FEATURE_HEADER = ["mmsi", "date", "sst", "chl", "sea", "lat", "lon", "inside_eez", "dist_eez_km", "month", "y"]
GEARS = ("squid_jigger", "trawler", "drifting_longline", "other")
_GEAR_ALIASES = {"squid_jiggers": "squid_jigger", "trawlers": "trawler", "drifting_longlines": "drifting_longline"}
_UNKNOWN_FLAGS = {"", "UNK", "NAN", "NONE", "XXX"}
CHINA = "CHN"
VARIABLE_SETS = ("all", "top_five", "ocean_only")


@dataclass(frozen=True)
class VesselDay:
    mmsi: str
    flag: str
    gear: str
    date: dt.date
    pos: GeoPoint
    fishing_hours: float


@dataclass(frozen=True)
class Reject:
    line_no: int
    reason: str


@dataclass(frozen=True)
class Mode:
    """Labeling mode: strict EEZ containment, or a band of ``buffer_km`` inside the line."""

    buffer_km: float | None = None

    def __post_init__(self):
        if self.buffer_km is not None and not self.buffer_km > 0:
            raise ArgumentError(f"buffer must be > 0 km, got {self.buffer_km}")

    @property
    def name(self) -> str:
        if self.buffer_km is None:
            return "strict"
        return f"buffer_{self.buffer_km:g}km"

    @classmethod
    def parse(cls, text) -> "Mode":
        text = str(text).strip().lower()
        if text == "strict":
            return cls()
        m = re.fullmatch(r"(?:buffer_)?([0-9.]+)(?:km)?", text)
        if not m:
            raise ArgumentError(f"unrecognised mode {text!r}")
        return cls(float(m.group(1)))


STRICT = Mode()


@dataclass(frozen=True)
class FeatureRow:
    mmsi: str
    date: dt.date
    sst: float | None
    chl: float | None
    sea: int | None
    lat: float
    lon: float
    inside_eez: int
    dist_eez_km: float
    month: int
    label: int

    @property
    def year(self) -> int:
        return self.date.year


# ---------------------------------------------------------------- AIS-CSV

def _parse_line(rec, line_no, window):
    if len(rec) != len(AIS_HEADER):
        return f"expected {len(AIS_HEADER)} fields, found {len(rec)}"
    mmsi, date_s, lat_s, lon_s, hours_s, flag, gear = (x.strip() for x in rec)
    if not mmsi:
        return "empty mmsi"
    try:
        date = dt.date.fromisoformat(date_s)
    except ValueError:
        return f"bad date {date_s!r}"
    try:
        lat, lon, hours = float(lat_s), float(lon_s), float(hours_s)
    except ValueError:
        return "non-numeric lat/lon/fishing_hours"
    if not math.isfinite(hours) or hours < 0:
        return f"fishing_hours must be a finite value >= 0, got {hours_s}"
    try:
        pos = GeoPoint(lat, lon)
    except ArgumentError as exc:
        return str(exc)
    flag = flag.upper()
    if flag in _UNKNOWN_FLAGS or not re.fullmatch(r"[A-Z]{3}", flag):
        return f"unknown flag {flag!r}"
    if window is not None and not window[0] <= date <= window[1]:
        return f"date {date} outside study window"
    gear = _GEAR_ALIASES.get(gear.lower(), gear.lower())
    if gear not in GEARS:
        gear = "other"
    return VesselDay(mmsi, flag, gear, date, pos, hours)


def parse_ais_text(text: str, window=None, max_reject_fraction=0.01):
    """Parse AIS-CSV text into ``(vessel_days, rejects)``."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("line 1: missing AIS-CSV header") from None
    if [h.strip() for h in header] != AIS_HEADER:
        raise FormatError(f"line 1: expected header {','.join(AIS_HEADER)!r}")
    vessels, rejects = [], []
    for line_no, rec in enumerate(reader, start=2):
        if not rec:
            continue
        out = _parse_line(rec, line_no, window)
        if isinstance(out, str):
            rejects.append(Reject(line_no, out))
        else:
            vessels.append(out)
    total = len(vessels) + len(rejects)
    if total == 0:
        raise ValidationError("AIS-CSV has no records")
    if len(rejects) > max_reject_fraction * total:
        first = rejects[0]
        raise IngestionError(
            f"{len(rejects)} of {total} lines rejected (limit {max_reject_fraction:.1%}); "
            f"first at line {first.line_no}: {first.reason}"
        )
    return vessels, rejects


def parse_ais_csv(path, window=None, max_reject_fraction=0.01):
    try:
        return parse_ais_text(Path(path).read_text(encoding="utf-8"), window, max_reject_fraction)
    except (FormatError, ValidationError, IngestionError) as exc:
        raise type(exc)(f"{path}: {exc}") from None


def format_rejects(rejects) -> str:
    lines = ["line_no,reason"]
    for r in rejects:
        reason = r.reason.replace('"', "'")
        lines.append(f'{r.line_no},"{reason}"')
    return "\n".join(lines) + "\n"


def format_ais(vessels) -> str:
    lines = [",".join(AIS_HEADER)]
    for v in vessels:
        lines.append(",".join([
            v.mmsi, v.date.isoformat(), repr(v.pos.lat), repr(v.pos.lon),
            repr(float(v.fishing_hours)), v.flag, v.gear,
        ]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- labels

def _label(flag, zone, hours, mode):
    chinese = flag == CHINA
    if mode.buffer_km is None:
        return int(chinese and zone != Zone.OUTSIDE and hours > 0)
    if chinese and zone == Zone.INSIDE_BEYOND_BUFFER:
        return None
    return int(chinese and zone == Zone.INSIDE_WITHIN_BUFFER and hours > 0)


def label_vessel_day(v: VesselDay, g: EezGeometry, mode: Mode = STRICT):
    """Illegal (1) / legal (0) label; ``None`` when buffer mode excludes the row.

    Buffer mode keeps Chinese vessels inside the EEZ only when they are within
    ``mode.buffer_km`` of the line; deeper incursions are dropped.
    """
    if mode.buffer_km is None:
        zone = Zone.INSIDE_BEYOND_BUFFER if geo.point_in_polygon(v.pos, g) else Zone.OUTSIDE
    else:
        zone = geo.classify_zone(v.pos, g, mode.buffer_km)
    return _label(v.flag, zone, v.fishing_hours, mode)


def _nan_to_none(x, integer=False):
    if math.isnan(x):
        return None
    return int(x) if integer else float(x)


def build_features(v: VesselDay, grids: dict, g: EezGeometry, mode: Mode = STRICT):
    """Feature row for one vessel-day, or ``None`` if ``mode`` excludes it."""
    rows = build_feature_rows([v], grids, g, mode)
    return rows[0] if rows else None


def build_feature_rows(vessels, grids: dict, g: EezGeometry, mode: Mode = STRICT, drop_zero_hours=False):
    """Vectorized :func:`build_features` over many vessel-days (order preserved)."""
    if drop_zero_hours:
        vessels = [v for v in vessels if v.fishing_hours > 0]
    if not vessels:
        return []
    lats = np.array([v.pos.lat for v in vessels])
    lons = np.array([v.pos.lon for v in vessels])
    dates = [v.date for v in vessels]
    samples = {}
    for var in ("SST", "CHL", "SEA"):
        stack = grids.get(var)
        samples[var] = stack.sample_many(lats, lons, dates) if stack is not None else np.full(lats.shape, np.nan)
    inside = geo.contains_many(g, lats, lons)
    dist = geo.distance_many_km(g, lats, lons)
    rows = []
    for n, v in enumerate(vessels):
        if not inside[n]:
            zone = Zone.OUTSIDE
        elif mode.buffer_km is not None and dist[n] <= mode.buffer_km:
            zone = Zone.INSIDE_WITHIN_BUFFER
        else:
            zone = Zone.INSIDE_BEYOND_BUFFER
        y = _label(v.flag, zone, v.fishing_hours, mode)
        if y is None:
            continue
        rows.append(FeatureRow(
            mmsi=v.mmsi, date=v.date,
            sst=_nan_to_none(samples["SST"][n]),
            chl=_nan_to_none(samples["CHL"][n]),
            sea=_nan_to_none(samples["SEA"][n], integer=True),
            lat=v.pos.lat, lon=v.pos.lon,
            inside_eez=int(inside[n]), dist_eez_km=float(dist[n]),
            month=v.date.month, label=y,
        ))
    return rows


# ---------------------------------------------------------------- features file

def _fmt_opt(x):
    return "NA" if x is None else repr(x)


def format_features(rows) -> str:
    out = [",".join(FEATURE_HEADER)]
    for r in rows:
        out.append(",".join([
            r.mmsi, r.date.isoformat(), _fmt_opt(r.sst), _fmt_opt(r.chl), _fmt_opt(r.sea),
            repr(r.lat), repr(r.lon), str(r.inside_eez), repr(r.dist_eez_km), str(r.month), str(r.label),
        ]))
    return "\n".join(out) + "\n"


def parse_features(text: str):
    lines = text.split("\n")
    if not lines or lines[0] != ",".join(FEATURE_HEADER):
        raise FormatError("line 1: not a features file")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        t = line.split(",")
        if len(t) != len(FEATURE_HEADER):
            raise FormatError(f"line {line_no}: expected {len(FEATURE_HEADER)} fields")
        try:
            rows.append(FeatureRow(
                mmsi=t[0], date=dt.date.fromisoformat(t[1]),
                sst=None if t[2] == "NA" else float(t[2]),
                chl=None if t[3] == "NA" else float(t[3]),
                sea=None if t[4] == "NA" else int(t[4]),
                lat=float(t[5]), lon=float(t[6]), inside_eez=int(t[7]),
                dist_eez_km=float(t[8]), month=int(t[9]), label=int(t[10]),
            ))
        except ValueError as exc:
            raise FormatError(f"line {line_no}: {exc}") from None
    return rows


def summarize(rows, rejects=()) -> dict:
    """Row counts, prevalence, per-variable missing rates and vessel counts."""
    n = len(rows)
    illegal_vessels = {r.mmsi for r in rows if r.label == 1}
    legal_vessels = {r.mmsi for r in rows} - illegal_vessels
    pos = sum(r.label for r in rows)
    return {
        "observations": n,
        "illegal_rows": pos,
        "prevalence": pos / n if n else 0.0,
        "unique_legal_vessels": len(legal_vessels),
        "unique_illegal_vessels": len(illegal_vessels),
        "missing_rate": {
            "sst": sum(r.sst is None for r in rows) / n if n else 0.0,
            "chl": sum(r.chl is None for r in rows) / n if n else 0.0,
            "sea": sum(r.sea is None for r in rows) / n if n else 0.0,
        },
        "rejects": len(rejects),
        "years": sorted({r.year for r in rows}),
    }


def format_summary(s: dict) -> str:
    lines = [
        f"{s['observations']:,} observations, {s['unique_legal_vessels']:,} unique vessels operating legally, "
        f"and {s['unique_illegal_vessels']:,} unique fishing vessels operating illegally",
        f"illegal rows: {s['illegal_rows']} (prevalence {100 * s['prevalence']:.2f}%)",
        "missing rate: " + ", ".join(f"{k}={100 * v:.2f}%" for k, v in s["missing_rate"].items()),
        f"rejected lines: {s['rejects']}",
        "years: " + " ".join(str(y) for y in s["years"]),
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- encoding

@dataclass
class DesignMatrix:
    feature_names: list
    rows: np.ndarray
    labels: np.ndarray
    year_of_row: np.ndarray
    mmsi: list = field(default_factory=list)
    dates: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)


def source_variable(feature_name: str) -> str:
    """Table-level variable a design-matrix column was derived from."""
    base = feature_name.split("_")[0]
    if feature_name.startswith("month_"):
        return "MONTH"
    return {
        "sst": "SST", "chl": "CHL", "sea": "SEA", "lat": "LAT", "lon": "LON",
        "inside": "I-EEZ", "dist": "D-EEZ",
    }[base]


def _median(values):
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else 0.0


@dataclass
class Encoder:
    """Column layout and imputation medians, fit on training rows only."""

    variable_set: str
    sst_median: float = 0.0
    chl_median: float = 0.0
    sea_classes: tuple = ()
    months: tuple = ()

    @classmethod
    def fit(cls, rows, variable_set="all") -> "Encoder":
        if variable_set not in VARIABLE_SETS:
            raise ArgumentError(f"variable_set must be one of {VARIABLE_SETS}, got {variable_set!r}")
        if not rows:
            raise ArgumentError("cannot encode an empty row set")
        return cls(
            variable_set,
            sst_median=_median(r.sst for r in rows),
            chl_median=_median(r.chl for r in rows),
            sea_classes=tuple(sorted({r.sea for r in rows if r.sea is not None})),
            months=tuple(sorted({r.month for r in rows})),
        )

    @property
    def feature_names(self) -> list:
        names = ["sst", "sst_missing", "chl", "chl_missing"]
        if self.variable_set in ("all", "ocean_only"):
            names += [f"sea_{k}" for k in self.sea_classes] + ["sea_missing"]
        if self.variable_set in ("all", "top_five"):
            names += ["lat", "lon", "inside_eez"]
        if self.variable_set == "all":
            names += ["dist_eez_km"]
        if self.variable_set in ("all", "ocean_only"):
            names += [f"month_{m}" for m in self.months]
        return names

    def _row_vector(self, r):
        vec = [
            self.sst_median if r.sst is None else r.sst, float(r.sst is None),
            self.chl_median if r.chl is None else r.chl, float(r.chl is None),
        ]
        if self.variable_set in ("all", "ocean_only"):
            vec += [float(r.sea == k) for k in self.sea_classes] + [float(r.sea is None)]
        if self.variable_set in ("all", "top_five"):
            vec += [r.lat, r.lon, float(r.inside_eez)]
        if self.variable_set == "all":
            vec += [r.dist_eez_km]
        if self.variable_set in ("all", "ocean_only"):
            vec += [float(r.month == m) for m in self.months]
        return vec

    def transform(self, rows) -> DesignMatrix:
        names = self.feature_names
        X = np.array([self._row_vector(r) for r in rows], dtype=float).reshape(len(rows), len(names))
        return DesignMatrix(
            feature_names=names,
            rows=X,
            labels=np.array([r.label for r in rows], dtype=np.int64),
            year_of_row=np.array([r.year for r in rows], dtype=np.int64),
            mmsi=[r.mmsi for r in rows],
            dates=[r.date for r in rows],
        )

    def decode(self, vec) -> dict:
        """Recover the non-missing source values from one encoded row."""
        col = dict(zip(self.feature_names, vec))
        out = {}
        if not col["sst_missing"]:
            out["sst"] = col["sst"]
        if not col["chl_missing"]:
            out["chl"] = col["chl"]
        if "sea_missing" in col and not col["sea_missing"]:
            hits = [k for k in self.sea_classes if col[f"sea_{k}"] == 1.0]
            if hits:
                out["sea"] = hits[0]
        for name in ("lat", "lon", "dist_eez_km"):
            if name in col:
                out[name] = col[name]
        if "inside_eez" in col:
            out["inside_eez"] = int(col["inside_eez"])
        months = [m for m in self.months if col.get(f"month_{m}") == 1.0]
        if months:
            out["month"] = months[0]
        return out


def encode(rows, variable_set="all", encoder: Encoder | None = None) -> DesignMatrix:
    """Encode rows; pass a training-fit ``encoder`` to encode held-out rows."""
    if not rows:
        raise ArgumentError("cannot encode an empty row set")
    if encoder is None:
        encoder = Encoder.fit(rows, variable_set)
    return encoder.transform(rows)


Fold = namedtuple("Fold", "year train test")


def split_by_year(m) -> list:
    """One fold per distinct year: that year is the test set, the rest train."""
    years = np.asarray(m.year_of_row if isinstance(m, DesignMatrix) else m)
    distinct = np.unique(years)
    if distinct.size < 2:
        raise ValidationError(f"blocked CV needs >= 2 years, found {distinct.tolist()}")
    return [
        Fold(int(y), np.flatnonzero(years != y), np.flatnonzero(years == y))
        for y in distinct
    ]
