"""ERDDAP griddap CSV client.

Network access happens only through a *transport*: any callable taking a URL
and returning the response body as bytes. :func:`http_transport` is the
production implementation; tests pass canned dictionaries.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import logging
import math
import os
import time
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

import numpy as np

from .errors import ArgumentError, FormatError, NetworkError
from .grid import GridField, period_start

log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://cwcgom.aoml.noaa.gov/erddap/griddap"
BASE_URL_ENV = "IUU_ERDDAP_BASE_URL"
DEFAULT_ATTEMPTS = 3
SPACING_RTOL = 1e-6


@dataclass(frozen=True)
class GriddapQuery:
    dataset_id: str
    variable: str
    time: str  # ISO-8601 instant
    lat_range: tuple
    lon_range: tuple
    stride: int = 1
    base_url: str | None = None

    def __post_init__(self):
        if not self.dataset_id or not self.variable:
            raise ArgumentError("dataset_id and variable are required")
        if self.stride < 1:
            raise ArgumentError(f"stride must be >= 1, got {self.stride}")
        for name, (lo, hi) in (("lat_range", self.lat_range), ("lon_range", self.lon_range)):
            if not lo <= hi:
                raise ArgumentError(f"{name} is not ordered: ({lo}, {hi})")
        try:
            dt.datetime.fromisoformat(self.time.replace("Z", "+00:00"))
        except ValueError:
            raise ArgumentError(f"time {self.time!r} is not ISO-8601") from None

    def resolved_base(self) -> str:
        return (self.base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")


def _num(x) -> str:
    return repr(float(x))


def build_url(q: GriddapQuery) -> str:
    s = q.stride
    query = (
        f"{q.variable}[({q.time})]"
        f"[({_num(q.lat_range[0])}):{s}:({_num(q.lat_range[1])})]"
        f"[({_num(q.lon_range[0])}):{s}:({_num(q.lon_range[1])})]"
    )
    return f"{q.resolved_base()}/{quote(q.dataset_id)}.csv?{quote(query, safe='')}"


def _guess_var(column: str) -> str:
    c = column.lower()
    if "sst" in c or "temp" in c:
        return "SST"
    if "chl" in c:
        return "CHL"
    return "SEA"


def _axis(values, name):
    axis = np.array(sorted(set(values)))
    if axis.size == 1:
        return axis, 1.0
    steps = np.diff(axis)
    step = steps[0]
    if not np.allclose(steps, step, rtol=SPACING_RTOL, atol=1e-9):
        raise FormatError(f"{name} values are not evenly spaced; lattice cannot be inferred")
    return axis, float(step)


def parse_griddap_csv(text: str, var: str | None = None) -> GridField:
    """Parse a griddap ``.csv`` response (header row, units row, data rows)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
        next(reader)  # units
    except StopIteration:
        raise FormatError("griddap response is missing its header or units row") from None
    if len(header) != 4 or header[0] != "time":
        raise FormatError(f"line 1: expected time,latitude,longitude,<variable>, got {header}")
    var = var or _guess_var(header[3])
    times, lats, lons, vals = [], [], [], []
    for line_no, rec in enumerate(reader, start=3):
        if not rec:
            continue
        if len(rec) != 4:
            raise FormatError(f"line {line_no}: expected 4 fields, found {len(rec)}")
        try:
            lat, lon = float(rec[1]), float(rec[2])
        except ValueError:
            raise FormatError(f"line {line_no}: bad coordinate") from None
        tok = rec[3].strip()
        if tok in ("NaN", "nan", ""):
            v = math.nan
        else:
            try:
                v = float(tok)
            except ValueError:
                raise FormatError(f"line {line_no}: non-numeric value {tok!r}") from None
            if math.isnan(v):
                raise FormatError(f"line {line_no}: non-numeric value {tok!r}")
        times.append(rec[0])
        lats.append(lat)
        lons.append(lon)
        vals.append(v)
    if not vals:
        raise FormatError("griddap response has no data rows")
    if len(set(times)) != 1:
        raise FormatError("griddap response spans more than one time step")
    lat_axis, dlat = _axis(lats, "latitude")
    lon_axis, dlon = _axis(lons, "longitude")
    nrows, ncols = lat_axis.size, lon_axis.size
    if len(vals) != nrows * ncols:
        raise FormatError(f"{len(vals)} cells do not fill a {nrows}x{ncols} lattice")
    values = np.full((nrows, ncols), np.nan)
    seen = np.zeros((nrows, ncols), dtype=bool)
    i_of = {v: i for i, v in enumerate(lat_axis)}
    j_of = {v: j for j, v in enumerate(lon_axis)}
    for lat, lon, v in zip(lats, lons, vals):
        i, j = i_of[lat], j_of[lon]
        if seen[i, j]:
            raise FormatError(f"duplicate cell at ({lat}, {lon})")
        seen[i, j] = True
        values[i, j] = v
    try:
        start = period_start(dt.date.fromisoformat(times[0][:10]))  # composite containing the stamp
    except ValueError:
        raise FormatError(f"bad time stamp {times[0]!r}") from None
    return GridField(var, float(lat_axis[0]), float(lon_axis[0]), dlat, dlon, nrows, ncols, start, values)


def http_transport(timeout: float = 60.0):
    def fetch(url: str) -> bytes:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.read()
    return fetch


def cached_transport(transport, cache_dir):
    """Wrap ``transport`` with an on-disk cache keyed by the URL's SHA-256."""
    cache_dir = Path(cache_dir)

    def fetch(url: str) -> bytes:
        path = cache_dir / (hashlib.sha256(url.encode("utf-8")).hexdigest() + ".csv")
        if path.exists():
            return path.read_bytes()
        body = transport(url)
        cache_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(body)
        os.replace(tmp, path)
        return body
    return fetch


def fetch_grid(q: GriddapQuery, transport, attempts: int = DEFAULT_ATTEMPTS, backoff: float = 1.0,
               sleep=time.sleep, var: str | None = None):
    """Fetch and parse one griddap tile, retrying transport failures.

    Returns ``(grid, attempts_used)``.
    """
    url = build_url(q)
    last = None
    for attempt in range(1, attempts + 1):
        try:
            body = transport(url)
        except Exception as exc:  # any transport failure is retried
            last = exc
            log.warning("attempt %d/%d for %s failed: %s", attempt, attempts, url, exc)
            if attempt < attempts:
                sleep(backoff * 2 ** (attempt - 1))
            continue
        return parse_griddap_csv(body.decode("utf-8"), var=var), attempt
    raise NetworkError(url, attempts, last)
