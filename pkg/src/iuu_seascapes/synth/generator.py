"""Synthetic Patagonia-like scenario with a planted illegal-fishing mechanism.

A patch of seascape 14 drifts back and forth across the EEZ line, one state
per 8-day composite. Chinese vessels fish outside the line but enter the EEZ
(into the patch) with a probability that grows with the share of the patch
lying inside the EEZ. The patch shrinks as it moves inside, so a small bloom
area coincides with many incursions.

Ground truth is computed from the generator's own knowledge of which side of
the line each position was placed on, not from the ``geo`` module.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import VesselDay, format_ais
from ..geo import EezGeometry, GeoPoint, eez_to_geojson
from ..grid import BLOOM_UPWELLING, GridField, period_start, write_grid

KM_PER_DEG = 111.195
# Minimum east-west clearance between a vessel and the EEZ line, in degrees.
LINE_MARGIN_DEG = 0.005

# South-to-north EEZ line vertices (lat, lon); the zigzag makes the polygon nonconvex.
EEZ_LINE = (
    (-49.0, -59.2), (-48.0, -58.6), (-47.0, -59.3), (-46.0, -58.8), (-45.0, -58.2),
    (-44.0, -58.9), (-43.0, -58.5), (-42.0, -57.9), (-41.0, -58.4), (-40.0, -57.8), (-39.0, -58.1),
)
EEZ_WEST_LON = -70.0

FOREIGN_FLAGS = ("KOR", "TWN", "ESP")


@dataclass
class ScenarioConfig:
    years: tuple = (2012, 2013, 2014, 2015, 2016)
    n_vessels: int = 200
    frac_chinese: float = 0.3
    frac_argentine: float = 0.15
    season_start: tuple = (2, 14)  # month, day
    n_days: int = 20
    lat_range: tuple = (-48.0, -40.0)
    lon_range: tuple = (-64.0, -56.0)
    cell_deg: float = 0.2
    patch_radius_km: float = 120.0
    patch_shrink: float = 0.4  # fractional radius loss when fully inside
    patch_max_offset_km: float = 100.0
    incursion_base: float = 0.02
    incursion_gain: float = 0.2
    incursion_depth_km: float = 25.0
    zero_hour_rate: float = 0.01
    cloud_fraction: float = 0.1
    sea_missing_fraction: float = 0.03
    seed: int = 20240101

    def __post_init__(self):
        for name in ("frac_chinese", "frac_argentine", "zero_hour_rate", "cloud_fraction", "sea_missing_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.frac_chinese + self.frac_argentine > 1.0:
            raise ValueError("frac_chinese + frac_argentine exceeds 1")
        if len(self.years) < 2:
            raise ValueError("at least two years are needed for blocked CV")


@dataclass
class Scenario:
    vessels: list
    grids: dict  # var -> list of GridField
    eez: EezGeometry
    truth: list  # (mmsi, date, y)
    period_info: list = field(default_factory=list)


def line_lon(lat):
    lats = [p[0] for p in EEZ_LINE]
    lons = [p[1] for p in EEZ_LINE]
    return np.interp(lat, lats, lons)


def eez_geometry() -> EezGeometry:
    south, north = EEZ_LINE[0][0], EEZ_LINE[-1][0]
    ring = [GeoPoint(lat, lon) for lat, lon in EEZ_LINE]
    ring += [GeoPoint(north, EEZ_WEST_LON), GeoPoint(south, EEZ_WEST_LON), ring[0]]
    return EezGeometry(tuple([tuple(ring)]), "synthetic_eez")


def _season_dates(cfg, year):
    start = dt.date(year, *cfg.season_start)
    return [start + dt.timedelta(days=k) for k in range(cfg.n_days)]


def _lattice(cfg):
    d = cfg.cell_deg
    nrows = int(round((cfg.lat_range[1] - cfg.lat_range[0]) / d))
    ncols = int(round((cfg.lon_range[1] - cfg.lon_range[0]) / d))
    lat0 = cfg.lat_range[0] + d / 2
    lon0 = cfg.lon_range[0] + d / 2
    lats = lat0 + d * np.arange(nrows)
    lons = lon0 + d * np.arange(ncols)
    return lat0, lon0, nrows, ncols, lats, lons


def _background_sea(cfg, lats, lons, rng):
    la, lo = np.meshgrid(lats, lons, indexing="ij")
    sea = np.full(la.shape, 7.0)
    sea[la < -45.5] = 12.0
    sea[la > -42.0] = 2.0
    sea[lo < -62.0] = 19.0
    noise = rng.random(la.shape)
    sea[(noise < 0.04)] = 1.0
    sea[(noise > 0.97) & (la > -44)] = 17.0
    sea[(noise > 0.985)] = 21.0
    return sea, la, lo


def _patch(cfg, rng):
    u = rng.uniform(-1.0, 1.0)
    inside_factor = (1.0 - u) / 2.0
    radius = cfg.patch_radius_km * (1.0 - cfg.patch_shrink * inside_factor)
    c_lat = rng.uniform(-46.5, -41.5)
    offset_km = u * cfg.patch_max_offset_km
    c_lon = float(line_lon(c_lat)) + offset_km / (KM_PER_DEG * math.cos(math.radians(c_lat)))
    return c_lat, c_lon, radius


def generate(cfg: ScenarioConfig) -> Scenario:
    rng = np.random.default_rng(cfg.seed)
    lat0, lon0, nrows, ncols, lats, lons = _lattice(cfg)
    eez = eez_geometry()

    n_chn = int(round(cfg.n_vessels * cfg.frac_chinese))
    n_arg = int(round(cfg.n_vessels * cfg.frac_argentine))
    fleet = []
    for k in range(cfg.n_vessels):
        if k < n_chn:
            flag, mmsi = "CHN", f"412{k:06d}"
            gear = rng.choice(["squid_jigger", "trawler", "other"], p=[0.81, 0.15, 0.04])
        elif k < n_chn + n_arg:
            flag, mmsi = "ARG", f"701{k:06d}"
            gear = rng.choice(["trawler", "squid_jigger"], p=[0.7, 0.3])
        else:
            flag = FOREIGN_FLAGS[k % len(FOREIGN_FLAGS)]
            mmsi = {"KOR": "440", "TWN": "416", "ESP": "224"}[flag] + f"{k:06d}"
            gear = rng.choice(["squid_jigger", "trawler", "drifting_longline"], p=[0.6, 0.3, 0.1])
        fleet.append((mmsi, flag, str(gear)))

    grids = {"SST": [], "CHL": [], "SEA": []}
    vessels, truth, period_info = [], [], []
    for year in cfg.years:
        dates = _season_dates(cfg, year)
        periods = sorted({period_start(d) for d in dates})
        state = {}
        for p_start in periods:
            sea, la, lo = _background_sea(cfg, lats, lons, rng)
            c_lat, c_lon, radius = _patch(cfg, rng)
            dy = (la - c_lat) * KM_PER_DEG
            dx = (lo - c_lon) * KM_PER_DEG * np.cos(np.radians(la))
            in_patch = dx * dx + dy * dy <= radius * radius
            sea[in_patch] = BLOOM_UPWELLING
            sea_missing = rng.random(sea.shape) < cfg.sea_missing_fraction
            sea[sea_missing] = np.nan

            sst = 4.0 + 0.9 * (la + 48.0) + rng.normal(0.0, 1.0, la.shape) - 0.6 * in_patch
            chl = np.exp(rng.normal(math.log(0.5), 0.5, la.shape)) * np.where(in_patch, 1.3, 1.0)
            sst[rng.random(la.shape) < cfg.cloud_fraction] = np.nan
            chl[rng.random(la.shape) < cfg.cloud_fraction] = np.nan

            for var, values in (("SST", sst), ("CHL", chl), ("SEA", sea)):
                grids[var].append(GridField(var, lat0, lon0, cfg.cell_deg, cfg.cell_deg, nrows, ncols, p_start, values))

            cell_inside = lo < line_lon(la)
            bloom = sea == BLOOM_UPWELLING
            share_in = float((bloom & cell_inside).sum() / bloom.sum()) if bloom.any() else 0.0
            # candidate incursion cells: bloom, inside, close to the line
            depth_km = (line_lon(la) - lo) * KM_PER_DEG * np.cos(np.radians(la))
            cand = np.argwhere(bloom & cell_inside & (depth_km <= cfg.incursion_depth_km))
            state[p_start] = (share_in, cand)
            period_info.append({
                "period_start": p_start.isoformat(), "share_inside": share_in,
                "bloom_cells": int(bloom.sum()), "radius_km": radius,
            })

        for d in dates:
            share_in, cand = state[period_start(d)]
            p_inc = cfg.incursion_base + cfg.incursion_gain * share_in
            for mmsi, flag, gear in fleet:
                hours = 0.0 if rng.random() < cfg.zero_hour_rate else float(np.round(rng.uniform(1.0, 20.0), 2))
                if flag == "ARG":
                    lat, lon = _deep_inside(cfg, rng)
                    inside = True
                elif flag == "CHN" and rng.random() < p_inc:
                    lat, lon = _incursion(cfg, rng, cand)
                    inside = True
                else:
                    lat, lon = _outside(cfg, rng)
                    inside = False
                vessels.append(VesselDay(mmsi, flag, gear, d, GeoPoint(lat, lon), hours))
                truth.append((mmsi, d, int(flag == "CHN" and inside and hours > 0)))
    return Scenario(vessels, grids, eez, truth, period_info)


def _clamp_lon(cfg, lon):
    return float(min(max(lon, cfg.lon_range[0] + 1e-6), cfg.lon_range[1] - 1e-6))


def _outside(cfg, rng):
    lat = float(rng.uniform(cfg.lat_range[0] + 0.05, cfg.lat_range[1] - 0.05))
    depth_km = 0.5 + rng.exponential(40.0)
    base = float(line_lon(lat))
    lon = base + max(depth_km / (KM_PER_DEG * math.cos(math.radians(lat))), LINE_MARGIN_DEG)
    lon = _clamp_lon(cfg, lon)
    if lon - base < LINE_MARGIN_DEG:
        lon = base + LINE_MARGIN_DEG
    return lat, lon


def _deep_inside(cfg, rng):
    lat = float(rng.uniform(cfg.lat_range[0] + 0.05, cfg.lat_range[1] - 0.05))
    depth_km = rng.uniform(80.0, 250.0)
    lon = float(line_lon(lat)) - depth_km / (KM_PER_DEG * math.cos(math.radians(lat)))
    return lat, _clamp_lon(cfg, lon)


def _incursion(cfg, rng, cand):
    lat0, lon0, *_ = _lattice(cfg)
    for _ in range(50):
        if len(cand):
            i, j = cand[rng.integers(len(cand))]
            lat = lat0 + cfg.cell_deg * (i + rng.uniform(-0.45, 0.45))
            lon = lon0 + cfg.cell_deg * (j + rng.uniform(-0.45, 0.45))
        else:
            lat = float(rng.uniform(cfg.lat_range[0] + 0.05, cfg.lat_range[1] - 0.05))
            depth_km = rng.uniform(0.5, cfg.incursion_depth_km)
            lon = float(line_lon(lat)) - depth_km / (KM_PER_DEG * math.cos(math.radians(lat)))
        if float(line_lon(lat)) - lon >= LINE_MARGIN_DEG:
            return float(lat), float(lon)
    lat = float(rng.uniform(cfg.lat_range[0] + 0.05, cfg.lat_range[1] - 0.05))
    return lat, float(line_lon(lat)) - 0.05


def format_truth(truth) -> str:
    lines = ["mmsi,date,y"] + [f"{m},{d.isoformat()},{y}" for m, d, y in truth]
    return "\n".join(lines) + "\n"


def write_scenario(s: Scenario, out_dir) -> dict:
    """Write AIS-CSV, Grid-CSV files, EEZ GeoJSON and ground truth under ``out_dir``."""
    out = Path(out_dir)
    (out / "grids").mkdir(parents=True, exist_ok=True)
    paths = {
        "ais": out / "ais.csv",
        "eez": out / "eez.geojson",
        "truth": out / "truth.csv",
        "grids": out / "grids",
    }
    paths["ais"].write_bytes(format_ais(s.vessels).encode("utf-8"))
    paths["eez"].write_bytes(eez_to_geojson(s.eez).encode("utf-8"))
    paths["truth"].write_bytes(format_truth(s.truth).encode("utf-8"))
    for var, fields in s.grids.items():
        for g in fields:
            write_grid(g, out / "grids" / f"{var.lower()}_{g.period_start.isoformat()}.csv")
    return paths


def config_dict(cfg: ScenarioConfig) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()}
