"""Behavioral analyses: legal-to-illegal seascape transitions and bloom area vs. incursions."""
from __future__ import annotations

import datetime as dt
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from scipy.stats import spearmanr

from . import plots
from .errors import ArgumentError
from .grid import BLOOM_UPWELLING, GridStack, seascape_area, seascape_name


@dataclass(frozen=True)
class TransitionCount:
    target_seascape: int
    count: int

    @property
    def name(self) -> str:
        return seascape_name(self.target_seascape)


@dataclass
class TransitionSummary:
    counts: list
    pairs: int = 0
    skipped_missing: int = 0

    def as_dict(self) -> dict:
        return {c.target_seascape: c.count for c in self.counts}

    def __iter__(self):
        return iter(self.counts)


def _one_per_day(rows):
    """Collapse each (mmsi, date) to one record, preferring an illegal row."""
    chosen = {}
    for r in sorted(rows, key=lambda r: (r.mmsi, r.date, -r.label, r.lat, r.lon)):
        chosen.setdefault((r.mmsi, r.date), r)
    return chosen


def transitions(rows, unique_vessels=False) -> TransitionSummary:
    """Count vessels that are legal outside seascape S one day and illegal inside S the next.

    Only calendar-consecutive days of the same vessel form a pair. Pairs where
    either day's seascape is missing are skipped and counted in
    ``skipped_missing``. With ``unique_vessels`` each vessel counts at most once
    per target seascape.
    """
    days = _one_per_day(rows)
    events = Counter()
    vessels = defaultdict(set)
    pairs = skipped = 0
    one = dt.timedelta(days=1)
    for (mmsi, d), today in days.items():
        nxt = days.get((mmsi, d + one))
        if nxt is None:
            continue
        pairs += 1
        if today.sea is None or nxt.sea is None:
            skipped += 1
            continue
        if today.label == 0 and nxt.label == 1 and today.sea != nxt.sea:
            events[nxt.sea] += 1
            vessels[nxt.sea].add(mmsi)
    if unique_vessels:
        counts = [TransitionCount(s, len(v)) for s, v in sorted(vessels.items())]
    else:
        counts = [TransitionCount(s, n) for s, n in sorted(events.items())]
    return TransitionSummary(counts, pairs, skipped)


@dataclass(frozen=True)
class DailySeries:
    date: dt.date
    seascape_cells: int
    seascape_km2: float
    illegal_count: int


@dataclass
class AreaSeries:
    days: list
    class_id: int
    spearman: float | None = None
    by_date: dict = field(default_factory=dict, repr=False)


def area_vs_illegal(sea_stack: GridStack, rows, class_id: int = BLOOM_UPWELLING) -> AreaSeries:
    """Daily area of seascape ``class_id`` next to that day's illegal row count.

    A day is included when it has rows and its 8-day composite is in the stack.
    """
    if sea_stack.var != "SEA":
        raise ArgumentError("area_vs_illegal needs a SEA stack")
    dates = sorted({r.date for r in rows})
    covered = [d for d in dates if sea_stack.exact_field(d) is not None]
    if not covered:
        raise ArgumentError("rows and seascape stack do not overlap in time")
    illegal = Counter(r.date for r in rows if r.label == 1)
    days = []
    for d in covered:
        cells, km2 = seascape_area(sea_stack.exact_field(d), class_id)
        days.append(DailySeries(d, cells, km2, illegal.get(d, 0)))
    rho = None
    area = [x.seascape_km2 for x in days]
    counts = [x.illegal_count for x in days]
    # undefined for fewer than 3 days or a constant series
    if len(days) >= 3 and len(set(area)) > 1 and len(set(counts)) > 1:
        rho = float(spearmanr(area, counts).statistic)
    return AreaSeries(days, class_id, rho, {x.date: x for x in days})


def snapshot_map(sea_stack: GridStack, rows, date: dt.date, class_id: int = BLOOM_UPWELLING, eez=None) -> str:
    """SVG map for one day: seascape cells, legal (black) and illegal (red) vessels, EEZ line."""
    g = sea_stack.exact_field(date)
    if g is None:
        raise ArgumentError(f"no seascape composite covers {date}")
    today = [r for r in rows if r.date == date]
    legal = [(r.lat, r.lon) for r in today if r.label == 0]
    illegal = [(r.lat, r.lon) for r in today if r.label == 1]
    rings = []
    if eez is not None:
        rings = [[(p.lat, p.lon) for p in ring] for ring in eez.rings]
    title = f"{date.isoformat()}: {seascape_name(class_id)} (n illegal = {len(illegal)})"
    return plots.seascape_map(g, class_id, legal, illegal, rings, title=title)


def format_transitions(summary: TransitionSummary) -> str:
    lines = ["seascape_id,seascape_name,count"]
    for c in summary.counts:
        lines.append(f'{c.target_seascape},"{c.name}",{c.count}')
    return "\n".join(lines) + "\n"


def format_daily_series(series: AreaSeries) -> str:
    lines = ["date,seascape_cells,seascape_km2,illegal_count"]
    for x in series.days:
        lines.append(f"{x.date.isoformat()},{x.seascape_cells},{x.seascape_km2:.3f},{x.illegal_count}")
    return "\n".join(lines) + "\n"
