import datetime as dt
import re
import urllib.parse
from pathlib import Path

import numpy as np
import pytest

from iuu_seascapes import grid, ingest
from iuu_seascapes.errors import ArgumentError, FormatError, NetworkError
from iuu_seascapes.ingest import GriddapQuery

FIXTURE = Path(__file__).parent / "fixtures" / "erddap_seascape_tile.csv"


def query(**kw):
    base = dict(dataset_id="noaa_aoml_seascapes_8day", variable="CLASS", time="2014-02-18T12:00:00Z",
                lat_range=(-45.0, -44.7), lon_range=(-61.0, -60.6), base_url="https://erddap.example.org/erddap/griddap")
    base.update(kw)
    return GriddapQuery(**base)


def test_golden_url():
    assert ingest.build_url(query()) == (
        "https://erddap.example.org/erddap/griddap/noaa_aoml_seascapes_8day.csv?"
        "CLASS%5B%282014-02-18T12%3A00%3A00Z%29%5D%5B%28-45.0%29%3A1%3A%28-44.7%29%5D%5B%28-61.0%29%3A1%3A%28-60.6%29%5D"
    )
    decoded = urllib.parse.unquote(ingest.build_url(query(stride=2)).split("?")[1])
    assert decoded == "CLASS[(2014-02-18T12:00:00Z)][(-45.0):2:(-44.7)][(-61.0):2:(-60.6)]"


def test_base_url_env_override(monkeypatch):
    monkeypatch.setenv(ingest.BASE_URL_ENV, "http://mirror.local/griddap/")
    assert ingest.build_url(query(base_url=None)).startswith("http://mirror.local/griddap/noaa_aoml")


@pytest.mark.parametrize("kw", [dict(lat_range=(-44.0, -45.0)), dict(lon_range=(1, 0)), dict(stride=0), dict(time="yesterday"), dict(variable="")])
def test_invalid_query(kw):
    with pytest.raises(ArgumentError):
        query(**kw)


def griddap_text(values, lats, lons, time="2014-02-18T12:00:00Z", column="CLASS"):
    lines = [f"time,latitude,longitude,{column}", "UTC,degrees_north,degrees_east,"]
    for i, la in enumerate(lats):
        for j, lo in enumerate(lons):
            v = values[i][j]
            lines.append(f"{time},{la},{lo},{'NaN' if v is None else v}")
    return "\n".join(lines) + "\n"


def test_parse_two_by_two():
    g = ingest.parse_griddap_csv(griddap_text([[1, 2], [3, 4]], [-45.0, -44.5], [-60.0, -59.5]))
    assert g.var == "SEA" and (g.nrows, g.ncols) == (2, 2)
    assert g.values.tolist() == [[1, 2], [3, 4]]
    assert (g.lat0, g.lon0, g.dlat, g.dlon) == (-45.0, -60.0, 0.5, 0.5)


def test_parse_nan_is_missing():
    g = ingest.parse_griddap_csv(griddap_text([[12.5, None]], [-45.0], [-60.0, -59.5], column="sst"), var="SST")
    assert g.values[0, 0] == 12.5 and np.isnan(g.values[0, 1])


def test_ragged_lattice_is_format_error():
    text = griddap_text([[1, 2], [3, 4]], [-45.0, -44.5], [-60.0, -59.5])
    with pytest.raises(FormatError):
        ingest.parse_griddap_csv("\n".join(text.splitlines()[:-1]) + "\n")
    with pytest.raises(FormatError):
        ingest.parse_griddap_csv(griddap_text([[1, 2, 3]], [-45.0], [-60.0, -59.5, -58.0]))


def test_bad_token_is_format_error():
    with pytest.raises(FormatError):
        ingest.parse_griddap_csv(griddap_text([[1, "cloud"]], [-45.0], [-60.0, -59.5]))


def test_fixture_tile_classes_in_range():
    g = ingest.parse_griddap_csv(FIXTURE.read_text())
    present = g.values[~np.isnan(g.values)]
    assert g.var == "SEA" and (g.nrows, g.ncols) == (6, 8)
    assert present.size > 0 and ((present >= 1) & (present <= 30) & (present == np.round(present))).all()
    assert g.period_start == dt.date(2014, 2, 18)
    # north-to-south rows on the wire become south-to-north in memory
    first_wire = FIXTURE.read_text().splitlines()[2].split(",")
    assert float(first_wire[1]) == pytest.approx(g.lat0 + 5 * g.dlat)


def test_grid_csv_bridge_round_trip():
    g = ingest.parse_griddap_csv(FIXTURE.read_text())
    assert grid.parse_grid(grid.format_grid(g)) == g


class FakeServer:
    """Serves strided subsets of a full lattice, like griddap does."""

    def __init__(self, n=6, m=8):
        self.lats = [-45.0 + 0.05 * i for i in range(n)]
        self.lons = [-61.0 + 0.05 * j for j in range(m)]
        self.values = [[7 + (i + j) % 8 for j in range(m)] for i in range(n)]
        self.urls = []

    def __call__(self, url):
        self.urls.append(url)
        q = urllib.parse.unquote(url.split("?", 1)[1])
        s = int(re.findall(r"\):(\d+):\(", q)[0])
        lats, lons = self.lats[::s], self.lons[::s]
        vals = [row[::s] for row in self.values[::s]]
        return griddap_text(vals, [round(x, 6) for x in lats], [round(x, 6) for x in lons]).encode()


def test_stride_two_halves_columns():
    server = FakeServer()
    g1, _ = ingest.fetch_grid(query(), server)
    g2, _ = ingest.fetch_grid(query(stride=2), server)
    assert g1.ncols == 8 and g2.ncols == 4


def test_fetch_canned_transport():
    canned = {ingest.build_url(query()): FIXTURE.read_bytes()}
    g, attempts = ingest.fetch_grid(query(), canned.__getitem__)
    assert attempts == 1 and g.var == "SEA"


def flaky(failures, body):
    calls = []

    def transport(url):
        calls.append(url)
        if len(calls) <= failures:
            raise OSError("connection reset")
        return body
    transport.calls = calls
    return transport


def test_always_failing_transport():
    t = flaky(99, b"")
    sleeps = []
    with pytest.raises(NetworkError) as err:
        ingest.fetch_grid(query(), t, sleep=sleeps.append)
    assert err.value.attempts == 3 and len(t.calls) == 3
    assert err.value.url == ingest.build_url(query())
    assert err.value.exit_code == 4
    assert sleeps == [1.0, 2.0]


def test_fail_twice_then_succeed():
    t = flaky(2, FIXTURE.read_bytes())
    g, attempts = ingest.fetch_grid(query(), t, sleep=lambda s: None)
    assert attempts == 3 and g.nrows == 6


def test_parse_failure_is_not_retried():
    t = flaky(0, b"garbage\n")
    with pytest.raises(FormatError):
        ingest.fetch_grid(query(), t, sleep=lambda s: None)
    assert len(t.calls) == 1


def test_cached_transport(tmp_path):
    server = FakeServer()
    cached = ingest.cached_transport(server, tmp_path / "cache")
    url = ingest.build_url(query())
    assert cached(url) == cached(url)
    assert len(server.urls) == 1
    assert len(list((tmp_path / "cache").glob("*.csv"))) == 1


def test_http_transport_is_blocked_in_tests():
    with pytest.raises(AssertionError, match="network"):
        ingest.http_transport(timeout=1)("https://erddap.example.org/x.csv")
