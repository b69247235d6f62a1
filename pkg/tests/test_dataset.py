import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iuu_seascapes import dataset, grid
from iuu_seascapes.dataset import FeatureRow, Mode, VesselDay
from iuu_seascapes.errors import ArgumentError, FormatError, IngestionError, ValidationError
from iuu_seascapes.geo import GeoPoint
from iuu_seascapes.grid import GridField, GridStack

HEADER = "mmsi,date,lat,lon,fishing_hours,flag,gear\n"
D = dt.date(2014, 2, 20)


def vd(flag="CHN", lat=0.5, lon=0.5, hours=3.2, mmsi="1", date=D):
    return VesselDay(mmsi, flag, "squid_jigger", date, GeoPoint(lat, lon), hours)


def ais_lines(n):
    start = dt.date(2014, 2, 10)
    return "".join(
        f"{400000 + k},{start + dt.timedelta(days=k)},-45.{k},-60.{k},{k * 0.5},CHN,squid_jigger\n" for k in range(n))


def test_parse_ten_lines():
    vessels, rejects = dataset.parse_ais_text(HEADER + ais_lines(10))
    assert len(vessels) == 10 and rejects == []
    assert vessels[3].fishing_hours == 1.5
    assert vessels[3].pos == GeoPoint(-45.3, -60.3)


def test_negative_hours_rejected_with_reason():
    text = HEADER + ais_lines(3) + "9,2014-02-01,-45,-60,-1,CHN,trawler\n"
    vessels, rejects = dataset.parse_ais_text(text, max_reject_fraction=0.5)
    assert len(vessels) == 3
    assert rejects[0].line_no == 5 and "fishing_hours" in rejects[0].reason
    assert dataset.format_rejects(rejects).startswith("line_no,reason\n5,")


def test_reject_fraction_limit():
    text = HEADER + ais_lines(50) + "x,not-a-date,0,0,1,CHN,trawler\n"
    with pytest.raises(IngestionError, match="line 52"):
        dataset.parse_ais_text(text)
    assert len(dataset.parse_ais_text(text, max_reject_fraction=0.05)[1]) == 1


@pytest.mark.parametrize("flag", ["", "UNK", "XX", "nan", "CHINA"])
def test_unknown_flags_rejected(flag):
    text = HEADER + f"1,2014-02-01,-45,-60,1,{flag},trawler\n"
    with pytest.raises(IngestionError):
        dataset.parse_ais_text(text)


def test_missing_header_and_empty():
    with pytest.raises(FormatError):
        dataset.parse_ais_text("")
    with pytest.raises(FormatError):
        dataset.parse_ais_text(ais_lines(2))
    with pytest.raises(ValidationError):
        dataset.parse_ais_text(HEADER)


def test_window_rejects_outside_dates():
    window = (dt.date(2014, 2, 1), dt.date(2014, 2, 15))
    vessels, rejects = dataset.parse_ais_text(HEADER + ais_lines(10), window=window, max_reject_fraction=1.0)
    assert len(vessels) == 6 and len(rejects) == 4


def test_ais_round_trip():
    vessels, _ = dataset.parse_ais_text(HEADER + ais_lines(10))
    assert dataset.parse_ais_text(dataset.format_ais(vessels))[0] == vessels


@pytest.mark.parametrize("v,y", [
    (vd(), 1),
    (vd(flag="ARG", hours=5), 0),
    (vd(hours=0), 0),
    (vd(lat=2, lon=2), 0),
])
def test_strict_labels(unit_square, v, y):
    assert dataset.label_vessel_day(v, unit_square) == y


def test_buffer_labels(unit_square):
    near = vd(lat=0.5, lon=3 / 111.195)
    deep = vd(lat=0.5, lon=0.5)
    assert dataset.label_vessel_day(near, unit_square, Mode(5)) == 1
    assert dataset.label_vessel_day(near, unit_square, Mode(2)) is None
    assert dataset.label_vessel_day(deep, unit_square, Mode(10)) is None
    assert dataset.label_vessel_day(vd(flag="ARG"), unit_square, Mode(10)) == 0
    assert dataset.label_vessel_day(vd(lat=3, lon=3), unit_square, Mode(10)) == 0


def test_mode_parse_and_names():
    assert Mode.parse("strict") == dataset.STRICT
    assert Mode.parse("5km") == Mode(5.0)
    assert Mode(2).name == "buffer_2km" and Mode(2.5).name == "buffer_2.5km"
    with pytest.raises(ArgumentError):
        Mode(0)


def stacks_at(lat0, lon0):
    g = lambda var, v: GridField(var, lat0, lon0, 0.25, 0.25, 2, 2, grid.period_start(D), np.array(v, dtype=float))
    return {
        "SST": GridStack([g("SST", [[12.5, 13.0], [np.nan, 14.0]])]),
        "CHL": GridStack([g("CHL", [[0.3, 0.4], [0.5, 0.6]])]),
        "SEA": GridStack([g("SEA", [[14, 7], [12, 2]])]),
    }


def test_build_features_hand_row(unit_square):
    stacks = stacks_at(0.25, 0.25)
    row = dataset.build_features(vd(lat=0.25, lon=0.5), stacks, unit_square)
    assert row == FeatureRow(
        mmsi="1", date=D, sst=13.0, chl=0.4, sea=7, lat=0.25, lon=0.5,
        inside_eez=1, dist_eez_km=row.dist_eez_km, month=2, label=1,
    )
    assert abs(row.dist_eez_km - 0.25 * 111.195) < 0.05
    assert dataset.build_features(vd(lat=0.5, lon=0.25), stacks, unit_square).sst is None


def test_build_features_outside_raster(unit_square):
    row = dataset.build_features(vd(lat=5, lon=5), stacks_at(0.25, 0.25), unit_square)
    assert row.sst is None and row.chl is None and row.sea is None
    assert row.inside_eez == 0 and row.label == 0


def test_drop_zero_hours(unit_square):
    vs = [vd(hours=0, mmsi="a"), vd(mmsi="b")]
    assert len(dataset.build_feature_rows(vs, {}, unit_square)) == 2
    assert [r.mmsi for r in dataset.build_feature_rows(vs, {}, unit_square, drop_zero_hours=True)] == ["b"]


def frow(**kw):
    base = dict(mmsi="1", date=D, sst=10.0, chl=0.5, sea=7, lat=-45.0, lon=-60.0,
                inside_eez=0, dist_eez_km=12.0, month=2, label=0)
    base.update(kw)
    return FeatureRow(**base)


def test_encode_one_hot_and_imputation():
    rows = [frow(sea=14, sst=None), frow(sea=7, sst=10.0), frow(sea=None, sst=14.0, month=3)]
    m = dataset.encode(rows, "all")
    col = {n: i for i, n in enumerate(m.feature_names)}
    assert m.rows[0, col["sea_14"]] == 1 and m.rows[0, col["sea_7"]] == 0
    assert m.rows[0, col["sst"]] == 12.0 and m.rows[0, col["sst_missing"]] == 1
    assert m.rows[2, col["sea_missing"]] == 1 and m.rows[2, col["month_3"]] == 1
    sea_cols = [i for n, i in col.items() if n.startswith("sea_") and n != "sea_missing"]
    month_cols = [i for n, i in col.items() if n.startswith("month_")]
    assert (m.rows[:, sea_cols].sum(axis=1) <= 1).all()
    assert (m.rows[:, month_cols].sum(axis=1) <= 1).all()


def test_variable_set_columns():
    rows = [frow(sea=14), frow(sea=7, month=3)]
    assert dataset.encode(rows, "top_five").feature_names == ["sst", "sst_missing", "chl", "chl_missing", "lat", "lon", "inside_eez"]
    assert dataset.encode(rows, "ocean_only").feature_names == [
        "sst", "sst_missing", "chl", "chl_missing", "sea_7", "sea_14", "sea_missing", "month_2", "month_3"]
    with pytest.raises(ArgumentError):
        dataset.encode([], "all")
    with pytest.raises(ArgumentError):
        dataset.encode(rows, "everything")


def test_training_medians_applied_to_test():
    train = [frow(sst=1.0), frow(sst=3.0)]
    enc = dataset.Encoder.fit(train, "all")
    test = enc.transform([frow(sst=None, sea=21)])
    assert test.rows[0, 0] == 2.0
    assert "sea_21" not in test.feature_names


rows_st = st.lists(st.builds(
    FeatureRow,
    mmsi=st.sampled_from(["1", "2", "3"]),
    date=st.dates(dt.date(2012, 1, 1), dt.date(2016, 12, 31)),
    sst=st.one_of(st.none(), st.floats(-2, 30)),
    chl=st.one_of(st.none(), st.floats(0, 20)),
    sea=st.one_of(st.none(), st.integers(1, 30)),
    lat=st.floats(-50, -38), lon=st.floats(-66, -54),
    inside_eez=st.integers(0, 1), dist_eez_km=st.floats(0, 500),
    month=st.integers(1, 12), label=st.integers(0, 1),
), min_size=1, max_size=20)


@settings(max_examples=100, deadline=None)
@given(rows_st)
def test_decode_inverts_encode(rows):
    enc = dataset.Encoder.fit(rows, "all")
    m = enc.transform(rows)
    for r, vec in zip(rows, m.rows):
        got = enc.decode(vec)
        want = {k: getattr(r, k) for k in ("sst", "chl", "sea", "lat", "lon", "dist_eez_km", "inside_eez", "month")
                if getattr(r, k) is not None}
        assert got == want


@settings(max_examples=100, deadline=None)
@given(rows_st)
def test_features_file_round_trip(rows):
    assert dataset.parse_features(dataset.format_features(rows)) == rows


def test_split_by_year_five_folds():
    years = np.repeat([2012, 2013, 2014, 2015, 2016], [3, 1, 4, 2, 5])
    folds = dataset.split_by_year(years)
    assert [f.year for f in folds] == [2012, 2013, 2014, 2015, 2016]
    tests = np.concatenate([f.test for f in folds])
    assert sorted(tests.tolist()) == list(range(years.size))
    for f in folds:
        assert not set(years[f.train]) & set(years[f.test])
        assert len(f.train) + len(f.test) == years.size
    with pytest.raises(ValidationError):
        dataset.split_by_year([2012, 2012])


def test_summary_sentence():
    rows = [frow(mmsi="a", label=1), frow(mmsi="a"), frow(mmsi="b"), frow(mmsi="c", sst=None)]
    s = dataset.summarize(rows)
    assert s["prevalence"] == 0.25 and s["missing_rate"]["sst"] == 0.25
    text = dataset.format_summary(s)
    assert text.startswith("4 observations, 2 unique vessels operating legally, and 1 unique fishing vessels operating illegally")


def test_source_variable():
    assert [dataset.source_variable(n) for n in ("sst_missing", "sea_14", "month_3", "inside_eez", "dist_eez_km")] == [
        "SST", "SEA", "MONTH", "I-EEZ", "D-EEZ"]
