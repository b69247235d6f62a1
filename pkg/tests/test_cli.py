import json

import pytest

from iuu_seascapes import cli, forest, reports

SMALL_SYNTH = """
seed = 5
[synth]
years = [2012, 2013, 2014]
n_vessels = 60
n_days = 8
seed = 77
[forest]
n_trees = 5
"""


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.toml"
    cfg.write_text(SMALL_SYNTH)
    assert cli.main(["synth", "--config", str(cfg), "--out", str(root / "scn")]) == 0
    return root, cfg


def raw(root):
    s = root / "scn"
    return ["--ais", str(s / "ais.csv"), "--grids", str(s / "grids"), "--eez", str(s / "eez.geojson")]


def test_synth_writes_manifest(small):
    root, _ = small
    doc = json.loads((root / "scn" / "manifest.json").read_text())
    names = {e["name"] for e in doc["artifacts"]}
    assert {"ais.csv", "eez.geojson", "truth.csv", "config.json", "scenario.json"} <= names
    assert json.loads((root / "scn" / "scenario.json").read_text())["seed"] == 77
    for e in doc["artifacts"]:
        assert reports.sha256(root / "scn" / e["name"]) == e["sha256"]


def test_featurize_matches_truth(small):
    root, cfg = small
    out = root / "feat"
    assert cli.main(["featurize", "--config", str(cfg), *raw(root), "--out", str(out)]) == 0
    feats = (out / "features.csv").read_text().splitlines()[1:]
    truth = (root / "scn" / "truth.csv").read_text().splitlines()[1:]
    got = [(f.split(",")[0], f.split(",")[1], f.split(",")[-1]) for f in feats]
    assert got == [tuple(t.split(",")) for t in truth]
    assert "prevalence" in (out / "summary.txt").read_text()


def test_cv_outputs_and_flags_override_config(small):
    root, cfg = small
    out = root / "cv"
    args = ["cv", "--config", str(cfg), *raw(root), "--variable-set", "all,top_five", "--buffer-km", "5",
            "--seed", "11", "--threads", "2", "--out", str(out)]
    assert cli.main(args) == 0
    echo = json.loads((out / "config.json").read_text())
    assert echo["seed"] == 11 and echo["threads"] == 2 and echo["buffer_km"] == [5.0]
    assert echo["forest"] == {"n_trees": 5}
    lines = (out / "folds.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 2 * 2
    assert (out / "table3.txt").exists() and (out / "table_s1.txt").exists()
    assert (out / "pr_all_strict.svg").exists()
    assert len(list((out / "curves").glob("*.csv"))) == sum("NA" not in l for l in lines[1:])


def test_train_then_importance(small):
    root, cfg = small
    assert cli.main(["train", "--config", str(cfg), *raw(root), "--out", str(root / "tr")]) == 0
    model = forest.loads_model((root / "tr" / "model.json").read_text())
    assert model.params.n_trees == 5 and model.params.seed == 5
    out = root / "imp"
    assert cli.main(["importance", "--model", str(root / "tr" / "model.json"), "--out", str(out)]) == 0
    rows = (out / "importance.csv").read_text().splitlines()
    assert rows[0] == "feature,weight" and len(rows) == 1 + model.n_features
    assert abs(sum(float(r.split(",")[1]) for r in rows[1:]) - 1) < 1e-9
    assert (out / "importance_top5.svg").exists()


def test_importance_single_leaf_flag(small):
    root, cfg = small
    out = root / "imp0"
    assert cli.main(["importance", "--config", str(cfg), *raw(root), "--max-depth", "0", "--out", str(out)]) == 0
    text = (out / "importance.csv").read_text()
    assert text.startswith("# importance undefined")
    assert all(float(l.split(",")[1]) == 0.0 for l in text.splitlines()[2:])


def test_importance_without_model_is_usage_error(tmp_path, capsys):
    assert cli.main(["importance", "--out", str(tmp_path)]) == 2
    assert "needs --model" in capsys.readouterr().err


def test_behavior_outputs(small):
    root, cfg = small
    out = root / "beh"
    assert cli.main(["behavior", "--config", str(cfg), *raw(root), "--out", str(out)]) == 0
    assert (out / "transitions.csv").read_text().startswith("seascape_id,seascape_name,count\n")
    maps = sorted(p.name for p in out.glob("map_*.svg"))
    assert len(maps) == 2 and maps[0].startswith("map_max_illegal_") and maps[1].startswith("map_min_illegal_")
    assert all("_n" in m for m in maps)


def test_behavior_empty_illegal_header_only(small, tmp_path):
    root, _ = small
    feats = (root / "feat" / "features.csv").read_text().splitlines()
    legal = [feats[0]] + [l[:-1] + "0" for l in feats[1:]]
    path = tmp_path / "legal.csv"
    path.write_text("\n".join(legal) + "\n")
    out = tmp_path / "beh"
    assert cli.main(["behavior", "--features", str(path), "--grids", str(root / "scn" / "grids"), "--out", str(out)]) == 0
    assert (out / "transitions.csv").read_text() == "seascape_id,seascape_name,count\n"


def test_behavior_without_sea_is_usage_error(small, tmp_path):
    root, _ = small
    grids = tmp_path / "grids"
    grids.mkdir()
    for p in (root / "scn" / "grids").glob("sst_*.csv"):
        (grids / p.name).write_bytes(p.read_bytes())
    code = cli.main(["behavior", "--features", str(root / "feat" / "features.csv"), "--grids", str(grids), "--out", str(tmp_path / "o")])
    assert code == 2


def test_sensitivity(small):
    root, cfg = small
    out = root / "sens"
    assert cli.main(["sensitivity", "--config", str(cfg), *raw(root), "--buffer-km", "2,10", "--out", str(out)]) == 0
    lines = (out / "sensitivity_folds.csv").read_text().splitlines()
    assert {l.split(",")[1] for l in lines[1:]} == {"all/strict", "all/buffer_2km", "all/buffer_10km"}


def test_empty_ais_exit_2(small, tmp_path, capsys):
    root, _ = small
    ais = tmp_path / "ais.csv"
    ais.write_text("mmsi,date,lat,lon,fishing_hours,flag,gear\n")
    args = ["featurize", "--ais", str(ais), "--grids", str(root / "scn" / "grids"),
            "--eez", str(root / "scn" / "eez.geojson"), "--out", str(tmp_path / "o")]
    assert cli.main(args) == 2
    assert "no records" in capsys.readouterr().err


def test_bad_ais_line_context(small, tmp_path, capsys):
    root, _ = small
    ais = tmp_path / "ais.csv"
    ais.write_text("mmsi,date,lat\n1,2,3\n")
    args = ["featurize", "--ais", str(ais), "--grids", str(root / "scn" / "grids"),
            "--eez", str(root / "scn" / "eez.geojson"), "--out", str(tmp_path / "o")]
    assert cli.main(args) == 2
    err = capsys.readouterr().err
    assert str(ais) in err and "line 1" in err


def test_missing_path_and_bad_config(tmp_path):
    assert cli.main(["train", "--features", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [")
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["cv", "--buffer-km", "-1", "--out", str(tmp_path / "o")]) == 2


def test_single_year_cv_is_validation_error(small, tmp_path):
    root, _ = small
    feats = (root / "feat" / "features.csv").read_text().splitlines()
    one = [feats[0]] + [l for l in feats[1:] if ",2012-" in l]
    path = tmp_path / "one.csv"
    path.write_text("\n".join(one) + "\n")
    assert cli.main(["cv", "--features", str(path), "--n-trees", "2", "--out", str(tmp_path / "o")]) == 2


def test_ingest_network_failure_exit_4(tmp_path):
    cfg = tmp_path / "ingest.toml"
    cfg.write_text('[ingest]\nattempts = 1\nbase_url = "https://erddap.example.org/erddap/griddap"\n')
    args = ["ingest", "--config", str(cfg), "--no-cache", "--dataset-id", "x", "--variable", "CLASS",
            "--time", "2014-02-18T00:00:00Z", "--lat-range=-45,-44", "--lon-range=-61,-60", "--out", str(tmp_path / "o")]
    assert cli.main(args) == 4


def test_ingest_from_cache(tmp_path):
    from pathlib import Path
    from iuu_seascapes import ingest
    fixture = Path(__file__).parent / "fixtures" / "erddap_seascape_tile.csv"
    q = ingest.GriddapQuery("x", "CLASS", "2014-02-18T12:00:00Z", (-45.0, -44.7), (-61.0, -60.6),
                            base_url="https://erddap.example.org/erddap/griddap")
    ingest.cached_transport(lambda url: fixture.read_bytes(), tmp_path / "cache")(ingest.build_url(q))
    args = ["ingest", "--dataset-id", "x", "--variable", "CLASS", "--time", "2014-02-18T12:00:00Z",
            "--lat-range=-45.0,-44.7", "--lon-range=-61.0,-60.6", "--cache-dir", str(tmp_path / "cache"),
            "--out", str(tmp_path / "o")]
    cfg = tmp_path / "c.toml"
    cfg.write_text('[ingest]\nbase_url = "https://erddap.example.org/erddap/griddap"\n')
    assert cli.main([*args, "--config", str(cfg)]) == 0
    assert (tmp_path / "o" / "grids" / "sea_2014-02-18.csv").exists()


def test_argparse_usage_error_exits_2():
    with pytest.raises(SystemExit) as err:
        cli.main(["no-such-command"])
    assert err.value.code == 2
