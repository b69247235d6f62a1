"""Command-line entry point: ``iuu-seascapes <command> [options]``.

Every command writes into one run directory (``--out``), echoes its effective
configuration as ``config.json`` and finishes with ``manifest.json`` listing
each artifact with its SHA-256. Exit codes: 0 success, 2 input or validation
error, 3 training or evaluation error, 4 network error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

from . import __version__, behavior, dataset, evaluation, forest, geo, grid, ingest, plots, reports, synth
from .errors import PipelineError, UsageError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("iuu_seascapes")

DEFAULT_BUFFERS = (2.0, 5.0, 10.0)
FOREST_KEYS = {f.name for f in dc_fields(forest.ForestParams)} - {"seed"}


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _list_of(value, kind, name):
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in (s.strip() for s in value.split(",")) if v]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return [kind(v) for v in value]
    except (TypeError, ValueError):
        raise UsageError(f"{name}: cannot parse {value!r}") from None


def effective_config(args) -> dict:
    """Merge the config file with command-line flags; flags win."""
    cfg = load_config(args.config)
    forest_cfg = dict(cfg.pop("forest", {}))
    for key in ("ais", "grids", "eez", "features", "model"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = str(v)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    cfg["threads"] = int(cfg.get("threads") or os.cpu_count() or 1)
    if args.variable_set is not None:
        cfg["variable_set"] = args.variable_set
    if args.buffer_km is not None:
        cfg["buffer_km"] = args.buffer_km
    cfg["buffer_km"] = _list_of(cfg.get("buffer_km", list(DEFAULT_BUFFERS)), float, "buffer_km")
    if any(b <= 0 for b in cfg["buffer_km"]):
        raise UsageError(f"buffer_km values must be > 0, got {cfg['buffer_km']}")
    if args.no_cache:
        cfg["no_cache"] = True
    for key in FOREST_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            forest_cfg[key] = v
    unknown = set(forest_cfg) - FOREST_KEYS
    if unknown:
        raise UsageError(f"unknown [forest] keys: {sorted(unknown)}")
    cfg["forest"] = forest_cfg
    return cfg


def forest_params(cfg) -> forest.ForestParams:
    return forest.ForestParams(seed=int(cfg.get("seed", 0)), **cfg["forest"])


def variable_sets(cfg, default):
    sets = _list_of(cfg.get("variable_set", list(default)), str, "variable_set")
    bad = [s for s in sets if s not in dataset.VARIABLE_SETS]
    if bad or not sets:
        raise UsageError(f"variable_set must be drawn from {dataset.VARIABLE_SETS}, got {sets}")
    return sets


# ---------------------------------------------------------------- inputs

def _path(cfg, key, required=True):
    v = cfg.get(key)
    if v is None:
        if required:
            raise UsageError(f"--{key} (or '{key}' in the config file) is required")
        return None
    p = Path(v)
    if not p.exists():
        raise UsageError(f"{key} path does not exist: {p}")
    return p


def _has_raw(cfg):
    return all(cfg.get(k) for k in ("ais", "grids", "eez"))


class Inputs:
    """Lazily loaded raw inputs shared across modes within one command."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._vessels = self._rejects = self._grids = self._eez = None

    @property
    def vessels(self):
        if self._vessels is None:
            self._vessels, self._rejects = dataset.parse_ais_csv(_path(self.cfg, "ais"))
        return self._vessels

    @property
    def rejects(self):
        self.vessels
        return self._rejects

    @property
    def grids(self):
        if self._grids is None:
            self._grids = grid.load_grid_dir(_path(self.cfg, "grids"))
        return self._grids

    @property
    def eez(self):
        if self._eez is None:
            self._eez = geo.load_eez(_path(self.cfg, "eez"))
        return self._eez

    def rows(self, mode: dataset.Mode):
        return dataset.build_feature_rows(self.vessels, self.grids, self.eez, mode)


def _feature_rows(cfg, inputs):
    """Rows from ``--features`` if given, else built in strict mode from raw inputs."""
    path = _path(cfg, "features", required=False)
    if path is not None:
        try:
            return dataset.parse_features(path.read_text(encoding="utf-8"))
        except PipelineError as exc:
            raise type(exc)(f"{path}: {exc}") from None
    if not _has_raw(cfg):
        raise UsageError("provide --features, or all of --ais, --grids and --eez")
    return inputs.rows(dataset.STRICT)


# ---------------------------------------------------------------- run directory

class RunDir:
    def __init__(self, out, cfg, command):
        if out is None:
            raise UsageError("--out is required")
        self.root = Path(out)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written = []
        echo = {"command": command, "version": __version__, **cfg}
        self.write("config.json", json.dumps(echo, indent=1, sort_keys=True, default=str) + "\n")

    def write(self, name, data):
        path = reports.atomic_write(self.root / name, data)
        self.written.append(name)
        return path

    def close(self):
        reports.write_manifest(self.root)


# ---------------------------------------------------------------- commands

def cmd_synth(cfg, run):
    overrides = dict(cfg.get("synth", {}))
    if cfg.get("seed") is not None:
        overrides.setdefault("seed", cfg["seed"])
    valid = {f.name for f in dc_fields(synth.ScenarioConfig)}
    unknown = set(overrides) - valid
    if unknown:
        raise UsageError(f"unknown [synth] keys: {sorted(unknown)}")
    for key in ("years", "season_start", "lat_range", "lon_range"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    try:
        scfg = synth.ScenarioConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"[synth]: {exc}") from None
    scenario = synth.generate(scfg)
    synth.write_scenario(scenario, run.root)
    run.write("scenario.json", json.dumps(synth.generator.config_dict(scfg), indent=1, sort_keys=True) + "\n")
    print(f"wrote scenario with {len(scenario.vessels)} vessel-days to {run.root}")


def cmd_featurize(cfg, run):
    inputs = Inputs(cfg)
    mode = dataset.Mode.parse(cfg.get("mode", "strict"))
    rows = inputs.rows(mode)
    summary = dataset.summarize(rows, inputs.rejects)
    run.write("features.csv", dataset.format_features(rows))
    run.write("rejects.csv", dataset.format_rejects(inputs.rejects))
    run.write("summary.txt", dataset.format_summary(summary))
    sys.stdout.write(dataset.format_summary(summary))


def _modes(cfg, inputs, with_buffers):
    """``(mode name, rows)`` pairs: strict first, then each buffer."""
    if not _has_raw(cfg):
        if cfg.get("features") is None:
            raise UsageError("provide --features, or all of --ais, --grids and --eez")
        if with_buffers and cfg["buffer_km"]:
            log.warning("buffer modes need raw inputs (--ais/--grids/--eez); running strict only")
        yield "strict", _feature_rows(cfg, inputs)
        return
    yield "strict", inputs.rows(dataset.STRICT)
    if with_buffers:
        for b in cfg["buffer_km"]:
            mode = dataset.Mode(b)
            yield mode.name, inputs.rows(mode)


def _run_cv(cfg, run, sets, with_buffers, prefix=""):
    inputs = Inputs(cfg)
    params = forest_params(cfg)
    all_reports = []
    for mode_name, rows in _modes(cfg, inputs, with_buffers):
        for vs in sets:
            reps = evaluation.block_cv(rows, params, vs, mode_name, threads=cfg["threads"])
            all_reports.extend(reps)
            for r in reps:
                if r.curve is not None:
                    run.write(f"curves/{vs}_{mode_name}_{r.test_year}.csv", reports.format_curve_csv(r.curve))
            title = f"Precision-recall by test year: {reports.VARIANT_TITLES[vs]}, {mode_name}"
            run.write(f"pr_{vs}_{mode_name}.svg", reports.pr_plot(reps, title))
            log.info("cv %s/%s done", vs, mode_name)
    run.write(f"{prefix}folds.csv", reports.format_fold_csv(all_reports))
    table3 = reports.format_table3(all_reports)
    run.write(f"{prefix}table3.txt", table3)
    run.write(f"{prefix}table_s1.txt", reports.format_table_s1(all_reports))
    sys.stdout.write(table3)
    return all_reports


def cmd_cv(cfg, run):
    _run_cv(cfg, run, variable_sets(cfg, dataset.VARIABLE_SETS), with_buffers=True)


def cmd_sensitivity(cfg, run):
    if not _has_raw(cfg):
        raise UsageError("sensitivity relabels vessel-days and needs --ais, --grids and --eez")
    if not cfg["buffer_km"]:
        raise UsageError("sensitivity needs at least one --buffer-km value")
    _run_cv(cfg, run, variable_sets(cfg, ["all"]), with_buffers=True, prefix="sensitivity_")


def _train(cfg, rows):
    sets = variable_sets(cfg, ["all"])
    if len(sets) != 1:
        raise UsageError(f"train/importance take a single --variable-set, got {sets}")
    enc = dataset.Encoder.fit(rows, sets[0])
    m = enc.transform(rows)
    return enc, forest.train_forest(m.rows, m.labels, forest_params(cfg), m.feature_names, threads=cfg["threads"])


def _encoder_json(enc) -> str:
    doc = {
        "variable_set": enc.variable_set, "sst_median": enc.sst_median, "chl_median": enc.chl_median,
        "sea_classes": list(enc.sea_classes), "months": list(enc.months), "feature_names": enc.feature_names,
    }
    return json.dumps(doc, indent=1) + "\n"


def cmd_train(cfg, run):
    rows = _feature_rows(cfg, Inputs(cfg))
    enc, model = _train(cfg, rows)
    run.write("model.json", forest.dumps_model(model))
    run.write("encoder.json", _encoder_json(enc))
    print(f"trained {model.params.n_trees} trees on {model.n_train} rows, {model.n_features} features")


def cmd_importance(cfg, run):
    model_path = _path(cfg, "model", required=False)
    if model_path is not None:
        model = forest.loads_model(model_path.read_text(encoding="utf-8"))
    elif cfg.get("features") or _has_raw(cfg):
        _, model = _train(cfg, _feature_rows(cfg, Inputs(cfg)))
    else:
        raise UsageError("importance needs --model, or training inputs (--features or --ais/--grids/--eez)")
    per_feature = forest.feature_importance(model)
    grouped = forest.grouped_importance(model, dataset.source_variable)
    flag = "" if model.importance_defined else "# importance undefined: no tree made a split\n"
    run.write("importance.csv", flag + "feature,weight\n" + "".join(f"{n},{w!r}\n" for n, w in per_feature))
    run.write("importance_grouped.csv", flag + "variable,weight\n" + "".join(f"{n},{w!r}\n" for n, w in grouped))
    run.write("importance_top5.svg", plots.bar_chart(grouped[:5], title="Top five predictors", xlabel="Importance"))
    run.write("importance_features_top5.svg", plots.bar_chart(per_feature[:5], title="Top five features", xlabel="Importance"))
    for name, w in grouped[:5]:
        print(f"{name:>8} {w:.4f}")


def cmd_behavior(cfg, run):
    inputs = Inputs(cfg)
    if cfg.get("grids") is None:
        raise UsageError("behavior needs --grids with seascape (SEA) composites")
    stack = inputs.grids.get("SEA")
    if stack is None:
        raise UsageError(f"no SEA composites found in {cfg['grids']}")
    rows = _feature_rows(cfg, inputs)
    eez = inputs.eez if cfg.get("eez") else None
    events = behavior.transitions(rows)
    unique = behavior.transitions(rows, unique_vessels=True)
    run.write("transitions.csv", behavior.format_transitions(events))
    run.write("transitions_unique_vessels.csv", behavior.format_transitions(unique))
    series = behavior.area_vs_illegal(stack, rows)
    run.write("daily_series.csv", behavior.format_daily_series(series))
    ranked = sorted(series.days, key=lambda x: (x.illegal_count, x.date))
    lo, hi = ranked[0], ranked[-1]
    for tag, day in (("max", hi), ("min", lo)):
        svg = behavior.snapshot_map(stack, rows, day.date, eez=eez)
        run.write(f"map_{tag}_illegal_{day.date.isoformat()}_n{day.illegal_count}.svg", svg)
    rho = "NA" if series.spearman is None else f"{series.spearman:.4f}"
    text = (
        f"transition pairs: {events.pairs} (skipped for missing seascape: {events.skipped_missing})\n"
        f"spearman(class 14 area, illegal count): {rho}\n"
        f"max illegal day: {hi.date} (n={hi.illegal_count})\n"
        f"min illegal day: {lo.date} (n={lo.illegal_count})\n"
    )
    run.write("behavior_summary.txt", text)
    sys.stdout.write(text)


def cmd_ingest(cfg, run):
    icfg = cfg.get("ingest", {})
    missing = [k for k in ("dataset_id", "variable", "lat_range", "lon_range") if k not in icfg]
    times = _list_of(icfg.get("time"), str, "time")
    if missing or not times:
        raise UsageError(f"ingest needs dataset_id, variable, time, lat_range and lon_range; missing {missing or ['time']}")
    lat_range = tuple(_list_of(icfg["lat_range"], float, "lat_range"))
    lon_range = tuple(_list_of(icfg["lon_range"], float, "lon_range"))
    transport = ingest.http_transport()
    if not cfg.get("no_cache"):
        cache = Path(icfg.get("cache_dir") or Path.home() / ".cache" / "iuu-seascapes")
        transport = ingest.cached_transport(transport, cache)
    for t in times:
        q = ingest.GriddapQuery(icfg["dataset_id"], icfg["variable"], t, lat_range, lon_range,
                                int(icfg.get("stride", 1)), icfg.get("base_url"))
        g, used = ingest.fetch_grid(q, transport, attempts=int(icfg.get("attempts", ingest.DEFAULT_ATTEMPTS)),
                                    var=icfg.get("var"))
        name = f"grids/{g.var.lower()}_{g.period_start.isoformat()}.csv"
        run.write(name, grid.format_grid(g))
        print(f"{name} ({g.nrows}x{g.ncols}, {used} attempt(s))")


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic scenario"),
    "featurize": (cmd_featurize, "join AIS, grids and EEZ into a features file"),
    "cv": (cmd_cv, "year-blocked cross-validation over variable sets and modes"),
    "train": (cmd_train, "train one forest on all rows"),
    "importance": (cmd_importance, "feature importance report"),
    "behavior": (cmd_behavior, "seascape transitions and bloom-area analyses"),
    "sensitivity": (cmd_sensitivity, "buffer-distance sensitivity of the all-variables model"),
    "ingest": (cmd_ingest, "download ERDDAP griddap tiles as Grid-CSV"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file; flags override its values")
    common.add_argument("--out", help="run directory for all outputs")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (default: available CPUs)")
    common.add_argument("--variable-set", help="comma list of all, top_five, ocean_only")
    common.add_argument("--buffer-km", help="comma list of buffer distances in km (default 2,5,10; '' for none)")
    common.add_argument("--no-cache", action="store_true", help="bypass the ERDDAP response cache")
    common.add_argument("--ais", help="AIS-CSV file")
    common.add_argument("--grids", help="directory of Grid-CSV files")
    common.add_argument("--eez", help="EEZ GeoJSON file")
    common.add_argument("--features", help="features CSV from 'featurize'")
    common.add_argument("--model", help="model JSON from 'train'")
    common.add_argument("--n-trees", dest="n_trees", type=int)
    common.add_argument("--max-depth", dest="max_depth", type=int)
    common.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    common.add_argument("--features-per-split", dest="features_per_split", type=int)
    common.add_argument("--class-weight", dest="class_weight", choices=["balanced"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="iuu-seascapes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "featurize":
            p.add_argument("--mode", help="strict (default) or a buffer distance such as 5km")
        if name == "ingest":
            p.add_argument("--dataset-id")
            p.add_argument("--variable", help="ERDDAP variable name")
            p.add_argument("--time", help="comma list of ISO-8601 instants")
            p.add_argument("--lat-range", help="lat0,lat1")
            p.add_argument("--lon-range", help="lon0,lon1")
            p.add_argument("--stride", type=int)
            p.add_argument("--var", choices=grid.VARIABLES, help="Grid-CSV variable (default: guessed)")
            p.add_argument("--cache-dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = effective_config(args)
        if args.command == "featurize" and args.mode is not None:
            cfg["mode"] = args.mode
        if args.command == "ingest":
            flags = ("dataset_id", "variable", "time", "lat_range", "lon_range", "stride", "var", "cache_dir")
            cfg["ingest"] = {**cfg.get("ingest", {}),
                             **{k: getattr(args, k) for k in flags if getattr(args, k) is not None}}
        run = RunDir(args.out, cfg, args.command)
        COMMANDS[args.command][0](cfg, run)
        run.close()
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
