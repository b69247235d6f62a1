"""Report emitters: fold CSVs, text summary tables, PR-curve files, manifests."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from . import plots
from .dataset import VARIABLE_SETS
from .evaluation import AR_DEFINITION

REPORT_COLUMNS = ["year", "variant", "f1_05", "f1_best", "best_threshold", "ap", "ar", "auc_pr", "prevalence"]
VARIANT_TITLES = {"all": "all variables", "top_five": "top five variables", "ocean_only": "Seascape, SST, CHL, Month"}


def atomic_write(path, data) -> Path:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def variant_label(variable_set: str, mode: str) -> str:
    return f"{variable_set}/{mode}"


def column_order(key):
    """Sort key putting strict columns first, then buffer columns."""
    variable_set, mode = key
    v = VARIABLE_SETS.index(variable_set)
    if mode == "strict":
        return (0, v, 0.0)
    return (1, v, float(mode.removeprefix("buffer_").removesuffix("km")))


def _fmt(x, spec=".6f"):
    return "NA" if x is None else format(x, spec)


def format_fold_csv(reports) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for r in sorted(reports, key=lambda r: (column_order((r.variant, r.mode)), r.test_year)):
        lines.append(",".join([
            str(r.test_year), variant_label(r.variant, r.mode),
            _fmt(r.f1_05), _fmt(r.f1_best), _fmt(r.best_threshold),
            _fmt(r.ap), _fmt(r.ar), _fmt(r.auc_pr), _fmt(r.prevalence),
        ]))
    return "\n".join(lines) + "\n"


def _grid(reports):
    cols = sorted({(r.variant, r.mode) for r in reports}, key=column_order)
    years = sorted({r.test_year for r in reports})
    cell = {(r.variant, r.mode, r.test_year): r for r in reports}
    return cols, years, cell


def _table(reports, sections, title, footer=()):
    cols, years, cell = _grid(reports)
    width = 14
    out = [title, ""]
    out.append(" " * 22 + "".join(f"({k + 1})".center(width) for k in range(len(cols))))
    out.append(" " * 22 + "".join(v.center(width) for v, _ in cols))
    out.append(" " * 22 + "".join(m.center(width) for _, m in cols))
    for heading, attr, fmt in sections:
        out.append(heading)
        for y in years:
            vals = []
            for v, m in cols:
                r = cell.get((v, m, y))
                x = None if r is None else getattr(r, attr)
                vals.append(("NA" if x is None else fmt(x)).center(width))
            out.append(f"  {y:<20}" + "".join(vals))
    out.append("")
    for k, (v, m) in enumerate(cols):
        out.append(f"({k + 1}) {VARIANT_TITLES.get(v, v)}, {m}")
    out.extend(footer)
    return "\n".join(out) + "\n"


def _pct(x):
    return f"{round(100 * x)}%"


def format_table3(reports) -> str:
    return _table(
        reports,
        [("F-1 Score (threshold 0.5)", "f1_05", _pct), ("F-1 Score (best threshold)", "f1_best", _pct)],
        "Summary of main results: F-1 score by test year",
        ["NA: test year has no illegal rows, or its training years hold a single class."],
    )


def format_table_s1(reports) -> str:
    two = "{:.2f}".format
    return _table(
        reports,
        [("Average-Precision", "ap", two), ("Average-Recall", "ar", two), ("Area-Under-Curve", "auc_pr", two)],
        "Summary of additional results: AP, AR and PR-AUC by test year",
        ["AP: sum over thresholds of recall increment x precision.", AR_DEFINITION,
         "Area-Under-Curve: trapezoidal area under precision over recall."],
    )


def format_curve_csv(curve) -> str:
    lines = ["threshold,precision,recall"]
    for t, p, r in curve.points:
        lines.append(f"{t!r},{p!r},{r!r}")
    return "\n".join(lines) + "\n"


def pr_plot(reports, title) -> str:
    series = [
        (f"{r.test_year} (AUC {r.auc_pr:.2f})", r.curve.recall.tolist(), r.curve.precision.tolist())
        for r in sorted(reports, key=lambda r: r.test_year) if r.curve is not None
    ]
    return plots.line_plot(series, title=title, xlabel="Recall", ylabel="Precision")


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(run_dir) -> Path:
    run_dir = Path(run_dir)
    entries = [
        {"name": p.relative_to(run_dir).as_posix(), "sha256": sha256(p)}
        for p in sorted(run_dir.rglob("*"))
        if p.is_file() and p.name != "manifest.json" and not p.name.startswith(".")
    ]
    return atomic_write(run_dir / "manifest.json", json.dumps({"artifacts": entries}, indent=1) + "\n")
