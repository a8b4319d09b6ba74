"""Plot-ready CSV tables built from a sweep manifest.

All tables are long format: one row per run and point (or pair, or band).
Every table starts with the run columns in ``RUN_COLUMNS``; ``complete`` is 1
when the run finished with every fine-tune, the SWA point and all geometry
pairs present, 0 for partial or failed runs.
"""
from __future__ import annotations

import csv
from pathlib import Path

RUN_COLUMNS = ["plr_index", "plr", "data_seed", "init_seed", "batch_seed", "regime", "complete"]
N_RANKS = 16

TABLES = {
    "accuracy_vs_plr.csv": RUN_COLUMNS + ["point", "flr", "train_loss", "train_accuracy", "test_accuracy"],
    "geometry_vs_plr.csv": RUN_COLUMNS + ["pair", "angle", "train_barrier", "test_barrier"],
    "feature_ranks.csv": RUN_COLUMNS + ["point"] + [f"rank_{k}" for k in range(1, N_RANKS + 1)] + ["sparsity_gap"],
    "band_accuracy.csv": RUN_COLUMNS + ["point", "band", "accuracy"],
    "regimes.csv": RUN_COLUMNS + ["regime3", "status", "tail_train_loss", "tail_test_accuracy"],
}

PAIRS = ("ftmin-ftmax", "ftmin-swa", "ftmax-swa")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _complete(run: dict, n_flr: int) -> int:
    pts = run.get("points", {})
    fts = [k for k in pts if k.startswith("ft:")]
    ok = (run.get("status") == "ok" and "pretrain" in pts and "swa" in pts and len(fts) == n_flr
          and all(p in run.get("geometry", {}) for p in PAIRS))
    return int(ok)


def _point_order(points: dict) -> list[str]:
    fts = sorted((k for k in points if k.startswith("ft:")), key=lambda k: float(k[3:]))
    return [k for k in ["pretrain"] + fts + ["swa"] if k in points]


def _rows(manifest: dict) -> dict[str, list[list]]:
    out = {name: [] for name in TABLES}
    n_flr = len(manifest.get("flr_list", []))
    for run in manifest.get("runs", []):
        head = [run.get("plr_index"), run.get("plr"), run.get("data_seed"), run.get("init_seed"),
                run.get("batch_seed"), run.get("regime", ""), _complete(run, n_flr)]
        points = run.get("points", {})
        for name in _point_order(points):
            p = points[name]
            out["accuracy_vs_plr.csv"].append(head + [name, p.get("flr"), p.get("train_loss"),
                                                      p.get("train_accuracy"), p.get("test_accuracy")])
            if "feature_sorted" in p:
                ranks = list(p["feature_sorted"])[:N_RANKS]
                ranks += [None] * (N_RANKS - len(ranks))
                out["feature_ranks.csv"].append(head + [name] + ranks + [p.get("sparsity_gap")])
            for band, acc in p.get("band_accuracy", {}).items():
                out["band_accuracy.csv"].append(head + [name, band, acc])
        geo = run.get("geometry", {})
        for pair in PAIRS:
            if pair in geo:
                g = geo[pair]
                out["geometry_vs_plr.csv"].append(head + [pair, g["angle"], g["train_barrier"], g["test_barrier"]])
        ev = run.get("regime_evidence", {})
        out["regimes.csv"].append(head + [run.get("regime3", ""), run.get("status", ""),
                                          ev.get("tail_train_loss"), ev.get("tail_test_accuracy")])
    return out


def emit_report(manifest: dict, out_dir) -> dict[str, Path]:
    """Write every table into ``out_dir``; returns file name -> path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, rows in _rows(manifest).items():
        path = out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLES[name])
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        written[name] = path
    return written
