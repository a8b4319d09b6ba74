"""Sweep orchestration: pretrain, fine-tune, SWA, geometry and feature probes per PLR.

Every run writes into its own directory under the output root; a JSON
manifest indexes each file with its role. Runs whose summary and checkpoints
verify are skipped on re-execution.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fourier, tick
from .checkpoint import verify_checkpoint, write_checkpoint
from .config import ExperimentConfig
from .errors import LabError
from .features import single_feature_accuracies, sparsity_gap
from .geometry import angular_distance, linear_barrier
from .mlp import NetworkSpec, accuracy, derived_head_seed
from .regimes import R2, classify_regime, split_regime2
from .trainer import OptimizerConfig, finetune, pretrain, swa_average

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
OUTPUT_ENV = "LRLAB_OUTPUT"


def output_root(cfg: ExperimentConfig, flag: str | None = None) -> Path:
    """Explicit flag, then ``$LRLAB_OUTPUT``, then the config's ``output_dir``."""
    return Path(flag or os.environ.get(OUTPUT_ENV) or cfg.output_dir)


# ---------------------------------------------------------------- datasets


class TickBundle:
    def __init__(self, data_seed: int, label_noise: float):
        self.data = tick.generate_tick_dataset(data_seed, label_noise=label_noise)
        self.sets = tick.generate_single_feature_sets(self.data, data_seed)
        self.input_dim = self.data.train_x.shape[1]
        self.n_classes = 2

    def probes(self, spec, theta) -> dict:
        prof = single_feature_accuracies(spec, theta, self.sets, self.data.feature_count)
        return {"feature_raw": [float(v) for v in prof.raw],
                "feature_sorted": [float(v) for v in prof.sorted],
                "sparsity_gap": sparsity_gap(prof)}


class CifarBundle:
    def __init__(self, cfg: ExperimentConfig, data_seed: int):
        root = Path(cfg.cifar_dir)
        train = []
        for i in range(1, 6):
            p = root / f"data_batch_{i}.bin"
            if p.exists():
                train += fourier.read_cifar10_binary(p)
        test = fourier.read_cifar10_binary(root / "test_batch.bin")
        self.data = fourier.image_subset(train, test, tuple(cfg.cifar_classes), cfg.cifar_train, cfg.cifar_test)
        self.input_dim = self.data.train_x.shape[1]
        self.n_classes = len(cfg.cifar_classes)
        size = self.data.test_images[0].pixels.shape[-1]
        self.bands = {b.name: fourier.band_arrays(self.data, b) for b in fourier.band_groups(size)}

    def probes(self, spec, theta) -> dict:
        return {"band_accuracy": {name: accuracy(spec, theta, x, y) for name, (x, y) in self.bands.items()}}


def build_bundle(cfg: ExperimentConfig, data_seed: int):
    if cfg.dataset == "tick":
        return TickBundle(data_seed, cfg.label_noise)
    return CifarBundle(cfg, data_seed)


def network_for(cfg: ExperimentConfig, bundle, init_seed: int) -> NetworkSpec:
    return NetworkSpec(bundle.input_dim, cfg.hidden_dim, bundle.n_classes, cfg.layernorm_epsilon,
                       frozen_head_seed=derived_head_seed(init_seed))


def chance_level(y) -> float:
    counts = np.bincount(np.asarray(y))
    return float(counts.max() / counts.sum())


# ---------------------------------------------------------------- records


RECORD_FIELDS = ["step", "train_loss", "train_accuracy", "test_accuracy", "total_norm"]


def write_records(path: Path, records) -> None:
    groups = sorted(records[0].group_norms) if records else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS + [f"norm_{g}" for g in groups])
        for r in records:
            w.writerow([r.step, repr(r.train_loss), repr(r.train_accuracy), repr(r.test_accuracy),
                        repr(r.total_norm)] + [repr(r.group_norms[g]) for g in groups])


def run_id(index: int, plr: float, seeds) -> str:
    d, i, b = seeds
    return f"plr{index:02d}_{plr:.4e}_d{d}_i{i}_b{b}"


def _point_metrics(spec, theta, data, bundle) -> dict:
    return {"test_accuracy": accuracy(spec, theta, data.test_x, data.test_y),
            "train_accuracy": accuracy(spec, theta, data.train_x, data.train_y),
            **bundle.probes(spec, theta)}


def execute_run(cfg: ExperimentConfig, index: int, plr: float, seeds, root: Path, bundle=None) -> dict:
    """Full protocol for one (PLR, seed triple); returns the run summary."""
    data_seed, init_seed, batch_seed = seeds
    rid = run_id(index, plr, seeds)
    rdir = root / rid
    rdir.mkdir(parents=True, exist_ok=True)
    if bundle is None:
        bundle = build_bundle(cfg, data_seed)
    data = bundle.data
    spec = network_for(cfg, bundle, init_seed)
    eval_every = max(1, round(cfg.eval_every * cfg.budget_scale))
    files: list[tuple[str, str]] = []

    def save_ckpt(theta, name, role):
        write_checkpoint(theta, rdir / name)
        files.append((name, role))

    pcfg = OptimizerConfig(plr, cfg.batch_size, cfg.radius, cfg.scaled_pretrain_steps, eval_every, cfg.swa_n)
    pre = pretrain(spec, data, pcfg, init_seed, batch_seed)
    write_records(rdir / "pretrain.csv", pre.records)
    files.append(("pretrain.csv", "pretrain-records"))
    summary = {"run_id": rid, "plr_index": index, "plr": plr, "data_seed": data_seed, "init_seed": init_seed,
               "batch_seed": batch_seed, "status": pre.status, "points": {}, "geometry": {}}
    if pre.diverged:
        summary["regime"] = "diverged"
        summary["files"] = files
        return summary
    save_ckpt(pre.params, "pretrain.sirl", "pretrain-checkpoint")
    chance = chance_level(data.test_y)
    label = classify_regime(pre.records, chance, cfg.thresholds)
    summary["regime3"] = label.value
    summary["regime_evidence"] = label.evidence
    summary["points"]["pretrain"] = _point_metrics(spec, pre.params, data, bundle)
    summary["points"]["pretrain"]["train_loss"] = pre.records[-1].train_loss

    fts = {}
    for flr in sorted(cfg.flr_list):
        fcfg = OptimizerConfig(flr, cfg.batch_size, cfg.radius, cfg.scaled_finetune_steps, eval_every, cfg.swa_n)
        ft = finetune(spec, pre.params, data, fcfg, batch_seed, flr_regime="R1")
        tag = f"ft_{flr:.4e}"
        write_records(rdir / f"{tag}.csv", ft.records)
        files.append((f"{tag}.csv", "finetune-records"))
        if ft.diverged:
            summary["status"] = "finetune-diverged"
            continue
        save_ckpt(ft.params, f"{tag}.sirl", "finetune-checkpoint")
        fts[flr] = ft.params
        m = _point_metrics(spec, ft.params, data, bundle)
        m["train_loss"] = ft.records[-1].train_loss
        m["flr"] = flr
        summary["points"][f"ft:{flr!r}"] = m

    swa = None
    if len(pre.checkpoints) >= cfg.swa_n:
        try:
            swa = swa_average(pre.checkpoints, cfg.swa_n, cfg.radius)
        except LabError as exc:
            summary["swa_error"] = str(exc)
    if swa is not None:
        save_ckpt(swa, "swa.sirl", "swa-checkpoint")
        summary["points"]["swa"] = _point_metrics(spec, swa, data, bundle)

    def train_err(v):
        return 1.0 - accuracy(spec, v, data.train_x, data.train_y)

    def test_err(v):
        return 1.0 - accuracy(spec, v, data.test_x, data.test_y)

    named = {}
    if fts:
        named["ftmin"] = fts[min(fts)]
        named["ftmax"] = fts[max(fts)]
    if swa is not None:
        named["swa"] = swa
    geometry = {}
    for a, b in itertools.combinations(["ftmin", "ftmax", "swa"], 2):
        if a in named and b in named:
            tr = linear_barrier(named[a], named[b], train_err, cfg.alpha_grid)
            te = linear_barrier(named[a], named[b], test_err, cfg.alpha_grid)
            geometry[f"{a}-{b}"] = {"angle": angular_distance(named[a], named[b]),
                                   "train_barrier": tr.barrier, "test_barrier": te.barrier,
                                   "train_curve": tr.to_dict(), "test_curve": te.to_dict()}
    summary["geometry"] = geometry
    with open(rdir / "geometry.json", "w") as fh:
        json.dump(geometry, fh, indent=1, sort_keys=True)
    files.append(("geometry.json", "geometry"))

    # pairwise train barriers among all fine-tuned points drive the 2A/2B split
    ft_barriers = {}
    flrs = sorted(fts)
    for x, y in itertools.combinations(flrs, 2):
        key = f"ftmin-ftmax" if (x, y) == (flrs[0], flrs[-1]) and "ftmin-ftmax" in geometry else None
        ft_barriers[(x, y)] = geometry[key]["train_barrier"] if key else \
            linear_barrier(fts[x], fts[y], train_err, cfg.alpha_grid).barrier
    summary["finetune_barriers"] = {f"{x!r}|{y!r}": v for (x, y), v in ft_barriers.items()}
    regime = label.value
    if label.value == R2 and len(fts) >= 2:
        accs = {flr: summary["points"][f"ft:{flr!r}"]["test_accuracy"] for flr in fts}
        regime = split_regime2(plr, accs, ft_barriers, cfg.thresholds).value
    summary["regime"] = regime
    summary["files"] = files
    return summary


def _summary_ok(rdir: Path) -> dict | None:
    path = rdir / "summary.json"
    if not path.exists():
        return None
    try:
        summary = json.loads(path.read_text())
    except ValueError:
        return None
    for name, role in summary.get("files", []):
        f = rdir / name
        if not f.exists():
            return None
        if name.endswith(".sirl") and not verify_checkpoint(f):
            return None
    return summary


def _failed(index, plr, seeds, exc) -> dict:
    return {"run_id": run_id(index, plr, seeds), "plr_index": index, "plr": plr, "data_seed": seeds[0],
            "init_seed": seeds[1], "batch_seed": seeds[2], "status": "failed",
            "error": f"{type(exc).__name__}: {exc}", "files": [], "points": {}, "geometry": {}}


def _task(args):
    cfg, index, plr, seeds, root = args
    try:
        return execute_run(cfg, index, plr, seeds, Path(root))
    except Exception as exc:  # recorded in the manifest; the sweep goes on
        log.exception("run failed")
        return _failed(index, plr, seeds, exc)


def run_sweep(cfg: ExperimentConfig, out: str | Path | None = None, resume: bool = True) -> dict:
    """Run every (PLR, seed triple) of the config and write the manifest."""
    root = output_root(cfg, out)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.txt").write_text(cfg.to_text())
    tasks, done = [], {}
    for seeds in cfg.seed_triples:
        for index, plr in enumerate(cfg.plr_grid):
            rid = run_id(index, plr, seeds)
            prev = _summary_ok(root / rid) if resume else None
            if prev is not None:
                done[rid] = prev
            else:
                tasks.append((cfg, index, plr, seeds, str(root)))

    def finish(summary):
        rdir = root / summary["run_id"]
        rdir.mkdir(parents=True, exist_ok=True)
        with open(rdir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
        done[summary["run_id"]] = summary

    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for summary in pool.map(_task, tasks):
                finish(summary)
    else:
        bundles = {}
        for cfg_, index, plr, seeds, root_ in tasks:
            if seeds[0] not in bundles:
                bundles = {seeds[0]: build_bundle(cfg, seeds[0])}
            try:
                summary = execute_run(cfg, index, plr, seeds, root, bundles[seeds[0]])
            except Exception as exc:
                log.exception("run failed")
                summary = _failed(index, plr, seeds, exc)
            finish(summary)
            log.info("%s -> %s", summary["run_id"], summary.get("regime", summary["status"]))

    runs = [done[run_id(i, plr, s)] for s in cfg.seed_triples for i, plr in enumerate(cfg.plr_grid)]
    manifest = build_manifest(cfg, runs)
    with open(root / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def build_manifest(cfg: ExperimentConfig, runs: list[dict]) -> dict:
    files = [{"path": "config.txt", "role": "config", "run_id": None}]
    for r in runs:
        files += [{"path": f"{r['run_id']}/{name}", "role": role, "run_id": r["run_id"]}
                  for name, role in r.get("files", [])]
        files.append({"path": f"{r['run_id']}/summary.json", "role": "run-summary", "run_id": r["run_id"]})
    return {
        "format": "lrlab-manifest/1",
        "dataset": cfg.dataset,
        "plr_grid": cfg.plr_grid,
        "flr_list": sorted(cfg.flr_list),
        "runs": runs,
        "files": files,
        "failed": [r["run_id"] for r in runs if r.get("status") == "failed"],
    }


def load_manifest(root) -> dict:
    return json.loads((Path(root) / MANIFEST).read_text())
