"""Command-line entry point: ``lrlab <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` plus one flag per configuration
key (``--plr-grid 1e-3,1e-2``, ``--pretrain-steps 10000`` ...); flags win over
the file. Exit status: 0 success, 1 a run failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import fourier
from .checkpoint import read_checkpoint, write_checkpoint
from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, LabError
from .features import single_feature_accuracies, sparsity_gap
from .geometry import angular_distance, linear_barrier
from .mlp import accuracy
from .regimes import classify_regime, find_convergence_threshold
from .report import emit_report
from .sweep import (build_bundle, chance_level, load_manifest, network_for, output_root, run_sweep,
                    write_records)
from .trainer import OptimizerConfig, finetune, pretrain, swa_average

log = logging.getLogger("lrlab")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    g = p.add_argument_group("configuration keys")
    for f in dataclasses.fields(ExperimentConfig):
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar="VALUE")


def _config(args, **fallback) -> ExperimentConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    for k, v in fallback.items():
        overrides.setdefault(k, v)
    if args.config:
        return load_config(args.config, overrides)
    return parse_config("", overrides)


def _out_dir(args, cfg) -> Path:
    root = output_root(cfg, getattr(args, "out", None))
    root.mkdir(parents=True, exist_ok=True)
    return root


def _seeds(args):
    batch = args.batch_seed if args.batch_seed is not None else args.init_seed
    return args.data_seed, args.init_seed, batch


def _add_seed_flags(p):
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--batch-seed", type=int, default=None)


def _setup(args, **fallback):
    cfg = _config(args, **fallback)
    d, i, b = _seeds(args)
    bundle = build_bundle(cfg, d)
    return cfg, bundle, network_for(cfg, bundle, i), (d, i, b)


def _opt(cfg, lr, steps):
    return OptimizerConfig(lr, cfg.batch_size, cfg.radius, steps, cfg.eval_every, cfg.swa_n)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


# ---------------------------------------------------------------- subcommands


def cmd_sweep(args) -> int:
    cfg = _config(args)
    manifest = run_sweep(cfg, args.out, resume=not args.no_resume)
    root = output_root(cfg, args.out)
    emit_report(manifest, root / "report")
    for r in manifest["runs"]:
        print(f"{r['run_id']}\t{r.get('regime', r['status'])}")
    return EXIT_FAILED if manifest["failed"] else EXIT_OK


def cmd_pretrain(args) -> int:
    cfg, bundle, spec, (d, i, b) = _setup(args, plr_grid=str(args.lr))
    res = pretrain(spec, bundle.data, _opt(cfg, args.lr, cfg.scaled_pretrain_steps), i, b)
    out = _out_dir(args, cfg)
    write_records(out / "pretrain.csv", res.records)
    if res.diverged:
        print("pretraining diverged numerically", file=sys.stderr)
        return EXIT_FAILED
    write_checkpoint(res.params, out / "pretrain.sirl")
    for k, c in enumerate(res.checkpoints):
        write_checkpoint(c, out / f"swa_{k}.sirl")
    label = classify_regime(res.records, chance_level(bundle.data.test_y), cfg.thresholds)
    _emit({"regime": label.value, "evidence": label.evidence, "steps": res.steps,
           "swa_checkpoints": len(res.checkpoints)})
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg, bundle, spec, (d, i, b) = _setup(args, plr_grid=str(args.lr))
    start = read_checkpoint(args.checkpoint)
    res = finetune(spec, start, bundle.data, _opt(cfg, args.lr, cfg.scaled_finetune_steps), b,
                   flr_regime=args.flr_regime, force=args.force)
    out = _out_dir(args, cfg)
    tag = f"ft_{args.lr:.4e}"
    write_records(out / f"{tag}.csv", res.records)
    if res.diverged:
        print("fine-tuning diverged numerically", file=sys.stderr)
        return EXIT_FAILED
    write_checkpoint(res.params, out / f"{tag}.sirl")
    _emit({"test_accuracy": accuracy(spec, res.params, bundle.data.test_x, bundle.data.test_y),
           "train_loss": res.records[-1].train_loss, "checkpoint": str(out / f"{tag}.sirl")})
    return EXIT_OK


def cmd_swa(args) -> int:
    thetas = [read_checkpoint(p) for p in args.checkpoints]
    avg = swa_average(thetas, args.n or len(thetas))
    write_checkpoint(avg, args.output)
    _emit({"averaged": args.n or len(thetas), "output": args.output})
    return EXIT_OK


def cmd_geometry(args) -> int:
    cfg, bundle, spec, _ = _setup(args, plr_grid="1")
    a, b = read_checkpoint(args.first), read_checkpoint(args.second)
    data = bundle.data

    def err(x, y):
        return lambda v: 1.0 - accuracy(spec, v, x, y)

    tr = linear_barrier(a, b, err(data.train_x, data.train_y), cfg.alpha_grid)
    te = linear_barrier(a, b, err(data.test_x, data.test_y), cfg.alpha_grid)
    _emit({"angle": angular_distance(a, b), "train_barrier": tr.barrier, "test_barrier": te.barrier,
           "train_curve": tr.to_dict(), "test_curve": te.to_dict()})
    return EXIT_OK


def cmd_features(args) -> int:
    cfg, bundle, spec, _ = _setup(args, plr_grid="1", dataset="tick")
    theta = read_checkpoint(args.checkpoint)
    prof = single_feature_accuracies(spec, theta, bundle.sets, bundle.data.feature_count)
    _emit({"raw": prof.raw.tolist(), "sorted": prof.sorted.tolist(), "sparsity_gap": sparsity_gap(prof)})
    return EXIT_OK


def cmd_fourier(args) -> int:
    images = fourier.read_cifar10_binary(args.input)[: args.limit]
    band = fourier.BandSpec.parse(args.band)
    normalize = None if args.normalize is None else args.normalize == "yes"
    if normalize is None:
        normalize = band.a == 0 and band.c == 0
    stats = fourier.channel_stats(images) if normalize else None
    out = fourier.make_band_testset(images, band, stats, normalize)
    data, side = fourier.write_band_testset(args.output, out, band, normalize)
    _emit({"images": len(out), "band": band.name, "data": str(data), "sidecar": str(side)})
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg, bundle, spec, (d, i, b) = _setup(args, plr_grid=str(args.lr_min))
    chance = chance_level(bundle.data.test_y)
    trail = []

    def label(lr):
        res = pretrain(spec, bundle.data, _opt(cfg, lr, cfg.scaled_pretrain_steps), i, b)
        lab = "R3" if res.diverged else classify_regime(res.records, chance, cfg.thresholds)
        trail.append((lr, str(lab)))
        log.info("lr=%.4e -> %s", lr, lab)
        return lab

    br = find_convergence_threshold(label, args.lr_min, args.lr_max, args.rel_tol)
    _emit({"lr_low": br.lr_low, "lr_high": br.lr_high, "ratio": br.ratio, "calls": br.calls,
           "trail": trail})
    return EXIT_OK


def cmd_report(args) -> int:
    manifest = load_manifest(args.root)
    out = Path(args.out) if args.out else Path(args.root) / "report"
    for name, path in emit_report(manifest, out).items():
        print(path)
    return EXIT_FAILED if manifest.get("failed") else EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrlab", description="Learning-rate regime experiments on the sphere.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="full pretrain / fine-tune / SWA sweep over the PLR grid")
    _add_config_flags(p)
    p.add_argument("--out", help="output root (default: $LRLAB_OUTPUT, then output_dir)")
    p.add_argument("--no-resume", action="store_true", help="recompute runs that already verify")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pretrain", help="one pretraining run at a fixed LR")
    _add_config_flags(p)
    _add_seed_flags(p)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint at a regime-1 LR")
    _add_config_flags(p)
    _add_seed_flags(p)
    p.add_argument("checkpoint")
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--flr-regime", default="R1", help="regime label of --lr (anything but R1 is refused)")
    p.add_argument("--force", action="store_true", help="fine-tune even if --flr-regime is not R1")
    p.add_argument("--out")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("swa", help="average checkpoints and project back onto the sphere")
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-n", type=int, default=None, help="average only the last N")
    p.set_defaults(func=cmd_swa)

    p = sub.add_parser("geometry", help="angle and linear-path barriers between two checkpoints")
    _add_config_flags(p)
    _add_seed_flags(p)
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("features", help="single-feature accuracy profile of a tick checkpoint")
    _add_config_flags(p)
    _add_seed_flags(p)
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("fourier", help="band-limited test set from a CIFAR-10 binary batch")
    p.add_argument("input")
    p.add_argument("--band", required=True, help="a-c, e.g. 1-8")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--normalize", choices=["yes", "no"], default=None)
    p.set_defaults(func=cmd_fourier)

    p = sub.add_parser("threshold", help="bisect for the convergence threshold")
    _add_config_flags(p)
    _add_seed_flags(p)
    p.add_argument("--lr-min", type=float, required=True)
    p.add_argument("--lr-max", type=float, required=True)
    p.add_argument("--rel-tol", type=float, default=0.05)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("report", help="rebuild report CSVs from a sweep manifest")
    p.add_argument("root", help="sweep output root containing manifest.json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
