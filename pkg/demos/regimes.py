"""A reduced sweep across the learning-rate grid, then the report tables.

Each PLR is pretrained, fine-tuned at small rates and averaged (SWA); the
labels along the grid run R1, R2A/R2B, R3.
"""
import sys
import tempfile
from pathlib import Path

from lrlab.config import TICK_DEFAULT_GRID, ExperimentConfig
from lrlab.report import emit_report
from lrlab.sweep import run_sweep

scale = float(sys.argv[1]) if len(sys.argv) > 1 else 0.25
cfg = ExperimentConfig(plr_grid=TICK_DEFAULT_GRID[::2], budget_scale=scale)
root = Path(tempfile.mkdtemp(prefix="lrlab-regimes-"))
manifest = run_sweep(cfg, root)
for run in manifest["runs"]:
    ft = [p["test_accuracy"] for k, p in run["points"].items() if k.startswith("ft:")]
    pre = run["points"].get("pretrain", {}).get("test_accuracy", float("nan"))
    print(f"plr {run['plr']:.2e}  {run.get('regime', run['status']):9s}  pretrain acc {pre:.3f}  "
          f"fine-tuned {' '.join(f'{a:.3f}' for a in ft)}")
for name, path in emit_report(manifest, root / "report").items():
    print("wrote", path)
