"""
A small ablation sweep
======================

The same experiment runner the ``ccpda sweep`` verb uses, on two seeds
and fewer epochs so it finishes in about half a minute.
"""

import tempfile
from pathlib import Path

from ccpda.experiment import load_config, run_experiment
from ccpda.evaluation import emit_table

config = Path(__file__).resolve().parent.parent / "configs" / "acceptance.toml"
cfg = load_config(config, {"seeds": [0, 1], "epochs": 15})

out = Path(tempfile.mkdtemp(prefix="ccpda-sweep-"))
reports = run_experiment(cfg, out)
print(emit_table(reports, out / "table", method_order=list(cfg.methods)))
print("per-run logs under", out)

# outlier weights per run
for r in reports:
    if r.method == "ccpda":
        print(f"seed {r.seed}: gamma shared {r.gamma_shared_mean:.3f}  outlier {r.gamma_outlier_mean:.3f}")
