"""
Training on the synthetic partial-domain task
=============================================

Eight source blobs on a circle, a target holding four of them under a
30 degree rotation. We train the full method and watch the class weights
drop on the four classes the target lacks.
"""

import numpy as np

from ccpda.data import PdaTaskSpec, generate_pda_task
from ccpda.model import predict
from ccpda.trainer import TrainConfig, config_for_method, model_for_config, train

spec = PdaTaskSpec(seed=0)
source, target, truth = generate_pda_task(spec)
print("source", source.features.shape, "target", target.features.shape)
print("shared", spec.shared_classes, "outlier", spec.outlier_classes)

# same settings as configs/acceptance.toml
cfg = TrainConfig(epochs=30, lam=0.03, centroid_weight=0.03, warmup_epochs=3,
                  mu_ramp_fraction=0.75, seed=0)

for method in ("source_only", "ccpda"):
    mcfg = config_for_method(cfg, method)
    model, result = train(model_for_config(2, 8, mcfg), source, target, mcfg, truth)
    _, probs = predict(model, target.features)
    acc = np.mean(probs.argmax(1) == truth)
    print(f"\n{method}: target accuracy {acc:.3f}")
    for e in result.epochs[::6] + result.epochs[-1:]:
        print(f"  epoch {e['epoch']:>2}  pseudo acc {e['pseudo_label_accuracy']:.3f}  gamma {np.round(e['gamma'], 2)}")
