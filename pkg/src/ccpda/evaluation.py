"""Target-accuracy evaluation, per-run reports and the method comparison table."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError
from .model import ModelBundle, predict


def evaluate(model: ModelBundle, features: np.ndarray, labels: Sequence[int]) -> dict:
    """Accuracy of argmax predictions against ``labels``, with a per-class breakdown."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if len(features) != len(labels):
        raise ContractError(f"{len(features)} samples but {len(labels)} labels")
    _, probs = predict(model, features)
    return score_predictions(np.argmax(probs, axis=1), labels)


def score_predictions(predictions: Sequence[int], labels: Sequence[int]) -> dict:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ContractError(f"{len(predictions)} predictions but {len(labels)} labels")
    correct = predictions == labels
    per_class, counts = {}, {}
    for c in np.unique(labels):
        mask = labels == c
        per_class[int(c)] = float(correct[mask].mean())
        counts[int(c)] = int(mask.sum())
    return {"accuracy": float(correct.mean()) if len(labels) else 0.0,
            "per_class_accuracy": per_class, "class_counts": counts,
            "predictions": predictions.astype(int).tolist()}


@dataclass
class ExperimentReport:
    method: str
    seed: int
    accuracy: float
    per_class_accuracy: dict[int, float]
    class_counts: dict[int, int]
    final_gamma: list[float]
    gamma_shared_mean: float | None
    gamma_outlier_mean: float | None
    config: dict
    task: str = "synthetic"
    wall_clock: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        """Deterministic fields only; wall-clock time is reported separately."""
        d = asdict(self)
        d.pop("wall_clock")
        d["per_class_accuracy"] = {str(k): v for k, v in self.per_class_accuracy.items()}
        d["class_counts"] = {str(k): v for k, v in self.class_counts.items()}
        return d


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return float(values.mean()), std


def summarize(reports: Sequence[ExperimentReport], method_order: Sequence[str] = ()) -> list[dict]:
    """One row per (method, task): mean and sample std of accuracy and class weights."""
    if not reports:
        raise ContractError("need at least one report")
    rank = {m: i for i, m in enumerate(method_order)}
    keys = sorted({(r.method, r.task) for r in reports},
                  key=lambda k: (rank.get(k[0], len(rank)), k[0], k[1]))
    rows = []
    for method, task in keys:
        runs = [r for r in reports if r.method == method and r.task == task]
        acc_mean, acc_std = _mean_std([r.accuracy for r in runs])
        row = {"method": method, "task": task, "runs": len(runs), "accuracy_mean": acc_mean,
               "accuracy_std": acc_std}
        shared = [r.gamma_shared_mean for r in runs if r.gamma_shared_mean is not None]
        outlier = [r.gamma_outlier_mean for r in runs if r.gamma_outlier_mean is not None]
        row["gamma_shared_mean"] = _mean_std(shared)[0] if shared else None
        row["gamma_outlier_mean"] = _mean_std(outlier)[0] if outlier else None
        rows.append(row)
    return rows


def emit_table(reports: Sequence[ExperimentReport], path: str | Path | None = None,
               method_order: Sequence[str] = ()) -> str:
    """Format the comparison table; with ``path``, also write ``<path>.txt`` and ``<path>.csv``."""
    rows = summarize(reports, method_order)
    fmt = lambda v: "-" if v is None else f"{v:.3f}"  # noqa: E731
    header = f"{'method':<14}{'task':<14}{'runs':>5}  {'accuracy (%)':>16}  {'gamma shared':>12}  {'gamma outlier':>13}"
    lines = [header, "-" * len(header)]
    for r in rows:
        acc = f"{100 * r['accuracy_mean']:.2f} ± {100 * r['accuracy_std']:.2f}"
        lines.append(f"{r['method']:<14}{r['task']:<14}{r['runs']:>5}  {acc:>16}  "
                     f"{fmt(r['gamma_shared_mean']):>12}  {fmt(r['gamma_outlier_mean']):>13}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        path = Path(path)
        path.with_suffix(".txt").write_text(text, encoding="utf-8")
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: ("" if v is None else (format(v, ".17g") if isinstance(v, float) else v))
                          for k, v in r.items()} for r in rows)
        path.with_suffix(".csv").write_text(buf.getvalue(), encoding="utf-8")
    return text
