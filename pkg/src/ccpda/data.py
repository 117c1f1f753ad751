"""Synthetic partial-domain-adaptation tasks, feature CSV I/O and paired batching."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal, Sequence

import numpy as np

from .errors import ConfigError, EmptyInputError, ParseError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampleSet:
    features: np.ndarray
    labels: np.ndarray | None
    domain: Literal["source", "target"]

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(np.asarray(self.features, dtype=np.float64)))
        if self.features.ndim != 2:
            raise ValueError(f"features must be an n x d matrix, got shape {self.features.shape}")
        if self.domain == "source":
            if self.labels is None:
                raise ValueError("source samples need labels")
            object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.intp)))
            if self.labels.shape != (len(self.features),):
                raise ValueError(f"{len(self.labels)} labels for {len(self.features)} samples")
        elif self.domain == "target":
            if self.labels is not None:
                raise ValueError("target samples are unlabeled; keep ground truth separately")
        else:
            raise ValueError(f"domain must be 'source' or 'target', got {self.domain!r}")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PdaTaskSpec:
    """Gaussian class blobs on a circle; the target keeps only the shared classes.

    The target is drawn from the same blobs, rotated about the origin by
    ``rotation_deg`` (in the first two coordinates), translated, and
    perturbed by extra isotropic noise. The default translation makes the
    shift a 30 degree rotation about (0.4, 1.35), a point beside the shared
    arc, so the shared blobs move by less than the blob spacing.
    """

    num_classes: int = 8
    shared_classes: tuple[int, ...] = (0, 1, 2, 3)
    samples_per_class: int = 200
    target_samples_per_class: int | None = None
    input_dim: int = 2
    radius: float = 1.0
    noise: float = 0.15
    rotation_deg: float = 30.0
    translation: tuple[float, ...] = (0.72858984, -0.0191343)
    target_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shared_classes", tuple(int(c) for c in self.shared_classes))
        object.__setattr__(self, "translation", tuple(float(t) for t in self.translation))
        shared = set(self.shared_classes)
        if self.num_classes < 2:
            raise ConfigError("a partial task needs at least two source classes")
        if not shared or len(shared) >= self.num_classes or len(shared) != len(self.shared_classes):
            raise ConfigError("shared_classes must be a non-empty proper subset of the source classes "
                              f"without repeats, got {self.shared_classes}")
        if min(shared) < 0 or max(shared) >= self.num_classes:
            raise ConfigError(f"shared class out of range [0, {self.num_classes}): {self.shared_classes}")
        if self.input_dim < 2:
            raise ConfigError("input_dim must be at least 2")
        if len(self.translation) > self.input_dim:
            raise ConfigError(f"translation has {len(self.translation)} entries for input_dim {self.input_dim}")
        if self.samples_per_class < 1 or (self.target_samples_per_class or 1) < 1:
            raise ConfigError("samples per class must be positive")
        if self.noise < 0 or self.target_noise < 0 or self.radius <= 0:
            raise ConfigError("radius must be positive and noise scales non-negative")

    @property
    def outlier_classes(self) -> tuple[int, ...]:
        return tuple(c for c in range(self.num_classes) if c not in self.shared_classes)

    def class_means(self) -> np.ndarray:
        angles = 2 * np.pi * np.arange(self.num_classes) / self.num_classes
        means = np.zeros((self.num_classes, self.input_dim))
        means[:, 0] = self.radius * np.cos(angles)
        means[:, 1] = self.radius * np.sin(angles)
        return means

    def shift(self, x: np.ndarray) -> np.ndarray:
        """Rigid domain shift applied to clean target draws (noise excluded)."""
        theta = np.deg2rad(self.rotation_deg)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        out = np.array(x, dtype=np.float64)
        out[:, :2] = out[:, :2] @ rot.T
        t = np.zeros(self.input_dim)
        t[: len(self.translation)] = self.translation
        return out + t


def generate_pda_task(spec: PdaTaskSpec) -> tuple[SampleSet, SampleSet, np.ndarray]:
    """Draw (source, unlabeled target, target ground-truth labels)."""
    rng = np.random.default_rng(spec.seed)
    means = spec.class_means()
    n_s = spec.samples_per_class
    n_t = spec.target_samples_per_class or n_s

    ys = np.repeat(np.arange(spec.num_classes), n_s)
    xs = means[ys] + spec.noise * rng.standard_normal((len(ys), spec.input_dim))

    yt = np.repeat(np.asarray(spec.shared_classes), n_t)
    xt = means[yt] + spec.noise * rng.standard_normal((len(yt), spec.input_dim))
    xt = spec.shift(xt) + spec.target_noise * rng.standard_normal(xt.shape)
    return SampleSet(xs, ys, "source"), SampleSet(xt, None, "target"), _frozen(yt)


# ----------------------------------------------------------------- CSV I/O

def write_feature_csv(path: str | Path, features: np.ndarray, labels: Sequence[int] | None = None) -> None:
    """One sample per row, 17 significant digits, optional trailing integer label."""
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(features):
            cells = [format(v, ".17g") for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)


def write_label_csv(path: str | Path, labels: Sequence[int]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def read_label_csv(path: str | Path) -> np.ndarray:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                labels.append(int(line.strip()))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: label {line.strip()!r} is not an integer") from None
    if not labels:
        raise ParseError(f"{path}: empty label file")
    return np.asarray(labels, dtype=np.intp)


def load_feature_csv(path: str | Path, has_labels: bool,
                     domain: Literal["source", "target"] | None = None) -> SampleSet:
    """Parse a headerless numeric CSV.

    With ``has_labels`` the last column is an integer class label and the set
    is tagged ``source``; otherwise it is an unlabeled ``target`` set. Pass
    ``domain`` to override (labels are then dropped for targets).
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, cells in enumerate(csv.reader(fh), 1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if width is None:
                width = len(cells)
                if has_labels and width < 2:
                    raise ParseError(f"{path}:{lineno}: need at least one feature and a label column")
            elif len(cells) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} fields, found {len(cells)}")
            feats = cells[:-1] if has_labels else cells
            try:
                rows.append([float(c) for c in feats])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            if has_labels:
                try:
                    labels.append(int(cells[-1]))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: label {cells[-1]!r} is not an integer") from None
    if not rows:
        raise ParseError(f"{path}:1: empty feature file")
    tag = domain or ("source" if has_labels else "target")
    return SampleSet(np.array(rows), np.array(labels) if tag == "source" else None, tag)


# ---------------------------------------------------------------- batching

@dataclass(frozen=True)
class DomainBatch:
    xs: np.ndarray
    ys: np.ndarray
    xt: np.ndarray
    source_index: np.ndarray
    target_index: np.ndarray
    epoch: int
    step: int  # position within the epoch


def batches_per_epoch(n_source: int, n_target: int, per_domain: int) -> int:
    return max(1, max(n_source, n_target) // per_domain)


def _epoch_indices(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    # concatenated fresh permutations: the smaller domain cycles without replacement
    reps = math.ceil(count / n)
    return np.concatenate([rng.permutation(n) for _ in range(reps)])[:count]


def batch_sampler(source: SampleSet, target: SampleSet, per_domain: int = 36, seed: int = 0,
                  epochs: int = 1) -> Iterator[DomainBatch]:
    """Yield ``epochs`` passes of paired batches with ``per_domain`` rows from each domain."""
    if per_domain <= 0:
        raise ConfigError(f"per_domain batch size must be positive, got {per_domain}")
    if len(source) == 0 or len(target) == 0:
        raise EmptyInputError("both domains need at least one sample")
    rng = np.random.default_rng(seed)
    nb = batches_per_epoch(len(source), len(target), per_domain)
    for epoch in range(epochs):
        si = _epoch_indices(len(source), nb * per_domain, rng)
        ti = _epoch_indices(len(target), nb * per_domain, rng)
        for step in range(nb):
            s = si[step * per_domain:(step + 1) * per_domain]
            t = ti[step * per_domain:(step + 1) * per_domain]
            yield DomainBatch(source.features[s], source.labels[s], target.features[t], s, t, epoch, step)
