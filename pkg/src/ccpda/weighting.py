"""Class weights, pseudo-labels and moving-average class centroids."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, EmptyInputError

Domain = Literal["source", "target"]


@dataclass(frozen=True)
class ClassWeights:
    """Relative importance of each source class, scaled so the largest is 1."""

    gamma: np.ndarray

    @classmethod
    def uniform(cls, num_classes: int) -> ClassWeights:
        return cls(np.ones(num_classes))

    def __len__(self) -> int:
        return len(self.gamma)

    def for_labels(self, labels: Sequence[int]) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.intp)
        _check_labels(labels, len(self.gamma))
        return self.gamma[labels]

    def split_means(self, shared: Sequence[int]) -> tuple[float, float]:
        """Mean weight over ``shared`` classes and over the remaining (outlier) classes."""
        mask = np.zeros(len(self.gamma), dtype=bool)
        mask[list(shared)] = True
        outlier = float(self.gamma[~mask].mean()) if (~mask).any() else float("nan")
        return float(self.gamma[mask].mean()), outlier


def _check_labels(labels: np.ndarray, num_classes: int) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ContractError(f"labels must lie in [0, {num_classes}), got range "
                            f"[{labels.min()}, {labels.max()}]")


def compute_class_weights(target_probs) -> ClassWeights:
    """Average the classifier's target predictions, then divide by the largest entry."""
    probs = target_probs.data if isinstance(target_probs, Tensor) else np.asarray(target_probs, float)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise EmptyInputError("class weights need at least one target prediction row")
    gamma = probs.mean(axis=0)
    top = gamma.max()
    if top <= 0:
        raise ContractError("target prediction rows carry no probability mass")
    return ClassWeights(gamma / top)


def pseudo_label(probs) -> np.ndarray:
    """Row-wise argmax; exact ties resolve to the lowest class index."""
    probs = probs.data if isinstance(probs, Tensor) else np.asarray(probs, float)
    return np.argmax(probs, axis=1)


@dataclass
class CentroidBank:
    """Per-class feature centroids for both domains, maintained as moving averages.

    ``update`` blends the batch class-mean into each centroid. The blended
    rows from the most recent update stay differentiable with respect to the
    batch features until :meth:`release` is called; stored history is constant.
    """

    num_classes: int
    feature_dim: int
    ema_coeff: float = 0.7
    source: np.ndarray = field(init=False)
    target: np.ndarray = field(init=False)
    source_ready: np.ndarray = field(init=False)
    target_ready: np.ndarray = field(init=False)
    _live: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.ema_coeff <= 1.0:
            raise ContractError(f"ema_coeff must lie in [0, 1], got {self.ema_coeff}")
        self.source = np.zeros((self.num_classes, self.feature_dim))
        self.target = np.zeros((self.num_classes, self.feature_dim))
        self.source_ready = np.zeros(self.num_classes, dtype=bool)
        self.target_ready = np.zeros(self.num_classes, dtype=bool)

    def _arrays(self, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
        if domain == "source":
            return self.source, self.source_ready
        if domain == "target":
            return self.target, self.target_ready
        raise ContractError(f"domain must be 'source' or 'target', got {domain!r}")

    def ready(self, domain: Domain, c: int) -> bool:
        return bool(self._arrays(domain)[1][c])

    def centroid(self, domain: Domain, c: int) -> Tensor:
        rows, ready = self._arrays(domain)
        if not ready[c]:
            raise ContractError(f"{domain} centroid {c} has not been observed yet")
        live = self._live.get((domain, c))
        return live if live is not None else Tensor(rows[c])

    def update(self, features: Tensor, labels: Sequence[int], domain: Domain) -> CentroidBank:
        features = ad.as_tensor(features)
        labels = np.asarray(labels, dtype=np.intp)
        if labels.shape != (features.shape[0],):
            raise ContractError(f"{len(labels)} labels for {features.shape[0]} feature rows")
        _check_labels(labels, self.num_classes)
        rows, ready = self._arrays(domain)
        for c in np.unique(labels):
            batch_mean = ad.mean(features[np.flatnonzero(labels == c)], axis=0)
            if ready[c]:
                new = ad.add(self.ema_coeff * rows[c], (1.0 - self.ema_coeff) * batch_mean)
            else:
                new = batch_mean
            rows[c] = new.data
            ready[c] = True
            self._live[(domain, int(c))] = new
        return self

    def release(self) -> None:
        """Forget the differentiable rows of the last update (history is kept)."""
        self._live.clear()

    def copy(self) -> CentroidBank:
        out = copy.copy(self)
        out.source, out.target = self.source.copy(), self.target.copy()
        out.source_ready, out.target_ready = self.source_ready.copy(), self.target_ready.copy()
        out._live = dict(self._live)
        return out


def update_centroids(bank: CentroidBank, features: Tensor, labels: Sequence[int],
                     domain: Domain) -> CentroidBank:
    return bank.update(features, labels, domain)
