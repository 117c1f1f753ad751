"""Loss terms of the class-conditional partial adaptation objective.

Every term takes probability rows (not logits) and works on one mini-batch;
the batch sizes stand in for the full-dataset normalisers. Logs are taken of
``max(p, 1e-12)`` so saturated softmax rows stay finite.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, EmptyInputError
from .weighting import CentroidBank, ClassWeights


@dataclass(frozen=True)
class LossWeights:
    lam: float = 1.0  # adversarial term
    mu: float = 0.1  # selection term
    zeta: float = 0.1  # entropy term
    centroid: float = 1.0  # unscaled in the reference objective; kept as an override

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ContractError(f"loss weight {name} must be non-negative, got {value}")


@dataclass(frozen=True)
class LossBreakdown:
    l_y: float = 0.0
    l_d_tilde: float = 0.0
    l_c: float = 0.0
    l_inf: float = 0.0
    l_e: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _labels(labels: Sequence[int], num_classes: int, what: str) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ContractError(f"{what} must lie in [0, {num_classes}), got range "
                            f"[{labels.min()}, {labels.max()}]")
    return labels


def _weighted_nll(probs: Tensor, columns: np.ndarray, weights: np.ndarray | None) -> Tensor:
    """mean_i w_i * -log p_i[col_i]; ``weights=None`` means all ones."""
    if probs.shape[0] == 0:
        raise EmptyInputError("cross-entropy over an empty batch")
    nll = -ad.log(ad.pick(probs, columns))
    if weights is not None:
        nll = nll * weights
    return ad.sum(nll) * (1.0 / probs.shape[0])


def _row_entropy(probs: Tensor) -> Tensor:
    # 0 * log(clamp) is exactly 0, which realises 0 log 0 := 0
    return -ad.sum(probs * ad.log(probs), axis=1)


def weighted_classification_loss(probs_s: Tensor, labels_s: Sequence[int],
                                 gamma: ClassWeights | None) -> Tensor:
    """Class-weighted source cross-entropy, averaged over the batch."""
    labels = _labels(labels_s, probs_s.shape[1], "source labels")
    weights = None if gamma is None else gamma.for_labels(labels)
    return _weighted_nll(probs_s, labels, weights)


def multiclass_discriminator_loss(disc_probs_s: Tensor, labels_s: Sequence[int], gamma: ClassWeights | None,
                                  disc_probs_t: Tensor, pseudo_t: Sequence[int]) -> Tensor:
    """Cross-entropy of the 2K-way (domain, class) discriminator.

    Source samples of class c are category c; target samples with
    pseudo-label c are category K + c. Source terms carry the class weights.
    The discriminator minimises this value and the feature extractor
    receives it through gradient reversal.
    """
    k = disc_probs_s.shape[1] // 2
    if disc_probs_s.shape[1] != 2 * k or disc_probs_t.shape[1] != 2 * k:
        raise ContractError(f"discriminator rows must have even width 2K, got "
                            f"{disc_probs_s.shape[1]} and {disc_probs_t.shape[1]}")
    labels = _labels(labels_s, k, "source labels")
    pseudo = _labels(pseudo_t, k, "target pseudo-labels")
    if pseudo.shape[0] != disc_probs_t.shape[0]:
        raise ContractError(f"{pseudo.shape[0]} pseudo-labels for {disc_probs_t.shape[0]} target rows")
    weights = None if gamma is None else gamma.for_labels(labels)
    return _weighted_nll(disc_probs_s, labels, weights) + _weighted_nll(disc_probs_t, k + pseudo, None)


def binary_discriminator_loss(disc_probs_s: Tensor, labels_s: Sequence[int], gamma: ClassWeights | None,
                              disc_probs_t: Tensor) -> Tensor:
    """Two-way domain cross-entropy (source = 0, target = 1) with class-weighted source terms."""
    if disc_probs_s.shape[1] != 2 or disc_probs_t.shape[1] != 2:
        raise ContractError("binary discriminator rows must have width 2")
    weights = None if gamma is None else gamma.for_labels(labels_s)
    zeros = np.zeros(disc_probs_s.shape[0], dtype=np.intp)
    ones = np.ones(disc_probs_t.shape[0], dtype=np.intp)
    return _weighted_nll(disc_probs_s, zeros, weights) + _weighted_nll(disc_probs_t, ones, None)


def centroid_alignment_loss(bank: CentroidBank, gamma: ClassWeights) -> Tensor:
    """sum_c gamma_c * ||M_s^c - M_t^c||^2 over classes seen in both domains."""
    total = Tensor(0.0)
    for c in range(bank.num_classes):
        if not (bank.ready("source", c) and bank.ready("target", c)):
            continue
        diff = bank.centroid("source", c) - bank.centroid("target", c)
        total = total + ad.sum(diff * diff) * float(gamma.gamma[c])
    return total


def selection_loss(target_probs: Tensor) -> Tensor:
    """Mean over classes of the largest probability any target sample gives that class."""
    if target_probs.ndim != 2 or target_probs.shape[0] == 0:
        raise EmptyInputError("selection loss needs at least one target row")
    return ad.sum(ad.max(target_probs, axis=0)) * (1.0 / target_probs.shape[1])


def entropy_loss(probs_s: Tensor, labels_s: Sequence[int], gamma: ClassWeights | None,
                 probs_t: Tensor) -> Tensor:
    """Class-weighted mean source entropy plus mean target entropy."""
    labels = _labels(labels_s, probs_s.shape[1], "source labels")
    h_s = _row_entropy(probs_s)
    if gamma is not None:
        h_s = h_s * gamma.for_labels(labels)
    return ad.mean(h_s) + ad.mean(_row_entropy(probs_t))


def total_objective(weights: LossWeights, l_y: Tensor, l_d_tilde: Tensor | None = None,
                    l_c: Tensor | None = None, l_inf: Tensor | None = None,
                    l_e: Tensor | None = None) -> tuple[Tensor, LossBreakdown]:
    """Combine the enabled terms; ``None`` marks a term that is switched off.

    The adversarial term enters with ``+lam`` here; the minimax sign flip for
    the feature extractor lives in the gradient-reversal node in front of
    the discriminator.
    """
    total = l_y
    for term, scale in ((l_d_tilde, weights.lam), (l_c, weights.centroid),
                        (l_inf, weights.mu), (l_e, weights.zeta)):
        if term is not None:
            total = total + term * scale
    value = lambda t: 0.0 if t is None else float(t.data)  # noqa: E731
    breakdown = LossBreakdown(value(l_y), value(l_d_tilde), value(l_c), value(l_inf), value(l_e),
                              float(total.data))
    return total, breakdown
