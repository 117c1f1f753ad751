"""Momentum-SGD minimax training loop with annealed learning rate and ablation switches."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import SampleSet, batch_sampler, batches_per_epoch
from .errors import ConfigError, ContractError
from .losses import (LossWeights, binary_discriminator_loss, centroid_alignment_loss, entropy_loss,
                     multiclass_discriminator_loss, selection_loss, total_objective,
                     weighted_classification_loss)
from .model import ModelBundle, classify, discriminate, forward_features, init_model, predict
from .weighting import CentroidBank, ClassWeights, compute_class_weights, pseudo_label


class TrainingError(RuntimeError):
    """A module error raised inside the loop, annotated with where it happened."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    per_domain: int = 36
    base_lr: float = 1e-2
    lr_alpha: float = 10.0
    lr_beta: float = 0.75
    momentum: float = 0.95
    head_lr_multiplier: float = 10.0
    lam: float = 1.0
    lambda_ramp: bool = False
    mu_final: float = 0.1
    mu_ramp_fraction: float = 0.25
    zeta: float = 0.1
    centroid_weight: float = 1.0
    ema_coeff: float = 0.7
    warmup_epochs: int = 0
    disable_selection: bool = False
    disable_entropy: bool = False
    binary_discriminator_no_centroids: bool = False
    disable_centroids: bool = False
    disable_adversarial: bool = False
    disable_class_weights: bool = False
    log_full_selection: bool = False
    feature_dim: int = 16
    hidden_dims: tuple[int, ...] = (32,)
    classifier_hidden: tuple[int, ...] = ()
    discriminator_hidden: tuple[int, ...] = (32,)
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_dims", "classifier_hidden", "discriminator_hidden"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (int, float)) and not isinstance(value, bool) and value < 0:
                raise ConfigError(f"{f.name} must be non-negative, got {value}")
        if not 0.0 <= self.mu_ramp_fraction <= 1.0:
            raise ConfigError(f"mu_ramp_fraction must lie in [0, 1], got {self.mu_ramp_fraction}")
        if not 0.0 <= self.ema_coeff <= 1.0:
            raise ConfigError(f"ema_coeff must lie in [0, 1], got {self.ema_coeff}")
        if self.per_domain < 1:
            raise ConfigError("per_domain must be at least 1")

    @property
    def use_centroids(self) -> bool:
        return not (self.disable_centroids or self.binary_discriminator_no_centroids)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


# named ablations; each entry overrides TrainConfig flags
METHODS: dict[str, dict] = {
    "ccpda": {},
    "ccpda_inf": {"disable_selection": True},
    "ccpda_e": {"disable_entropy": True},
    "ccpda_dc": {"binary_discriminator_no_centroids": True},
    "pada": {"binary_discriminator_no_centroids": True, "disable_selection": True,
             "disable_entropy": True},
    "source_only": {"disable_adversarial": True, "disable_centroids": True, "disable_selection": True,
                    "disable_entropy": True, "disable_class_weights": True},
}


def config_for_method(cfg: TrainConfig, method: str) -> TrainConfig:
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    return replace(cfg, **METHODS[method])


def model_for_config(input_dim: int, num_classes: int, cfg: TrainConfig) -> ModelBundle:
    return init_model(input_dim, cfg.feature_dim, cfg.hidden_dims, num_classes, seed=[cfg.seed, 0],
                      classifier_hidden=cfg.classifier_hidden,
                      discriminator_hidden=cfg.discriminator_hidden,
                      binary_discriminator=cfg.binary_discriminator_no_centroids)


# ---------------------------------------------------------------- schedules

def lr_schedule(rho: float, cfg: TrainConfig) -> float:
    """eta0 / (1 + alpha * rho) ** beta."""
    if not 0.0 <= rho <= 1.0:
        raise ContractError(f"training progress must lie in [0, 1], got {rho}")
    return cfg.base_lr / (1.0 + cfg.lr_alpha * rho) ** cfg.lr_beta


def mu_schedule(rho: float, cfg: TrainConfig) -> float:
    """Linear ramp from 0 to ``mu_final`` over the first ``mu_ramp_fraction`` of training."""
    if not 0.0 <= rho <= 1.0:
        raise ContractError(f"training progress must lie in [0, 1], got {rho}")
    if cfg.mu_ramp_fraction == 0.0 or rho >= cfg.mu_ramp_fraction:
        return cfg.mu_final
    return cfg.mu_final * rho / cfg.mu_ramp_fraction


def lambda_schedule(rho: float, cfg: TrainConfig) -> float:
    if not cfg.lambda_ramp:
        return cfg.lam
    return cfg.lam * (2.0 / (1.0 + math.exp(-10.0 * rho)) - 1.0)


# ---------------------------------------------------------------- optimiser

@dataclass
class OptimizerState:
    velocities: list[np.ndarray]
    iteration: int = 0
    total_iterations: int = 1

    @classmethod
    def for_params(cls, params: Sequence[Tensor], total_iterations: int = 1) -> OptimizerState:
        return cls([np.zeros_like(p.data) for p in params], 0, max(1, total_iterations))

    @property
    def progress(self) -> float:
        return self.iteration / self.total_iterations


def sgd_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None], state: OptimizerState,
             lr: float, multipliers: Sequence[float], momentum: float = 0.95) -> None:
    """v <- momentum * v + g;  p <- p - lr * mult * v.  A ``None`` gradient counts as zero."""
    if not len(params) == len(grads) == len(multipliers) == len(state.velocities):
        raise ContractError("params, grads, multipliers and velocities differ in length")
    for i, (p, g, mult) in enumerate(zip(params, grads, multipliers)):
        v = state.velocities[i]
        if g is not None and g.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if v.shape != p.shape:
            raise ContractError(f"velocity shape {v.shape} does not match parameter shape {p.shape}")
        v = momentum * v if g is None else momentum * v + g
        state.velocities[i] = v
        p.data = p.data - lr * mult * v
    state.iteration += 1


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)  # one record per iteration
    epochs: list[dict] = field(default_factory=list)  # one record per epoch
    final_gamma: np.ndarray | None = None
    total_iterations: int = 0


def _accuracy(probs: np.ndarray, labels: np.ndarray | None) -> float | None:
    if labels is None:
        return None
    return float(np.mean(pseudo_label(probs) == labels))


def train_step(model: ModelBundle, xs: np.ndarray, ys: np.ndarray, xt: np.ndarray,
               gamma: ClassWeights | None, bank: CentroidBank | None, cfg: TrainConfig,
               lam: float, mu: float):
    """Forward pass and combined objective for one paired batch (no parameter update)."""
    fs = forward_features(model, Tensor(xs))
    ft = forward_features(model, Tensor(xt))
    ps, pt = classify(model, fs), classify(model, ft)
    l_y = weighted_classification_loss(ps, ys, gamma)
    pseudo = pseudo_label(pt)

    l_d = None
    if not cfg.disable_adversarial:
        ds, dt = discriminate(model, fs, 1.0), discriminate(model, ft, 1.0)
        if model.binary_discriminator:
            l_d = binary_discriminator_loss(ds, ys, gamma, dt)
        else:
            l_d = multiclass_discriminator_loss(ds, ys, gamma, dt, pseudo)

    l_c = None
    if cfg.use_centroids and bank is not None:
        bank.update(fs, ys, "source")
        bank.update(ft, pseudo, "target")
        l_c = centroid_alignment_loss(bank, gamma or ClassWeights.uniform(model.num_classes))

    l_inf = None if cfg.disable_selection else selection_loss(pt)
    l_e = None if cfg.disable_entropy else entropy_loss(ps, ys, gamma, pt)
    weights = LossWeights(lam, mu, cfg.zeta, cfg.centroid_weight)
    return total_objective(weights, l_y, l_d, l_c, l_inf, l_e)


def train(model: ModelBundle, source: SampleSet, target: SampleSet, cfg: TrainConfig,
          target_labels: np.ndarray | None = None) -> tuple[ModelBundle, TrainResult]:
    """Run ``cfg.epochs`` epochs of single-backward minimax SGD on ``model`` in place.

    Class weights are re-estimated from a full pass over the target set at
    the start of every epoch after the first (the first epoch uses uniform
    weights). ``target_labels`` is only used to log pseudo-label accuracy.
    """
    if model.binary_discriminator != cfg.binary_discriminator_no_centroids and not cfg.disable_adversarial:
        raise ConfigError("model discriminator width does not match binary_discriminator_no_centroids")
    params = model.parameters()
    mults = model.lr_multipliers(cfg.head_lr_multiplier)
    nb = batches_per_epoch(len(source), len(target), cfg.per_domain)
    total_iters = cfg.epochs * nb
    state = OptimizerState.for_params(params, total_iters)
    bank = CentroidBank(model.num_classes, model.feature_dim, cfg.ema_coeff) if cfg.use_centroids else None
    result = TrainResult(total_iterations=total_iters)
    gamma = ClassWeights.uniform(model.num_classes)
    # warm-up epochs train the classifier alone before any term that relies on pseudo-labels
    warm_cfg = replace(cfg, disable_adversarial=True, disable_centroids=True, disable_selection=True,
                       disable_entropy=True)

    for batch in batch_sampler(source, target, cfg.per_domain, seed=[cfg.seed, 1], epochs=cfg.epochs):
        t = state.iteration
        try:
            if batch.step == 0:
                _, probs_t = predict(model, target.features)
                if batch.epoch > 0:
                    gamma = compute_class_weights(probs_t)
                record = {"epoch": batch.epoch, "iteration": t, "gamma": gamma.gamma.tolist(),
                          "pseudo_label_accuracy": _accuracy(probs_t, target_labels)}
                if cfg.log_full_selection:
                    record["l_inf_full"] = float(selection_loss(Tensor(probs_t)).data)
                result.epochs.append(record)
            rho = state.progress
            lr, mu, lam = lr_schedule(rho, cfg), mu_schedule(rho, cfg), lambda_schedule(rho, cfg)
            used_gamma = None if cfg.disable_class_weights else gamma
            step_cfg = warm_cfg if batch.epoch < cfg.warmup_epochs else cfg
            total, breakdown = train_step(model, batch.xs, batch.ys, batch.xt, used_gamma, bank, step_cfg, lam, mu)
            ad.zero_grad(params)
            ad.backward(total)
            sgd_step(params, [p.grad for p in params], state, lr, mults, cfg.momentum)
            if bank is not None:
                bank.release()
        except (ValueError, ArithmeticError) as exc:
            raise TrainingError(f"iteration {t} (epoch {batch.epoch}, step {batch.step}): {exc}") from exc
        if not np.isfinite(breakdown.total):
            raise TrainingError(f"iteration {t} (epoch {batch.epoch}): objective is not finite")
        result.history.append({"iteration": t, "epoch": batch.epoch, "lr": lr, "mu": mu, "lambda": lam,
                               **breakdown.as_dict(), "gamma": gamma.gamma.tolist()})

    _, probs_t = predict(model, target.features)
    result.final_gamma = compute_class_weights(probs_t).gamma
    return model, result
