"""Feature extractor, label classifier and (domain, class) discriminator.

All three networks are plain relu MLPs built from :class:`Linear` layers.
The discriminator sees features through a gradient-reversal node, so one
backward pass trains it to separate domains while pushing the feature
extractor the other way.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, Tensor
from .errors import ConfigError

CHECKPOINT_VERSION = 1


@dataclass
class Linear:
    weight: Tensor  # in x out
    bias: Tensor  # out

    @classmethod
    def init(cls, fan_in: int, fan_out: int, rng: np.random.Generator) -> Linear:
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        return cls(Tensor(w, requires_grad=True), Tensor(np.zeros(fan_out), requires_grad=True))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.matmul(x, self.weight) + self.bias

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class MLP:
    layers: list[Linear]
    final_relu: bool = False

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(f"expected input of width {self.in_dim}, got shape {x.shape}")
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_relu:
                x = ad.relu(x)
        return x

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> Iterator[Tensor]:
        for layer in self.layers:
            yield layer.weight
            yield layer.bias


def _mlp(dims: Sequence[int], rng: np.random.Generator, final_relu: bool) -> MLP:
    return MLP([Linear.init(a, b, rng) for a, b in zip(dims[:-1], dims[1:])], final_relu)


@dataclass
class ModelBundle:
    """The three networks plus the bookkeeping the trainer needs."""

    feature_extractor: MLP
    classifier: MLP
    discriminator: MLP
    num_classes: int
    meta: dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return self.feature_extractor.out_dim

    @property
    def binary_discriminator(self) -> bool:
        return bool(self.meta.get("binary_discriminator", False))

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for prefix, net in (("features", self.feature_extractor),
                            ("classifier", self.classifier),
                            ("discriminator", self.discriminator)):
            for i, layer in enumerate(net.layers):
                yield f"{prefix}.{i}.weight", layer.weight
                yield f"{prefix}.{i}.bias", layer.bias

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return int(np.sum([p.data.size for p in self.parameters()]))

    def lr_multipliers(self, head_multiplier: float) -> list[float]:
        """Per-parameter lr factor: 1 for the feature extractor, ``head_multiplier`` for both heads."""
        return [1.0 if name.startswith("features.") else head_multiplier
                for name, _ in self.named_parameters()]

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if state[name].shape != p.shape:
                raise DimensionError(f"{name}: checkpoint shape {state[name].shape} != {p.shape}")
            p.data = np.array(state[name], dtype=np.float64)


def init_model(input_dim: int, feature_dim: int, hidden_dims: Sequence[int], num_classes: int,
               seed: int, classifier_hidden: Sequence[int] = (),
               discriminator_hidden: Sequence[int] = (32,),
               binary_discriminator: bool = False) -> ModelBundle:
    """Build a model with He-normal weights and zero biases, deterministic in ``seed``.

    The discriminator emits ``2 * num_classes`` logits (source classes first,
    then target classes) unless ``binary_discriminator`` asks for the plain
    two-way domain head.
    """
    dims = [input_dim, feature_dim, num_classes, *hidden_dims, *classifier_hidden, *discriminator_hidden]
    if any(int(d) < 1 for d in dims):
        raise ConfigError(f"all model dimensions must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    disc_out = 2 if binary_discriminator else 2 * num_classes
    fe = _mlp([input_dim, *hidden_dims, feature_dim], rng, final_relu=True)
    clf = _mlp([feature_dim, *classifier_hidden, num_classes], rng, final_relu=False)
    disc = _mlp([feature_dim, *discriminator_hidden, disc_out], rng, final_relu=False)
    meta = dict(input_dim=input_dim, feature_dim=feature_dim, hidden_dims=list(hidden_dims),
                num_classes=num_classes, seed=seed, classifier_hidden=list(classifier_hidden),
                discriminator_hidden=list(discriminator_hidden),
                binary_discriminator=binary_discriminator)
    return ModelBundle(fe, clf, disc, num_classes, meta)


def forward_features(m: ModelBundle, x: Tensor) -> Tensor:
    return m.feature_extractor(ad.as_tensor(x))


def classifier_logits(m: ModelBundle, f: Tensor) -> Tensor:
    return m.classifier(f)


def classify(m: ModelBundle, f: Tensor) -> Tensor:
    """Class-probability rows for a feature batch."""
    return ad.softmax(m.classifier(f))


def discriminate(m: ModelBundle, f: Tensor, grl_coeff: float) -> Tensor:
    """Domain(-class) probability rows; features pass a gradient reversal first."""
    if f.ndim != 2 or f.shape[1] != m.discriminator.in_dim:
        raise DimensionError(f"expected features of width {m.discriminator.in_dim}, got shape {f.shape}")
    return ad.softmax(m.discriminator(ad.grad_reverse(f, grl_coeff)))


def predict(m: ModelBundle, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(features, class probabilities) for raw inputs, without recording gradients."""
    f = forward_features(m, Tensor(x))
    return f.data, classify(m, f).data


# ---------------------------------------------------------------- checkpoint

def save_checkpoint(m: ModelBundle, path: str | Path) -> None:
    """Write shapes, values and constructor arguments to a ``.npz`` file."""
    arrays = {f"param/{name}": p.data for name, p in m.named_parameters()}
    header = json.dumps({"version": CHECKPOINT_VERSION, "meta": m.meta}, sort_keys=True)
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(header), **arrays)


def load_checkpoint(path: str | Path) -> ModelBundle:
    with np.load(path, allow_pickle=False) as npz:
        header = json.loads(str(npz["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        meta = header["meta"]
        m = init_model(meta["input_dim"], meta["feature_dim"], meta["hidden_dims"], meta["num_classes"],
                       meta["seed"], meta["classifier_hidden"], meta["discriminator_hidden"],
                       meta["binary_discriminator"])
        m.load_state({name: npz[f"param/{name}"] for name, _ in m.named_parameters()})
    return m
