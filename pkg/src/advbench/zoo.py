"""Architecture catalog and seeded model construction.

CNN channel plan: conv block ``i`` (convs ``2i+1`` and ``2i+2``) has
``16 * 2**i`` channels and is followed by a 2x2 max-pool once both of its
convs are in place. An unpaired trailing conv (cnn3) is not pooled. Every
model ends in a single dense layer to 10 logits.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .autonet import (
    Conv3x3,
    Dense,
    Flatten,
    MaxPool2,
    ReLU,
    backward_layers,
    forward_layers,
)
from .errors import CatalogError, ConfigError
from .ndcore import Rng

N_CLASSES = 10
IMAGE_SHAPE = (1, 28, 28)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative architecture.

    ``layers`` is a tuple of tuples: ``("dense", n_in, n_out)``,
    ``("conv", in_ch, out_ch)``, ``("relu",)``, ``("pool",)``, ``("flatten",)``.
    """

    arch_id: str
    layers: tuple
    input_shape: tuple = IMAGE_SHAPE

    def to_json(self):
        """Canonical JSON (sorted keys, no whitespace)."""
        doc = {
            "arch_id": self.arch_id,
            "input_shape": list(self.input_shape),
            "layers": [list(layer) for layer in self.layers],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text) if isinstance(text, (str, bytes)) else text
        try:
            spec = cls(
                arch_id=str(doc["arch_id"]),
                layers=tuple(tuple(layer) for layer in doc["layers"]),
                input_shape=tuple(int(d) for d in doc["input_shape"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed model spec: {exc}") from None
        spec.validate()
        return spec

    def validate(self):
        """Propagate shapes through the layer list; return the output shape."""
        if not self.layers:
            raise ConfigError(f"{self.arch_id}: model spec has no layers")
        shape = tuple(self.input_shape)
        for layer in self.layers:
            kind = layer[0]
            if kind == "dense":
                if len(shape) != 1 or shape[0] != layer[1]:
                    raise ConfigError(f"{self.arch_id}: {layer} cannot follow shape {shape}")
                shape = (layer[2],)
            elif kind == "conv":
                if len(shape) != 3 or shape[0] != layer[1]:
                    raise ConfigError(f"{self.arch_id}: {layer} cannot follow shape {shape}")
                shape = (layer[2],) + shape[1:]
            elif kind == "pool":
                if len(shape) != 3 or min(shape[1:]) < 2:
                    raise ConfigError(f"{self.arch_id}: cannot pool shape {shape}")
                shape = (shape[0], shape[1] // 2, shape[2] // 2)
            elif kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif kind != "relu":
                raise ConfigError(f"{self.arch_id}: unknown layer kind {kind!r}")
        return shape

    @property
    def is_cnn(self):
        return any(layer[0] == "conv" for layer in self.layers)


def _fnn(arch_id, hidden):
    layers = [("flatten",)]
    n_in = 784
    for width in hidden:
        layers += [("dense", n_in, width), ("relu",)]
        n_in = width
    layers.append(("dense", n_in, N_CLASSES))
    return ModelSpec(arch_id, tuple(layers))


def _cnn(n_convs):
    layers = []
    ch, hw = 1, 28
    for i in range(n_convs):
        out = 16 * 2 ** (i // 2)
        layers += [("conv", ch, out), ("relu",)]
        ch = out
        if i % 2 == 1:
            layers.append(("pool",))
            hw //= 2
    layers += [("flatten",), ("dense", ch * hw * hw, N_CLASSES)]
    return ModelSpec(f"cnn{n_convs}", tuple(layers))


CATALOG = {
    "fnn1-32": _fnn("fnn1-32", [32]),
    "fnn1-256": _fnn("fnn1-256", [256]),
    "fnn2": _fnn("fnn2", [256, 32]),
    "cnn3": _cnn(3),
    "cnn4": _cnn(4),
    "cnn6": _cnn(6),
    "cnn8": _cnn(8),
}


def get_spec(arch_id):
    try:
        return CATALOG[arch_id]
    except KeyError:
        raise CatalogError(
            f"unknown model {arch_id!r}; choose from {', '.join(CATALOG)}"
        ) from None


def _make_layer(layer):
    kind = layer[0]
    if kind == "dense":
        return Dense(layer[1], layer[2])
    if kind == "conv":
        return Conv3x3(layer[1], layer[2])
    return {"relu": ReLU, "pool": MaxPool2, "flatten": Flatten}[kind]()


@dataclass
class Model:
    spec: ModelSpec
    seed: int
    layers: list = field(repr=False)

    @property
    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def arch_id(self):
        return self.spec.arch_id

    def set_parameters(self, params):
        mine = self.parameters
        if len(params) != len(mine):
            raise ConfigError(f"expected {len(mine)} parameter tensors, got {len(params)}")
        for dst, src in zip(mine, params):
            src = np.asarray(src, dtype=np.float64)
            if src.shape != dst.shape:
                raise ConfigError(f"parameter shape {src.shape} != expected {dst.shape}")
            dst[...] = src

    def copy(self):
        clone = build_from_spec(self.spec, self.seed, init=False)
        clone.set_parameters(self.parameters)
        return clone

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != tuple(self.spec.input_shape):
            raise ConfigError(
                f"{self.arch_id} expects batches of shape (n, {', '.join(map(str, self.spec.input_shape))}),"
                f" got {x.shape}"
            )
        return forward_layers(self.layers, x)

    def backward(self, acts, labels):
        return backward_layers(self.layers, acts, labels)


def model_forward(model, x_batch):
    """Return ``(logits, BatchActivations)``."""
    return model.forward(x_batch)


def model_backward(model, acts, labels):
    """Return ``(param_grads, input_grads, loss)``."""
    return model.backward(acts, labels)


def build_from_spec(spec, seed=0, init=True):
    """Instantiate ``spec``; He-uniform weights (bound sqrt(6/fan_in)), zero biases."""
    spec.validate()
    layers = [_make_layer(layer) for layer in spec.layers]
    if init:
        rng = Rng(seed)
        for layer in layers:
            if layer.kind in ("dense", "conv"):
                w = layer.params[0]
                bound = np.sqrt(6.0 / layer.fan_in)
                w[...] = rng.uniform(-bound, bound, w.size).reshape(w.shape)
    return Model(spec, int(seed), layers)


def build_model(arch_id, seed=0):
    return build_from_spec(get_spec(arch_id), seed)


def parameter_count(model):
    return sum(p.size for p in model.parameters)
