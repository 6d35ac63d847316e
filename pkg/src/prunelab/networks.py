"""Target network representations, masks, masked forward evaluation, and the
sampled pruned-vs-target gap estimator.

Networks are bias-free.  FCNs apply a per-layer activation after every
weight matrix except the last; CNNs share one activation across their conv
layers and end in a dense layer on the C-order-flattened feature map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circulant import conv2d_wrap, flatten_maps, unflatten_maps
from .sampling import SeedSpec, sample_unit_cube, sample_unit_sphere

__all__ = [
    "Activation",
    "activation",
    "FcnModel",
    "CnnModel",
    "MaskSet",
    "all_ones_masks",
    "expand_filter_mask",
    "forward_fcn",
    "forward_cnn",
    "compression_ratio",
    "estimate_sup_gap",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class Activation:
    """A named activation with its Lipschitz constant; all kinds fix 0 to 0."""

    kind: str
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.kind not in ("relu", "tanh", "identity"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.lipschitz <= 0:
            raise ValueError("Lipschitz constant must be positive")

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "tanh":
            return np.tanh(x)
        return x


def activation(kind: str) -> Activation:
    return Activation(kind)


def _check_weight(w, name: str) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} has non-finite entries")
    return w


@dataclass(frozen=True)
class FcnModel:
    """Fully connected target of depth l >= 3: weights W_1..W_l with W_k of
    shape d_k x d_{k-1}, and activations sigma_1..sigma_{l-1}."""

    weights: tuple
    activations: tuple

    def __post_init__(self):
        ws = tuple(_check_weight(w, f"W_{k + 1}") for k, w in enumerate(self.weights))
        object.__setattr__(self, "weights", ws)
        if len(ws) < 3:
            raise ValueError("depth must be at least 3")
        for k in range(1, len(ws)):
            if ws[k].shape[1] != ws[k - 1].shape[0]:
                raise ValueError(f"layer {k + 1} expects input dim {ws[k].shape[1]}, got {ws[k - 1].shape[0]}")
        if len(self.activations) != len(ws) - 1:
            raise ValueError(f"expected {len(ws) - 1} activations, got {len(self.activations)}")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]


@dataclass(frozen=True)
class CnnModel:
    """Conv target of depth l >= 3 on p x p feature maps with wrap-around
    padding and stride 1 (so every layer keeps the spatial size).

    conv_tensors holds the l-1 filter banks, each (d_k, d_{k-1}, q_k, q_k)
    with q_k < p; final_dense maps the flattened (d_{l-1}, p, p) output to
    d_l; one shared activation follows every conv layer.
    """

    conv_tensors: tuple
    final_dense: np.ndarray
    act: Activation
    p: int

    def __post_init__(self):
        fs = []
        for k, f in enumerate(self.conv_tensors):
            f = np.asarray(f, dtype=np.float64)
            if f.ndim != 4 or f.shape[2] != f.shape[3]:
                raise ValueError(f"conv tensor {k + 1} must be (d_out, d_in, q, q)")
            if not np.all(np.isfinite(f)):
                raise ValueError(f"conv tensor {k + 1} has non-finite entries")
            if f.shape[2] >= self.p:
                raise ValueError(f"kernel size {f.shape[2]} must be below spatial size {self.p}")
            fs.append(f)
        object.__setattr__(self, "conv_tensors", tuple(fs))
        object.__setattr__(self, "final_dense", _check_weight(self.final_dense, "final dense layer"))
        if len(fs) < 2:
            raise ValueError("depth must be at least 3 (two conv layers plus dense)")
        for k in range(1, len(fs)):
            if fs[k].shape[1] != fs[k - 1].shape[0]:
                raise ValueError(f"conv layer {k + 1} expects {fs[k].shape[1]} input channels")
        expect = fs[-1].shape[0] * self.p * self.p
        if self.final_dense.shape[1] != expect:
            raise ValueError(f"final dense layer expects {expect} inputs, got {self.final_dense.shape[1]}")

    @property
    def depth(self) -> int:
        return len(self.conv_tensors) + 1

    @property
    def channels(self) -> tuple:
        return (self.conv_tensors[0].shape[1],) + tuple(f.shape[0] for f in self.conv_tensors)

    @property
    def kernel_sizes(self) -> tuple:
        return tuple(f.shape[2] for f in self.conv_tensors)

    @property
    def spatial_sizes(self) -> tuple:
        return (self.p,) * self.depth

    @property
    def input_dim(self) -> int:
        return self.channels[0] * self.p * self.p


def _is_binary(m: np.ndarray) -> bool:
    return bool(np.all((m == 0.0) | (m == 1.0)))


@dataclass(frozen=True)
class MaskSet:
    """Per-layer 0/1 masks; the first and last layers are never pruned.

    kind "fcn": masks[k] matches W_{k+1} elementwise.
    kind "cnn": masks[k] for a conv layer is filter-level (d_k x d_{k-1});
    zeroing entry (s, t) removes the whole kernel, hence the whole doubly
    block circulant block of the layer's linear map.  The final entry is an
    elementwise mask on the dense layer.
    """

    kind: str
    masks: tuple

    def __post_init__(self):
        if self.kind not in ("fcn", "cnn"):
            raise ValueError("mask kind must be 'fcn' or 'cnn'")
        ms = tuple(np.asarray(m, dtype=np.float64) for m in self.masks)
        object.__setattr__(self, "masks", ms)
        if len(ms) < 3:
            raise ValueError("need masks for at least 3 layers")
        for k, m in enumerate(ms):
            if m.ndim != 2:
                raise ValueError(f"mask {k + 1} must be a matrix")
            if not _is_binary(m):
                raise ValueError(f"mask {k + 1} has entries outside {{0, 1}}")
        if not np.all(ms[0] == 1.0) or not np.all(ms[-1] == 1.0):
            raise ValueError("first and last layer masks must be all ones")

    @property
    def depth(self) -> int:
        return len(self.masks)


def all_ones_masks(model) -> MaskSet:
    """The identity MaskSet for a model (prunes nothing)."""
    if isinstance(model, FcnModel):
        return MaskSet("fcn", tuple(np.ones_like(w) for w in model.weights))
    masks = [np.ones(f.shape[:2]) for f in model.conv_tensors]
    masks.append(np.ones_like(model.final_dense))
    return MaskSet("cnn", tuple(masks))


def expand_filter_mask(filter_mask: np.ndarray, p: int) -> np.ndarray:
    """Blow a filter-level (d_out, d_in) mask up to the elementwise mask of
    the layer's (p^2 d_out) x (p^2 d_in) linear map."""
    return np.kron(np.asarray(filter_mask, dtype=np.float64), np.ones((p * p, p * p)))


def _fcn_weight(model: FcnModel, mask: MaskSet | None, k: int) -> np.ndarray:
    w = model.weights[k]
    return w if mask is None else mask.masks[k] * w


def forward_fcn(model: FcnModel, x, mask: MaskSet | None = None) -> np.ndarray:
    """Masked forward pass; x is one input vector or a batch of row vectors."""
    if mask is not None and (mask.kind != "fcn" or mask.depth != model.depth):
        raise ValueError("mask does not match the model")
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    h = a[None, :] if single else a
    if h.ndim != 2 or h.shape[1] != model.input_dim:
        raise ValueError(f"input dim {h.shape[-1]} does not match d0={model.input_dim}")
    l = model.depth
    for k in range(l - 1):
        h = model.activations[k].apply(h @ _fcn_weight(model, mask, k).T)
    h = h @ _fcn_weight(model, mask, l - 1).T
    return h[0] if single else h


def forward_cnn(model: CnnModel, x, mask: MaskSet | None = None) -> np.ndarray:
    """Masked forward pass on flattened inputs of dim d0 * p^2 (or batches)."""
    if mask is not None and (mask.kind != "cnn" or mask.depth != model.depth):
        raise ValueError("mask does not match the model")
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    h = a[None, :] if single else a
    if h.ndim != 2 or h.shape[1] != model.input_dim:
        raise ValueError(f"input dim {h.shape[-1]} does not match d0*p^2={model.input_dim}")
    maps = unflatten_maps(h, model.channels[0], model.p)
    for k, f in enumerate(model.conv_tensors):
        if mask is not None:
            f = f * mask.masks[k][:, :, None, None]
        maps = model.act.apply(conv2d_wrap(maps, f))
    h = flatten_maps(maps)
    w = model.final_dense if mask is None else mask.masks[-1] * model.final_dense
    out = h @ w.T
    return out[0] if single else out


def compression_ratio(mask: MaskSet, k: int) -> float:
    """Surviving-weight fraction of layer k (1-based), computed from the mask
    under the convention that the unmasked weights have no exact zeros."""
    if not 1 <= k <= mask.depth:
        raise ValueError(f"layer index {k} out of range 1..{mask.depth}")
    return float(mask.masks[k - 1].mean())


def estimate_sup_gap(
    model,
    mask: MaskSet,
    domain: str,
    n: int,
    seed: SeedSpec,
    chunk_size: int = 256,
) -> float:
    """Sampled lower bound on sup ||f(x) - F(x)||_2 over the unit sphere or
    unit cube: the max over n sampled points.

    Nested runs with the same seed sample prefix-identical points, so the
    estimate is nondecreasing in n.
    """
    if domain not in ("sphere", "cube"):
        raise ValueError("domain must be 'sphere' or 'cube'")
    if n < 1:
        raise ValueError("need n >= 1")
    dim = model.input_dim
    pts = (sample_unit_sphere if domain == "sphere" else sample_unit_cube)(dim, n, seed)
    fwd = forward_fcn if isinstance(model, FcnModel) else forward_cnn
    best = 0.0
    for lo in range(0, n, chunk_size):
        xs = pts[lo : lo + chunk_size]
        diff = fwd(model, xs, mask) - fwd(model, xs)
        best = max(best, float(np.linalg.norm(diff, axis=1).max()))
    return best


# ---------------------------------------------------------------------------
# Versioned JSON snapshots
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def _array_doc(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def _array_from_doc(doc: dict) -> np.ndarray:
    return np.asarray(doc["data"], dtype=np.float64).reshape(doc["shape"], order="C")


def model_to_dict(model) -> dict:
    if isinstance(model, FcnModel):
        return {
            "format_version": _FORMAT_VERSION,
            "kind": "fcn",
            "widths": list(model.widths),
            "activations": [a.kind for a in model.activations],
            "weights": [_array_doc(w) for w in model.weights],
        }
    if isinstance(model, CnnModel):
        return {
            "format_version": _FORMAT_VERSION,
            "kind": "cnn",
            "channels": list(model.channels),
            "out_dim": model.final_dense.shape[0],
            "spatial_size": model.p,
            "kernel_sizes": list(model.kernel_sizes),
            "activation": model.act.kind,
            "conv_tensors": [_array_doc(f) for f in model.conv_tensors],
            "final_dense": _array_doc(model.final_dense),
        }
    raise TypeError(f"not a model: {type(model)!r}")


def model_from_dict(doc: dict):
    version = doc.get("format_version")
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    if doc["kind"] == "fcn":
        return FcnModel(
            weights=tuple(_array_from_doc(w) for w in doc["weights"]),
            activations=tuple(activation(k) for k in doc["activations"]),
        )
    if doc["kind"] == "cnn":
        return CnnModel(
            conv_tensors=tuple(_array_from_doc(f) for f in doc["conv_tensors"]),
            final_dense=_array_from_doc(doc["final_dense"]),
            act=activation(doc["activation"]),
            p=int(doc["spatial_size"]),
        )
    raise ValueError(f"unknown model kind {doc['kind']!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
