"""The five mask-producing pruning schemes.

Random with replacement, random without replacement, layer-wise magnitude,
global magnitude (all four for FCN weight matrices), and random filter
pruning for CNN conv layers.  Every scheme leaves the first and last layers
untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .networks import CnnModel, FcnModel, MaskSet
from .sampling import SeedSpec

__all__ = [
    "PruneSpec",
    "prune_count",
    "filter_prune_count",
    "mask_random_with_replacement",
    "mask_random_without_replacement",
    "mask_magnitude_layerwise",
    "mask_magnitude_global",
    "mask_filter_random",
    "build_mask",
]

_SCHEMES = (
    "random-with-replacement",
    "random-without-replacement",
    "magnitude-layerwise",
    "magnitude-global",
    "filter-random",
)


@dataclass(frozen=True)
class PruneSpec:
    """Scheme selector plus either the exponent alpha or explicit counts.

    alpha lies in (0, 1) for the FCN schemes and (0, 2) for filter-random;
    counts give the number of pruned entries (or filters) per internal
    layer, except for magnitude-global where a single total is given.
    Random schemes require a seed.
    """

    scheme: str
    alpha: float | None = None
    counts: tuple | None = None
    seed: SeedSpec | None = None

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if (self.alpha is None) == (self.counts is None):
            raise ValueError("exactly one of alpha / counts must be given")
        if self.alpha is not None:
            hi = 2.0 if self.scheme == "filter-random" else 1.0
            if not 0.0 < self.alpha < hi:
                raise ValueError(f"alpha must lie in (0, {hi:g}) for {self.scheme}")
        if self.counts is not None:
            object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
            if any(c < 0 for c in self.counts):
                raise ValueError("counts must be nonnegative")
        needs_seed = self.scheme in (
            "random-with-replacement",
            "random-without-replacement",
            "filter-random",
        )
        if needs_seed and self.seed is None:
            raise ValueError(f"{self.scheme} requires a seed")


def _floor_pow(base: float, expo: float) -> int:
    # floor of base**expo with a guard so exact integer powers do not land
    # one below because of float rounding (e.g. 1048576**0.5)
    x = float(base) ** float(expo)
    nearest = round(x)
    if nearest > 0 and abs(x - nearest) <= 1e-9 * nearest:
        return int(nearest)
    return math.floor(x)


def prune_count(alpha: float, num_weights: int) -> int:
    """Pruned-entry count floor(D^(1-alpha)) for a layer with D weights."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if num_weights < 1:
        raise ValueError("layer must have at least one weight")
    return _floor_pow(num_weights, 1.0 - alpha)


def filter_prune_count(alpha: float, channels: int) -> int:
    """Pruned-filter count floor(d^(2-alpha)) for a d x d filter grid."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2) for filter pruning")
    if channels < 1:
        raise ValueError("channel count must be positive")
    return _floor_pow(channels, 2.0 - alpha)


def _check_layers(shapes, counts, replace: bool):
    shapes = [tuple(int(x) for x in s) for s in shapes]
    if len(shapes) < 3:
        raise ValueError("need at least 3 layers")
    counts = tuple(int(c) for c in counts)
    if len(counts) != len(shapes) - 2:
        raise ValueError(f"expected {len(shapes) - 2} counts for internal layers, got {len(counts)}")
    for (m, n), c in zip(shapes[1:-1], counts):
        if c > m * n and not replace:
            raise ValueError(f"cannot prune {c} of {m * n} weights without replacement")
    return shapes, counts


def mask_random_with_replacement(shapes, counts, seed: SeedSpec) -> MaskSet:
    """Uniform (row, column) pairs drawn independently `count` times per
    internal layer; repeated pairs collapse, so at most `count` zeros."""
    shapes, counts = _check_layers(shapes, counts, replace=True)
    rng = seed.generator()
    masks = [np.ones(shapes[0])]
    for (m, n), c in zip(shapes[1:-1], counts):
        mask = np.ones((m, n))
        rows = rng.integers(0, m, size=c)
        cols = rng.integers(0, n, size=c)
        mask[rows, cols] = 0.0
        masks.append(mask)
    masks.append(np.ones(shapes[-1]))
    return MaskSet("fcn", tuple(masks))


def mask_random_without_replacement(shapes, counts, seed: SeedSpec) -> MaskSet:
    """Exactly `count` zeros per internal layer, uniform over index subsets."""
    shapes, counts = _check_layers(shapes, counts, replace=False)
    rng = seed.generator()
    masks = [np.ones(shapes[0])]
    for (m, n), c in zip(shapes[1:-1], counts):
        mask = np.ones(m * n)
        if c > 0:
            mask[rng.choice(m * n, size=c, replace=False)] = 0.0
        masks.append(mask.reshape(m, n))
    masks.append(np.ones(shapes[-1]))
    return MaskSet("fcn", tuple(masks))


def _smallest_magnitude_indices(w: np.ndarray, count: int) -> np.ndarray:
    # stable sort on C-order |entries|: ties break by (row, column), and
    # exact zeros sort first
    order = np.argsort(np.abs(w).ravel(order="C"), kind="stable")
    return order[:count]


def mask_magnitude_layerwise(weights, counts) -> MaskSet:
    """Zero the `count` smallest-magnitude entries of each internal layer."""
    ws = [np.asarray(w, dtype=np.float64) for w in weights]
    shapes, counts = _check_layers([w.shape for w in ws], counts, replace=False)
    masks = [np.ones(shapes[0])]
    for w, c in zip(ws[1:-1], counts):
        mask = np.ones(w.size)
        mask[_smallest_magnitude_indices(w, c)] = 0.0
        masks.append(mask.reshape(w.shape))
    masks.append(np.ones(shapes[-1]))
    return MaskSet("fcn", tuple(masks))


def mask_magnitude_global(weights, total_count: int) -> MaskSet:
    """Zero the `total_count` smallest-magnitude entries across all internal
    layers pooled together (first/last layers excluded from the pool).

    Ties break by (layer, row, column)."""
    ws = [np.asarray(w, dtype=np.float64) for w in weights]
    if len(ws) < 3:
        raise ValueError("need at least 3 layers")
    pool_sizes = [w.size for w in ws[1:-1]]
    total = sum(pool_sizes)
    total_count = int(total_count)
    if not 0 <= total_count <= total:
        raise ValueError(f"total count {total_count} out of range 0..{total}")
    flat = np.concatenate([np.abs(w).ravel(order="C") for w in ws[1:-1]])
    chosen = np.argsort(flat, kind="stable")[:total_count]
    masks = [np.ones(ws[0].shape)]
    offset = 0
    for w in ws[1:-1]:
        mask = np.ones(w.size)
        local = chosen[(chosen >= offset) & (chosen < offset + w.size)] - offset
        mask[local] = 0.0
        masks.append(mask.reshape(w.shape))
        offset += w.size
    masks.append(np.ones(ws[-1].shape))
    return MaskSet("fcn", tuple(masks))


def mask_filter_random(conv_shapes, dense_shape, counts, seed: SeedSpec) -> MaskSet:
    """Random filter pruning for CNNs: draw `count` (out, in) channel pairs
    with replacement per internal conv layer and zero those whole kernels.
    The first conv layer and the final dense layer are never pruned."""
    conv_shapes = [tuple(int(x) for x in s) for s in conv_shapes]
    if len(conv_shapes) < 2:
        raise ValueError("need at least two conv layers")
    counts = tuple(int(c) for c in counts)
    if len(counts) != len(conv_shapes) - 1:
        raise ValueError(f"expected {len(conv_shapes) - 1} counts for prunable conv layers, got {len(counts)}")
    rng = seed.generator()
    masks = [np.ones(conv_shapes[0])]
    for (m, n), c in zip(conv_shapes[1:], counts):
        mask = np.ones((m, n))
        rows = rng.integers(0, m, size=c)
        cols = rng.integers(0, n, size=c)
        mask[rows, cols] = 0.0
        masks.append(mask)
    masks.append(np.ones(dense_shape))
    return MaskSet("cnn", tuple(masks))


def build_mask(model, spec: PruneSpec) -> MaskSet:
    """Build a MaskSet for a model from a PruneSpec, deriving per-layer
    counts from alpha when counts are not explicit."""
    if isinstance(model, FcnModel):
        if spec.scheme == "filter-random":
            raise ValueError("filter-random applies to CNN models")
        shapes = [w.shape for w in model.weights]
        if spec.scheme == "magnitude-global":
            if spec.counts is not None:
                if len(spec.counts) != 1:
                    raise ValueError("magnitude-global takes a single total count")
                total = spec.counts[0]
            else:
                total = sum(prune_count(spec.alpha, m * n) for m, n in shapes[1:-1])
            return mask_magnitude_global(model.weights, total)
        counts = spec.counts
        if counts is None:
            counts = tuple(prune_count(spec.alpha, m * n) for m, n in shapes[1:-1])
        if spec.scheme == "random-with-replacement":
            return mask_random_with_replacement(shapes, counts, spec.seed)
        if spec.scheme == "random-without-replacement":
            return mask_random_without_replacement(shapes, counts, spec.seed)
        return mask_magnitude_layerwise(model.weights, counts)
    if isinstance(model, CnnModel):
        if spec.scheme != "filter-random":
            raise ValueError(f"{spec.scheme} applies to FCN models")
        conv_shapes = [f.shape[:2] for f in model.conv_tensors]
        counts = spec.counts
        if counts is None:
            counts = []
            for d_out, d_in in conv_shapes[1:]:
                if d_out != d_in:
                    raise ValueError(
                        "alpha-based filter counts need homogeneous internal channels; pass explicit counts"
                    )
                counts.append(filter_prune_count(spec.alpha, d_out))
            counts = tuple(counts)
        return mask_filter_random(conv_shapes, model.final_dense.shape, counts, spec.seed)
    raise TypeError(f"not a model: {type(model)!r}")
