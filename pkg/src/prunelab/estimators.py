"""Monte Carlo estimation of the spectral-norm constants of random matrices.

Two families: quantile constants (c0, delta0) for uniform-entry matrices,
and the ratio C of the observed mean spectral norm to the three
independent-entry moment terms

    term1 = max_i (sum_j E A_ij^2)^(1/2)   (rows)
    term2 = max_j (sum_i E A_ij^2)^(1/2)   (columns)
    term3 = (sum_ij E A_ij^4)^(1/4),

with the expectations estimated empirically from the sampled matrices.  A
pruned variant zeroes floor(d^(2-alpha)) entries (with replacement) per
draw before measuring.

Norms use the LAPACK SVD; at these matrix sizes and trial counts the
deterministic power-iteration routine would dominate the runtime budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .parallel import ordered_map, trial_blocks
from .pruning import filter_prune_count
from .sampling import DistributionSpec, SeedSpec, draw_matrix
from .theory import BoundReport

__all__ = [
    "Lemma3Row",
    "LatalaRow",
    "delta0_from_quantile",
    "estimate_lemma3",
    "estimate_latala",
    "latala_terms",
    "verify_latala_bound",
    "QUANTILES",
]

QUANTILES = (0.95, 0.99, 0.999, 0.9999)


@dataclass(frozen=True)
class Lemma3Row:
    """Norm statistics of one uniform-matrix configuration: the mean and std
    of the spectral norm plus per-quantile (c0, delta0) pairs, where c0 is
    the empirical q-quantile and delta0 = -ln((1-q)/2) / (4 max(n1, n2))."""

    n1: int
    n2: int
    k_scale: float
    mean: float
    std: float
    quantiles: tuple  # of (q, c0, delta0)

    def c0(self, q: float) -> float:
        for qq, c0, _ in self.quantiles:
            if qq == q:
                return c0
        raise KeyError(f"quantile {q} not recorded")

    def delta0(self, q: float) -> float:
        for qq, _, d0 in self.quantiles:
            if qq == q:
                return d0
        raise KeyError(f"quantile {q} not recorded")


@dataclass(frozen=True)
class LatalaRow:
    """One estimated configuration: the three moment terms, the observed mean
    norm, and their ratio C = mean_norm / (term1 + term2 + term3)."""

    d: int
    dist: str
    alpha: float | None
    term1: float
    term2: float
    term3: float
    mean_norm: float
    c: float


def delta0_from_quantile(n: int, q: float) -> float:
    """Closed-form delta0 solving 1 - 2 exp(-4 delta0 n) = q."""
    if n < 1 or not 0.0 < q < 1.0:
        raise ValueError("need n >= 1 and q in (0, 1)")
    return -math.log((1.0 - q) / 2.0) / (4.0 * n)


def _quantile_order_stat(sorted_values: np.ndarray, q: float) -> float:
    # order statistic at 1-based index ceil(q * N)
    n = sorted_values.size
    idx = max(1, math.ceil(q * n))
    return float(sorted_values[idx - 1])


def estimate_lemma3(
    n1: int,
    n2: int,
    k_scale: float,
    trials: int,
    seed: SeedSpec,
    quantiles: tuple = QUANTILES,
    workers: int = 1,
) -> Lemma3Row:
    """Sample `trials` matrices with entries U[-K/sqrt(n), K/sqrt(n)],
    n = max(n1, n2), and report norm statistics and quantile constants.

    Trial t draws from stream t of the seed, so any single trial can be
    reproduced in isolation and results do not depend on the worker count.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for stable quantiles")
    dist = DistributionSpec("uniform", xavier_k=k_scale)

    def block_norms(block: range) -> np.ndarray:
        out = np.empty(len(block))
        for i, t in enumerate(block):
            a = draw_matrix(dist, n1, n2, seed.child(t).generator())
            out[i] = np.linalg.svd(a, compute_uv=False)[0]
        return out

    norms = np.concatenate(ordered_map(block_norms, trial_blocks(trials), workers))
    srt = np.sort(norms)
    n = max(n1, n2)
    quants = tuple(
        (q, _quantile_order_stat(srt, q), delta0_from_quantile(n, q)) for q in quantiles
    )
    return Lemma3Row(
        n1=n1,
        n2=n2,
        k_scale=k_scale,
        mean=float(norms.mean()),
        std=float(norms.std(ddof=1)),
        quantiles=quants,
    )


def latala_terms(sq_mean: np.ndarray, quad_mean: np.ndarray) -> tuple[float, float, float]:
    """The three moment terms from per-entry estimates of E A^2 and E A^4."""
    term1 = float(np.sqrt(sq_mean.sum(axis=1).max()))
    term2 = float(np.sqrt(sq_mean.sum(axis=0).max()))
    term3 = float(quad_mean.sum() ** 0.25)
    return term1, term2, term3


def estimate_latala(
    d: int,
    dist: DistributionSpec,
    trials: int,
    seed: SeedSpec,
    prune_alpha: float | None = None,
    workers: int = 1,
) -> LatalaRow:
    """Estimate the norm-to-moment-terms ratio C for d x d draws from `dist`,
    optionally zeroing floor(d^(2-alpha)) entries at random (with
    replacement) per draw before measuring."""
    if trials < 100:
        raise ValueError("need at least 100 trials")
    n_prune = filter_prune_count(prune_alpha, d) if prune_alpha is not None else 0

    def block_stats(block: range):
        sq = np.zeros((d, d))
        quad = np.zeros((d, d))
        norms = np.empty(len(block))
        for i, t in enumerate(block):
            rng = seed.child(t).generator()
            a = draw_matrix(dist, d, d, rng)
            if n_prune:
                rows = rng.integers(0, d, size=n_prune)
                cols = rng.integers(0, d, size=n_prune)
                a[rows, cols] = 0.0
            a2 = a * a
            sq += a2
            quad += a2 * a2
            norms[i] = np.linalg.svd(a, compute_uv=False)[0]
        return sq, quad, norms

    sq_total = np.zeros((d, d))
    quad_total = np.zeros((d, d))
    all_norms = []
    for sq, quad, norms in ordered_map(block_stats, trial_blocks(trials), workers):
        sq_total += sq
        quad_total += quad
        all_norms.append(norms)
    norms = np.concatenate(all_norms)
    term1, term2, term3 = latala_terms(sq_total / trials, quad_total / trials)
    mean_norm = float(norms.mean())
    return LatalaRow(
        d=d,
        dist=dist.label(),
        alpha=prune_alpha,
        term1=term1,
        term2=term2,
        term3=term3,
        mean_norm=mean_norm,
        c=mean_norm / (term1 + term2 + term3),
    )


def verify_latala_bound(
    d: int,
    dist: DistributionSpec,
    trials: int,
    seed: SeedSpec,
    cap: float = 1.0,
    prune_alpha: float | None = None,
    workers: int = 1,
) -> BoundReport:
    """Check E||A||_2 <= cap * (term1 + term2 + term3) empirically."""
    row = estimate_latala(d, dist, trials, seed, prune_alpha=prune_alpha, workers=workers)
    rhs = cap * (row.term1 + row.term2 + row.term3)
    return BoundReport(name=f"latala_d{d}_{row.dist}", lhs=row.mean_norm, rhs=rhs)
