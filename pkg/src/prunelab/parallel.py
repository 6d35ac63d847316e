"""Deterministic trial-level parallelism.

Work is split into fixed-size blocks that do not depend on the worker
count, and block results are folded in block order, so reports are
byte-identical for any number of workers.  The worker count comes from the
PRUNELAB_WORKERS environment variable and affects wall time only.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["resolve_workers", "ordered_map", "trial_blocks", "BLOCK_SIZE"]

_ENV_VAR = "PRUNELAB_WORKERS"
BLOCK_SIZE = 25


def resolve_workers(explicit: int | None = None) -> int:
    """Explicit argument wins; otherwise PRUNELAB_WORKERS; otherwise 1."""
    if explicit is not None:
        return max(1, int(explicit))
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ValueError(f"{_ENV_VAR} must be an integer, got {raw!r}") from exc


def trial_blocks(trials: int, block_size: int = BLOCK_SIZE) -> list[range]:
    """Fixed partition of range(trials) into blocks (independent of workers)."""
    return [range(lo, min(lo + block_size, trials)) for lo in range(0, trials, block_size)]


def ordered_map(fn, items, workers: int) -> list:
    """Map preserving item order; numpy releases the GIL in the kernels that
    dominate these workloads, so threads give real parallelism."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
