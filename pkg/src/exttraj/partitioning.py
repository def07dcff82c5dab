"""Measurement-set partitions: distance-based generation and exhaustive enumeration."""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .core import ModelConfig, Partition, as_measurement_array, extent_matrix

MAX_EXHAUSTIVE = 10


def _components(dist: np.ndarray, d: float) -> Partition:
    n = dist.shape[0]
    i, j = np.nonzero(np.triu(dist < d, k=1))
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    cells: dict[int, list[int]] = {}
    for idx, lab in enumerate(labels):
        cells.setdefault(int(lab), []).append(idx)
    return Partition(tuple(tuple(c) for c in cells.values()))


def distance_partitions(Z, thresholds: Sequence[float]) -> list[Partition]:
    """Partitions whose cells are connected components at each distance threshold.

    Two measurements are linked when their Euclidean distance is strictly below
    the threshold. Duplicate partitions are dropped, keeping the first (smallest
    threshold) occurrence.

    Parameters
    ----------
    Z : array_like, shape (M, 2)
    thresholds : sequence of float
        Strictly increasing distances in meters.

    Returns
    -------
    list of Partition
        ``[Partition(())]`` when ``Z`` is empty.
    """
    th = [float(t) for t in thresholds]
    if not th:
        raise ValueError("at least one threshold is required")
    if any(b <= a for a, b in zip(th, th[1:])):
        raise ValueError("thresholds must be strictly increasing")
    z = as_measurement_array(Z)
    if len(z) == 0:
        return [Partition(())]
    dist = squareform(pdist(z)) if len(z) > 1 else np.zeros((1, 1))
    out: list[Partition] = []
    for d in th:
        p = _components(dist, d)
        if p not in out:
            out.append(p)
    return out


def _restricted_growth(n: int) -> Iterator[list[int]]:
    # set partitions of range(n) as restricted growth strings
    a = [0] * n

    def rec(i: int, m: int):
        if i == n:
            yield list(a)
            return
        for v in range(m + 1):
            a[i] = v
            yield from rec(i + 1, max(m, v + 1))

    if n == 0:
        yield []
        return
    yield from rec(1, 1)


def all_partitions(Z) -> list[Partition]:
    """Every set partition of the measurement indices (Bell(|Z|) of them).

    Raises
    ------
    ValueError
        If more than ``MAX_EXHAUSTIVE`` measurements are given.
    """
    n = len(as_measurement_array(Z))
    if n > MAX_EXHAUSTIVE:
        raise ValueError(f"exhaustive enumeration is limited to {MAX_EXHAUSTIVE} measurements")
    if n == 0:
        return [Partition(())]
    out = []
    for rgs in _restricted_growth(n):
        cells: dict[int, list[int]] = {}
        for idx, lab in enumerate(rgs):
            cells.setdefault(lab, []).append(idx)
        out.append(Partition(tuple(tuple(c) for c in cells.values())))
    return out


def pool_singletons(p: Partition) -> Partition:
    """Merge all singleton cells of ``p`` into one cell (no-op with fewer than two)."""
    singles = [c[0] for c in p.cells if len(c) == 1]
    if len(singles) < 2:
        return p
    rest = [c for c in p.cells if len(c) > 1]
    return Partition(tuple(rest) + (tuple(singles),))


def with_pooled_singletons(parts: Sequence[Partition]) -> list[Partition]:
    """Input partitions followed by their singleton-pooled variants, deduplicated."""
    out = list(parts)
    for p in parts:
        q = pool_singletons(p)
        if q not in out:
            out.append(q)
    return out


def default_thresholds(m: ModelConfig, factors: Sequence[float] = (1, 2, 3, 4)) -> list[float]:
    """Thresholds tied to the per-measurement spread around a target centre.

    The spread is ``sqrt(tr(Qe)/2 + tr(S Qh S^T)/2)`` with the shape factor taken
    from the mean birth extent, i.e. the RMS per-axis deviation of a single
    target-originated measurement from the target centre.
    """
    if m.birth:
        ext = np.mean([np.trace(extent_matrix(x.mean[4:])) for _, x in m.birth])
    else:
        ext = 0.0
    qh = float(np.trace(m.Qh)) / 2.0
    sigma = np.sqrt(np.trace(m.Qe) / 2.0 + qh * ext / 2.0)
    return [float(f * sigma) for f in factors]
