"""Gaussian-mixture trajectory PHD filter for extended targets with elliptical extents."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import (DegenerateCovarianceError, ModelConfig, Partition, TargetState,
                   TrajectoryComponent, TrajectoryMixture, as_measurement_array,
                   current_state, replace_current)
from .extent import measurement_log_pdfs, sequential_cell_update
from .models import predict_component

log = logging.getLogger(__name__)


def tphd_predict(prior: TrajectoryMixture, m: ModelConfig, k: int) -> TrajectoryMixture:
    """Predict the trajectory PHD from step ``k - 1`` to ``k``.

    Birth components come first (length 1, starting at ``k``), followed by the
    survivors with weights scaled by ``pS`` and one predicted state appended.
    """
    births = [TrajectoryComponent.from_state(w, k, x) for w, x in m.birth]
    survivors = [predict_component(c, m).with_weight(m.pS * c.weight) for c in prior]
    return TrajectoryMixture(births + survivors)


@dataclass(frozen=True)
class CellTable:
    """Per-(component, unique cell) log-likelihoods shared by both filters.

    ``cells`` lists the distinct cells over all partitions and ``index[p]``
    maps the cells of partition ``p`` into that list.
    """

    partitions: tuple[Partition, ...]
    cells: tuple[tuple[int, ...], ...]
    index: tuple[tuple[int, ...], ...]
    log_L: np.ndarray  # (J, U)
    sizes: np.ndarray  # (U,)


def build_cell_table(pred: TrajectoryMixture, Z, parts: Sequence[Partition],
                     m: ModelConfig) -> CellTable:
    z = as_measurement_array(Z)
    cells: list[tuple[int, ...]] = []
    lookup: dict[tuple[int, ...], int] = {}
    index = []
    for p in parts:
        p.validate(len(z))
        row = []
        for c in p.cells:
            if c not in lookup:
                lookup[c] = len(cells)
                cells.append(c)
            row.append(lookup[c])
        index.append(tuple(row))
    J, U = len(pred), len(cells)
    log_pdf = np.full((J, len(z)), -np.inf)
    for j, comp in enumerate(pred):
        try:
            log_pdf[j] = measurement_log_pdfs(current_state(comp), z, m)
        except DegenerateCovarianceError as exc:
            log.warning("component %d skipped in detection terms: %s", j, exc)
    log_L = np.empty((J, U))
    for u, c in enumerate(cells):
        log_L[:, u] = log_pdf[:, list(c)].sum(axis=1)
    sizes = np.array([len(c) for c in cells], dtype=int)
    return CellTable(tuple(parts), tuple(cells), tuple(index), log_L, sizes)


@dataclass(frozen=True)
class UpdateTerms:
    """Log-domain terms of the partition-sum update.

    ``log_varsigma[u]`` and ``log_varrho[u]`` are per unique cell; the value
    for cell ``c`` of partition ``p`` is found through ``table.index[p][c]``.
    """

    table: CellTable
    log_varsigma: np.ndarray
    log_varrho: np.ndarray
    log_wP: np.ndarray

    @property
    def likelihood(self) -> np.ndarray:
        return np.exp(self.table.log_L)

    @property
    def varsigma(self) -> np.ndarray:
        return np.exp(self.log_varsigma)

    @property
    def varrho(self) -> np.ndarray:
        return np.exp(self.log_varrho)

    @property
    def partition_weights(self) -> np.ndarray:
        return np.exp(self.log_wP)


def tphd_terms(pred: TrajectoryMixture, Z, parts: Sequence[Partition],
               m: ModelConfig) -> UpdateTerms:
    """Compute cell likelihoods, ``varsigma``, ``varrho`` and partition weights."""
    table = build_cell_table(pred, Z, parts, m)
    w = pred.weights
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
        log_pD = math.log(m.pD) if m.pD > 0 else -np.inf
        log_rho = math.log(m.rho) if m.rho > 0 else -np.inf
    if len(pred):
        lse = logsumexp(log_w[:, None] + table.log_L, axis=0)
    else:
        lse = np.full(len(table.cells), -np.inf)
    log_vs = log_pD - m.gamma + table.sizes * math.log(m.gamma) + lse
    log_vr = np.where(table.sizes == 1, log_rho, -np.inf)
    log_cell = np.logaddexp(log_vs, log_vr)
    raw = np.array([float(np.sum(log_cell[list(ix)])) for ix in table.index])
    norm = logsumexp(raw) if len(raw) else -np.inf
    if np.isfinite(norm):
        log_wP = raw - norm
    else:
        log_wP = np.full(len(raw), -np.inf)
    return UpdateTerms(table, log_vs, log_vr, log_wP)


def missed_detection_factor(m: ModelConfig) -> float:
    """Pseudo-likelihood of an empty measurement set, ``1 - (1 - e^-gamma) pD``."""
    return 1.0 - (1.0 - math.exp(-m.gamma)) * m.pD


def assemble_posterior(pred: TrajectoryMixture, Z, table: CellTable,
                       log_det_w: list[np.ndarray], missed_weights: np.ndarray,
                       m: ModelConfig, min_weight: float | None) -> TrajectoryMixture:
    """Build the posterior mixture from precomputed detection log-weights.

    ``log_det_w[p]`` has shape ``(n_cells_p, J)``. Components whose weight does
    not exceed ``min_weight`` are skipped (``None`` keeps everything); the
    corrected state of each (cell, component) pair is computed once and shared
    between partitions.
    """
    z = as_measurement_array(Z)
    out = [c.with_weight(wm) for c, wm in zip(pred, missed_weights)]
    cache: dict[tuple[int, int], TargetState | None] = {}
    if min_weight is not None and min_weight > 0:
        thr = math.log(min_weight)
    else:
        thr = -np.inf
    for p_idx, ix in enumerate(table.index):
        lw = log_det_w[p_idx]
        for c_pos, u in enumerate(ix):
            for j, comp in enumerate(pred):
                v = lw[c_pos, j]
                if min_weight is not None and not v > thr:
                    continue
                key = (u, j)
                if key not in cache:
                    try:
                        cache[key] = sequential_cell_update(
                            current_state(comp), z[list(table.cells[u])], m)
                    except DegenerateCovarianceError as exc:
                        log.warning("cell update skipped for component %d: %s", j, exc)
                        cache[key] = None
                x = cache[key]
                if x is None:
                    continue
                out.append(replace_current(comp, x, weight=math.exp(v)))
    return TrajectoryMixture(out)


def tphd_update(pred: TrajectoryMixture, Z, parts: Sequence[Partition], m: ModelConfig,
                *, min_weight: float | None = None) -> TrajectoryMixture:
    """Partition-sum update of the trajectory PHD.

    Parameters
    ----------
    pred : TrajectoryMixture
        Predicted PHD at step ``k``.
    Z : array_like, shape (M, 2)
    parts : sequence of Partition
        Partitions of ``range(M)``; required when ``M > 0``.
    min_weight : float, optional
        Detection components with weight at or below this value are not
        formed. With the default (``None``) every (partition, cell, component)
        triple produces a component, zero-weight ones included.

    Returns
    -------
    TrajectoryMixture
        Missed-detection components (in prediction order) followed by the
        detection components, ordered by partition, cell and component.
    """
    z = as_measurement_array(Z)
    if m.pD == 0:
        return pred
    miss = missed_detection_factor(m)
    missed_w = miss * pred.weights
    if len(z) == 0:
        return TrajectoryMixture([c.with_weight(w) for c, w in zip(pred, missed_w)])
    if not parts:
        raise ValueError("partitions are required for a nonempty measurement set")
    terms = tphd_terms(pred, z, parts, m)
    det = tphd_detection_log_weights(pred, terms, m)
    return assemble_posterior(pred, z, terms.table, det, missed_w, m, min_weight)


def tphd_detection_log_weights(pred: TrajectoryMixture, terms: UpdateTerms,
                               m: ModelConfig) -> list[np.ndarray]:
    """Log detection weights per partition, each of shape ``(n_cells, J)``."""
    table = terms.table
    with np.errstate(divide="ignore"):
        log_w = np.log(pred.weights)
        log_pD = math.log(m.pD)
    log_cell = np.logaddexp(terms.log_varsigma, terms.log_varrho)
    out = []
    for p_idx, ix in enumerate(table.index):
        u = np.array(ix, dtype=int)
        base = (log_pD - m.gamma + terms.log_wP[p_idx]
                + table.sizes[u] * math.log(m.gamma) - log_cell[u])
        with np.errstate(invalid="ignore"):
            lw = base[:, None] + table.log_L[:, u].T + log_w[None, :]
        out.append(np.where(np.isnan(lw), -np.inf, lw))
    return out
