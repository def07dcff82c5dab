"""Step-by-step driver tying prediction, partitioning, update, reduction and extraction."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (CardinalityPmf, ModelConfig, NumericalFailure, TrajectoryComponent,
                   TrajectoryMixture, check_end_times)
from .partitioning import default_thresholds, distance_partitions, with_pooled_singletons
from .reduction import estimate_tcphd, estimate_tphd, prune_and_merge
from .tcphd import tcphd_predict, tcphd_update
from .tphd import tphd_predict, tphd_update

FILTERS = ("tphd-e", "tcphd-e")

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReductionConfig:
    Tp: float = 1e-5
    Tmr: float = 4.0
    Tms: float = 1.0
    Jmax: int = 300


@dataclass
class StepResult:
    step: int
    estimates: list[TrajectoryComponent]
    n_components: int
    mass: float
    pmf: CardinalityPmf | None = None


@dataclass
class FilterRun:
    filter: str
    steps: list[StepResult] = field(default_factory=list)
    runtime_s: float = 0.0


class Tracker:
    """Runs one filter over a sequence of scans.

    Parameters
    ----------
    m : ModelConfig
    filter : {"tphd-e", "tcphd-e"}
    reduction : ReductionConfig
    thresholds : sequence of float, optional
        Distance-partition thresholds; defaults to :func:`default_thresholds`.
    pgf : {"closed-form", "exact"}
        Generating-function family for the CPHD update.
    pool_singletons : bool, optional
        Add singleton-pooled partition variants so that scattered false alarms
        can form the single clutter cell of the CPHD hypotheses. Defaults to
        ``True`` for the CPHD filter and ``False`` for the PHD filter.
    check : callable, optional
        Called as ``check(mixture, k)`` after every update and after every
        reduction, e.g. to verify structural invariants.
    """

    def __init__(self, m: ModelConfig, filter: str = "tphd-e",
                 reduction: ReductionConfig = ReductionConfig(),
                 thresholds: Sequence[float] | None = None, pgf: str = "closed-form",
                 pool_singletons: bool | None = None,
                 check: Callable[[TrajectoryMixture, int], None] | None = None):
        if filter not in FILTERS:
            raise ValueError(f"unknown filter {filter!r}; expected one of {FILTERS}")
        self.m = m
        self.filter = filter
        self.red = reduction
        self.thresholds = list(thresholds) if thresholds is not None else default_thresholds(m)
        self.pgf = pgf
        self.pool = (filter == "tcphd-e") if pool_singletons is None else pool_singletons
        self.check = check
        self.mix = TrajectoryMixture(())
        self.pmf = CardinalityPmf.delta(0, m.Nmax)
        self.k = 0
        self._next_id = 0

    def _partitions(self, z: np.ndarray):
        parts = distance_partitions(z, self.thresholds)
        return with_pooled_singletons(parts) if self.pool else parts

    def step(self, z: np.ndarray) -> StepResult:
        k = self.k + 1
        m, red = self.m, self.red
        parts = self._partitions(z)
        try:
            if self.filter == "tphd-e":
                pred = tphd_predict(self.mix, m, k)
                post = tphd_update(pred, z, parts, m, min_weight=red.Tp)
                pmf = None
            else:
                pred, pmf_pred = tcphd_predict(self.mix, self.pmf, m, k)
                post, pmf = tcphd_update(pred, pmf_pred, z, parts, m, pgf=self.pgf,
                                         min_weight=red.Tp)
        except NumericalFailure as exc:
            raise NumericalFailure(f"step {k}: {exc}") from exc
        if not np.all(np.isfinite(post.weights)):
            raise NumericalFailure(f"step {k}: non-finite posterior weights")
        if self.check is not None:
            self.check(post, k)
        if pmf is not None and pmf.mean() > 0:
            # consistency of intensity mass and cardinality mean; not enforced
            log.debug("step %d: PHD mass / PMF mean = %.3f", k, post.total_mass / pmf.mean())
        mix = prune_and_merge(post, red.Tp, red.Tmr, red.Tms, red.Jmax)
        est = estimate_tphd(mix) if pmf is None else estimate_tcphd(mix, pmf)
        mix, est = self._label(mix, est)
        if self.check is not None:
            self.check(mix, k)
        self.mix, self.k = mix, k
        if pmf is not None:
            self.pmf = pmf
        return StepResult(k, est, len(mix), mix.total_mass, pmf)

    def _label(self, mix: TrajectoryMixture, est: list[TrajectoryComponent]):
        # give reported components unique, lineage-stable output ids
        used: set[int] = set()
        relabel: dict[int, TrajectoryComponent] = {}
        for c in est:
            if c.track_id < 0 or c.track_id in used:
                relabel[id(c)] = replace(c, track_id=self._next_id)
                self._next_id += 1
            used.add(relabel[id(c)].track_id if id(c) in relabel else c.track_id)
        if not relabel:
            return mix, est
        new_mix = TrajectoryMixture([relabel.get(id(c), c) for c in mix])
        return new_mix, [relabel.get(id(c), c) for c in est]


def run_filter(scans: Sequence[np.ndarray], m: ModelConfig, filter: str = "tphd-e",
               **kwargs) -> FilterRun:
    """Run a :class:`Tracker` over all scans (step ``k`` uses ``scans[k-1]``)."""
    tr = Tracker(m, filter, **kwargs)
    out = FilterRun(filter)
    t0 = time.perf_counter()
    for z in scans:
        out.steps.append(tr.step(np.asarray(z, float)))
    out.runtime_s = time.perf_counter() - t0
    return out


def end_time_checker(mix: TrajectoryMixture, k: int) -> None:
    """``check`` callback asserting every component ends at step ``k``."""
    check_end_times(mix, k)
