"""Pruning, gated merging and trajectory extraction for the mixture PHDs."""
from __future__ import annotations

import math

import numpy as np

from .core import (KIN, SHP, CardinalityPmf, TargetState, TrajectoryComponent,
                   TrajectoryMixture, replace_current, wrap_angle)


def _merge_group(group: list[TrajectoryComponent]) -> TrajectoryComponent:
    seed = group[0]
    if len(group) == 1:
        return seed
    w = np.array([c.weight for c in group])
    W = float(w.sum())
    a = w / W
    means = np.array([c.last.mean for c in group])
    covs = np.array([c.last.cov for c in group])
    diff = means - seed.last.mean
    diff[:, 4] = wrap_angle(diff[:, 4])
    mu = seed.last.mean + a @ diff
    # moment matching around the merged mean, per block
    cov = np.zeros((7, 7))
    for blk in (KIN, SHP):
        d = diff[:, blk] - (a @ diff)[blk]
        cov[blk, blk] = np.einsum("i,ijk->jk", a, covs[:, blk, blk]) + np.einsum(
            "i,ij,ik->jk", a, d, d)
        cov[blk, blk] = 0.5 * (cov[blk, blk] + cov[blk, blk].T)
    return replace_current(seed, TargetState(mu, cov), weight=W)


def prune_and_merge(mix: TrajectoryMixture, Tp: float = 1e-5, Tmr: float = 4.0,
                    Tms: float = 1.0, Jmax: int = 300) -> TrajectoryMixture:
    """Prune low weights, merge close current states, cap the component count.

    Merging is greedy: the heaviest remaining component seeds a group of all
    remaining components whose current kinematic state is within squared
    Mahalanobis distance ``Tmr`` and whose shape is within ``Tms``, both under
    the seed's covariances. The group collapses onto the seed's history with
    a moment-matched current state (orientation differences wrapped).

    Returns
    -------
    TrajectoryMixture
        Components in the order their seeds were chosen (descending seed
        weight; merged weights need not be sorted), at most ``Jmax``.
    """
    if Tp < 0 or Tmr <= 0 or Tms <= 0 or Jmax < 0:
        raise ValueError("thresholds must be positive")
    keep = [c for c in mix if c.weight > Tp]
    if not keep:
        return TrajectoryMixture(())
    w = np.array([c.weight for c in keep])
    means = np.array([c.last.mean for c in keep])
    order = np.argsort(-w, kind="stable")
    alive = np.ones(len(keep), dtype=bool)
    merged = []
    for j in order:
        if not alive[j]:
            continue
        idx = np.flatnonzero(alive)
        cs = keep[j].last.cov
        dr = means[idx][:, KIN] - means[j, KIN]
        ds = means[idx][:, SHP] - means[j, SHP]
        ds[:, 0] = wrap_angle(ds[:, 0])
        gr = _maha(dr, cs[KIN, KIN])
        gs = _maha(ds, cs[SHP, SHP])
        sel = idx[(gr <= Tmr) & (gs <= Tms)]
        sel = np.union1d(sel, [j])
        members = set(sel.tolist())
        group = [keep[j]] + [keep[i] for i in order if i in members and i != j]
        alive[sel] = False
        merged.append(_merge_group(group))
    if len(merged) > Jmax:
        mw = np.array([c.weight for c in merged])
        top = np.sort(np.argsort(-mw, kind="stable")[:Jmax])
        merged = [merged[i] for i in top]
    return TrajectoryMixture(merged)


def _maha(d: np.ndarray, P: np.ndarray) -> np.ndarray:
    # squared Mahalanobis distance; zero rows are at distance 0 even for singular P
    out = np.empty(len(d))
    zero = ~np.any(d != 0, axis=1)
    out[zero] = 0.0
    if np.any(~zero):
        try:
            sol = np.linalg.solve(P, d[~zero].T).T
            out[~zero] = np.einsum("ij,ij->i", d[~zero], sol)
        except np.linalg.LinAlgError:
            out[~zero] = np.inf
    return out


def _top(mix: TrajectoryMixture, n: int) -> list[TrajectoryComponent]:
    n = max(0, min(int(n), len(mix)))
    w = mix.weights
    order = np.argsort(-w, kind="stable")[:n]
    return [mix[i] for i in order]


def estimate_tphd(mix: TrajectoryMixture) -> list[TrajectoryComponent]:
    """The ``round(sum of weights)`` heaviest components (half-integers round up).

    Each returned component carries its start time and full state history
    (``start_time``, ``means``, ``covs``).
    """
    if not len(mix):
        return []
    return _top(mix, math.floor(mix.total_mass + 0.5))


def estimate_tcphd(mix: TrajectoryMixture, pmf: CardinalityPmf) -> list[TrajectoryComponent]:
    """The ``argmax(pmf)`` heaviest components; ties go to the smaller count."""
    return _top(mix, pmf.argmax())
