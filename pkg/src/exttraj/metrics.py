"""Gaussian-Wasserstein distance for ellipses and the trajectory metric.

The trajectory metric between two sets of trajectories minimises, over one
assignment per time step, the sum of per-step costs plus a penalty for
changing assignments between consecutive steps:

* assigned pair, both present: ``min(d, c)^p``;
* a present trajectory left unassigned (or paired with an absent one): ``c^p / 2``;
* each assignment change: ``a^p / 2`` per changed unit of the assignment
  indicator, i.e. ``a^p`` for a full switch and ``a^p / 2`` for a half switch.

With ``p = 1`` the total equals the sum of its location, missed, false and
switch parts. The optimum is found with the assignment-indicator linear
program; when the relaxation is not integral the mixed-integer program is
solved instead, so the result is the exact minimum over assignment sequences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linear_sum_assignment, linprog, milp
from scipy.sparse import coo_matrix

from .core import TrackingError

EIG_FLOOR = 1e-12


def _sqrtm_sym(X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(X)
    w = np.sqrt(np.maximum(w, EIG_FLOOR))
    return (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)


def gwd_batch(r1, X1, r2, X2) -> np.ndarray:
    """Vectorised :func:`gwd` over leading axes (broadcasting)."""
    r1, r2 = np.asarray(r1, float), np.asarray(r2, float)
    X1, X2 = np.asarray(X1, float), np.asarray(X2, float)
    s1 = _sqrtm_sym(X1)
    M = s1 @ X2 @ s1
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    w = np.linalg.eigvalsh(M)
    cross = np.sum(np.sqrt(np.maximum(w, EIG_FLOOR)), axis=-1)
    tr = np.trace(X1, axis1=-2, axis2=-1) + np.trace(X2, axis1=-2, axis2=-1)
    d = np.sum((r1 - r2) ** 2, axis=-1) + tr - 2.0 * cross
    return np.maximum(d, 0.0)


def _check_spd(X, name):
    X = np.asarray(X, float)
    if X.shape != (2, 2) or not np.all(np.isfinite(X)):
        raise ValueError(f"{name} must be a finite 2x2 matrix")
    if np.max(np.abs(X - X.T)) > 1e-9 * max(1.0, np.max(np.abs(X))):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(X)) <= 0:
        raise ValueError(f"{name} must be positive definite")


def gwd(r1, X1, r2, X2) -> float:
    """Squared Gaussian-Wasserstein distance between two ellipses.

    ``|r1 - r2|^2 + tr(X1 + X2 - 2 (X1^1/2 X2 X1^1/2)^1/2)``.

    Raises
    ------
    ValueError
        If an extent matrix is not symmetric positive definite.
    """
    _check_spd(X1, "X1")
    _check_spd(X2, "X2")
    return float(gwd_batch(r1, X1, r2, X2))


def extent_matrices(shapes: np.ndarray) -> np.ndarray:
    """Batch ``R diag(l) diag(l) R^T`` for rows ``(theta, l1, l2)``."""
    shapes = np.asarray(shapes, float)
    c, s = np.cos(shapes[..., 0]), np.sin(shapes[..., 0])
    a, b = shapes[..., 1] ** 2, shapes[..., 2] ** 2
    X = np.empty(shapes.shape[:-1] + (2, 2))
    X[..., 0, 0] = c * c * a + s * s * b
    X[..., 1, 1] = s * s * a + c * c * b
    X[..., 0, 1] = X[..., 1, 0] = c * s * (a - b)
    return X


def state_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Default base distance: square root of the GWD between state ellipses.

    ``x`` and ``y`` hold state rows ``[px, py, vx, vy, theta, l1, l2]``.
    """
    return np.sqrt(gwd_batch(x[..., :2], extent_matrices(x[..., 4:7]),
                             y[..., :2], extent_matrices(y[..., 4:7])))


@dataclass(frozen=True)
class Trajectory:
    """A trajectory for evaluation: states at consecutive steps from ``start``."""

    start: int
    states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", np.atleast_2d(np.asarray(self.states, float)))

    @property
    def end(self) -> int:
        return self.start + len(self.states) - 1

    def truncated(self, last_step: int) -> "Trajectory | None":
        n = last_step - self.start + 1
        if n <= 0:
            return None
        return Trajectory(self.start, self.states[:n])


@dataclass(frozen=True)
class TmReport:
    """Trajectory-metric value with its decomposition.

    ``per_step`` has one row per evaluated step with columns
    ``(location, missed, false, switch)``.
    """

    total: float
    location: float
    missed: float
    false_: float
    switch_: float
    steps: np.ndarray = field(repr=False)
    per_step: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {"total": self.total, "location": self.location, "missed": self.missed,
                "false": self.false_, "switch": self.switch_}


def _presence(trajs: Sequence[Trajectory], steps: np.ndarray):
    T = len(steps)
    n = len(trajs)
    dim = trajs[0].states.shape[1] if n else 7
    present = np.zeros((T, n), dtype=bool)
    states = np.zeros((T, n, dim))
    for i, tr in enumerate(trajs):
        idx = np.arange(len(tr.states)) + tr.start - steps[0]
        ok = (idx >= 0) & (idx < T)
        present[idx[ok], i] = True
        states[idx[ok], i] = tr.states[ok]
    return present, states


def _cost_tensor(truth, est, steps, c, p, dist):
    px, sx = _presence(truth, steps)
    py, sy = _presence(est, steps)
    T, nx, ny = len(steps), len(truth), len(est)
    half = c ** p / 2.0
    D = np.zeros((T, nx + 1, ny + 1))
    base = np.zeros((T, nx, ny))
    if nx and ny:
        both = px[:, :, None] & py[:, None, :]
        if np.any(both):
            t, i, j = np.nonzero(both)
            base[t, i, j] = dist(sx[t, i], sy[t, j])
        one = px[:, :, None] ^ py[:, None, :]
        D[:, :nx, :ny] = np.where(both, np.minimum(base, c) ** p, np.where(one, half, 0.0))
    D[:, :nx, ny] = half * px
    D[:, nx, :ny] = half * py
    return D, base, px, py


def _solve_assignment(D: np.ndarray, switch: float) -> np.ndarray:
    T, X1, Y1 = D.shape
    nx, ny = X1 - 1, Y1 - 1
    nW = T * X1 * Y1
    ne = (T - 1) * nx * ny
    widx = np.arange(nW).reshape(T, X1, Y1)
    rows, cols, vals = [], [], []
    lb, ub = [], []
    r = 0
    for t in range(T):
        for i in range(nx):
            rows += [r] * Y1
            cols += widx[t, i, :].tolist()
            vals += [1.0] * Y1
            r += 1
            lb.append(1.0)
            ub.append(1.0)
        for j in range(ny):
            rows += [r] * X1
            cols += widx[t, :, j].tolist()
            vals += [1.0] * X1
            r += 1
            lb.append(1.0)
            ub.append(1.0)
    if ne:
        eidx = nW + np.arange(ne).reshape(T - 1, nx, ny)
        for t in range(T - 1):
            for i in range(nx):
                for j in range(ny):
                    a, b, e = widx[t, i, j], widx[t + 1, i, j], eidx[t, i, j]
                    rows += [r, r, r, r + 1, r + 1, r + 1]
                    cols += [e, a, b, e, a, b]
                    vals += [1.0, -1.0, 1.0, 1.0, 1.0, -1.0]
                    r += 2
                    lb += [0.0, 0.0]
                    ub += [np.inf, np.inf]
    nv = nW + ne
    cost = np.concatenate([D.ravel(), np.full(ne, switch)])
    upper = np.ones(nv)
    upper[nW:] = np.inf
    upper[widx[:, nx, ny].ravel()] = 0.0
    A = coo_matrix((vals, (rows, cols)), shape=(r, nv)).tocsr()
    lb, ub = np.array(lb), np.array(ub)
    eq = lb == ub
    kwargs = {}
    if np.any(~eq):
        kwargs = {"A_ub": -A[~eq], "b_ub": -lb[~eq]}
    res = linprog(cost, A_eq=A[eq], b_eq=lb[eq], bounds=np.column_stack([np.zeros(nv), upper]),
                  method="highs", **kwargs)
    if res.status != 0:
        raise TrackingError(f"assignment LP failed: {res.message}")
    W = res.x[:nW]
    if np.max(np.abs(W - np.round(W))) > 1e-7:
        # fractional relaxation: solve the integer program for the exact optimum
        integrality = np.zeros(nv)
        integrality[:nW] = 1
        res = milp(cost, constraints=LinearConstraint(A, lb, ub), integrality=integrality,
                   bounds=Bounds(np.zeros(nv), upper))
        if res.status != 0:
            raise TrackingError(f"assignment MILP failed: {res.message}")
        W = res.x[:nW]
    return np.round(W).reshape(T, X1, Y1)


def trajectory_metric(truth: Sequence[Trajectory], est: Sequence[Trajectory],
                      c: float = 40.0, p: float = 1.0, a: float = 2.0,
                      steps: Sequence[int] | None = None,
                      distance: Callable = state_distance) -> TmReport:
    """Trajectory metric between ``truth`` and ``est`` with its decomposition.

    Parameters
    ----------
    truth, est : sequence of Trajectory
    c : float
        Cut-off for the base distance.
    p : float
        Order, ``p >= 1``.
    a : float
        Switching penalty.
    steps : sequence of int, optional
        Consecutive evaluation steps; defaults to the union span of all
        trajectories.
    distance : callable
        Vectorised base distance between stacked states.

    Returns
    -------
    TmReport
        For ``p = 1`` ``total`` is the sum of the four parts. For other ``p``
        the parts are the ``p``-th power contributions and ``total`` is the
        ``p``-th root of their sum.
    """
    if not c > 0 or p < 1 or a < 0:
        raise ValueError("need c > 0, p >= 1 and a >= 0")
    truth, est = list(truth), list(est)
    if steps is None:
        spans = [(t.start, t.end) for t in truth + est]
        if not spans:
            return _report(np.zeros((0, 4)), np.zeros(0, int), p)
        steps = np.arange(min(s for s, _ in spans), max(e for _, e in spans) + 1)
    steps = np.asarray(steps, dtype=int)
    if len(steps) == 0:
        return _report(np.zeros((0, 4)), steps, p)
    if np.any(np.diff(steps) != 1):
        raise ValueError("evaluation steps must be consecutive")
    D, base, px, py = _cost_tensor(truth, est, steps, c, p, distance)
    nx, ny = len(truth), len(est)
    half = c ** p / 2.0
    parts = np.zeros((len(steps), 4))
    if nx == 0 or ny == 0:
        parts[:, 1] = half * px.sum(axis=1)
        parts[:, 2] = half * py.sum(axis=1)
        return _report(parts, steps, p)
    W = _solve_assignment(D, a ** p / 2.0)
    for t in range(len(steps)):
        Wt = W[t]
        for i in range(nx):
            j = int(np.argmax(Wt[i]))
            if j == ny:
                if px[t, i]:
                    parts[t, 1] += half
                continue
            if px[t, i] and py[t, j]:
                if base[t, i, j] < c:
                    parts[t, 0] += base[t, i, j] ** p
                else:
                    parts[t, 1] += half
                    parts[t, 2] += half
            elif px[t, i]:
                parts[t, 1] += half
            elif py[t, j]:
                parts[t, 2] += half
        for j in range(ny):
            if Wt[nx, j] > 0.5 and py[t, j]:
                parts[t, 2] += half
        if t > 0:
            parts[t, 3] = a ** p / 2.0 * np.sum(np.abs(W[t, :nx, :ny] - W[t - 1, :nx, :ny]))
    return _report(parts, steps, p)


def _report(parts: np.ndarray, steps: np.ndarray, p: float) -> TmReport:
    s = parts.sum(axis=0) if len(parts) else np.zeros(4)
    total = float(np.sum(s)) ** (1.0 / p)
    return TmReport(total, float(s[0]), float(s[1]), float(s[2]), float(s[3]),
                    np.asarray(steps), parts)


def online_trajectory_metric(truth: Sequence[Trajectory],
                             estimates: Mapping[int, Sequence[Trajectory]],
                             c: float = 40.0, p: float = 1.0, a: float = 2.0,
                             first_step: int = 1,
                             distance: Callable = state_distance) -> TmReport:
    """Time-normalised metric of the estimate available at each step.

    At step ``k`` the true trajectories truncated at ``k`` are compared with
    ``estimates[k]`` over steps ``first_step..k`` and the result is divided by
    the window length. The report's ``per_step`` rows hold these normalised
    decompositions, and its scalar fields are their averages over ``k``.
    """
    ks = sorted(estimates)
    rows = np.zeros((len(ks), 4))
    for r, k in enumerate(ks):
        tr = [t for t in (x.truncated(k) for x in truth) if t is not None and t.end >= first_step]
        window = np.arange(first_step, k + 1)
        rep = trajectory_metric(tr, estimates[k], c, p, a, steps=window, distance=distance)
        rows[r] = rep.per_step.sum(axis=0) / len(window)
    totals = rows.sum(axis=1) ** (1.0 / p)
    mean = rows.mean(axis=0) if len(rows) else np.zeros(4)
    return TmReport(float(totals.mean()) if len(rows) else 0.0, float(mean[0]), float(mean[1]),
                    float(mean[2]), float(mean[3]), np.asarray(ks), rows)


def per_step_gwd(truth: Sequence[Trajectory], estimates: Mapping[int, np.ndarray],
                 steps: Sequence[int]) -> np.ndarray:
    """GWD of each true target to its assigned estimate, one row per step.

    ``estimates[k]`` holds the current states ``(n, 7)`` reported at step
    ``k``. Truths and estimates are paired per step by minimum total GWD;
    entries for absent or unmatched targets are NaN.
    """
    out = np.full((len(steps), len(truth)), np.nan)
    for r, k in enumerate(steps):
        alive = [i for i, t in enumerate(truth) if t.start <= k <= t.end]
        est = np.asarray(estimates.get(k, np.zeros((0, 7))), float).reshape(-1, 7)
        if not alive or not len(est):
            continue
        x = np.array([truth[i].states[k - truth[i].start] for i in alive])
        D = gwd_batch(x[:, None, :2], extent_matrices(x[:, None, 4:7]),
                      est[None, :, :2], extent_matrices(est[None, :, 4:7]))
        rows, cols = linear_sum_assignment(D)
        out[r, np.array(alive)[rows]] = D[rows, cols]
    return out
