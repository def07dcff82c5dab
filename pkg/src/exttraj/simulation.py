"""Ground-truth scenarios and measurement synthesis."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ModelConfig, TargetState, extent_matrix
from .extent import shape_factor
from .metrics import Trajectory


@dataclass(frozen=True)
class TargetScript:
    """Piecewise constant-velocity target.

    ``motion`` lists ``(from_step, (vx, vy))`` velocity changes applied at the
    start of the given step; with ``heading_aligned`` the orientation follows
    the velocity direction, otherwise ``shape[0]`` is kept.
    """

    birth: int
    death: int
    initial: tuple[float, float, float, float]
    shape: tuple[float, float, float]
    motion: tuple[tuple[int, tuple[float, float]], ...] = ()
    heading_aligned: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    duration: int
    region: tuple[float, float, float, float]
    targets: tuple[TargetScript, ...]
    Ts: float = 1.0
    seed: int = 0
    name: str = "custom"

    def validate(self) -> None:
        x0, x1, y0, y1 = self.region
        for n, t in enumerate(self.targets):
            if not 1 <= t.birth <= t.death <= self.duration:
                raise ValueError(f"target {n}: need 1 <= birth <= death <= duration")
            if not (x0 <= t.initial[0] <= x1 and y0 <= t.initial[1] <= y1):
                raise ValueError(f"target {n}: initial position outside the region")
            if t.shape[1] <= 0 or t.shape[2] <= 0:
                raise ValueError(f"target {n}: semi-axes must be positive")


def scenario1(seed: int = 0) -> ScenarioConfig:
    """Four targets converging on the region centre over 80 steps.

    Targets 3 and 4 travel side by side about 80 m apart during steps 15-29.
    """
    shape = (0.0, 40.0, 30.0)
    targets = (
        TargetScript(1, 80, (0.0, 0.0, 12.0, 10.0), shape),
        TargetScript(1, 80, (0.0, 125.0, 10.0, 12.0), shape),
        TargetScript(1, 80, (2000.0, 2000.0, -12.0, -10.0), shape,
                     ((15, (-12.0, -8.0)), (30, (-10.0, -12.0)))),
        TargetScript(1, 80, (2000.0, 1890.0, -12.0, -8.0), shape,
                     ((30, (-14.0, -6.0)),)),
    )
    return ScenarioConfig(80, (-100.0, 2100.0, -100.0, 2100.0), targets, 1.0, seed, "scenario1")


def generate_ground_truth(sc: ScenarioConfig) -> list[Trajectory]:
    """Deterministic piecewise-CV trajectories; states are 7-vectors per step."""
    sc.validate()
    out = []
    for t in sc.targets:
        px, py, vx, vy = t.initial
        changes = dict(t.motion)
        rows = []
        for k in range(t.birth, t.death + 1):
            if k > t.birth:
                if k in changes:
                    vx, vy = changes[k]
                px += vx * sc.Ts
                py += vy * sc.Ts
            elif k in changes:
                vx, vy = changes[k]
            theta = math.atan2(vy, vx) if (t.heading_aligned and (vx or vy)) else t.shape[0]
            rows.append([px, py, vx, vy, theta, t.shape[1], t.shape[2]])
        out.append(Trajectory(t.birth, np.array(rows)))
    return out


def step_rng(seed: int, run: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent generator for a (master seed, run, stream) triple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), run, stream]))


def _uniform_disk(rng: np.random.Generator, n: int) -> np.ndarray:
    r = np.sqrt(rng.uniform(size=n))
    a = rng.uniform(0, 2 * np.pi, size=n)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def generate_measurements(truth: Sequence[Trajectory], m: ModelConfig, seed: int = 0,
                          duration: int | None = None, *, run: int = 0,
                          uniform_extent: bool = False) -> list[np.ndarray]:
    """Synthesise one measurement array of shape ``(M_k, 2)`` per step ``k = 1..K``.

    Target returns follow ``z = H r + S h + e``; with ``uniform_extent`` the
    term ``S h`` is replaced by a point drawn uniformly inside the ellipse.
    Clutter is Poisson in count and uniform over the region. Each scan is
    shuffled.
    """
    K = duration if duration is not None else max((t.end for t in truth), default=0)
    rng = step_rng(seed, run, 1)
    x0, x1, y0, y1 = m.region
    Lh = np.linalg.cholesky(m.Qh) if np.any(m.Qh) else np.zeros((2, 2))
    Le = np.linalg.cholesky(m.Qe) if np.any(m.Qe) else np.zeros((2, 2))
    scans = []
    for k in range(1, K + 1):
        parts = []
        for tr in truth:
            if not tr.start <= k <= tr.end:
                continue
            x = tr.states[k - tr.start]
            if rng.uniform() >= m.pD:
                continue
            n = rng.poisson(m.gamma)
            S = shape_factor(x[4:7])
            if uniform_extent:
                spread = _uniform_disk(rng, n) @ S.T
            else:
                spread = rng.standard_normal((n, 2)) @ Lh.T @ S.T
            noise = rng.standard_normal((n, 2)) @ Le.T
            parts.append(x[:2] + spread + noise)
        nc = rng.poisson(m.lambdaC)
        parts.append(np.column_stack([rng.uniform(x0, x1, nc), rng.uniform(y0, y1, nc)]))
        z = np.vstack(parts) if parts else np.zeros((0, 2))
        scans.append(z[rng.permutation(len(z))])
    return scans


def scenario1_birth(truth: Sequence[Trajectory], seed: int = 0, run: int = 0,
                    weight: float = 0.1, shape=(0.0, 45.0, 35.0),
                    cov_r=(50.0, 50.0, 5.0, 5.0), cov_s=(0.2, 100.0, 100.0),
                    offset_std=(10.0, 10.0)) -> tuple[tuple[float, TargetState], ...]:
    """Birth components at the true initial positions plus a seeded offset, zero velocity."""
    rng = step_rng(seed, run, 0)
    out = []
    for tr in truth:
        pos = tr.states[0, :2] + rng.standard_normal(2) * np.asarray(offset_std)
        x = TargetState.from_parts([pos[0], pos[1], 0.0, 0.0], shape, np.diag(cov_r), np.diag(cov_s))
        out.append((float(weight), x))
    return tuple(out)


def expected_spread(shape) -> np.ndarray:
    """Covariance of ``S h`` for ``h ~ N(0, I/4)``."""
    return extent_matrix(shape) / 4.0
