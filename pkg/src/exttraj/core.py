"""Shared data model: target states, trajectory Gaussians, mixtures, PMFs, partitions.

A target state stacks kinematics ``r = [px, py, vx, vy]`` and shape
``s = [theta, l1, l2]`` into a 7-vector with a block-diagonal 7x7 covariance.
A trajectory component stores one such mean/covariance pair per time step,
linked newest-first so that appending or replacing the newest step shares the
history with the parent component instead of copying it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

KIN = slice(0, 4)
SHP = slice(4, 7)
STATE_DIM = 7


class TrackingError(Exception):
    """Base class for errors raised by the filters."""


class InvalidShapeError(TrackingError, ValueError):
    """A semi-axis is non-positive or non-finite."""


class DegenerateCovarianceError(TrackingError, np.linalg.LinAlgError):
    """An innovation covariance is singular or badly conditioned."""


class EmptyMixtureError(TrackingError, ValueError):
    """An operation needs positive total mass but got none."""


class NumericalFailure(TrackingError, RuntimeError):
    """The recursion produced a non-finite or all-zero quantity."""


def wrap_angle(a):
    """Wrap angles into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


class KinematicState(NamedTuple):
    px: float
    py: float
    vx: float
    vy: float


class ShapeState(NamedTuple):
    theta: float
    l1: float
    l2: float


class Measurement(NamedTuple):
    zx: float
    zy: float


def extent_matrix(s) -> np.ndarray:
    """Extent matrix ``X = S S^T`` with ``S = R(theta) diag(l1, l2)``.

    Parameters
    ----------
    s : sequence of 3 floats
        ``(theta, l1, l2)``.

    Raises
    ------
    InvalidShapeError
        If a semi-axis is not strictly positive.
    """
    theta, l1, l2 = (float(v) for v in s)
    if not (l1 > 0 and l2 > 0) or not np.isfinite(theta):
        raise InvalidShapeError(f"invalid shape {s!r}: semi-axes must be positive")
    c, sn = np.cos(theta), np.sin(theta)
    sf = np.array([[c * l1, -sn * l2], [sn * l1, c * l2]])
    x = sf @ sf.T
    return 0.5 * (x + x.T)


@dataclass(frozen=True, eq=False)
class TargetState:
    """Gaussian over the augmented state with block-diagonal covariance."""

    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_parts(cls, r, s, cov_r, cov_s) -> "TargetState":
        mean = np.concatenate([np.asarray(r, float), np.asarray(s, float)])
        cov = np.zeros((STATE_DIM, STATE_DIM))
        cov[KIN, KIN] = cov_r
        cov[SHP, SHP] = cov_s
        return cls(mean, cov)

    @property
    def r(self) -> KinematicState:
        return KinematicState(*map(float, self.mean[KIN]))

    @property
    def s(self) -> ShapeState:
        return ShapeState(*map(float, self.mean[SHP]))

    @property
    def cov_r(self) -> np.ndarray:
        return self.cov[KIN, KIN]

    @property
    def cov_s(self) -> np.ndarray:
        return self.cov[SHP, SHP]

    def validate(self, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless the state meets its structural invariants."""
        if self.mean.shape != (STATE_DIM,) or self.cov.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("state must be a 7-vector with a 7x7 covariance")
        if not np.all(np.isfinite(self.mean)) or not np.all(np.isfinite(self.cov)):
            raise ValueError("state contains non-finite entries")
        if np.any(self.cov[KIN, SHP] != 0) or np.any(self.cov[SHP, KIN] != 0):
            raise ValueError("kinematic/shape cross-covariance must be exactly zero")
        if np.max(np.abs(self.cov - self.cov.T)) > tol * max(1.0, np.max(np.abs(self.cov))):
            raise ValueError("covariance is not symmetric")
        for blk in (self.cov_r, self.cov_s):
            if np.min(np.linalg.eigvalsh(blk)) < -tol * max(1.0, np.max(np.abs(blk))):
                raise ValueError("covariance block is not PSD")
        if self.mean[5] <= 0 or self.mean[6] <= 0:
            raise InvalidShapeError("semi-axes must be positive")


class _Step(NamedTuple):
    # newest-first linked history node
    mean: np.ndarray
    cov: np.ndarray
    prev: "_Step | None"


@dataclass(frozen=True, eq=False)
class TrajectoryComponent:
    """One weighted trajectory Gaussian.

    The trajectory starts at step ``start_time`` and has ``length`` states, so
    at filter step ``k`` it satisfies ``start_time + length - 1 == k``.
    Cross-time covariance blocks are not stored (they are treated as zero).

    ``track_id`` is bookkeeping for output files only; it plays no role in the
    recursion. ``-1`` means "not yet reported".
    """

    weight: float
    start_time: int
    length: int
    last: _Step = field(repr=False)
    track_id: int = -1

    @classmethod
    def from_state(cls, weight: float, start_time: int, x: TargetState,
                   track_id: int = -1) -> "TrajectoryComponent":
        return cls(float(weight), int(start_time), 1, _Step(x.mean, x.cov, None), track_id)

    @classmethod
    def from_arrays(cls, weight: float, start_time: int, means, covs,
                    track_id: int = -1) -> "TrajectoryComponent":
        means = np.asarray(means, float)
        covs = np.asarray(covs, float)
        if means.ndim != 2 or len(means) == 0 or len(means) != len(covs):
            raise ValueError("means and covs must be non-empty and of equal length")
        node = None
        for mu, cv in zip(means, covs):
            node = _Step(mu.copy(), cv.copy(), node)
        return cls(float(weight), int(start_time), len(means), node, track_id)

    @property
    def end_time(self) -> int:
        return self.start_time + self.length - 1

    def _nodes(self) -> list[_Step]:
        out = []
        node = self.last
        while node is not None:
            out.append(node)
            node = node.prev
        out.reverse()
        return out

    @property
    def means(self) -> np.ndarray:
        """Stacked state means, shape ``(length, 7)``, oldest first."""
        return np.array([n.mean for n in self._nodes()])

    @property
    def covs(self) -> np.ndarray:
        """Per-step covariances, shape ``(length, 7, 7)``, oldest first."""
        return np.array([n.cov for n in self._nodes()])

    def with_weight(self, w: float) -> "TrajectoryComponent":
        return replace(self, weight=float(w))


def current_state(c: TrajectoryComponent) -> TargetState:
    """The newest (time-k) marginal of a trajectory component."""
    return TargetState(c.last.mean, c.last.cov)


def append_state(c: TrajectoryComponent, x: TargetState) -> TrajectoryComponent:
    """Extend the trajectory by one step; earlier steps are shared, not copied."""
    return replace(c, length=c.length + 1, last=_Step(x.mean, x.cov, c.last))


def replace_current(c: TrajectoryComponent, x: TargetState,
                    weight: float | None = None) -> TrajectoryComponent:
    """Swap the newest state for ``x`` (used when a prediction is corrected)."""
    w = c.weight if weight is None else float(weight)
    return replace(c, weight=w, last=_Step(x.mean, x.cov, c.last.prev))


@dataclass(frozen=True)
class TrajectoryMixture:
    """Gaussian-mixture trajectory PHD."""

    components: tuple[TrajectoryComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[TrajectoryComponent]:
        return iter(self.components)

    def __getitem__(self, i) -> TrajectoryComponent:
        return self.components[i]

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=float)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights)) if self.components else 0.0


@dataclass(frozen=True, eq=False)
class CardinalityPmf:
    """Cardinality distribution over ``n = 0..N_max``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("PMF must be a non-empty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("PMF entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"PMF sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_unnormalized(cls, values, n_max: int | None = None) -> "CardinalityPmf":
        """Truncate at ``n_max`` and renormalize."""
        v = np.asarray(values, dtype=float)
        if n_max is not None:
            v = v[: n_max + 1]
        s = v.sum()
        if not np.isfinite(s) or s <= 0:
            raise NumericalFailure("cardinality PMF is all zero or non-finite")
        return cls(v / s)

    @classmethod
    def delta(cls, n: int, n_max: int) -> "CardinalityPmf":
        p = np.zeros(n_max + 1)
        p[n] = 1.0
        return cls(p)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        return float(np.arange(len(self.probs)) @ self.probs)

    def argmax(self) -> int:
        # np.argmax returns the first maximum, i.e. the smallest index on ties
        return int(np.argmax(self.probs))


Cell = tuple[int, ...]


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of ``range(n)`` by nonempty cells.

    Cells are stored as sorted tuples ordered by their smallest index, so two
    partitions are equal exactly when they group the indices the same way.
    """

    cells: tuple[Cell, ...]

    def __post_init__(self):
        cells = tuple(sorted((tuple(sorted(int(i) for i in c)) for c in self.cells),
                             key=lambda c: c[0] if c else -1))
        seen: set[int] = set()
        for c in cells:
            if not c:
                raise ValueError("partition contains an empty cell")
            if seen.intersection(c):
                raise ValueError("partition cells overlap")
            seen.update(c)
        object.__setattr__(self, "cells", cells)

    def validate(self, n: int) -> None:
        """Raise ``ValueError`` unless the cells cover exactly ``range(n)``."""
        covered = sorted(i for c in self.cells for i in c)
        if covered != list(range(n)):
            raise ValueError(f"partition does not cover range({n})")

    @property
    def size(self) -> int:
        return len(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)


def as_measurement_array(Z) -> np.ndarray:
    """Coerce a measurement collection to a float array of shape ``(M, 2)``."""
    z = np.asarray(Z, dtype=float)
    if z.size == 0:
        return np.zeros((0, 2))
    z = z.reshape(-1, 2)
    if not np.all(np.isfinite(z)):
        raise ValueError("measurements must be finite")
    return z


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Static model constants shared by prediction and update.

    Matrices are stored as given; ``F``/``Q`` are the 7x7 block-diagonal
    assemblies. ``birth`` is a tuple of ``(weight, TargetState)`` pairs.
    """

    Ts: float
    Fr: np.ndarray
    Fs: np.ndarray
    Qr: np.ndarray
    Qs: np.ndarray
    H: np.ndarray
    Qh: np.ndarray
    Qe: np.ndarray
    gamma: float
    lambdaC: float
    region: tuple[float, float, float, float]
    pD: float
    pS: float
    birth: tuple[tuple[float, TargetState], ...] = ()
    Nmax: int = 50
    l_min: float = 0.1

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.region
        return float((x1 - x0) * (y1 - y0))

    @property
    def rho(self) -> float:
        return self.lambdaC / self.area

    @cached_property
    def Hr(self) -> np.ndarray:
        return np.asarray(self.H, float)[:, KIN]

    @property
    def birth_mass(self) -> float:
        return float(sum(w for w, _ in self.birth))


def total_mass(components: Iterable[TrajectoryComponent]) -> float:
    return float(sum(c.weight for c in components))


def check_end_times(mix: TrajectoryMixture | Sequence[TrajectoryComponent], k: int) -> None:
    """Raise ``AssertionError`` if any component does not end at step ``k``."""
    for c in mix:
        if c.start_time + c.length - 1 != k:
            raise AssertionError(
                f"component starting at {c.start_time} with length {c.length} does not end at {k}")
