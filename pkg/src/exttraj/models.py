"""Constant-velocity kinematics with a random-walk shape, and trajectory prediction."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (KIN, SHP, ModelConfig, TargetState, TrajectoryComponent,
                   append_state, current_state)


def build_model(*, Ts: float = 1.0, q_r: float = 10.0, q_theta: float = 0.05,
                q_l: float = 0.1, q_e: float = 10.0, pD: float = 0.98,
                pS: float = 0.99, gamma: float = 20.0, lambdaC: float = 10.0,
                region: Sequence[float] = (-100.0, 2100.0, -100.0, 2100.0),
                birth: Sequence[tuple[float, TargetState]] = (),
                qh_scale: float = 0.25, Nmax: int = 50,
                l_min: float = 0.1) -> ModelConfig:
    """Assemble a :class:`ModelConfig` for the CV + static-shape model.

    Parameters
    ----------
    Ts : float
        Sampling interval in seconds.
    q_r : float
        Kinematic process-noise standard deviation (m/s^2).
    q_theta, q_l : float
        Orientation (rad) and semi-axis (m) random-walk standard deviations.
    q_e : float
        Additive measurement-noise standard deviation (m).
    qh_scale : float
        Multiplicative-noise covariance is ``qh_scale * I``.

    Raises
    ------
    ValueError
        On non-positive noise levels, probabilities outside (0, 1] or a
        degenerate region.
    """
    for name, v in (("Ts", Ts), ("q_r", q_r), ("q_theta", q_theta), ("q_l", q_l),
                    ("q_e", q_e), ("gamma", gamma)):
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v!r}")
    if not 0 < pD <= 1 or not 0 < pS <= 1:
        raise ValueError("pD and pS must lie in (0, 1]")
    if lambdaC < 0 or qh_scale < 0:
        raise ValueError("lambdaC and qh_scale must be nonnegative")
    x0, x1, y0, y1 = map(float, region)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("surveillance region must have positive area")
    if Nmax < 1:
        raise ValueError("Nmax must be at least 1")

    i2 = np.eye(2)
    Fr = np.kron(np.array([[1.0, Ts], [0.0, 1.0]]), i2)
    Qr = q_r ** 2 * np.kron(np.array([[Ts ** 3 / 3, Ts ** 2 / 2], [Ts ** 2 / 2, Ts]]), i2)
    H = np.hstack([np.kron(np.array([[1.0, 0.0]]), i2), np.zeros((2, 3))])
    return ModelConfig(
        Ts=float(Ts), Fr=Fr, Fs=np.eye(3), Qr=Qr,
        Qs=np.diag([q_theta ** 2, q_l ** 2, q_l ** 2]),
        H=H, Qh=qh_scale * i2, Qe=q_e ** 2 * i2,
        gamma=float(gamma), lambdaC=float(lambdaC), region=(x0, x1, y0, y1),
        pD=float(pD), pS=float(pS), birth=tuple(birth), Nmax=int(Nmax),
        l_min=float(l_min))


def predict_state(x: TargetState, m: ModelConfig) -> TargetState:
    """One-step prediction of a single state; the two blocks are propagated separately."""
    mean = np.empty(7)
    mean[KIN] = m.Fr @ x.mean[KIN]
    mean[SHP] = m.Fs @ x.mean[SHP]
    cov = np.zeros((7, 7))
    cov[KIN, KIN] = m.Fr @ x.cov[KIN, KIN] @ m.Fr.T + m.Qr
    cov[SHP, SHP] = m.Fs @ x.cov[SHP, SHP] @ m.Fs.T + m.Qs
    return TargetState(mean, cov)


def predict_component(c: TrajectoryComponent, m: ModelConfig) -> TrajectoryComponent:
    """Append the predicted state to a trajectory; history and weight are untouched."""
    return append_state(c, predict_state(current_state(c), m))
