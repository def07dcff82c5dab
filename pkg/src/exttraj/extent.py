"""Decoupled kinematic/shape measurement update for elliptical extended targets.

Each measurement is modelled as ``z = H r + S h + e`` with ``S = R(theta)
diag(l1, l2)``, ``h ~ N(0, Qh)`` and ``e ~ N(0, Qe)``. The kinematic block is
updated with a Kalman step on ``z``; the shape block is updated against the
quadratic pseudo-measurement ``[d1^2, d2^2, d1*d2]`` where ``d = z - H r_hat``.
Both steps use the prior of the current measurement, so the two covariance
blocks stay decoupled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (KIN, SHP, DegenerateCovarianceError, ModelConfig, TargetState,
                   as_measurement_array)

COND_LIMIT = 1e12
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PseudoMeasurementBlocks:
    """Intermediate quantities of one shape update (exposed for inspection)."""

    S: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    Y: np.ndarray
    Zbar: np.ndarray
    CovZ: np.ndarray
    sigma: np.ndarray


def shape_factor(s) -> np.ndarray:
    theta, l1, l2 = s
    c, sn = math.cos(theta), math.sin(theta)
    return np.array([[c * l1, -sn * l2], [sn * l1, c * l2]])


def pseudo_measurement_blocks(r_cov: np.ndarray, s, m: ModelConfig) -> PseudoMeasurementBlocks:
    """Shape-update blocks at prior kinematic covariance ``r_cov`` and shape mean ``s``."""
    theta, l1, l2 = (float(v) for v in s)
    c, sn = math.cos(theta), math.sin(theta)
    S = np.array([[c * l1, -sn * l2], [sn * l1, c * l2]])
    S1, S2 = S[0:1], S[1:2]
    J1 = np.array([[-l1 * sn, c, 0.0], [-l2 * c, 0.0, -sn]])
    J2 = np.array([[l1 * c, sn, 0.0], [-l2 * sn, 0.0, c]])
    Hr = m.Hr
    sigma = Hr @ r_cov @ Hr.T + S @ m.Qh @ S.T + m.Qe
    sigma = 0.5 * (sigma + sigma.T)
    s11, s12, s22 = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    Y = np.vstack([2.0 * S1 @ m.Qh @ J1,
                   2.0 * S2 @ m.Qh @ J2,
                   S1 @ m.Qh @ J2 + S2 @ m.Qh @ J1])
    Zbar = np.array([s11, s22, s12])
    CovZ = np.array([[2 * s11 ** 2, 2 * s12 ** 2, 2 * s11 * s12],
                     [2 * s12 ** 2, 2 * s22 ** 2, 2 * s22 * s12],
                     [2 * s11 * s12, 2 * s12 * s22, s11 * s22 + s12 ** 2]])
    return PseudoMeasurementBlocks(S, S1, S2, J1, J2, Y, Zbar, CovZ, sigma)


def innovation_cov(x: TargetState, m: ModelConfig) -> np.ndarray:
    """Per-measurement innovation covariance ``H Xr H^T + S Qh S^T + Qe``."""
    S = shape_factor(x.mean[SHP])
    Hr = m.Hr
    cz = Hr @ x.cov[KIN, KIN] @ Hr.T + S @ m.Qh @ S.T + m.Qe
    return 0.5 * (cz + cz.T)


def _check_cond(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)) or np.linalg.cond(a) > COND_LIMIT:
        raise DegenerateCovarianceError(f"{what} is singular or badly conditioned")


def measurement_log_pdfs(x: TargetState, Z, m: ModelConfig) -> np.ndarray:
    """Log Gaussian densities ``log N(z; H r_hat, Xz)`` for each row of ``Z``."""
    z = as_measurement_array(Z)
    cz = innovation_cov(x, m)
    _check_cond(cz, "innovation covariance")
    a, b, d = cz[0, 0], cz[0, 1], cz[1, 1]
    det = a * d - b * b
    if det <= 0:
        raise DegenerateCovarianceError("innovation covariance is not positive definite")
    dz = z - m.Hr @ x.mean[KIN]
    maha = (d * dz[:, 0] ** 2 - 2 * b * dz[:, 0] * dz[:, 1] + a * dz[:, 1] ** 2) / det
    return -0.5 * maha - _LOG_2PI - 0.5 * math.log(det)


def cell_log_likelihood(x: TargetState, cell_measurements, m: ModelConfig) -> float:
    """Log of :func:`cell_likelihood`, safe against underflow for large cells."""
    z = as_measurement_array(cell_measurements)
    if len(z) == 0:
        raise ValueError("cell must be nonempty")
    return float(np.sum(measurement_log_pdfs(x, z, m)))


def cell_likelihood(x: TargetState, cell_measurements, m: ModelConfig) -> float:
    """Product of per-measurement Gaussian densities evaluated at the predicted state.

    Raises
    ------
    DegenerateCovarianceError
        If the innovation covariance has condition number above ``1e12``.
    """
    return math.exp(cell_log_likelihood(x, cell_measurements, m))


def _update_blocks(r, Pr, s, Ps, z, m: ModelConfig):
    """One measurement; returns new (r, Pr, s, Ps). Inputs are not modified."""
    Hr = m.Hr
    theta, l1, l2 = s
    c, sn = math.cos(theta), math.sin(theta)
    S = np.array([[c * l1, -sn * l2], [sn * l1, c * l2]])
    Qh = m.Qh

    PrHt = Pr @ Hr.T
    cz = Hr @ PrHt + S @ Qh @ S.T + m.Qe
    cz = 0.5 * (cz + cz.T)
    a, b, d = cz[0, 0], cz[0, 1], cz[1, 1]
    det = a * d - b * b
    if not (det > 0 and np.isfinite(det)) or (a + d) ** 2 / det > 4 * COND_LIMIT:
        raise DegenerateCovarianceError("innovation covariance is singular")
    cz_inv = np.array([[d, -b], [-b, a]]) / det
    zbar = Hr @ r
    dz = z - zbar
    K = PrHt @ cz_inv
    r_new = r + K @ dz
    Pr_new = Pr - K @ PrHt.T
    Pr_new = 0.5 * (Pr_new + Pr_new.T)

    # shape block against the quadratic pseudo-measurement
    S1, S2 = S[0], S[1]
    J1 = np.array([[-l1 * sn, c, 0.0], [-l2 * c, 0.0, -sn]])
    J2 = np.array([[l1 * c, sn, 0.0], [-l2 * sn, 0.0, c]])
    S1Q, S2Q = S1 @ Qh, S2 @ Qh
    Y = np.array([2.0 * S1Q @ J1, 2.0 * S2Q @ J2, S1Q @ J2 + S2Q @ J1])
    s11, s12, s22 = a, b, d
    covZ = np.array([[2 * s11 * s11, 2 * s12 * s12, 2 * s11 * s12],
                     [2 * s12 * s12, 2 * s22 * s22, 2 * s22 * s12],
                     [2 * s11 * s12, 2 * s12 * s22, s11 * s22 + s12 * s12]])
    innov = np.array([dz[0] * dz[0] - s11, dz[1] * dz[1] - s22, dz[0] * dz[1] - s12])
    Psz = Ps @ Y.T
    Ps_new, s_new = _shape_step(s, Ps, Psz, covZ, innov)
    if Ps_new is None:
        # gain would leave the shape covariance indefinite; fall back to the
        # innovation covariance that includes the linearised shape uncertainty
        Ps_new, s_new = _shape_step(s, Ps, Psz, covZ + Y @ Psz, innov)
        if Ps_new is None:
            raise DegenerateCovarianceError("shape update lost positive semi-definiteness")
    s_new[1] = max(s_new[1], m.l_min)
    s_new[2] = max(s_new[2], m.l_min)
    return r_new, Pr_new, s_new, Ps_new


def _shape_step(s, Ps, Psz, covZ, innov):
    try:
        # covZ is tiny (3x3) and symmetric; solve instead of forming the inverse
        G = np.linalg.solve(covZ, Psz.T).T
    except np.linalg.LinAlgError:
        return None, None
    if not np.all(np.isfinite(G)):
        return None, None
    Ps_new = Ps - G @ Psz.T
    Ps_new = 0.5 * (Ps_new + Ps_new.T)
    scale = max(1.0, float(np.max(np.abs(Ps))))
    if np.min(np.linalg.eigvalsh(Ps_new)) < -1e-12 * scale:
        return None, None
    return Ps_new, s + G @ innov


def single_measurement_update(x: TargetState, z, m: ModelConfig) -> TargetState:
    """Update a state with one measurement.

    Parameters
    ----------
    x : TargetState
        Prior for this measurement.
    z : array_like, shape (2,)
    m : ModelConfig

    Returns
    -------
    TargetState
        Posterior with both covariance blocks no larger (PSD order) than the
        prior; semi-axes are floored at ``m.l_min``.
    """
    z = np.asarray(z, dtype=float).reshape(2)
    r, Pr, s, Ps = _update_blocks(x.mean[KIN], x.cov[KIN, KIN], x.mean[SHP], x.cov[SHP, SHP], z, m)
    return _assemble(r, Pr, s, Ps)


def sequential_cell_update(x: TargetState, cell_measurements, m: ModelConfig) -> TargetState:
    """Fold :func:`single_measurement_update` over the cell in stored order."""
    z = as_measurement_array(cell_measurements)
    if len(z) == 0:
        raise ValueError("cell must be nonempty")
    r, Pr, s, Ps = x.mean[KIN], x.cov[KIN, KIN], x.mean[SHP], x.cov[SHP, SHP]
    for zi in z:
        r, Pr, s, Ps = _update_blocks(r, Pr, s, Ps, zi, m)
    return _assemble(r, Pr, s, Ps)


def _assemble(r, Pr, s, Ps) -> TargetState:
    mean = np.concatenate([r, s])
    cov = np.zeros((7, 7))
    cov[KIN, KIN] = Pr
    cov[SHP, SHP] = Ps
    return TargetState(mean, cov)
