"""Gaussian-mixture trajectory CPHD filter for extended targets.

The update weighs, for every partition, the hypothesis that all cells are
target-originated against the hypotheses that exactly one cell holds all the
false alarms. Everything is carried in the log domain.

Two families of generating-function derivatives are available:

``"closed-form"`` (default)
    ``G_FA^(m)(0) = m! e^-lambda``, ``G^(m)(upsilon) = m! upsilon^m P(m)`` and
    cell factors ``L / rho^|C|``, i.e. the closed forms used for the
    Gaussian-mixture recursion.
``"exact"``
    The derivatives implied by Poisson clutter, Poisson measurement counts and
    the full predicted cardinality PGF:
    ``G_FA^(m)(0) = lambda^m e^-lambda``,
    ``G^(m)(upsilon) = sum_n n!/(n-m)! P(n) upsilon^(n-m)`` and cell factors
    ``gamma^|C| e^-gamma L V^|C|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import binom, poisson

from .core import (CardinalityPmf, EmptyMixtureError, ModelConfig, NumericalFailure,
                   Partition, TrajectoryMixture, as_measurement_array)
from .tphd import (CellTable, assemble_posterior, build_cell_table,
                   missed_detection_factor, tphd_predict)

PGF_MODES = ("closed-form", "exact")


def birth_cardinality(m: ModelConfig) -> np.ndarray:
    """Poisson birth cardinality with mean equal to the total birth weight."""
    n = np.arange(m.Nmax + 1)
    return poisson.pmf(n, m.birth_mass) if m.birth_mass > 0 else (n == 0).astype(float)


def predict_cardinality(pmf: CardinalityPmf, m: ModelConfig) -> CardinalityPmf:
    """Binomial survival thinning of ``pmf`` convolved with the birth cardinality."""
    N = m.Nmax
    p = np.zeros(N + 1)
    q = pmf.probs[: N + 1]
    p[: len(q)] = q
    l = np.arange(N + 1)
    # thin[j] = sum_l C(l, j) pS^j (1 - pS)^(l - j) P(l)
    kern = binom.pmf(l[:, None], l[None, :], m.pS)  # [j, l]
    thinned = kern @ p
    out = np.convolve(birth_cardinality(m), thinned)[: N + 1]
    return CardinalityPmf.from_unnormalized(out, N)


def tcphd_predict(prior: TrajectoryMixture, pmf: CardinalityPmf, m: ModelConfig,
                  k: int) -> tuple[TrajectoryMixture, CardinalityPmf]:
    """PHD prediction as in the PHD filter plus cardinality prediction."""
    return tphd_predict(prior, m, k), predict_cardinality(pmf, m)


def _xlogy(k, logy):
    # k * log(y) with 0 * log(0) = 0
    k = np.asarray(k, dtype=float)
    with np.errstate(invalid="ignore"):
        out = k * logy
    return np.where(k == 0, 0.0, out)


class _Pgf:
    """Log-domain generating-function derivatives for one update."""

    def __init__(self, pmf: CardinalityPmf, m: ModelConfig, upsilon: float, mode: str):
        if mode not in PGF_MODES:
            raise ValueError(f"unknown PGF mode {mode!r}; expected one of {PGF_MODES}")
        self.mode = mode
        self.m = m
        with np.errstate(divide="ignore"):
            self.log_p = np.log(pmf.probs)
            self.log_ups = math.log(upsilon) if upsilon > 0 else -np.inf
        self.N = len(pmf.probs) - 1
        self.log_fa0 = -m.lambdaC
        if mode == "closed-form" and not m.rho > 0:
            raise ValueError("the closed-form cell factors need a positive clutter density")

    def log_fa(self, size):
        size = np.asarray(size, dtype=float)
        if self.mode == "closed-form":
            return gammaln(size + 1) - self.m.lambdaC
        with np.errstate(divide="ignore"):
            log_lam = math.log(self.m.lambdaC) if self.m.lambdaC > 0 else -np.inf
        return _xlogy(size, log_lam) - self.m.lambdaC

    def log_g_ups(self, order: int) -> float:
        """Log of the ``order``-th derivative of the predicted cardinality PGF at upsilon."""
        if order < 0 or order > self.N:
            return -np.inf
        if self.mode == "closed-form":
            return float(gammaln(order + 1) + _xlogy(order, self.log_ups) + self.log_p[order])
        n = np.arange(order, self.N + 1)
        terms = (gammaln(n + 1) - gammaln(n - order + 1) + self.log_p[order:]
                 + _xlogy(n - order, self.log_ups))
        return float(logsumexp(terms))

    def log_cell_factor(self, log_L: np.ndarray, sizes: np.ndarray) -> np.ndarray:
        m = self.m
        if self.mode == "closed-form":
            return log_L - sizes * math.log(m.rho)
        return log_L + sizes * (math.log(m.gamma) + math.log(m.area)) - m.gamma


@dataclass(frozen=True)
class PartitionCoefficients:
    """Log-domain coefficients of one partition, one entry per cell."""

    cells: tuple[int, ...]       # indices into the unique-cell table
    log_varpi: np.ndarray
    log_vartheta: np.ndarray
    log_epsilon: np.ndarray
    log_mu: np.ndarray
    log_nu: np.ndarray

    @property
    def varpi(self):
        return np.exp(self.log_varpi)

    @property
    def vartheta(self):
        return np.exp(self.log_vartheta)

    @property
    def epsilon(self):
        return np.exp(self.log_epsilon)

    @property
    def mu(self):
        return np.exp(self.log_mu)

    @property
    def nu(self):
        return np.exp(self.log_nu)


@dataclass(frozen=True)
class TcphdCoefficients:
    upsilon: float
    partitions: tuple[PartitionCoefficients, ...]
    log_kappa: float
    log_denominator: float       # log sum_P sum_C vartheta * epsilon
    log_cell_factor: np.ndarray  # (J, U)
    wbar: np.ndarray
    table: CellTable
    mode: str

    @property
    def kappa(self) -> float:
        return math.exp(self.log_kappa)


def compute_coefficients(pred: TrajectoryMixture, pmfpred: CardinalityPmf, Z,
                         parts: Sequence[Partition], m: ModelConfig,
                         pgf: str = "closed-form") -> TcphdCoefficients:
    """Coefficients ``upsilon, varpi, vartheta, epsilon, mu, nu, kappa`` of the update.

    ``nu`` is evaluated as the sum over the hypotheses in which the cell is
    target-originated, which equals the direct expression but avoids dividing
    by ``varpi``.

    Raises
    ------
    EmptyMixtureError
        If the predicted PHD has zero mass.
    """
    w = pred.weights
    W = float(w.sum()) if len(w) else 0.0
    if not W > 0:
        raise EmptyMixtureError("predicted PHD has zero mass")
    wbar = w / W
    upsilon = float(np.sum(wbar * (1.0 - m.pD + m.pD * math.exp(-m.gamma))))
    G = _Pgf(pmfpred, m, upsilon, pgf)
    table = build_cell_table(pred, Z, parts, m)
    with np.errstate(divide="ignore"):
        log_wbar = np.log(wbar)
        log_pD = math.log(m.pD) if m.pD > 0 else -np.inf
    lcf = G.log_cell_factor(table.log_L, table.sizes)
    log_varpi_u = log_pD + logsumexp(log_wbar[:, None] + lcf, axis=0)

    out = []
    all_te, all_tm = [], []
    for ix in table.index:
        u = np.array(ix, dtype=int)
        n = len(u)
        lv = log_varpi_u[u]
        fin = np.where(np.isfinite(lv), lv, 0.0)
        ninf = (~np.isfinite(lv)).astype(int)
        tf, tn = fin.sum(), ninf.sum()
        log_theta = np.where(tn - ninf == 0, tf - fin, -np.inf)
        log_fa = G.log_fa(table.sizes[u])
        lA_eps = G.log_fa0 + G.log_g_ups(n) - math.log(n)
        lB_eps = log_fa + G.log_g_ups(n - 1)
        lA_mu = G.log_fa0 + G.log_g_ups(n + 1) - math.log(n)
        lB_mu = log_fa + G.log_g_ups(n)
        log_eps = np.logaddexp(lA_eps + lv, lB_eps)
        log_mu = np.logaddexp(lA_mu + lv, lB_mu)
        # product of varpi over cells other than c and c'
        pair_f = tf - fin[:, None] - fin[None, :]
        pair_n = tn - ninf[:, None] - ninf[None, :]
        pair = np.where(pair_n == 0, pair_f, -np.inf) + log_eps[None, :]
        np.fill_diagonal(pair, -np.inf)
        log_nu = np.logaddexp(log_theta + lA_eps, logsumexp(pair, axis=1))
        out.append(PartitionCoefficients(tuple(ix), lv, log_theta, log_eps, log_mu, log_nu))
        all_te.append(log_theta + log_eps)
        all_tm.append(log_theta + log_mu)
    te = np.concatenate(all_te) if all_te else np.array([-np.inf])
    tm = np.concatenate(all_tm) if all_tm else np.array([-np.inf])
    log_D = float(logsumexp(te))
    log_kappa = float(logsumexp(tm) - log_D) if np.isfinite(log_D) else -np.inf
    return TcphdCoefficients(upsilon, tuple(out), log_kappa, log_D, lcf, wbar, table, pgf)


@dataclass(frozen=True)
class CardinalityTerms:
    """Unnormalized log numerator pieces of the cardinality update."""

    log_all_targets: np.ndarray   # no false alarm
    log_one_clutter: np.ndarray   # one cell holds the false alarms


def _posterior_cardinality(coef: TcphdCoefficients, pmfpred: CardinalityPmf,
                           m: ModelConfig) -> tuple[CardinalityPmf, CardinalityTerms]:
    G = _Pgf(pmfpred, m, coef.upsilon, coef.mode)
    N = len(pmfpred.probs) - 1
    n = np.arange(N + 1)
    log_g0 = gammaln(n + 1) + G.log_p
    acc_t, acc_c = [], []
    for pc in coef.partitions:
        p = len(pc.cells)
        sizes = coef.table.sizes[list(pc.cells)]
        d1 = n - p
        with np.errstate(invalid="ignore"):
            t1 = np.where(d1 >= 0, _xlogy(d1, G.log_ups) - gammaln(np.maximum(d1, 0) + 1), -np.inf)
            d2 = n - p + 1
            t2 = np.where(d2 >= 0, _xlogy(d2, G.log_ups) - gammaln(np.maximum(d2, 0) + 1), -np.inf)
        base = pc.log_vartheta[:, None] + log_g0[None, :]
        acc_t.append(base + (G.log_fa0 + pc.log_varpi - math.log(p))[:, None] + t1[None, :])
        acc_c.append(base + G.log_fa(sizes)[:, None] + t2[None, :])
    lt = logsumexp(np.vstack(acc_t), axis=0) - coef.log_denominator
    lc = logsumexp(np.vstack(acc_c), axis=0) - coef.log_denominator
    lp = np.logaddexp(lt, lc)
    if not np.any(np.isfinite(lp)):
        raise NumericalFailure("posterior cardinality is identically zero")
    lp = lp - logsumexp(lp)
    return CardinalityPmf.from_unnormalized(np.exp(lp), m.Nmax), CardinalityTerms(lt, lc)


def _empty_scan_cardinality(pmfpred: CardinalityPmf, m: ModelConfig) -> CardinalityPmf:
    ups = 1.0 - m.pD + m.pD * math.exp(-m.gamma)
    n = np.arange(len(pmfpred.probs))
    with np.errstate(divide="ignore"):
        lp = np.log(pmfpred.probs) + _xlogy(n, math.log(ups) if ups > 0 else -np.inf)
    if not np.any(np.isfinite(lp)):
        raise NumericalFailure("posterior cardinality is identically zero")
    return CardinalityPmf.from_unnormalized(np.exp(lp - logsumexp(lp)), m.Nmax)


def tcphd_update(pred: TrajectoryMixture, pmfpred: CardinalityPmf, Z,
                 parts: Sequence[Partition], m: ModelConfig, *, pgf: str = "closed-form",
                 min_weight: float | None = None,
                 diagnostics: dict | None = None) -> tuple[TrajectoryMixture, CardinalityPmf]:
    """Trajectory CPHD update of the PHD and the cardinality distribution.

    Parameters
    ----------
    pred, pmfpred
        Predicted PHD and cardinality PMF.
    Z : array_like, shape (M, 2)
    parts : sequence of Partition
    pgf : {"closed-form", "exact"}
        Generating-function family, see the module docstring.
    min_weight : float, optional
        As in :func:`exttraj.tphd.tphd_update`.
    diagnostics : dict, optional
        Filled with ``"coefficients"`` and the two cardinality terms.

    Raises
    ------
    NumericalFailure
        If the detection-weight denominator or the posterior PMF vanishes.
    """
    z = as_measurement_array(Z)
    miss = missed_detection_factor(m)
    if len(z) == 0:
        post = TrajectoryMixture([c.with_weight(miss * c.weight) for c in pred])
        return post, _empty_scan_cardinality(pmfpred, m)
    if not parts:
        raise ValueError("partitions are required for a nonempty measurement set")
    coef = compute_coefficients(pred, pmfpred, z, parts, m, pgf)
    if not np.isfinite(coef.log_denominator):
        raise NumericalFailure("detection-weight denominator is zero")
    with np.errstate(divide="ignore"):
        log_wbar = np.log(coef.wbar)
        log_pD = math.log(m.pD) if m.pD > 0 else -np.inf
    missed_w = coef.kappa * miss * coef.wbar
    det = []
    for pc in coef.partitions:
        u = np.array(pc.cells, dtype=int)
        lw = (log_pD + pc.log_nu[:, None] + coef.log_cell_factor[:, u].T
              + log_wbar[None, :] - coef.log_denominator)
        det.append(np.where(np.isnan(lw), -np.inf, lw))
    post = assemble_posterior(pred, z, coef.table, det, missed_w, m, min_weight)
    pmf, terms = _posterior_cardinality(coef, pmfpred, m)
    if diagnostics is not None:
        diagnostics["coefficients"] = coef
        diagnostics["cardinality_terms"] = terms
    return post, pmf
