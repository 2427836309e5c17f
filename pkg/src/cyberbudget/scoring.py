"""Closed-form success-rate algebra.

budget split b -> per-mitigation fractional budget f -> improved efficacy
eta -> technique log success rates -> sequence log success rates ->
highly-likely flags and vulnerability.

Everything stays in log space; probabilities are only exponentiated for
reporting. Functions accept a leading batch axis on ``b``/``f``/``x`` so the
brute-force oracle can score many points at once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9
THRESHOLD_SLACK = 1e-12


@dataclass(frozen=True)
class ScoringParams:
    lam: float
    delta: float
    eta0: np.ndarray

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 < self.delta <= 1.0:
            raise ValidationError(f"delta must lie in (0, 1], got {self.delta}")

    @property
    def log_delta(self) -> float:
        return float(np.log(self.delta))


@dataclass(frozen=True)
class ScoreBreakdown:
    f: np.ndarray
    eta: np.ndarray
    log_r: np.ndarray
    log_v: np.ndarray
    highly_likely: np.ndarray
    vulnerability: float

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.highly_likely))


def check_budget(b, n_sectors: int | None = None) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if n_sectors is not None and b.shape[-1] != n_sectors:
        raise ValidationError(f"budget has {b.shape[-1]} entries, expected {n_sectors}")
    if np.any(b < -SIMPLEX_TOL):
        raise ValidationError("budget entries must be nonnegative")
    if np.any(np.abs(b.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValidationError("budget entries must sum to 1")
    return b


def log_one_minus(eta0) -> np.ndarray:
    """P-table ingredient log(1 - eta0); finite as long as eta0 < 1."""
    return np.log1p(-np.asarray(eta0, dtype=float))


def fractional_budget(C, b) -> np.ndarray:
    """f_i = sum_j C[i, j] b_j / sum_j C[i, j]."""
    C = np.asarray(C, dtype=float)
    counts = C.sum(axis=1)
    if np.any(counts == 0):
        bad = int(np.flatnonzero(counts == 0)[0])
        raise ValidationError(f"mitigation row {bad} of C has no sector")
    return (np.asarray(b, dtype=float) @ C.T) / counts


def improve_efficacy(eta0, lam: float, f) -> np.ndarray:
    """eta = 1 - (1 - eta0) * exp(-lam * f).

    Evaluated as eta0 + (1 - eta0) * (1 - exp(-lam f)) so that f = 0 returns
    eta0 bit-for-bit.
    """
    eta0 = np.asarray(eta0, dtype=float)
    return eta0 - (1.0 - eta0) * np.expm1(-lam * np.asarray(f, dtype=float))


def technique_log_success(M, x, eta) -> np.ndarray:
    """log r_k = sum_i x_i M[i, k] log(1 - eta_i)."""
    M = np.asarray(M, dtype=float)
    w = np.asarray(x, dtype=float) * np.log1p(-np.asarray(eta, dtype=float))
    return w @ M


def technique_success_product(M, x, eta) -> np.ndarray:
    """Product form r_k = prod_i (1 - x_i M[i, k] eta_i)."""
    M = np.asarray(M, dtype=float)
    xe = np.asarray(x, dtype=float) * np.asarray(eta, dtype=float)
    return np.prod(1.0 - xe[..., :, None] * M, axis=-2)


def technique_log_success_budgeted(M, P, x, f, lam: float) -> np.ndarray:
    """log r = P^T x - lam * M^T diag(f) x, with P[i, k] = M[i, k] log(1 - eta0_i)."""
    M = np.asarray(M, dtype=float)
    P = np.asarray(P, dtype=float)
    x = np.asarray(x, dtype=float)
    return x @ P - lam * ((np.asarray(f, dtype=float) * x) @ M)


def p_table(M, eta0) -> np.ndarray:
    return np.asarray(M, dtype=float) * log_one_minus(eta0)[:, None]


def sequence_log_success(S, log_r) -> np.ndarray:
    """log v_l = sum_k S[l, k] log r_k."""
    return np.asarray(log_r, dtype=float) @ np.asarray(S, dtype=float).T


def classify(log_v, delta: float) -> np.ndarray:
    """Highly-likely flags: v_l >= delta, with a 1e-12 slack toward True."""
    return np.asarray(log_v) >= np.log(delta) - THRESHOLD_SLACK


def classify_and_vulnerability(log_v, delta: float) -> tuple[np.ndarray, float]:
    if not 0.0 < delta <= 1.0:
        raise ValidationError(f"delta must lie in (0, 1], got {delta}")
    flags = classify(log_v, delta)
    n = flags.shape[-1]
    if n == 0:
        log.warning("no attack sequences: vulnerability reported as 0")
        return flags, 0.0
    return flags, float(np.count_nonzero(flags)) / n


def score(C, M, S, x, b, params: ScoringParams) -> ScoreBreakdown:
    """Full breakdown for one selection ``x`` and budget split ``b``."""
    b = check_budget(b, np.asarray(C).shape[1])
    x = np.asarray(x, dtype=float)
    f = fractional_budget(C, b)
    eta = improve_efficacy(params.eta0, params.lam, f)
    log_r = technique_log_success(M, x, eta)
    log_v = sequence_log_success(S, log_r)
    flags, vul = classify_and_vulnerability(log_v, params.delta)
    return ScoreBreakdown(f, eta, log_r, log_v, flags, vul)


def count_highly_likely(C, M, S, x, b, params: ScoringParams, weights=None) -> np.ndarray:
    """Batched flag count via the fused form; ``x``/``b`` may carry batch axes."""
    f = fractional_budget(C, b)
    P = p_table(M, params.eta0)
    log_v = sequence_log_success(S, technique_log_success_budgeted(M, P, x, f, params.lam))
    flags = classify(log_v, params.delta)
    if weights is None:
        return flags.sum(axis=-1)
    return flags.astype(float) @ np.asarray(weights, dtype=float)


SIG_DIGITS = 9


def fmt_float(v: float) -> str:
    """9-significant-digit text for ``v``; ``nan`` for not-a-number."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    text = format(v, f".{SIG_DIGITS}g")
    return "0" if text == "-0" else text


def round_sig(v: float) -> float:
    return float(fmt_float(v))


def rounded_budget(b) -> np.ndarray:
    """Round a simplex point to 9 significant digits, keeping its sum at 1.

    The rounding residual goes to the largest share, which is at least
    1/N_C and therefore absorbs it with at most half a unit of rounding.
    """
    b = np.asarray(b, dtype=float)
    r = np.array([round_sig(v) for v in b])
    if np.array_equal(r, b) and abs(r.sum() - 1.0) <= SIMPLEX_TOL:
        return r
    if len(r):
        k = int(np.argmax(r))
        r[k] = round_sig(r[k] + (1.0 - r.sum()))
    return r
