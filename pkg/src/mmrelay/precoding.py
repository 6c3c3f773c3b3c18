"""Regularized channel inverses and empirical power-normalization scalings.

W_l = (Hhat^H Hhat + M*alpha_l*I)^-1 with Hhat the K x M stack of hhat^H
rows. Directions W_l hhat_k are computed either through an M x M Hermitian
factorization or the K x K Woodbury route; both agree to ~1e-10 and the
K x K route is the default for M >> K.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateChannelError, NumericError


def _hhat_rows(hhat_list):
    """K x M array whose k-th row is the estimate vector hhat_k."""
    arr = np.atleast_2d(np.asarray(hhat_list, dtype=complex))
    return arr


def rzf_matrix(hhat_list, alpha, M):
    """Full M x M inverse (Hhat^H Hhat + M*alpha*I)^-1 via Cholesky."""
    if alpha <= 0:
        raise NumericError("alpha must be positive")
    if len(hhat_list) == 0:
        return np.eye(M, dtype=complex) / (M * alpha)
    hhat = _hhat_rows(hhat_list)
    gram = hhat.T @ hhat.conj() + (M * alpha) * np.eye(M)
    try:
        cho = sla.cho_factor(gram, lower=True)
    except sla.LinAlgError as exc:
        raise NumericError(f"RZF factorization failed: {exc}") from exc
    W = sla.cho_solve(cho, np.eye(M, dtype=complex))
    return (W + W.conj().T) / 2


def rzf_directions(hhat, alpha, method="woodbury"):
    """Columns W hhat_k (M x K) without forming the M x M inverse.

    woodbury: W Hhat^H = Hhat^H (Hhat Hhat^H + M*alpha*I_K)^-1 (push-through).
    """
    hhat = _hhat_rows(hhat)
    K, M = hhat.shape
    if method == "direct":
        return rzf_matrix(hhat, alpha, M) @ hhat.T
    if method != "woodbury":
        raise ValueError(f"unknown method {method!r}")
    gram_k = hhat.conj() @ hhat.T + (M * alpha) * np.eye(K)
    try:
        S = sla.cho_solve(sla.cho_factor(gram_k, lower=True), np.eye(K, dtype=complex))
    except sla.LinAlgError as exc:
        raise NumericError(f"RZF K x K factorization failed: {exc}") from exc
    return hhat.T @ S


@dataclass(frozen=True)
class PrecoderSet:
    """One hop's precoder: W (may be None when built matrix-free),
    unscaled directions W hhat_k as columns, and the power scaling xi."""

    hop: str                 # "bs" or "relay"
    directions: np.ndarray   # (M, K)
    xi: float
    W: np.ndarray | None = None

    @property
    def scaled_directions(self):
        return self.xi * self.directions


def _check_power_denominator(value, label):
    if not np.isfinite(value) or value <= 0:
        raise DegenerateChannelError(f"zero/invalid {label} power denominator: {value}")


def xi_bs_empirical(W1, hhat_sr, p_s, P):
    """xi_1^2 = P / sum_k p_k hhat_k^H W1^2 hhat_k; returns xi_1."""
    hhat = _hhat_rows(hhat_sr)
    U = W1 @ hhat.T
    forms = np.real(np.einsum("mk,mk->k", U.conj(), U))
    return np.sqrt(xi_sq_from_forms(forms, p_s, P))


def xi_sq_from_forms(w2_forms, p, P):
    """Shared form of Eq-style BS/DF normalizations from hhat^H W^2 hhat."""
    denom = float(np.dot(np.asarray(p, float), np.asarray(w2_forms, float)))
    _check_power_denominator(denom, "precoder")
    return P / denom

def xi_af_sq_from_forms(w2_forms, p_r, s_m, N0, P):
    """AF relay normalization from realized per-antenna receive powers s_m."""
    denom = float(np.sum(np.asarray(p_r, float) * np.asarray(w2_forms, float)
                         * (np.asarray(s_m, float) + N0)))
    _check_power_denominator(denom, "AF relay")
    return P / denom


def xi_af_empirical(W2, hhat_rd, p_r, s_m, N0, P):
    """xi_AF from W2 and the realized first-hop signal powers per antenna."""
    hhat = _hhat_rows(hhat_rd)
    U = W2 @ hhat.T
    forms = np.real(np.einsum("mk,mk->k", U.conj(), U))
    return np.sqrt(xi_af_sq_from_forms(forms, p_r, s_m, N0, P))


def xi_df_empirical(W2, hhat_rd, p_r, P):
    return xi_bs_empirical(W2, hhat_rd, p_r, P)


def build_precoder(hop, hhat, alpha, keep_matrix=False, method="woodbury"):
    """PrecoderSet with unit xi; scale via dataclasses.replace once known."""
    hhat = _hhat_rows(hhat)
    M = hhat.shape[1]
    W = rzf_matrix(hhat, alpha, M) if keep_matrix else None
    if W is not None:
        directions = W @ hhat.T
    else:
        directions = rzf_directions(hhat, alpha, method=method)
    return PrecoderSet(hop=hop, directions=directions, xi=1.0, W=W)
