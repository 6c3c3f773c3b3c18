"""Exact per-user SINRs on realized channels and the Monte-Carlo loop.

The sweep engine caches, per trial, four K x K Gram-type matrices that are
independent of both the transmit power and the regularization; every sweep
point then reduces to K x K algebra. Rates are in nats throughout.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import channels as chan
from .config import watts_to_dbm
from .correlation import build_user_thetas
from .exceptions import DegenerateChannelError, NumericError
from .precoding import xi_af_sq_from_forms, xi_sq_from_forms

POWER_EQUALITY_RTOL = 1e-8


def half_duplex_rate(gamma):
    """(1/2) ln(1 + gamma), the two-slot rate in nats per channel use."""
    return 0.5 * np.log1p(gamma)


@dataclass(frozen=True)
class SinrSample:
    gamma_sr: np.ndarray
    gamma_af: np.ndarray
    gamma_df: np.ndarray


@dataclass(frozen=True)
class RateReport:
    """Per-power-point Monte-Carlo summary (rates in nats/channel use)."""

    p_watts: float
    trials: int
    user_rates_af: np.ndarray
    user_rates_df: np.ndarray
    sumrate_af: float
    sumrate_df: float
    stderr_af: float
    stderr_df: float

    @property
    def p_dbm(self):
        return watts_to_dbm(self.p_watts)


# ---------------------------------------------------------------------------
# Direct (literal) per-user SINR evaluations, used as the readable reference
# path and by the oracle tests. precoders carry their xi scaling.
# ---------------------------------------------------------------------------

def _coef_matrix(h_true, precoders):
    """A[k, j] = h_k^H g_j for scaled precoding vectors g_j."""
    return h_true.conj() @ precoders.scaled_directions


def relay_sinr(k, channels_sr, precoders_bs, p_s, gain, N0):
    """First-hop SINR of symbol k at relay antenna k."""
    A = _coef_matrix(channels_sr.h, precoders_bs)
    powers = gain * np.asarray(p_s) * np.abs(A[k]) ** 2
    signal = powers[k]
    interference = powers.sum() - signal
    return float(signal / (interference + N0))


def df_sinr(k, channels_sr, channels_rd, precoders_bs, precoders_relay,
            p_s, p_r, gain_sr, gain_rd, N0):
    """End-to-end DF SINR: min of the two hop SINRs."""
    g1 = relay_sinr(k, channels_sr, precoders_bs, p_s, gain_sr, N0)
    g2 = relay_sinr(k, channels_rd, precoders_relay, p_r, gain_rd, N0)
    return min(g1, g2)


def af_sinr(k, channels_sr, channels_rd, precoders_bs, precoders_relay,
            p_s, p_r, gain_sr, gain_rd, N0, form="exact",
            noise_model="independent"):
    """End-to-end AF SINR on the realized channels.

    form="exact" keeps all relay-antenna cross terms; form="simplified" is
    the large-M reduction that keeps only the matched (m = k) outer terms.
    noise_model chooses between independent per-antenna relay noises
    (statistically correct) and the coherently summed display form.
    """
    A1 = _coef_matrix(channels_sr.h, precoders_bs)          # (K, K): relay antenna x symbol
    A2 = _coef_matrix(channels_rd.h, precoders_relay)       # (K, K): user x relay antenna
    s1 = np.sqrt(gain_sr * np.asarray(p_s, float))
    s2 = np.sqrt(gain_rd * np.asarray(p_r, float))
    C = (A2 * s2[None, :]) @ (A1 * s1[None, :])             # composite symbol coefficients
    K = A1.shape[0]
    if form == "exact":
        signal = np.abs(C[k, k]) ** 2
        off = np.abs(C[k]) ** 2
        if noise_model == "independent":
            interference = off.sum() - off[k]
        else:
            interference = np.abs(C[k].sum() - C[k, k]) ** 2
    elif form == "simplified":
        signal = (s2[k] ** 2) * (s1[k] ** 2) * np.abs(A2[k, k]) ** 2 * np.abs(A1[k, k]) ** 2
        same_hop = (s1 ** 2) * np.abs(A1[k]) ** 2
        interference = (s2[k] ** 2) * np.abs(A2[k, k]) ** 2 * (same_hop.sum() - same_hop[k])
        diag_terms = s2 * A2[k] * s1 * np.diag(A1)
        if noise_model == "independent":
            cross = np.abs(diag_terms) ** 2
            interference += cross.sum() - cross[k]
        else:
            interference += np.abs(diag_terms.sum() - diag_terms[k]) ** 2
    else:
        raise ValueError(f"unknown AF form {form!r}")
    amp = gain_rd * np.asarray(p_r, float) * np.abs(A2[k]) ** 2
    if form == "simplified":
        amplified_noise = N0 * amp[k]
    elif noise_model == "independent":
        amplified_noise = N0 * amp.sum()
    else:
        amplified_noise = N0 * np.abs((s2 * A2[k]).sum()) ** 2
    return float(signal / (interference + amplified_noise + N0))


# ---------------------------------------------------------------------------
# Fast sweep path: per-trial K x K caches, then per-point closed algebra.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialGrams:
    """Power- and regularization-independent per-trial matrices."""

    M: int
    G1: np.ndarray  # hhat_sr gram (K, K)
    C1: np.ndarray  # h_sr^H vs hhat_sr cross (K, K)
    G2: np.ndarray
    C2: np.ndarray


def trial_grams(sr, rd):
    return TrialGrams(
        M=sr.M,
        G1=sr.hhat.conj() @ sr.hhat.T,
        C1=sr.h.conj() @ sr.hhat.T,
        G2=rd.hhat.conj() @ rd.hhat.T,
        C2=rd.h.conj() @ rd.hhat.T,
    )


@dataclass(frozen=True)
class TrialForms:
    """Quadratic forms at one regularization pair.

    A[k, j] = h_k^H W hhat_j (unscaled); w[j] = hhat_j^H W^2 hhat_j.
    """

    A1: np.ndarray
    w1: np.ndarray
    A2: np.ndarray
    w2: np.ndarray


def _hop_forms(G, C, M, alpha):
    K = G.shape[0]
    try:
        S = sla.cho_solve(sla.cho_factor(G + (M * alpha) * np.eye(K), lower=True),
                          np.eye(K, dtype=complex))
    except sla.LinAlgError as exc:
        raise NumericError(f"trial factorization failed: {exc}") from exc
    S = (S + S.conj().T) / 2
    A = C @ S
    w = np.real(np.einsum("ij,jk,ki->i", S, G, S))
    return A, w


def forms_at(grams, alpha1, alpha2):
    A1, w1 = _hop_forms(grams.G1, grams.C1, grams.M, alpha1)
    A2, w2 = _hop_forms(grams.G2, grams.C2, grams.M, alpha2)
    return TrialForms(A1=A1, w1=w1, A2=A2, w2=w2)


@dataclass(frozen=True)
class PointSample:
    sinr: SinrSample
    xi1_sq: float
    xi_af_sq: float
    xi_df_sq: float
    power_residuals: tuple  # relative equality errors (bs, af, df)


def point_sample(forms, cfg, p_watts, af_form="exact", noise_model="independent"):
    """All per-user SINRs and scalings at one transmit power."""
    K = cfg.K
    p = np.full(K, p_watts / K)  # equal allocation at BS and relay
    g1, g2 = cfg.link_gain_sr, cfg.link_gain_rd
    N0 = cfg.noise_power_w

    xi1_sq = xi_sq_from_forms(forms.w1, p, p_watts)
    s_m = g1 * xi1_sq * (np.abs(forms.A1) ** 2 @ p)
    xi_af_sq = xi_af_sq_from_forms(forms.w2, p, s_m, N0, p_watts)
    xi_df_sq = xi_sq_from_forms(forms.w2, p, p_watts)

    pow1 = g1 * p * xi1_sq * np.abs(forms.A1) ** 2       # (k, j) received symbol powers
    sig1 = np.diag(pow1)
    gamma_sr = sig1 / (pow1.sum(axis=1) - sig1 + N0)

    pow2 = g2 * p * xi_df_sq * np.abs(forms.A2) ** 2
    sig2 = np.diag(pow2)
    gamma_rd_df = sig2 / (pow2.sum(axis=1) - sig2 + N0)
    gamma_df = np.minimum(gamma_sr, gamma_rd_df)

    s1 = np.sqrt(g1 * p)
    s2 = np.sqrt(g2 * p)
    amp = g2 * p * np.abs(forms.A2) ** 2                 # (k, m) relay-noise couplings
    if af_form == "exact":
        C = (forms.A2 * s2[None, :]) @ (forms.A1 * s1[None, :])
        sig_af = xi_af_sq * xi1_sq * np.abs(np.diag(C)) ** 2
        if noise_model == "independent":
            interf = xi_af_sq * xi1_sq * ((np.abs(C) ** 2).sum(axis=1) - np.abs(np.diag(C)) ** 2)
        else:
            interf = xi_af_sq * xi1_sq * np.abs(C.sum(axis=1) - np.diag(C)) ** 2
        if noise_model == "independent":
            amp_noise = N0 * xi_af_sq * amp.sum(axis=1)
        else:
            amp_noise = N0 * xi_af_sq * np.abs((s2[None, :] * forms.A2).sum(axis=1)) ** 2
    elif af_form == "simplified":
        a1d = np.abs(np.diag(forms.A1)) ** 2
        a2d = np.abs(np.diag(forms.A2)) ** 2
        sig_af = xi_af_sq * xi1_sq * (g2 * p) * (g1 * p) * a2d * a1d
        same_hop = g1 * p * np.abs(forms.A1) ** 2
        interf = xi_af_sq * xi1_sq * g2 * p * a2d * (same_hop.sum(axis=1) - np.diag(same_hop))
        diag_terms = (s2[None, :] * forms.A2) * (s1 * np.diag(forms.A1))[None, :]
        if noise_model == "independent":
            dsq = np.abs(diag_terms) ** 2
            interf += xi_af_sq * xi1_sq * (dsq.sum(axis=1) - np.diag(dsq))
        else:
            interf += xi_af_sq * xi1_sq * np.abs(diag_terms.sum(axis=1) - np.diag(diag_terms)) ** 2
        amp_noise = N0 * xi_af_sq * np.diag(amp)
    else:
        raise ValueError(f"unknown AF form {af_form!r}")
    gamma_af = sig_af / (interf + amp_noise + N0)

    res_bs = abs(float(p @ (xi1_sq * forms.w1)) - p_watts) / p_watts
    res_af = abs(float(np.sum(p * xi_af_sq * forms.w2 * (s_m + N0))) - p_watts) / p_watts
    res_df = abs(float(p @ (xi_df_sq * forms.w2)) - p_watts) / p_watts

    sample = SinrSample(gamma_sr=gamma_sr, gamma_af=gamma_af, gamma_df=gamma_df)
    return PointSample(sinr=sample, xi1_sq=xi1_sq, xi_af_sq=xi_af_sq,
                       xi_df_sq=xi_df_sq, power_residuals=(res_bs, res_af, res_df))


def monte_carlo_sweep(cfg, power_grid_watts, thetas_sr=None, thetas_rd=None,
                      af_form="exact", noise_model="independent",
                      average="rates", trial_indices=None, workers=1,
                      check_power=True, collect_xi=False):
    """Monte-Carlo averaged rates over a transmit-power grid.

    Deterministic given (cfg.seed, trial indices), independent of workers.
    average="sinrs" averages SINRs before taking rates (used only for the
    one-sided DF comparison against the deterministic engine).
    """
    if trial_indices is None:
        if cfg.trials < 2:
            raise NumericError("need at least 2 trials for a standard error")
        trial_indices = list(range(cfg.trials))
    if thetas_sr is None:
        thetas_sr = build_user_thetas(cfg)
    if thetas_rd is None:
        thetas_rd = thetas_sr  # same correlation model on both hops

    grid = [float(p) for p in power_grid_watts]
    n_trials = len(trial_indices)

    def one_trial(trial):
        sr, rd = chan.draw_trial(cfg, thetas_sr, thetas_rd, trial)
        return trial_grams(sr, rd)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grams_list = list(pool.map(one_trial, trial_indices))
    else:
        grams_list = [one_trial(t) for t in trial_indices]

    reports = []
    xi_emp = {"bs": [], "af": [], "df": []} if collect_xi else None
    for p_watts in grid:
        a1, a2 = cfg.alphas_at(p_watts)
        user_af = np.zeros(cfg.K)
        user_df = np.zeros(cfg.K)
        gam_af = np.zeros(cfg.K)
        gam_df = np.zeros(cfg.K)
        sums_af = np.empty(n_trials)
        sums_df = np.empty(n_trials)
        for i, grams in enumerate(grams_list):
            forms = forms_at(grams, a1, a2)
            ps = point_sample(forms, cfg, p_watts, af_form=af_form,
                              noise_model=noise_model)
            if check_power:
                worst = max(ps.power_residuals)
                if worst > POWER_EQUALITY_RTOL:
                    raise DegenerateChannelError(
                        f"power equality violated at trial {trial_indices[i]}: "
                        f"relative error {worst:.2e}")
            r_af = half_duplex_rate(ps.sinr.gamma_af)
            r_df = half_duplex_rate(ps.sinr.gamma_df)
            user_af += r_af
            user_df += r_df
            gam_af += ps.sinr.gamma_af
            gam_df += ps.sinr.gamma_df
            sums_af[i] = r_af.sum()
            sums_df[i] = r_df.sum()
            if collect_xi:
                xi_emp["bs"].append(ps.xi1_sq)
                xi_emp["af"].append(ps.xi_af_sq)
                xi_emp["df"].append(ps.xi_df_sq)
        if average == "rates":
            user_af /= n_trials
            user_df /= n_trials
        elif average == "sinrs":
            user_af = half_duplex_rate(gam_af / n_trials)
            user_df = half_duplex_rate(gam_df / n_trials)
        else:
            raise ValueError(f"unknown averaging mode {average!r}")
        reports.append(RateReport(
            p_watts=p_watts, trials=n_trials,
            user_rates_af=user_af, user_rates_df=user_df,
            sumrate_af=float(user_af.sum()), sumrate_df=float(user_df.sum()),
            stderr_af=float(np.std(sums_af, ddof=1) / np.sqrt(n_trials)),
            stderr_df=float(np.std(sums_df, ddof=1) / np.sqrt(n_trials)),
        ))
    if collect_xi:
        return reports, xi_emp
    return reports
