"""Numerical exercises of the random-matrix ingredients.

Deterministic identities (matrix-inversion and resolvent lemmas) are checked
at machine level; the statistical convergences are summarized as median/max
gap statistics over dimension ladders. Medians rather than means: the
quadratic-form fluctuations are heavy-tailed at finite M.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import channels as chan
from .correlation import AngularSector, UlaGeometry, build_theta_one_ring, identity_theta
from .determ import gamma_closed_form, solve_hop
from .exceptions import NumericError
from .mc import forms_at, trial_grams

DEFAULT_LADDER = (64, 128, 256)
DEFAULT_K_RATIO = 1 / 8


@dataclass(frozen=True)
class GapReport:
    statistic: str
    dimension: int
    samples: int
    median_gap: float
    max_gap: float
    decay_exponent: float | None = None  # documentation only

    def __post_init__(self):
        if self.samples < 1:
            raise NumericError("GapReport needs at least one sample")
        if self.median_gap < 0 or self.max_gap < 0:
            raise NumericError("gaps must be nonnegative")


def _report(name, dim, gaps, decay=None):
    gaps = np.asarray(gaps, float)
    return GapReport(statistic=name, dimension=dim, samples=gaps.size,
                     median_gap=float(np.median(gaps)),
                     max_gap=float(np.max(gaps)), decay_exponent=decay)


# ---------------------------------------------------------------------------
# Exact identities
# ---------------------------------------------------------------------------

def lemma1_residual(U, x, c):
    """Rank-one inversion identity residual, exact up to round-off."""
    x = np.asarray(x, complex)
    U = np.asarray(U, complex)
    try:
        lhs = x.conj() @ np.linalg.inv(U + c * np.outer(x, x.conj()))
        Uinv = np.linalg.inv(U)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular input: {exc}") from exc
    rhs = (x.conj() @ Uinv) / (1.0 + c * (x.conj() @ Uinv @ x))
    return float(np.linalg.norm(lhs - rhs))


def lemma2_residual(U, V):
    """Resolvent identity residual."""
    U = np.asarray(U, complex)
    V = np.asarray(V, complex)
    try:
        Uinv = np.linalg.inv(U)
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular input: {exc}") from exc
    return float(np.linalg.norm(Uinv - Vinv + Uinv @ (U - V) @ Vinv))


# ---------------------------------------------------------------------------
# Statistical concentration ladders
# ---------------------------------------------------------------------------

def _bounded_hermitian(N, rng):
    # random Hermitian with spectrum in [0, 1], uniformly bounded norm
    X = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    q, _ = np.linalg.qr(X)
    return (q * rng.uniform(0.0, 1.0, N)) @ q.conj().T


def _iid_vector(N, rng):
    return (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2 * N)


def lemma3_trace_gap(ladder=DEFAULT_LADDER, draws=200, seed=0, matrix_fn=None):
    """|x^H A x - tr(A)/N| medians along the dimension ladder."""
    fn = matrix_fn or _bounded_hermitian
    out = []
    for N in ladder:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, N)))
        A = fn(N, rng)
        gaps = []
        for _ in range(draws):
            x = _iid_vector(N, rng)
            gaps.append(abs(x.conj() @ A @ x - np.trace(A) / N))
        out.append(_report("lemma3_trace", N, gaps, decay=-0.5))
    return out


def lemma4_orthogonality_gap(ladder=DEFAULT_LADDER, draws=200, seed=0, matrix_fn=None):
    """|y^H A x| for independent x, y; vanishes with N."""
    fn = matrix_fn or _bounded_hermitian
    out = []
    for N in ladder:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4, N)))
        A = fn(N, rng)
        gaps = []
        for _ in range(draws):
            x = _iid_vector(N, rng)
            y = _iid_vector(N, rng)
            gaps.append(abs(y.conj() @ A @ x))
        out.append(_report("lemma4_orthogonality", N, gaps, decay=-0.5))
    return out


def lemma5_rank_one_gap(ladder=DEFAULT_LADDER, draws=50, seed=0):
    """|tr(A B^-1)/N - tr(A (B + v v^H)^-1)/N| for a rank-one perturbation."""
    out = []
    for N in ladder:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5, N)))
        A = _bounded_hermitian(N, rng)
        gaps = []
        for _ in range(draws):
            X = (rng.standard_normal((N, 2 * N)) + 1j * rng.standard_normal((N, 2 * N))) / np.sqrt(4 * N)
            B = X @ X.conj().T + 0.5 * np.eye(N)  # min eigenvalue bounded away from 0
            v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            v /= np.sqrt(2)
            gap = abs(np.trace(A @ np.linalg.inv(B)) / N
                      - np.trace(A @ np.linalg.inv(B + np.outer(v, v.conj()))) / N)
            gaps.append(gap)
        out.append(_report("lemma5_rank_one", N, gaps, decay=-1.0))
    return out


# ---------------------------------------------------------------------------
# Dominance and convergence statistics on the actual channel/precoder model
# ---------------------------------------------------------------------------

def _thetas_for(mode, M, K):
    if mode == "identity":
        return [identity_theta(M)] * K
    geom = UlaGeometry(M, 0.5)
    sectors = [AngularSector(-math.pi / 2 + math.pi * (k + 0.5) / K - math.pi / 12,
                             -math.pi / 2 + math.pi * (k + 0.5) / K + math.pi / 12)
               for k in range(K)]
    return [build_theta_one_ring(geom, s) for s in sectors]


def _draw_forms(M, K, tau, alpha, trial, seed, mode="identity", thetas=None):
    from .config import SystemConfig

    cfg = SystemConfig(M=M, K=K, P_watts=1.0, tau_sr=tau, tau_rd=tau, seed=seed)
    th = thetas if thetas is not None else _thetas_for(mode, M, K)
    sr, rd = chan.draw_trial(cfg, th, th, trial)
    return forms_at(trial_grams(sr, rd), alpha, alpha), th


def _dominance_ratios(A):
    diag = np.abs(np.diag(A))
    off = np.abs(A - np.diag(np.diag(A)))
    return diag / off.max(axis=1)


def theorem1_dominance(M, K, tau, draws=20, seed=0, alpha=None, mode="identity",
                       thetas=None):
    """Median of |h_k^H W hhat_k| / max_{k' != k} |h_k^H W hhat_k'|."""
    alpha = alpha if alpha is not None else K / (10 * M * 10.0)
    ratios = []
    th = thetas
    for trial in range(draws):
        forms, th = _draw_forms(M, K, tau, alpha, trial, seed, mode, th)
        ratios.extend(_dominance_ratios(forms.A1))
    return _report(f"theorem1_dominance_tau{tau:.3g}", M, ratios)


def theorem2_dominance(M, K, tau, draws=20, seed=0, alpha=None, mode="identity",
                       thetas=None):
    """Same ratio statistic for the hhat^H W^2 hhat quadratic forms."""
    import scipy.linalg as sla

    alpha = alpha if alpha is not None else K / (10 * M * 10.0)
    th = thetas
    ratios = []
    from .config import SystemConfig

    cfg = SystemConfig(M=M, K=K, P_watts=1.0, tau_sr=tau, tau_rd=tau, seed=seed)
    if th is None:
        th = _thetas_for(mode, M, K)
    for trial in range(draws):
        sr, _ = chan.draw_trial(cfg, th, th, trial)
        G = sr.hhat.conj() @ sr.hhat.T
        S = sla.cho_solve(sla.cho_factor(G + (M * alpha) * np.eye(K), lower=True),
                          np.eye(K, dtype=complex))
        B = S @ G @ S  # hhat_i^H W^2 hhat_j
        ratios.extend(_dominance_ratios(B))
    return _report(f"theorem2_dominance_tau{tau:.3g}", M, ratios)


def prop1_convergence(mode, alpha, tau, ladder=DEFAULT_LADDER, draws=20, seed=0,
                      k_ratio=DEFAULT_K_RATIO):
    """Median |h_k^H W hhat_k - Gamma_k| along an M ladder."""
    out = []
    for M in ladder:
        K = max(1, round(M * k_ratio))
        th = _thetas_for(mode, M, K)
        gammas = np.array([gamma_closed_form(t, M, alpha, tau) for t in th])
        gaps = []
        for trial in range(draws):
            forms, _ = _draw_forms(M, K, tau, alpha, trial, seed, thetas=th)
            gaps.extend(np.abs(np.real(np.diag(forms.A1)) - gammas))
        out.append(_report(f"prop1_{mode}", M, gaps))
    return out


def eq19_21_gaps(hop_channels, alpha, det_state):
    """Relative gaps of the three realized quadratic forms vs their DEs."""
    G = hop_channels.hhat.conj() @ hop_channels.hhat.T
    C = hop_channels.h.conj() @ hop_channels.hhat.T
    M = hop_channels.M
    K = hop_channels.K
    import scipy.linalg as sla

    S = sla.cho_solve(sla.cho_factor(G + (M * alpha) * np.eye(K), lower=True),
                      np.eye(K, dtype=complex))
    A = C @ S
    w = np.real(np.einsum("ij,jk,ki->i", S, G, S))
    interf = (np.abs(A) ** 2).sum(axis=1) - np.abs(np.diag(A)) ** 2

    def rel(x, ref):
        return np.abs(x - ref) / np.maximum(np.abs(ref), 1e-300)

    g_signal = rel(np.real(np.diag(A)), det_state.de_signal)
    g_w2 = rel(w, det_state.de_w2_form)
    g_intf = rel(interf, det_state.de_interference)
    return (_report("eq19_signal", M, g_signal),
            _report("eq20_w2form", M, g_w2),
            _report("eq21_interference", M, g_intf))


def eq19_21_ladder(mode, tau, ladder=DEFAULT_LADDER, draws=20, seed=0,
                   k_ratio=DEFAULT_K_RATIO, rho=10.0):
    """Median-over-users relative gaps of the draw-averaged quadratic forms.

    The three forms converge in mean; the leakage sum in particular keeps an
    O(1/sqrt(K)) per-realization spread, so the gap statistic compares the
    Monte-Carlo average against the deterministic value.
    """
    import scipy.linalg as sla

    from .config import SystemConfig

    out = {"eq19_signal": [], "eq20_w2form": [], "eq21_interference": []}
    for M in ladder:
        K = max(1, round(M * k_ratio))
        alpha = K / (10 * M * rho)
        th = _thetas_for(mode, M, K)
        state = solve_hop("sr", th, alpha, tau)
        cfg = SystemConfig(M=M, K=K, P_watts=1.0, tau_sr=tau, tau_rd=tau, seed=seed)
        sig = np.zeros(K)
        w2 = np.zeros(K)
        intf = np.zeros(K)
        eyeK = np.eye(K, dtype=complex)
        for trial in range(draws):
            sr, _ = chan.draw_trial(cfg, th, th, trial)
            G = sr.hhat.conj() @ sr.hhat.T
            C = sr.h.conj() @ sr.hhat.T
            S = sla.cho_solve(sla.cho_factor(G + (M * alpha) * np.eye(K), lower=True), eyeK)
            A = C @ S
            sig += np.real(np.diag(A))
            w2 += np.real(np.einsum("ij,jk,ki->i", S, G, S))
            intf += (np.abs(A) ** 2).sum(axis=1) - np.abs(np.diag(A)) ** 2
        sig /= draws
        w2 /= draws
        intf /= draws

        def rel(x, ref):
            return np.abs(x - ref) / np.maximum(np.abs(ref), 1e-300)

        out["eq19_signal"].append(_report("eq19_signal", M, rel(sig, state.de_signal)))
        out["eq20_w2form"].append(_report("eq20_w2form", M, rel(w2, state.de_w2_form)))
        out["eq21_interference"].append(
            _report("eq21_interference", M, rel(intf, state.de_interference)))
    return out


# ---------------------------------------------------------------------------
# Driver used by the CLI `verify` subcommand
# ---------------------------------------------------------------------------

def run_verification(ladder=DEFAULT_LADDER, seed=0, only=None):
    """Run every check; returns (passed, failures, reports)."""
    failures = []
    reports = []

    def wanted(name):
        return only is None or only in name

    rng = np.random.default_rng(seed)

    if wanted("lemma1"):
        worst = 0.0
        for _ in range(20):
            N = 32
            U = _bounded_hermitian(N, rng) + 2.0 * np.eye(N)
            x = _iid_vector(N, rng)
            worst = max(worst, lemma1_residual(U, x, rng.uniform(0.1, 2.0)))
        reports.append(_report("lemma1_identity", 32, [worst]))
        if worst > 1e-10:
            failures.append(f"lemma1 residual {worst:.2e} > 1e-10")

    if wanted("lemma2"):
        worst = 0.0
        for _ in range(20):
            N = 32
            U = _bounded_hermitian(N, rng) + 2.0 * np.eye(N)
            V = _bounded_hermitian(N, rng) + 2.0 * np.eye(N)
            worst = max(worst, lemma2_residual(U, V))
        reports.append(_report("lemma2_identity", 32, [worst]))
        if worst > 1e-10:
            failures.append(f"lemma2 residual {worst:.2e} > 1e-10")

    for name, fn in (("lemma3", lemma3_trace_gap),
                     ("lemma4", lemma4_orthogonality_gap),
                     ("lemma5", lemma5_rank_one_gap)):
        if not wanted(name):
            continue
        reps = fn(ladder=ladder, seed=seed)
        reports.extend(reps)
        medians = [r.median_gap for r in reps]
        if not all(b < a for a, b in zip(medians, medians[1:])):
            failures.append(f"{name} medians do not decrease along {tuple(ladder)}: {medians}")

    for thm, fn in (("theorem1", theorem1_dominance), ("theorem2", theorem2_dominance)):
        if not wanted(thm):
            continue
        for tau_sq in (0.0, 0.1):
            tau = math.sqrt(tau_sq)
            reps = [fn(M, max(1, round(M * DEFAULT_K_RATIO)), tau, seed=seed)
                    for M in ladder]
            reports.extend(reps)
            medians = [r.median_gap for r in reps]
            if medians[0] <= 1.0:
                failures.append(f"{thm} tau^2={tau_sq}: median ratio {medians[0]:.2f} <= 1 at M={ladder[0]}")
            if not medians[-1] > medians[0]:
                failures.append(f"{thm} tau^2={tau_sq}: dominance does not grow with M: {medians}")

    if wanted("prop1"):
        for mode in ("identity", "one_ring"):
            K0 = max(1, round(ladder[0] * DEFAULT_K_RATIO))
            alpha = K0 / (10 * ladder[0] * 10.0)
            reps = prop1_convergence(mode, alpha, math.sqrt(0.1), ladder=ladder, seed=seed)
            reports.extend(reps)
            medians = [r.median_gap for r in reps]
            if not all(b < a for a, b in zip(medians, medians[1:])):
                failures.append(f"prop1 {mode}: gaps do not decay along ladder: {medians}")

    if wanted("eq19") or wanted("eq20") or wanted("eq21"):
        ladder_reps = eq19_21_ladder("identity", 0.0, ladder=ladder, seed=seed)
        for name, reps in ladder_reps.items():
            reports.extend(reps)
            medians = [r.median_gap for r in reps]
            if medians[-1] > 0.10:
                failures.append(f"{name}: median relative gap {medians[-1]:.3f} > 10% at M={ladder[-1]}")
            if not medians[-1] < medians[0]:
                failures.append(f"{name}: gap does not decay along ladder: {medians}")

    return (not failures), failures, reports
