"""Fixed point, linear systems, closed forms, and deterministic SINRs."""

import math

import numpy as np
import pytest

from mmrelay.config import SystemConfig
from mmrelay.correlation import (AngularSector, UlaGeometry,
                                 build_theta_one_ring, build_user_thetas,
                                 identity_theta)
from mmrelay.determ import (DeterministicState, det_sinr_af, det_sinr_df,
                            det_sinr_df_terms, gamma_closed_form, phi_k,
                            solve_hop, solve_m_o, solve_m_prime, upsilon_k,
                            xi1_sq_det, xi_af_sq_det, xi_df_sq_det)
from mmrelay.exceptions import ConvergenceError, NumericError


def _scalar_m_root(alpha, k_over_m):
    """Positive root of alpha*m^2 + (alpha + K/M - 1)*m - 1 = 0 (identity case)."""
    b = alpha + k_over_m - 1.0
    return (-b + math.sqrt(b * b + 4 * alpha)) / (2 * alpha)


@pytest.mark.parametrize("M,K,alpha", [(24, 4, 0.05), (48, 8, 0.3), (36, 3, 1.0)])
def test_identity_fixed_point_matches_scalar_quadratic(M, K, alpha):
    th = [identity_theta(M)] * K
    m, T, residual, iters = solve_m_o(th, alpha)
    expected = _scalar_m_root(alpha, K / M)
    assert m == pytest.approx(np.full(K, expected), rel=1e-9)
    assert np.allclose(T, np.eye(M) / (K / M / (1 + expected) + alpha), atol=1e-9)
    assert residual < 1e-10
    assert iters < 500


def test_table_scale_scalar_root():
    # K/M = 1/12 at alpha = 1/1200
    expected = _scalar_m_root(1.0 / 1200, 1.0 / 12)
    assert expected == pytest.approx(1100.09, abs=0.01)
    th = [identity_theta(48)] * 4
    m, _, _, _ = solve_m_o(th, 1.0 / 1200)
    assert m[0] == pytest.approx(expected, rel=1e-4)  # 4 significant digits


def test_large_alpha_limit():
    th = [identity_theta(16)] * 2
    m, _, _, _ = solve_m_o(th, 1e6)
    assert np.all(m < 2 * 16 / (16 * 1e6))


def test_fixed_point_budget_error():
    th = [identity_theta(16)] * 2
    with pytest.raises(ConvergenceError) as exc:
        solve_m_o(th, 0.05, max_iter=3)
    assert exc.value.residual > 0


def test_m_o_monotone_decreasing_in_alpha():
    th = [build_theta_one_ring(UlaGeometry(16, 0.5), AngularSector(-0.4, 0.4))] * 3
    ms = [solve_m_o(th, a)[0][0] for a in (0.01, 0.1, 1.0)]
    assert ms[0] > ms[1] > ms[2]


def test_m_prime_scalar_reduction():
    M, K, alpha = 36, 6, 0.2
    th = [identity_theta(M)] * K
    m, T, _, _ = solve_m_o(th, alpha)
    m_prime, m_prime_k = solve_m_prime(th, T, m, alpha)
    t = np.real(T[0, 0])
    j0 = (t * t) / M / (1 + m[0]) ** 2    # each entry of J in the uniform case
    v = t * t                              # (1/M) tr(T^2) per user
    expected = v / (1 - K * j0)
    assert m_prime == pytest.approx(np.full(K, expected), rel=1e-9)
    assert m_prime_k == pytest.approx(np.full((K, K), expected * v / v), rel=1e-6)


def test_m_prime_k1_exact():
    th = [identity_theta(12)]
    m, T, _, _ = solve_m_o(th, 0.4)
    m_prime, _ = solve_m_prime(th, T, m, 0.4)
    t = np.real(T[0, 0])
    v = t * t
    J11 = v / 12 / (1 + m[0]) ** 2
    assert m_prime[0] == pytest.approx(v / (1 - J11), rel=1e-10)


def test_upsilon_single_user_is_zero():
    th = [identity_theta(12)]
    state = solve_hop("sr", th, 0.4, 0.0)
    assert state.upsilon[0] == 0.0


def test_upsilon_uniform_symmetry_and_transcription():
    th = [identity_theta(24)] * 4
    m, T, _, _ = solve_m_o(th, 0.1)
    m_prime, m_prime_k = solve_m_prime(th, T, m, 0.1)
    ups = [upsilon_k(m_prime_k, m, k, 24) for k in range(4)]
    assert np.ptp(ups) < 1e-12
    # term-by-term transcription
    k = 1
    expected = sum(m_prime_k[j, k] / (1 + m[j]) ** 2 for j in range(4) if j != k) / 24
    assert ups[k] == pytest.approx(expected, rel=1e-14)


def test_spectral_radius_of_j_below_one_on_presets():
    # desk-scale versions of the preset geometries
    for mode in ("identity", "one_ring"):
        cfg = SystemConfig(M=96, K=8, P_watts=1.0, correlation_mode=mode,
                           rho_linear=10.0)
        th = build_user_thetas(cfg)
        alpha = cfg.alphas_at()[0]
        m, T, _, _ = solve_m_o(th, alpha)
        K, M = cfg.K, cfg.M
        A = np.stack([t.theta @ T for t in th])
        Q = np.array([[np.real(np.trace(A[i] @ A[j])) / M for j in range(K)]
                      for i in range(K)])
        J = Q / (M * (1 + m[None, :]) ** 2)
        assert np.max(np.abs(np.linalg.eigvals(J))) < 1.0


def test_phi_values():
    assert phi_k(1.0, 3.7) == pytest.approx(1.0, rel=1e-12)
    assert phi_k(0.0, 3.7) == pytest.approx(1 / (1 + 3.7) ** 2, rel=1e-12)
    m = 1100.09
    expected = 0.1 + 0.9 / (1 + m) ** 2
    assert phi_k(math.sqrt(0.1), m) == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(0.10000074, abs=1e-7)


def test_gamma_closed_form_values():
    eye = identity_theta(32)
    alpha = 1.0 / 1200
    assert gamma_closed_form(eye, 32, alpha, 0.0) == pytest.approx(1 / (1 + alpha), rel=1e-12)
    assert gamma_closed_form(eye, 32, alpha, 1.0) == 0.0
    got = gamma_closed_form(eye, 32, alpha, math.sqrt(0.1))
    assert got == pytest.approx(math.sqrt(0.9) / (1 + alpha), rel=1e-12)
    assert got == pytest.approx(0.94789, abs=1e-4)
    # plain ndarray input accepted too
    assert gamma_closed_form(np.eye(32), 32, alpha, 0.0) == pytest.approx(1 / (1 + alpha))


def test_state_invariants():
    th = [build_theta_one_ring(UlaGeometry(24, 0.5), AngularSector(-0.5, 0.1))] * 3
    for tau in (0.0, 0.5, 1.0):
        st = solve_hop("sr", th, 0.2, tau)
        assert np.all(st.m_o > 0)
        assert np.all(st.m_prime > 0)
        assert np.all((st.phi > 0) & (st.phi <= 1))
        assert np.all(np.linalg.eigvalsh(st.T) > 0)
        assert st.residual < 1e-10 and st.iterations < 500


def test_xi_uniform_closed_form():
    M, K, alpha = 48, 6, 0.1
    th = [identity_theta(M)] * K
    st = solve_hop("sr", th, alpha, 0.0)
    P = 2.0
    p = np.full(K, P / K)
    expected = P * M * (1 + st.m_o[0]) ** 2 / (P * st.m_prime[0])
    assert xi1_sq_det(st, p, P) == pytest.approx(expected, rel=1e-10)
    assert xi_df_sq_det(st, p, P) == pytest.approx(expected, rel=1e-10)


def test_xi_af_noise_dominated():
    M, K = 48, 6
    th = [identity_theta(M)] * K
    st1 = solve_hop("sr", th, 0.1, 0.0)
    st2 = solve_hop("rd", th, 0.1, 0.0)
    P = 1.0
    p = np.full(K, P / K)
    N0 = 1e12
    af = xi_af_sq_det(st1, st2, p, p, P, 1e-14, N0)
    df = xi_df_sq_det(st2, p, P)
    assert af * N0 == pytest.approx(df, rel=1e-6)


def test_df_transcription_perfect_csit():
    cfg = SystemConfig(M=64, K=8, P_watts=1.0, rho_linear=10.0)
    th = build_user_thetas(cfg)
    a1, a2 = cfg.alphas_at()
    st1 = solve_hop("sr", th, a1, 0.0)
    st2 = solve_hop("rd", th, a2, 0.0)
    term_sr, term_rd = det_sinr_df_terms(st1, st2, cfg)
    pk = cfg.P_watts / cfg.K
    p = np.full(cfg.K, pk)
    for (st, term, g) in ((st1, term_sr, cfg.link_gain_sr),
                          (st2, term_rd, cfg.link_gain_rd)):
        xi = cfg.P_watts / float(p @ (st.m_prime / (cfg.M * (1 + st.m_o) ** 2)))
        gamma = st.gamma_cf
        phi = 1 / (1 + st.m_o) ** 2
        expected = (g * pk * xi * gamma**2
                    / (g * pk * xi * st.upsilon * phi + cfg.noise_power_w))
        assert term == pytest.approx(expected, rel=1e-12)
    assert np.all(det_sinr_df(st1, st2, cfg) == np.minimum(term_sr, term_rd))


def test_df_symmetric_hops_coincide():
    cfg = SystemConfig(M=64, K=8, P_watts=1.0, rho_linear=10.0,
                       d_sr_m=2000.0, d_rd_m=2000.0)
    th = build_user_thetas(cfg)
    a1, a2 = cfg.alphas_at()
    st1 = solve_hop("sr", th, a1, 0.0)
    st2 = solve_hop("rd", th, a2, 0.0)
    term_sr, term_rd = det_sinr_df_terms(st1, st2, cfg)
    assert term_sr == pytest.approx(term_rd, rel=1e-10)


def test_af_tau_one_kills_signal():
    cfg = SystemConfig(M=32, K=4, P_watts=1.0, tau_sr=1.0, tau_rd=1.0,
                       rho_linear=10.0)
    th = build_user_thetas(cfg)
    a1, a2 = cfg.alphas_at()
    st1 = solve_hop("sr", th, a1, 1.0)
    st2 = solve_hop("rd", th, a2, 1.0)
    assert np.all(det_sinr_af(st1, st2, cfg) == 0.0)


def test_af_single_user_noise_limited_reduction():
    cfg = SystemConfig(M=32, K=1, P_watts=1.0, rho_linear=10.0)
    th = build_user_thetas(cfg)
    a1, a2 = cfg.alphas_at()
    st1 = solve_hop("sr", th, a1, 0.0)
    st2 = solve_hop("rd", th, a2, 0.0)
    got = det_sinr_af(st1, st2, cfg)[0]
    # hand reduction with zero interference (upsilon = 0 at K = 1)
    P = cfg.P_watts
    g1, g2, N0 = cfg.link_gain_sr, cfg.link_gain_rd, cfg.noise_power_w
    xi1 = xi1_sq_det(st1, np.array([P]), P)
    xiaf = xi_af_sq_det(st1, st2, np.array([P]), np.array([P]), P, g1, N0)
    num = g1 * g2 * P**2 * xi1 * xiaf * st1.gamma_cf[0] ** 2 * st2.gamma_cf[0] ** 2
    den = g2 * P * xiaf * st2.gamma_cf[0] ** 2 * N0 + N0
    assert got == pytest.approx(num / den, rel=1e-12)
    assert st1.upsilon[0] == 0.0


def test_det_sinrs_nonnegative():
    cfg = SystemConfig(M=48, K=6, P_watts=1.0, tau_sr=0.3, tau_rd=0.3,
                       correlation_mode="one_ring", rho_linear=10.0)
    th = build_user_thetas(cfg)
    a1, a2 = cfg.alphas_at()
    st1 = solve_hop("sr", th, a1, cfg.tau_sr)
    st2 = solve_hop("rd", th, a2, cfg.tau_rd)
    assert np.all(det_sinr_af(st1, st2, cfg) >= 0)
    assert np.all(det_sinr_df(st1, st2, cfg) >= 0)
