"""Large-system deterministic equivalents for the RZF relay downlink.

Per hop: the fixed point m_k = (1/M) tr(Theta_k T) with
T = ((1/M) sum_j Theta_j / (1 + m_j) + alpha I)^-1, the linear systems for
the derivative-like m' vectors, the interference and CSIT-quality factors,
the closed-form signal equivalent, the deterministic power scalings, and
the end-to-end AF/DF SINR approximations.

Convergence is measured by the relative update max_k |dm_k| / (1 + |m_k|):
with the power-following regularization rule m_k scales like 1/alpha and an
absolute 1e-10 residual is unreachable in float64 at small alpha.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, DegenerateChannelError, NumericError

FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 500
DAMPED_ITERS = 10
DAMPING = 0.5


def _unique_thetas(thetas):
    """Deduplicate by object identity (identity-mode shares one matrix)."""
    uniq, index = [], []
    seen = {}
    for t in thetas:
        key = id(t)
        if key not in seen:
            seen[key] = len(uniq)
            uniq.append(t)
        index.append(seen[key])
    return uniq, np.asarray(index)


def _trace_product(theta, T):
    # tr(Theta T) for Hermitian Theta
    return np.real(np.sum(theta * T.T))


def solve_m_o(thetas, alpha, tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER,
              m_init=None):
    """Damped Picard iteration for the per-user resolvent traces.

    Returns (m_o, T, residual, iterations).
    """
    if alpha <= 0 or tol <= 0:
        raise NumericError("alpha and tol must be positive")
    K = len(thetas)
    M = thetas[0].M
    uniq, index = _unique_thetas(thetas)
    mats = [u.theta for u in uniq]
    m = np.full(K, 1.0 / alpha) if m_init is None else np.array(m_init, float)
    eye = np.eye(M)
    residual = np.inf
    for it in range(1, max_iter + 1):
        B = alpha * eye.astype(complex)
        for u, mat in enumerate(mats):
            weight = np.sum(1.0 / (1.0 + m[index == u])) / M
            B += weight * mat
        T = np.linalg.inv(B)
        T = (T + T.conj().T) / 2
        m_new_u = np.array([_trace_product(mat, T) / M for mat in mats])
        m_new = m_new_u[index]
        residual = float(np.max(np.abs(m_new - m) / (1.0 + np.abs(m_new))))
        damp = DAMPING if it <= DAMPED_ITERS else 1.0
        m = (1.0 - damp) * m + damp * m_new
        if residual < tol and it > DAMPED_ITERS:
            return m, T, residual, it
    raise ConvergenceError(
        f"fixed point not converged in {max_iter} iterations "
        f"(residual {residual:.3e})", residual=residual)


def solve_m_prime(thetas, T, m_o, alpha):
    """Linear systems for m' and the per-user columns m'_k.

    Returns (m_prime (K,), m_prime_k (K, K) with columns m'_k).
    """
    K = len(thetas)
    M = thetas[0].M
    uniq, index = _unique_thetas(thetas)
    A = np.stack([u.theta @ T for u in uniq])          # (Ku, M, M)
    Ku = len(uniq)
    left = A.transpose(0, 2, 1).reshape(Ku, -1)
    right = A.reshape(Ku, -1)
    Q_u = np.real(left @ right.T) / M                  # tr(A_i A_j) / M
    Q = Q_u[np.ix_(index, index)]
    v_u = np.real(np.array([np.sum(a * T.T) for a in A])) / M
    v = v_u[index]
    J = Q / (M * (1.0 + m_o[None, :]) ** 2)
    lhs = np.eye(K) - J
    try:
        m_prime = np.linalg.solve(lhs, v)
        m_prime_k = np.linalg.solve(lhs, Q)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"(I - J) singular to working precision: {exc}") from exc
    return m_prime, m_prime_k


def upsilon_k(m_prime_k, m_o, k, M):
    """Interference factor: (1/M) sum_{j != k} m'_{j,k} / (1 + m_j)^2."""
    weights = 1.0 / (1.0 + m_o) ** 2
    total = float(np.dot(m_prime_k[:, k], weights) - m_prime_k[k, k] * weights[k])
    return total / M


def phi_k(tau, m_o_k):
    """CSIT-quality factor (1 when tau = 1, (1+m)^-2 when tau = 0)."""
    return (1.0 - tau**2 * (1.0 - (1.0 + m_o_k) ** 2)) / (1.0 + m_o_k) ** 2


def gamma_closed_form(theta, M, alpha, tau):
    """Closed-form signal equivalent sqrt(1-tau^2) tr / (M alpha + tr)."""
    tr = theta.trace() if hasattr(theta, "trace") and not isinstance(theta, np.ndarray) \
        else float(np.real(np.trace(theta)))
    return np.sqrt(1.0 - tau**2) * tr / (M * alpha + tr)


@dataclass(frozen=True)
class DeterministicState:
    """Everything the end-to-end SINR equivalents consume, for one hop."""

    hop: str
    alpha: float
    tau: float
    M: int
    m_o: np.ndarray
    T: np.ndarray
    m_prime: np.ndarray
    m_prime_k: np.ndarray
    upsilon: np.ndarray
    phi: np.ndarray
    gamma_cf: np.ndarray
    residual: float
    iterations: int

    @property
    def de_signal(self):
        """Iterative equivalent of h^H W hhat: sqrt(1-tau^2) m/(1+m)."""
        return np.sqrt(1.0 - self.tau**2) * self.m_o / (1.0 + self.m_o)

    @property
    def de_w2_form(self):
        """Equivalent of hhat^H W^2 hhat: m' / (M (1+m)^2)."""
        return self.m_prime / (self.M * (1.0 + self.m_o) ** 2)

    @property
    def de_interference(self):
        """Equivalent of the leakage sum: Upsilon * Phi."""
        return self.upsilon * self.phi


def solve_hop(hop, thetas, alpha, tau, tol=FIXED_POINT_TOL,
              max_iter=FIXED_POINT_MAX_ITER, m_init=None):
    K = len(thetas)
    M = thetas[0].M
    m_o, T, residual, iters = solve_m_o(thetas, alpha, tol=tol,
                                        max_iter=max_iter, m_init=m_init)
    m_prime, m_prime_k = solve_m_prime(thetas, T, m_o, alpha)
    upsilon = np.array([upsilon_k(m_prime_k, m_o, k, M) for k in range(K)])
    phi = phi_k(tau, m_o)
    gamma_cf = np.array([gamma_closed_form(t, M, alpha, tau) for t in thetas])
    return DeterministicState(
        hop=hop, alpha=alpha, tau=tau, M=M, m_o=m_o, T=T,
        m_prime=m_prime, m_prime_k=m_prime_k, upsilon=upsilon, phi=phi,
        gamma_cf=gamma_cf, residual=residual, iterations=iters)


# ---------------------------------------------------------------------------
# Deterministic power normalizations
# ---------------------------------------------------------------------------

def xi1_sq_det(state_sr, p_s, P):
    denom = float(np.dot(np.asarray(p_s, float), state_sr.de_w2_form))
    if denom <= 0:
        raise DegenerateChannelError("deterministic BS power denominator <= 0")
    return P / denom


def xi_df_sq_det(state_rd, p_r, P):
    denom = float(np.dot(np.asarray(p_r, float), state_rd.de_w2_form))
    if denom <= 0:
        raise DegenerateChannelError("deterministic DF power denominator <= 0")
    return P / denom


def xi_af_sq_det(state_sr, state_rd, p_s, p_r, P, gain_sr, N0):
    """AF normalization; the first-hop per-antenna power keeps only the
    matched term with the sr-hop CSIT factor."""
    xi1_sq = xi1_sq_det(state_sr, p_s, P)
    matched = (state_sr.m_o / (1.0 + state_sr.m_o)) ** 2
    bracket = gain_sr * np.asarray(p_s, float) * xi1_sq \
        * (1.0 - state_sr.tau**2) * matched + N0
    denom = float(np.sum(np.asarray(p_r, float) * state_rd.de_w2_form * bracket))
    if denom <= 0:
        raise DegenerateChannelError("deterministic AF power denominator <= 0")
    return P / denom


# ---------------------------------------------------------------------------
# End-to-end deterministic SINRs (equal power P/K per user)
# ---------------------------------------------------------------------------

def det_sinr_af(state_sr, state_rd, cfg, p_watts=None):
    P = cfg.P_watts if p_watts is None else p_watts
    K = cfg.K
    p = np.full(K, P / K)
    g1, g2 = cfg.link_gain_sr, cfg.link_gain_rd
    N0 = cfg.noise_power_w
    xi1 = xi1_sq_det(state_sr, p, P)
    xiaf = xi_af_sq_det(state_sr, state_rd, p, p, P, g1, N0)
    gsr = state_sr.gamma_cf
    grd = state_rd.gamma_cf
    pk = P / K
    num = g1 * g2 * pk**2 * xi1 * xiaf * gsr**2 * grd**2
    den = (g1 * g2 * pk**2 * xi1 * xiaf * grd**2 * state_sr.de_interference
           + g1 * g2 * pk**2 * xi1 * xiaf * gsr**2 * state_rd.de_interference
           + g2 * pk * xiaf * grd**2 * N0
           + N0)
    return num / den


def det_sinr_df_terms(state_sr, state_rd, cfg, p_watts=None):
    """The two hop-wise arguments of the DF deterministic bound."""
    P = cfg.P_watts if p_watts is None else p_watts
    K = cfg.K
    p = np.full(K, P / K)
    g1, g2 = cfg.link_gain_sr, cfg.link_gain_rd
    N0 = cfg.noise_power_w
    pk = P / K
    xi1 = xi1_sq_det(state_sr, p, P)
    xidf = xi_df_sq_det(state_rd, p, P)
    term_sr = (g1 * pk * xi1 * state_sr.gamma_cf**2
               / (g1 * pk * xi1 * state_sr.de_interference + N0))
    term_rd = (g2 * pk * xidf * state_rd.gamma_cf**2
               / (g2 * pk * xidf * state_rd.de_interference + N0))
    return term_sr, term_rd


def det_sinr_df(state_sr, state_rd, cfg, p_watts=None):
    """min of the two hop terms; an upper-bounding (Jensen) approximation
    of the ergodic Monte-Carlo DF SINR, not an exact equivalent."""
    term_sr, term_rd = det_sinr_df_terms(state_sr, state_rd, cfg, p_watts)
    return np.minimum(term_sr, term_rd)
