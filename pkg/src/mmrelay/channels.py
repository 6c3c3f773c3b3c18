"""Correlated Rayleigh channel draws with reproducible substreams.

True channel:     h_k   = sqrt(M) * Theta_k^{1/2} z_k
Transmitter copy: hhat_k = sqrt(M) * Theta_k^{1/2} (sqrt(1-tau^2) z_k + tau q_k)

z, q i.i.d. CN(0, 1/M) per entry and independent of each other. Streams are
counter-based (keyed by seed/hop/trial), so parallel trials reproduce
bit-identically regardless of scheduling order.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

_HOP_INDEX = {"sr": 0, "rd": 1}


def substream(seed, hop, trial, kind):
    """Independent Philox stream for one (hop, trial, draw-kind) cell."""
    hop_idx = _HOP_INDEX[hop]
    kind_idx = {"z": 0, "q": 1}[kind]
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(hop_idx, kind_idx, trial))
    return np.random.Generator(np.random.Philox(ss))


def sample_iid_vector(M, rng):
    """One CN(0, 1/M) vector: real/imag parts each N(0, 1/(2M))."""
    if M < 1:
        raise ConfigError("M must be >= 1")
    scale = 1.0 / np.sqrt(2.0 * M)
    return scale * (rng.standard_normal(M) + 1j * rng.standard_normal(M))


def sample_iid_matrix(K, M, rng):
    """K stacked CN(0, 1/M) row vectors."""
    scale = 1.0 / np.sqrt(2.0 * M)
    return scale * (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M)))


@dataclass(frozen=True)
class HopChannels:
    """Channels of one hop for K users; rows of each array are per-user."""

    hop: str
    tau: float
    z: np.ndarray      # (K, M) fast-fading draws
    q: np.ndarray      # (K, M) estimation-noise draws
    h: np.ndarray      # (K, M) true channels
    hhat: np.ndarray   # (K, M) transmitter-side estimates

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def M(self):
        return self.h.shape[1]


def assemble_hop(hop, thetas, tau, rng_z, rng_q):
    """Draw a full hop from per-user correlation matrices."""
    K = len(thetas)
    M = thetas[0].M
    if any(t.M != M for t in thetas):
        raise ConfigError("all correlation matrices must share dimension M")
    z = sample_iid_matrix(K, M, rng_z)
    q = sample_iid_matrix(K, M, rng_q)
    zhat = np.sqrt(1.0 - tau**2) * z + tau * q
    h = np.empty((K, M), dtype=complex)
    hhat = np.empty((K, M), dtype=complex)
    sqrt_m = np.sqrt(M)
    shared = all(t is thetas[0] for t in thetas)
    if shared:
        root = thetas[0].sqrt_theta
        h[:] = sqrt_m * (z @ root.T)
        hhat[:] = sqrt_m * (zhat @ root.T)
    else:
        for k, t in enumerate(thetas):
            h[k] = sqrt_m * (t.sqrt_theta @ z[k])
            hhat[k] = sqrt_m * (t.sqrt_theta @ zhat[k])
    return HopChannels(hop=hop, tau=tau, z=z, q=q, h=h, hhat=hhat)


def draw_trial(cfg, thetas_sr, thetas_rd, trial):
    """Both hops for one Monte-Carlo trial, keyed only by (seed, trial)."""
    sr = assemble_hop("sr", thetas_sr, cfg.tau_sr,
                      substream(cfg.seed, "sr", trial, "z"),
                      substream(cfg.seed, "sr", trial, "q"))
    rd = assemble_hop("rd", thetas_rd, cfg.tau_rd,
                      substream(cfg.seed, "rd", trial, "z"),
                      substream(cfg.seed, "rd", trial, "q"))
    return sr, rd
