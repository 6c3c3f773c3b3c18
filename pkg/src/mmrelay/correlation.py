"""Per-user transmit correlation matrices for a uniform linear array.

The one-ring entries are angular integrals of exp(i*2*pi*spacing*(i-j)*cos(t))
over each user's scattering sector. For a ULA the matrix is Hermitian
Toeplitz, so only the first column is integrated (O(M) quadratures).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .exceptions import ConfigError, NotPsdError, NumericError

QUAD_TOL = 1e-10
QUAD_MAX_EVALS = 2**18
EIG_CLAMP_REL = 1e-10


@dataclass(frozen=True)
class UlaGeometry:
    M: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError("antenna count must be >= 1")
        if self.spacing_wavelengths <= 0:
            raise ConfigError("spacing_wavelengths must be positive")


@dataclass(frozen=True)
class AngularSector:
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if not self.theta_max > self.theta_min:
            raise ConfigError("theta_max must exceed theta_min")
        if self.theta_max - self.theta_min > 2 * math.pi + 1e-12:
            raise ConfigError("angular sector wider than 2*pi")

    @property
    def width(self):
        return self.theta_max - self.theta_min


@dataclass(frozen=True)
class CorrelationMatrix:
    """Hermitian PSD matrix together with its principal square root."""

    theta: np.ndarray
    sqrt_theta: np.ndarray = field(repr=False)

    @property
    def M(self):
        return self.theta.shape[0]

    def trace(self):
        return float(np.real(np.trace(self.theta)))


def matrix_sqrt_psd(theta, clamp_rel=EIG_CLAMP_REL):
    """Principal PSD square root via unitary diagonalization.

    Eigenvalues in [-clamp_rel*lambda_max, 0) are clamped to zero
    (quadrature round-off makes the one-ring matrix indefinite at machine
    precision); anything below raises NotPsdError.
    """
    theta = np.asarray(theta, dtype=complex)
    herm_err = np.linalg.norm(theta - theta.conj().T)
    scale = max(np.linalg.norm(theta), 1e-300)
    if herm_err > 1e-10 * scale:
        raise NotPsdError(f"matrix not Hermitian: relative asymmetry {herm_err / scale:.2e}")
    w, v = np.linalg.eigh((theta + theta.conj().T) / 2)
    lam_max = max(w[-1], 0.0)
    floor = -clamp_rel * max(lam_max, 1e-300)
    if w[0] < floor:
        raise NotPsdError(f"matrix not PSD: min eigenvalue {w[0]:.3e} "
                          f"(clamp floor {floor:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _as_correlation(theta):
    theta = np.asarray(theta, dtype=complex)
    theta = (theta + theta.conj().T) / 2
    return CorrelationMatrix(theta=theta, sqrt_theta=matrix_sqrt_psd(theta))


def identity_theta(M):
    """Uncorrelated antennas: theta = sqrt = identity."""
    eye = np.eye(M, dtype=complex)
    return CorrelationMatrix(theta=eye, sqrt_theta=eye.copy())


_leggauss_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n):
    if n not in _leggauss_cache:
        _leggauss_cache[n] = np.polynomial.legendre.leggauss(n)
    return _leggauss_cache[n]


def _sector_integrals(phase_coeffs, sector, tol=QUAD_TOL, max_evals=QUAD_MAX_EVALS):
    """mean of exp(i*a*cos(t)) over the sector, for each coefficient a.

    Gauss-Legendre with doubling node counts; each coefficient stops once
    its value is stable to tol. Raises NumericError (carrying the worst
    coefficient index) if the node cap is hit first.
    """
    a = np.asarray(phase_coeffs, dtype=float)
    half = sector.width / 2
    mid = (sector.theta_min + sector.theta_max) / 2
    result = np.zeros(a.shape, dtype=complex)
    prev = None
    active = np.arange(a.size)
    n = 32
    while active.size:
        if n > max_evals:
            worst = int(active[0])
            raise NumericError(
                f"one-ring quadrature did not reach tol={tol} within "
                f"{max_evals} evaluations (worst entry lag {worst})")
        x, wgt = _leggauss(n)
        theta = mid + half * x
        # rows: active coefficients, cols: nodes
        vals = np.exp(1j * np.outer(a[active], np.cos(theta)))
        est = (vals @ wgt) / 2.0  # mean over the sector
        if prev is not None:
            err = np.abs(est - prev)
            done = err < tol
            result[active[done]] = est[done]
            active = active[~done]
            prev = est[~done]
        else:
            prev = est
        n *= 2
    return result


def build_theta_one_ring(geometry, sector, tol=QUAD_TOL):
    """One-ring correlation matrix for a ULA and one angular sector."""
    lags = np.arange(geometry.M)
    coeffs = 2 * math.pi * geometry.spacing_wavelengths * lags
    col = _sector_integrals(coeffs, sector, tol=tol)
    col[0] = 1.0 + 0.0j  # unit-modulus integrand, normalization cancels
    theta = toeplitz(col, col.conj())
    return _as_correlation(theta)


def default_sectors(K, spread_rad=math.pi / 6):
    """Evenly spaced user azimuths over (-pi/2, pi/2), fixed angular spread."""
    sectors = []
    for k in range(K):
        center = -math.pi / 2 + math.pi * (k + 0.5) / K
        sectors.append(AngularSector(center - spread_rad / 2, center + spread_rad / 2))
    return sectors


def build_user_thetas(cfg, cache_dir=None):
    """Per-user correlation matrices for a SystemConfig.

    Identity mode returns the same object K times (shared, immutable).
    """
    if cfg.correlation_mode == "identity":
        eye = identity_theta(cfg.M)
        return [eye] * cfg.K
    geom = UlaGeometry(cfg.M, cfg.spacing_wavelengths)
    sectors = default_sectors(cfg.K, cfg.angular_spread_rad)
    out = []
    for sector in sectors:
        if cache_dir is not None:
            out.append(one_ring_cached(geom, sector, cache_dir))
        else:
            out.append(build_theta_one_ring(geom, sector))
    return out


# ---------------------------------------------------------------------------
# Binary cache: one .npz per (M, spacing, sector), little-endian complex128
# arrays "theta" and "sqrt_theta" plus a float64 "params" header
# [M, spacing_wavelengths, theta_min, theta_max].
# ---------------------------------------------------------------------------

def _cache_path(cache_dir, geometry, sector):
    import os

    tag = (f"theta_M{geometry.M}_s{geometry.spacing_wavelengths:.6g}"
           f"_a{sector.theta_min:.9g}_b{sector.theta_max:.9g}")
    return os.path.join(cache_dir, tag.replace("-", "m") + ".npz")


def one_ring_cached(geometry, sector, cache_dir):
    import os

    path = _cache_path(cache_dir, geometry, sector)
    if os.path.exists(path):
        with np.load(path) as data:
            return CorrelationMatrix(
                theta=np.ascontiguousarray(data["theta"], dtype=complex),
                sqrt_theta=np.ascontiguousarray(data["sqrt_theta"], dtype=complex))
    cm = build_theta_one_ring(geometry, sector)
    os.makedirs(cache_dir, exist_ok=True)
    params = np.array([geometry.M, geometry.spacing_wavelengths,
                       sector.theta_min, sector.theta_max], dtype="<f8")
    np.savez(path, params=params,
             theta=cm.theta.astype("<c16"),
             sqrt_theta=cm.sqrt_theta.astype("<c16"))
    return cm
