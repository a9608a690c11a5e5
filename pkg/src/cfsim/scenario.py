"""Large-scale state of one user drop: AP grid, UE placement, shadowing, gains, powers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NonSquareApCount(ValueError):
    """Raised when the AP count does not admit a square grid."""


class CholeskyFailure(RuntimeError):
    """Raised when the shadowing covariance stays indefinite after jitter escalation."""


@dataclass(frozen=True)
class NetworkConfig:
    """Static deployment parameters.

    Channel gains produced from this config are normalized by the noise power,
    so downstream SINR denominators use unit noise and the regularization
    parameters sigma default to 1.
    """

    L: int = 16                        # access points
    N: int = 4                         # antennas per AP
    K: int = 50                        # single-antenna users
    area_side: float = 500.0           # side of the square service area [m]
    ap_height_delta: float = 10.0      # AP/UE height difference [m]
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 7.0
    shadow_std_db: float = 4.0         # shadow fading deviation rho [dB]
    shadow_corr_distance_m: float = 9.0
    sum_power_watt: float = 5.0        # network-wide sum power P
    pl_slope_db: float = 36.7          # path-loss slope per decade of distance
    pl_intercept_db: float = 30.5      # path loss at the 1 m reference
    power_exponent: float = -1.0       # fractional power allocation exponent

    def __post_init__(self):
        if min(self.L, self.N, self.K) < 1:
            raise ValueError("L, N, K must all be >= 1")
        if self.area_side <= 0:
            raise ValueError("area_side must be positive")
        if self.shadow_std_db < 0:
            raise ValueError("shadow_std_db must be nonnegative")
        if self.sum_power_watt <= 0:
            raise ValueError("sum_power_watt must be positive")
        if self.shadow_corr_distance_m <= 0:
            raise ValueError("shadow_corr_distance_m must be positive")


@dataclass(frozen=True)
class Scenario:
    """One drop of large-scale state, immutable once built.

    gains[l, k] is the linear noise-normalized channel gain between AP l and
    UE k; p is the virtual uplink power vector summing to the network power
    budget; sigma holds the per-AP regularization parameters.
    """

    ap_positions: np.ndarray   # (L, 2) [m]
    ue_positions: np.ndarray   # (K, 2) [m]
    gains: np.ndarray          # (L, K) linear
    p: np.ndarray              # (K,) [W]
    sigma: np.ndarray = field(default=None)  # (L,), defaults to ones
    n_antennas: int = 1        # antennas per AP

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        p = np.asarray(self.p, dtype=float)
        sigma = self.sigma
        if sigma is None:
            sigma = np.ones(gains.shape[0])
        sigma = np.asarray(sigma, dtype=float)
        if np.any(gains <= 0) or not np.all(np.isfinite(gains)):
            raise ValueError("gains must be positive and finite")
        if np.any(p <= 0):
            raise ValueError("p must be positive elementwise")
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive elementwise")
        for name, arr in (("ap_positions", np.asarray(self.ap_positions, float)),
                          ("ue_positions", np.asarray(self.ue_positions, float)),
                          ("gains", gains), ("p", p), ("sigma", sigma)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def L(self) -> int:
        return self.gains.shape[0]

    @property
    def K(self) -> int:
        return self.gains.shape[1]


def place_aps(L: int, area_side: float) -> np.ndarray:
    """Centered square grid of L APs over a square of the given side.

    L must be a perfect square; coordinate i of grid index m is
    (m + 1/2) * area_side / sqrt(L).
    """
    n = math.isqrt(L)
    if n * n != L:
        raise NonSquareApCount(f"AP count {L} is not a perfect square")
    step = area_side / n
    coords = (np.arange(n) + 0.5) * step
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power -174 + 10*log10(B) + F in dBm."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth_hz must be positive")
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def channel_gain_db(d2_m, height_delta_m: float, shadow_db, noise_dbm: float,
                    pl_slope_db: float = 36.7, pl_intercept_db: float = 30.5):
    """Noise-normalized channel gain in dB for 2D distance d2_m.

    Uses the log-distance path loss -slope*log10(D) - intercept on the 3D
    distance D (including the AP/UE height difference), plus the shadow term,
    minus the noise power so the linear gain 10^(dB/10) absorbs the noise.
    Accepts scalars or arrays for d2_m and shadow_db.
    """
    d3 = np.hypot(np.asarray(d2_m, dtype=float), height_delta_m)
    return -pl_slope_db * np.log10(d3) - pl_intercept_db + shadow_db - noise_dbm


def shadow_covariance(ue_positions: np.ndarray, shadow_std_db: float,
                      corr_distance_m: float = 9.0) -> np.ndarray:
    """UE-by-UE shadowing covariance rho^2 * 2^(-delta/corr_distance).

    The same matrix is shared by all APs; draws are independent across APs.
    """
    pos = np.asarray(ue_positions, dtype=float)
    delta = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    return shadow_std_db**2 * np.exp2(-delta / corr_distance_m)


def shadow_cholesky(cov: np.ndarray, shadow_std_db: float) -> np.ndarray:
    """Lower Cholesky factor of the shadowing covariance, with escalating jitter.

    Starts at 1e-10*rho^2 on the diagonal and escalates by 10x up to
    1e-4*rho^2; the kernel can be numerically semidefinite for coincident UEs.
    """
    if shadow_std_db == 0.0:
        return np.zeros_like(cov)
    rho2 = shadow_std_db**2
    jitter = 1e-10 * rho2
    eye = np.eye(cov.shape[0])
    while jitter <= 1e-4 * rho2:
        try:
            return np.linalg.cholesky(cov + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise CholeskyFailure("shadowing covariance not positive definite after jitter escalation")


def fractional_power_allocation(gains: np.ndarray, sum_power: float,
                                exponent: float = -1.0) -> np.ndarray:
    """Power split p_k proportional to (sum_l gains[l,k])^exponent, summing to sum_power."""
    gains = np.asarray(gains, dtype=float)
    if np.any(gains <= 0):
        raise ValueError("gains must be positive")
    if sum_power <= 0:
        raise ValueError("sum_power must be positive")
    weights = gains.sum(axis=0) ** exponent
    return sum_power * weights / weights.sum()


def build_scenario(config: NetworkConfig, rng: np.random.Generator) -> Scenario:
    """Draw one user drop: uniform UE placement, correlated shadowing, gains, powers."""
    ap_pos = place_aps(config.L, config.area_side)
    ue_pos = rng.uniform(0.0, config.area_side, size=(config.K, 2))

    cov = shadow_covariance(ue_pos, config.shadow_std_db, config.shadow_corr_distance_m)
    chol = shadow_cholesky(cov, config.shadow_std_db)
    # one AP per row; each row is an independent draw from the shared covariance
    shadow = rng.standard_normal((config.L, config.K)) @ chol.T

    d2 = np.linalg.norm(ap_pos[:, None, :] - ue_pos[None, :, :], axis=-1)
    # powers are carried in watts, so the absorbed noise is converted to dBW;
    # the resulting linear gains are per-watt SNRs
    noise_dbw = noise_power_dbm(config.bandwidth_hz, config.noise_figure_db) - 30.0
    gains_db = channel_gain_db(d2, config.ap_height_delta, shadow, noise_dbw,
                               config.pl_slope_db, config.pl_intercept_db)
    gains = 10.0 ** (gains_db / 10.0)

    p = fractional_power_allocation(gains, config.sum_power_watt, config.power_exponent)
    return Scenario(ap_positions=ap_pos, ue_positions=ue_pos, gains=gains,
                    p=p, sigma=np.ones(config.L), n_antennas=config.N)
