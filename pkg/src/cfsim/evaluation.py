"""Team MSE objective, hardening-bound rate moments, SINR/rates, and CDF aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import AgingModel, ChannelPair, sample_pair
from .precoding import PrecoderSet, build_precoder, local_stage_matrices
from .scenario import Scenario


class EmptySampleSet(ValueError):
    """Raised when an estimator receives no samples."""


class InsufficientSamples(ValueError):
    """Raised when fewer samples than the estimator needs are available."""


@dataclass(frozen=True)
class RateMoments:
    """Per-UE moments of the hardening-bound SINR, estimated over paired samples.

    cross[j, k] holds E[|h_jᴴ t_k|^2]; its diagonal is the raw second moment of
    the own-channel gain and is excluded from the interference sum.
    """

    mean_gain: np.ndarray   # (K,) complex, E[h_kᴴ t_k]
    var_gain: np.ndarray    # (K,) unbiased variance of h_kᴴ t_k
    cross: np.ndarray       # (K, K) second moments
    power: np.ndarray       # (K,) E[||t_k||^2]

    def __post_init__(self):
        if np.any(self.var_gain < 0) or np.any(self.cross < 0) or np.any(self.power < 0):
            raise ValueError("variance, cross moments and powers must be nonnegative")


@dataclass(frozen=True)
class RateRecord:
    """One ergodic-rate sample: the unit of CSV output."""

    drop_id: int
    ue_id: int
    scheme: str
    rate_bits: float

    def __post_init__(self):
        if self.rate_bits < 0:
            raise ValueError("rates are nonnegative")


class MomentAccumulator:
    """Mergeable sums for rate moments and the MSE objective of one scheme.

    Workers may accumulate disjoint realizations and merge; all state is
    commutative sums plus a count.
    """

    def __init__(self, n_ues: int, p: np.ndarray, sigma: np.ndarray):
        self.n = 0
        self.p = np.asarray(p, float)
        self.sigma = np.asarray(sigma, float)
        self.sum_gain = np.zeros(n_ues, dtype=complex)
        self.sum_cross = np.zeros((n_ues, n_ues))
        self.sum_power = np.zeros(n_ues)
        self.sum_mse = 0.0

    def update(self, pair: ChannelPair, pset: PrecoderSet) -> None:
        t = pset.stacked()
        h = pair.h_now.reshape(t.shape)
        g = h.conj().T @ t                      # g[j, k] = h_jᴴ t_k
        self.n += 1
        self.sum_gain += np.diag(g)
        self.sum_cross += np.abs(g) ** 2
        self.sum_power += np.linalg.norm(t, axis=0) ** 2
        err = np.sqrt(self.p)[:, None] * g - np.eye(len(self.p))
        block_pow = np.linalg.norm(pset.t, axis=(1, 2)) ** 2
        self.sum_mse += np.linalg.norm(err) ** 2 + float(self.sigma @ block_pow)

    def merge(self, other: "MomentAccumulator") -> None:
        self.n += other.n
        self.sum_gain += other.sum_gain
        self.sum_cross += other.sum_cross
        self.sum_power += other.sum_power
        self.sum_mse += other.sum_mse

    def moments(self) -> RateMoments:
        if self.n < 2:
            raise InsufficientSamples("variance estimation needs at least 2 samples")
        mean_gain = self.sum_gain / self.n
        second = np.diag(self.sum_cross) / self.n
        # unbiased: (sum |g|^2 - n |mean|^2) / (n - 1), clipped against rounding
        var_gain = np.maximum(second - np.abs(mean_gain) ** 2, 0.0) * self.n / (self.n - 1)
        return RateMoments(mean_gain=mean_gain, var_gain=var_gain,
                           cross=self.sum_cross / self.n, power=self.sum_power / self.n)

    def mse_objective(self) -> float:
        if self.n == 0:
            raise EmptySampleSet("no samples accumulated")
        return self.sum_mse / self.n


def mse_objective(samples: Sequence[tuple[ChannelPair, PrecoderSet]], p: np.ndarray,
                  sigma: np.ndarray) -> float:
    """Sample-average team MSE objective E||P^(1/2) Hᴴ T - I||^2 + sum_l sigma_l E||T_l||^2.

    The current channel h_now plays the role of H. All precoders must come
    from a single scheme; mixing tags is a caller bug.
    """
    samples = list(samples)
    if not samples:
        raise EmptySampleSet("mse_objective needs at least one (pair, precoder) sample")
    tags = {pset.scheme for _, pset in samples}
    if len(tags) > 1:
        raise ValueError(f"samples mix schemes {sorted(tags)}")
    acc = MomentAccumulator(len(p), p, sigma)
    for pair, pset in samples:
        acc.update(pair, pset)
    return acc.mse_objective()


def estimate_rate_moments(scheme: str, scenario: Scenario, aging: AgingModel,
                          n_realizations: int, rng: np.random.Generator,
                          pi_samples: int = 200) -> RateMoments:
    """Estimate the SINR moments of one scheme over i.i.d. realizations of a drop."""
    if n_realizations < 2:
        raise InsufficientSamples("need at least 2 realizations for the variance term")
    stages = None
    if scheme == "local_tmmse":
        stages = local_stage_matrices(scenario, pi_samples, rng)
    acc = MomentAccumulator(scenario.K, scenario.p, scenario.sigma)
    for _ in range(n_realizations):
        pair = sample_pair(scenario, aging, rng)
        pset = build_precoder(scheme, pair, scenario, aging, pi_samples, rng,
                              local_stages=stages)
        acc.update(pair, pset)
    return acc.moments()


def sinr_and_rate(moments: RateMoments, p: np.ndarray) -> np.ndarray:
    """Hardening-bound ergodic rates log2(1 + SINR_k) from estimated moments.

    SINR_k = p_k |E[h_kᴴ t_k]|^2 over the self-variance, inter-user, and
    precoder-power terms; a vanished precoder scores zero rate instead of NaN.
    """
    p = np.asarray(p, float)
    if np.any(p < 0):
        raise ValueError("p must be nonnegative")
    num = p * np.abs(moments.mean_gain) ** 2
    interference = p @ moments.cross - p * np.diag(moments.cross)
    den = p * moments.var_gain + interference + moments.power
    sinr = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.log2(1.0 + sinr)


def aggregate_cdf(records: Iterable[RateRecord]) -> dict[str, list[tuple[float, float]]]:
    """Empirical CDF points per scheme: sorted rates with value i/n, ties collapsed upward."""
    by_scheme: dict[str, list[float]] = {}
    for rec in records:
        by_scheme.setdefault(rec.scheme, []).append(rec.rate_bits)
    if not by_scheme:
        raise EmptySampleSet("no records to aggregate")
    out: dict[str, list[tuple[float, float]]] = {}
    for scheme, rates in sorted(by_scheme.items()):
        rates.sort()
        n = len(rates)
        points = [(rate, (i + 1) / n) for i, rate in enumerate(rates)
                  if i + 1 == n or rates[i + 1] != rate]
        out[scheme] = points
    return out
