"""Two-stage distributed precoding: local MMSE stages, stage coefficients, and the five schemes.

Every scheme is a pure function of the CSI it is allowed to read: the current
local block h_now[l] and the whole delayed channel h_past for the distributed
schemes, only h_past for the centralized one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import AgingModel, ChannelPair, _complex_normal, sample_conditional
from .scenario import Scenario

SCHEMES = ("team_mmse", "local_tmmse", "centralized", "naive", "structure_aware")

_COND_LIMIT = 1e12


class SingularStage(RuntimeError):
    """Raised when a stage linear system is numerically singular (bad coefficient estimate)."""


@dataclass(frozen=True)
class PrecoderSet:
    """Joint precoder as L blocks of shape (N, K), tagged with its scheme."""

    t: np.ndarray            # (L, N, K)
    scheme: str

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.t.ndim != 3 or not np.all(np.isfinite(self.t)):
            raise ValueError("precoder blocks must be a finite (L, N, K) array")

    def stacked(self) -> np.ndarray:
        """The (L*N, K) joint precoding matrix."""
        L, N, K = self.t.shape
        return self.t.reshape(L * N, K)


@dataclass(frozen=True)
class TeamStages:
    """Stage coefficients pi and the resulting second-stage matrices c, per AP."""

    pi: tuple[np.ndarray, ...]
    c: tuple[np.ndarray, ...]

    @classmethod
    def solve(cls, pi_list: Sequence[np.ndarray]) -> "TeamStages":
        return cls(pi=tuple(pi_list), c=tuple(solve_team_stages(pi_list)))

    def residual(self) -> float:
        return stage_residual(self.pi, self.c)


def local_mmse_stage(h_block: np.ndarray, p: np.ndarray, sigma_l: float) -> np.ndarray:
    """Local MMSE stage (H P Hᴴ + sigma I)^-1 H P^(1/2) for one (N, K) block."""
    n = h_block.shape[0]
    a = (h_block * p) @ h_block.conj().T + sigma_l * np.eye(n)
    return np.linalg.solve(a, h_block * np.sqrt(p))


def _stage_batched(h: np.ndarray, p: np.ndarray, sigma_l: float) -> np.ndarray:
    """local_mmse_stage over a batch of blocks h with shape (m, N, K)."""
    n = h.shape[1]
    a = np.einsum("mik,k,mjk->mij", h, p, h.conj()) + sigma_l * np.eye(n)
    return np.linalg.solve(a, h * np.sqrt(p))


def _pi_from_samples(h: np.ndarray, p: np.ndarray, sigma_l: float) -> np.ndarray:
    """Average of P^(1/2) Hᴴ F(H) over sampled blocks h (m, N, K), symmetrized."""
    f = _stage_batched(h, p, sigma_l)
    pi = np.sqrt(p)[:, None] * np.einsum("mna,mnb->ab", h.conj(), f) / h.shape[0]
    return 0.5 * (pi + pi.conj().T)


def effective_channel_after_stage(h_block: np.ndarray, p: np.ndarray,
                                  sigma_l: float) -> np.ndarray:
    """One sample P^(1/2) Hᴴ F(H) of the stage coefficient, symmetrized."""
    return _pi_from_samples(h_block[None], p, sigma_l)


def estimate_pi(z_block: np.ndarray, gamma_row: np.ndarray, r_row, p: np.ndarray,
                sigma_l: float, m_samples: int, rng: np.random.Generator,
                sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None,
                ) -> np.ndarray:
    """Monte-Carlo estimate of E[P^(1/2) Hᴴ F(H) | delayed block z_block].

    Samples the current block from its conditional law given z_block (or from
    a caller-supplied sampler) and averages the effective channels after the
    local MMSE stage. The result is Hermitian-symmetrized.
    """
    if m_samples < 1:
        raise ValueError("m_samples must be >= 1")
    if sampler is None:
        h = sample_conditional(z_block, gamma_row, r_row, rng, size=m_samples)
    else:
        h = sampler(m_samples, rng)
    return _pi_from_samples(h, p, sigma_l)


def marginal_pi(gamma_row: np.ndarray, n_antennas: int, p: np.ndarray, sigma_l: float,
                m_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo estimate of the unconditional mean E[P^(1/2) Hᴴ F(H)]."""
    shape = (m_samples, n_antennas, len(gamma_row))
    h = np.sqrt(np.asarray(gamma_row, float)) * _complex_normal(rng, shape)
    return _pi_from_samples(h, p, sigma_l)


def _guard_condition(a: np.ndarray, what: str) -> None:
    if np.linalg.cond(a) > _COND_LIMIT:
        raise SingularStage(f"{what} is numerically singular")


def solve_team_stages(pi_list: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Solve C_l + sum_{j != l} Pi_j C_j = I for all l by block elimination.

    Reduction: with S = sum_j Pi_j C_j every row gives (I - Pi_l) C_l = I - S,
    so G = sum_l Pi_l (I - Pi_l)^-1 determines S = (I + G)^-1 G and each C_l
    follows at O(L K^3) instead of solving the stacked (LK)^2 system.
    """
    n_aps = len(pi_list)
    k = pi_list[0].shape[0]
    eye = np.eye(k, dtype=complex)
    if n_aps == 1:
        return [eye.copy()]

    inverses = []
    g = np.zeros((k, k), dtype=complex)
    for l, pi_l in enumerate(pi_list):
        a = eye - pi_l
        _guard_condition(a, f"I - Pi[{l}]")
        inv_a = np.linalg.inv(a)
        inverses.append(inv_a)
        g += inv_a @ pi_l
    _guard_condition(eye + g, "I + G")
    s = np.linalg.solve(eye + g, g)
    rhs = eye - s
    return [inv_a @ rhs for inv_a in inverses]


def solve_team_stages_stacked(pi_list: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Reference solver for the stage system via the full stacked LK x LK solve."""
    n_aps = len(pi_list)
    k = pi_list[0].shape[0]
    a = np.empty((n_aps * k, n_aps * k), dtype=complex)
    for l in range(n_aps):
        for j in range(n_aps):
            a[l * k:(l + 1) * k, j * k:(j + 1) * k] = np.eye(k) if j == l else pi_list[j]
    rhs = np.tile(np.eye(k, dtype=complex), (n_aps, 1))
    c = np.linalg.solve(a, rhs)
    return [c[l * k:(l + 1) * k] for l in range(n_aps)]


def stage_residual(pi_list: Sequence[np.ndarray], c_list: Sequence[np.ndarray]) -> float:
    """Largest per-row Frobenius residual of the stage system."""
    k = pi_list[0].shape[0]
    eye = np.eye(k)
    total = sum(pi_j @ c_j for pi_j, c_j in zip(pi_list, c_list))
    worst = 0.0
    for pi_l, c_l in zip(pi_list, c_list):
        res = c_l + (total - pi_l @ c_l) - eye
        worst = max(worst, np.linalg.norm(res))
    return worst


def prediction_error_power(scenario: Scenario, r_grid: np.ndarray) -> np.ndarray:
    """Per-AP power of the aging prediction error, sum_k p_k (1 - r_lk^2) gamma_lk."""
    return ((1.0 - r_grid**2) * scenario.gains * scenario.p).sum(axis=1)


def _regularized_inversion(hhat: np.ndarray, diag_load: np.ndarray,
                           p: np.ndarray) -> np.ndarray:
    """(Hs P Hsᴴ + D)^-1 Hs P^(1/2) for stacked blocks hhat (L, N, K).

    diag_load holds the per-AP diagonal loading; it must be strictly positive
    so the system is Hermitian positive definite.
    """
    L, N, K = hhat.shape
    hs = hhat.reshape(L * N, K)
    a = (hs * p) @ hs.conj().T
    a[np.diag_indices_from(a)] += np.repeat(diag_load, N)
    t = cho_solve(cho_factor(a, lower=True), hs * np.sqrt(p))
    return t.reshape(L, N, K)


def team_mmse_precoder(pair: ChannelPair, scenario: Scenario, aging: AgingModel,
                       m_samples: int, rng) -> PrecoderSet:
    """Optimal two-stage precoder T_l = F_l C_l under delayed CSI sharing.

    Stage coefficients are Monte-Carlo conditional expectations given the
    delayed channel; rng may be a single generator or one generator per AP
    (the per-AP estimates are independent and order-insensitive).
    """
    L, N, K = pair.shape
    r = aging.grid(L, K)
    rngs = list(rng) if isinstance(rng, (list, tuple)) else [rng] * L
    pi = [estimate_pi(pair.h_past[l], scenario.gains[l], r[l], scenario.p,
                      scenario.sigma[l], m_samples, rngs[l]) for l in range(L)]
    stages = TeamStages.solve(pi)
    t = np.stack([local_mmse_stage(pair.h_now[l], scenario.p, scenario.sigma[l]) @ stages.c[l]
                  for l in range(L)])
    return PrecoderSet(t=t, scheme="team_mmse")


def local_stage_matrices(scenario: Scenario, m_samples: int, rng) -> list[np.ndarray]:
    """Deterministic stage matrices for purely local precoding, one estimate per drop."""
    L = scenario.L
    rngs = list(rng) if isinstance(rng, (list, tuple)) else [rng] * L
    pi = [marginal_pi(scenario.gains[l], scenario.n_antennas, scenario.p,
                      scenario.sigma[l], m_samples, rngs[l]) for l in range(L)]
    return solve_team_stages(pi)


def local_tmmse_precoder(pair: ChannelPair, scenario: Scenario, aging: AgingModel,
                         m_samples: int, rng, stages: Sequence[np.ndarray] | None = None,
                         ) -> PrecoderSet:
    """Local team precoder: fixed stage matrices, timely local first stage only."""
    if stages is None:
        stages = local_stage_matrices(scenario, m_samples, rng)
    L = pair.shape[0]
    t = np.stack([local_mmse_stage(pair.h_now[l], scenario.p, scenario.sigma[l]) @ stages[l]
                  for l in range(L)])
    return PrecoderSet(t=t, scheme="local_tmmse")


def centralized_precoder(pair: ChannelPair, scenario: Scenario,
                         aging: AgingModel) -> PrecoderSet:
    """Delay-tolerant centralized MMSE from the predicted channel r * h_past only."""
    L, N, K = pair.shape
    r = aging.grid(L, K)
    hhat = r[:, None, :] * pair.h_past
    psi = prediction_error_power(scenario, r)
    t = _regularized_inversion(hhat, psi + scenario.sigma, scenario.p)
    return PrecoderSet(t=t, scheme="centralized")


def naive_precoder(pair: ChannelPair, scenario: Scenario, aging: AgingModel) -> PrecoderSet:
    """Each AP recomputes the centralized solution with its own block swapped to timely CSI.

    The substituting AP carries no prediction error, so its block of the error
    covariance is zeroed.
    """
    L, N, K = pair.shape
    r = aging.grid(L, K)
    hhat_base = r[:, None, :] * pair.h_past
    psi = prediction_error_power(scenario, r)
    t = np.empty((L, N, K), dtype=complex)
    for l in range(L):
        hhat = hhat_base.copy()
        hhat[l] = pair.h_now[l]
        load = psi + scenario.sigma
        load[l] = scenario.sigma[l]
        t[l] = _regularized_inversion(hhat, load, scenario.p)[l]
    return PrecoderSet(t=t, scheme="naive")


def structure_aware_precoder(pair: ChannelPair, scenario: Scenario,
                             aging: AgingModel) -> PrecoderSet:
    """Two-stage precoder with closed-form surrogate stage coefficients.

    The conditional expectation is approximated by the MMSE expression built
    from the predicted local channel and its error power, so no sampling is
    needed.
    """
    L, N, K = pair.shape
    r = aging.grid(L, K)
    psi = prediction_error_power(scenario, r)
    pi = []
    for l in range(L):
        hhat_l = r[l][None, :] * pair.h_past[l]
        pi.append(_pi_from_samples(hhat_l[None], scenario.p, scenario.sigma[l] + psi[l]))
    stages = TeamStages.solve(pi)
    t = np.stack([local_mmse_stage(pair.h_now[l], scenario.p, scenario.sigma[l]) @ stages.c[l]
                  for l in range(L)])
    return PrecoderSet(t=t, scheme="structure_aware")


def build_precoder(scheme: str, pair: ChannelPair, scenario: Scenario, aging: AgingModel,
                   m_samples: int = 200, rng=None,
                   local_stages: Sequence[np.ndarray] | None = None) -> PrecoderSet:
    """Dispatch one scheme by name; rng is only consumed by the sampling-based schemes."""
    if scheme == "team_mmse":
        return team_mmse_precoder(pair, scenario, aging, m_samples, rng)
    if scheme == "local_tmmse":
        return local_tmmse_precoder(pair, scenario, aging, m_samples, rng, stages=local_stages)
    if scheme == "centralized":
        return centralized_precoder(pair, scenario, aging)
    if scheme == "naive":
        return naive_precoder(pair, scenario, aging)
    if scheme == "structure_aware":
        return structure_aware_precoder(pair, scenario, aging)
    raise ValueError(f"unknown scheme {scheme!r}")
