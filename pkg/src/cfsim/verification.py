"""Self-contained correctness checks behind the `verify` CLI subcommand.

These mirror the most load-bearing invariants: the finite-ensemble optimality
oracle, solver equivalence, algebraic identities, degenerate-case agreements,
and the per-scheme information constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .channel import AgingModel, ChannelPair, clarke_autocorrelation, finite_toy_ensemble, sample_pair
from .harness import derive_stream
from .precoding import (
    build_precoder,
    local_mmse_stage,
    local_stage_matrices,
    solve_team_stages,
    solve_team_stages_stacked,
    stage_residual,
    team_mmse_precoder,
)
from .scenario import Scenario, fractional_power_allocation


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _toy_ensemble(r: float = 0.9):
    ens = finite_toy_ensemble(2, 1, 1, alphabet=(1.0, -1.0), r=r,
                              error_alphabet=(0.5, -0.5))
    p = np.array([0.8])
    sigma = np.array([1.0, 1.0])
    return ens, p, sigma


def _desk_scenario(seed: int, L: int = 4, N: int = 2, K: int = 6) -> Scenario:
    rng = derive_stream(seed, purpose="verify_scenario")
    gains = rng.uniform(0.2, 2.0, size=(L, K))
    p = fractional_power_allocation(gains, float(K))
    return Scenario(ap_positions=np.zeros((L, 2)), ue_positions=np.zeros((K, 2)),
                    gains=gains, p=p, sigma=np.ones(L), n_antennas=N)


def check_clarke() -> CheckResult:
    ok = (abs(clarke_autocorrelation(10.0, 1e-3, 10) - 0.90368) <= 1e-4
          and abs(clarke_autocorrelation(10.0, 1e-3, 1) - 0.99901) <= 1e-5
          and clarke_autocorrelation(0.0, 1.0, 0.0) == 1.0)
    return CheckResult("clarke_autocorrelation", ok)


def check_finite_oracle(n_perturbations: int = 20) -> CheckResult:
    ens, p, sigma = _toy_ensemble()
    opt_value, _ = oracle.team_qp_optimum(ens, p, sigma)
    team_t = oracle.scheme_solution(ens, "team_mmse", p, sigma)
    team_value = oracle.enumerated_objective(ens, team_t, p, sigma)
    if abs(team_value - opt_value) > 1e-10:
        return CheckResult("finite_oracle", False,
                           f"two-stage objective {team_value} vs brute force {opt_value}")
    for scheme in ("local_tmmse", "centralized", "naive", "structure_aware"):
        other = oracle.enumerated_objective(
            ens, oracle.scheme_solution(ens, scheme, p, sigma), p, sigma)
        if team_value > other + 1e-12:
            return CheckResult("finite_oracle", False, f"beaten by {scheme}: {other}")
    rng = derive_stream(7, purpose="verify_perturb")
    for _ in range(n_perturbations):
        delta = oracle.random_feasible_perturbation(ens, rng)
        value = oracle.enumerated_objective(ens, team_t + 1e-3 * delta, p, sigma)
        if value < team_value - 1e-12:
            return CheckResult("finite_oracle", False, "improved by a feasible perturbation")
    pis = oracle.exact_conditional_pi(ens, p, sigma)
    worst = max(stage_residual(pi, solve_team_stages(pi)) for pi in pis.values())
    if worst > 1e-10:
        return CheckResult("finite_oracle", False, f"stage residual {worst}")
    return CheckResult("finite_oracle", True)


def check_solver_equivalence(n_draws: int = 20) -> CheckResult:
    rng = derive_stream(11, purpose="verify_solver")
    worst = 0.0
    for _ in range(n_draws):
        L = int(rng.integers(1, 7))
        K = int(rng.integers(1, 9))
        pis = [_random_psd_contraction(K, rng) for _ in range(L)]
        reduced = solve_team_stages(pis)
        stacked = solve_team_stages_stacked(pis)
        worst = max(worst, max(np.max(np.abs(a - b)) for a, b in zip(reduced, stacked)))
    return CheckResult("solver_equivalence", worst <= 1e-10, f"max deviation {worst:.2e}")


def _random_psd_contraction(K: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix with eigenvalues in [0, 0.95]."""
    a = rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))
    q, _ = np.linalg.qr(a)
    eig = rng.uniform(0.0, 0.95, size=K)
    return (q * eig) @ q.conj().T


def check_push_through(n_draws: int = 10) -> CheckResult:
    rng = derive_stream(13, purpose="verify_push")
    worst = 0.0
    for _ in range(n_draws):
        N, K = int(rng.integers(1, 5)), int(rng.integers(1, 7))
        h = rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))
        p = rng.uniform(0.1, 2.0, size=K)
        sigma = rng.uniform(0.5, 2.0)
        f = local_mmse_stage(h, p, sigma)
        b = h * np.sqrt(p)
        alt = b @ np.linalg.solve(b.conj().T @ b + sigma * np.eye(K), np.eye(K))
        worst = max(worst, np.max(np.abs(f - alt)))
    return CheckResult("push_through_identity", worst <= 1e-10, f"max deviation {worst:.2e}")


def check_degenerate_cases() -> CheckResult:
    # r = 1: all delayed-CSI schemes collapse onto regularized channel inversion
    aging = AgingModel(r=1.0)
    for seed in (1, 2, 3):
        scen = _desk_scenario(seed)
        pair = sample_pair(scen, aging, derive_stream(seed, purpose="verify_pair"))
        outs = [build_precoder(s, pair, scen, aging, m_samples=4,
                               rng=derive_stream(seed, purpose="verify_pi")).t
                for s in ("team_mmse", "centralized", "naive", "structure_aware")]
        for other in outs[1:]:
            if np.max(np.abs(outs[0] - other)) > 1e-8:
                return CheckResult("degenerate_cases", False, "r=1 schemes disagree")
    # L = 1: the team precoder is exactly its local MMSE stage
    scen1 = _desk_scenario(4, L=1, N=3, K=4)
    pair1 = sample_pair(scen1, aging, derive_stream(4, purpose="verify_pair"))
    team = team_mmse_precoder(pair1, scen1, aging, 4, derive_stream(4, purpose="verify_pi"))
    f = local_mmse_stage(pair1.h_now[0], scen1.p, scen1.sigma[0])
    if not np.array_equal(team.t[0], f):
        return CheckResult("degenerate_cases", False, "L=1 team != local stage")
    # r = 0 toy: exact team stages equal exact local stages
    ens, p, sigma = _toy_ensemble(r=0.0)
    t_team = oracle.scheme_solution(ens, "team_mmse", p, sigma)
    t_local = oracle.scheme_solution(ens, "local_tmmse", p, sigma)
    if np.max(np.abs(t_team - t_local)) > 1e-8:
        return CheckResult("degenerate_cases", False, "r=0 team != local on the toy")
    return CheckResult("degenerate_cases", True)


def check_measurability() -> CheckResult:
    scen = _desk_scenario(21)
    aging = AgingModel(r=0.9)
    pair = sample_pair(scen, aging, derive_stream(21, purpose="verify_pair"))
    noise = derive_stream(22, purpose="verify_noise")
    for scheme in ("team_mmse", "local_tmmse", "naive", "structure_aware"):
        for l in range(scen.L):
            bumped = pair.h_now.copy()
            for j in range(scen.L):
                if j != l:
                    bumped[j] += noise.standard_normal(bumped[j].shape)
            other = ChannelPair(h_past=pair.h_past, h_now=bumped)
            a = _with_fresh_streams(scheme, pair, scen, aging)
            b = _with_fresh_streams(scheme, other, scen, aging)
            if not np.array_equal(a.t[l], b.t[l]):
                return CheckResult("measurability", False,
                                   f"{scheme}: T_{l} read a foreign current block")
    bumped = pair.h_now + noise.standard_normal(pair.h_now.shape)
    cent_a = build_precoder("centralized", pair, scen, aging)
    cent_b = build_precoder("centralized", ChannelPair(pair.h_past, bumped), scen, aging)
    if not np.array_equal(cent_a.t, cent_b.t):
        return CheckResult("measurability", False, "centralized read the current channel")
    return CheckResult("measurability", True)


def _with_fresh_streams(scheme, pair, scen, aging):
    rngs = [derive_stream(99, 0, 0, l, "verify_pi") for l in range(scen.L)]
    stages = None
    if scheme == "local_tmmse":
        stages = local_stage_matrices(scen, 16, [derive_stream(99, 0, 0, l, "verify_lpi")
                                                 for l in range(scen.L)])
    return build_precoder(scheme, pair, scen, aging, m_samples=16, rng=rngs,
                          local_stages=stages)


ALL_CHECKS = (
    check_clarke,
    check_finite_oracle,
    check_solver_equivalence,
    check_push_through,
    check_degenerate_cases,
    check_measurability,
)


def run_all() -> list[CheckResult]:
    return [check() for check in ALL_CHECKS]
