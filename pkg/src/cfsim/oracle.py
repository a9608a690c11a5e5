"""Exact computations on finite ensembles: enumerated coefficients, per-scheme
precoders, the team objective, and a brute-force quadratic-program optimum that
is independent of the two-stage solution path."""

from __future__ import annotations

import numpy as np

from .channel import FiniteEnsemble
from .precoding import (
    effective_channel_after_stage,
    local_mmse_stage,
    solve_team_stages,
)

ENSEMBLE_SCHEMES = ("team_mmse", "local_tmmse", "centralized", "naive", "structure_aware")


def _class_keys(ensemble: FiniteEnsemble) -> list[bytes]:
    """Conditional-class keys in first-occurrence order."""
    seen: list[bytes] = []
    have = set()
    for i in range(ensemble.n_outcomes):
        key = ensemble.h_past[i].tobytes()
        if key not in have:
            have.add(key)
            seen.append(key)
    return seen


def exact_conditional_pi(ensemble: FiniteEnsemble, p: np.ndarray,
                         sigma: np.ndarray) -> dict[bytes, list[np.ndarray]]:
    """Enumerated E[P^(1/2) H_lᴴ F_l | delayed channel] per conditional class, per AP."""
    L = ensemble.shape[0]
    classes = ensemble.past_classes()
    out: dict[bytes, list[np.ndarray]] = {}
    for key, idx in classes.items():
        w = ensemble.probabilities[idx]
        w = w / w.sum()
        pis = []
        for l in range(L):
            acc = sum(wi * effective_channel_after_stage(ensemble.h_now[i, l], p, sigma[l])
                      for wi, i in zip(w, idx))
            pis.append(acc)
        out[key] = pis
    return out


def exact_marginal_pi(ensemble: FiniteEnsemble, p: np.ndarray,
                      sigma: np.ndarray) -> list[np.ndarray]:
    """Enumerated unconditional mean E[P^(1/2) H_lᴴ F_l] per AP."""
    L = ensemble.shape[0]
    q = ensemble.probabilities
    return [sum(q[i] * effective_channel_after_stage(ensemble.h_now[i, l], p, sigma[l])
                for i in range(ensemble.n_outcomes))
            for l in range(L)]


def exact_conditional_mean(ensemble: FiniteEnsemble) -> dict[bytes, np.ndarray]:
    """Enumerated E[h_now | delayed channel] per conditional class."""
    out = {}
    for key, idx in ensemble.past_classes().items():
        w = ensemble.probabilities[idx]
        out[key] = np.tensordot(w / w.sum(), ensemble.h_now[idx], axes=1)
    return out


def exact_error_covariance(ensemble: FiniteEnsemble, p: np.ndarray) -> np.ndarray:
    """Enumerated E[(Hhat - H) P (Hhat - H)ᴴ] over the stacked channel."""
    L, N, K = ensemble.shape
    hhat = exact_conditional_mean(ensemble)
    psi = np.zeros((L * N, L * N), dtype=complex)
    for i in range(ensemble.n_outcomes):
        err = (hhat[ensemble.h_past[i].tobytes()] - ensemble.h_now[i]).reshape(L * N, K)
        psi += ensemble.probabilities[i] * (err * p) @ err.conj().T
    return psi


def enumerated_objective(ensemble: FiniteEnsemble, t_outcomes: np.ndarray,
                         p: np.ndarray, sigma: np.ndarray) -> float:
    """Exact team MSE objective of a per-outcome precoder mapping (n, L, N, K)."""
    L, N, K = ensemble.shape
    sqrt_p = np.sqrt(p)
    total = 0.0
    for i in range(ensemble.n_outcomes):
        h = ensemble.h_now[i].reshape(L * N, K)
        t = t_outcomes[i].reshape(L * N, K)
        err = sqrt_p[:, None] * (h.conj().T @ t) - np.eye(K)
        reg = sum(sigma[l] * np.linalg.norm(t_outcomes[i, l]) ** 2 for l in range(L))
        total += ensemble.probabilities[i] * (np.linalg.norm(err) ** 2 + reg)
    return float(total)


def _apply_stages(ensemble: FiniteEnsemble, c_for_outcome, p, sigma) -> np.ndarray:
    """Assemble T_l = F_l(h_now) C_l per outcome from a per-outcome stage lookup."""
    L, N, K = ensemble.shape
    t = np.empty((ensemble.n_outcomes, L, N, K), dtype=complex)
    for i in range(ensemble.n_outcomes):
        c_list = c_for_outcome(i)
        for l in range(L):
            t[i, l] = local_mmse_stage(ensemble.h_now[i, l], p, sigma[l]) @ c_list[l]
    return t


def scheme_solution(ensemble: FiniteEnsemble, scheme: str, p: np.ndarray,
                    sigma: np.ndarray) -> np.ndarray:
    """Per-outcome precoders of one scheme with all statistics enumerated exactly.

    Every scheme only reads the inputs its information constraint allows:
    conditional quantities are functions of the delayed channel alone, and the
    first stages read the current local block.
    """
    L, N, K = ensemble.shape
    z_key = [ensemble.h_past[i].tobytes() for i in range(ensemble.n_outcomes)]

    if scheme == "team_mmse":
        cond_pi = exact_conditional_pi(ensemble, p, sigma)
        c_by_z = {key: solve_team_stages(pis) for key, pis in cond_pi.items()}
        return _apply_stages(ensemble, lambda i: c_by_z[z_key[i]], p, sigma)

    if scheme == "local_tmmse":
        c = solve_team_stages(exact_marginal_pi(ensemble, p, sigma))
        return _apply_stages(ensemble, lambda i: c, p, sigma)

    hhat = exact_conditional_mean(ensemble)
    psi = exact_error_covariance(ensemble, p)
    sigma_full = np.kron(np.diag(sigma), np.eye(N))

    if scheme == "centralized":
        t_by_z = {}
        for key, hz in hhat.items():
            hs = hz.reshape(L * N, K)
            a = (hs * p) @ hs.conj().T + psi + sigma_full
            t_by_z[key] = np.linalg.solve(a, hs * np.sqrt(p)).reshape(L, N, K)
        return np.stack([t_by_z[z_key[i]] for i in range(ensemble.n_outcomes)])

    if scheme == "naive":
        t = np.empty((ensemble.n_outcomes, L, N, K), dtype=complex)
        for i in range(ensemble.n_outcomes):
            for l in range(L):
                h_loc = hhat[z_key[i]].copy()
                h_loc[l] = ensemble.h_now[i, l]
                psi_loc = psi.copy()
                psi_loc[l * N:(l + 1) * N, :] = 0.0
                psi_loc[:, l * N:(l + 1) * N] = 0.0
                hs = h_loc.reshape(L * N, K)
                a = (hs * p) @ hs.conj().T + psi_loc + sigma_full
                full = np.linalg.solve(a, hs * np.sqrt(p))
                t[i, l] = full[l * N:(l + 1) * N]
        return t

    if scheme == "structure_aware":
        c_by_z = {}
        for key, hz in hhat.items():
            pis = []
            for l in range(L):
                block = psi[l * N:(l + 1) * N, l * N:(l + 1) * N]
                hl = hz[l]
                a = (hl * p) @ hl.conj().T + block + sigma[l] * np.eye(N)
                f = np.linalg.solve(a, hl * np.sqrt(p))
                pi = np.sqrt(p)[:, None] * (hl.conj().T @ f)
                pis.append(0.5 * (pi + pi.conj().T))
            c_by_z[key] = solve_team_stages(pis)
        return _apply_stages(ensemble, lambda i: c_by_z[z_key[i]], p, sigma)

    raise ValueError(f"unknown scheme {scheme!r}")


def information_classes(ensemble: FiniteEnsemble, l: int) -> list[np.ndarray]:
    """Outcome index groups over which AP l's precoder must be constant.

    AP l observes the full delayed channel plus its own current block, so two
    outcomes are indistinguishable to it iff both of those coincide.
    """
    groups: dict[tuple[bytes, bytes], list[int]] = {}
    for i in range(ensemble.n_outcomes):
        key = (ensemble.h_past[i].tobytes(), ensemble.h_now[i, l].tobytes())
        groups.setdefault(key, []).append(i)
    return [np.asarray(v) for v in groups.values()]


def team_qp_optimum(ensemble: FiniteEnsemble, p: np.ndarray,
                    sigma: np.ndarray) -> tuple[float, np.ndarray]:
    """Brute-force team optimum on the finite ensemble.

    Treats one precoder block per (AP, information class) as a free variable,
    assembles the exact quadratic objective by enumeration, and solves its
    normal equations. Returns (optimal objective, per-outcome precoders).
    This path never touches the two-stage construction.
    """
    L, N, K = ensemble.shape
    classes = [information_classes(ensemble, l) for l in range(L)]
    # map (l, outcome) -> variable block row offset
    offsets = []
    v = 0
    block_of_outcome = np.empty((L, ensemble.n_outcomes), dtype=int)
    for l in range(L):
        row = []
        for idx in classes[l]:
            for i in idx:
                block_of_outcome[l, i] = v
            row.append(v)
            v += N
        offsets.append(row)

    m = np.zeros((v, v), dtype=complex)
    rhs = np.zeros((v, K), dtype=complex)
    for i in range(ensemble.n_outcomes):
        q = ensemble.probabilities[i]
        h = ensemble.h_now[i]                      # (L, N, K)
        for l in range(L):
            rl = block_of_outcome[l, i]
            rhs[rl:rl + N] += q * h[l] * np.sqrt(p)
            m[rl:rl + N, rl:rl + N] += q * sigma[l] * np.eye(N)
            for j in range(L):
                rj = block_of_outcome[j, i]
                m[rl:rl + N, rj:rj + N] += q * (h[l] * p) @ h[j].conj().T
    x = np.linalg.solve(m, rhs)

    t = np.empty((ensemble.n_outcomes, L, N, K), dtype=complex)
    for i in range(ensemble.n_outcomes):
        for l in range(L):
            rl = block_of_outcome[l, i]
            t[i, l] = x[rl:rl + N]
    return enumerated_objective(ensemble, t, p, sigma), t


def random_feasible_perturbation(ensemble: FiniteEnsemble,
                                 rng: np.random.Generator) -> np.ndarray:
    """A per-outcome direction (n, L, N, K) constant on each information class."""
    L, N, K = ensemble.shape
    delta = np.empty((ensemble.n_outcomes, L, N, K), dtype=complex)
    for l in range(L):
        for idx in information_classes(ensemble, l):
            d = rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))
            delta[idx, l] = d
    return delta
