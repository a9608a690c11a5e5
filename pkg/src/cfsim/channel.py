"""Temporally correlated Rayleigh channel pairs, conditional resampling, and toy ensembles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class NegativeAutocorrelation(ValueError):
    """Raised when the Clarke mapping lands outside the modeled range [0, 1]."""


class EnsembleTooLarge(ValueError):
    """Raised when exhaustive enumeration of a toy ensemble would be impractical."""


@dataclass(frozen=True)
class AgingModel:
    """Autocorrelation between the delayed and the current channel.

    r may be a scalar applied to every AP/UE pair or an (L, K) array.
    """

    r: float | np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("autocorrelation coefficients must lie in [0, 1]")

    def grid(self, L: int, K: int) -> np.ndarray:
        """Per-link coefficients broadcast to shape (L, K)."""
        return np.broadcast_to(np.asarray(self.r, dtype=float), (L, K))


@dataclass(frozen=True)
class ChannelPair:
    """One joint realization of the delayed and current global channel.

    Arrays have shape (L, N, K): block l row-indexes the antennas of AP l,
    column k indexes UE k. h_past is the shared delayed CSI.
    """

    h_past: np.ndarray
    h_now: np.ndarray

    def __post_init__(self):
        if self.h_past.shape != self.h_now.shape or self.h_past.ndim != 3:
            raise ValueError("h_past and h_now must share one (L, N, K) shape")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.h_past.shape


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circular complex Gaussian entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_pair(scenario, aging: AgingModel, rng: np.random.Generator) -> ChannelPair:
    """Draw one (delayed, current) channel pair.

    Entrywise: h_past = sqrt(gamma) w1 and h_now = r h_past + sqrt((1-r^2) gamma) w2
    with independent standard circular Gaussians w1, w2, so the marginals are
    CN(0, gamma) and the lag cross-covariance is r*gamma.
    """
    L, K = scenario.gains.shape
    N = scenario.n_antennas
    amp = np.sqrt(scenario.gains)[:, None, :]          # (L, 1, K)
    r = aging.grid(L, K)[:, None, :]
    h_past = amp * _complex_normal(rng, (L, N, K))
    h_now = r * h_past + np.sqrt(1.0 - r**2) * amp * _complex_normal(rng, (L, N, K))
    return ChannelPair(h_past=h_past, h_now=h_now)


def sample_conditional(z_block: np.ndarray, gamma_row: np.ndarray, r_row: np.ndarray,
                       rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw the current local channel given its delayed value z_block (N, K).

    For the jointly circular Gaussian pair the conditional law is
    CN(r*z, (1-r^2)*gamma) per entry. Returns (N, K) or (size, N, K).
    """
    gamma_row = np.asarray(gamma_row, dtype=float)
    r_row = np.broadcast_to(np.asarray(r_row, dtype=float), gamma_row.shape)
    shape = z_block.shape if size is None else (size, *z_block.shape)
    std = np.sqrt((1.0 - r_row**2) * gamma_row)
    return r_row * z_block + std * _complex_normal(rng, shape)


def bessel_j0(x: float) -> float:
    """J0 via its power series for |x| <= 12, Hankel asymptotics beyond."""
    x = abs(float(x))
    if x <= 12.0:
        q = x * x / 4.0
        term = 1.0
        total = 1.0
        m = 0
        while abs(term) > 1e-16:
            m += 1
            term *= -q / (m * m)
            total += term
        return total
    chi = x - math.pi / 4.0
    ix2 = 1.0 / (x * x)
    p = 1.0 + ix2 * (-9.0 / 128.0 + ix2 * (3675.0 / 32768.0 + ix2 * (-2401245.0 / 4194304.0)))
    q = (1.0 / x) * (-0.125 + ix2 * (75.0 / 1024.0 + ix2 * (-59535.0 / 262144.0)))
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def clarke_autocorrelation(doppler_hz: float, symbol_time_s: float,
                           delay_symbols: float) -> float:
    """Clarke-model aging coefficient J0(2*pi*doppler*T*d), clamped to [0, 1].

    Negative J0 values fall outside the aging range this simulator models and
    are rejected rather than silently used.
    """
    if min(doppler_hz, symbol_time_s, delay_symbols) < 0:
        raise ValueError("doppler_hz, symbol_time_s, delay_symbols must be nonnegative")
    r = bessel_j0(2.0 * math.pi * doppler_hz * symbol_time_s * delay_symbols)
    if r < 0.0:
        raise NegativeAutocorrelation(
            f"J0 gave {r:.6f}; negative aging coefficients are out of model range")
    return min(r, 1.0)


@dataclass(frozen=True)
class FiniteEnsemble:
    """Exhaustive finite sample space of (h_past, h_now) pairs with exact probabilities.

    Supports exact expectations by enumeration; outcomes sharing one h_past
    realization form the conditional classes.
    """

    h_past: np.ndarray       # (n_outcomes, L, N, K)
    h_now: np.ndarray        # (n_outcomes, L, N, K)
    probabilities: np.ndarray  # (n_outcomes,)

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be positive and sum to 1")

    @property
    def n_outcomes(self) -> int:
        return self.probabilities.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.h_past.shape[1:]

    def outcomes(self):
        """Iterate (h_past, h_now, probability) triples."""
        for i in range(self.n_outcomes):
            yield self.h_past[i], self.h_now[i], self.probabilities[i]

    def past_classes(self) -> dict[bytes, np.ndarray]:
        """Outcome indices grouped by identical h_past realization."""
        groups: dict[bytes, list[int]] = {}
        for i in range(self.n_outcomes):
            groups.setdefault(self.h_past[i].tobytes(), []).append(i)
        return {k: np.asarray(v) for k, v in groups.items()}

    def conditional_expectation(self, values: np.ndarray, z_key: bytes) -> np.ndarray:
        """Exact E[values | h_past class] for per-outcome values (n_outcomes, ...)."""
        idx = self.past_classes()[z_key]
        w = self.probabilities[idx]
        return np.tensordot(w / w.sum(), values[idx], axes=1)


def finite_toy_ensemble(L: int, N: int, K: int, alphabet, r: float,
                        error_alphabet, max_outcomes: int = 1_000_000) -> FiniteEnsemble:
    """Enumerate the product ensemble h_now = r*h_past + e over finite alphabets.

    Every h_past entry takes each alphabet value with equal mass, every error
    entry takes each error_alphabet value with equal mass, independently. The
    error alphabet must have zero mean so that E[h_now | h_past] = r*h_past.
    """
    alphabet = [complex(a) for a in alphabet]
    error_alphabet = [complex(e) for e in error_alphabet]
    if abs(sum(error_alphabet)) > 1e-12 * max(1.0, max(abs(e) for e in error_alphabet)):
        raise ValueError("error alphabet must have zero mean")
    entries = L * N * K
    total = (len(alphabet) * len(error_alphabet)) ** entries
    if total > max_outcomes:
        raise EnsembleTooLarge(f"{total} outcomes exceed the cap of {max_outcomes}")

    past = np.empty((total, L, N, K), dtype=complex)
    now = np.empty((total, L, N, K), dtype=complex)
    i = 0
    for z_vals in itertools.product(alphabet, repeat=entries):
        z = np.array(z_vals, dtype=complex).reshape(L, N, K)
        for e_vals in itertools.product(error_alphabet, repeat=entries):
            e = np.array(e_vals, dtype=complex).reshape(L, N, K)
            past[i] = z
            now[i] = r * z + e
            i += 1
    probs = np.full(total, 1.0 / total)
    return FiniteEnsemble(h_past=past, h_now=now, probabilities=probs)
