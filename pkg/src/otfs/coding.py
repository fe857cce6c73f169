"""Convolutional coding, pairwise-error/diversity analysis, and achievable rate.

The default code is the rate-1/2 memory-2 feedforward code with generators
(5, 7) octal and zero-tail termination; Viterbi decoding over LLR inputs
(positive LLR favors bit 0) is exact ML sequence decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ShapeError
from .channel import EffectiveChannel


@dataclass(frozen=True)
class ConvCode:
    """Rate-1/2 feedforward convolutional code, zero-tail terminated."""

    generators: tuple[int, int] = (0o5, 0o7)
    memory: int = 2

    def __post_init__(self):
        for g in self.generators:
            if g >= 1 << (self.memory + 1):
                raise ConfigError("generator taps exceed the constraint length")

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    def output_bits(self, state: int, bit: int) -> tuple[int, int]:
        reg = (bit << self.memory) | state
        return tuple(bin(reg & g).count("1") & 1 for g in self.generators)

    def next_state(self, state: int, bit: int) -> int:
        return ((bit << self.memory) | state) >> 1


DEFAULT_CODE = ConvCode()


def conv_encode(bits, code: ConvCode = DEFAULT_CODE) -> np.ndarray:
    """Encode with zero-tail termination: K bits -> 2*(K + memory) bits."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if np.any((bits != 0) & (bits != 1)):
        raise ShapeError("bits must be 0/1")
    out = np.empty(2 * (bits.size + code.memory), dtype=np.int64)
    state = 0
    pos = 0
    for b in np.concatenate([bits, np.zeros(code.memory, dtype=np.int64)]):
        o0, o1 = code.output_bits(state, int(b))
        out[pos], out[pos + 1] = o0, o1
        pos += 2
        state = code.next_state(state, int(b))
    return out


def viterbi_decode(llrs, code: ConvCode = DEFAULT_CODE) -> np.ndarray:
    """ML sequence decoding over per-bit LLRs (positive favors bit 0).

    Input length must be 2*(K + memory); the zero tail is stripped from
    the returned K bits.
    """
    llrs = np.asarray(llrs, dtype=float).ravel()
    if llrs.size % 2:
        raise ShapeError("LLR count must be even (two code bits per step)")
    steps = llrs.size // 2
    if steps <= code.memory:
        raise ShapeError("message too short for the zero tail")
    n_states = code.n_states
    # branch metric: sum over code bits of +llr/2 for bit 0, -llr/2 for bit 1
    metric = np.full(n_states, -np.inf)
    metric[0] = 0.0
    back = np.zeros((steps, n_states), dtype=np.int8)
    prev_state = np.zeros((steps, n_states), dtype=np.int64)
    for t in range(steps):
        l0, l1 = llrs[2 * t], llrs[2 * t + 1]
        new_metric = np.full(n_states, -np.inf)
        for s in range(n_states):
            if metric[s] == -np.inf:
                continue
            for b in (0, 1):
                o0, o1 = code.output_bits(s, b)
                gain = (l0 if o0 == 0 else -l0) / 2 + (l1 if o1 == 0 else -l1) / 2
                ns = code.next_state(s, b)
                cand = metric[s] + gain
                if cand > new_metric[ns]:
                    new_metric[ns] = cand
                    back[t, ns] = b
                    prev_state[t, ns] = s
        metric = new_metric
    state = 0  # zero-tail termination ends in state 0
    decoded = np.empty(steps, dtype=np.int64)
    for t in range(steps - 1, -1, -1):
        decoded[t] = back[t, state]
        state = prev_state[t, state]
    return decoded[: steps - code.memory]


# ---------------------------------------------------------------------------
#  Pairwise error probability and diversity
# ---------------------------------------------------------------------------

def pep_bound(d_e_sq: float, n_paths: int, es_over_n0: float) -> float:
    """High-SNR pairwise-error upper bound (d^2/P)^-P (Es/4N0)^-P.

    The SNR exponent P is the diversity gain; d^2/P is the coding gain.
    """
    if d_e_sq <= 0:
        raise ValueError("bound undefined for zero squared distance")
    if es_over_n0 <= 0 or n_paths <= 0:
        raise ValueError("path count and SNR must be positive")
    return (d_e_sq / n_paths) ** (-n_paths) * (es_over_n0 / 4.0) ** (-n_paths)


def diversity_slope(fer_points) -> float:
    """Least-squares diversity order from (snr_dB, FER) pairs.

    Fits log10(FER) against snr_dB/10 and returns the negated slope.
    Zero-FER points are dropped with a warning entry; fewer than 3 usable
    points is an error.
    """
    usable = [(s, f) for s, f in fer_points if f > 0]
    if len(usable) < 3:
        raise ValueError("need at least 3 points with FER > 0")
    x = np.array([s / 10.0 for s, _ in usable])
    y = np.log10([f for _, f in usable])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
#  Achievable rate
# ---------------------------------------------------------------------------

def rate_from_singular_values(sing: np.ndarray, snr: float, normalization: int) -> float:
    if snr < 0:
        raise ValueError("snr must be non-negative")
    terms = np.log2(1.0 + snr * np.asarray(sing) ** 2)
    if not np.all(np.isfinite(terms)):
        raise ValueError("non-finite log-det evaluation")
    return float(terms.sum() / normalization)


def achievable_rate(h, snr: float, normalization: int | None = None) -> float:
    """log-det rate of the effective channel, in bits per channel use.

    Evaluated through singular values for stability:
    sum log2(1 + snr * sigma_i^2) / normalization.  The normalization is
    the channel-use count: MN unless the caller accounts for CP overhead.
    """
    hm = h.h if isinstance(h, EffectiveChannel) else np.asarray(h, dtype=np.complex128)
    if hm.ndim != 2 or hm.shape[0] != hm.shape[1]:
        raise ShapeError("effective channel must be square")
    if normalization is None:
        normalization = hm.shape[0]
    sing = np.linalg.svd(hm, compute_uv=False)
    return rate_from_singular_values(sing, snr, normalization)
