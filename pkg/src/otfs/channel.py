"""Doubly-dispersive channel generation, application, and effective matrices.

Phase convention (the single source of truth for every builder below): a
path with gain h, delay index l_i and Doppler index k_i acts on the
transmitted stream as

    r[n] = sum_i h_i * exp(j 2 pi k_i (n - l_i) / (MN)) * s[n - l_i]

with n counted from the first *payload* sample (CP samples sit at negative
n) and s taken as zero before the transmission starts.  With the reduced
CP this makes the post-CP-removal frame map

    H_T = sum_i h_i * D_i * P^{l_i},      (P = MN-point cyclic shift,
    D_i = diag(exp(j 2 pi k_i (n - l_i) / MN)))

exact for integer and fractional Doppler alike.  In the DD domain the
integer-Doppler map has exactly P entries per row,

    Y[l,k] = sum_i h_i * c_i(l,k) * X[[l-l_i]_M, [k-k_i]_N],

where the unimodular factor c_i is given by :func:`dd_coupling_coeff`.
Relative to the ideal-pulse input-output relation this carries a
documented residual phase exp(j 2 pi k_i (l - l_i) / MN) plus a Doppler
wrap factor on delay-wrapped rows; the channel estimator divides it out.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    CPScheme,
    FrameParams,
    ResourceLimitError,
    ShapeError,
)
from .modem import TimeDomainFrame
from .transforms import DENSE_MATRIX_CAP, td_to_dd_matrix, unitary_dft_matrix


@dataclass(frozen=True)
class PathSpec:
    gain: complex
    delay: int          # delay index l_i, samples
    doppler: float      # Doppler index k_i; integer unless fractional mode

    @property
    def is_integer_doppler(self) -> bool:
        return float(self.doppler) == int(round(self.doppler))


@dataclass(frozen=True)
class ChannelRealization:
    """P resolvable paths; average energy sums to 1 under the sampling PDP."""

    paths: tuple[PathSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        for p in self.paths:
            if p.delay < 0:
                raise ConfigError("delay indices must be non-negative")

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def max_delay(self) -> int:
        return max((p.delay for p in self.paths), default=0)

    @property
    def is_integer(self) -> bool:
        return all(p.is_integer_doppler for p in self.paths)

    def delays_seconds(self, params: FrameParams) -> np.ndarray:
        return np.array([p.delay for p in self.paths]) / (params.m * params.delta_f)

    def dopplers_hz(self, params: FrameParams) -> np.ndarray:
        return np.array([p.doppler for p in self.paths]) / (params.n * params.slot_duration)


def identity_channel() -> ChannelRealization:
    return ChannelRealization((PathSpec(1.0 + 0j, 0, 0),))


@dataclass(frozen=True)
class PowerDelayProfile:
    """Average tap-power law over delays, plus the index ranges to draw from."""

    kind: str = "uniform"        # "uniform" | "exponential"
    exponent: float = 0.1
    l_max: int = 0
    k_max: int = 0
    n_paths: int = 1
    fractional_doppler: bool = False

    def __post_init__(self):
        if self.kind not in ("uniform", "exponential"):
            raise ConfigError(f"unknown PDP kind {self.kind!r}")
        if self.n_paths > self.l_max + 1:
            raise ConfigError(
                f"cannot place {self.n_paths} distinct delays in 0..{self.l_max}"
            )

    def tap_powers(self, delays: np.ndarray) -> np.ndarray:
        """Normalized average powers for the given delay indices (sum = 1)."""
        if self.kind == "uniform":
            w = np.ones(len(delays))
        else:
            w = np.exp(-self.exponent * np.asarray(delays, dtype=float))
        return w / w.sum()


def sample_channel(pdp: PowerDelayProfile, rng: np.random.Generator) -> ChannelRealization:
    """Draw one Rayleigh-fading realization under the profile.

    Delays are distinct, uniform over {0..l_max} with tap 0 always present;
    Doppler indices are uniform over the symmetric integer set (or the
    continuous interval in fractional mode); gains are CN(0, tap power).
    """
    p = pdp.n_paths
    if p > 1:
        others = rng.choice(np.arange(1, pdp.l_max + 1), size=p - 1, replace=False)
        delays = np.sort(np.concatenate([[0], others]))
    else:
        delays = np.array([0])
    powers = pdp.tap_powers(delays)
    gains = np.sqrt(powers / 2.0) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))
    if pdp.fractional_doppler:
        dopplers = rng.uniform(-pdp.k_max, pdp.k_max, size=p)
    else:
        dopplers = rng.integers(-pdp.k_max, pdp.k_max + 1, size=p).astype(float)
    return ChannelRealization(tuple(
        PathSpec(complex(gains[i]), int(delays[i]), float(dopplers[i])) for i in range(p)
    ))


# ---------------------------------------------------------------------------
#  Time-domain application
# ---------------------------------------------------------------------------

def apply_td(ch: ChannelRealization, frame: TimeDomainFrame, params: FrameParams) -> TimeDomainFrame:
    """Run the transmitted frame through the channel (linear, non-circular)."""
    s = frame.samples
    n_phys = np.arange(s.size, dtype=float) - frame.payload_start
    r = np.zeros_like(s)
    for p in ch.paths:
        phase = np.exp(2j * np.pi * p.doppler * (n_phys - p.delay) / params.grid_size)
        if p.delay == 0:
            r += p.gain * phase * s
        elif p.delay < s.size:
            r[p.delay:] += p.gain * phase[p.delay:] * s[: s.size - p.delay]
    isi = _delay_exceeds_guard(ch, params)
    return TimeDomainFrame(r, params, isi_flag=isi or frame.isi_flag)


def _delay_exceeds_guard(ch: ChannelRealization, params: FrameParams) -> bool:
    if params.cp_scheme in (CPScheme.REDUCED, CPScheme.FULL, CPScheme.ZERO_PAD):
        return ch.max_delay > params.cp_len
    return False


def build_td_matrix(ch: ChannelRealization, params: FrameParams) -> np.ndarray:
    """MN x MN post-CP-removal frame map H_T for the reduced-CP scheme."""
    mn = params.grid_size
    h = np.zeros((mn, mn), dtype=np.complex128)
    rows = np.arange(mn)
    for p in ch.paths:
        cols = (rows - p.delay) % mn
        coeff = p.gain * np.exp(2j * np.pi * p.doppler * (rows - p.delay) / mn)
        h[rows, cols] += coeff
    return h


# ---------------------------------------------------------------------------
#  Effective matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveChannel:
    """Dense MN x MN input-output map in a tagged domain/scheme."""

    h: np.ndarray
    domain: str          # "dd" | "tf" | "td"
    scheme: str          # "otfs-rcp" | "ofdm-cp" | "ofdm-nocp"
    params: FrameParams

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        object.__setattr__(self, "h", h)
        mn = self.params.grid_size
        if h.shape != (mn, mn):
            raise ShapeError(f"effective channel must be {mn}x{mn}, got {h.shape}")


def dd_coupling_coeff(l_out: int, k_out, l_i: int, k_i, m: int, n: int):
    """Unimodular DD coupling factor of the reduced-CP chain.

    Multiply by the path gain to obtain the H_DD entry coupling output bin
    (l_out, k_out) to input bin ([l_out-l_i]_M, [k_out-k_i]_N).  Works on
    scalars or broadcast arrays.
    """
    mn = m * n
    phase = np.exp(2j * np.pi * k_i * (np.asarray(l_out) - l_i) / mn)
    wrap = np.where(
        np.asarray(l_out) < l_i,
        np.exp(-2j * np.pi * (np.asarray(k_out) - k_i) / n),
        1.0,
    )
    return phase * wrap


def build_effective_dd(
    ch: ChannelRealization,
    params: FrameParams,
    cap: int = DENSE_MATRIX_CAP,
) -> EffectiveChannel:
    """DD-domain effective matrix H_DD = U H_T U^H for the reduced-CP chain.

    Integer-Doppler channels use the closed-form P-sparse construction
    (each row holds exactly P entries); fractional channels fall back to
    the dense unitary similarity, gated by ``cap``.
    """
    m, n, mn = params.m, params.n, params.grid_size
    if mn > cap:
        raise ResourceLimitError(f"MN={mn} exceeds dense matrix cap {cap}")
    if ch.is_integer:
        h = np.zeros((mn, mn), dtype=np.complex128)
        ll, kk = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        rows = (ll + kk * m).ravel()
        for p in ch.paths:
            ki = int(round(p.doppler))
            cols = ((ll - p.delay) % m + ((kk - ki) % n) * m).ravel()
            coeff = (p.gain * dd_coupling_coeff(ll, kk, p.delay, ki, m, n)).ravel()
            h[rows, cols] += coeff
        return EffectiveChannel(h, "dd", "otfs-rcp", params)
    u = td_to_dd_matrix(params, cap=cap)
    h = u @ build_td_matrix(ch, params) @ u.conj().T
    return EffectiveChannel(h, "dd", "otfs-rcp", params)


def build_effective_td(ch: ChannelRealization, params: FrameParams) -> EffectiveChannel:
    return EffectiveChannel(build_td_matrix(ch, params), "td", "otfs-rcp", params)


def build_effective_ofdm(
    ch: ChannelRealization,
    params: FrameParams,
    with_cp: bool,
    cap: int = DENSE_MATRIX_CAP,
) -> EffectiveChannel:
    """Frequency-domain MN x MN map for OFDM over the same physical channel.

    Vectorization: q = m + n*M (subcarrier m fast, symbol n slow).

    with_cp=True transmits N symbols of M subcarriers, each protected by a
    CP of cp_len samples (the caller sets cp_len = l_max); the channel runs
    over the full N*(M+cp_len) physical stream, so Doppler-induced ICI and
    inter-symbol phase drift are retained.  with_cp=False shares the OTFS
    frame circularization (one whole-frame guard, no per-symbol CP), which
    makes the map exactly unitarily similar to H_T.
    """
    m, n, mn = params.m, params.n, params.grid_size
    if mn > cap:
        raise ResourceLimitError(f"MN={mn} exceeds dense matrix cap {cap}")
    f_m = unitary_dft_matrix(m)
    per_symbol_dft = np.kron(np.eye(n), f_m)
    if not with_cp:
        h = per_symbol_dft @ build_td_matrix(ch, params) @ per_symbol_dft.conj().T
        return EffectiveChannel(h, "tf", "ofdm-nocp", params)

    cp = params.cp_len
    block = m + cp
    total = n * block
    # payload-time -> physical stream (CP insertion), as an index gather
    src = np.empty(total, dtype=np.int64)
    for sym in range(n):
        src[sym * block: sym * block + cp] = sym * m + np.arange(m - cp, m)
        src[sym * block + cp: (sym + 1) * block] = sym * m + np.arange(m)
    insert = np.zeros((total, mn))
    insert[np.arange(total), src] = 1.0
    # physical channel over the stream; phase 0 at the first payload sample
    n_phys = np.arange(total, dtype=float) - cp
    h_phys = np.zeros((total, total), dtype=np.complex128)
    rows = np.arange(total)
    for p in ch.paths:
        keep = rows >= p.delay
        coeff = p.gain * np.exp(2j * np.pi * p.doppler * (n_phys - p.delay) / mn)
        h_phys[rows[keep], rows[keep] - p.delay] += coeff[keep]
    # CP removal keeps the payload positions of each block
    keep_rows = np.concatenate([sym * block + cp + np.arange(m) for sym in range(n)])
    chain = h_phys[keep_rows] @ insert
    h = per_symbol_dft @ chain @ per_symbol_dft.conj().T
    return EffectiveChannel(h, "tf", "ofdm-cp", params)


def dd_channel_response(
    ch: ChannelRealization, params: FrameParams, fractional_kernel: bool = True
) -> np.ndarray:
    """Sample the DD channel response h_DD on the M x N grid.

    Integer paths land on single bins; fractional Doppler is spread along
    the Doppler axis with the N-point Dirichlet kernel (the leakage profile
    of a rectangular time window).  Fractional delays are not supported.
    """
    m, n = params.m, params.n
    h_dd = np.zeros((m, n), dtype=np.complex128)
    for p in ch.paths:
        if p.is_integer_doppler or not fractional_kernel:
            h_dd[p.delay % m, int(round(p.doppler)) % n] += p.gain
        else:
            k = np.arange(n)
            diff = p.doppler - k
            num = 1.0 - np.exp(2j * np.pi * diff)
            den = 1.0 - np.exp(2j * np.pi * diff / n)
            kernel = np.where(np.abs(den) < 1e-12, 1.0, num / (n * den))
            h_dd[p.delay % m, :] += p.gain * kernel
    return h_dd


# ---------------------------------------------------------------------------
#  Replayable text records
# ---------------------------------------------------------------------------

def realization_to_text(ch: ChannelRealization) -> str:
    """Serialize a realization as one 'delay doppler re im' line per path."""
    out = io.StringIO()
    out.write("# otfs channel v1: delay doppler gain_re gain_im\n")
    for p in ch.paths:
        out.write(f"{p.delay} {p.doppler!r} {p.gain.real!r} {p.gain.imag!r}\n")
    return out.getvalue()


def realization_from_text(text: str) -> ChannelRealization:
    paths = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ShapeError(f"bad channel record line: {line!r}")
        delay, doppler, re, im = parts
        paths.append(PathSpec(complex(float(re), float(im)), int(delay), float(doppler)))
    if not paths:
        raise ShapeError("channel record holds no paths")
    return ChannelRealization(tuple(paths))
