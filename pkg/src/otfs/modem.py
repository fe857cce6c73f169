"""OTFS modulation and demodulation.

Two equivalent implementations are provided: the SFFT route (ISFFT, then a
per-slot inverse DFT acting as the rectangular-pulse Heisenberg transform)
and the direct DZT route (point-wise DD-domain pulse product, then IDZT).
With rectangular window and the one-slot rectangular pulse the two routes
produce identical samples.

CP handling:

* reduced  -- one CP of cp_len samples at the head of the frame; after CP
  removal a channel with max delay <= cp_len acts as an MN-point circular
  operator on the payload.
* full     -- a CP per slot, as in classical OFDM; ISI-free per slot after
  CP removal for delay spreads <= cp_len.
* zp       -- the last cp_len samples of each slot are forced to zero; no
  extra samples are transmitted and the energy loss is accepted.

Doppler phase reference: sample index 0 of the *payload* carries phase 0;
CP samples sit at negative indices.  ``TimeDomainFrame.payload_start``
records where the payload begins inside ``samples``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal.windows import chebwin

from .core import ConfigError, CPScheme, FrameParams, ShapeError
from .transforms import dzt, idzt, isfft, sfft


@dataclass(frozen=True)
class WindowSpec:
    """TF-domain window: N x M real multipliers applied at Tx, Rx, or both."""

    kind: str = "rectangular"          # "rectangular" | "chebyshev"
    sidelobe_db: float = 60.0
    applied_at: str = "tx"             # "tx" | "rx" | "both"

    def __post_init__(self):
        if self.kind not in ("rectangular", "chebyshev"):
            raise ConfigError(f"unknown window kind {self.kind!r}")
        if self.applied_at not in ("tx", "rx", "both"):
            raise ConfigError(f"window applied_at must be tx/rx/both, got {self.applied_at!r}")

    @property
    def at_tx(self) -> bool:
        return self.applied_at in ("tx", "both")

    @property
    def at_rx(self) -> bool:
        return self.applied_at in ("rx", "both")


RECTANGULAR = WindowSpec()


def tf_window(spec: WindowSpec, params: FrameParams) -> np.ndarray:
    """N x M window matrix, normalized so ||W||_F^2 = N*M (energy neutral)."""
    if spec.kind == "rectangular":
        return np.ones((params.n, params.m))
    w_t = chebwin(params.n, at=spec.sidelobe_db)
    w_f = chebwin(params.m, at=spec.sidelobe_db)
    w = np.outer(w_t, w_f)
    return w * np.sqrt(params.grid_size / np.sum(w**2))


@dataclass(frozen=True)
class TimeDomainFrame:
    """Transmit/receive sample block plus enough layout info to undo the CP."""

    samples: np.ndarray
    params: FrameParams
    isi_flag: bool = False   # set by the channel when delays exceed the CP

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128))
        expected = expected_frame_length(self.params)
        if self.samples.size != expected:
            raise ShapeError(
                f"frame has {self.samples.size} samples, expected {expected} "
                f"for scheme {self.params.cp_scheme.value}"
            )

    @property
    def payload_start(self) -> int:
        return self.params.cp_len if self.params.cp_scheme != CPScheme.ZERO_PAD else 0


def expected_frame_length(params: FrameParams) -> int:
    mn = params.grid_size
    if params.cp_scheme == CPScheme.REDUCED:
        return mn + params.cp_len
    if params.cp_scheme == CPScheme.FULL:
        return mn + params.n * params.cp_len
    return mn  # zero padding adds nothing


def add_cp(payload: np.ndarray, params: FrameParams) -> TimeDomainFrame:
    """Insert the CP (or apply the zero-pad guard) to MN payload samples."""
    payload = np.asarray(payload, dtype=np.complex128).ravel()
    if payload.size != params.grid_size:
        raise ShapeError(f"payload must have {params.grid_size} samples")
    cp = params.cp_len
    if params.cp_scheme == CPScheme.REDUCED:
        samples = np.concatenate([payload[payload.size - cp:], payload])
    elif params.cp_scheme == CPScheme.FULL:
        slots = payload.reshape(params.n, params.m)
        samples = np.concatenate([
            np.concatenate([slot[params.m - cp:], slot]) for slot in slots
        ])
    else:  # zero padding: zero the tail of each slot in place
        slots = payload.reshape(params.n, params.m).copy()
        if cp:
            slots[:, params.m - cp:] = 0.0
        samples = slots.ravel()
    return TimeDomainFrame(samples, params)


def remove_cp(frame: TimeDomainFrame) -> np.ndarray:
    """Strip CP samples, returning the MN payload."""
    params = frame.params
    cp = params.cp_len
    if params.cp_scheme == CPScheme.REDUCED:
        return frame.samples[cp:]
    if params.cp_scheme == CPScheme.FULL:
        blocks = frame.samples.reshape(params.n, params.m + cp)
        return blocks[:, cp:].ravel()
    return frame.samples.copy()


# ---------------------------------------------------------------------------
#  TF-domain route (ISFFT + per-slot IDFT)
# ---------------------------------------------------------------------------

def tf_to_time(x_tf: np.ndarray) -> np.ndarray:
    """Per-slot unitary inverse DFT (rectangular transmit pulse over a slot)."""
    x_tf = np.asarray(x_tf, dtype=np.complex128)
    m = x_tf.shape[1]
    slots = np.fft.ifft(x_tf, axis=1) * np.sqrt(m)
    return slots.ravel()


def time_to_tf(payload: np.ndarray, params: FrameParams) -> np.ndarray:
    """Per-slot unitary DFT of the MN payload samples; returns N x M."""
    payload = np.asarray(payload, dtype=np.complex128).ravel()
    if payload.size != params.grid_size:
        raise ShapeError(f"payload must have {params.grid_size} samples")
    slots = payload.reshape(params.n, params.m)
    return np.fft.fft(slots, axis=1) / np.sqrt(params.m)


def modulate_sfft(x_dd: np.ndarray, window: WindowSpec, params: FrameParams) -> TimeDomainFrame:
    """ISFFT, optional Tx window, per-slot IDFT, then CP insertion."""
    x_dd = _check_dd(x_dd, params)
    x_tf = isfft(x_dd)
    if window.at_tx:
        x_tf = x_tf * tf_window(window, params)
    return add_cp(tf_to_time(x_tf), params)


def demodulate_sfft(frame: TimeDomainFrame, window: WindowSpec, params: FrameParams) -> np.ndarray:
    """CP removal, per-slot DFT, optional Rx window, SFFT."""
    y_tf = time_to_tf(remove_cp(frame), params)
    if window.at_rx:
        y_tf = y_tf * tf_window(window, params)
    return sfft(y_tf)


# ---------------------------------------------------------------------------
#  DZT route (point-wise DD pulse product)
# ---------------------------------------------------------------------------

def _pulse_taps(pulse) -> np.ndarray:
    return np.asarray(getattr(pulse, "taps", pulse), dtype=np.complex128).ravel()


def pulse_dd_gain(pulse, params: FrameParams) -> np.ndarray:
    """DD-domain pulse profile, scaled to unit RMS so power is unchanged."""
    taps = _pulse_taps(pulse)
    if taps.size != params.grid_size:
        raise ShapeError(f"pulse must have {params.grid_size} taps")
    dz = dzt(taps, params.m, params.n)
    norm = np.linalg.norm(dz)
    if norm == 0:
        raise ConfigError("pulse has zero energy")
    return dz * (np.sqrt(params.grid_size) / norm)


def modulate_dzt(
    x_dd: np.ndarray,
    pulse,
    params: FrameParams,
    require_invertible: bool = False,
) -> TimeDomainFrame:
    """Point-wise DD pulse product followed by the inverse DZT, then CP."""
    x_dd = _check_dd(x_dd, params)
    gain = pulse_dd_gain(pulse, params)
    if require_invertible and np.min(np.abs(gain)) < 1e-12:
        raise ConfigError("pulse DZT has zero entries; receiver-side inversion impossible")
    return add_cp(idzt(x_dd * gain), params)


def demodulate_dzt(frame: TimeDomainFrame, pulse, params: FrameParams) -> np.ndarray:
    """DZT of the payload, matched-filtered by the conjugate pulse profile."""
    y = dzt(remove_cp(frame), params.m, params.n)
    return y * np.conj(pulse_dd_gain(pulse, params))


def demodulate(
    frame: TimeDomainFrame,
    mode: str,
    window: WindowSpec = RECTANGULAR,
    pulse=None,
    params: FrameParams | None = None,
) -> np.ndarray:
    """Dispatch to the SFFT or DZT receive chain; returns the M x N Y_DD grid."""
    params = params or frame.params
    if mode == "sfft":
        return demodulate_sfft(frame, window, params)
    if mode == "dzt":
        if pulse is None:
            raise ConfigError("dzt demodulation needs the receive pulse")
        return demodulate_dzt(frame, pulse, params)
    raise ConfigError(f"unknown demodulation mode {mode!r}")


def _check_dd(x_dd: np.ndarray, params: FrameParams) -> np.ndarray:
    x = np.asarray(x_dd, dtype=np.complex128)
    if x.shape != (params.m, params.n):
        raise ShapeError(f"DD frame must be {params.m}x{params.n}, got {x.shape}")
    return x
