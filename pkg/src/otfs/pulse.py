"""Pulse-shaping analysis: ambiguity functions, bi-orthogonality tests, and
the pulse-shaped DD channel product.

Pulses are stored as MN samples of g(t) on the frame grid t = q * T/M,
with MN-periodic extension implied, normalized to ||taps||_2 = sqrt(MN)
(unit RMS).  No optimizer lives here: candidate pulses are scored with
:func:`pulse_sparsity_metric` and compared by hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, FrameParams, ShapeError
from .channel import ChannelRealization, dd_channel_response
from .transforms import dzt


@dataclass(frozen=True)
class SampledPulse:
    """MN pulse samples at rate M/T, unit-RMS normalized at construction."""

    taps: np.ndarray
    sample_rate: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128).ravel()
        norm = np.linalg.norm(taps)
        if norm == 0:
            raise ConfigError("pulse has zero energy")
        object.__setattr__(self, "taps", taps * (np.sqrt(taps.size) / norm))

    @property
    def n_samples(self) -> int:
        return self.taps.size

    def dd_profile(self, params: FrameParams) -> np.ndarray:
        if self.n_samples != params.grid_size:
            raise ShapeError("pulse length does not match the frame grid")
        return dzt(self.taps, params.m, params.n)


def rectangular_pulse(params: FrameParams) -> SampledPulse:
    """One-slot rectangular pulse; its DD profile is exactly constant."""
    taps = np.zeros(params.grid_size, dtype=np.complex128)
    taps[: params.m] = 1.0
    return SampledPulse(taps, params.m / params.slot_duration)


def load_pulse_taps(path, params: FrameParams) -> SampledPulse:
    """Read taps from a text file: one sample per line, 're' or 're,im'."""
    taps = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p for p in line.replace(",", " ").split() if p]
            if len(parts) == 1:
                taps.append(complex(float(parts[0]), 0.0))
            elif len(parts) == 2:
                taps.append(complex(float(parts[0]), float(parts[1])))
            else:
                raise ShapeError(f"bad pulse tap line: {line!r}")
    if len(taps) != params.grid_size:
        raise ShapeError(f"expected {params.grid_size} taps, file holds {len(taps)}")
    return SampledPulse(np.array(taps), params.m / params.slot_duration)


# ---------------------------------------------------------------------------
#  Ambiguity function
# ---------------------------------------------------------------------------

def cross_ambiguity(
    x: np.ndarray,
    y: np.ndarray,
    tau_grid: np.ndarray,
    nu_grid: np.ndarray,
    sample_rate: float,
) -> np.ndarray:
    """Discrete delay-Doppler correlation of two equal-length signals.

    Riemann-sum approximation of A(tau, nu) = integral of
    x(t) y*(t - tau) e^{-j 2 pi nu (t - tau)} dt at the given sample rate.
    Delays must land on the sample grid; A[i, j] corresponds to
    (tau_grid[i], nu_grid[j]).  A(0, 0) equals energy(x) * dt.
    """
    x = np.asarray(x, dtype=np.complex128).ravel()
    y = np.asarray(y, dtype=np.complex128).ravel()
    if x.size != y.size:
        raise ShapeError("signals must have equal length")
    dt = 1.0 / sample_rate
    tau_grid = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    nu_grid = np.atleast_1d(np.asarray(nu_grid, dtype=float))
    shifts = tau_grid / dt
    if np.max(np.abs(shifts - np.round(shifts))) > 1e-6:
        raise ValueError("tau values must be integer multiples of the sample period")
    shifts = np.round(shifts).astype(int)
    if np.max(np.abs(shifts)) >= x.size:
        raise ValueError("tau outside the sampled support")
    n = np.arange(x.size)
    out = np.empty((tau_grid.size, nu_grid.size), dtype=np.complex128)
    for i, d in enumerate(shifts):
        if d >= 0:
            prod = x[d:] * np.conj(y[: x.size - d])
            t_rel = n[d:] - d
        else:
            prod = x[: x.size + d] * np.conj(y[-d:])
            t_rel = n[: x.size + d] - d
        out[i] = dt * (prod[None, :] * np.exp(-2j * np.pi * np.outer(nu_grid, t_rel * dt))).sum(axis=1)
    return out


@dataclass(frozen=True)
class PulseIdealityReport:
    is_ideal: bool
    worst_violation: float
    worst_point: tuple[int, int]   # (n, m) grid offsets of the worst bin


def is_ideal_pulse(
    gtx: SampledPulse,
    grx: SampledPulse,
    params: FrameParams,
    tol: float = 1e-6,
) -> PulseIdealityReport:
    """Check the TF-grid bi-orthogonality A(nT, m/T) = delta[n] delta[m].

    Both pulses are rescaled to unit continuous energy, so an ideal pair
    satisfies A(0,0) = 1 exactly; the report carries the worst deviation
    over n in -(N-1)..N-1, m in -(M-1)..M-1.
    """
    if gtx.n_samples != params.grid_size or grx.n_samples != params.grid_size:
        raise ShapeError("pulses must be sampled on the frame grid")
    rate = params.m / params.slot_duration
    dt = 1.0 / rate
    x = gtx.taps / np.sqrt(np.sum(np.abs(gtx.taps) ** 2) * dt)
    y = grx.taps / np.sqrt(np.sum(np.abs(grx.taps) ** 2) * dt)
    n_off = np.arange(-(params.n - 1), params.n)
    m_off = np.arange(-(params.m - 1), params.m)
    amb = cross_ambiguity(
        x, y, n_off * params.slot_duration, m_off / params.slot_duration, rate
    )
    target = np.zeros_like(amb)
    target[params.n - 1, params.m - 1] = 1.0
    err = np.abs(amb - target)
    worst = np.unravel_index(np.argmax(err), err.shape)
    return PulseIdealityReport(
        is_ideal=bool(err[worst] <= tol),
        worst_violation=float(err[worst]),
        worst_point=(int(n_off[worst[0]]), int(m_off[worst[1]])),
    )


# ---------------------------------------------------------------------------
#  Pulse-shaped DD channel
# ---------------------------------------------------------------------------

def effective_dd_gain(
    g: SampledPulse, ch: ChannelRealization, params: FrameParams
) -> np.ndarray:
    """Point-wise pulse-shaped DD channel |DZ_g|^2 * h_DD on the M x N grid."""
    dz = g.dd_profile(params)
    return (np.abs(dz) ** 2) * dd_channel_response(ch, params)


def pulse_sparsity_metric(effective: np.ndarray, threshold: float = 1e-3) -> dict:
    """Count bins above threshold*max and the energy left outside them."""
    e = np.abs(np.asarray(effective))
    peak = e.max() if e.size else 0.0
    if peak == 0.0:
        return {"occupied_bins": 0, "leakage_energy": 0.0}
    mask = e > threshold * peak
    leakage = float(np.sum(e[~mask] ** 2))
    return {"occupied_bins": int(mask.sum()), "leakage_energy": leakage}
