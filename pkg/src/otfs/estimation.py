"""Embedded-pilot channel estimation in the DD domain.

A single pilot of configurable amplitude sits at (l_p, k_p), surrounded by
a zeroed guard rectangle of delay offsets -l_max..l_max and Doppler
offsets -2*k_max..2*k_max (wide enough that no data symbol can smear into
the pilot read region through any admissible path).  The receiver scans
the read region l_p..l_p+l_max x k_p-k_max..k_p+k_max, thresholds against
the noise floor, and divides out the pilot amplitude and the documented
coupling phase of the reduced-CP chain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, FrameParams, ShapeError
from .channel import ChannelRealization, EffectiveChannel, PathSpec, dd_coupling_coeff

PILOT, GUARD, DATA = 0, 1, 2


@dataclass(frozen=True)
class PilotConfig:
    pilot_pos: tuple[int, int] = (0, 0)
    pilot_amplitude: float = 10.0      # relative to unit data-symbol RMS
    l_max: int = 0
    k_max: int = 0
    threshold_factor: float = 3.0
    allow_wrap: bool = False

    def guard_extents(self):
        return self.l_max, 2 * self.k_max

    def validate(self, params: FrameParams) -> None:
        if not self.allow_wrap:
            if 2 * self.l_max >= params.m or 4 * self.k_max >= params.n:
                raise ConfigError(
                    "guard region wraps onto itself; shrink l_max/k_max or set allow_wrap"
                )


def region_mask(cfg: PilotConfig, params: FrameParams) -> np.ndarray:
    """M x N map of bin roles: PILOT(0), GUARD(1), DATA(2)."""
    cfg.validate(params)
    m, n = params.m, params.n
    l_p, k_p = cfg.pilot_pos
    gl, gk = cfg.guard_extents()
    mask = np.full((m, n), DATA, dtype=np.int8)
    dl = np.arange(-gl, gl + 1)
    dk = np.arange(-gk, gk + 1)
    rows = (l_p + dl) % m
    cols = (k_p + dk) % n
    mask[np.ix_(rows, cols)] = GUARD
    mask[l_p % m, k_p % n] = PILOT
    return mask


def embed_pilot(x_dd: np.ndarray, cfg: PilotConfig, params: FrameParams):
    """Place the pilot and zero the guard; returns (frame, mask)."""
    x = np.asarray(x_dd, dtype=np.complex128)
    if x.shape != (params.m, params.n):
        raise ShapeError(f"frame must be {params.m}x{params.n}")
    mask = region_mask(cfg, params)
    out = x.copy()
    out[mask == GUARD] = 0.0
    out[mask == PILOT] = cfg.pilot_amplitude
    return out, mask


def estimate_channel(
    y_dd: np.ndarray,
    cfg: PilotConfig,
    params: FrameParams,
    noise_var: float | None,
) -> ChannelRealization | None:
    """Threshold-scan the pilot read region for integer (delay, Doppler) paths.

    Returns None when no bin clears threshold_factor * sqrt(noise_var).
    An unknown noise variance (None) is estimated from the guard bins
    outside the read region, with a reduced-reliability warning; a small
    absolute floor keeps numerical dust out of the noiseless case.
    """
    y = np.asarray(y_dd, dtype=np.complex128)
    if y.shape != (params.m, params.n):
        raise ShapeError(f"received grid must be {params.m}x{params.n}")
    l_p, k_p = cfg.pilot_pos
    if noise_var is None:
        noise_var = _noise_from_guard(y, cfg, params)
        warnings.warn("noise variance estimated from guard bins; reduced reliability")
    thresh = max(
        cfg.threshold_factor * np.sqrt(max(noise_var, 0.0)),
        1e-9 * cfg.pilot_amplitude,
    )
    paths = []
    for dl in range(cfg.l_max + 1):
        for dk in range(-cfg.k_max, cfg.k_max + 1):
            row = (l_p + dl) % params.m
            col = (k_p + dk) % params.n
            val = y[row, col]
            if np.abs(val) > thresh:
                coeff = dd_coupling_coeff(row, col, dl, dk, params.m, params.n)
                gain = val / (cfg.pilot_amplitude * coeff)
                paths.append(PathSpec(complex(gain), dl, float(dk)))
    if not paths:
        return None
    return ChannelRealization(tuple(paths))


def _noise_from_guard(y: np.ndarray, cfg: PilotConfig, params: FrameParams) -> float:
    """Mean |Y|^2 over guard bins that no admissible path can reach."""
    mask = region_mask(cfg, params)
    l_p, k_p = cfg.pilot_pos
    reach = np.zeros_like(mask, dtype=bool)
    for dl in range(cfg.l_max + 1):
        for dk in range(-cfg.k_max, cfg.k_max + 1):
            reach[(l_p + dl) % params.m, (k_p + dk) % params.n] = True
    quiet = (mask == GUARD) & ~reach
    if not np.any(quiet):
        return float(np.mean(np.abs(y) ** 2))
    return float(np.mean(np.abs(y[quiet]) ** 2))


def nmse(true_h: EffectiveChannel, est_h: EffectiveChannel | None) -> float:
    """||H_est - H_true||_F^2 / ||H_true||_F^2 (est_h None counts as zero)."""
    denom = float(np.sum(np.abs(true_h.h) ** 2))
    if denom == 0.0:
        raise ValueError("NMSE undefined for a zero reference channel")
    if est_h is None:
        return 1.0
    if est_h.h.shape != true_h.h.shape:
        raise ShapeError("effective channels differ in shape")
    return float(np.sum(np.abs(est_h.h - true_h.h) ** 2) / denom)
