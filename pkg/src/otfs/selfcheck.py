"""Built-in invariant suite behind ``otfs selftest``.

Each check returns (name, passed, detail).  The battery covers transform
unitarity and round trips, Parseval, the SFFT/DZT route equivalence,
full-CP ISI freedom, bi-orthogonality of the one-slot rectangular pulse,
matrix-vs-functional channel equivalence, and uncoded BPSK over AWGN
against the closed-form Q-function baseline.
"""

from __future__ import annotations

import math

import numpy as np

from .core import CPScheme, FrameParams, RngStream, bpsk, complex_gaussian, map_bits, vec
from .channel import (
    ChannelRealization,
    PathSpec,
    PowerDelayProfile,
    apply_td,
    build_effective_dd,
    identity_channel,
    sample_channel,
)
from .detection import detect_mmse
from .harness import wilson_halfwidth
from .modem import (
    RECTANGULAR,
    add_cp,
    demodulate_dzt,
    demodulate_sfft,
    modulate_dzt,
    modulate_sfft,
    remove_cp,
    time_to_tf,
)
from .pulse import is_ideal_pulse, rectangular_pulse
from .transforms import dzt, idzt, isfft, sfft, td_to_dd_matrix


def q_function(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _check_transform_suite(rng) -> tuple[bool, str]:
    worst = 0.0
    for m, n in [(4, 4), (8, 3), (3, 8), (16, 16)]:
        s = complex_gaussian(rng, m * n)
        dz = dzt(s, m, n)
        worst = max(worst, abs(np.linalg.norm(dz) - np.linalg.norm(s)))
        worst = max(worst, np.max(np.abs(idzt(dz) - s)))
        grid = complex_gaussian(rng, (n, m))
        worst = max(worst, np.max(np.abs(isfft(sfft(grid)) - grid)))
    return worst < 1e-10, f"max deviation {worst:.2e}"


def _check_dzt_sfft_equivalence(rng) -> tuple[bool, str]:
    # per-slot DFT followed by SFFT must equal the direct DZT
    worst = 0.0
    for m, n in [(4, 4), (8, 8), (8, 4)]:
        params = FrameParams(m, n)
        s = complex_gaussian(rng, m * n)
        route_a = dzt(s, m, n)
        route_b = sfft(time_to_tf(s, params))
        worst = max(worst, np.max(np.abs(route_a - route_b)))
    return worst < 1e-10, f"max deviation {worst:.2e}"


def _check_matrix_form(rng) -> tuple[bool, str]:
    params = FrameParams(8, 8)
    u = td_to_dd_matrix(params)
    gram_err = np.max(np.abs(u @ u.conj().T - np.eye(64)))
    s = complex_gaussian(rng, 64)
    path_err = np.max(np.abs(u @ s - vec(dzt(s, 8, 8))))
    worst = max(gram_err, path_err)
    return worst < 1e-9, f"max deviation {worst:.2e}"


def _check_roundtrip_identity(rng) -> tuple[bool, str]:
    worst = 0.0
    for m, n in [(8, 4), (16, 8)]:
        params = FrameParams(m, n, cp_len=3)
        x = complex_gaussian(rng, (m, n))
        frame = modulate_sfft(x, RECTANGULAR, params)
        worst = max(worst, np.max(np.abs(demodulate_sfft(frame, RECTANGULAR, params) - x)))
        pulse = rectangular_pulse(params)
        frame = modulate_dzt(x, pulse, params)
        worst = max(worst, np.max(np.abs(demodulate_dzt(frame, pulse, params) - x)))
    return worst < 1e-9, f"max deviation {worst:.2e}"


def _check_full_cp_isi_freedom(rng) -> tuple[bool, str]:
    m, n, cp = 8, 4, 3
    params = FrameParams(m, n, cp_scheme=CPScheme.FULL, cp_len=cp)
    taps = complex_gaussian(rng, 3) / np.sqrt(3)
    ch = ChannelRealization(tuple(
        PathSpec(complex(taps[i]), i, 0.0) for i in range(3)
    ))
    payload = complex_gaussian(rng, m * n)
    rx = apply_td(ch, add_cp(payload, params), params)
    got = remove_cp(rx).reshape(n, m)
    worst = 0.0
    for slot in range(n):
        circ = np.zeros(m, dtype=np.complex128)
        for i, p in enumerate(ch.paths):
            circ += p.gain * np.roll(payload.reshape(n, m)[slot], p.delay)
        worst = max(worst, np.max(np.abs(got[slot] - circ)))
    return worst < 1e-10, f"max deviation {worst:.2e}"


def _check_ideal_pulse(_rng) -> tuple[bool, str]:
    params = FrameParams(8, 4)
    pulse = rectangular_pulse(params)
    report = is_ideal_pulse(pulse, pulse, params, tol=1e-9)
    return report.is_ideal, f"worst violation {report.worst_violation:.2e}"


def _check_effective_equivalence(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(3, 9))
        n = int(rng.integers(2, 9))
        pdp = PowerDelayProfile(
            l_max=min(m - 1, 3), k_max=min(n // 2, 2),
            n_paths=int(rng.integers(1, min(m - 1, 3) + 2)),
        )
        params = FrameParams(m, n, cp_len=pdp.l_max)
        ch = sample_channel(pdp, rng)
        x = complex_gaussian(rng, (m, n))
        pulse = rectangular_pulse(params)
        rx = apply_td(ch, modulate_dzt(x, pulse, params), params)
        functional = vec(demodulate_dzt(rx, pulse, params))
        matrix = build_effective_dd(ch, params).h @ vec(x)
        worst = max(worst, np.max(np.abs(functional - matrix)))
    return worst < 1e-8, f"max deviation {worst:.2e}"


def _check_awgn_bpsk(rng) -> tuple[bool, str]:
    params = FrameParams(16, 8)
    c = bpsk()
    ch = identity_channel()
    h = build_effective_dd(ch, params)
    details = []
    ok = True
    for snr_db in (0.0, 4.0, 8.0):
        noise_var = 10.0 ** (-snr_db / 10.0)
        errors = 0
        bits = 0
        for _ in range(100):
            b = rng.integers(0, 2, params.grid_size)
            x = map_bits(b, c)
            y = x + complex_gaussian(rng, x.shape, noise_var)
            out = detect_mmse(y, h, noise_var, c)
            errors += int(np.sum(out.hard != b))
            bits += b.size
        ber = errors / bits
        target = q_function(math.sqrt(2.0 * 10.0 ** (snr_db / 10.0)))
        halfwidth = wilson_halfwidth(errors, bits)
        ok = ok and abs(ber - target) <= 3.0 * max(halfwidth, 1e-6)
        details.append(f"{snr_db:g}dB ber={ber:.4g} vs Q={target:.4g}")
    return ok, "; ".join(details)


CHECKS = [
    ("transform-unitarity-roundtrip", _check_transform_suite),
    ("dzt-sfft-route-equivalence", _check_dzt_sfft_equivalence),
    ("td-to-dd-matrix", _check_matrix_form),
    ("modem-identity-roundtrip", _check_roundtrip_identity),
    ("full-cp-isi-freedom", _check_full_cp_isi_freedom),
    ("ideal-pulse-one-slot-rect", _check_ideal_pulse),
    ("effective-channel-equivalence", _check_effective_equivalence),
    ("awgn-bpsk-vs-qfunction", _check_awgn_bpsk),
]


def selftest(seed: int = 2024) -> list[tuple[str, bool, str]]:
    results = []
    for check_idx, (name, fn) in enumerate(CHECKS):
        rng = RngStream(seed).generator(check_idx)
        try:
            passed, detail = fn(rng)
        except Exception as exc:  # a crash is a failure, not an abort
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(passed), detail))
    return results


def format_results(results) -> str:
    lines = []
    for name, passed, detail in results:
        lines.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    failed = sum(1 for _, ok, _ in results if not ok)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
