import itertools

import numpy as np
import pytest

from otfs.core import FrameParams
from otfs.channel import (
    PowerDelayProfile,
    build_effective_dd,
    build_effective_td,
    identity_channel,
    sample_channel,
)
from otfs.coding import (
    ConvCode,
    achievable_rate,
    conv_encode,
    diversity_slope,
    pep_bound,
    viterbi_decode,
)


def bits_to_llrs(bits, confidence=8.0):
    return confidence * (1.0 - 2.0 * np.asarray(bits, dtype=float))


def brute_force_ml_codeword(llrs, code, k):
    """Oracle: enumerate every message, pick the ML codeword."""
    best, best_msg = -np.inf, None
    for msg in itertools.product((0, 1), repeat=k):
        cw = conv_encode(np.array(msg), code)
        metric = np.sum(np.where(cw == 0, llrs, -llrs) / 2)
        if metric > best:
            best, best_msg = metric, np.array(msg)
    return best_msg


def test_all_zero_message_gives_all_zero_codeword():
    assert np.all(conv_encode(np.zeros(16, dtype=int)) == 0)


def test_codeword_length():
    code = ConvCode()
    assert conv_encode(np.zeros(10, dtype=int), code).size == 2 * (10 + code.memory)


def test_noiseless_roundtrip_random_message():
    rng = np.random.default_rng(0)
    msg = rng.integers(0, 2, 64)
    decoded = viterbi_decode(bits_to_llrs(conv_encode(msg)))
    assert np.array_equal(decoded, msg)


def test_single_flipped_bit_corrected():
    rng = np.random.default_rng(1)
    for _ in range(20):
        msg = rng.integers(0, 2, 12)
        cw = conv_encode(msg)
        flipped = cw.copy()
        flipped[rng.integers(0, cw.size)] ^= 1
        decoded = viterbi_decode(bits_to_llrs(flipped))
        assert np.array_equal(decoded, msg)


def test_viterbi_is_ml_on_exhaustive_short_messages():
    # DERIVED oracle: brute-force ML codeword search
    rng = np.random.default_rng(2)
    code = ConvCode()
    k = 6
    for _ in range(25):
        llrs = rng.normal(0, 3, size=2 * (k + code.memory))
        assert np.array_equal(
            viterbi_decode(llrs, code), brute_force_ml_codeword(llrs, code, k)
        )


def test_viterbi_rejects_bad_lengths():
    with pytest.raises(Exception):
        viterbi_decode(np.zeros(7))
    with pytest.raises(Exception):
        viterbi_decode(np.zeros(4))  # no room for the zero tail


def test_pep_bound_unit_case():
    assert pep_bound(1.0, 1, 4.0) == 1.0


def test_pep_bound_slope_with_snr():
    # doubling Es/N0 with P=2 divides the bound by 4
    a = pep_bound(2.0, 2, 10.0)
    b = pep_bound(2.0, 2, 20.0)
    assert abs(a / b - 4.0) < 1e-12


def test_pep_bound_log_domain_cross_check():
    # DERIVED oracle: independent log-domain evaluation
    for p in (4, 8):
        got = pep_bound(3.0, p, 50.0)
        log_expect = -p * (np.log(3.0 / p) + np.log(50.0 / 4.0))
        assert abs(np.log(got) - log_expect) < 1e-9


def test_pep_bound_log_linearity_in_snr():
    snrs = np.array([10.0, 20.0, 40.0, 80.0, 160.0])
    for p in (1, 2, 4):
        logs = np.log([pep_bound(2.5, p, s) for s in snrs])
        slopes = np.diff(logs) / np.diff(np.log(snrs))
        assert np.max(np.abs(slopes + p)) < 1e-9


def test_pep_bound_rejects_zero_distance():
    with pytest.raises(ValueError):
        pep_bound(0.0, 2, 10.0)


def test_achievable_rate_identity():
    params = FrameParams(4, 4, cp_len=0)
    h = build_effective_dd(identity_channel(), params)
    for snr in (0.5, 1.0, 9.0):
        assert abs(achievable_rate(h, snr) - np.log2(1 + snr)) < 1e-9


def test_achievable_rate_zero_snr():
    params = FrameParams(4, 4, cp_len=0)
    h = build_effective_dd(identity_channel(), params)
    assert achievable_rate(h, 0.0) == 0.0


def test_achievable_rate_matches_direct_determinant():
    # DERIVED oracle: direct log-det evaluation on a small random system
    rng = np.random.default_rng(3)
    h = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    snr = 2.7
    direct = np.log2(
        np.abs(np.linalg.det(np.eye(8) + snr * h.conj().T @ h))
    ) / 8
    assert abs(achievable_rate(h, snr) - direct) < 1e-9


def test_rate_invariant_under_unitary_similarity():
    rng = np.random.default_rng(4)
    params = FrameParams(8, 4, cp_len=3)
    pdp = PowerDelayProfile(l_max=3, k_max=2, n_paths=3)
    for _ in range(10):
        ch = sample_channel(pdp, rng)
        h_dd = build_effective_dd(ch, params)
        h_td = build_effective_td(ch, params)
        for snr in (1.0, 31.6):
            r1 = achievable_rate(h_dd, snr)
            r2 = achievable_rate(h_td, snr)
            assert abs(r1 - r2) <= 1e-9 * max(r1, 1e-12)


def test_diversity_slope_exact_power_law():
    points = [(s, (10 ** (s / 10.0)) ** -2) for s in (10.0, 14.0, 18.0)]
    assert abs(diversity_slope(points) - 2.0) < 1e-6


def test_diversity_slope_flat():
    assert abs(diversity_slope([(0, 0.1), (10, 0.1), (20, 0.1)])) < 1e-12


def test_diversity_slope_from_pep_bound():
    # DERIVED: the bound generates the points; slope must equal P
    points = [(s, pep_bound(2.0, 4, 10 ** (s / 10.0))) for s in (10.0, 15.0, 20.0)]
    assert abs(diversity_slope(points) - 4.0) < 1e-6


def test_diversity_slope_needs_three_points():
    with pytest.raises(ValueError):
        diversity_slope([(10, 1e-2), (20, 0.0), (30, 0.0)])
