import numpy as np
import pytest

from otfs.core import ConfigError, FrameParams, RngStream, bpsk, complex_gaussian, map_bits
from otfs.channel import (
    ChannelRealization,
    PathSpec,
    PowerDelayProfile,
    apply_td,
    build_effective_dd,
    sample_channel,
)
from otfs.estimation import (
    DATA,
    GUARD,
    PILOT,
    PilotConfig,
    embed_pilot,
    estimate_channel,
    nmse,
    region_mask,
)
from otfs.modem import TimeDomainFrame, demodulate_dzt, modulate_dzt
from otfs.pulse import rectangular_pulse


def transmit(x, ch, params, rng=None, noise_var=0.0):
    pulse = rectangular_pulse(params)
    rx = apply_td(ch, modulate_dzt(x, pulse, params), params)
    samples = rx.samples
    if noise_var > 0:
        samples = samples + complex_gaussian(rng, samples.shape, noise_var)
    return demodulate_dzt(TimeDomainFrame(samples, params), pulse, params)


def test_region_mask_partition_and_extents():
    params = FrameParams(8, 8)
    cfg = PilotConfig(pilot_pos=(2, 3), l_max=1, k_max=1)
    mask = region_mask(cfg, params)
    assert np.sum(mask == PILOT) == 1
    # guard rectangle: (2 l_max + 1)(4 k_max + 1) bins minus the pilot
    assert np.sum(mask == GUARD) == 3 * 5 - 1
    assert np.sum(mask == DATA) == 64 - 3 * 5
    # partition covers every bin exactly once by construction
    assert mask.shape == (8, 8)


def test_guard_rejects_wrap_overflow():
    params = FrameParams(4, 4)
    with pytest.raises(ConfigError):
        region_mask(PilotConfig(pilot_pos=(0, 0), l_max=2, k_max=1), params)


def test_embed_pilot_zero_amplitude_keeps_data():
    params = FrameParams(8, 8)
    cfg = PilotConfig(pilot_pos=(1, 2), pilot_amplitude=0.0, l_max=1, k_max=1)
    rng = np.random.default_rng(0)
    x = complex_gaussian(rng, (8, 8))
    out, mask = embed_pilot(x, cfg, params)
    assert np.all(out[mask == DATA] == x[mask == DATA])
    assert np.all(out[mask != DATA] == 0)


def test_noiseless_single_path_estimated_exactly():
    # DERIVED oracle: the forward model itself
    params = FrameParams(8, 8, cp_len=1)
    cfg = PilotConfig(pilot_pos=(1, 2), pilot_amplitude=10.0, l_max=1, k_max=1)
    ch = ChannelRealization((PathSpec(1.0 + 0j, 1, 1.0),))
    x, _ = embed_pilot(np.zeros((8, 8), dtype=complex), cfg, params)
    est = estimate_channel(transmit(x, ch, params), cfg, params, 0.0)
    assert est is not None and est.n_paths == 1
    p = est.paths[0]
    assert (p.delay, p.doppler) == (1, 1.0)
    assert abs(p.gain - 1.0) < 1e-9


def test_zero_channel_estimates_nothing():
    params = FrameParams(8, 8, cp_len=1)
    cfg = PilotConfig(pilot_pos=(1, 2), pilot_amplitude=10.0, l_max=1, k_max=1)
    assert estimate_channel(np.zeros((8, 8)), cfg, params, 0.0) is None


def test_guard_sufficiency_with_data_present():
    # data symbols contribute exactly zero energy to the pilot read region
    rng = np.random.default_rng(1)
    params = FrameParams(16, 16, cp_len=2)
    cfg = PilotConfig(pilot_pos=(3, 5), pilot_amplitude=10.0, l_max=2, k_max=2)
    pdp = PowerDelayProfile(l_max=2, k_max=2, n_paths=3)
    c = bpsk()
    for _ in range(10):
        ch = sample_channel(pdp, rng)
        x = np.zeros((16, 16), dtype=complex)
        data = region_mask(cfg, params) == DATA
        x[data] = map_bits(rng.integers(0, 2, int(data.sum())), c)
        x, _ = embed_pilot(x, cfg, params)
        est = estimate_channel(transmit(x, ch, params), cfg, params, 1e-12)
        true_eff = build_effective_dd(ch, params)
        est_eff = build_effective_dd(est, params) if est else None
        assert nmse(true_eff, est_eff) < 1e-18


def test_noiseless_multipath_exact_when_above_threshold():
    rng = np.random.default_rng(2)
    params = FrameParams(32, 32, cp_len=4)
    cfg = PilotConfig(pilot_pos=(4, 6), pilot_amplitude=10.0, l_max=4, k_max=3)
    pdp = PowerDelayProfile(kind="exponential", exponent=0.1, l_max=4, k_max=3, n_paths=5)
    for _ in range(5):
        ch = sample_channel(pdp, rng)
        x, _ = embed_pilot(np.zeros((32, 32), dtype=complex), cfg, params)
        est = estimate_channel(transmit(x, ch, params), cfg, params, 0.0)
        got = {(p.delay, p.doppler): p.gain for p in est.paths}
        want = {(p.delay, p.doppler): p.gain for p in ch.paths}
        assert set(got) == set(want)
        for key in want:
            assert abs(got[key] - want[key]) < 1e-9


def test_three_path_detection_rate_at_20db_pilot_snr():
    # DERIVED: Monte Carlo with the forward model; all paths found >= 95%.
    # Frame SNR 20 dB, pilot boosted 10x above the unit data RMS.
    params = FrameParams(16, 16, cp_len=2)
    cfg = PilotConfig(pilot_pos=(2, 4), pilot_amplitude=10.0, l_max=2, k_max=2)
    pdp = PowerDelayProfile(l_max=2, k_max=2, n_paths=3)
    noise_var = 10 ** (-20 / 10)
    hits = 0
    trials = 300
    for t in range(trials):
        rng = RngStream(5).generator(t)
        ch = sample_channel(pdp, rng)
        x, _ = embed_pilot(np.zeros((16, 16), dtype=complex), cfg, params)
        y = transmit(x, ch, params, rng, noise_var)
        est = estimate_channel(y, cfg, params, noise_var)
        if est is None:
            continue
        got = {(p.delay, p.doppler) for p in est.paths}
        if {(p.delay, p.doppler) for p in ch.paths} <= got:
            hits += 1
    assert hits / trials >= 0.95


def test_nmse_basic_identities():
    params = FrameParams(4, 4, cp_len=1)
    ch = ChannelRealization((PathSpec(0.8 + 0.1j, 1, 1.0),))
    h = build_effective_dd(ch, params)
    assert nmse(h, h) == 0.0
    assert nmse(h, None) == 1.0
    scaled = build_effective_dd(
        ChannelRealization((PathSpec((0.8 + 0.1j) * 1.01, 1, 1.0),)), params
    )
    assert abs(nmse(h, scaled) - 0.01**2) < 1e-12


def test_nmse_rejects_zero_reference():
    params = FrameParams(4, 4, cp_len=0)
    zero = build_effective_dd(ChannelRealization((PathSpec(0.0 + 0j, 0, 0.0),)), params)
    with pytest.raises(ValueError):
        nmse(zero, zero)


def test_nmse_decreases_with_pilot_snr():
    # compact version of the acceptance sweep: monotone on average
    from otfs.harness import ExperimentConfig, run_estimation_trial

    cfg = ExperimentConfig(
        kind="estimate", m=16, n=16, paths=3, l_max=2, k_max=2,
        pdp="exponential", pdp_exponent=0.1, seed=3,
        pilot_snr_db=(0.0, 10.0, 20.0, 30.0), trials=150,
    )
    means = []
    for idx in range(4):
        vals = [run_estimation_trial(cfg, idx, t) for t in range(cfg.trials)]
        means.append(np.mean(vals))
    assert all(means[i + 1] < means[i] for i in range(3))
