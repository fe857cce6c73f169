import numpy as np
import pytest

from otfs.core import (
    Constellation,
    FrameParams,
    RngStream,
    ShapeError,
    bpsk,
    map_bits,
    qam16,
    qpsk,
    unvec,
    vec,
)


def test_bpsk_bit_conventions():
    c = bpsk()
    assert np.allclose(map_bits([0], c), [1.0])
    assert np.allclose(map_bits([1, 0, 1], c), [-1.0, 1.0, -1.0])


def test_qpsk_first_quadrant():
    c = qpsk()
    assert np.allclose(map_bits([0, 0], c), [(1 + 1j) / np.sqrt(2)])


def test_map_bits_rejects_bad_length():
    with pytest.raises(ShapeError):
        map_bits([0, 1, 0], qpsk())


@pytest.mark.parametrize("c", [bpsk(), qpsk(), qam16()])
def test_constellation_unit_energy(c):
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12


def test_constellation_rejects_bad_energy():
    with pytest.raises(Exception):
        Constellation("bad", np.array([2.0, -2.0]), 1)


def test_vec_is_delay_major():
    x = np.array([[1, 3], [2, 4]])   # rows = delay
    assert np.array_equal(vec(x), [1, 2, 3, 4])


def test_vec_single_column():
    x = np.arange(3).reshape(3, 1)
    assert np.array_equal(vec(x), [0, 1, 2])


def test_vec_unvec_roundtrip_random_shapes():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = int(rng.integers(1, 17))
        n = int(rng.integers(1, 17))
        x = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        assert np.array_equal(unvec(vec(x), m, n), x)


def test_unvec_rejects_wrong_length():
    with pytest.raises(ShapeError):
        unvec(np.zeros(5), 2, 2)


def test_rng_stream_reproducible():
    a = RngStream(42, 7).generator().standard_normal(16)
    b = RngStream(42, 7).generator().standard_normal(16)
    assert np.array_equal(a, b)
    c = RngStream(42, 8).generator().standard_normal(16)
    assert not np.array_equal(a, c)


def test_frame_params_critical_sampling():
    p = FrameParams(8, 4, delta_f=15e3)
    assert p.slot_duration * p.delta_f == 1.0


def test_frame_params_validation():
    with pytest.raises(Exception):
        FrameParams(1, 4)
    with pytest.raises(Exception):
        FrameParams(4, 4, cp_len=-1)
