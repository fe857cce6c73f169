"""Core grid types, constellations, vectorization conventions, and the RNG contract.

Conventions fixed here and used everywhere else:

* A delay-Doppler frame is an M x N complex ndarray ``X[l, k]`` with
  ``l`` the delay index (rows) and ``k`` the Doppler index (columns).
* Vectorization is delay-major: vector index ``q = l + k*M`` (numpy
  column-major flatten).  Every effective channel matrix in this package
  uses this order on both axes.
* All complex arithmetic is complex128.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ShapeError(ValueError):
    """Input has the wrong shape or length for the requested operation."""


class ConfigError(ValueError):
    """Configuration values are inconsistent or unsupported."""


class ResourceLimitError(RuntimeError):
    """Requested dense operation exceeds a configured size cap."""


class CPScheme(str, Enum):
    FULL = "full"          # one CP per time slot
    REDUCED = "reduced"    # one CP at the head of the frame
    ZERO_PAD = "zp"        # trailing zeros inside each slot, no extra samples


@dataclass(frozen=True)
class FrameParams:
    """Grid geometry: M delay bins (subcarriers) x N Doppler bins (slots).

    The grid is critically sampled: slot duration T = 1/delta_f, so
    T * delta_f = 1 holds by construction.  The sample rate is M/T.
    """

    m: int
    n: int
    delta_f: float = 15e3
    cp_scheme: CPScheme = CPScheme.REDUCED
    cp_len: int = 0

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ConfigError(f"grid must be at least 2x2, got {self.m}x{self.n}")
        if self.delta_f <= 0:
            raise ConfigError("delta_f must be positive")
        if self.cp_len < 0:
            raise ConfigError("cp_len must be non-negative")
        if self.cp_scheme == CPScheme.ZERO_PAD and self.cp_len >= self.m:
            raise ConfigError("zero-pad guard must be shorter than a slot")

    @property
    def slot_duration(self) -> float:
        return 1.0 / self.delta_f

    @property
    def grid_size(self) -> int:
        return self.m * self.n

    @property
    def sample_period(self) -> float:
        return self.slot_duration / self.m


def vec(frame: np.ndarray) -> np.ndarray:
    """Vectorize an M x N DD frame with the fixed order q = l + k*M."""
    x = np.asarray(frame)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D frame, got ndim={x.ndim}")
    return x.ravel(order="F")


def unvec(v: np.ndarray, m: int, n: int) -> np.ndarray:
    """Inverse of :func:`vec`; length must equal m*n."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != m * n:
        raise ShapeError(f"expected a vector of length {m * n}, got shape {v.shape}")
    return v.reshape((m, n), order="F")


# ---------------------------------------------------------------------------
#  Constellations
# ---------------------------------------------------------------------------

def _gray_pam4(b0: int, b1: int) -> int:
    # Gray map on one axis: 00->+3, 01->+1, 11->-1, 10->-3
    if b0 == 0:
        return 3 if b1 == 0 else 1
    return -1 if b1 == 1 else -3


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy constellation with a Gray bit labeling.

    ``points[i]`` is the symbol whose label is the bits of ``i`` (MSB
    first, ``bits_per_symbol`` bits).
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        if len(pts) != 2 ** self.bits_per_symbol:
            raise ConfigError("labeling must cover all bit tuples exactly once")
        energy = float(np.mean(np.abs(pts) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ConfigError(f"constellation average energy {energy} != 1")

    @property
    def size(self) -> int:
        return len(self.points)

    def map_bits(self, bits) -> np.ndarray:
        return map_bits(bits, self)

    def indices_to_bits(self, idx: np.ndarray) -> np.ndarray:
        """Expand symbol indices back to their bit labels (MSB first)."""
        idx = np.asarray(idx, dtype=np.int64)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((idx[..., None] >> shifts) & 1).reshape(idx.shape + (self.bits_per_symbol,))

    def nearest(self, values: np.ndarray) -> np.ndarray:
        """Indices of the nearest constellation points (lowest index on ties)."""
        v = np.asarray(values, dtype=np.complex128)
        d = np.abs(v[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)


def bpsk() -> Constellation:
    # bit 0 -> +1 (fixed convention; tests depend on it)
    return Constellation("bpsk", np.array([1.0, -1.0]), 1)


def qpsk() -> Constellation:
    pts = np.empty(4, dtype=np.complex128)
    for b0 in (0, 1):
        for b1 in (0, 1):
            pts[(b0 << 1) | b1] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2.0)
    return Constellation("qpsk", pts, 2)


def qam16() -> Constellation:
    pts = np.empty(16, dtype=np.complex128)
    for label in range(16):
        b = [(label >> s) & 1 for s in (3, 2, 1, 0)]
        i = _gray_pam4(b[0], b[1])
        q = _gray_pam4(b[2], b[3])
        pts[label] = (i + 1j * q) / np.sqrt(10.0)
    return Constellation("16qam", pts, 4)


_BY_NAME = {"bpsk": bpsk, "qpsk": qpsk, "16qam": qam16, "qam16": qam16}


def constellation_by_name(name: str) -> Constellation:
    try:
        return _BY_NAME[name.lower()]()
    except KeyError:
        raise ConfigError(f"unknown constellation {name!r}") from None


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map a bit sequence to constellation symbols via the Gray labeling."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    if np.any((b != 0) & (b != 1)):
        raise ShapeError("bits must be 0/1")
    if b.size % c.bits_per_symbol:
        raise ShapeError(
            f"bit count {b.size} not divisible by bits_per_symbol={c.bits_per_symbol}"
        )
    groups = b.reshape(-1, c.bits_per_symbol)
    shifts = np.arange(c.bits_per_symbol - 1, -1, -1)
    idx = (groups << shifts).sum(axis=1)
    return c.points[idx]


# ---------------------------------------------------------------------------
#  Seeded random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by (seed, stream_id).

    Identical keys give bit-identical draws; distinct stream_ids give
    statistically independent streams.  Instances are owned per worker
    and never shared between threads.
    """

    seed: int
    stream_id: int = 0

    def generator(self, *extra: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(self.stream_id), *map(int, extra)])

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def complex_gaussian(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with total variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
