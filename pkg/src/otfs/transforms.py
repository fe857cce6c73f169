"""Unitary transforms between the DD, TF, and TD domains.

All transforms here use 1/sqrt(size) normalization, so each one preserves
the l2 norm exactly.  Sign conventions:

* DFT:    X[m] = (1/sqrt(n)) sum_k x[k] e^{-j 2 pi k m / n}
* SFFT:   X_DD[l,k] = (1/sqrt(MN)) sum_{n,m} X_TF[n,m] e^{-j 2 pi (n k / N - m l / M)}
* DZT:    DZ[l,k]   = (1/sqrt(N))  sum_n  s[l + n M]  e^{-j 2 pi n k / N}

TF grids are N x M (rows = time slots, columns = subcarriers); DD grids
are M x N (rows = delay, columns = Doppler).
"""

from __future__ import annotations

import numpy as np

from .core import FrameParams, ResourceLimitError, ShapeError, vec

DENSE_MATRIX_CAP = 4096  # largest MN for explicit matrix forms


def dft(x: np.ndarray, n: int | None = None) -> np.ndarray:
    """Unitary DFT of a length-n vector."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ShapeError("dft expects a 1-D vector")
    if n is None:
        n = x.size
    if n == 0 or x.size != n:
        raise ShapeError(f"dft size mismatch: len(x)={x.size}, n={n}")
    return np.fft.fft(x) / np.sqrt(n)


def idft(x: np.ndarray, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`dft` (also unitary)."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ShapeError("idft expects a 1-D vector")
    if n is None:
        n = x.size
    if n == 0 or x.size != n:
        raise ShapeError(f"idft size mismatch: len(x)={x.size}, n={n}")
    return np.fft.ifft(x) * np.sqrt(n)


def unitary_dft_matrix(n: int) -> np.ndarray:
    """Dense unitary DFT matrix F with F[k, m] = e^{-j2pi k m/n}/sqrt(n)."""
    if n <= 0:
        raise ShapeError("matrix size must be positive")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def sfft(x_tf: np.ndarray) -> np.ndarray:
    """Symplectic FFT: N x M time-frequency grid -> M x N delay-Doppler grid."""
    x_tf = np.asarray(x_tf, dtype=np.complex128)
    if x_tf.ndim != 2:
        raise ShapeError("sfft expects an N x M matrix")
    n, m = x_tf.shape
    tmp = np.fft.fft(x_tf, axis=0) / np.sqrt(n)     # slots n -> Doppler k
    tmp = np.fft.ifft(tmp, axis=1) * np.sqrt(m)     # subcarriers m -> delay l
    return tmp.T                                    # index as [l, k]


def isfft(x_dd: np.ndarray) -> np.ndarray:
    """Inverse SFFT: M x N delay-Doppler grid -> N x M time-frequency grid."""
    x_dd = np.asarray(x_dd, dtype=np.complex128)
    if x_dd.ndim != 2:
        raise ShapeError("isfft expects an M x N matrix")
    tmp = x_dd.T
    tmp = np.fft.ifft(tmp, axis=0) * np.sqrt(tmp.shape[0])   # Doppler -> slots
    tmp = np.fft.fft(tmp, axis=1) / np.sqrt(tmp.shape[1])    # delay -> subcarriers
    return tmp


def dzt(s: np.ndarray, m: int, n: int) -> np.ndarray:
    """Discrete Zak transform of MN samples onto the M x N DD grid."""
    s = np.asarray(s, dtype=np.complex128).ravel()
    if s.size != m * n:
        raise ShapeError(f"dzt expects {m * n} samples, got {s.size}")
    grid = s.reshape((m, n), order="F")             # grid[l, slot] = s[l + slot*M]
    return np.fft.fft(grid, axis=1) / np.sqrt(n)


def idzt(dz: np.ndarray) -> np.ndarray:
    """Inverse DZT: M x N DD grid -> MN time samples."""
    dz = np.asarray(dz, dtype=np.complex128)
    if dz.ndim != 2:
        raise ShapeError("idzt expects an M x N matrix")
    n = dz.shape[1]
    grid = np.fft.ifft(dz, axis=1) * np.sqrt(n)
    return grid.ravel(order="F")


def td_to_dd_matrix(params: FrameParams, cap: int = DENSE_MATRIX_CAP) -> np.ndarray:
    """Dense unitary matrix U with U @ s == vec(dzt(s)) for every s.

    Explicitly U = kron(F_N, I_M) under the fixed q = l + k*M order.
    Gated by ``cap`` since the result is MN x MN.
    """
    mn = params.grid_size
    if mn > cap:
        raise ResourceLimitError(f"MN={mn} exceeds dense matrix cap {cap}")
    return np.kron(unitary_dft_matrix(params.n), np.eye(params.m))


def time_to_dd(s: np.ndarray, params: FrameParams) -> np.ndarray:
    """Functional form of the TD -> DD map (vec of the DZT)."""
    return vec(dzt(s, params.m, params.n))
