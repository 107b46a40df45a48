"""Centered 2D DFT pair, a brute-force DFT oracle, and tensor file I/O.

Convention: the forward transform is unnormalized and the inverse carries
``1/(H*W)``.  The zero-frequency bin sits at ``(H // 2, W // 2)``; on even
axes the unpaired Nyquist row/column lands at index 0, i.e. on the
negative-frequency side.
"""

from __future__ import annotations

import logging
import struct
import threading
import warnings
from pathlib import Path

import numpy as np
import torch

from .errors import InvalidInput, OracleTooLarge

log = logging.getLogger(__name__)

MAGIC = b"SPAMOE01"
ORACLE_MAX_SIZE = 4096
IMAG_TOL = 1e-10


class ImaginaryResidueWarning(UserWarning):
    """Raised when an inverse transform drops a non-negligible imaginary part."""


class _ResidueCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def bump(self):
        with self._lock:
            self.count += 1


residue_diagnostics = _ResidueCounter()


def _check_field(u: np.ndarray) -> np.ndarray:
    if u.ndim < 2 or u.shape[-1] < 2 or u.shape[-2] < 2:
        raise InvalidInput(f"need a grid with both sides >= 2, got shape {u.shape}")
    return u


def as_field(u) -> np.ndarray:
    """Validate and convert to a float64 array with at least two dims."""
    u = np.asarray(u, dtype=np.float64)
    _check_field(u)
    if not np.all(np.isfinite(u)):
        raise InvalidInput("field contains NaN or Inf")
    return u


def dft_centered(u) -> np.ndarray:
    """Centered forward DFT over the last two axes."""
    u = as_field(u)
    return np.fft.fftshift(np.fft.fft2(u, axes=(-2, -1)), axes=(-2, -1))


def _real_or_warn(v: np.ndarray) -> np.ndarray:
    resid = np.max(np.abs(v.imag)) if v.size else 0.0
    scale = max(1.0, float(np.max(np.abs(v.real))) if v.size else 1.0)
    if resid > IMAG_TOL * scale:
        residue_diagnostics.bump()
        log.debug("idft dropped imaginary residue %.3e", resid)
        warnings.warn(
            f"dropping imaginary residue {resid:.3e} (spectrum not conjugate-symmetric)",
            ImaginaryResidueWarning,
            stacklevel=3,
        )
    return np.ascontiguousarray(v.real)


def idft_centered(s, *, keep_complex: bool = False) -> np.ndarray:
    """Inverse of :func:`dft_centered`; returns the real part unless ``keep_complex``."""
    s = np.asarray(s, dtype=np.complex128)
    _check_field(s)
    v = np.fft.ifft2(np.fft.ifftshift(s, axes=(-2, -1)), axes=(-2, -1))
    if keep_complex:
        return v
    return _real_or_warn(v)


def _oracle_matrices(H: int, W: int, sign: float):
    # row k of each matrix holds the basis for centered frequency (k - n//2)
    fy = np.arange(H) - H // 2
    fx = np.arange(W) - W // 2
    ey = np.exp(sign * 2j * np.pi * np.outer(fy, np.arange(H)) / H)
    ex = np.exp(sign * 2j * np.pi * np.outer(fx, np.arange(W)) / W)
    return ey, ex


def dft_oracle(u) -> np.ndarray:
    """Centered DFT by the definition's double sum, one output bin at a time.

    Quadratic in the number of pixels; only for testing the fast path.
    """
    u = as_field(u)
    if u.ndim != 2:
        raise InvalidInput("oracle takes a single 2D field")
    H, W = u.shape
    if H * W > ORACLE_MAX_SIZE:
        raise OracleTooLarge(f"oracle limited to H*W <= {ORACLE_MAX_SIZE}, got {H * W}")
    ey, ex = _oracle_matrices(H, W, -1.0)
    out = np.empty((H, W), dtype=np.complex128)
    for a in range(H):
        for b in range(W):
            out[a, b] = np.sum(u * np.outer(ey[a], ex[b]))
    return out


def idft_oracle(s) -> np.ndarray:
    """Complex inverse of the centered DFT by direct summation."""
    s = np.asarray(s, dtype=np.complex128)
    _check_field(s)
    H, W = s.shape
    if H * W > ORACLE_MAX_SIZE:
        raise OracleTooLarge(f"oracle limited to H*W <= {ORACLE_MAX_SIZE}, got {H * W}")
    ey, ex = _oracle_matrices(H, W, 1.0)
    out = np.empty((H, W), dtype=np.complex128)
    for i in range(H):
        for j in range(W):
            out[i, j] = np.sum(s * np.outer(ey[:, i], ex[:, j]))
    return out / (H * W)


# differentiable twins used inside the model


def fft_centered(t: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(torch.fft.fft2(t, dim=(-2, -1)), dim=(-2, -1))


def ifft_centered(s: torch.Tensor) -> torch.Tensor:
    """Complex inverse; callers take ``.real`` (masks here are conjugate-symmetric)."""
    return torch.fft.ifft2(torch.fft.ifftshift(s, dim=(-2, -1)), dim=(-2, -1))


# --------------------------------------------------------------------------
# file formats


def save_tensor(path, arr) -> None:
    """Write ``arr`` as magic, u8 rank, u32-LE dims, then row-major f64-LE data."""
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    if arr.ndim > 255:
        raise InvalidInput("rank too large")
    with open(path, "wb") as fh:
        write_tensor_record(fh, arr)


def write_tensor_record(fh, arr) -> None:
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    fh.write(MAGIC)
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes(order="C"))


def read_tensor_record(fh) -> np.ndarray:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise InvalidInput(f"bad magic {magic!r}")
    (rank,) = struct.unpack("<B", fh.read(1))
    dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
    n = int(np.prod(dims, dtype=np.int64))
    buf = fh.read(8 * n)
    if len(buf) != 8 * n:
        raise InvalidInput("truncated tensor payload")
    return np.frombuffer(buf, dtype="<f8").reshape(dims).astype(np.float64)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor_record(fh)


def save_csv(path, field) -> None:
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise InvalidInput("CSV export takes a 2D field")
    np.savetxt(path, field, delimiter=",", fmt="%.17g")


def save_pgm(path, image, *, log_scale: bool = False) -> None:
    """Binary 16-bit PGM (P5), min-max scaled to 0..65535."""
    img = np.abs(np.asarray(image, dtype=np.float64))
    if img.ndim != 2:
        raise InvalidInput("PGM export takes a 2D image")
    if log_scale:
        img = np.log1p(img)
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
    data = np.round(scaled * 65535).astype(">u2")
    H, W = img.shape
    Path(path).write_bytes(f"P5\n{W} {H}\n65535\n".encode("ascii") + data.tobytes())
