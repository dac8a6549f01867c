"""Spectral-cube data model, elementary complex-field algebra and binary I/O.

A hyperspectral complex cube is a plain ``(K, H, W)`` complex128 ndarray in
row-major channel/row/column order; that order is also the byte order of the
``HSC1``/``HSR1`` file formats below.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HSC1_MAGIC = b"HSC1"
HSR1_MAGIC = b"HSR1"


@dataclass(frozen=True)
class SpectralGrid:
    """Wavelengths and spatial sampling shared by every field in a scene.

    Parameters
    ----------
    wavelengths : strictly increasing positive wavelengths in meters.
    pixel_pitch : sensor/object pixel size in meters.
    height, width : image dimensions in pixels.
    distance : object-to-sensor propagation distance in meters (>= 0).
    """

    wavelengths: tuple[float, ...]
    pixel_pitch: float
    height: int
    width: int
    distance: float = 0.0

    def __post_init__(self):
        waves = tuple(float(w) for w in self.wavelengths)
        object.__setattr__(self, "wavelengths", waves)
        if len(waves) < 1:
            raise ValueError("at least one wavelength is required")
        if any(w <= 0 or not np.isfinite(w) for w in waves):
            raise ValueError("wavelengths must be positive and finite")
        if any(b <= a for a, b in zip(waves, waves[1:])):
            raise ValueError("wavelengths must be strictly increasing")
        if self.pixel_pitch <= 0:
            raise ValueError("pixel_pitch must be positive")
        if self.height < 1 or self.width < 1:
            raise ValueError("grid dimensions must be positive")
        if self.distance < 0:
            raise ValueError("distance must be nonnegative")

    @property
    def num_channels(self) -> int:
        return len(self.wavelengths)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def wavenumbers(self) -> np.ndarray:
        """k = 2*pi/lambda for every channel."""
        return 2.0 * np.pi / np.asarray(self.wavelengths)


def uniform_band(lam_min: float, lam_max: float, channels: int) -> tuple[float, ...]:
    """Uniformly spaced wavelengths over [lam_min, lam_max] inclusive.

    A single channel sits at the band midpoint.
    """
    if channels < 1:
        raise ValueError("channels must be >= 1")
    if channels == 1:
        return (0.5 * (lam_min + lam_max),)
    return tuple(np.linspace(lam_min, lam_max, channels))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def cube_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Inner product sum(a * conj(b)) over all channels and pixels."""
    _check_same_shape(a, b)
    return complex(np.vdot(b, a))


def cube_norm2(a: np.ndarray) -> float:
    """Total squared magnitude sum(|a|^2)."""
    return float(np.vdot(a, a).real)


def ensure_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def _read_header(f, magic: bytes, path) -> tuple[int, int, int]:
    got = f.read(4)
    if got != magic:
        raise ValueError(f"{path}: bad magic {got!r}, expected {magic!r}")
    k, h, w = struct.unpack("<III", f.read(12))
    return k, h, w


def write_cube(path, cube: np.ndarray) -> None:
    """Write a (K, H, W) complex cube in the HSC1 format.

    Layout: magic ``HSC1``, three little-endian uint32 (K, H, W), then
    K*H*W (real, imag) pairs of little-endian float64 in (k, row, col) order.
    """
    cube = np.asarray(cube)
    if cube.ndim != 3:
        raise ValueError("cube must have shape (K, H, W)")
    k, h, w = cube.shape
    with open(path, "wb") as f:
        f.write(HSC1_MAGIC)
        f.write(struct.pack("<III", k, h, w))
        np.ascontiguousarray(cube, dtype="<c16").tofile(f)


def read_cube(path) -> np.ndarray:
    with open(path, "rb") as f:
        k, h, w = _read_header(f, HSC1_MAGIC, path)
        data = np.fromfile(f, dtype="<c16", count=k * h * w)
    if data.size != k * h * w:
        raise ValueError(f"{path}: truncated HSC1 payload")
    return data.astype(np.complex128).reshape(k, h, w)


def write_real(path, images: np.ndarray) -> None:
    """Write real images in the HSR1 format (one float64 per element).

    Accepts a single (H, W) image, stored with K=1, or a (K, H, W) stack.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    if images.ndim != 3:
        raise ValueError("images must have shape (H, W) or (K, H, W)")
    k, h, w = images.shape
    with open(path, "wb") as f:
        f.write(HSR1_MAGIC)
        f.write(struct.pack("<III", k, h, w))
        np.ascontiguousarray(images, dtype="<f8").tofile(f)


def read_real(path) -> np.ndarray:
    with open(path, "rb") as f:
        k, h, w = _read_header(f, HSR1_MAGIC, path)
        data = np.fromfile(f, dtype="<f8", count=k * h * w)
    if data.size != k * h * w:
        raise ValueError(f"{path}: truncated HSR1 payload")
    return data.astype(np.float64).reshape(k, h, w)
