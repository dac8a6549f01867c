"""Free-space propagation by the angular spectrum method and dispersive elements.

All FFTs are unitary (norm="ortho") so propagation preserves field energy on
the propagating band; the evanescent band is cut with a hard boolean mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import SpectralGrid


@dataclass(frozen=True)
class DispersionModel:
    """Cauchy refractive-index fit n(lam) = b + c/lam^2 + d/lam^4, lam in um."""

    b: float = 1.5046
    c_um2: float = 0.00420
    d_um4: float = 0.0

    def index(self, lam: float) -> float:
        """Refractive index at wavelength lam (meters)."""
        if lam <= 0:
            raise ValueError("wavelength must be positive")
        lam_um = lam * 1e6
        return self.b + self.c_um2 / lam_um**2 + self.d_um4 / lam_um**4

    @classmethod
    def bk7(cls) -> "DispersionModel":
        return cls()


def cauchy_index(model: DispersionModel, lam: float) -> float:
    return model.index(lam)


def frequency_grid(shape: tuple[int, int], pixel_pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """FFT-ordered spatial frequencies (fy, fx) with spacing 1/(N*pitch)."""
    h, w = shape
    fy = np.fft.fftfreq(h, d=pixel_pitch)
    fx = np.fft.fftfreq(w, d=pixel_pitch)
    return np.meshgrid(fy, fx, indexing="ij")


def angular_spectrum_tf(
    grid: SpectralGrid,
    lam: float,
    distance: float,
    shape: tuple[int, int] | None = None,
) -> np.ndarray:
    """Angular-spectrum transfer function on the FFT grid.

    exp(j*k*d*sqrt(1 - (lam*fx)^2 - (lam*fy)^2)) inside the propagating band
    (lam*fx)^2 + (lam*fy)^2 <= 1, exactly zero outside. At distance 0 the
    band value is exactly 1.
    """
    if shape is None:
        shape = grid.shape
    fy, fx = frequency_grid(shape, grid.pixel_pitch)
    s2 = (lam * fx) ** 2 + (lam * fy) ** 2
    band = s2 <= 1.0
    k = 2.0 * np.pi / lam
    phase = k * distance * np.sqrt(np.where(band, 1.0 - s2, 0.0))
    tf = np.where(band, np.exp(1j * phase), 0.0 + 0.0j)
    return tf


def propagate(field: np.ndarray, tf: np.ndarray) -> np.ndarray:
    """Apply a frequency-domain filter: ifft2(tf * fft2(field)), unitary FFTs.

    Broadcasts over leading axes; the trailing two axes must match tf.
    """
    if field.shape[-2:] != tf.shape[-2:]:
        raise ValueError(f"shape mismatch: field {field.shape[-2:]} vs tf {tf.shape[-2:]}")
    spec = np.fft.fft2(field, axes=(-2, -1), norm="ortho")
    return np.fft.ifft2(tf * spec, axes=(-2, -1), norm="ortho")


def transmittance(
    amplitude: np.ndarray,
    thickness: np.ndarray,
    lam: float,
    model: DispersionModel,
) -> np.ndarray:
    """Complex transmittance a * exp(-j*(2*pi/lam)*h*(n(lam) - 1)).

    `amplitude` is elementwise nonnegative, `thickness` is in meters.
    """
    k = 2.0 * np.pi / lam
    n = model.index(lam)
    return amplitude * np.exp(-1j * k * thickness * (n - 1.0))


def _embed(field: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = field.shape[-2:]
    hp, wp = shape
    out = np.zeros(field.shape[:-2] + (hp, wp), dtype=field.dtype)
    oy, ox = (hp - h) // 2, (wp - w) // 2
    out[..., oy : oy + h, ox : ox + w] = field
    return out


def _crop(field: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    hp, wp = field.shape[-2:]
    oy, ox = (hp - h) // 2, (wp - w) // 2
    return field[..., oy : oy + h, ox : ox + w]


@dataclass(frozen=True)
class TransferFunctionSet:
    """Per-wavelength propagation filters for one distance, shared read-only.

    With pad_factor > 1 the filters live on an enlarged FFT grid and fields
    are zero-embedded before and cropped after filtering, which suppresses
    wrap-around at the frame edges.
    """

    filters: np.ndarray  # (K, Hp, Wp) complex
    passband: np.ndarray  # (K, Hp, Wp) bool
    shape: tuple[int, int]
    distance: float
    pad_factor: int = 1

    @property
    def padded(self) -> bool:
        return self.filters.shape[-2:] != tuple(self.shape)

    def _apply(self, fields: np.ndarray, filters: np.ndarray) -> np.ndarray:
        if not self.padded:
            return propagate(fields, filters)
        big = propagate(_embed(fields, self.filters.shape[-2:]), filters)
        return _crop(big, self.shape)

    def forward(self, fields: np.ndarray) -> np.ndarray:
        """Propagate (..., K, H, W) fields to the sensor plane, all channels."""
        return self._apply(fields, self.filters)

    def backward(self, fields: np.ndarray) -> np.ndarray:
        """Adjoint propagation (conjugate filter) back to the object plane."""
        return self._apply(fields, np.conj(self.filters))

    def forward_channel(self, field: np.ndarray, k: int) -> np.ndarray:
        """Propagate a single (H, W) field in channel k."""
        return self._apply(field, self.filters[k])

    def backward_channel(self, field: np.ndarray, k: int) -> np.ndarray:
        return self._apply(field, np.conj(self.filters[k]))


def make_transfer_functions(
    grid: SpectralGrid,
    distance: float | None = None,
    pad_factor: int = 1,
) -> TransferFunctionSet:
    if distance is None:
        distance = grid.distance
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    shape = (grid.height * pad_factor, grid.width * pad_factor)
    filters = np.stack(
        [angular_spectrum_tf(grid, lam, distance, shape=shape) for lam in grid.wavelengths]
    )
    return TransferFunctionSet(
        filters=filters,
        passband=filters != 0,
        shape=grid.shape,
        distance=distance,
        pad_factor=pad_factor,
    )
