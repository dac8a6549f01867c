"""Random piecewise-constant coded phase masks and their spectral transmittances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import SpectralGrid, write_real
from .optics import DispersionModel, transmittance

# Thickness levels in units of lam_min/4, drawn with equal probability per cell.
LEVELS = np.array([0.0, 1.0, -1.0, 0.5, -0.5])


def _mask_rng(seed: int, t: int) -> np.random.Generator:
    # Counter-based generator keyed by (seed, t): reproducible regardless of
    # how generation is scheduled across masks.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, t])))


@dataclass(frozen=True)
class MaskSet:
    """T phase-only modulation masks evaluated per wavelength.

    thickness: (T, H, W) meters, piecewise constant on cell_size x cell_size
    blocks; transmittances: (T, K, H, W) unit-magnitude complex fields.
    """

    thickness: np.ndarray
    transmittances: np.ndarray
    cell_size: int
    seed: int

    @property
    def count(self) -> int:
        return self.thickness.shape[0]


def make_mask_set(
    seed: int,
    count: int,
    grid: SpectralGrid,
    model: DispersionModel,
    cell_size: int = 1,
    lam_min: float | None = None,
) -> MaskSet:
    """Draw `count` independent masks, reproducible from (seed, t).

    Each cell takes one of the five thickness levels {0, +-1, +-1/2} * lam_min/4
    uniformly at random; cells need not divide the grid evenly (trailing
    partial cells are cropped).
    """
    if count < 1:
        raise ValueError("mask count must be >= 1")
    if cell_size < 1:
        raise ValueError("cell_size must be >= 1")
    if lam_min is None:
        lam_min = grid.wavelengths[0]
    h, w = grid.shape
    quantum = lam_min / 4.0
    cells_h = -(-h // cell_size)
    cells_w = -(-w // cell_size)

    thickness = np.empty((count, h, w))
    for t in range(count):
        rng = _mask_rng(seed, t)
        idx = rng.integers(0, len(LEVELS), size=(cells_h, cells_w))
        cells = LEVELS[idx] * quantum
        thickness[t] = np.kron(cells, np.ones((cell_size, cell_size)))[:h, :w]

    ones = np.ones((h, w))
    trans = np.empty((count, grid.num_channels, h, w), dtype=np.complex128)
    for t in range(count):
        for k, lam in enumerate(grid.wavelengths):
            trans[t, k] = transmittance(ones, thickness[t], lam, model)

    return MaskSet(thickness=thickness, transmittances=trans, cell_size=cell_size, seed=seed)


def save_thickness(path, masks: MaskSet) -> None:
    """Export the thickness maps as an HSR1 stack for experiment records."""
    write_real(path, masks.thickness)
