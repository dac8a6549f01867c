"""Forward observation model and Gaussian/Poissonian noise channels.

Each experiment t records one total-intensity image: the squared magnitudes
of the propagated, mask-coded object fields summed over all spectral channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import MaskSet
from .optics import TransferFunctionSet

GAUSSIAN_SNR_DEFINITION = "snr_db = 10*log10(sum(Y^2)/sum((Z-Y)^2)), expectation over noise"
POISSON_SNR_DEFINITION = "snr_db = 10*log10(mean(Y)*chi), mean per-pixel E{Z}^2/var{Z}"


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"  # gaussian | poisson | none
    snr_db: float = 54.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "poisson", "none"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


def _noise_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, t])))


def forward_intensities(
    u_o: np.ndarray, masks: MaskSet, tfs: TransferFunctionSet
) -> np.ndarray:
    """Noise-free intensities Y of shape (T, H, W) for all experiments."""
    coded = masks.transmittances * u_o[None]  # (T, K, H, W)
    sensor = tfs.forward(coded)
    return np.sum(np.abs(sensor) ** 2, axis=1)


def forward_intensity(
    u_o: np.ndarray, masks: MaskSet, tfs: TransferFunctionSet, t: int
) -> np.ndarray:
    """Noise-free intensity image of experiment t, elementwise >= 0."""
    coded = masks.transmittances[t] * u_o
    sensor = tfs.forward(coded)
    return np.sum(np.abs(sensor) ** 2, axis=0)


def sigma_for_snr(y: np.ndarray, snr_db: float) -> float:
    """Gaussian noise level giving the target mean-square SNR in dB.

    sigma^2 = mean(Y^2) * 10^(-snr_db/10), so the expected
    10*log10(sum(Y^2)/sum(eps^2)) equals snr_db.
    """
    y = np.asarray(y)
    ms = float(np.mean(y**2))
    if ms == 0.0:
        raise ValueError("intensities are identically zero, SNR is undefined")
    return float(np.sqrt(ms * 10.0 ** (-snr_db / 10.0)))


def chi_for_snr(y: np.ndarray, snr_db: float) -> float:
    """Photon-flux scaling chi = 10^(snr_db/10) / mean(Y).

    The per-pixel SNR of a Poisson count is E{Z}^2/var{Z} = Y*chi; this choice
    makes its mean over pixels match the target.
    """
    y = np.asarray(y)
    if np.any(y < 0):
        raise ValueError("intensities must be nonnegative for Poisson noise")
    m = float(np.mean(y))
    if m == 0.0:
        raise ValueError("intensities are identically zero, SNR is undefined")
    return float(10.0 ** (snr_db / 10.0) / m)


def add_gaussian(y: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Z = Y + N(0, sigma^2) i.i.d. per pixel; negatives are kept as-is."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    y = np.asarray(y, dtype=np.float64)
    if sigma == 0.0:
        return y.copy()
    z = np.empty_like(y)
    for t in range(y.shape[0]):
        z[t] = y[t] + sigma * _noise_rng(seed, t).standard_normal(y.shape[1:])
    return z


def add_poisson(y: np.ndarray, chi: float, seed: int) -> np.ndarray:
    """Z ~ Poisson(Y * chi), integer-valued counts returned as float64."""
    if chi <= 0:
        raise ValueError("chi must be positive")
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("intensities must be nonnegative for Poisson noise")
    z = np.empty_like(y)
    for t in range(y.shape[0]):
        z[t] = _noise_rng(seed, t).poisson(y[t] * chi)
    return z


def observe(
    u_o: np.ndarray,
    masks: MaskSet,
    tfs: TransferFunctionSet,
    spec: NoiseSpec,
) -> tuple[np.ndarray, dict]:
    """Simulate observations for all experiments under the given noise model.

    Returns (Z, info) where info records the calibrated noise parameters and
    the dB convention used, for the experiment manifest.
    """
    y = forward_intensities(u_o, masks, tfs)
    info: dict = {"kind": spec.kind, "snr_db": spec.snr_db, "seed": spec.seed}
    if spec.kind == "none":
        z = y.copy()
    elif spec.kind == "gaussian":
        sigma = sigma_for_snr(y, spec.snr_db)
        z = add_gaussian(y, sigma, spec.seed)
        info["sigma"] = sigma
        info["snr_definition"] = GAUSSIAN_SNR_DEFINITION
    else:
        chi = chi_for_snr(y, spec.snr_db)
        z = add_poisson(y, chi, spec.seed)
        info["chi"] = chi
        info["snr_definition"] = POISSON_SNR_DEFINITION
    return z, info
