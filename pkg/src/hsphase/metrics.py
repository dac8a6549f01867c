"""Accuracy and noise metrics: phase-aligned relative error, empirical SNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import cube_inner, cube_norm2


def relative_error(estimate: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Squared-norm mismatch after optimal global phase alignment.

    min over phi of ||estimate*exp(j*phi) - truth||^2 / ||truth||^2, in closed
    form: (||e||^2 + ||t||^2 - 2|<e, t>|) / ||t||^2. A boolean mask restricts
    the sums to selected pixels (applied to the trailing image axes).
    """
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    if mask is not None:
        estimate = estimate[..., mask]
        truth = truth[..., mask]
    tnorm = cube_norm2(truth)
    if tnorm == 0:
        raise ValueError("truth has zero norm")
    enorm = cube_norm2(estimate)
    cross = abs(cube_inner(estimate, truth))
    return max((enorm + tnorm - 2.0 * cross) / tnorm, 0.0)


def channel_errors(
    estimate: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None
) -> np.ndarray:
    """Per-channel relative errors, each channel phase-aligned independently."""
    if estimate.ndim != 3 or truth.ndim != 3:
        raise ValueError("expected (K, H, W) cubes")
    return np.array(
        [relative_error(estimate[k], truth[k], mask) for k in range(truth.shape[0])]
    )


def support_mask(truth: np.ndarray, threshold: float = 1e-3) -> np.ndarray:
    """Object support from the truth amplitude (phase is undefined off it)."""
    truth = np.asarray(truth)
    amp = np.abs(truth)
    if amp.ndim == 3:
        amp = amp.max(axis=0)
    return amp > threshold


def empirical_snr_db(y: np.ndarray, z: np.ndarray) -> float:
    """10*log10(sum(Y^2) / sum((Z - Y)^2)); +inf when Z equals Y exactly."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    err = float(np.sum((z - y) ** 2))
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(np.sum(y**2) / err))


@dataclass
class ErrorTrace:
    """Per-iteration, per-channel relative errors of a reconstruction run."""

    per_channel: np.ndarray  # (iterations, K)

    def __post_init__(self):
        self.per_channel = np.asarray(self.per_channel, dtype=np.float64)
        if self.per_channel.ndim != 2:
            raise ValueError("per_channel must have shape (iterations, K)")
        if self.per_channel.size and np.any(self.per_channel < 0):
            raise ValueError("relative errors are nonnegative")

    @property
    def mean(self) -> np.ndarray:
        """Per-iteration error averaged over the channels."""
        return self.per_channel.mean(axis=1)

    @property
    def iterations(self) -> int:
        return self.per_channel.shape[0]
