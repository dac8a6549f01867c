"""Pluggable complex-domain regularizing filters for the object-update step.

The working filter projects the cube onto its leading spectral subspace
(SVD across channels) and hard-thresholds each retained eigenimage in a
sliding-window orthogonal block transform. An identity filter is provided
for ablation runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

TRANSFORM_NAME = "dct2-ortho"
# Gaussian consistency constant for the median absolute deviation.
MAD_SCALE = 0.6744897501960817


@dataclass(frozen=True)
class FilterSpec:
    """Filter choice and parameters, surfaced in configs and manifests.

    rank=None selects the smallest subspace holding at least energy_fraction
    of the squared singular-value mass.
    """

    kind: str = "spectral_svd"  # spectral_svd | identity
    rank: int | None = None
    threshold: float = 3.0
    patch: int = 8
    energy_fraction: float = 0.995

    def __post_init__(self):
        if self.kind not in ("spectral_svd", "identity"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if self.patch < 1:
            raise ValueError("patch must be >= 1")


def relax(old: np.ndarray, filtered: np.ndarray, beta: float) -> np.ndarray:
    """Convex combination (1 - beta)*old + beta*filtered, elementwise."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must be in (0, 1]")
    return (1.0 - beta) * old + beta * filtered


def _dct2(blocks: np.ndarray) -> np.ndarray:
    out = scipy.fft.dct(blocks, axis=-1, norm="ortho")
    return scipy.fft.dct(out, axis=-2, norm="ortho")


def _idct2(blocks: np.ndarray) -> np.ndarray:
    out = scipy.fft.idct(blocks, axis=-1, norm="ortho")
    return scipy.fft.idct(out, axis=-2, norm="ortho")


def _threshold_eigenimage(img: np.ndarray, patch: int, threshold: float) -> np.ndarray:
    """Sliding-window DCT hard threshold with periodic patch positions.

    Every pixel is covered by exactly patch^2 windows, so the aggregate of
    per-patch orthogonal shrinkage never increases the image energy.
    """
    h, w = img.shape
    p = min(patch, h, w)
    if p <= 1:
        return img.copy()
    # All cyclic patch positions, gathered as (h*w, p, p).
    wrapped = np.pad(img, ((0, p - 1), (0, p - 1)), mode="wrap")
    patches = np.lib.stride_tricks.sliding_window_view(wrapped, (p, p)).reshape(h * w, p, p)
    coefs = _dct2(patches)
    ac = np.abs(coefs).reshape(h * w, -1)[:, 1:]
    scale = np.median(ac) / MAD_SCALE
    keep = np.abs(coefs) >= threshold * scale
    keep[:, 0, 0] = True  # DC carries the patch mean, never thresholded
    est = _idct2(np.where(keep, coefs, 0.0))
    # Scatter-add the patch estimates back at their cyclic offsets.
    out = np.zeros((h, w), dtype=np.complex128)
    est = est.reshape(h, w, p, p)
    for dy in range(p):
        rows = np.roll(est[:, :, dy, :], dy, axis=0)
        for dx in range(p):
            out += np.roll(rows[:, :, dx], dx, axis=1)
    return out / (p * p)


def spectral_svd_filter(cube: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Spectral-subspace projection plus per-eigenimage block thresholding.

    The cube is flattened to a (K, H*W) matrix and decomposed; the leading
    components are kept, each eigenimage is denoised by the sliding-window
    hard threshold, and the cube is rebuilt in place of the original.
    """
    cube = np.asarray(cube, dtype=np.complex128)
    k, h, w = cube.shape
    mat = cube.reshape(k, h * w)
    u, s, vt = np.linalg.svd(mat, full_matrices=False)

    if spec.rank is not None:
        r = min(spec.rank, len(s))
    else:
        mass = np.cumsum(s**2)
        total = mass[-1]
        if total == 0:
            return cube.copy()
        r = int(np.searchsorted(mass, spec.energy_fraction * total) + 1)
        r = min(r, len(s))

    if spec.threshold > 0:
        eig = np.empty((r, h * w), dtype=np.complex128)
        for i in range(r):
            eig[i] = _threshold_eigenimage(
                vt[i].reshape(h, w), spec.patch, spec.threshold
            ).ravel()
    else:
        eig = vt[:r]
    rebuilt = (u[:, :r] * s[:r]) @ eig
    return rebuilt.reshape(k, h, w)


def apply_filter(cube: np.ndarray, spec: FilterSpec) -> np.ndarray:
    if spec.kind == "identity":
        return cube
    return spectral_svd_filter(cube, spec)
