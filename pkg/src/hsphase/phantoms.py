"""Synthetic test objects, image ingestion, and PGM I/O.

Ground-truth cubes are built from an amplitude image in (0, 1] and a
spatially varying, spectrally invariant thickness map derived from a phase
image, embedded in a zero frame so the object support is strictly inside
the simulated grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import SpectralGrid
from .optics import DispersionModel, transmittance

PHANTOM_KINDS = ("blobs", "checker", "shepp")

# Shepp-Logan head phantom: (value, a, b, x0, y0, angle_deg) per ellipse.
_SHEPP_ELLIPSES = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def _blobs(size: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0])))
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.zeros((size, size))
    for _ in range(10):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        sy, sx = rng.uniform(0.04, 0.25, size=2)
        amp = rng.uniform(0.3, 1.0)
        img += amp * np.exp(-((yy - cy) ** 2 / (2 * sy**2) + (xx - cx) ** 2 / (2 * sx**2)))
    img -= img.min()
    return img / img.max()


def _checker(size: int) -> np.ndarray:
    cell = max(size // 8, 1)
    yy, xx = np.mgrid[0:size, 0:size]
    odd = ((yy // cell) + (xx // cell)) % 2
    return np.where(odd == 1, 1.0, 0.05)


def _shepp(size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    # Image coordinates in [-1, 1] with y up.
    x = (2 * xx - (size - 1)) / (size - 1)
    y = ((size - 1) - 2 * yy) / (size - 1)
    img = np.zeros((size, size))
    for val, a, b, x0, y0, ang in _SHEPP_ELLIPSES:
        th = np.deg2rad(ang)
        xr = (x - x0) * np.cos(th) + (y - y0) * np.sin(th)
        yr = -(x - x0) * np.sin(th) + (y - y0) * np.cos(th)
        img += val * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    img -= img.min()
    return img / img.max()


def make_phantom(kind: str, size: int, seed: int = 0) -> np.ndarray:
    """Deterministic grayscale test image in [0, 1] with smooth areas and edges."""
    if size < 8:
        raise ValueError("size must be >= 8")
    if kind == "blobs":
        return _blobs(size, seed)
    if kind == "checker":
        return _checker(size)
    if kind == "shepp":
        return _shepp(size)
    raise ValueError(f"unknown phantom kind {kind!r}; choose from {PHANTOM_KINDS}")


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary PGM (P5) into a uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=pos)
    if pixels.size != h * w:
        raise ValueError(f"{path}: truncated PGM payload")
    return pixels.reshape(h, w).copy()


def write_pgm(path, img: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> None:
    """Write an image as 8-bit binary PGM, linearly mapping [vmin, vmax] to 0..255."""
    img = np.asarray(img)
    if img.dtype == np.uint8 and vmin is None and vmax is None:
        data = img
    else:
        img = img.astype(np.float64)
        lo = float(img.min()) if vmin is None else vmin
        hi = float(img.max()) if vmax is None else vmax
        span = hi - lo if hi > lo else 1.0
        data = np.clip(np.rint((img - lo) / span * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(data).tobytes())


def _area_weights(src: int, dst: int) -> np.ndarray:
    """Row-stochastic matrix averaging src samples into dst area-weighted bins."""
    w = np.zeros((dst, src))
    ratio = src / dst
    for i in range(dst):
        lo, hi = i * ratio, (i + 1) * ratio
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, src)):
            w[i, j] = min(hi, j + 1) - max(lo, j)
    return w / ratio


def area_resample(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample by exact area averaging (block means for integer ratios)."""
    wh = _area_weights(img.shape[0], out_h)
    ww = _area_weights(img.shape[1], out_w)
    return wh @ img @ ww.T


def load_image(path, size: int) -> np.ndarray:
    """Load an 8-bit grayscale image, normalize to [0, 1], resample to size.

    PGM (P5) is read natively; other formats go through Pillow when present.
    """
    path = str(path)
    if path.lower().endswith(".pgm"):
        raw = read_pgm(path).astype(np.float64)
    else:
        try:
            from PIL import Image
        except ImportError as exc:
            raise ValueError(f"cannot read {path}: only PGM supported without Pillow") from exc
        try:
            with Image.open(path) as im:
                raw = np.asarray(im.convert("L"), dtype=np.float64)
        except Exception as exc:
            raise ValueError(f"cannot read image {path}: {exc}") from exc
    img = raw / 255.0
    if img.shape != (size, size):
        img = area_resample(img, size, size)
    return np.clip(img, 0.0, 1.0)


@dataclass(frozen=True)
class ObjectSpec:
    """Sources and scaling for the ground-truth amplitude and phase.

    amplitude/phase name a phantom kind or a file path (detected by the
    presence of a path separator or file suffix). The object occupies the
    central region of the grid, surrounded by a zero frame of `frame`
    fraction per side; the reconstruction is never told this support.
    """

    amplitude: str = "blobs"
    phase: str = "shepp"
    size: int = 64
    frame: float = 0.25
    floor: float = 0.05
    phase_peak: float = np.pi
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.frame < 0.5:
            raise ValueError("frame fraction must be in [0, 0.5)")
        if not 0.0 < self.floor <= 1.0:
            raise ValueError("amplitude floor must be in (0, 1]")
        if not 0.0 <= self.phase_peak <= np.pi:
            raise ValueError("peak phase delay must be in [0, pi]")


def _source_image(source: str, size: int, seed: int) -> np.ndarray:
    if source in PHANTOM_KINDS:
        return make_phantom(source, size, seed)
    return load_image(source, size)


def thickness_for_phase(
    phase_img: np.ndarray, lam_min: float, model: DispersionModel, peak: float = np.pi
) -> np.ndarray:
    """Invert a target phase-delay image to a physical thickness map.

    Scales so the largest delay equals `peak` at lam_min, where the delay
    (2*pi/lam)*h*(n(lam)-1) is largest; all longer wavelengths then stay
    within [0, peak].
    """
    top = float(np.max(phase_img))
    if top <= 0:
        return np.zeros_like(phase_img)
    target = peak * phase_img / top
    n_min = model.index(lam_min)
    return target * lam_min / (2.0 * np.pi * (n_min - 1.0))


def build_object_cube(
    spec: ObjectSpec, grid: SpectralGrid, model: DispersionModel
) -> np.ndarray:
    """Ground-truth (K, H, W) cube of per-wavelength complex transmittances."""
    if grid.shape != (spec.size, spec.size):
        raise ValueError("object size must match the grid")
    inner = spec.size - 2 * int(round(spec.frame * spec.size))
    amp_img = np.maximum(_source_image(spec.amplitude, inner, spec.seed), spec.floor)
    phase_img = _source_image(spec.phase, inner, spec.seed + 1)

    amp = np.zeros(grid.shape)
    h_map = np.zeros(grid.shape)
    off = (spec.size - inner) // 2
    amp[off : off + inner, off : off + inner] = amp_img
    lam_min = grid.wavelengths[0]
    h_map[off : off + inner, off : off + inner] = thickness_for_phase(
        phase_img, lam_min, model, spec.phase_peak
    )

    cube = np.stack([transmittance(amp, h_map, lam, model) for lam in grid.wavelengths])
    return cube
