"""Experiment harness: scene synthesis, single runs, parameter sweeps, artifacts.

Every output directory carries a manifest sufficient to regenerate it; all
numeric artifacts are bitwise deterministic for a fixed (config, seed) on one
platform.
"""

from __future__ import annotations

import csv
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, manifest
from .cube import SpectralGrid, read_cube, read_real, uniform_band, write_cube, write_real
from .denoise import TRANSFORM_NAME, FilterSpec
from .masks import MaskSet, make_mask_set, save_thickness
from .optics import DispersionModel, make_transfer_functions, transmittance
from .phantoms import ObjectSpec, build_object_cube, write_pgm
from .sensing import NoiseSpec, observe
from .solver import SolverConfig, run

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description, mirroring the config-file keys."""

    # grid
    lambda_min_nm: float = 400.0
    lambda_max_nm: float = 700.0
    channels: int = 6
    size: int = 64
    pixel_pitch_um: float = 3.45
    distance_mm: float = 2.0
    pad_factor: int = 1
    # object
    amplitude: str = "blobs"
    phase: str = "shepp"
    frame: float = 0.25
    floor: float = 0.05
    # masks
    masks: int = 18
    cell_size: int = 1
    # noise
    noise: str = "gaussian"
    snr_db: float = 54.0
    # dispersion (Cauchy fit, lam in um)
    cauchy_b: float = 1.5046
    cauchy_c_um2: float = 0.00420
    cauchy_d_um4: float = 0.0
    # solver
    iters: int = 300
    gamma: float | None = None
    gamma_decay: float = 1.0
    reg: float = 1e-6
    beta: float = 0.5
    warmup: int = 50
    lagrange: bool = True
    dual_residual: str = "spo"
    filter: str = "svd"  # svd | identity
    rank: int | None = None
    threshold: float = 3.0
    patch: int = 8
    # run
    seed: int = 0
    workers: int = 1
    heatmaps: bool = False
    # sweeps (singletons mean "no sweep on this axis")
    sweep_channels: tuple[int, ...] = ()
    sweep_masks: tuple[int, ...] = ()
    sweep_snr_db: tuple[float, ...] = ()

    def grid(self) -> SpectralGrid:
        return SpectralGrid(
            uniform_band(self.lambda_min_nm * 1e-9, self.lambda_max_nm * 1e-9, self.channels),
            self.pixel_pitch_um * 1e-6,
            self.size,
            self.size,
            self.distance_mm * 1e-3,
        )

    def dispersion(self) -> DispersionModel:
        return DispersionModel(self.cauchy_b, self.cauchy_c_um2, self.cauchy_d_um4)

    def object_spec(self) -> ObjectSpec:
        return ObjectSpec(
            amplitude=self.amplitude,
            phase=self.phase,
            size=self.size,
            frame=self.frame,
            floor=self.floor,
            seed=self.seed,
        )

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.noise, self.snr_db, seed=self.seed + 1)

    def filter_spec(self) -> FilterSpec:
        kind = "spectral_svd" if self.filter == "svd" else "identity"
        return FilterSpec(kind=kind, rank=self.rank, threshold=self.threshold, patch=self.patch)

    def solver_config(self, noise_info: dict) -> SolverConfig:
        return SolverConfig(
            iterations=self.iters,
            gamma=self.gamma,
            gamma_decay=self.gamma_decay,
            reg=self.reg,
            beta=self.beta,
            warmup=self.warmup,
            lagrange=self.lagrange,
            dual_residual=self.dual_residual,
            noise_kind=self.noise,
            sigma=noise_info.get("sigma"),
            chi=noise_info.get("chi"),
            filter_spec=self.filter_spec(),
            init_seed=self.seed + 2,
            workers=self.workers,
        )

    def to_sections(self) -> dict[str, dict[str, object]]:
        sections: dict[str, dict[str, object]] = {
            "grid": {}, "object": {}, "masks": {}, "noise": {}, "dispersion": {},
            "solver": {}, "run": {}, "sweep": {},
        }
        groups = {
            "grid": ("lambda_min_nm", "lambda_max_nm", "channels", "size",
                     "pixel_pitch_um", "distance_mm", "pad_factor"),
            "object": ("amplitude", "phase", "frame", "floor"),
            "masks": ("masks", "cell_size"),
            "noise": ("noise", "snr_db"),
            "dispersion": ("cauchy_b", "cauchy_c_um2", "cauchy_d_um4"),
            "solver": ("iters", "gamma", "gamma_decay", "reg", "beta", "warmup",
                       "lagrange", "dual_residual", "filter", "rank", "threshold", "patch"),
            "run": ("seed", "workers", "heatmaps"),
            "sweep": ("sweep_channels", "sweep_masks", "sweep_snr_db"),
        }
        for section, keys in groups.items():
            for key in keys:
                val = getattr(self, key)
                sections[section][key] = "auto" if val is None else val
        return sections


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_INT_KEYS = {"channels", "size", "pad_factor", "masks", "cell_size", "iters",
             "warmup", "patch", "seed", "workers"}
_FLOAT_KEYS = {"lambda_min_nm", "lambda_max_nm", "pixel_pitch_um", "distance_mm",
               "frame", "floor", "snr_db", "cauchy_b", "cauchy_c_um2", "cauchy_d_um4",
               "gamma_decay", "reg", "beta", "threshold"}
_BOOL_KEYS = {"lagrange", "heatmaps"}
_OPTIONAL_KEYS = {"gamma": float, "rank": int}


def _parse_value(key: str, text: str):
    text = text.strip()
    if key in _OPTIONAL_KEYS:
        return None if text in ("auto", "", "none") else _OPTIONAL_KEYS[key](text)
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _BOOL_KEYS:
        return manifest.parse_bool(text)
    if key == "sweep_channels" or key == "sweep_masks":
        return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()
    if key == "sweep_snr_db":
        return tuple(float(v) for v in text.split(",") if v.strip()) if text else ()
    return text


_CONFIG_SECTIONS = ("grid", "object", "masks", "noise", "dispersion", "solver", "run", "sweep")


def config_from_file(path) -> ExperimentConfig:
    sections = manifest.read_manifest(path)
    values: dict[str, object] = {}
    known = set(_FIELD_TYPES)
    for name in _CONFIG_SECTIONS:
        for key, text in sections.get(name, {}).items():
            if key in known:
                values[key] = _parse_value(key, text)
    return ExperimentConfig(**values)


def config_to_file(path, config: ExperimentConfig) -> None:
    manifest.write_manifest(path, config.to_sections())


@dataclass
class CellResult:
    channel_errors: np.ndarray  # (K,) final per-channel error
    mean_error: float
    trace_per_channel: np.ndarray  # (iters, K)
    u_o: np.ndarray
    noise_info: dict
    wavelengths: tuple[float, ...]


@dataclass
class Scene:
    grid: SpectralGrid
    model: DispersionModel
    truth: np.ndarray
    masks: MaskSet
    tfs: object
    z: np.ndarray
    noise_info: dict


def build_scene(config: ExperimentConfig) -> Scene:
    grid = config.grid()
    model = config.dispersion()
    truth = build_object_cube(config.object_spec(), grid, model)
    tfs = make_transfer_functions(grid, pad_factor=config.pad_factor)
    masks = make_mask_set(config.seed, config.masks, grid, model, config.cell_size)
    z, noise_info = observe(truth, masks, tfs, config.noise_spec())
    return Scene(grid, model, truth, masks, tfs, z, noise_info)


def run_cell(config: ExperimentConfig) -> CellResult:
    """Synthesize a scene from the config and reconstruct it."""
    scene = build_scene(config)
    solver_cfg = config.solver_config(scene.noise_info)
    result = run(solver_cfg, scene.z, scene.masks, scene.tfs, scene.grid, truth=scene.truth)
    trace = result.trace.per_channel if result.trace is not None else np.zeros((0, scene.grid.num_channels))
    final = trace[-1] if len(trace) else np.full(scene.grid.num_channels, np.nan)
    return CellResult(
        channel_errors=final,
        mean_error=float(final.mean()),
        trace_per_channel=trace,
        u_o=result.u_o,
        noise_info=scene.noise_info,
        wavelengths=scene.grid.wavelengths,
    )


def _write_trace_csv(path, trace: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "channel", "error", "mean"])
        for s in range(trace.shape[0]):
            mean = repr(float(trace[s].mean()))
            for k in range(trace.shape[1]):
                writer.writerow([s + 1, k, repr(float(trace[s, k])), mean])


def _write_channel_images(out_dir: Path, u_o: np.ndarray, man: dict) -> None:
    for k in range(u_o.shape[0]):
        amp = np.abs(u_o[k])
        lo, hi = float(amp.min()), float(amp.max())
        write_pgm(out_dir / f"amplitude_ch{k}.pgm", amp, vmin=lo, vmax=hi)
        man[f"amplitude_ch{k}_range"] = (lo, hi)
        write_pgm(out_dir / f"phase_ch{k}.pgm", np.angle(u_o[k]), vmin=-np.pi, vmax=np.pi)
    man["phase_range"] = (-np.pi, np.pi)


def _prepare_out_dir(out_dir: Path, force: bool) -> bool:
    """Returns True if this call created the directory."""
    marker = out_dir / "manifest.txt"
    if marker.exists() and not force:
        raise FileExistsError(
            f"{out_dir} already holds a manifest; pass --force to overwrite"
        )
    created = not out_dir.exists()
    out_dir.mkdir(parents=True, exist_ok=True)
    return created


def _run_manifest(config: ExperimentConfig, extra: dict[str, dict[str, object]]) -> dict:
    sections = config.to_sections()
    sections["provenance"] = {
        "code_version": __version__,
        "config_hash": manifest.config_hash(config.to_sections()),
        "filter_transform": TRANSFORM_NAME,
    }
    sections.update(extra)
    return sections


def _cleanup_failed(out_dir: Path, created: bool, written: list[Path]) -> None:
    if created:
        shutil.rmtree(out_dir, ignore_errors=True)
        return
    for path in written:
        path.unlink(missing_ok=True)


def run_single(config: ExperimentConfig, out_dir, force: bool = False) -> Path:
    """Full single experiment: synthesize, reconstruct, write all artifacts."""
    out_dir = Path(out_dir)
    created = _prepare_out_dir(out_dir, force)
    written: list[Path] = []
    try:
        scene = build_scene(config)
        solver_cfg = config.solver_config(scene.noise_info)
        result = run(solver_cfg, scene.z, scene.masks, scene.tfs, scene.grid, truth=scene.truth)

        def out(name: str) -> Path:
            path = out_dir / name
            written.append(path)
            return path

        write_cube(out("reconstruction.hsc1"), result.u_o)
        write_cube(out("truth.hsc1"), scene.truth)
        write_real(out("observations.hsr1"), scene.z)
        save_thickness(out("mask_thickness.hsr1"), scene.masks)
        if result.trace is not None:
            _write_trace_csv(out("trace.csv"), result.trace.per_channel)
        image_meta: dict[str, object] = {}
        k_count = result.u_o.shape[0]
        _write_channel_images(out_dir, result.u_o, image_meta)
        written += [out_dir / f"amplitude_ch{k}.pgm" for k in range(k_count)]
        written += [out_dir / f"phase_ch{k}.pgm" for k in range(k_count)]

        final = result.trace.per_channel[-1] if result.trace is not None else []
        sections = _run_manifest(config, {
            "calibration": dict(scene.noise_info),
            "results": {
                "final_mean_error": float(np.mean(final)) if len(final) else "n/a",
                "final_channel_errors": [float(e) for e in final],
                "wavelengths_nm": [w * 1e9 for w in scene.grid.wavelengths],
                "degenerate_pixels": result.state.degenerate_pixels,
            },
            "images": image_meta,
        })
        manifest.write_manifest(out("manifest.txt"), sections)
    except BaseException:
        _cleanup_failed(out_dir, created, written)
        raise
    return out_dir


def simulate(config: ExperimentConfig, out_dir, force: bool = False) -> Path:
    """Synthesize observations only, with everything needed to reconstruct."""
    out_dir = Path(out_dir)
    created = _prepare_out_dir(out_dir, force)
    written: list[Path] = []
    try:
        scene = build_scene(config)

        def out(name: str) -> Path:
            path = out_dir / name
            written.append(path)
            return path

        write_real(out("observations.hsr1"), scene.z)
        save_thickness(out("mask_thickness.hsr1"), scene.masks)
        write_cube(out("truth.hsc1"), scene.truth)
        sections = _run_manifest(config, {"calibration": dict(scene.noise_info)})
        manifest.write_manifest(out("manifest.txt"), sections)
    except BaseException:
        _cleanup_failed(out_dir, created, written)
        raise
    return out_dir


def reconstruct_from(obs_dir, config: ExperimentConfig, out_dir, force: bool = False) -> Path:
    """Run the solver on previously simulated observations."""
    obs_dir = Path(obs_dir)
    stored = config_from_file(obs_dir / "manifest.txt")
    sidecar = manifest.read_manifest(obs_dir / "manifest.txt")
    # Scene geometry comes from the observation record; solver knobs from `config`.
    merged = replace(
        stored,
        iters=config.iters, gamma=config.gamma, gamma_decay=config.gamma_decay,
        reg=config.reg, beta=config.beta, warmup=config.warmup,
        lagrange=config.lagrange, dual_residual=config.dual_residual,
        filter=config.filter, rank=config.rank, threshold=config.threshold,
        patch=config.patch, workers=config.workers,
    )
    grid = merged.grid()
    model = merged.dispersion()
    z = read_real(obs_dir / "observations.hsr1")
    thickness = read_real(obs_dir / "mask_thickness.hsr1")
    ones = np.ones(grid.shape)
    trans = np.stack([
        np.stack([transmittance(ones, th, lam, model) for lam in grid.wavelengths])
        for th in thickness
    ])
    masks = MaskSet(thickness=thickness, transmittances=trans,
                    cell_size=merged.cell_size, seed=merged.seed)
    tfs = make_transfer_functions(grid, pad_factor=merged.pad_factor)
    truth_path = obs_dir / "truth.hsc1"
    truth = read_cube(truth_path) if truth_path.exists() else None

    noise_info: dict[str, object] = {}
    calib = sidecar.get("calibration", {})
    if "sigma" in calib:
        noise_info["sigma"] = float(calib["sigma"])
    if "chi" in calib:
        noise_info["chi"] = float(calib["chi"])

    out_dir = Path(out_dir)
    created = _prepare_out_dir(out_dir, force)
    written: list[Path] = []
    try:
        solver_cfg = merged.solver_config(noise_info)
        result = run(solver_cfg, z, masks, tfs, grid, truth=truth)

        def out(name: str) -> Path:
            path = out_dir / name
            written.append(path)
            return path

        write_cube(out("reconstruction.hsc1"), result.u_o)
        if result.trace is not None:
            _write_trace_csv(out("trace.csv"), result.trace.per_channel)
        image_meta: dict[str, object] = {}
        _write_channel_images(out_dir, result.u_o, image_meta)
        written += [out_dir / f"amplitude_ch{k}.pgm" for k in range(result.u_o.shape[0])]
        written += [out_dir / f"phase_ch{k}.pgm" for k in range(result.u_o.shape[0])]
        final = result.trace.per_channel[-1] if result.trace is not None else []
        sections = _run_manifest(merged, {
            "calibration": {k: v for k, v in calib.items()},
            "results": {
                "final_mean_error": float(np.mean(final)) if len(final) else "n/a",
                "observations": str(obs_dir),
            },
            "images": image_meta,
        })
        manifest.write_manifest(out("manifest.txt"), sections)
    except BaseException:
        _cleanup_failed(out_dir, created, written)
        raise
    return out_dir


def _cell_worker(config: ExperimentConfig) -> tuple[float, list[float], np.ndarray]:
    res = run_cell(config)
    return res.mean_error, [float(e) for e in res.channel_errors], res.trace_per_channel


def _write_matrix_csv(path, corner: str, col_labels, row_labels, matrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([corner] + [manifest.format_value(c) for c in col_labels])
        for label, row in zip(row_labels, matrix):
            writer.writerow(
                [manifest.format_value(label)]
                + [repr(float(v)) if np.isfinite(v) else "nan" for v in row]
            )


def run_sweep(config: ExperimentConfig, out_dir, force: bool = False) -> Path:
    """Sweep (channels x masks) or an SNR list, writing table artifacts.

    Cell failures are recorded as NaN and the sweep continues. With an SNR
    sweep the final per-wavelength errors and the per-iteration mean-error
    traces are emitted as (snr x lambda) and (snr x iteration) matrices,
    mirroring the single-run layouts.
    """
    out_dir = Path(out_dir)
    created = _prepare_out_dir(out_dir, force)
    written: list[Path] = []

    snr_sweep = len(config.sweep_snr_db) > 0
    k_list = list(config.sweep_channels) or [config.channels]
    t_list = list(config.sweep_masks) or [config.masks]
    snr_list = list(config.sweep_snr_db) or [config.snr_db]
    if snr_sweep and (len(k_list) > 1 or len(t_list) > 1):
        raise ValueError("sweep either (channels, masks) or snr_db, not both")

    cells: list[ExperimentConfig] = []
    labels: list[tuple] = []
    if snr_sweep:
        for snr in snr_list:
            cells.append(replace(config, snr_db=snr, channels=k_list[0], masks=t_list[0],
                                 sweep_channels=(), sweep_masks=(), sweep_snr_db=()))
            labels.append((snr,))
    else:
        for k in k_list:
            for t in t_list:
                cells.append(replace(config, channels=k, masks=t,
                                     sweep_channels=(), sweep_masks=(), sweep_snr_db=()))
                labels.append((k, t))

    results: list[tuple[float, list[float], np.ndarray] | None] = [None] * len(cells)
    try:
        if config.workers > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_cell_worker, c) for c in cells]
                for i, fut in enumerate(futures):
                    try:
                        results[i] = fut.result()
                    except Exception:
                        log.exception("sweep cell %s failed", labels[i])
        else:
            for i, cell in enumerate(cells):
                try:
                    results[i] = _cell_worker(cell)
                except Exception:
                    log.exception("sweep cell %s failed", labels[i])

        def out(name: str) -> Path:
            path = out_dir / name
            written.append(path)
            return path

        heat_meta: dict[str, object] = {}
        if snr_sweep:
            k = cells[0].channels
            iters = config.iters
            wl_nm = [w * 1e9 for w in cells[0].grid().wavelengths]
            final_mat = np.full((len(snr_list), k), np.nan)
            iter_mat = np.full((len(snr_list), iters), np.nan)
            for i, res in enumerate(results):
                if res is None:
                    continue
                _, channel_err, trace = res
                final_mat[i] = channel_err
                iter_mat[i] = trace.mean(axis=1)
            _write_matrix_csv(out("sweep_snr_wavelength.csv"), "snr_db\\lambda_nm",
                              wl_nm, snr_list, final_mat)
            _write_matrix_csv(out("sweep_snr_iteration.csv"), "snr_db\\iteration",
                              list(range(1, iters + 1)), snr_list, iter_mat)
            matrices = {"sweep_snr_wavelength": final_mat, "sweep_snr_iteration": iter_mat}
        else:
            table = np.full((len(k_list), len(t_list)), np.nan)
            for (idx, res), (kk, tt) in zip(enumerate(results), labels):
                if res is None:
                    continue
                table[k_list.index(kk), t_list.index(tt)] = res[0]
            _write_matrix_csv(out("sweep_kt.csv"), "K\\T", t_list, k_list, table)
            matrices = {"sweep_kt": table}

        if config.heatmaps:
            for name, mat in matrices.items():
                finite = mat[np.isfinite(mat)]
                lo = float(finite.min()) if finite.size else 0.0
                hi = float(finite.max()) if finite.size else 1.0
                write_pgm(out(f"{name}.pgm"), np.nan_to_num(mat, nan=hi), vmin=lo, vmax=hi)
                heat_meta[f"{name}_range"] = (lo, hi)
                heat_meta[f"{name}_colormap"] = "grayscale-linear"

        sections = _run_manifest(config, {
            "sweep_cells": {
                f"cell_{i}": list(lab) + (["nan"] if results[i] is None else [results[i][0]])
                for i, lab in enumerate(labels)
            },
            "heatmaps": heat_meta,
        })
        manifest.write_manifest(out("manifest.txt"), sections)
    except BaseException:
        _cleanup_failed(out_dir, created, written)
        raise
    return out_dir
