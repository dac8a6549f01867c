"""Iterative reconstruction driver.

One iteration propagates the object estimate to the sensor plane for every
mask, applies the per-pixel proximal channel update against the measured
total intensities, refreshes the scaled multipliers, forms the regularized
backward object estimate, and relaxes it toward the spectral filter output.
Multiplier updates and filtering stay disabled for a configurable warmup.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cube import SpectralGrid, read_cube, write_cube
from .denoise import FilterSpec, apply_filter, relax
from .masks import MaskSet
from .metrics import ErrorTrace, channel_errors, support_mask
from .optics import TransferFunctionSet
from .prox import gaussian_prox, poisson_prox

LAMBDA_TRIPWIRE = 1e6
DIVERGENCE_WINDOW = 50


@dataclass(frozen=True)
class SolverConfig:
    """All reconstruction tunables.

    gamma=None picks 1/mean(Z) at run start so the data and penalty terms
    start on comparable scales; gamma_decay < 1 applies a geometric schedule.
    `beta` may be a constant or a per-iteration sequence. `dual_residual`
    selects which residual drives the multiplier update: "spo" uses the
    proximal output against the current forward propagation, "post_update"
    recomputes the forward field from the freshly updated object.
    """

    iterations: int = 300
    gamma: float | None = None
    gamma_decay: float = 1.0
    reg: float = 1e-6
    beta: float | tuple[float, ...] = 0.5
    warmup: int = 50
    lagrange: bool = True
    dual_residual: str = "spo"
    noise_kind: str = "gaussian"
    sigma: float | None = None
    chi: float | None = None
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    init_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0.0 < self.gamma_decay <= 1.0:
            raise ValueError("gamma_decay must be in (0, 1]")
        if self.reg < 0:
            raise ValueError("reg must be nonnegative")
        for b in np.atleast_1d(np.asarray(self.beta, dtype=np.float64)):
            if not 0.0 < b <= 1.0:
                raise ValueError("beta values must be in (0, 1]")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        if self.warmup > 0 and self.warmup >= self.iterations:
            raise ValueError("warmup must be smaller than iterations")
        if self.dual_residual not in ("spo", "post_update"):
            raise ValueError("dual_residual must be 'spo' or 'post_update'")
        if self.noise_kind not in ("gaussian", "poisson", "none"):
            raise ValueError("noise_kind must be gaussian, poisson, or none")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def beta_at(self, s: int) -> float:
        if np.isscalar(self.beta):
            return float(self.beta)
        seq = tuple(np.atleast_1d(self.beta))
        return float(seq[min(s, len(seq) - 1)])

    def gamma_at(self, s: int, gamma0: float) -> float:
        return gamma0 * self.gamma_decay**s


@dataclass
class SolverState:
    u_o: np.ndarray  # (K, H, W) object estimate
    lam: np.ndarray  # (T, K, H, W) scaled multipliers
    iteration: int = 0
    degenerate_pixels: int = 0


def init_state(grid: SpectralGrid, t_count: int, seed: int) -> SolverState:
    """Random start: amplitude uniform on (0, 1], phase standard normal,
    independent per channel and pixel; multipliers start at zero."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 2])))
    shape = (grid.num_channels,) + grid.shape
    amp = 1.0 - rng.random(shape)  # uniform on (0, 1]
    phase = rng.standard_normal(shape)
    u_o = amp * np.exp(1j * phase)
    lam = np.zeros((t_count,) + shape, dtype=np.complex128)
    return SolverState(u_o=u_o, lam=lam)


def _prox_batch(v_flat, z_flat, gamma, config: SolverConfig):
    if config.noise_kind == "poisson":
        u, x, ndeg = poisson_prox(v_flat, z_flat, gamma, config.chi)
        return u, ndeg
    sigma = config.sigma if config.sigma is not None else 1.0
    u, _ = gaussian_prox(v_flat, z_flat, gamma, sigma)
    return u, 0


def _forward(u_o, masks: MaskSet, tfs: TransferFunctionSet, sl: slice) -> np.ndarray:
    return tfs.forward(masks.transmittances[sl] * u_o[None])


def _chunk_slices(t_count: int, n_chunks: int) -> list[slice]:
    bounds = np.linspace(0, t_count, n_chunks + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def backward_estimate(
    u_hat: np.ndarray,
    lam: np.ndarray,
    masks: MaskSet,
    tfs: TransferFunctionSet,
    reg: float,
) -> np.ndarray:
    """Regularized adjoint object estimate.

    numerator_k = sum_t conj(M_tk) * backward(u_hat_tk - lam_tk); the
    normal-operator denominator reduces to the per-pixel sum_t |M_tk|^2 + reg
    because the masks are phase-only and propagation is unitary on the
    working band.
    """
    denom = np.sum(np.abs(masks.transmittances) ** 2, axis=0) + reg
    if np.any(denom == 0):
        raise ValueError("zero denominator in backward estimate; set reg > 0")
    numer = np.sum(np.conj(masks.transmittances) * tfs.backward(u_hat - lam), axis=0)
    return numer / denom


def step(
    state: SolverState,
    z: np.ndarray,
    masks: MaskSet,
    tfs: TransferFunctionSet,
    config: SolverConfig,
    gamma: float,
    denom: np.ndarray | None = None,
) -> None:
    """One full sweep, mutating the state in place."""
    if not np.all(np.isfinite(state.u_o)) or not np.all(np.isfinite(state.lam)):
        raise FloatingPointError(
            f"non-finite solver state entering iteration {state.iteration + 1}"
        )
    t_count, k = masks.count, state.u_o.shape[0]
    h, w = state.u_o.shape[1:]
    warm = state.iteration < config.warmup
    if denom is None:
        denom = np.sum(np.abs(masks.transmittances) ** 2, axis=0) + config.reg
        if np.any(denom == 0):
            raise ValueError("zero denominator in backward estimate; set reg > 0")

    slices = _chunk_slices(t_count, min(t_count, 8))
    numer_parts: list[np.ndarray | None] = [None] * len(slices)
    u_hat_all = np.empty_like(state.lam) if config.dual_residual == "post_update" else None
    ndeg = [0] * len(slices)

    def work(i: int, sl: slice) -> None:
        u_t = _forward(state.u_o, masks, tfs, sl)  # (Tc, K, H, W)
        v = u_t + state.lam[sl]
        tc = v.shape[0]
        u_flat, nd = _prox_batch(
            np.moveaxis(v, 1, 0).reshape(k, tc * h * w),
            z[sl].reshape(tc * h * w),
            gamma,
            config,
        )
        ndeg[i] = nd
        u_hat = np.moveaxis(u_flat.reshape(k, tc, h, w), 0, 1)
        if config.lagrange and not warm and config.dual_residual == "spo":
            state.lam[sl] -= u_hat - u_t
        if u_hat_all is not None:
            u_hat_all[sl] = u_hat
        numer_parts[i] = np.sum(
            np.conj(masks.transmittances[sl]) * tfs.backward(u_hat - state.lam[sl]), axis=0
        )

    if config.workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(lambda args: work(*args), enumerate(slices)))
    else:
        for i, sl in enumerate(slices):
            work(i, sl)

    numer = numer_parts[0].copy()
    for part in numer_parts[1:]:
        numer += part
    u_o = numer / denom
    state.degenerate_pixels += sum(ndeg)

    if not warm:
        beta = config.beta_at(state.iteration)
        filtered = apply_filter(u_o, config.filter_spec)
        if filtered is not u_o:
            u_o = relax(u_o, filtered, beta)

    if config.lagrange and not warm and config.dual_residual == "post_update":
        for sl in slices:
            state.lam[sl] -= u_hat_all[sl] - _forward(u_o, masks, tfs, sl)

    state.u_o = u_o
    state.iteration += 1

    if not np.all(np.isfinite(state.u_o)) or not np.all(np.isfinite(state.lam)):
        raise FloatingPointError(
            f"non-finite solver state at iteration {state.iteration}"
        )
    lam_max = float(np.max(np.abs(state.lam))) if state.lam.size else 0.0
    if lam_max >= LAMBDA_TRIPWIRE:
        raise FloatingPointError(
            f"multiplier magnitude {lam_max:.3g} exceeds divergence tripwire "
            f"at iteration {state.iteration}"
        )


def _warn_if_diverging(mean_trace: list[float], warned: bool) -> bool:
    if warned or len(mean_trace) < DIVERGENCE_WINDOW + 1:
        return warned
    tail = mean_trace[-(DIVERGENCE_WINDOW + 1) :]
    if all(b > a for a, b in zip(tail, tail[1:])):
        warnings.warn(
            f"error trace increased for {DIVERGENCE_WINDOW} consecutive iterations",
            stacklevel=3,
        )
        return True
    return warned


@dataclass
class RunResult:
    u_o: np.ndarray
    trace: ErrorTrace | None
    state: SolverState


def run(
    config: SolverConfig,
    z: np.ndarray,
    masks: MaskSet,
    tfs: TransferFunctionSet,
    grid: SpectralGrid,
    truth: np.ndarray | None = None,
    error_mask: np.ndarray | None = None,
) -> RunResult:
    """Initialize and iterate; records a per-iteration error trace when the
    ground truth is supplied (restricted to its support unless a mask is
    given explicitly)."""
    if config.noise_kind == "poisson" and (config.chi is None or config.chi <= 0):
        raise ValueError("poisson reconstruction requires chi > 0")
    state = init_state(grid, masks.count, config.init_seed)
    if config.gamma is not None:
        gamma0 = config.gamma
    else:
        z_mean = float(np.mean(z))
        gamma0 = 1.0 / z_mean if z_mean > 0 else 1.0
    denom = np.sum(np.abs(masks.transmittances) ** 2, axis=0) + config.reg
    if np.any(denom == 0):
        raise ValueError("zero denominator in backward estimate; set reg > 0")

    if truth is not None and error_mask is None:
        error_mask = support_mask(truth)

    errors: list[np.ndarray] = []
    means: list[float] = []
    warned = False
    for s in range(config.iterations):
        step(state, z, masks, tfs, config, config.gamma_at(s, gamma0), denom)
        if truth is not None:
            err = channel_errors(state.u_o, truth, error_mask)
            errors.append(err)
            means.append(float(err.mean()))
            warned = _warn_if_diverging(means, warned)

    trace = ErrorTrace(np.asarray(errors)) if truth is not None and errors else None
    return RunResult(u_o=state.u_o, trace=trace, state=state)


def save_checkpoint(directory, state: SolverState, config_hash: str = "") -> None:
    """Dump solver state as cubes plus a small text header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    t, k, h, w = state.lam.shape
    write_cube(directory / "object.hsc1", state.u_o)
    write_cube(directory / "multipliers.hsc1", state.lam.reshape(t * k, h, w))
    header = (
        f"iteration={state.iteration}\n"
        f"experiments={t}\n"
        f"channels={k}\n"
        f"degenerate_pixels={state.degenerate_pixels}\n"
        f"config_hash={config_hash}\n"
    )
    (directory / "checkpoint.txt").write_text(header)


def load_checkpoint(directory) -> tuple[SolverState, dict[str, str]]:
    directory = Path(directory)
    meta: dict[str, str] = {}
    for line in (directory / "checkpoint.txt").read_text().splitlines():
        if "=" in line:
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
    u_o = read_cube(directory / "object.hsc1")
    lam_flat = read_cube(directory / "multipliers.hsc1")
    t = int(meta["experiments"])
    k = int(meta["channels"])
    lam = lam_flat.reshape(t, k, *lam_flat.shape[1:])
    state = SolverState(
        u_o=u_o,
        lam=lam,
        iteration=int(meta.get("iteration", 0)),
        degenerate_pixels=int(meta.get("degenerate_pixels", 0)),
    )
    return state, meta
