"""Independent oracles shared by the unit and acceptance tests.

Everything here is deliberately written against the math, not the library
internals: ray criteria are evaluated directly, minima are located by grid
scan plus golden-section refinement, and polynomial roots come from the
companion matrix (np.roots).
"""

from __future__ import annotations

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def ray_criterion(kind: str, s, q, z, gamma, noise_param):
    """Penalized objective restricted to nonnegative multiples of v.

    With u = s*v/sqrt(q) the channel sum is s^2 and the quadratic penalty
    collapses to (s - sqrt(q))^2. Broadcasts over instances and grid points.
    """
    s = np.asarray(s, dtype=np.float64)
    pen = (s - np.sqrt(q)) ** 2 / gamma
    if kind == "gaussian":
        return (z - s**2) ** 2 / noise_param**2 + pen
    if kind == "poisson":
        sp = np.maximum(s, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            loglik = noise_param * sp**2 - z * np.log(sp**2 * noise_param)
        loglik = np.where(np.asarray(z) == 0, noise_param * sp**2, loglik)
        return loglik + pen
    raise ValueError(kind)


def _golden_minimize(fun, lo, hi, iters: int = 90):
    """Vectorized golden-section search on per-instance brackets."""
    lo = np.asarray(lo, dtype=np.float64).copy()
    hi = np.asarray(hi, dtype=np.float64).copy()
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        shrink_right = f1 < f2
        hi = np.where(shrink_right, x2, hi)
        lo = np.where(shrink_right, lo, x1)
        x1 = hi - GOLDEN * (hi - lo)
        x2 = lo + GOLDEN * (hi - lo)
        f1, f2 = fun(x1), fun(x2)
    xs = 0.5 * (lo + hi)
    return np.minimum(fun(xs), np.minimum(f1, f2))


def grid_oracle(kind: str, q, z, gamma, noise_param, points: int = 100_000):
    """Minimum ray-criterion value by dense grid scan plus golden refinement.

    The ray criterion is unimodal on s > 0 (its stationarity condition has a
    single positive root by Descartes' rule), so refining the best grid cell
    loses nothing. All of `q`, `z`, `gamma`, `noise_param` may be arrays.
    """
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    z = np.broadcast_to(np.asarray(z, dtype=np.float64), q.shape)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), q.shape)
    par = np.broadcast_to(np.asarray(noise_param, dtype=np.float64), q.shape)

    if kind == "gaussian":
        # For z > 0 both terms push down above max(sqrt(z), sqrt(q)).
        smax = 3.0 * np.sqrt(np.maximum(np.maximum(z, q), 1e-300))
    else:
        # Stationarity bound: the minimizer solves a quadratic in s whose
        # positive root this caps; pad it and keep the generic floor.
        coef = par + 1.0 / gamma
        s_up = (np.sqrt(q) / gamma + np.sqrt(q / gamma**2 + 4.0 * coef * z)) / (2.0 * coef)
        smax = 1.5 * np.maximum(s_up, 3.0 * np.sqrt(np.maximum(np.maximum(z, q), 1e-300)))

    n = q.shape[0]
    best_idx = np.empty(n, dtype=np.int64)
    best_val = np.empty(n)
    grid = np.linspace(0.0, 1.0, points)
    chunk = max(1, int(2e7 / points))
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        s = smax[a:b, None] * grid[None, :]
        vals = ray_criterion(
            kind, s, q[a:b, None], z[a:b, None], gamma[a:b, None], par[a:b, None]
        )
        idx = np.argmin(vals, axis=1)
        best_idx[a:b] = idx
        best_val[a:b] = np.take_along_axis(vals, idx[:, None], axis=1)[:, 0]

    cell = smax / (points - 1)
    lo = np.maximum((best_idx - 1) * cell, 0.0)
    hi = np.minimum((best_idx + 1) * cell, smax)
    refined = _golden_minimize(lambda s: ray_criterion(kind, s, q, z, gamma, par), lo, hi)
    result = np.minimum(best_val, refined)
    return result if result.size > 1 else float(result[0])


def companion_roots(coeffs) -> np.ndarray:
    """All (complex) roots via the companion-matrix eigenvalues."""
    return np.roots(coeffs)


def naive_forward_intensity(u_o, mask_tk, wavelengths, pitch, distance):
    """Straight-line channel-by-channel reimplementation of one observation.

    mask_tk: (K, H, W) complex transmittances of one mask.
    """
    h, w = u_o.shape[1:]
    total = np.zeros((h, w))
    for k, lam in enumerate(wavelengths):
        fy = np.fft.fftfreq(h, d=pitch)
        fx = np.fft.fftfreq(w, d=pitch)
        fyy, fxx = np.meshgrid(fy, fx, indexing="ij")
        s2 = (lam * fxx) ** 2 + (lam * fyy) ** 2
        kwave = 2.0 * np.pi / lam
        tf = np.where(s2 <= 1.0, np.exp(1j * kwave * distance * np.sqrt(np.maximum(1 - s2, 0.0))), 0)
        field = np.fft.ifft2(tf * np.fft.fft2(mask_tk[k] * u_o[k], norm="ortho"), norm="ortho")
        total += np.abs(field) ** 2
    return total
