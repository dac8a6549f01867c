"""Closed-form per-pixel updates of the sensor-plane spectral channels.

One total-intensity observation z couples all K channels of a pixel. The
penalized likelihood is minimized jointly over the channels; the stationarity
conditions collapse to one real polynomial per pixel (cubic for Gaussian
noise, quadratic for Poisson counts) whose root fixes a common positive
scaling of the input channel vector v.

All functions accept a single pixel (v of shape (K,), scalar z) or a batch
(v of shape (K, N), z of shape (N,)) and are fully vectorized over N.
"""

from __future__ import annotations

import warnings

import numpy as np

# Roots in (-ROOT_CLAMP, 0) are floating-point noise at the x=0 boundary.
ROOT_CLAMP = 1e-12
# Ties in the selection criterion within this relative margin resolve to the
# larger root, keeping the selection deterministic.
TIE_REL = 1e-12


def _cbrt(x: np.ndarray) -> np.ndarray:
    return np.cbrt(x)


def _newton_polish(roots: np.ndarray, a, b, c, d, steps: int = 12) -> np.ndarray:
    """Newton-refine roots of a*x^3 + b*x^2 + c*x + d (NaN passes through).

    Iterated until stationary so closed-form roots corrupted by the depressed
    transform (widely scaled coefficients) are pulled back onto the curve.
    """
    x = roots
    for _ in range(steps):
        f = ((a * x + b) * x + c) * x + d
        fp = (3.0 * a * x + 2.0 * b) * x + c
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(np.abs(fp) > 0, f / fp, 0.0)
        step = np.where(np.isfinite(step), step, 0.0)
        # Converged lanes stop moving so results do not depend on batching.
        live = np.abs(step) > 1e-15 * np.abs(x)
        if not np.any(live):
            break
        x = np.where(live, x - step, x)
    return x


def _positive_cubic_root(mu: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Unique positive root of w^3 + mu*w^2 - rho = 0 for rho > 0, elementwise.

    g(w) = w^2*(w + mu) - rho is convex and increasing right of its positive
    critical point, and crosses zero exactly once on w > 0. Newton from an
    upper bound (cbrt(rho) and sqrt(rho/mu) both bound the root for mu >= 0,
    -mu + cbrt(rho) for mu < 0) descends monotonically, so no safeguards are
    needed and accuracy is limited only by evaluation rounding.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.sqrt(rho / np.where(mu > 0, mu, 1.0))
    w = np.where(mu > 0, np.minimum(_cbrt(rho), cap), _cbrt(rho) - np.minimum(mu, 0.0))
    for _ in range(100):
        f = w * w * (w + mu) - rho
        fp = w * (3.0 * w + 2.0 * mu)
        step = f / fp
        live = np.abs(step) > 1e-15 * w
        if not np.any(live):
            break
        w = np.where(live, w - step, w)
    return w


def cubic_real_roots_batch(a, b, c, d) -> np.ndarray:
    """Real roots of a[i]*x^3 + b[i]*x^2 + c[i]*x + d[i] = 0 with a != 0.

    Returns a (3, N) array; complex-pair roots appear as NaN. Uses the
    trigonometric form when all three roots are real and a cancellation-free
    single-root formula otherwise, each followed by one Newton polish step.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b, c, d = (np.broadcast_to(np.asarray(x, dtype=np.float64), a.shape).copy() for x in (b, c, d))
    if np.any(a == 0):
        raise ValueError("leading coefficient must be nonzero; use quadratic_real_roots")
    bn, cn, dn = b / a, c / a, d / a
    shift = bn / 3.0
    p = cn - bn * bn / 3.0
    q = 2.0 * bn**3 / 27.0 - bn * cn / 3.0 + dn
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3

    n = a.shape[0]
    roots = np.full((3, n), np.nan)

    three = disc <= 0
    if np.any(three):
        pt, qt, st = p[three], q[three], shift[three]
        m = 2.0 * np.sqrt(np.maximum(-pt / 3.0, 0.0))
        safe = pt < 0
        with np.errstate(invalid="ignore", divide="ignore"):
            arg = np.where(safe, 3.0 * qt / np.where(safe, pt * m, 1.0), 0.0)
        theta = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
        for i in range(3):
            t = m * np.cos(theta - 2.0 * np.pi * i / 3.0)
            roots[i, three] = np.where(safe, t, 0.0) - st

    one = ~three
    if np.any(one):
        po, qo, so = p[one], q[one], shift[one]
        sq = np.sqrt(disc[one])
        # Add magnitudes of like sign first, derive the partner from the
        # product A*B = -p/3 to avoid catastrophic cancellation.
        big = np.where(qo <= 0, _cbrt(-qo / 2.0 + sq), _cbrt(-qo / 2.0 - sq))
        with np.errstate(invalid="ignore", divide="ignore"):
            other = np.where(big != 0, -po / (3.0 * np.where(big != 0, big, 1.0)), 0.0)
        roots[0, one] = big + other - so

    return _newton_polish(roots, a[None], b[None], c[None], d[None])


def quadratic_real_roots_batch(a, b, c) -> np.ndarray:
    """Real roots of a quadratic, shape (2, N) with NaN for absent roots."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b, c = (np.broadcast_to(np.asarray(x, dtype=np.float64), a.shape).copy() for x in (b, c))
    if np.any(a == 0):
        raise ValueError("leading coefficient must be nonzero")
    disc = b * b - 4.0 * a * c
    roots = np.full((2,) + a.shape, np.nan)
    ok = disc >= 0
    if np.any(ok):
        sq = np.sqrt(disc[ok])
        bo, ao, co = b[ok], a[ok], c[ok]
        qq = -0.5 * (bo + np.where(bo >= 0, sq, -sq))
        r0 = np.where(qq != 0, qq / ao, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            r1 = np.where(qq != 0, co / np.where(qq != 0, qq, 1.0), -bo / (2.0 * ao))
        roots[0, ok] = r0
        roots[1, ok] = r1
    return roots


def cubic_real_roots(a: float, b: float, c: float, d: float) -> np.ndarray:
    """All real roots of a*x^3 + b*x^2 + c*x + d = 0.

    Degenerate leading coefficients fall through to the quadratic and linear
    solvers. Complex-pair roots are discarded.
    """
    if a == 0:
        return quadratic_real_roots(b, c, d)
    r = cubic_real_roots_batch([a], [b], [c], [d])[:, 0]
    return np.sort(r[np.isfinite(r)])


def quadratic_real_roots(a: float, b: float, c: float) -> np.ndarray:
    """Real roots of a*x^2 + b*x + c = 0 (linear and constant cases included)."""
    if a == 0:
        if b == 0:
            if c == 0:
                raise ValueError("identically zero polynomial has no defined roots")
            return np.array([])
        return np.array([-c / b])
    r = quadratic_real_roots_batch([a], [b], [c])[:, 0]
    return np.sort(r[np.isfinite(r)])


def _as_channel_batch(u) -> tuple[np.ndarray, bool]:
    u = np.asarray(u)
    if u.ndim == 1:
        return u[:, None], True
    return u, False


def gaussian_criterion(u, v, z, gamma: float, sigma: float):
    """Pixelwise objective: misfit of the channel-summed intensity plus the
    quadratic distance to the input channels."""
    u, single = _as_channel_batch(u)
    v, _ = _as_channel_batch(v)
    x = np.sum(np.abs(u) ** 2, axis=0)
    pen = np.sum(np.abs(u - v) ** 2, axis=0)
    j = (z - x) ** 2 / sigma**2 + pen / gamma
    return float(j[0]) if single else j


def poisson_criterion(u, v, z, gamma: float, chi: float):
    """Pixelwise Poisson minus-log-likelihood plus quadratic distance.

    The log term diverges to +inf when z > 0 meets a zero-intensity update;
    the z = 0, x = 0 corner contributes zero.
    """
    u, single = _as_channel_batch(u)
    v, _ = _as_channel_batch(v)
    x = np.sum(np.abs(u) ** 2, axis=0)
    pen = np.sum(np.abs(u - v) ** 2, axis=0)
    z_arr = np.broadcast_to(np.asarray(z, dtype=np.float64), x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.where(x > 0, np.log(np.maximum(x, 1e-300) * chi), -np.inf)
        loglik = chi * x - z_arr * logx
    loglik = np.where((z_arr == 0), chi * x, loglik)
    j = loglik + pen / gamma
    return float(j[0]) if single else j


def _as_batch(v, z):
    v = np.asarray(v, dtype=np.complex128)
    single = v.ndim == 1
    if single:
        v = v[:, None]
    z = np.broadcast_to(np.asarray(z, dtype=np.float64), (v.shape[1],))
    return v, z, single


def gaussian_prox(v, z, gamma: float, sigma: float):
    """Joint channel update under Gaussian intensity noise.

    For each pixel the stationarity conditions reduce to a cubic whose
    nonnegative real roots are the candidate updated intensities x, with
    channel update u = v / w for the denominator w = 1 + (2*gamma/sigma^2)
    * (x - z). Substituting w turns the cubic into w^3 + (u*z-1)*w^2 - u*q
    = 0, whose roots with w < 0 rescale v negatively and therefore always
    lose the pixelwise criterion to the unique w > 0 root (for equal update
    magnitude the penalty term strictly prefers the positive rescaling, and
    the positive root is the lone interior stationary point of the criterion
    on the positive ray). The returned update is that criterion-minimizing
    root; ties cannot occur. Returns (u_hat, x_hat) with
    sum_k |u_hat_k|^2 = x_hat.

    Solving for w instead of x keeps the fixed point q = z exact even when
    2*gamma*z/sigma^2 is huge, where the cubic in x cancels catastrophically.
    """
    if gamma <= 0 or sigma <= 0:
        raise ValueError("gamma and sigma must be positive")
    v, z, single = _as_batch(v, z)
    u_coef = 2.0 * gamma / sigma**2
    q = np.sum(np.abs(v) ** 2, axis=0)

    n = q.shape[0]
    u_hat = np.zeros_like(v)
    x_hat = np.zeros(n)

    live = q > 0
    if np.any(live):
        ql, zl = q[live], z[live]
        w_sel = _positive_cubic_root(u_coef * zl - 1.0, u_coef * ql)
        if not np.all(np.isfinite(w_sel) & (w_sel > 0)):
            raise RuntimeError("no admissible root found for a pixel with q > 0")
        x_hat[live] = ql / w_sel**2
        u_hat[:, live] = v[:, live] / w_sel

    if single:
        return u_hat[:, 0], float(x_hat[0])
    return u_hat, x_hat


def poisson_prox(v, z, gamma: float, chi: float):
    """Joint channel update under Poisson counting noise.

    Solves the stationarity quadratic for the updated total intensity x and
    rescales the channels by w = 1 + gamma*chi - gamma*z/x. Pixels with
    z > 0 exclude the x = 0 root (diverging log-likelihood); pixels with
    q = 0 but z > 0 are degenerate (no direction information) and return 0,
    counted in the third return value.

    Returns (u_hat, x_hat, degenerate_count).
    """
    if gamma <= 0 or chi <= 0:
        raise ValueError("gamma and chi must be positive")
    v, z, single = _as_batch(v, z)
    if np.any(z < 0):
        raise ValueError("Poisson observations must be nonnegative")
    q = np.sum(np.abs(v) ** 2, axis=0)
    a1 = 1.0 + gamma * chi

    n = q.shape[0]
    u_hat = np.zeros_like(v)
    x_hat = np.zeros(n)

    degenerate = (q == 0) & (z > 0)
    n_degenerate = int(np.count_nonzero(degenerate))
    if n_degenerate:
        warnings.warn(f"{n_degenerate} degenerate pixels (q = 0 with z > 0)", stacklevel=2)

    zero_obs = (q > 0) & (z == 0)
    if np.any(zero_obs):
        # Pure shrinkage: x = q/(1+gamma*chi)^2.
        x_hat[zero_obs] = q[zero_obs] / a1**2
        u_hat[:, zero_obs] = v[:, zero_obs] / a1

    live = (q > 0) & (z > 0)
    if np.any(live):
        ql, zl = q[live], z[live]
        gz = gamma * zl
        # disc = q^2 + 4*(1+gamma*chi)*gamma*z*q >= 0 by construction;
        # s = q + sqrt(disc), so x+ = (2*a1*gamma*z + s)/(2*a1^2).
        s = ql + np.sqrt(ql * (ql + 4.0 * a1 * gz))
        x_plus = (2.0 * a1 * gz + s) / (2.0 * a1**2)
        x_minus = (gz / a1) ** 2 / x_plus
        # Denominators w = (a1*x - gamma*z)/x in cancellation-free form:
        # a1*x+ - gamma*z = s/(2*a1) and a1*x- - gamma*z = -2*gamma*z*q/s.
        w_plus = s / (2.0 * a1 * x_plus)
        w_minus = -2.0 * gz * ql / (s * x_minus)

        def crit(x, w):
            with np.errstate(invalid="ignore", divide="ignore"):
                xs = ql / w**2
                return chi * xs - zl * np.log(xs * chi) + ql / gamma * (1.0 / w - 1.0) ** 2

        j_plus = crit(x_plus, w_plus)
        j_minus = crit(x_minus, w_minus)
        pick_minus = j_minus < j_plus - np.abs(j_plus) * TIE_REL
        x_sel = np.where(pick_minus, x_minus, x_plus)
        w_sel = np.where(pick_minus, w_minus, w_plus)
        x_hat[live] = ql / w_sel**2
        u_hat[:, live] = v[:, live] / w_sel

    if single:
        return u_hat[:, 0], float(x_hat[0]), n_degenerate
    return u_hat, x_hat, n_degenerate
