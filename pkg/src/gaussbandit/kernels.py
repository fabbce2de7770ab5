"""Hot loops: full-horizon runs of the Gaussian search and one-point baselines.

All randomness enters through pre-drawn arrays (standard normals for the
search directions, noise values), so a kernel is a pure function of its
inputs. Whether these are numba-compiled depends on ``_accel``.
"""

import numpy as np

from ._accel import njit

# status codes returned by the run kernels
OK = 0
NONFINITE_LOSS = 1


@njit
def loss_point(code, x, center, a, b, curvature):
    """Scalar loss value; ``code`` follows ``environments.KIND_CODES``."""
    if code == 0:
        return a[0] @ x + b[0]
    if code == 2:
        return np.max(a @ x + b)
    v = x - center
    r = np.sqrt(v @ v)
    if code == 1:
        return r
    if r <= 1.0 / curvature:
        return 0.5 * curvature * r * r
    return r - 0.5 / curvature


@njit
def _is_pd(w):
    return w[0] > 1e-12 * max(1.0, w[-1])


@njit
def run_gaussian_search(
    z,
    eps,
    x_init,
    sigma1,
    eta,
    lam,
    w_max,
    d_max,
    sigma_max_inv,
    x_ref,
    code,
    center,
    a,
    b,
    curvature,
    debug,
):
    """Run the Gaussian search bandit for ``n = z.shape[0]`` rounds.

    Round 1 only samples and observes. From round 2 the mean and precision
    are updated from the truncated loss difference. Per-round diagnostics
    describe the state *after* the round.

    Returns ``(status, xs, fx, ys, w_norm, d_t, g_norm, truncated, clipped,
    potential, trace_inv, min_eig_sigma, cov_ok, trace_ok, residuals)``
    where ``residuals`` holds the worst per-round error of three algebraic
    identities (zeros unless ``debug``): covariance-ratio, trace of
    ``Sigma H``, and the mean step.
    """
    n, d = z.shape
    xs = np.empty((n, d))
    fx = np.empty(n)
    ys = np.empty(n)
    w_norm = np.empty(n)
    d_t = np.zeros(n)
    g_norm = np.zeros(n)
    truncated = np.zeros(n, dtype=np.bool_)
    clipped = np.zeros(n, dtype=np.bool_)
    potential = np.empty(n)
    trace_inv = np.empty(n)
    min_eig_sigma = np.empty(n)
    cov_ok = np.empty(n, dtype=np.bool_)
    trace_ok = np.empty(n, dtype=np.bool_)
    residuals = np.zeros(3)
    eye = np.eye(d)

    mu = x_init.copy()
    prec = eye / sigma1
    lam_p, q = np.linalg.eigh(prec)
    y_prev = 0.0
    status = OK

    for t in range(n):
        root = np.sqrt(lam_p)
        sig_half = (q / root) @ q.T
        sig_mhalf = (q * root) @ q.T
        x = mu + sig_half @ z[t]
        f = loss_point(code, x, center, a, b, curvature)
        y = f + eps[t]
        if not np.isfinite(y):
            status = NONFINITE_LOSS
            break
        xs[t] = x
        fx[t] = f
        ys[t] = y
        diff = x - mu
        w = sig_mhalf @ diff
        ww = w @ w
        w_norm[t] = np.sqrt(ww)

        if t > 0:
            dy = y - y_prev
            if abs(dy) <= d_max and np.sqrt(ww) <= w_max:
                dd = dy
            else:
                dd = 0.0
                truncated[t] = True
            d_t[t] = dd
            if dd != 0.0:
                g = dd * (prec @ diff)
                g_norm[t] = np.sqrt(g @ g)
                h = lam * dd * (sig_mhalf @ (np.outer(w, w) - eye) @ sig_mhalf)
                h = 0.5 * (h + h.T)
                mu_next = mu - eta * dd * diff
                cand = prec + 0.25 * eta * h
                cand = 0.5 * (cand + cand.T)
                lam_c, q_c = np.linalg.eigh(cand)
                if debug:
                    sigma = (q / lam_p) @ q.T
                    # eta * Sigma g against eta * D (x - mu)
                    err = sigma @ g - dd * diff
                    rel = np.sqrt(err @ err) / max(abs(dd) * np.sqrt(diff @ diff), 1e-300)
                    residuals[2] = max(residuals[2], rel)
                    tr_lhs = np.sum(sigma * h.T)
                    tr_rhs = lam * dd * (ww - d)
                    residuals[1] = max(residuals[1], abs(tr_lhs - tr_rhs) / max(1.0, abs(tr_rhs)))
                    if _is_pd(lam_c):
                        ratio = sigma @ cand - (eye + 0.25 * eta * (sigma @ h))
                        residuals[0] = max(residuals[0], np.sqrt(np.sum(ratio * ratio)))
                mu = mu_next
                if _is_pd(lam_c):
                    prec = cand
                    lam_p = lam_c
                    q = q_c
                else:
                    clipped[t] = True
        y_prev = y

        v = mu - x_ref
        potential[t] = 0.5 * (v @ (prec @ v))
        trace_inv[t] = np.sum(lam_p)
        min_eig_sigma[t] = 1.0 / lam_p[-1]
        cov_ok[t] = 2.0 * sigma1 - 1.0 / lam_p[0] >= -1e-10 * sigma1
        trace_ok[t] = trace_inv[t] <= sigma_max_inv

    return (
        status,
        xs,
        fx,
        ys,
        w_norm,
        d_t,
        g_norm,
        truncated,
        clipped,
        potential,
        trace_inv,
        min_eig_sigma,
        cov_ok,
        trace_ok,
        residuals,
    )


@njit
def run_one_point_gd(z, eps, x_init, delta, step, code, center, a, b, curvature):
    """One-point smoothed-gradient descent: play ``c + delta u``, move ``c -= step (d/delta) y u``."""
    n, d = z.shape
    xs = np.empty((n, d))
    fx = np.empty(n)
    c = x_init.copy()
    scale = step * d / delta
    for t in range(n):
        u = z[t] / np.sqrt(z[t] @ z[t])
        x = c + delta * u
        f = loss_point(code, x, center, a, b, curvature)
        y = f + eps[t]
        if not np.isfinite(y):
            return NONFINITE_LOSS, xs, fx
        xs[t] = x
        fx[t] = f
        c = c - scale * y * u
    return OK, xs, fx
