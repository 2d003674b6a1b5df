"""Pure-numpy implementations of the hot integration kernels.

This is the reference backend: the native extension must match it to
floating-point roundoff. All arrays are float64 and C-contiguous.

Layout conventions
------------------
2D state ``w``: shape (6, ny, nx), fields ordered [u, vx, vy, psix, psiy, gam],
x along the last axis. ``sx`` has shape (nx,), ``sy`` shape (ny,).

Latent state ``y``: shape (4, B, n), fields ordered
[u_tot, v_tot, u_inc, v_inc]; B is a batch of independent rollouts.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

TWO_PI = 2.0 * np.pi


# Derivative closures (see grid.py for the energy argument): _ddx/_ddy are
# the plain operator with one-sided first-difference boundary rows; _gradx/
# _grady add the pressure-release wall penalty (odd image extension) and are
# applied to the pressure gradient feeding the velocity updates.


def _ddx(a: np.ndarray, inv2h: float, out: np.ndarray) -> np.ndarray:
    out[..., 1:-1] = (a[..., 2:] - a[..., :-2]) * inv2h
    out[..., 0] = (a[..., 1] - a[..., 0]) * (2.0 * inv2h)
    out[..., -1] = (a[..., -1] - a[..., -2]) * (2.0 * inv2h)
    return out


def _ddy(a: np.ndarray, inv2h: float, out: np.ndarray) -> np.ndarray:
    out[1:-1, :] = (a[2:, :] - a[:-2, :]) * inv2h
    out[0, :] = (a[1, :] - a[0, :]) * (2.0 * inv2h)
    out[-1, :] = (a[-1, :] - a[-2, :]) * (2.0 * inv2h)
    return out


def _gradx(a: np.ndarray, inv2h: float, out: np.ndarray) -> np.ndarray:
    out[..., 1:-1] = (a[..., 2:] - a[..., :-2]) * inv2h
    out[..., 0] = (a[..., 1] + a[..., 0]) * (2.0 * inv2h)
    out[..., -1] = -(a[..., -1] + a[..., -2]) * (2.0 * inv2h)
    return out


def _grady(a: np.ndarray, inv2h: float, out: np.ndarray) -> np.ndarray:
    out[1:-1, :] = (a[2:, :] - a[:-2, :]) * inv2h
    out[0, :] = (a[1, :] + a[0, :]) * (2.0 * inv2h)
    out[-1, :] = -(a[-1, :] + a[-2, :]) * (2.0 * inv2h)
    return out


def _ddx_t(g: np.ndarray, inv2h: float, out: np.ndarray) -> np.ndarray:
    # transpose of _ddx (needs n >= 5; latent grids are always larger)
    invh = 2.0 * inv2h
    out[..., 2:-2] = (g[..., 1:-3] - g[..., 3:-1]) * inv2h
    out[..., 0] = -g[..., 0] * invh - g[..., 1] * inv2h
    out[..., 1] = g[..., 0] * invh - g[..., 2] * inv2h
    out[..., -2] = g[..., -3] * inv2h - g[..., -1] * invh
    out[..., -1] = g[..., -2] * inv2h + g[..., -1] * invh
    return out


def _gradx_t(g: np.ndarray, inv2h: float, out: np.ndarray) -> np.ndarray:
    # transpose of _gradx (needs n >= 5)
    invh = 2.0 * inv2h
    out[..., 2:-2] = (g[..., 1:-3] - g[..., 3:-1]) * inv2h
    out[..., 0] = g[..., 0] * invh - g[..., 1] * inv2h
    out[..., 1] = g[..., 0] * invh - g[..., 2] * inv2h
    out[..., -2] = g[..., -3] * inv2h - g[..., -1] * invh
    out[..., -1] = g[..., -2] * inv2h - g[..., -1] * invh
    return out


# ---------------------------------------------------------------------------
# 2D acoustic system
# ---------------------------------------------------------------------------


def build_speed_squared(
    dist2: np.ndarray, radii: np.ndarray, c2_ambient: float, c2_scatterer: float, out: np.ndarray
) -> np.ndarray:
    """Squared speed field from disk membership.

    ``dist2`` (M, ny, nx) holds squared distances from each cell center to
    each scatterer center; a cell inside any disk takes the scatterer speed.
    """
    out[...] = c2_ambient
    if dist2.shape[0]:
        inside = dist2 <= (radii * radii)[:, None, None]
        out[inside.any(axis=0)] = c2_scatterer
    return out


def acoustic_rhs(
    w: np.ndarray,
    c2: np.ndarray,
    dfdx: np.ndarray,
    dfdy: np.ndarray,
    sx: np.ndarray,
    sy: np.ndarray,
    sin_t: float,
    inv2hx: float,
    inv2hy: float,
    out: np.ndarray,
) -> np.ndarray:
    """Six time-derivatives of the damped split-field system."""
    u, vx, vy, px, py, gam = w
    sxr = sx[None, :]
    syc = sy[:, None]
    dxvx = _ddx(vx, inv2hx, np.empty_like(u))
    dyvy = _ddy(vy, inv2hy, np.empty_like(u))
    np.multiply(c2, dxvx + dyvy, out=out[0])
    out[0] += px
    out[0] += py
    out[0] -= (sxr + syc) * u
    out[0] -= gam
    _gradx(u, inv2hx, out[1])
    if sin_t != 0.0:
        out[1] += sin_t * dfdx
    out[1] -= sxr * vx
    _grady(u, inv2hy, out[2])
    if sin_t != 0.0:
        out[2] += sin_t * dfdy
    out[2] -= syc * vy
    np.multiply(c2 * sxr, dyvy, out=out[3])
    np.multiply(c2 * syc, dxvx, out=out[4])
    np.multiply(sxr * syc, u, out=out[5])
    return out


def acoustic_rk4_step(
    w: np.ndarray,
    c2_0: np.ndarray,
    c2_h: np.ndarray,
    c2_1: np.ndarray,
    dfdx: np.ndarray,
    dfdy: np.ndarray,
    sx: np.ndarray,
    sy: np.ndarray,
    omega: float,
    t: float,
    dt: float,
    hx: float,
    hy: float,
    out: np.ndarray,
) -> np.ndarray:
    """One classical RK4 step; the speed field is sampled per stage time."""
    inv2hx = 1.0 / (2.0 * hx)
    inv2hy = 1.0 / (2.0 * hy)
    s0 = np.sin(TWO_PI * omega * t)
    sh = np.sin(TWO_PI * omega * (t + 0.5 * dt))
    s1 = np.sin(TWO_PI * omega * (t + dt))
    k1 = acoustic_rhs(w, c2_0, dfdx, dfdy, sx, sy, s0, inv2hx, inv2hy, np.empty_like(w))
    k2 = acoustic_rhs(
        w + (0.5 * dt) * k1, c2_h, dfdx, dfdy, sx, sy, sh, inv2hx, inv2hy, np.empty_like(w)
    )
    k3 = acoustic_rhs(
        w + (0.5 * dt) * k2, c2_h, dfdx, dfdy, sx, sy, sh, inv2hx, inv2hy, np.empty_like(w)
    )
    k4 = acoustic_rhs(
        w + dt * k3, c2_1, dfdx, dfdy, sx, sy, s1, inv2hx, inv2hy, np.empty_like(w)
    )
    np.multiply(k2, 2.0, out=k2)
    k2 += k1
    k2 += 2.0 * k3
    k2 += k4
    np.multiply(k2, dt / 6.0, out=out)
    out += w
    return out


# ---------------------------------------------------------------------------
# 1D latent system (batched)
# ---------------------------------------------------------------------------


def _latent_rhs(y, cz2, ca2, sigma, dfdx, sin_t, inv2h, out):
    # sin_t: scalar, or (B, 1) for per-batch source phases
    ut, vt, ui, vi = y
    _ddx(vt, inv2h, out[0])
    out[0] *= cz2
    out[0] -= sigma * ut
    _gradx(ut, inv2h, out[1])
    if np.any(sin_t):
        out[1] += sin_t * dfdx
    out[1] -= sigma * vt
    _ddx(vi, inv2h, out[2])
    out[2] *= ca2
    out[2] -= sigma * ui
    _gradx(ui, inv2h, out[3])
    if np.any(sin_t):
        out[3] += sin_t * dfdx
    out[3] -= sigma * vi
    return out


def latent_window_forward(
    y: np.ndarray,
    c0: np.ndarray,
    c1: np.ndarray,
    ca2: float,
    sigma: np.ndarray,
    dfdx: np.ndarray,
    omega: float,
    t0: np.ndarray,
    dt: float,
    n_steps: int,
    dx: float,
    sig_out: np.ndarray,
    store: np.ndarray | None = None,
) -> np.ndarray:
    """Advance one action window of ``n_steps`` RK4 steps in place.

    The speed frame interpolates linearly from ``c0`` at the window start to
    ``c1`` at its end; ``t0`` (B,) holds each batch element's window start
    time (source phases differ across the batch). After each step the three
    energy integrals [scattered, total, incident] are written to ``sig_out``
    (3, B, n_steps). ``store``, when given, receives the state at every step
    boundary (n_steps + 1, 4, B, n) for use by the reverse sweep.
    """
    inv2h = 1.0 / (2.0 * dx)
    tcol = np.asarray(t0, dtype=np.float64).reshape(-1, 1)
    k1, k2, k3, k4 = (np.empty_like(y) for _ in range(4))
    if store is not None:
        store[0] = y
    for s in range(n_steps):
        t = tcol + s * dt
        w_lo = s / n_steps
        w_hf = (s + 0.5) / n_steps
        w_hi = (s + 1.0) / n_steps
        cz0 = c0 + w_lo * (c1 - c0)
        czh = c0 + w_hf * (c1 - c0)
        cz1 = c0 + w_hi * (c1 - c0)
        s0 = np.sin(TWO_PI * omega * t)
        sh = np.sin(TWO_PI * omega * (t + 0.5 * dt))
        s1 = np.sin(TWO_PI * omega * (t + dt))
        _latent_rhs(y, cz0 * cz0, ca2, sigma, dfdx, s0, inv2h, k1)
        _latent_rhs(y + (0.5 * dt) * k1, czh * czh, ca2, sigma, dfdx, sh, inv2h, k2)
        _latent_rhs(y + (0.5 * dt) * k2, czh * czh, ca2, sigma, dfdx, sh, inv2h, k3)
        _latent_rhs(y + dt * k3, cz1 * cz1, ca2, sigma, dfdx, s1, inv2h, k4)
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if store is not None:
            store[s + 1] = y
        usc = y[0] - y[2]
        sig_out[0, :, s] = dx * np.einsum("bi,bi->b", usc, usc)
        sig_out[1, :, s] = dx * np.einsum("bi,bi->b", y[0], y[0])
        sig_out[2, :, s] = dx * np.einsum("bi,bi->b", y[2], y[2])
    return y


def _latent_rhs_transpose(kb, cz2, ca2, sigma, inv2h, out):
    """out = F_y^T kb for the latent system (F is linear in the state)."""
    at, bt, ai, bi = kb
    _gradx_t(bt, inv2h, out[0])
    out[0] -= sigma * at
    _ddx_t(cz2 * at, inv2h, out[1])
    out[1] -= sigma * bt
    _gradx_t(bi, inv2h, out[2])
    out[2] -= sigma * ai
    _ddx_t(ca2 * ai, inv2h, out[3])
    out[3] -= sigma * bi
    return out


def latent_window_backward(
    lam: np.ndarray,
    store: np.ndarray,
    c0: np.ndarray,
    c1: np.ndarray,
    ca2: float,
    sigma: np.ndarray,
    dfdx: np.ndarray,
    omega: float,
    t0: np.ndarray,
    dt: float,
    n_steps: int,
    dx: float,
    gsc: np.ndarray,
    gtot: np.ndarray,
    ginc: np.ndarray,
    gc0: np.ndarray,
    gc1: np.ndarray,
    gsigma: np.ndarray,
    gdfdx: np.ndarray,
) -> np.ndarray:
    """Reverse sweep of one forward window (exact discrete adjoint of RK4).

    ``lam`` (4, B, n) enters as the loss gradient w.r.t. the window-end state
    and leaves as the gradient w.r.t. the window-start state. ``gsc``/``gtot``
    /``ginc`` (B, n_steps) are loss gradients w.r.t. the per-step energy
    integrals. Parameter gradients accumulate into gc0/gc1/gsigma/gdfdx.
    """
    inv2h = 1.0 / (2.0 * dx)
    tcol = np.asarray(t0, dtype=np.float64).reshape(-1, 1)
    k = np.empty((3,) + lam.shape)  # recomputed k1..k3
    stage_in = np.empty((4,) + lam.shape)
    kb = np.empty_like(lam)
    ybar = np.empty_like(lam)
    scratch = np.empty_like(lam[0])
    for s in range(n_steps - 1, -1, -1):
        # direct dependence of the step-s integrals on the post-step state
        y_end = store[s + 1]
        usc = y_end[0] - y_end[2]
        lam[0] += (2.0 * dx) * (gsc[:, s, None] * usc + gtot[:, s, None] * y_end[0])
        lam[2] += (2.0 * dx) * (-gsc[:, s, None] * usc + ginc[:, s, None] * y_end[2])

        t = tcol + s * dt
        w_w = (s / n_steps, (s + 0.5) / n_steps, (s + 0.5) / n_steps, (s + 1.0) / n_steps)
        tt = (t, t + 0.5 * dt, t + 0.5 * dt, t + dt)
        cz = [c0 + w * (c1 - c0) for w in (w_w[0], w_w[1], w_w[3])]
        cz2 = [c * c for c in cz]
        sins = [np.sin(TWO_PI * omega * ti) for ti in tt]

        y = store[s]
        stage_in[0] = y
        _latent_rhs(y, cz2[0], ca2, sigma, dfdx, sins[0], inv2h, k[0])
        stage_in[1] = y + (0.5 * dt) * k[0]
        _latent_rhs(stage_in[1], cz2[1], ca2, sigma, dfdx, sins[1], inv2h, k[1])
        stage_in[2] = y + (0.5 * dt) * k[1]
        _latent_rhs(stage_in[2], cz2[1], ca2, sigma, dfdx, sins[2], inv2h, k[2])
        stage_in[3] = y + dt * k[2]

        lam_new = lam.copy()
        carry = None  # adjoint of the k feeding the later stage's input
        stage_weight = (dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0)
        stage_cz2 = (cz2[0], cz2[1], cz2[1], cz2[2])
        stage_czf = (cz[0], cz[1], cz[1], cz[2])
        carry_w = (0.5 * dt, 0.5 * dt, dt)  # stage i+1 input is y + carry_w[i] * k_i
        for i in (3, 2, 1, 0):
            np.multiply(lam, stage_weight[i], out=kb)
            if carry is not None:
                kb += carry_w[i] * carry
            yi = stage_in[i]
            # parameter gradients at this stage
            _ddx(yi[1], inv2h, scratch)  # d/dx of stage v_tot
            czbar = 2.0 * stage_czf[i] * scratch * kb[0]
            gc0 += (1.0 - w_w[i]) * czbar
            gc1 += w_w[i] * czbar
            gsigma -= kb[0] * yi[0] + kb[1] * yi[1] + kb[2] * yi[2] + kb[3] * yi[3]
            if np.any(sins[i]):
                gdfdx += sins[i] * (kb[1] + kb[3])
            # state adjoint through this stage
            _latent_rhs_transpose(kb, stage_cz2[i], ca2, sigma, inv2h, ybar)
            lam_new += ybar
            if i > 0:
                carry = ybar.copy()
        lam[:] = lam_new
    return lam
