# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
# cython: language_level=3
"""Compiled implementations of the hot integration kernels.

Mirrors ``numpy_backend`` operation by operation: every elementwise update
applies the same floating-point operations in the same order, and the
oscillatory source factors are evaluated through ``np.sin`` so both backends
see identical phase values. Only the energy reductions may differ from the
numpy backend at roundoff level (sequential sum vs einsum).
"""

import numpy as np

NAME = "native"

TWO_PI = 2.0 * np.pi

ctypedef Py_ssize_t idx


# -- derivative closures (same boundary rows as numpy_backend) --------------


cdef inline double _dx1(const double* a, idx i, idx n, double inv2h, double invh) noexcept nogil:
    if i == 0:
        return (a[1] - a[0]) * invh
    if i == n - 1:
        return (a[n - 1] - a[n - 2]) * invh
    return (a[i + 1] - a[i - 1]) * inv2h


cdef inline double _gx1(const double* a, idx i, idx n, double inv2h, double invh) noexcept nogil:
    if i == 0:
        return (a[1] + a[0]) * invh
    if i == n - 1:
        return -(a[n - 1] + a[n - 2]) * invh
    return (a[i + 1] - a[i - 1]) * inv2h


cdef inline double _dx1_t(const double* g, idx i, idx n, double inv2h, double invh) noexcept nogil:
    # transpose of the plain closure (needs n >= 5)
    if i == 0:
        return -g[0] * invh - g[1] * inv2h
    if i == 1:
        return g[0] * invh - g[2] * inv2h
    if i == n - 2:
        return g[n - 3] * inv2h - g[n - 1] * invh
    if i == n - 1:
        return g[n - 2] * inv2h + g[n - 1] * invh
    return (g[i - 1] - g[i + 1]) * inv2h


cdef inline double _gx1_t(const double* g, idx i, idx n, double inv2h, double invh) noexcept nogil:
    # transpose of the wall closure (needs n >= 5)
    if i == 0:
        return g[0] * invh - g[1] * inv2h
    if i == 1:
        return g[0] * invh - g[2] * inv2h
    if i == n - 2:
        return g[n - 3] * inv2h - g[n - 1] * invh
    if i == n - 1:
        return g[n - 2] * inv2h - g[n - 1] * invh
    return (g[i - 1] - g[i + 1]) * inv2h


# ---------------------------------------------------------------------------
# 2D acoustic system
# ---------------------------------------------------------------------------


def build_speed_squared(
    const double[:, :, ::1] dist2,
    const double[::1] radii,
    double c2_ambient,
    double c2_scatterer,
    double[:, ::1] out,
):
    """Squared speed field from disk membership (see numpy_backend)."""
    cdef idx m = dist2.shape[0], ny = dist2.shape[1], nx = dist2.shape[2]
    cdef idx j, iy, ix
    cdef double r2
    with nogil:
        for iy in range(ny):
            for ix in range(nx):
                out[iy, ix] = c2_ambient
        for j in range(m):
            r2 = radii[j] * radii[j]
            for iy in range(ny):
                for ix in range(nx):
                    if dist2[j, iy, ix] <= r2:
                        out[iy, ix] = c2_scatterer
    return np.asarray(out)


cdef void _rhs2d(
    const double[:, :, ::1] w,
    const double[:, ::1] c2,
    const double[:, ::1] dfdx,
    const double[:, ::1] dfdy,
    const double[::1] sx,
    const double[::1] sy,
    double sin_t,
    double inv2hx,
    double inv2hy,
    double[:, :, ::1] out,
) noexcept nogil:
    cdef idx ny = w.shape[1], nx = w.shape[2], iy, ix
    cdef double invhx = 2.0 * inv2hx
    cdef double invhy = 2.0 * inv2hy
    cdef bint src = sin_t != 0.0
    cdef const double* u
    cdef const double* vxr
    cdef const double* um
    cdef const double* up
    cdef const double* vym
    cdef const double* vyp
    cdef double dxvx, dyvy, r, sxv, syv, c2v
    for iy in range(ny):
        syv = sy[iy]
        u = &w[0, iy, 0]
        vxr = &w[1, iy, 0]
        # one-sided rows at the y edges, centered inside
        um = &w[0, iy - 1, 0] if iy > 0 else &w[0, 0, 0]
        up = &w[0, iy + 1, 0] if iy < ny - 1 else &w[0, ny - 1, 0]
        vym = &w[2, iy - 1, 0] if iy > 0 else &w[2, 0, 0]
        vyp = &w[2, iy + 1, 0] if iy < ny - 1 else &w[2, ny - 1, 0]
        for ix in range(nx):
            sxv = sx[ix]
            c2v = c2[iy, ix]
            dxvx = _dx1(vxr, ix, nx, inv2hx, invhx)
            if iy == 0:
                dyvy = (w[2, 1, ix] - w[2, 0, ix]) * invhy
            elif iy == ny - 1:
                dyvy = (w[2, ny - 1, ix] - w[2, ny - 2, ix]) * invhy
            else:
                dyvy = (vyp[ix] - vym[ix]) * inv2hy
            r = c2v * (dxvx + dyvy)
            r = r + w[3, iy, ix]
            r = r + w[4, iy, ix]
            r = r - (sxv + syv) * u[ix]
            r = r - w[5, iy, ix]
            out[0, iy, ix] = r
            r = _gx1(u, ix, nx, inv2hx, invhx)
            if src:
                r = r + sin_t * dfdx[iy, ix]
            r = r - sxv * vxr[ix]
            out[1, iy, ix] = r
            if iy == 0:
                r = (w[0, 1, ix] + w[0, 0, ix]) * invhy
            elif iy == ny - 1:
                r = -(w[0, ny - 1, ix] + w[0, ny - 2, ix]) * invhy
            else:
                r = (up[ix] - um[ix]) * inv2hy
            if src:
                r = r + sin_t * dfdy[iy, ix]
            r = r - syv * w[2, iy, ix]
            out[2, iy, ix] = r
            out[3, iy, ix] = (c2v * sxv) * dyvy
            out[4, iy, ix] = (c2v * syv) * dxvx
            out[5, iy, ix] = (sxv * syv) * u[ix]


def acoustic_rhs(
    const double[:, :, ::1] w,
    const double[:, ::1] c2,
    const double[:, ::1] dfdx,
    const double[:, ::1] dfdy,
    const double[::1] sx,
    const double[::1] sy,
    double sin_t,
    double inv2hx,
    double inv2hy,
    double[:, :, ::1] out,
):
    """Six time-derivatives of the damped split-field system."""
    _rhs2d(w, c2, dfdx, dfdy, sx, sy, sin_t, inv2hx, inv2hy, out)
    return np.asarray(out)


cdef void _axpy6(
    const double[:, :, ::1] w, double a, const double[:, :, ::1] k, double[:, :, ::1] out
) noexcept nogil:
    cdef idx nf = w.shape[0], ny = w.shape[1], nx = w.shape[2], f, iy, ix
    for f in range(nf):
        for iy in range(ny):
            for ix in range(nx):
                out[f, iy, ix] = w[f, iy, ix] + a * k[f, iy, ix]


def acoustic_rk4_step(
    const double[:, :, ::1] w,
    const double[:, ::1] c2_0,
    const double[:, ::1] c2_h,
    const double[:, ::1] c2_1,
    const double[:, ::1] dfdx,
    const double[:, ::1] dfdy,
    const double[::1] sx,
    const double[::1] sy,
    double omega,
    double t,
    double dt,
    double hx,
    double hy,
    double[:, :, ::1] out,
):
    """One classical RK4 step; the speed field is sampled per stage time."""
    cdef double inv2hx = 1.0 / (2.0 * hx)
    cdef double inv2hy = 1.0 / (2.0 * hy)
    cdef double s0 = np.sin(TWO_PI * omega * t)
    cdef double sh = np.sin(TWO_PI * omega * (t + 0.5 * dt))
    cdef double s1 = np.sin(TWO_PI * omega * (t + dt))
    cdef double hdt = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef idx nf = w.shape[0], ny = w.shape[1], nx = w.shape[2], f, iy, ix
    buf = np.empty((5, nf, ny, nx))
    cdef double[:, :, :, ::1] b = buf
    cdef double[:, :, ::1] k1 = b[0], k2 = b[1], k3 = b[2], k4 = b[3], wt = b[4]
    cdef double acc
    with nogil:
        _rhs2d(w, c2_0, dfdx, dfdy, sx, sy, s0, inv2hx, inv2hy, k1)
        _axpy6(w, hdt, k1, wt)
        _rhs2d(wt, c2_h, dfdx, dfdy, sx, sy, sh, inv2hx, inv2hy, k2)
        _axpy6(w, hdt, k2, wt)
        _rhs2d(wt, c2_h, dfdx, dfdy, sx, sy, sh, inv2hx, inv2hy, k3)
        _axpy6(w, dt, k3, wt)
        _rhs2d(wt, c2_1, dfdx, dfdy, sx, sy, s1, inv2hx, inv2hy, k4)
        for f in range(nf):
            for iy in range(ny):
                for ix in range(nx):
                    acc = k2[f, iy, ix] * 2.0
                    acc = acc + k1[f, iy, ix]
                    acc = acc + 2.0 * k3[f, iy, ix]
                    acc = acc + k4[f, iy, ix]
                    out[f, iy, ix] = acc * sixth + w[f, iy, ix]
    return np.asarray(out)


# ---------------------------------------------------------------------------
# 1D latent system (batched)
# ---------------------------------------------------------------------------


def _window_sines(t0, double omega, double dt, idx n_steps):
    """Stage sine table (n_steps, 3, B): columns at t, t + dt/2, t + dt.

    Built with the same elementwise arithmetic as the per-step expressions in
    numpy_backend, so the phase values match bit for bit.
    """
    t0a = np.ascontiguousarray(np.asarray(t0, dtype=np.float64))
    svec = np.arange(n_steps) * dt
    tmat = t0a[None, :] + svec[:, None]
    pref = TWO_PI * omega
    args = np.empty((n_steps, 3, t0a.shape[0]))
    args[:, 0, :] = pref * tmat
    args[:, 1, :] = pref * (tmat + 0.5 * dt)
    args[:, 2, :] = pref * (tmat + dt)
    return np.sin(args)


cdef bint _any_nonzero(const double[::1] col) noexcept nogil:
    cdef idx b
    for b in range(col.shape[0]):
        if col[b] != 0.0:
            return True
    return False


cdef void _lrhs(
    const double[:, :, ::1] y,
    const double[:, ::1] c0,
    const double[:, ::1] c1,
    double wq,
    double ca2,
    const double[:, ::1] sigma,
    const double[:, ::1] dfdx,
    const double[::1] sin_col,
    bint use_sin,
    double inv2h,
    double invh,
    double[:, :, ::1] out,
) noexcept nogil:
    # speed frame interpolation fused in: cz = c0 + wq * (c1 - c0)
    cdef idx nb = y.shape[1], n = y.shape[2], b, i
    cdef const double* ut
    cdef const double* vt
    cdef const double* ui
    cdef const double* vi
    cdef double sb, sg, czv, r
    for b in range(nb):
        ut = &y[0, b, 0]
        vt = &y[1, b, 0]
        ui = &y[2, b, 0]
        vi = &y[3, b, 0]
        sb = sin_col[b]
        for i in range(n):
            sg = sigma[b, i]
            czv = c0[b, i] + wq * (c1[b, i] - c0[b, i])
            r = _dx1(vt, i, n, inv2h, invh) * (czv * czv)
            r = r - sg * ut[i]
            out[0, b, i] = r
            r = _gx1(ut, i, n, inv2h, invh)
            if use_sin:
                r = r + sb * dfdx[b, i]
            r = r - sg * vt[i]
            out[1, b, i] = r
            r = _dx1(vi, i, n, inv2h, invh) * ca2
            r = r - sg * ui[i]
            out[2, b, i] = r
            r = _gx1(ui, i, n, inv2h, invh)
            if use_sin:
                r = r + sb * dfdx[b, i]
            r = r - sg * vi[i]
            out[3, b, i] = r


cdef void _axpy4(
    const double[:, :, ::1] y, double a, const double[:, :, ::1] k, double[:, :, ::1] out
) noexcept nogil:
    cdef idx nf = y.shape[0], nb = y.shape[1], n = y.shape[2], f, b, i
    for f in range(nf):
        for b in range(nb):
            for i in range(n):
                out[f, b, i] = y[f, b, i] + a * k[f, b, i]


def latent_window_forward(
    double[:, :, ::1] y,
    const double[:, ::1] c0,
    const double[:, ::1] c1,
    double ca2,
    const double[:, ::1] sigma,
    const double[:, ::1] dfdx,
    double omega,
    t0,
    double dt,
    idx n_steps,
    double dx,
    double[:, :, :] sig_out,
    store=None,
):
    """Advance one action window of ``n_steps`` RK4 steps in place.

    Same contract as numpy_backend.latent_window_forward.
    """
    cdef double inv2h = 1.0 / (2.0 * dx)
    cdef double invh = 2.0 * inv2h
    cdef double hdt = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef idx nb = y.shape[1], n = y.shape[2], s, f, b, i
    cdef const double[:, :, ::1] sins = _window_sines(t0, omega, dt, n_steps)
    buf = np.empty((5, 4, nb, n))
    cdef double[:, :, :, ::1] bmv = buf
    cdef double[:, :, ::1] k1 = bmv[0], k2 = bmv[1], k3 = bmv[2], k4 = bmv[3], yt = bmv[4]
    cdef double[:, :, :, ::1] st
    cdef bint keep = store is not None
    if keep:
        st = store
    cdef double w_lo, w_hf, w_hi, acc, u0, u2, r
    cdef bint a0, ah, a1
    with nogil:
        if keep:
            for f in range(4):
                for b in range(nb):
                    for i in range(n):
                        st[0, f, b, i] = y[f, b, i]
        for s in range(n_steps):
            w_lo = (<double> s) / (<double> n_steps)
            w_hf = ((<double> s) + 0.5) / (<double> n_steps)
            w_hi = ((<double> s) + 1.0) / (<double> n_steps)
            a0 = _any_nonzero(sins[s, 0])
            ah = _any_nonzero(sins[s, 1])
            a1 = _any_nonzero(sins[s, 2])
            _lrhs(y, c0, c1, w_lo, ca2, sigma, dfdx, sins[s, 0], a0, inv2h, invh, k1)
            _axpy4(y, hdt, k1, yt)
            _lrhs(yt, c0, c1, w_hf, ca2, sigma, dfdx, sins[s, 1], ah, inv2h, invh, k2)
            _axpy4(y, hdt, k2, yt)
            _lrhs(yt, c0, c1, w_hf, ca2, sigma, dfdx, sins[s, 1], ah, inv2h, invh, k3)
            _axpy4(y, dt, k3, yt)
            _lrhs(yt, c0, c1, w_hi, ca2, sigma, dfdx, sins[s, 2], a1, inv2h, invh, k4)
            for f in range(4):
                for b in range(nb):
                    for i in range(n):
                        acc = k1[f, b, i] + 2.0 * k2[f, b, i]
                        acc = acc + 2.0 * k3[f, b, i]
                        acc = acc + k4[f, b, i]
                        y[f, b, i] = y[f, b, i] + sixth * acc
            if keep:
                for f in range(4):
                    for b in range(nb):
                        for i in range(n):
                            st[s + 1, f, b, i] = y[f, b, i]
            for b in range(nb):
                acc = 0.0
                u0 = 0.0
                u2 = 0.0
                for i in range(n):
                    r = y[0, b, i] - y[2, b, i]
                    acc = acc + r * r
                    u0 = u0 + y[0, b, i] * y[0, b, i]
                    u2 = u2 + y[2, b, i] * y[2, b, i]
                sig_out[0, b, s] = dx * acc
                sig_out[1, b, s] = dx * u0
                sig_out[2, b, s] = dx * u2
    return np.asarray(y)


cdef void _lrhs_t(
    const double[:, :, ::1] kb,
    const double[:, ::1] c0,
    const double[:, ::1] c1,
    double wq,
    double ca2,
    const double[:, ::1] sigma,
    double inv2h,
    double invh,
    double* prow,
    double[:, :, ::1] out,
) noexcept nogil:
    # out = F_y^T kb; prow is an (n,) scratch row for the weighted fields
    cdef idx nb = kb.shape[1], n = kb.shape[2], b, i
    cdef const double* at
    cdef const double* bt
    cdef const double* ai
    cdef const double* bi
    cdef double czv
    for b in range(nb):
        at = &kb[0, b, 0]
        bt = &kb[1, b, 0]
        ai = &kb[2, b, 0]
        bi = &kb[3, b, 0]
        for i in range(n):
            out[0, b, i] = _gx1_t(bt, i, n, inv2h, invh) - sigma[b, i] * at[i]
        for i in range(n):
            czv = c0[b, i] + wq * (c1[b, i] - c0[b, i])
            prow[i] = (czv * czv) * at[i]
        for i in range(n):
            out[1, b, i] = _dx1_t(prow, i, n, inv2h, invh) - sigma[b, i] * bt[i]
        for i in range(n):
            out[2, b, i] = _gx1_t(bi, i, n, inv2h, invh) - sigma[b, i] * ai[i]
        for i in range(n):
            prow[i] = ca2 * ai[i]
        for i in range(n):
            out[3, b, i] = _dx1_t(prow, i, n, inv2h, invh) - sigma[b, i] * bi[i]


def latent_window_backward(
    double[:, :, ::1] lam,
    const double[:, :, :, ::1] store,
    const double[:, ::1] c0,
    const double[:, ::1] c1,
    double ca2,
    const double[:, ::1] sigma,
    const double[:, ::1] dfdx,
    double omega,
    t0,
    double dt,
    idx n_steps,
    double dx,
    const double[:, :] gsc,
    const double[:, :] gtot,
    const double[:, :] ginc,
    double[:, ::1] gc0,
    double[:, ::1] gc1,
    double[:, ::1] gsigma,
    double[:, ::1] gdfdx,
):
    """Reverse sweep of one forward window (exact discrete adjoint of RK4).

    Same contract as numpy_backend.latent_window_backward.
    """
    cdef double inv2h = 1.0 / (2.0 * dx)
    cdef double invh = 2.0 * inv2h
    cdef double twodx = 2.0 * dx
    cdef double hdt = 0.5 * dt
    cdef idx nb = lam.shape[1], n = lam.shape[2], s, f, b, i, j, jj
    cdef const double[:, :, ::1] sins = _window_sines(t0, omega, dt, n_steps)
    buf = np.empty((11, 4, nb, n))
    cdef double[:, :, :, ::1] bmv = buf
    cdef double[:, :, ::1] k0 = bmv[0], k1 = bmv[1], k2 = bmv[2]
    cdef double[:, :, ::1] si0 = bmv[3], si1 = bmv[4], si2 = bmv[5], si3 = bmv[6]
    cdef double[:, :, ::1] kb = bmv[7], ybar = bmv[8], carry = bmv[9], lam_new = bmv[10]
    prow_arr = np.empty(n)
    cdef double[::1] prow = prow_arr
    cdef double sw0 = dt / 6.0
    cdef double sw1 = dt / 3.0
    cdef double w_w0, w_w1, w_w3, wq, swq, cwq, sb
    cdef double usc, gscv, gtotv, gincv, kbv, czv, czbar, dval, r
    cdef bint has_carry, use_sin
    cdef const double[:, :, ::1] yend, ystart
    cdef double[:, :, ::1] yi
    cdef idx jcol
    with nogil:
        for s in range(n_steps - 1, -1, -1):
            yend = store[s + 1]
            for b in range(nb):
                gscv = gsc[b, s]
                gtotv = gtot[b, s]
                gincv = ginc[b, s]
                for i in range(n):
                    usc = yend[0, b, i] - yend[2, b, i]
                    lam[0, b, i] = lam[0, b, i] + twodx * (
                        gscv * usc + gtotv * yend[0, b, i]
                    )
                    lam[2, b, i] = lam[2, b, i] + twodx * (
                        (-gscv) * usc + gincv * yend[2, b, i]
                    )

            w_w0 = (<double> s) / (<double> n_steps)
            w_w1 = ((<double> s) + 0.5) / (<double> n_steps)
            w_w3 = ((<double> s) + 1.0) / (<double> n_steps)
            ystart = store[s]
            for f in range(4):
                for b in range(nb):
                    for i in range(n):
                        si0[f, b, i] = ystart[f, b, i]
            _lrhs(si0, c0, c1, w_w0, ca2, sigma, dfdx, sins[s, 0],
                  _any_nonzero(sins[s, 0]), inv2h, invh, k0)
            _axpy4(si0, hdt, k0, si1)
            _lrhs(si1, c0, c1, w_w1, ca2, sigma, dfdx, sins[s, 1],
                  _any_nonzero(sins[s, 1]), inv2h, invh, k1)
            _axpy4(si0, hdt, k1, si2)
            _lrhs(si2, c0, c1, w_w1, ca2, sigma, dfdx, sins[s, 1],
                  _any_nonzero(sins[s, 1]), inv2h, invh, k2)
            _axpy4(si0, dt, k2, si3)

            for f in range(4):
                for b in range(nb):
                    for i in range(n):
                        lam_new[f, b, i] = lam[f, b, i]
            has_carry = False
            for jj in range(4):
                j = 3 - jj
                # stage weight and carry weight for this stage
                swq = sw0 if (j == 0 or j == 3) else sw1
                if j == 3:
                    wq = w_w3
                    yi = si3
                elif j == 2:
                    wq = w_w1
                    yi = si2
                elif j == 1:
                    wq = w_w1
                    yi = si1
                else:
                    wq = w_w0
                    yi = si0
                cwq = dt if j == 2 else hdt
                jcol = 0 if j == 0 else (2 if j == 3 else 1)
                for f in range(4):
                    for b in range(nb):
                        for i in range(n):
                            kbv = lam[f, b, i] * swq
                            if has_carry:
                                kbv = kbv + cwq * carry[f, b, i]
                            kb[f, b, i] = kbv
                use_sin = _any_nonzero(sins[s, jcol])
                for b in range(nb):
                    sb = sins[s, jcol, b]
                    for i in range(n):
                        dval = _dx1(&yi[1, b, 0], i, n, inv2h, invh)
                        czv = c0[b, i] + wq * (c1[b, i] - c0[b, i])
                        czbar = 2.0 * czv * dval * kb[0, b, i]
                        gc0[b, i] = gc0[b, i] + (1.0 - wq) * czbar
                        gc1[b, i] = gc1[b, i] + wq * czbar
                        r = kb[0, b, i] * yi[0, b, i] + kb[1, b, i] * yi[1, b, i]
                        r = r + kb[2, b, i] * yi[2, b, i]
                        r = r + kb[3, b, i] * yi[3, b, i]
                        gsigma[b, i] = gsigma[b, i] - r
                        if use_sin:
                            gdfdx[b, i] = gdfdx[b, i] + sb * (kb[1, b, i] + kb[3, b, i])
                _lrhs_t(kb, c0, c1, wq, ca2, sigma, inv2h, invh, &prow[0], ybar)
                for f in range(4):
                    for b in range(nb):
                        for i in range(n):
                            lam_new[f, b, i] = lam_new[f, b, i] + ybar[f, b, i]
                if j > 0:
                    for f in range(4):
                        for b in range(nb):
                            for i in range(n):
                                carry[f, b, i] = ybar[f, b, i]
                    has_carry = True
            for f in range(4):
                for b in range(nb):
                    for i in range(n):
                        lam[f, b, i] = lam_new[f, b, i]
    return np.asarray(lam)
