"""Numba stencil kernels for the u/v right-hand sides.

Every kernel is written once with ``prange`` over grid rows and compiled
twice: serial (the default, deterministic mode) and parallel. Each face and
cell is written by exactly one iteration and the maxima are reduced serially,
so both variants return bitwise-identical results.
"""
import numpy as np
from numba import njit, prange


def _colmax(a, acc):
    """Max of a 2D array; column-wise accumulators keep the loop vectorisable."""
    ny, nx = a.shape
    for i in range(nx):
        acc[i] = a[0, i]
    for j in range(1, ny):
        for i in range(nx):
            x = a[j, i]
            acc[i] = x if x > acc[i] else acc[i]
    m = acc[0]
    for i in range(1, nx):
        m = acc[i] if acc[i] > m else m
    return m


def _rhs(u, v, ihx, ihy, rho, mu, kappa, fx, fy, gx, gy, dx, dy, wx, wy, ru, rv, acc):
    """Fill the u/v right-hand sides; return (max D, max drift speed, max u).

    Face diffusivities and drift speeds go to dx/dy and wx/wy so the maxima
    are reduced in a separate pass; boundary faces of every face array stay 0.
    """
    ny, nx = u.shape
    for j in prange(ny):
        for i in range(1, nx):
            ul = u[j, i - 1]
            ur = u[j, i]
            vl = v[j, i - 1]
            vr = v[j, i]
            gv = (vr - vl) * ihx
            av = 0.5 * (vl + vr)
            d = 0.5 * (ul + ur) * av
            gp = max(gv, 0.0)
            gm = min(gv, 0.0)
            fx[j, i] = d * (ur - ul) * ihx - av * (ul * ul * gp + ur * ur * gm)
            gx[j, i] = gv
            dx[j, i] = d
            wx[j, i] = av * (ul * gp - ur * gm)
    for j in prange(1, ny):
        for i in range(nx):
            ud = u[j - 1, i]
            uu = u[j, i]
            vd = v[j - 1, i]
            vu = v[j, i]
            gv = (vu - vd) * ihy
            av = 0.5 * (vd + vu)
            d = 0.5 * (ud + uu) * av
            gp = max(gv, 0.0)
            gm = min(gv, 0.0)
            fy[j, i] = d * (uu - ud) * ihy - av * (ud * ud * gp + uu * uu * gm)
            gy[j, i] = gv
            dy[j, i] = d
            wy[j, i] = av * (ud * gp - uu * gm)
    if kappa == 2.0:
        for j in prange(ny):
            for i in range(nx):
                uc = u[j, i]
                ru[j, i] = ((fx[j, i + 1] - fx[j, i]) * ihx + (fy[j + 1, i] - fy[j, i]) * ihy
                            + (rho * uc - mu * (uc * uc)))
                rv[j, i] = ((gx[j, i + 1] - gx[j, i]) * ihx + (gy[j + 1, i] - gy[j, i]) * ihy
                            - uc * v[j, i])
    else:
        for j in prange(ny):
            for i in range(nx):
                uc = u[j, i]
                ru[j, i] = ((fx[j, i + 1] - fx[j, i]) * ihx + (fy[j + 1, i] - fy[j, i]) * ihy
                            + (rho * uc - mu * uc ** kappa))
                rv[j, i] = ((gx[j, i + 1] - gx[j, i]) * ihx + (gy[j + 1, i] - gy[j, i]) * ihy
                            - uc * v[j, i])
    dmax = max(_colmax(dx, acc), _colmax(dy, acc))
    wmax = max(_colmax(wx, acc), _colmax(wy, acc))
    return dmax, wmax, _colmax(u, acc)


def _scan_row(un, vn, j, rowbad, ny):
    nx = un.shape[1]
    code = 0
    col = -1
    for i in range(nx):
        a = un[j, i]
        b = vn[j, i]
        if not (np.isfinite(a) and np.isfinite(b)):
            code = 3
        elif a < 0.0:
            code = 1
        elif b <= 0.0:
            code = 2
        if code != 0:
            col = i
            break
    rowbad[j] = code
    rowbad[ny + j] = col


def _axpy(u, ru, v, rv, dt, un, vn, rowbad):
    """un = u + dt*ru, vn = v + dt*rv; flags the first bad cell per row.

    rowbad[j] encodes 0 (ok), 1 (u < 0), 2 (v <= 0), 3 (non-finite) and the
    offending column is stored in rowbad[ny + j].
    """
    ny, nx = u.shape
    for j in prange(ny):
        mu = np.inf
        mv = np.inf
        z = 0.0
        for i in range(nx):
            a = u[j, i] + dt * ru[j, i]
            b = v[j, i] + dt * rv[j, i]
            un[j, i] = a
            vn[j, i] = b
            mu = min(mu, a)
            mv = min(mv, b)
            z += a * 0.0 + b * 0.0   # NaN/Inf poison the zero
        rowbad[j] = 0
        rowbad[ny + j] = -1
        if z != 0.0 or not mu >= 0.0 or not mv > 0.0:
            _scan_row(un, vn, j, rowbad, ny)


def _heun_combine(u, ra, rb, v, sa, sb, dt, un, vn, rowbad):
    ny, nx = u.shape
    h = 0.5 * dt
    for j in prange(ny):
        mu = np.inf
        mv = np.inf
        z = 0.0
        for i in range(nx):
            a = u[j, i] + h * (ra[j, i] + rb[j, i])
            b = v[j, i] + h * (sa[j, i] + sb[j, i])
            un[j, i] = a
            vn[j, i] = b
            mu = min(mu, a)
            mv = min(mv, b)
            z += a * 0.0 + b * 0.0
        rowbad[j] = 0
        rowbad[ny + j] = -1
        if z != 0.0 or not mu >= 0.0 or not mv > 0.0:
            _scan_row(un, vn, j, rowbad, ny)


def _budget(dmax, wmax, umax, h, rho, mu, kappa, cfl):
    """cfl * min(h^2/4, h^2/(4 D), 1/R, h/(2 W)); absent D or W impose nothing.

    The separate limits do not bound the summed drain of one cell, so the result
    is also capped by the step that can empty a cell losing through all four faces
    and the sink at once. That cap is slack whenever cfl <= 2/7.
    """
    h2 = h * h
    b = h2 / 4.0
    if dmax > 0.0:
        b = min(b, h2 / (4.0 * dmax))
    sink = mu * umax ** (kappa - 1.0)
    b = min(b, 1.0 / (rho + kappa * sink))
    if wmax > 0.0:
        b = min(b, h / (2.0 * wmax))
    b *= cfl
    drain_u = 4.0 * dmax / h2 + 4.0 * wmax / h + sink
    if drain_u > 0.0:
        b = min(b, 1.0 / drain_u)
    return min(b, 1.0 / (4.0 / h2 + umax))


def _euler_chunk(u, v, un, vn, ru, rv, ihx, ihy, rho, mu, kappa,
                 fx, fy, gx, gy, dx, dy, wx, wy, acc, rowbad,
                 h, cfl, dt_min, dt_max, blowup, t_target, tol, nmax, out):
    """Up to nmax forward Euler steps, stopping exactly at t_target.

    ``out`` holds [t, dt_lo, dt_hi, info] on entry/exit. Returns
    (status, steps, parity): status 0 ok, 1 blow-up (info = sup u),
    2 step collapse (info = raw budget), 3 bad cell (info = dt, rowbad set).
    When parity is 1 the current state lives in (un, vn).
    """
    ny = u.shape[0]
    t = out[0]
    dtlo = out[1]
    dthi = out[2]
    au, av, bu, bv = u, v, un, vn
    parity = 0
    n = 0
    status = 0
    while n < nmax and t < t_target - tol:
        dmax, wmax, umax = rhs_serial(au, av, ihx, ihy, rho, mu, kappa, fx, fy, gx, gy,
                                      dx, dy, wx, wy, ru, rv, acc)
        if umax > blowup:
            status = 1
            out[3] = umax
            break
        raw = budget(dmax, wmax, umax, h, rho, mu, kappa, cfl)
        if raw < dt_min:
            status = 2
            out[3] = raw
            break
        dt = min(raw, dt_max)
        hit = dt >= t_target - t - tol
        if hit:
            dt = t_target - t
        axpy_serial(au, ru, av, rv, dt, bu, bv, rowbad)
        bad = False
        for j in range(ny):
            if rowbad[j] != 0:
                bad = True
                break
        if bad:
            status = 3
            out[3] = dt
            break
        au, bu = bu, au
        av, bv = bv, av
        parity = 1 - parity
        t = t_target if hit else t + dt
        n += 1
        dtlo = min(dtlo, dt)
        dthi = max(dthi, dt)
    out[0] = t
    out[1] = dtlo
    out[2] = dthi
    return status, n, parity


_opts = dict(cache=True, boundscheck=False, nogil=True)

_scan_row = njit(**_opts)(_scan_row)
_colmax = njit(**_opts)(_colmax)
rhs_serial = njit(parallel=False, **_opts)(_rhs)
axpy_serial = njit(parallel=False, **_opts)(_axpy)
heun_serial = njit(parallel=False, **_opts)(_heun_combine)
budget = njit(**_opts)(_budget)
euler_chunk = njit(**_opts)(_euler_chunk)

_parallel = {}


def kernels(parallel: bool = False):
    """(rhs, axpy, heun_combine) for the requested threading mode."""
    if not parallel:
        return rhs_serial, axpy_serial, heun_serial
    if not _parallel:
        _parallel["k"] = (
            njit(parallel=True, **_opts)(_rhs),
            njit(parallel=True, **_opts)(_axpy),
            njit(parallel=True, **_opts)(_heun_combine),
        )
    return _parallel["k"]
