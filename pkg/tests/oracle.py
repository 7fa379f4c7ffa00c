"""Plain-loop reference evaluation of the discrete operators, for cross-checks."""
import numpy as np


def face_flux_1d(ul, ur, vl, vr, h, donor=True):
    du = (ur - ul) / h
    dv = (vr - vl) / h
    av = 0.5 * (vl + vr)
    if donor:
        up = ul if dv > 0 else ur
        taxis = up * up * av * dv
    else:
        taxis = 0.5 * (ul * ul + ur * ur) * av * dv
    return 0.5 * (ul + ur) * av * du - taxis


def rhs_loops(u, v, hx, hy, rho=1.0, mu=1.0, kappa=2.0):
    ny, nx = u.shape
    ru = np.zeros_like(u)
    rv = np.zeros_like(u)
    for j in range(ny):
        for i in range(nx):
            s_u = 0.0
            s_v = 0.0
            for di, dj, h in ((1, 0, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)):
                a, b = i + di, j + dj
                if not (0 <= a < nx and 0 <= b < ny):
                    continue
                # flux out of (i, j) toward the neighbour, oriented along +normal
                f = face_flux_1d(u[j, i], u[b, a], v[j, i], v[b, a], h)
                s_u += f / h
                s_v += (v[b, a] - v[j, i]) / (h * h)
            ru[j, i] = s_u + rho * u[j, i] - mu * u[j, i] ** kappa
            rv[j, i] = s_v - u[j, i] * v[j, i]
    return ru, rv
