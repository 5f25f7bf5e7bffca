# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled 3D pair kernels: neighbor search and the two SPH pair sums.

Mirrors the call signatures and semantics of the pure-numpy module
``impactsph._pairs_py`` (3D only); ``impactsph.backend`` dispatches.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, pow, sqrt

cnp.import_array()

cdef double PI = 3.141592653589793

cdef inline double _shape(double q) nogil:
    if q <= 1.0:
        return 1.0 - 1.5 * q * q + 0.75 * q * q * q
    elif q <= 2.0:
        return 0.25 * (2.0 - q) * (2.0 - q) * (2.0 - q)
    return 0.0

cdef inline double _shape_deriv(double q) nogil:
    if q <= 1.0:
        return -3.0 * q + 2.25 * q * q
    elif q <= 2.0:
        return -0.75 * (2.0 - q) * (2.0 - q)
    return 0.0


def build_pairs(double[:, ::1] pos, double[::1] h, double support):
    """All pairs (i < j) with r < support*(h_i+h_j)/2 via a uniform grid."""
    cdef Py_ssize_t n = pos.shape[0]
    if n < 2:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty

    cdef double hmax = 0.0
    cdef Py_ssize_t k
    for k in range(n):
        if h[k] > hmax:
            hmax = h[k]
    cdef double cell = support * hmax
    if cell <= 0.0:
        raise ValueError("smoothing lengths must be positive")

    cdef cnp.ndarray[cnp.int64_t, ndim=1] cx = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cy = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cz = np.empty(n, dtype=np.int64)
    cdef long long[::1] cxv = cx, cyv = cy, czv = cz
    for k in range(n):
        cxv[k] = <long long>floor(pos[k, 0] / cell)
        cyv[k] = <long long>floor(pos[k, 1] / cell)
        czv[k] = <long long>floor(pos[k, 2] / cell)

    cdef long long minx = cx.min(), miny = cy.min(), minz = cz.min()
    cdef long long nx = cx.max() - minx + 1
    cdef long long ny = cy.max() - miny + 1
    key_arr = (cx - minx) + nx * ((cy - miny) + ny * (cz - minz))
    order_arr = np.argsort(key_arr, kind="stable").astype(np.int64)
    skey_arr = key_arr[order_arr]
    cdef long long[::1] skey = skey_arr
    cdef long long[::1] order = order_arr

    # capacity-doubling output buffers
    cdef Py_ssize_t cap = 8 * n, cnt = 0
    out_i = np.empty(cap, dtype=np.int64)
    out_j = np.empty(cap, dtype=np.int64)
    cdef long long[::1] oi = out_i
    cdef long long[::1] oj = out_j

    cdef Py_ssize_t p, q, lo, hi, mid
    cdef long long gx, gy, gz, want
    cdef int dx_, dy_, dz_
    cdef double dx, dy, dz, r2, rc
    for p in range(n):
        for dx_ in range(-1, 2):
            gx = cxv[p] + dx_ - minx
            if gx < 0 or gx >= nx:
                continue
            for dy_ in range(-1, 2):
                gy = cyv[p] + dy_ - miny
                if gy < 0 or gy >= ny:
                    continue
                for dz_ in range(-1, 2):
                    gz = czv[p] + dz_ - minz
                    want = gx + nx * (gy + ny * gz)
                    # binary search for the cell's slice in skey
                    lo = 0
                    hi = n
                    while lo < hi:
                        mid = (lo + hi) >> 1
                        if skey[mid] < want:
                            lo = mid + 1
                        else:
                            hi = mid
                    while lo < n and skey[lo] == want:
                        q = order[lo]
                        lo += 1
                        if q <= p:
                            continue
                        dx = pos[p, 0] - pos[q, 0]
                        dy = pos[p, 1] - pos[q, 1]
                        dz = pos[p, 2] - pos[q, 2]
                        r2 = dx * dx + dy * dy + dz * dz
                        rc = support * 0.5 * (h[p] + h[q])
                        if r2 < rc * rc:
                            if cnt == cap:
                                cap *= 2
                                out_i = np.concatenate(
                                    [out_i, np.empty(cap - cnt, dtype=np.int64)])
                                out_j = np.concatenate(
                                    [out_j, np.empty(cap - cnt, dtype=np.int64)])
                                oi = out_i
                                oj = out_j
                            oi[cnt] = p
                            oj[cnt] = q
                            cnt += 1
    pi = out_i[:cnt]
    pj = out_j[:cnt]
    srt = np.lexsort((pj, pi))
    return np.ascontiguousarray(pi[srt]), np.ascontiguousarray(pj[srt])


def strain_rates(double[:, ::1] pos, double[:, ::1] vel, double[::1] mass,
                 double[::1] rho, double[::1] h,
                 unsigned char[::1] kind,
                 long long[::1] pi, long long[::1] pj):
    """Continuity density rate and velocity gradient over the pair list."""
    cdef Py_ssize_t n = pos.shape[0], npair = pi.shape[0], p, a, b
    drho_arr = np.zeros(n)
    L_arr = np.zeros((n, 3, 3))
    cdef double[::1] drho = drho_arr
    cdef double[:, :, ::1] L = L_arr
    cdef Py_ssize_t i, j
    cdef double dx[3]
    cdef double vij[3]
    cdef double gw[3]
    cdef double r, hbar, q, scale, vdotgw, fac
    for p in range(npair):
        i = pi[p]
        j = pj[p]
        dx[0] = pos[i, 0] - pos[j, 0]
        dx[1] = pos[i, 1] - pos[j, 1]
        dx[2] = pos[i, 2] - pos[j, 2]
        vij[0] = vel[i, 0] - vel[j, 0]
        vij[1] = vel[i, 1] - vel[j, 1]
        vij[2] = vel[i, 2] - vel[j, 2]
        r = sqrt(dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2])
        hbar = 0.5 * (h[i] + h[j])
        q = r / hbar
        if r > 0.0:
            scale = (1.0 / PI) / (hbar * hbar * hbar * hbar) \
                * _shape_deriv(q) / r
        else:
            scale = 0.0
        gw[0] = scale * dx[0]
        gw[1] = scale * dx[1]
        gw[2] = scale * dx[2]
        vdotgw = vij[0] * gw[0] + vij[1] * gw[1] + vij[2] * gw[2]
        if kind[j] <= 1:
            drho[i] += rho[i] * mass[j] / rho[j] * vdotgw
            fac = mass[j] / rho[i]
            for a in range(3):
                for b in range(3):
                    L[i, a, b] += fac * (-vij[a]) * gw[b]
        if kind[i] <= 1:
            drho[j] += rho[j] * mass[i] / rho[i] * vdotgw
            fac = mass[i] / rho[j]
            for a in range(3):
                for b in range(3):
                    L[j, a, b] += fac * (-vij[a]) * gw[b]
    return drho_arr, L_arr


def momentum_energy_rates(double[:, ::1] pos, double[:, ::1] vel,
                          double[::1] mass, double[::1] rho, double[::1] h,
                          double[:, :, ::1] sigma, double[::1] cs,
                          double[:, :, ::1] R,
                          long long[::1] pi, long long[::1] pj,
                          double dp0, double alpha, double beta,
                          double eps_as, double n_as):
    """Acceleration, viscous heating and the CFL viscosity signal."""
    cdef Py_ssize_t n = pos.shape[0], npair = pi.shape[0], p, a, b
    acc_arr = np.zeros((n, 3))
    dedt_arr = np.zeros(n)
    vsig_arr = np.zeros(n)
    cdef double[:, ::1] acc = acc_arr
    cdef double[::1] dedt = dedt_arr
    cdef double[::1] vsig = vsig_arr
    cdef Py_ssize_t i, j
    cdef double dx[3]
    cdef double vij[3]
    cdef double gw[3]
    cdef double T[3][3]
    cdef double base[3]
    cdef double r, hbar, q, kap, w, scale, vdotx, phi, cbar, rhobar
    cdef double Pi_visc, w0, f, fn, ri2, rj2, vdotgw, heat, visc
    kap = 1.0 / PI
    for p in range(npair):
        i = pi[p]
        j = pj[p]
        dx[0] = pos[i, 0] - pos[j, 0]
        dx[1] = pos[i, 1] - pos[j, 1]
        dx[2] = pos[i, 2] - pos[j, 2]
        vij[0] = vel[i, 0] - vel[j, 0]
        vij[1] = vel[i, 1] - vel[j, 1]
        vij[2] = vel[i, 2] - vel[j, 2]
        r = sqrt(dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2])
        hbar = 0.5 * (h[i] + h[j])
        q = r / hbar
        w = kap / (hbar * hbar * hbar) * _shape(q)
        if r > 0.0:
            scale = kap / (hbar * hbar * hbar * hbar) * _shape_deriv(q) / r
        else:
            scale = 0.0
        gw[0] = scale * dx[0]
        gw[1] = scale * dx[1]
        gw[2] = scale * dx[2]

        ri2 = rho[i] * rho[i]
        rj2 = rho[j] * rho[j]
        for a in range(3):
            for b in range(3):
                T[a][b] = sigma[i, a, b] / ri2 + sigma[j, a, b] / rj2

        vdotx = vij[0] * dx[0] + vij[1] * dx[1] + vij[2] * dx[2]
        Pi_visc = 0.0
        visc = 0.0
        if vdotx < 0.0:
            phi = hbar * vdotx / (r * r + 0.01 * hbar * hbar)
            cbar = 0.5 * (cs[i] + cs[j])
            rhobar = 0.5 * (rho[i] + rho[j])
            Pi_visc = (-alpha * cbar * phi + beta * phi * phi) / rhobar
            visc = alpha * cbar + beta * fabs(phi)
        for a in range(3):
            T[a][a] -= Pi_visc

        if eps_as > 0.0:
            w0 = kap / (hbar * hbar * hbar) * _shape(dp0 / hbar)
            if w0 > 0.0:
                f = w / w0
                fn = pow(f, n_as)
                for a in range(3):
                    for b in range(3):
                        T[a][b] += fn * (R[i, a, b] + R[j, a, b])

        for a in range(3):
            base[a] = T[a][0] * gw[0] + T[a][1] * gw[1] + T[a][2] * gw[2]
            acc[i, a] += mass[j] * base[a]
            acc[j, a] -= mass[i] * base[a]

        # force-consistent heating: the pair's internal-energy gain
        # exactly balances the kinetic energy its force removes
        heat = -0.5 * (base[0] * vij[0] + base[1] * vij[1]
                       + base[2] * vij[2])
        dedt[i] += mass[j] * heat
        dedt[j] += mass[i] * heat
        if visc > vsig[i]:
            vsig[i] = visc
        if visc > vsig[j]:
            vsig[j] = visc
    return acc_arr, dedt_arr, vsig_arr
