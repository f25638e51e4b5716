# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops. See ``_pykernels`` for the reference semantics."""
import numpy as np

from libc.math cimport exp, log, pow

DEF DOMAIN_FLOOR = 1e-9


cdef inline bint _rhs(double r, double f, double v, double q, double x,
                      double kappa, double gam, double inv_tau, double rho,
                      double inv_xi, double log1mrho, double* out) noexcept nogil:
    cdef double vx
    if f <= DOMAIN_FLOOR or v <= DOMAIN_FLOOR or q <= DOMAIN_FLOOR:
        return False
    vx = pow(v, inv_xi)
    out[0] = x - kappa * r - gam * (f - 1.0)
    out[1] = r
    out[2] = (f - vx) * inv_tau
    out[3] = (f * (1.0 - (exp(log1mrho / f) - (1.0 - rho)) / rho) - vx / v * q) * inv_tau
    return True


cdef Py_ssize_t _integrate_region(double[:, ::1] x, double[:, ::1] y, Py_ssize_t i,
                                  double dt, double[:, ::1] params) noexcept nogil:
    cdef Py_ssize_t K = x.shape[0], j
    cdef double kappa = params[0, i], gam = params[1, i]
    cdef double inv_tau = 1.0 / params[2, i], rho = params[3, i]
    cdef double inv_xi = 1.0 / params[4, i], V0 = params[5, i]
    cdef double k1 = params[6, i], k2 = params[7, i], k3 = params[8, i]
    cdef double lr = log(1.0 - rho)
    cdef double r = 0.0, f = 1.0, v = 1.0, q = 1.0, xin
    cdef double half = 0.5 * dt, sixth = dt / 6.0
    cdef double a[4]
    cdef double b[4]
    cdef double c[4]
    cdef double d[4]
    for j in range(K):
        if f <= DOMAIN_FLOOR or v <= DOMAIN_FLOOR or q <= DOMAIN_FLOOR:
            return j
        y[j, i] = V0 * (k1 * (1.0 - q) + k2 * (1.0 - q / v) + k3 * (1.0 - v))
        if j == K - 1:
            break
        xin = x[j, i]
        if not _rhs(r, f, v, q, xin, kappa, gam, inv_tau, rho, inv_xi, lr, a):
            return j
        if not _rhs(r + half * a[0], f + half * a[1], v + half * a[2], q + half * a[3],
                    xin, kappa, gam, inv_tau, rho, inv_xi, lr, b):
            return j
        if not _rhs(r + half * b[0], f + half * b[1], v + half * b[2], q + half * b[3],
                    xin, kappa, gam, inv_tau, rho, inv_xi, lr, c):
            return j
        if not _rhs(r + dt * c[0], f + dt * c[1], v + dt * c[2], q + dt * c[3],
                    xin, kappa, gam, inv_tau, rho, inv_xi, lr, d):
            return j
        r += sixth * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
        f += sixth * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
        v += sixth * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
        q += sixth * (a[3] + 2.0 * b[3] + 2.0 * c[3] + d[3])
    return -1


def balloon_rk4(double[:, ::1] x, double dt, double[:, ::1] params):
    """RK4 integration of independent Balloon-Windkessel units.

    Returns ``(y, bad_step, bad_region)``; ``bad_step`` is -1 on success.
    """
    cdef Py_ssize_t K = x.shape[0], n = x.shape[1], i, bad = -1, where = -1
    y_arr = np.zeros((K, n))
    cdef double[:, ::1] y = y_arr
    with nogil:
        for i in range(n):
            bad = _integrate_region(x, y, i, dt, params)
            if bad >= 0:
                where = i
                break
    return y_arr, bad, where


def linear_recursion(double[:, ::1] F, double[:, ::1] u, double[::1] x0, Py_ssize_t stride):
    """x[j+1] = F x[j] + u[j]; returns (x[stride], x[2 stride], ...), final state."""
    cdef Py_ssize_t K = u.shape[0], m = F.shape[0]
    cdef Py_ssize_t nout = K // stride
    cdef Py_ssize_t j, a, b, o = 0
    out_arr = np.empty((nout, m))
    cdef double[:, ::1] out = out_arr
    cur_arr = np.array(x0, dtype=np.float64, copy=True)
    nxt_arr = np.empty(m)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    cdef double acc
    with nogil:
        for j in range(K):
            for a in range(m):
                acc = u[j, a]
                for b in range(m):
                    acc = acc + F[a, b] * cur[b]
                nxt[a] = acc
            for a in range(m):
                cur[a] = nxt[a]
            if (j + 1) % stride == 0:
                for a in range(m):
                    out[o, a] = cur[a]
                o += 1
    return out_arr, cur_arr
