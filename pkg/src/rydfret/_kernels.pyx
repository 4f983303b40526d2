# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay call-compatible with _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport M_PI

cnp.import_array()


def numerov_inward(const double[::1] g, double h, double y_last, double y_prev):
    """Solve y'' = g y on a uniform grid, from the last point inwards.

    ``y[-1] = y_last`` and ``y[-2] = y_prev`` seed the recurrence.
    """
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t i
    cdef double c = h * h / 12.0
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] y = out
    if n == 0:
        return out
    y[n - 1] = y_last
    if n == 1:
        return out
    y[n - 2] = y_prev
    for i in range(n - 3, -1, -1):
        y[i] = (2.0 * (1.0 + 5.0 * c * g[i + 1]) * y[i + 1]
                - (1.0 - c * g[i + 2]) * y[i + 2]) / (1.0 - c * g[i])
    return out


cdef inline void _deriv(const double[:, ::1] hr, const double[:, ::1] hi,
                        const double[::1] pr, const double[::1] pi,
                        double[::1] outr, double[::1] outi, Py_ssize_t n) noexcept nogil:
    # d(psi)/dt = -2 pi i (hr + i hi)(pr + i pi)
    cdef Py_ssize_t i, j
    cdef double ar, ai, w = 2.0 * M_PI
    for i in range(n):
        ar = 0.0
        ai = 0.0
        for j in range(n):
            ar = ar + hr[i, j] * pr[j] - hi[i, j] * pi[j]
            ai = ai + hr[i, j] * pi[j] + hi[i, j] * pr[j]
        outr[i] = w * ai
        outi[i] = -w * ar


def rk4_propagate(H, psi0, times, double dt):
    """Classical RK4 for d(psi)/dt = -2 pi i H psi, H in MHz and t in us.

    Returns the state at each requested time (shape ``(len(times), dim)``).
    Times must be non-decreasing and start at or after zero. The step is
    shortened where needed to land exactly on each output time.
    """
    Hc = np.asarray(H, dtype=np.complex128)
    cdef double[:, ::1] hr = np.ascontiguousarray(Hc.real)
    cdef double[:, ::1] hi = np.ascontiguousarray(Hc.imag)
    cdef double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t n = hr.shape[0], nt = ts.shape[0]
    cdef Py_ssize_t i, k, m, nsteps
    cdef double t = 0.0, step, span, h2, h6
    p0 = np.asarray(psi0, dtype=np.complex128)
    cdef double[::1] pr = np.ascontiguousarray(p0.real)
    cdef double[::1] pi = np.ascontiguousarray(p0.imag)
    kr_arr = np.empty((4, n))
    ki_arr = np.empty((4, n))
    cdef double[:, ::1] kr = kr_arr
    cdef double[:, ::1] ki = ki_arr
    cdef double[::1] tr = np.empty(n)
    cdef double[::1] tim = np.empty(n)
    out_arr = np.empty((nt, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    for k in range(nt):
        span = ts[k] - t
        nsteps = <Py_ssize_t>(span / dt)
        if nsteps * dt < span * (1.0 - 1e-12):
            nsteps += 1
        if nsteps > 0:
            step = span / nsteps
            h2 = 0.5 * step
            h6 = step / 6.0
            with nogil:
                for m in range(nsteps):
                    _deriv(hr, hi, pr, pi, kr[0], ki[0], n)
                    for i in range(n):
                        tr[i] = pr[i] + h2 * kr[0, i]
                        tim[i] = pi[i] + h2 * ki[0, i]
                    _deriv(hr, hi, tr, tim, kr[1], ki[1], n)
                    for i in range(n):
                        tr[i] = pr[i] + h2 * kr[1, i]
                        tim[i] = pi[i] + h2 * ki[1, i]
                    _deriv(hr, hi, tr, tim, kr[2], ki[2], n)
                    for i in range(n):
                        tr[i] = pr[i] + step * kr[2, i]
                        tim[i] = pi[i] + step * ki[2, i]
                    _deriv(hr, hi, tr, tim, kr[3], ki[3], n)
                    for i in range(n):
                        pr[i] = pr[i] + h6 * (kr[0, i] + 2.0 * kr[1, i] + 2.0 * kr[2, i] + kr[3, i])
                        pi[i] = pi[i] + h6 * (ki[0, i] + 2.0 * ki[1, i] + 2.0 * ki[2, i] + ki[3, i])
            t = ts[k]
        for i in range(n):
            out[k, i] = pr[i] + 1j * pi[i]
    return out_arr
