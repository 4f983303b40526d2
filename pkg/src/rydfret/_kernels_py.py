"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def numerov_inward(g, h, y_last, y_prev):
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    y = np.zeros(n)
    if n == 0:
        return y
    y[-1] = y_last
    if n == 1:
        return y
    y[-2] = y_prev
    c = h * h / 12.0
    # python floats are much faster than numpy scalars in this loop
    gl = g.tolist()
    yl = y.tolist()
    for i in range(n - 3, -1, -1):
        yl[i] = (2.0 * (1.0 + 5.0 * c * gl[i + 1]) * yl[i + 1]
                 - (1.0 - c * gl[i + 2]) * yl[i + 2]) / (1.0 - c * gl[i])
    return np.array(yl)


def rk4_propagate(H, psi0, times, dt):
    a = -2j * np.pi * np.asarray(H, dtype=np.complex128)
    psi = np.array(psi0, dtype=np.complex128)
    times = np.asarray(times, dtype=np.float64)
    out = np.empty((times.size, psi.size), dtype=np.complex128)
    t = 0.0
    for k, target in enumerate(times):
        span = target - t
        nsteps = int(span / dt)
        if nsteps * dt < span * (1.0 - 1e-12):
            nsteps += 1
        if nsteps > 0:
            step = span / nsteps
            for _ in range(nsteps):
                k1 = a @ psi
                k2 = a @ (psi + 0.5 * step * k1)
                k3 = a @ (psi + 0.5 * step * k2)
                k4 = a @ (psi + step * k3)
                psi = psi + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = target
        out[k] = psi
    return out
