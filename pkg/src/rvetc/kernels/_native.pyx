# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: box-constrained FISTA and two-body RK4.

Matrix-vector products go through BLAS (dsymv; the QP Hessian is
symmetric), everything else is plain C, so the per-iteration Python
overhead of the fallback disappears. Semantics match `fallback.py`.
"""
from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free

from scipy.linalg.cython_blas cimport dsymv

BACKEND = "native"


cdef inline void _grad(double[:, ::1] H, double* f, double* u, double* out,
                       int n) noexcept nogil:
    # out = H u + f; either triangle works: storage holds the full symmetric H
    cdef char uplo = b'L'
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1, i
    dsymv(&uplo, &n, &one, &H[0, 0], &n, u, &inc, &zero, out, &inc)
    for i in range(n):
        out[i] += f[i]


cdef inline void _two_body_rhs(double* y, double mu, double* out) noexcept nogil:
    cdef double rn = sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
    cdef double s = -mu / (rn * rn * rn)
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    out[3] = s * y[0]
    out[4] = s * y[1]
    out[5] = s * y[2]


def rk4_two_body(y_in, double mu, double dt, int substeps):
    """Advance [r; v] by dt under point-mass gravity, classical RK4, fixed step."""
    import numpy as np
    y_arr = np.array(y_in, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef double h = dt / substeps
    cdef double yt[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double ys[6]
    cdef int i, step
    with nogil:
        for i in range(6):
            ys[i] = y[i]
        for step in range(substeps):
            _two_body_rhs(ys, mu, k1)
            for i in range(6):
                yt[i] = ys[i] + 0.5 * h * k1[i]
            _two_body_rhs(yt, mu, k2)
            for i in range(6):
                yt[i] = ys[i] + 0.5 * h * k2[i]
            _two_body_rhs(yt, mu, k3)
            for i in range(6):
                yt[i] = ys[i] + h * k3[i]
            _two_body_rhs(yt, mu, k4)
            for i in range(6):
                ys[i] = ys[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(6):
            y[i] = ys[i]
    return y_arr


cdef inline double _clip(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef double _kkt_residual(double[:, ::1] H, double* f, double u_bar, double* u,
                          double* g, int n) noexcept nogil:
    cdef int i
    cdef double r, worst = 0.0
    _grad(H, f, u, g, n)
    for i in range(n):
        if u[i] <= -u_bar:
            r = -g[i] if -g[i] > 0.0 else 0.0
        elif u[i] >= u_bar:
            r = g[i] if g[i] > 0.0 else 0.0
        else:
            r = fabs(g[i])
        if r > worst:
            worst = r
    return worst


def kkt_residual_box(double[:, ::1] H, double[::1] f, double u_bar, double[::1] u):
    """Max KKT violation of min 1/2 u'Hu + f'u over the box (see fallback)."""
    cdef int n = f.shape[0]
    cdef double* g = <double*> malloc(n * sizeof(double))
    if g == NULL:
        raise MemoryError()
    cdef double out
    try:
        with nogil:
            out = _kkt_residual(H, &f[0], u_bar, &u[0], g, n)
    finally:
        free(g)
    return out


def qp_box_fista(double[:, ::1] H, double[::1] f, double u_bar, u0,
                 double lip, double tol, int max_iter, int check_every=20):
    """Accelerated projected gradient (FISTA) with adaptive restart on a box."""
    import numpy as np
    x_arr = np.clip(np.array(u0, dtype=np.float64), -u_bar, u_bar)
    cdef double[::1] x = x_arr
    cdef int n = f.shape[0]
    cdef double* y = <double*> malloc(4 * n * sizeof(double))
    if y == NULL:
        raise MemoryError()
    cdef double* g = y + n
    cdef double* xn = y + 2 * n
    cdef double* scratch = y + 3 * n
    cdef double t = 1.0, tn, dot, res
    cdef int it, i, done_iter = max_iter
    try:
        with nogil:
            for i in range(n):
                y[i] = x[i]
            for it in range(max_iter):
                _grad(H, &f[0], y, g, n)
                for i in range(n):
                    xn[i] = _clip(y[i] - g[i] / lip, -u_bar, u_bar)
                tn = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
                dot = 0.0
                for i in range(n):
                    dot += (xn[i] - x[i]) * (y[i] - xn[i])
                if dot > 0.0:
                    for i in range(n):
                        y[i] = xn[i]
                    tn = 1.0
                else:
                    for i in range(n):
                        y[i] = xn[i] + ((t - 1.0) / tn) * (xn[i] - x[i])
                for i in range(n):
                    x[i] = xn[i]
                t = tn
                if (it + 1) % check_every == 0:
                    res = _kkt_residual(H, &f[0], u_bar, &x[0], scratch, n)
                    if res <= tol:
                        done_iter = it + 1
                        break
    finally:
        free(y)
    return x_arr, done_iter
