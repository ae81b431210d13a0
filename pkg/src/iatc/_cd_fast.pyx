# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled coordinate-descent kernel for the lasso.

Same contract as ``_cd_py.lasso_cd``: objective
0.5 * ||y - X w||^2 + alpha * ||w||_1, optional nonnegativity, duality-gap
stopping. Column access wants Fortran order; the caller ensures it.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _dot_res(double[::1, :] X, double[::1] v, Py_ssize_t j, Py_ssize_t n) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += X[i, j] * v[i]
    return acc


cdef double _dual_gap(double[::1, :] X, double[::1] y, double[::1] w,
                      double[::1] R, double alpha, bint nonneg,
                      Py_ssize_t n, Py_ssize_t p) nogil:
    cdef double r_norm2 = 0.0, ry = 0.0, l1 = 0.0
    cdef double dual_norm = -1e308
    cdef double xta, const, gap
    cdef Py_ssize_t i, j
    for i in range(n):
        r_norm2 += R[i] * R[i]
        ry += R[i] * y[i]
    for j in range(p):
        xta = _dot_res(X, R, j, n)
        if not nonneg:
            xta = fabs(xta)
        if xta > dual_norm:
            dual_norm = xta
        l1 += fabs(w[j])
    if dual_norm > alpha and dual_norm > 0.0:
        const = alpha / dual_norm
        gap = 0.5 * (r_norm2 + const * const * r_norm2)
    else:
        const = 1.0
        gap = r_norm2
    gap += alpha * l1 - const * ry
    if gap < 0.0:
        gap = 0.0
    return gap


def lasso_cd(X, y, double alpha, w, bint nonneg, int max_sweeps, double gap_tol):
    """Cyclic coordinate descent; updates ``w`` in place.

    Returns (n_sweeps, gap, converged).
    """
    cdef double[::1, :] Xv = np.asfortranarray(X, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wv = w
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t p = Xv.shape[1]
    cdef double[::1] col_norms = np.empty(p, dtype=np.float64)
    cdef double[::1] R = np.empty(n, dtype=np.float64)
    cdef double gap = 1e308
    cdef double w_j, rho, new, w_max, d_w_max, d, acc
    cdef Py_ssize_t i, j
    cdef int sweep = 0
    cdef bint converged = False

    with nogil:
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += Xv[i, j] * Xv[i, j]
            col_norms[j] = acc
        for i in range(n):
            R[i] = yv[i]
        for j in range(p):
            if wv[j] != 0.0:
                for i in range(n):
                    R[i] -= wv[j] * Xv[i, j]

        for sweep in range(1, max_sweeps + 1):
            w_max = 0.0
            d_w_max = 0.0
            for j in range(p):
                if col_norms[j] == 0.0:
                    continue
                w_j = wv[j]
                if w_j != 0.0:
                    for i in range(n):
                        R[i] += w_j * Xv[i, j]
                rho = _dot_res(Xv, R, j, n)
                if nonneg:
                    new = rho - alpha
                    if new < 0.0:
                        new = 0.0
                    new = new / col_norms[j]
                else:
                    if rho > alpha:
                        new = (rho - alpha) / col_norms[j]
                    elif rho < -alpha:
                        new = (rho + alpha) / col_norms[j]
                    else:
                        new = 0.0
                wv[j] = new
                if new != 0.0:
                    for i in range(n):
                        R[i] -= new * Xv[i, j]
                d = fabs(new - w_j)
                if d > d_w_max:
                    d_w_max = d
                d = fabs(new)
                if d > w_max:
                    w_max = d
            if (w_max == 0.0 or d_w_max / w_max < 1e-9
                    or sweep % 10 == 0 or sweep == max_sweeps):
                gap = _dual_gap(Xv, yv, wv, R, alpha, nonneg, n, p)
                if gap < gap_tol:
                    converged = True
                    break
    return sweep, gap, converged
