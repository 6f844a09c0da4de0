# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil assembly, CSR products and Jacobi-preconditioned CG.

Mirrors :mod:`degensys._pykernels` operation for operation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def assemble_csr(double[:, ::1] dx, object dy_obj, double hx, double hy):
    """CSR arrays of ``-div(D grad .) + I`` from face coefficients.

    ``dx`` has shape ``(ny, nx + 1)``; ``dy_obj`` is ``None`` in 1D or an
    array of shape ``(ny + 1, nx)``.
    """
    cdef Py_ssize_t ny = dx.shape[0], nx = dx.shape[1] - 1
    cdef Py_ssize_t n = nx * ny, i, j, p, k = 0
    cdef bint two_d = dy_obj is not None
    cdef double[:, ::1] dy
    cdef double cx = 1.0 / (hx * hx), cy = 0.0
    if two_d:
        dy = dy_obj
        cy = 1.0 / (hy * hy)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indptr = np.empty(n + 1, dtype=np.int64)
    cdef Py_ssize_t nnz = n + 2 * (nx - 1) * ny + (2 * (ny - 1) * nx if two_d else 0)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indices = np.empty(nnz, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] data = np.empty(nnz, dtype=np.float64)
    cdef double diag
    indptr[0] = 0
    for j in range(ny):
        for i in range(nx):
            p = j * nx + i
            diag = (dx[j, i] + dx[j, i + 1]) * cx + 1.0
            if two_d:
                diag += (dy[j, i] + dy[j + 1, i]) * cy
                if j > 0:
                    indices[k] = p - nx
                    data[k] = -dy[j, i] * cy
                    k += 1
            if i > 0:
                indices[k] = p - 1
                data[k] = -dx[j, i] * cx
                k += 1
            indices[k] = p
            data[k] = diag
            k += 1
            if i < nx - 1:
                indices[k] = p + 1
                data[k] = -dx[j, i + 1] * cx
                k += 1
            if two_d and j < ny - 1:
                indices[k] = p + nx
                data[k] = -dy[j + 1, i] * cy
                k += 1
            indptr[p + 1] = k
    return indptr, indices, data


cdef inline void _matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                         const double[::1] data, const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t r, q
    cdef double acc
    for r in range(out.shape[0]):
        acc = 0.0
        for q in range(indptr[r], indptr[r + 1]):
            acc += data[q] * x[indices[q]]
        out[r] = acc


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


def csr_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const double[::1] x):
    out = np.empty(indptr.shape[0] - 1)
    cdef double[::1] o = out
    _matvec(indptr, indices, data, x, o)
    return out


def pcg(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
        const double[::1] data, const double[::1] rhs, double rtol, Py_ssize_t maxiter):
    """Jacobi-preconditioned CG from a zero initial guess.

    Returns ``(x, iterations, true_residual_norm)``.  The recursive residual
    is re-synchronised with the true one before accepting convergence.
    """
    cdef Py_ssize_t n = rhs.shape[0], i, r, q, it = 0
    x_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    cdef double[::1] res = np.empty(n)
    cdef double[::1] z = np.empty(n)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] ap = np.empty(n)
    cdef double[::1] dinv = np.empty(n)
    cdef double bnorm = sqrt(_dot(rhs, rhs)), target, rz, rz_new, step, rnorm
    if bnorm == 0.0:
        return x_arr, 0, 0.0
    target = rtol * bnorm
    for r in range(n):
        dinv[r] = 0.0
        for q in range(indptr[r], indptr[r + 1]):
            if indices[q] == r:
                dinv[r] = 1.0 / data[q]
    with nogil:
        for i in range(n):
            res[i] = rhs[i]
        rnorm = bnorm
        while it < maxiter:
            # (re)start from the current residual
            for i in range(n):
                z[i] = dinv[i] * res[i]
                p[i] = z[i]
            rz = _dot(res, z)
            while it < maxiter and rnorm > 0.5 * target:
                _matvec(indptr, indices, data, p, ap)
                step = rz / _dot(p, ap)
                for i in range(n):
                    x[i] += step * p[i]
                    res[i] -= step * ap[i]
                it += 1
                rnorm = sqrt(_dot(res, res))
                for i in range(n):
                    z[i] = dinv[i] * res[i]
                rz_new = _dot(res, z)
                for i in range(n):
                    p[i] = z[i] + (rz_new / rz) * p[i]
                rz = rz_new
            _matvec(indptr, indices, data, x, ap)
            for i in range(n):
                res[i] = rhs[i] - ap[i]
            rnorm = sqrt(_dot(res, res))
            if rnorm <= target:
                break
    return x_arr, it, rnorm
