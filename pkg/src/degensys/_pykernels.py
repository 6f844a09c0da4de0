"""NumPy implementations of the kernels in ``_ckernels.pyx``.

Same signatures and the same algorithm; used when the extension is not
built or when ``DEGENSYS_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import math

import numpy as np


def assemble_csr(dx, dy, hx, hy):
    dx = np.asarray(dx, dtype=float)
    ny, nx = dx.shape[0], dx.shape[1] - 1
    n = nx * ny
    cx = 1.0 / (hx * hx)
    idx = np.arange(n).reshape(ny, nx)
    diag = (dx[:, :-1] + dx[:, 1:]) * cx + 1.0
    # (row, col, value) triples; the stable sort below restores CSR order
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [None]
    rows.append(idx[:, 1:].ravel())
    cols.append(idx[:, :-1].ravel())
    vals.append(-dx[:, 1:-1].ravel() * cx)
    rows.append(idx[:, :-1].ravel())
    cols.append(idx[:, 1:].ravel())
    vals.append(-dx[:, 1:-1].ravel() * cx)
    if dy is not None:
        dy = np.asarray(dy, dtype=float)
        cy = 1.0 / (hy * hy)
        diag = diag + (dy[:-1, :] + dy[1:, :]) * cy
        rows.append(idx[1:, :].ravel())
        cols.append(idx[:-1, :].ravel())
        vals.append(-dy[1:-1, :].ravel() * cy)
        rows.append(idx[:-1, :].ravel())
        cols.append(idx[1:, :].ravel())
        vals.append(-dy[1:-1, :].ravel() * cy)
    vals[0] = diag.ravel()
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.lexsort((cols, rows))
    indices = cols[order].astype(np.int64)
    data = vals[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, indices, data


def csr_matvec(indptr, indices, data, x):
    prod = data * np.asarray(x)[indices]
    return np.add.reduceat(prod, indptr[:-1]) if prod.size else np.zeros(len(indptr) - 1)


def _diagonal(indptr, indices, data):
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    diag = np.zeros(len(indptr) - 1)
    on = rows == indices
    diag[rows[on]] = data[on]
    return diag


def pcg(indptr, indices, data, rhs, rtol, maxiter):
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs)
    bnorm = math.sqrt(float(rhs @ rhs))
    if bnorm == 0.0:
        return x, 0, 0.0
    target = rtol * bnorm
    dinv = 1.0 / _diagonal(indptr, indices, data)
    res = rhs.copy()
    rnorm = bnorm
    it = 0
    while it < maxiter:
        z = dinv * res
        p = z.copy()
        rz = float(res @ z)
        while it < maxiter and rnorm > 0.5 * target:
            ap = csr_matvec(indptr, indices, data, p)
            step = rz / float(p @ ap)
            x += step * p
            res -= step * ap
            it += 1
            rnorm = math.sqrt(float(res @ res))
            z = dinv * res
            rz_new = float(res @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        res = rhs - csr_matvec(indptr, indices, data, x)
        rnorm = math.sqrt(float(res @ res))
        if rnorm <= target:
            break
    return x, it, rnorm
