# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled dense-layer kernels: fused affine/ReLU/dropout passes over BLAS.

Float64 only; the numpy fallback (kernels_numpy) covers everything else.
Semantics match kernels_numpy bit-for-bit up to BLAS summation order.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _gemm_rm(bint ta, bint tb, int m, int n, int k, double alpha,
                   double* a, int lda, double* b, int ldb,
                   double beta, double* c, int ldc) noexcept nogil:
    # Row-major C(m,n) = op(A)(m,k) @ op(B)(k,n) via the Fortran transpose trick.
    cdef char fa = b'T' if tb else b'N'
    cdef char fb = b'T' if ta else b'N'
    dgemm(&fa, &fb, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef object _affine(double[:, ::1] x, double[:, ::1] w, double[::1] bias):
    cdef int rows = x.shape[0], kin = x.shape[1], cols = w.shape[1]
    out_arr = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    if rows and cols:
        with nogil:
            if kin:
                _gemm_rm(0, 0, rows, cols, kin, 1.0,
                         &x[0, 0], kin, &w[0, 0], cols, 0.0, &out[0, 0], cols)
            else:
                for i in range(rows):
                    for j in range(cols):
                        out[i, j] = 0.0
            for i in range(rows):
                for j in range(cols):
                    out[i, j] += bias[j]
    return out_arr


def forward(weights, biases, x, masks=None):
    """Network output for input rows `x` (float64, C-contiguous)."""
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t l, i, j
    cdef double[:, ::1] hv
    cdef double[:, ::1] mv
    h = np.ascontiguousarray(x, dtype=np.float64)
    for l in range(last):
        h = _affine(h, weights[l], biases[l])
        hv = h
        with nogil:
            for i in range(hv.shape[0]):
                for j in range(hv.shape[1]):
                    if hv[i, j] < 0.0:
                        hv[i, j] = 0.0
        if masks is not None:
            mv = masks[l]
            with nogil:
                for i in range(hv.shape[0]):
                    for j in range(hv.shape[1]):
                        hv[i, j] *= mv[i, j]
    return _affine(h, weights[last], biases[last])


def forward_cached(weights, biases, x, masks=None):
    """Output plus layer inputs and ReLU gates for the backward pass."""
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t l, i, j
    cdef double[:, ::1] hv
    cdef double[:, ::1] mv
    cdef cnp.uint8_t[:, ::1] gv
    h = np.ascontiguousarray(x, dtype=np.float64)
    inputs = [h]
    gates = []
    for l in range(last):
        h = _affine(h, weights[l], biases[l])
        gate = np.empty((h.shape[0], h.shape[1]), dtype=np.uint8)
        hv = h
        gv = gate
        with nogil:
            for i in range(hv.shape[0]):
                for j in range(hv.shape[1]):
                    if hv[i, j] > 0.0:
                        gv[i, j] = 1
                    else:
                        gv[i, j] = 0
                        hv[i, j] = 0.0
        if masks is not None:
            mv = masks[l]
            with nogil:
                for i in range(hv.shape[0]):
                    for j in range(hv.shape[1]):
                        hv[i, j] *= mv[i, j]
        gates.append(gate)
        inputs.append(h)
    out = _affine(h, weights[last], biases[last])
    return out, inputs, gates


def backward(weights, inputs, gates, masks, grad_out):
    """Parameter and input gradients from the output gradient."""
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t l, i, j
    cdef int rows, kin, cols
    cdef double[:, ::1] gv, xv, wv, gwv, gxv, mv
    cdef double[::1] gbv
    cdef cnp.uint8_t[:, ::1] gatev
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    g = np.ascontiguousarray(grad_out, dtype=np.float64)

    for l in range(last, -1, -1):
        if l < last:
            gv = g
            if masks is not None:
                mv = masks[l]
                with nogil:
                    for i in range(gv.shape[0]):
                        for j in range(gv.shape[1]):
                            gv[i, j] *= mv[i, j]
            gatev = gates[l]
            with nogil:
                for i in range(gv.shape[0]):
                    for j in range(gv.shape[1]):
                        if not gatev[i, j]:
                            gv[i, j] = 0.0
        xin = inputs[l]
        xv = xin
        gv = g
        rows = gv.shape[0]
        kin = xv.shape[1]
        cols = gv.shape[1]
        gw = np.empty((kin, cols), dtype=np.float64)
        gb = np.empty(cols, dtype=np.float64)
        gwv = gw
        gbv = gb
        with nogil:
            if kin and cols:
                if rows:
                    _gemm_rm(1, 0, kin, cols, rows, 1.0,
                             &xv[0, 0], kin, &gv[0, 0], cols, 0.0, &gwv[0, 0], cols)
                else:
                    for i in range(kin):
                        for j in range(cols):
                            gwv[i, j] = 0.0
            for j in range(cols):
                gbv[j] = 0.0
            for i in range(rows):
                for j in range(cols):
                    gbv[j] += gv[i, j]
        grad_w[l] = gw
        grad_b[l] = gb
        wv = weights[l]
        gx = np.empty((rows, kin), dtype=np.float64)
        gxv = gx
        if rows and kin:
            with nogil:
                if cols:
                    _gemm_rm(0, 1, rows, kin, cols, 1.0,
                             &gv[0, 0], cols, &wv[0, 0], cols, 0.0, &gxv[0, 0], kin)
                else:
                    for i in range(rows):
                        for j in range(kin):
                            gxv[i, j] = 0.0
        g = gx
    return grad_w, grad_b, g
