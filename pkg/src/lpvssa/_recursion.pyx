# cython: language_level=3
"""Compiled state recursions for affine LPV state-space models.

Both kernels run x(t+1) = sum_i mu_i(t) (A_i x(t) + B_i u(t) + K_i e(t))
from x(1) = 0. They return (output, status) where status is -1 on success
or the 0-based sample index at which max|x| exceeded ``limit``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline int _step(const double[:, :, ::1] A, const double[:, :, ::1] B,
                      const double[:, :, ::1] K, const double[:, ::1] u,
                      const double[:, ::1] mu, double[::1] x, double[::1] xn,
                      double[::1] e, Py_ssize_t t, double limit) noexcept nogil:
    cdef Py_ssize_t n_mu = A.shape[0], n = A.shape[1]
    cdef Py_ssize_t nu = B.shape[2], ny = K.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double m, acc
    for j in range(n):
        xn[j] = 0.0
    for i in range(n_mu):
        m = mu[t, i]
        if m == 0.0:
            continue
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc = acc + A[i, j, k] * x[k]
            for k in range(nu):
                acc = acc + B[i, j, k] * u[t, k]
            for k in range(ny):
                acc = acc + K[i, j, k] * e[k]
            xn[j] = xn[j] + m * acc
    cdef int bad = 0
    for j in range(n):
        x[j] = xn[j]
        if not (fabs(x[j]) <= limit):
            bad = 1
    return bad


def simulate(const double[:, :, ::1] A, const double[:, :, ::1] B,
             const double[:, :, ::1] K, const double[:, ::1] C,
             const double[:, ::1] D, const double[:, ::1] u,
             const double[:, ::1] mu, const double[:, ::1] v, double limit):
    """y(t) = C x(t) + D u(t) + v(t) driven by noise path ``v``."""
    cdef Py_ssize_t T = u.shape[0], n = A.shape[1]
    cdef Py_ssize_t ny = C.shape[0], nu = D.shape[1]
    cdef Py_ssize_t t, j, k
    cdef double acc
    out = np.zeros((T, ny))
    cdef double[:, ::1] y = out
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xn = np.zeros(n)
    cdef double[::1] e = np.zeros(ny)
    cdef int status = -1
    with nogil:
        for t in range(T):
            for j in range(ny):
                acc = v[t, j]
                for k in range(n):
                    acc = acc + C[j, k] * x[k]
                for k in range(nu):
                    acc = acc + D[j, k] * u[t, k]
                y[t, j] = acc
                e[j] = v[t, j]
            if _step(A, B, K, u, mu, x, xn, e, t, limit):
                status = <int>t
                break
    return out, status


def predict(const double[:, :, ::1] A, const double[:, :, ::1] B,
            const double[:, :, ::1] K, const double[:, ::1] C,
            const double[:, ::1] D, const double[:, ::1] u,
            const double[:, ::1] mu, const double[:, ::1] y, double limit):
    """One-step-ahead predictor fed by e(t) = y(t) - yhat(t)."""
    cdef Py_ssize_t T = u.shape[0], n = A.shape[1]
    cdef Py_ssize_t ny = C.shape[0], nu = D.shape[1]
    cdef Py_ssize_t t, j, k
    cdef double acc
    out = np.zeros((T, ny))
    cdef double[:, ::1] yh = out
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xn = np.zeros(n)
    cdef double[::1] e = np.zeros(ny)
    cdef int status = -1
    with nogil:
        for t in range(T):
            for j in range(ny):
                acc = 0.0
                for k in range(n):
                    acc = acc + C[j, k] * x[k]
                for k in range(nu):
                    acc = acc + D[j, k] * u[t, k]
                yh[t, j] = acc
                e[j] = y[t, j] - acc
            if _step(A, B, K, u, mu, x, xn, e, t, limit):
                status = <int>t
                break
    return out, status
