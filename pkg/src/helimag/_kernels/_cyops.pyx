# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels (OpenMP cellwise maps, no reductions).

Mirrors ``reference.py`` operation for operation; the scatter of the flux
Laplacian is reformulated as a gather so cells can be processed in parallel
deterministically.
"""

import numpy as np

from cython.parallel cimport prange


cdef inline void _face_flux(const double* a, const double* b, int ax,
                            double lex, double coef_k, double h,
                            double* F) noexcept nogil:
    # F = lex*(b - a)/h + coef_k * (((a+b)/2) x e_ax)
    cdef double avg0 = 0.5 * (a[0] + b[0])
    cdef double avg1 = 0.5 * (a[1] + b[1])
    cdef double avg2 = 0.5 * (a[2] + b[2])
    F[0] = lex * (b[0] - a[0]) / h
    F[1] = lex * (b[1] - a[1]) / h
    F[2] = lex * (b[2] - a[2]) / h
    if ax == 0:
        F[1] += coef_k * avg2
        F[2] -= coef_k * avg1
    elif ax == 1:
        F[0] -= coef_k * avg2
        F[2] += coef_k * avg0
    else:
        F[0] += coef_k * avg1
        F[1] -= coef_k * avg0


cdef inline void _accumulate(double* acc, const double* F, int ax,
                             double g, double half_r, double sign) noexcept nogil:
    # acc += sign*g*F + half_r*(F x e_ax)
    acc[0] += sign * g * F[0]
    acc[1] += sign * g * F[1]
    acc[2] += sign * g * F[2]
    if ax == 0:
        acc[1] += half_r * F[2]
        acc[2] -= half_r * F[1]
    elif ax == 1:
        acc[0] -= half_r * F[2]
        acc[2] += half_r * F[0]
    else:
        acc[0] += half_r * F[1]
        acc[1] -= half_r * F[0]


def exchange_dmi_field(m_in, double lex, double kappa, spacing, int nthreads=1):
    m_arr = np.ascontiguousarray(m_in, dtype=np.float64)
    cdef double[:, :, :, ::1] m = m_arr
    cdef Py_ssize_t nx = m.shape[0], ny = m.shape[1], nz = m.shape[2]
    out_arr = np.zeros((nx, ny, nz, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef double hx = spacing[0], hy = spacing[1], hz = spacing[2]
    cdef double coef_k = kappa / lex
    cdef double half_r = 0.5 * kappa / lex
    cdef double gx = lex / hx, gy = lex / hy, gz = lex / hz
    cdef Py_ssize_t i, j, k
    cdef double F[3]
    cdef double acc[3]

    for i in prange(nx, nogil=True, num_threads=nthreads, schedule="static"):
        for j in range(ny):
            for k in range(nz):
                acc[0] = 0.0
                acc[1] = 0.0
                acc[2] = 0.0
                if nx >= 2:
                    if i + 1 < nx:
                        _face_flux(&m[i, j, k, 0], &m[i + 1, j, k, 0], 0,
                                   lex, coef_k, hx, F)
                        _accumulate(acc, F, 0, gx, half_r, 1.0)
                    if i > 0:
                        _face_flux(&m[i - 1, j, k, 0], &m[i, j, k, 0], 0,
                                   lex, coef_k, hx, F)
                        _accumulate(acc, F, 0, gx, half_r, -1.0)
                if ny >= 2:
                    if j + 1 < ny:
                        _face_flux(&m[i, j, k, 0], &m[i, j + 1, k, 0], 1,
                                   lex, coef_k, hy, F)
                        _accumulate(acc, F, 1, gy, half_r, 1.0)
                    if j > 0:
                        _face_flux(&m[i, j - 1, k, 0], &m[i, j, k, 0], 1,
                                   lex, coef_k, hy, F)
                        _accumulate(acc, F, 1, gy, half_r, -1.0)
                if nz >= 2:
                    if k + 1 < nz:
                        _face_flux(&m[i, j, k, 0], &m[i, j, k + 1, 0], 2,
                                   lex, coef_k, hz, F)
                        _accumulate(acc, F, 2, gz, half_r, 1.0)
                    if k > 0:
                        _face_flux(&m[i, j, k - 1, 0], &m[i, j, k, 0], 2,
                                   lex, coef_k, hz, F)
                        _accumulate(acc, F, 2, gz, half_r, -1.0)
                out[i, j, k, 0] = acc[0]
                out[i, j, k, 1] = acc[1]
                out[i, j, k, 2] = acc[2]
    return out_arr


def llg_rhs(m_in, h_in, double alpha, int nthreads=1):
    m_arr = np.ascontiguousarray(m_in, dtype=np.float64)
    h_arr = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef double[:, :, :, ::1] m = m_arr
    cdef double[:, :, :, ::1] H = h_arr
    cdef Py_ssize_t nx = m.shape[0], ny = m.shape[1], nz = m.shape[2]
    out_arr = np.empty((nx, ny, nz, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef double denom = 1.0 + alpha * alpha
    cdef Py_ssize_t i, j, k
    cdef double p0, p1, p2, q0, q1, q2

    for i in prange(nx, nogil=True, num_threads=nthreads, schedule="static"):
        for j in range(ny):
            for k in range(nz):
                p0 = m[i, j, k, 1] * H[i, j, k, 2] - m[i, j, k, 2] * H[i, j, k, 1]
                p1 = m[i, j, k, 2] * H[i, j, k, 0] - m[i, j, k, 0] * H[i, j, k, 2]
                p2 = m[i, j, k, 0] * H[i, j, k, 1] - m[i, j, k, 1] * H[i, j, k, 0]
                q0 = m[i, j, k, 1] * p2 - m[i, j, k, 2] * p1
                q1 = m[i, j, k, 2] * p0 - m[i, j, k, 0] * p2
                q2 = m[i, j, k, 0] * p1 - m[i, j, k, 1] * p0
                out[i, j, k, 0] = -(p0 + alpha * q0) / denom
                out[i, j, k, 1] = -(p1 + alpha * q1) / denom
                out[i, j, k, 2] = -(p2 + alpha * q2) / denom
    return out_arr


def midpoint_velocity(m_in, h_in, double alpha, int nthreads=1):
    m_arr = np.ascontiguousarray(m_in, dtype=np.float64)
    h_arr = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef double[:, :, :, ::1] m = m_arr
    cdef double[:, :, :, ::1] H = h_arr
    cdef Py_ssize_t nx = m.shape[0], ny = m.shape[1], nz = m.shape[2]
    out_arr = np.empty((nx, ny, nz, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double p0, p1, p2, q0, q1, q2, denom

    for i in prange(nx, nogil=True, num_threads=nthreads, schedule="static"):
        for j in range(ny):
            for k in range(nz):
                p0 = m[i, j, k, 1] * H[i, j, k, 2] - m[i, j, k, 2] * H[i, j, k, 1]
                p1 = m[i, j, k, 2] * H[i, j, k, 0] - m[i, j, k, 0] * H[i, j, k, 2]
                p2 = m[i, j, k, 0] * H[i, j, k, 1] - m[i, j, k, 1] * H[i, j, k, 0]
                q0 = m[i, j, k, 1] * p2 - m[i, j, k, 2] * p1
                q1 = m[i, j, k, 2] * p0 - m[i, j, k, 0] * p2
                q2 = m[i, j, k, 0] * p1 - m[i, j, k, 1] * p0
                denom = 1.0 + alpha * alpha * (
                    m[i, j, k, 0] * m[i, j, k, 0]
                    + m[i, j, k, 1] * m[i, j, k, 1]
                    + m[i, j, k, 2] * m[i, j, k, 2]
                )
                out[i, j, k, 0] = -(p0 + alpha * q0) / denom
                out[i, j, k, 1] = -(p1 + alpha * q1) / denom
                out[i, j, k, 2] = -(p2 + alpha * q2) / denom
    return out_arr
