# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation of the quasi-derivative system through a cell list.

Each cell row is ``(p, q0, s0, s1, alpha, beta)`` and stands for the matrix
``C(beta) @ expm([[p, q0], [s0 + s1*z, -p]]) @ C(-alpha)`` with
``C(Q) = [[1, 0], [-Q, 1]]``.  Cells are ordered left to right.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double complex ccosh(double complex)
    double complex csinh(double complex)
    double cabs(double complex)


cdef inline void cell_matrix(const double[:] c, double complex z,
                             double complex* m) noexcept nogil:
    cdef double complex w = c[2] + c[3] * z
    cdef double complex d = c[0] * c[0] + c[1] * w
    cdef double complex s = csqrt(d)
    cdef double complex ch, sh
    if cabs(s) < 1e-4:
        ch = 1.0 + d / 2.0 + d * d / 24.0
        sh = 1.0 + d / 6.0 + d * d / 120.0
    else:
        ch = ccosh(s)
        sh = csinh(s) / s
    cdef double complex e11 = ch + sh * c[0]
    cdef double complex e12 = sh * c[1]
    cdef double complex e21 = sh * w
    cdef double complex e22 = ch - sh * c[0]
    cdef double a = c[4]
    cdef double b = c[5]
    # E @ C(-alpha)
    e11 = e11 + a * e12
    e21 = e21 + a * e22
    # C(beta) @ (...)
    m[0] = e11
    m[1] = e12
    m[2] = e21 - b * e11
    m[3] = e22 - b * e12


cdef inline double amax(double complex x) noexcept nogil:
    return fabs(x.real) + fabs(x.imag)


def transfer_matrices(double[:, ::1] cells, z):
    """Normalized transfer matrices and the logarithm of the dropped scale.

    Returns ``(T, logscale)`` with ``T`` of shape ``(nz, 2, 2)`` so that the
    true product equals ``exp(logscale) * T``.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(np.atleast_1d(z), dtype=np.complex128)
    cdef Py_ssize_t nz = zz.shape[0], nc = cells.shape[0], i, j
    out = np.empty((nz, 2, 2), dtype=np.complex128)
    logs = np.zeros(nz)
    cdef double complex[:, :, ::1] T = out
    cdef double[::1] L = logs
    cdef double complex m[4]
    cdef double complex t11, t12, t21, t22, u11, u12, u21, u22
    cdef double sc, acc
    with nogil:
        for i in range(nz):
            t11 = 1.0; t12 = 0.0; t21 = 0.0; t22 = 1.0
            acc = 0.0
            for j in range(nc):
                cell_matrix(cells[j], zz[i], m)
                u11 = m[0] * t11 + m[1] * t21
                u12 = m[0] * t12 + m[1] * t22
                u21 = m[2] * t11 + m[3] * t21
                u22 = m[2] * t12 + m[3] * t22
                sc = amax(u11)
                if amax(u12) > sc: sc = amax(u12)
                if amax(u21) > sc: sc = amax(u21)
                if amax(u22) > sc: sc = amax(u22)
                if sc > 0.0:
                    t11 = u11 / sc; t12 = u12 / sc; t21 = u21 / sc; t22 = u22 / sc
                    acc += log(sc)
                else:
                    t11 = u11; t12 = u12; t21 = u21; t22 = u22
            T[i, 0, 0] = t11; T[i, 0, 1] = t12; T[i, 1, 0] = t21; T[i, 1, 1] = t22
            L[i] = acc
    return out, logs


def propagate_state(double[:, ::1] cells, z, y0):
    """Carry initial states ``y0`` (shape ``(nz, 2)``) through all cells.

    The result is rescaled after every cell, so only its direction is kept.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(np.atleast_1d(z), dtype=np.complex128)
    cdef Py_ssize_t nz = zz.shape[0], nc = cells.shape[0], i, j
    out = np.array(np.broadcast_to(y0, (nz, 2)), dtype=np.complex128, order="C")
    cdef double complex[:, ::1] Y = out
    cdef double complex m[4]
    cdef double complex a, b, u, v
    cdef double sc
    with nogil:
        for i in range(nz):
            a = Y[i, 0]; b = Y[i, 1]
            for j in range(nc):
                cell_matrix(cells[j], zz[i], m)
                u = m[0] * a + m[1] * b
                v = m[2] * a + m[3] * b
                sc = amax(u)
                if amax(v) > sc: sc = amax(v)
                if sc > 0.0:
                    a = u / sc; b = v / sc
                else:
                    a = u; b = v
            Y[i, 0] = a; Y[i, 1] = b
    return out
