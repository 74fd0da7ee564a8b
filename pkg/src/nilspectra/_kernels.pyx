# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: banded LDL^H factorization used for inertia counts.

Band storage is column-major by diagonal offset: ``col[j, d] = A[j + d, j]``
for ``0 <= d <= b``.  The array is overwritten with the factor.
"""

from libc.math cimport fabs, INFINITY


def band_ldl_inertia_real(double[:, ::1] col, double shift, double tiny):
    """Negative-pivot count of ``A - shift*I``; returns ``(neg, breakdown_row, min_abs_pivot)``.

    ``breakdown_row`` is -1 on success, otherwise the row whose pivot fell below ``tiny``.
    """
    cdef Py_ssize_t N = col.shape[0]
    cdef Py_ssize_t b = col.shape[1] - 1
    cdef Py_ssize_t k, i, j, lim
    cdef double d, f, minpiv = INFINITY
    cdef long neg = 0
    cdef Py_ssize_t broke = -1
    with nogil:
        for k in range(N):
            col[k, 0] -= shift
        for k in range(N):
            d = col[k, 0]
            if fabs(d) < minpiv:
                minpiv = fabs(d)
            if fabs(d) <= tiny:
                broke = k
                break
            if d < 0:
                neg += 1
            lim = b
            if N - 1 - k < lim:
                lim = N - 1 - k
            for j in range(1, lim + 1):
                f = col[k, j] / d
                if f == 0.0:
                    continue
                for i in range(j, lim + 1):
                    col[k + j, i - j] -= col[k, i] * f
    return neg, broke, minpiv


def band_ldl_inertia_complex(double complex[:, ::1] col, double shift, double tiny):
    """Hermitian variant of :func:`band_ldl_inertia_real` (lower band, complex entries)."""
    cdef Py_ssize_t N = col.shape[0]
    cdef Py_ssize_t b = col.shape[1] - 1
    cdef Py_ssize_t k, i, j, lim
    cdef double d, minpiv = INFINITY
    cdef double complex f
    cdef long neg = 0
    cdef Py_ssize_t broke = -1
    with nogil:
        for k in range(N):
            col[k, 0] = col[k, 0] - shift
        for k in range(N):
            d = col[k, 0].real
            if fabs(d) < minpiv:
                minpiv = fabs(d)
            if fabs(d) <= tiny:
                broke = k
                break
            if d < 0:
                neg += 1
            lim = b
            if N - 1 - k < lim:
                lim = N - 1 - k
            for j in range(1, lim + 1):
                f = col[k, j].conjugate() / d
                if f == 0:
                    continue
                for i in range(j, lim + 1):
                    col[k + j, i - j] = col[k + j, i - j] - col[k, i] * f
    return neg, broke, minpiv
