# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic Jacobi eigensolver for small dense Hermitian matrices.

Mirrors :mod:`qcapacity._jacobi_py` rotation for rotation; the two are
interchangeable and the test suite runs against both.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef double _off_mass(const double complex* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0
    cdef double complex z
    for i in range(n):
        for j in range(n):
            if i != j:
                z = a[i * n + j]
                s += z.real * z.real + z.imag * z.imag
    return sqrt(s)


cdef double _frob(const double complex* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    cdef double complex z
    for i in range(n * n):
        z = a[i]
        s += z.real * z.real + z.imag * z.imag
    return sqrt(s)


cdef inline void _rotate_cols(double complex* m, Py_ssize_t n, Py_ssize_t p, Py_ssize_t q,
                              double cs, double sn, double pr, double pi) noexcept nogil:
    # M <- M G with G = [[cs, sn], [-sn conj(ph), cs conj(ph)]], ph = pr + i pi
    cdef Py_ssize_t r
    cdef double xr, xi, yr, yi, wr, wi
    for r in range(n):
        xr = m[r * n + p].real
        xi = m[r * n + p].imag
        yr = m[r * n + q].real
        yi = m[r * n + q].imag
        wr = pr * yr + pi * yi      # conj(ph) * y
        wi = pr * yi - pi * yr
        m[r * n + p] = (cs * xr - sn * wr) + 1j * (cs * xi - sn * wi)
        m[r * n + q] = (sn * xr + cs * wr) + 1j * (sn * xi + cs * wi)


cdef inline void _rotate_rows(double complex* m, Py_ssize_t n, Py_ssize_t p, Py_ssize_t q,
                              double cs, double sn, double pr, double pi) noexcept nogil:
    # M <- G^H M
    cdef Py_ssize_t r
    cdef double xr, xi, yr, yi, wr, wi
    for r in range(n):
        xr = m[p * n + r].real
        xi = m[p * n + r].imag
        yr = m[q * n + r].real
        yi = m[q * n + r].imag
        wr = pr * yr - pi * yi      # ph * y
        wi = pr * yi + pi * yr
        m[p * n + r] = (cs * xr - sn * wr) + 1j * (cs * xi - sn * wi)
        m[q * n + r] = (sn * xr + cs * wr) + 1j * (sn * xi + cs * wi)


cdef int _jacobi_inplace(double complex* a, double complex* v, Py_ssize_t n,
                         bint want_vectors, double tol, int max_sweeps) noexcept nogil:
    """Diagonalise the row-major ``n x n`` matrix ``a`` in place.

    Rotations are accumulated into ``v`` when ``want_vectors``.  Returns the
    number of sweeps used, or -1 when ``max_sweeps`` ran out.
    """
    cdef Py_ssize_t p, q
    cdef int sweep
    cdef double app, aqq, g, tau, t, cs, sn, thresh, fro, pr, pi
    cdef double complex apq
    fro = _frob(a, n)
    thresh = tol * (1.0 if fro < 1.0 else fro)
    for sweep in range(max_sweeps):
        if _off_mass(a, n) < thresh:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p * n + q]
                g = sqrt(apq.real * apq.real + apq.imag * apq.imag)
                if g < 1e-300:
                    continue
                pr = apq.real / g
                pi = apq.imag / g
                app = a[p * n + p].real
                aqq = a[q * n + q].real
                tau = (aqq - app) / (2.0 * g)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                cs = 1.0 / sqrt(1.0 + t * t)
                sn = t * cs
                _rotate_cols(a, n, p, q, cs, sn, pr, pi)
                _rotate_rows(a, n, p, q, cs, sn, pr, pi)
                a[p * n + q] = 0.0
                a[q * n + p] = 0.0
                a[p * n + p] = app - t * g
                a[q * n + q] = aqq + t * g
                if want_vectors:
                    _rotate_cols(v, n, p, q, cs, sn, pr, pi)
    if _off_mass(a, n) < thresh:
        return max_sweeps
    return -1


def eigh(h, double tol=1e-14, int max_sweeps=100):
    """Eigen-decomposition of one Hermitian matrix: ``(w, V)``, ``w`` ascending."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] a = np.array(h, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] v = np.eye(n, dtype=np.complex128)
    cdef double complex[:, ::1] av = a
    cdef double complex[:, ::1] vv = v
    cdef int status
    with nogil:
        status = _jacobi_inplace(&av[0, 0], &vv[0, 0], n, True, tol, max_sweeps)
    if status < 0:
        raise ArithmeticError("Jacobi sweeps did not converge")
    w = np.real(np.diagonal(a)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvalsh_batch(hs, double tol=1e-14, int max_sweeps=100):
    """Ascending eigenvalues for a stack of Hermitian matrices of shape (N, d, d)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] a = np.array(hs, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((m, n), dtype=np.float64)
    cdef double complex[:, :, ::1] av = a
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t k, i
    cdef int status
    cdef int failures = 0
    with nogil:
        for k in range(m):
            status = _jacobi_inplace(&av[k, 0, 0], NULL, n, False, tol, max_sweeps)
            if status < 0:
                failures += 1
            for i in range(n):
                ov[k, i] = av[k, i, i].real
    if failures:
        raise ArithmeticError(f"Jacobi sweeps did not converge for {failures} matrices")
    out.sort(axis=1)
    return out
