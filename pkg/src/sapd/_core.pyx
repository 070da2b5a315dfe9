# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the solver hot path.

Same contracts as the pure-numpy module ``_kernels``: real-stacked
least squares (real in-phase amplitude model), fused support
evaluation with the pseudo-derivative, and the projected ridge bias
solve used by off-grid refinement. Sizes are tiny (M around 8, K < M),
so dense Householder QR with explicit loops beats any BLAS dispatch.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, sin, sqrt

cnp.import_array()

BACKEND_NAME = "cython"

cdef double PI = 3.14159265358979323846

DEG = PI / 180.0


cdef int _qr_factor(double[:, ::1] a, double[::1] diag) noexcept nogil:
    """In-place Householder QR of a (n, k); returns numerical rank.

    Householder vectors are stored below the diagonal (with v0 on the
    diagonal); R's diagonal goes to ``diag`` and its strict upper
    triangle stays in ``a``.
    """
    cdef Py_ssize_t n = a.shape[0], k = a.shape[1]
    cdef Py_ssize_t i, j, q
    cdef double nrm, alpha, vtv, dot, scale, maxdiag = 0.0
    cdef int rank = 0
    for j in range(k):
        nrm = 0.0
        for i in range(j, n):
            nrm += a[i, j] * a[i, j]
        nrm = sqrt(nrm)
        if nrm == 0.0:
            diag[j] = 0.0
            continue
        alpha = -nrm if a[j, j] >= 0.0 else nrm
        a[j, j] -= alpha
        diag[j] = alpha
        vtv = 0.0
        for i in range(j, n):
            vtv += a[i, j] * a[i, j]
        if vtv > 0.0:
            for q in range(j + 1, k):
                dot = 0.0
                for i in range(j, n):
                    dot += a[i, j] * a[i, q]
                scale = 2.0 * dot / vtv
                for i in range(j, n):
                    a[i, q] -= scale * a[i, j]
    for j in range(k):
        if fabs(diag[j]) > maxdiag:
            maxdiag = fabs(diag[j])
    for j in range(k):
        if fabs(diag[j]) > 1e-13 * maxdiag and diag[j] != 0.0:
            rank += 1
        else:
            diag[j] = 0.0
    return rank


cdef void _qr_apply(double[:, ::1] a, double[::1] diag, double[::1] b) noexcept nogil:
    """Apply the stored Householder reflections to one RHS in place."""
    cdef Py_ssize_t n = a.shape[0], k = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double vtv, dot, scale
    for j in range(k):
        vtv = 0.0
        for i in range(j, n):
            vtv += a[i, j] * a[i, j]
        if vtv == 0.0:
            continue
        dot = 0.0
        for i in range(j, n):
            dot += a[i, j] * b[i]
        scale = 2.0 * dot / vtv
        for i in range(j, n):
            b[i] -= scale * a[i, j]


cdef void _qr_backsub(double[:, ::1] a, double[::1] diag, double[::1] b,
                      double[::1] x) noexcept nogil:
    """Solve R x = b[:k]; rank-deficient columns get a zero coefficient."""
    cdef Py_ssize_t k = a.shape[1]
    cdef Py_ssize_t j, q
    cdef double acc
    for j in range(k - 1, -1, -1):
        if diag[j] == 0.0:
            x[j] = 0.0
            continue
        acc = b[j]
        for q in range(j + 1, k):
            acc -= a[j, q] * x[q]
        x[j] = acc / diag[j]


cdef int _stack_solve(double[:, ::1] ar_work, double[:, ::1] ar_orig,
                      double[::1] yr, double[::1] diag, double[::1] rhs,
                      double[::1] x, double[::1] rvec, double* res_out) noexcept nogil:
    """LS solve of ar_orig x ~ yr via QR of ar_work (a scratch copy).

    Fills x and the explicit residual vector rvec; returns rank.
    """
    cdef Py_ssize_t n = ar_orig.shape[0], k = ar_orig.shape[1]
    cdef Py_ssize_t i, j
    cdef int rank
    cdef double acc, res2 = 0.0
    rank = _qr_factor(ar_work, diag)
    for i in range(n):
        rhs[i] = yr[i]
    _qr_apply(ar_work, diag, rhs)
    _qr_backsub(ar_work, diag, rhs, x)
    for i in range(n):
        acc = yr[i]
        for j in range(k):
            acc -= ar_orig[i, j] * x[j]
        rvec[i] = acc
        res2 += acc * acc
    res_out[0] = sqrt(res2)
    return rank


def build_ab(int num_elements, double spacing, thetas):
    """Steering matrix and per-degree derivative columns for angles."""
    cdef cnp.ndarray th = np.ascontiguousarray(np.atleast_1d(thetas), dtype=np.float64)
    cdef double[::1] tv = th
    cdef Py_ssize_t k = tv.shape[0], m = num_elements
    a = np.empty((m, k), dtype=np.complex128)
    b = np.empty((m, k), dtype=np.complex128)
    cdef double complex[:, ::1] av = a
    cdef double complex[:, ::1] bv = b
    cdef Py_ssize_t i, j
    cdef double s, c, ph, rate
    for j in range(k):
        s = sin(tv[j] * PI / 180.0)
        c = cos(tv[j] * PI / 180.0)
        for i in range(m):
            ph = -2.0 * PI * spacing * i * s
            rate = -2.0 * PI * spacing * i * c * (PI / 180.0)
            av[i, j] = cos(ph) + 1j * sin(ph)
            # b = (1j * rate) * a
            bv[i, j] = (1j * rate) * av[i, j]
    return a, b


cdef _stack_real(a, y):
    """Real-stacked copies of a complex system, C-contiguous."""
    ar = np.empty((2 * a.shape[0], a.shape[1]), dtype=np.float64)
    ar[: a.shape[0]] = a.real
    ar[a.shape[0]:] = a.imag
    yr = np.empty(2 * a.shape[0], dtype=np.float64)
    yr[: a.shape[0]] = y.real
    yr[a.shape[0]:] = y.imag
    return ar, yr


def ls_solve(a, y):
    """Real-amplitude LS fit; returns (x, residual norm, rank)."""
    ar, yr = _stack_real(a, y)
    cdef Py_ssize_t n = ar.shape[0], k = ar.shape[1]
    work = ar.copy()
    x = np.empty(k, dtype=np.float64)
    rvec = np.empty(n, dtype=np.float64)
    diag = np.empty(k, dtype=np.float64)
    rhs = np.empty(n, dtype=np.float64)
    cdef double res = 0.0
    cdef int rank
    cdef double[:, ::1] wv = work
    cdef double[:, ::1] av = ar
    cdef double[::1] yv = yr, dv = diag, rv = rhs, xv = x, rvv = rvec
    rank = _stack_solve(wv, av, yv, dv, rv, xv, rvv, &res)
    return x, res, rank


def residual(a, y):
    """Residual norm of the real-amplitude LS fit."""
    return ls_solve(a, y)[1]


def eval_support(a, b, y):
    """Fused LS fit and pseudo-derivative; returns (x, res, beta, rank)."""
    ar, yr = _stack_real(a, y)
    cdef Py_ssize_t n = ar.shape[0], k = ar.shape[1]
    cdef Py_ssize_t i, j
    work = ar.copy()
    x = np.empty(k, dtype=np.float64)
    rvec = np.empty(n, dtype=np.float64)
    diag = np.empty(k, dtype=np.float64)
    rhs = np.empty(n, dtype=np.float64)
    cdef double res = 0.0
    cdef int rank_a, rank_b
    cdef double[:, ::1] wv = work
    cdef double[:, ::1] av = ar
    cdef double[::1] yv = yr, dv = diag, rv = rhs, xv = x, rvv = rvec
    rank_a = _stack_solve(wv, av, yv, dv, rv, xv, rvv, &res)
    # scaled-derivative system against the fit residual
    br = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] brv = br
    cdef const double complex[:, ::1] bcv = np.ascontiguousarray(b, dtype=np.complex128)
    cdef Py_ssize_t m = n // 2
    for j in range(k):
        for i in range(m):
            brv[i, j] = bcv[i, j].real * xv[j]
            brv[m + i, j] = bcv[i, j].imag * xv[j]
    beta = np.empty(k, dtype=np.float64)
    cdef double[::1] betav = beta
    cdef double res_b = 0.0
    bwork = br.copy()
    cdef double[:, ::1] bwv = bwork
    rvec2 = np.empty(n, dtype=np.float64)
    cdef double[::1] rv2 = rvec2
    rank_b = _stack_solve(bwv, brv, rvv, dv, rv, betav, rv2, &res_b)
    return x, res, beta, min(rank_a, rank_b)


def beta_proj(a, b, y, double lam):
    """Projected ridge pseudo-derivative; returns (beta, x, res, rank)."""
    ar, yr = _stack_real(a, y)
    cdef Py_ssize_t n = ar.shape[0], k = ar.shape[1]
    cdef Py_ssize_t i, j, q
    work = ar.copy()
    x = np.empty(k, dtype=np.float64)
    rvec = np.empty(n, dtype=np.float64)
    diag = np.empty(k, dtype=np.float64)
    rhs = np.empty(n, dtype=np.float64)
    cdef double res = 0.0
    cdef int rank_a
    cdef double[:, ::1] wv = work
    cdef double[:, ::1] av = ar
    cdef double[::1] yv = yr, dv = diag, rv = rhs, xv = x, rvv = rvec
    rank_a = _stack_solve(wv, av, yv, dv, rv, xv, rvv, &res)
    br = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] brv = br
    cdef const double complex[:, ::1] bcv = np.ascontiguousarray(b, dtype=np.complex128)
    cdef Py_ssize_t m = n // 2
    for j in range(k):
        for i in range(m):
            brv[i, j] = bcv[i, j].real * xv[j]
            brv[m + i, j] = bcv[i, j].imag * xv[j]
    # orthogonalize the derivative columns against the steering span:
    # reuse the QR of ar (held in work/diag) on each derivative column
    coef = np.empty(k, dtype=np.float64)
    cdef double[::1] coefv = coef
    col = np.empty(n, dtype=np.float64)
    cdef double[::1] colv = col
    bp = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] bpv = bp
    cdef double acc
    for q in range(k):
        for i in range(n):
            colv[i] = brv[i, q]
        _qr_apply(wv, dv, colv)
        _qr_backsub(wv, dv, colv, coefv)
        for i in range(n):
            acc = brv[i, q]
            for j in range(k):
                acc -= av[i, j] * coefv[j]
            bpv[i, q] = acc
    # ridge normal equations on the projected system
    gram = np.empty((k, k), dtype=np.float64)
    grhs = np.empty(k, dtype=np.float64)
    cdef double[:, ::1] gv = gram
    cdef double[::1] grv = grhs
    for i in range(k):
        for j in range(k):
            acc = 0.0
            for q in range(n):
                acc += bpv[q, i] * bpv[q, j]
            gv[i, j] = acc
        gv[i, i] += lam
        acc = 0.0
        for q in range(n):
            acc += bpv[q, i] * rvv[q]
        grv[i] = acc
    try:
        beta = np.linalg.solve(gram, grhs)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(gram, grhs, rcond=None)[0]
    return beta, x, res, rank_a


def bartlett(a_grid, y):
    """Single-snapshot spatial spectrum |a(theta)^H y|^2 over the grid."""
    cdef const double complex[:, ::1] av = np.ascontiguousarray(a_grid, dtype=np.complex128)
    cdef const double complex[::1] yv = np.ascontiguousarray(y, dtype=np.complex128)
    cdef Py_ssize_t m = av.shape[0], g = av.shape[1]
    p = np.empty(g, dtype=np.float64)
    cdef double[::1] pv = p
    cdef Py_ssize_t i, j
    cdef double complex acc
    for j in range(g):
        acc = 0
        for i in range(m):
            acc += av[i, j].conjugate() * yv[i]
        pv[j] = acc.real * acc.real + acc.imag * acc.imag
    return p
