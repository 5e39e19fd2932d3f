# cython: language_level=3
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

STATUS_INACTIVE = 0
STATUS_FOUND = 1
STATUS_DEGENERATE = 2


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


cdef double _sign(double x) noexcept nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


cdef void _l1_inplace(double* v, double* out, double* work, Py_ssize_t n, double radius) noexcept nogil:
    cdef Py_ssize_t i, rho = 0
    cdef double total = 0.0, css = 0.0, theta, a, css_rho = 0.0
    for i in range(n):
        total += fabs(v[i])
    if total <= radius:
        for i in range(n):
            out[i] = v[i]
        return
    for i in range(n):
        work[i] = fabs(v[i])
    qsort(work, n, sizeof(double), _cmp_desc)
    for i in range(n):
        css += work[i]
        if work[i] * (i + 1) > css - radius:
            rho = i
            css_rho = css
    theta = (css_rho - radius) / (rho + 1.0)
    for i in range(n):
        a = fabs(v[i]) - theta
        out[i] = _sign(v[i]) * a if a > 0.0 else 0.0


cdef void _l2_inplace(double* v, double* out, Py_ssize_t n, double radius) noexcept nogil:
    cdef Py_ssize_t i
    cdef double ss = 0.0, scale
    for i in range(n):
        ss += v[i] * v[i]
    ss = sqrt(ss)
    if ss <= radius:
        for i in range(n):
            out[i] = v[i]
        return
    scale = radius / ss
    for i in range(n):
        out[i] = v[i] * scale


def project_l1_ball(v, double radius):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(n)
    if n:
        _l1_inplace(&vv[0], &out[0], &work[0], n, radius)
    return out


def project_l2_ball(v, double radius):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    if n:
        _l2_inplace(&vv[0], &out[0], n, radius)
    return out


cdef int _ellipsoid(double* v, double* out, double* w, double* lw2,
                    double* evals, double* evecs, bint diagonal, Py_ssize_t n,
                    double tol, int max_iter, double* mu_out, double* f_out) noexcept nogil:
    # evecs is row-major n x n; column j is the j-th eigenvector
    cdef Py_ssize_t i, j
    cdef double q = 0.0, ww = 0.0, lmin = INFINITY, lo = 0.0, hi, mu = 0.0
    cdef double f, fp, d, step, acc
    cdef int it = 0
    if diagonal:
        for i in range(n):
            w[i] = v[i]
    else:
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += evecs[i * n + j] * v[i]
            w[j] = acc
    for i in range(n):
        lw2[i] = evals[i] * w[i] * w[i]
        q += lw2[i]
        ww += w[i] * w[i]
        if evals[i] < lmin:
            lmin = evals[i]
    if q <= 1.0:
        for i in range(n):
            out[i] = v[i]
        mu_out[0] = 0.0
        f_out[0] = q - 1.0
        return 0
    hi = sqrt(ww / lmin)
    while True:
        f = -1.0
        fp = 0.0
        for i in range(n):
            d = 1.0 + mu * evals[i]
            f += lw2[i] / (d * d)
            fp -= 2.0 * evals[i] * lw2[i] / (d * d * d)
        if fabs(f) <= tol:
            break
        if it >= max_iter:
            it = -1
            break
        if f > 0.0:
            lo = mu
        else:
            hi = mu
        step = mu - f / fp
        if lo < step and step < hi:
            mu = step
        else:
            mu = 0.5 * (lo + hi)
        it += 1
    for i in range(n):
        w[i] = w[i] / (1.0 + mu * evals[i])
    if diagonal:
        for i in range(n):
            out[i] = w[i]
    else:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += evecs[i * n + j] * w[j]
            out[i] = acc
    mu_out[0] = mu
    f_out[0] = f
    return it


def project_ellipsoid(v, evals, evecs, bint diagonal, double tol, int max_iter):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ev = np.ascontiguousarray(evals, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Q = np.ascontiguousarray(evecs, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lw2 = np.empty(n)
    cdef double mu = 0.0, f = 0.0
    cdef int it
    if n == 0:
        return out, 0.0, 0, -1.0
    it = _ellipsoid(&vv[0], &out[0], &w[0], &lw2[0], &ev[0], &Q[0, 0], diagonal, n,
                    tol, max_iter, &mu, &f)
    return out, mu, it, f


def dykstra_l1_l2(v, double r1, double r2, double tol, int max_iter):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = vv.copy()
    cdef double* xp = <double*>cnp.PyArray_DATA(x)
    cdef double* p = <double*>malloc(n * sizeof(double))
    cdef double* q = <double*>malloc(n * sizeof(double))
    cdef double* y = <double*>malloc(n * sizeof(double))
    cdef double* t = <double*>malloc(n * sizeof(double))
    cdef double* prev = <double*>malloc(n * sizeof(double))
    cdef double* work = <double*>malloc(n * sizeof(double))
    cdef double move = INFINITY, d
    cdef int it, result = -1
    if n == 0:
        free(p); free(q); free(y); free(t); free(prev); free(work)
        return x, 1, 0.0
    try:
        with nogil:
            for i in range(n):
                p[i] = 0.0
                q[i] = 0.0
            for it in range(1, max_iter + 1):
                for i in range(n):
                    prev[i] = xp[i]
                    t[i] = xp[i] + p[i]
                _l1_inplace(t, y, work, n, r1)
                move = 0.0
                for i in range(n):
                    d = t[i] - y[i] - p[i]
                    move += d * d
                    p[i] = t[i] - y[i]
                    t[i] = y[i] + q[i]
                _l2_inplace(t, xp, n, r2)
                for i in range(n):
                    d = t[i] - xp[i] - q[i]
                    move += d * d
                    q[i] = t[i] - xp[i]
                    d = xp[i] - prev[i]
                    move += d * d
                move = sqrt(move)
                if move < tol:
                    result = it
                    break
    finally:
        free(p); free(q); free(y); free(t); free(prev); free(work)
    return x, result, move


def dykstra_l1_ellipsoid(v, double r1, evals, evecs, bint diagonal, double tol, int max_iter,
                         double inner_tol, int inner_max):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ev = np.ascontiguousarray(evals, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Q = np.ascontiguousarray(evecs, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = vv.copy()
    cdef double* xp = <double*>cnp.PyArray_DATA(x)
    cdef double* p = <double*>malloc(n * sizeof(double))
    cdef double* q = <double*>malloc(n * sizeof(double))
    cdef double* y = <double*>malloc(n * sizeof(double))
    cdef double* t = <double*>malloc(n * sizeof(double))
    cdef double* prev = <double*>malloc(n * sizeof(double))
    cdef double* work = <double*>malloc(n * sizeof(double))
    cdef double* work2 = <double*>malloc(n * sizeof(double))
    cdef double move = INFINITY, d, mu, f
    cdef int it, inner, result = -1
    if n == 0:
        free(p); free(q); free(y); free(t); free(prev); free(work); free(work2)
        return x, 1, 0.0
    cdef double* evp = <double*>cnp.PyArray_DATA(ev)
    cdef double* Qp = <double*>cnp.PyArray_DATA(Q)
    try:
        with nogil:
            for i in range(n):
                p[i] = 0.0
                q[i] = 0.0
            for it in range(1, max_iter + 1):
                for i in range(n):
                    prev[i] = xp[i]
                    t[i] = xp[i] + p[i]
                _l1_inplace(t, y, work, n, r1)
                move = 0.0
                for i in range(n):
                    d = t[i] - y[i] - p[i]
                    move += d * d
                    p[i] = t[i] - y[i]
                    t[i] = y[i] + q[i]
                inner = _ellipsoid(t, xp, work, work2, evp, Qp, diagonal, n,
                                   inner_tol, inner_max, &mu, &f)
                if inner < 0:
                    result = -2
                    break
                for i in range(n):
                    d = t[i] - xp[i] - q[i]
                    move += d * d
                    q[i] = t[i] - xp[i]
                    d = xp[i] - prev[i]
                    move += d * d
                move = sqrt(move)
                if move < tol:
                    result = it
                    break
    finally:
        free(p); free(q); free(y); free(t); free(prev); free(work); free(work2)
    return x, result, move


def soft_threshold_level(a, double target, double rel_tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aa = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t n = aa.shape[0], i, ties = 0
    cdef double l1 = 0.0, l2 = 0.0, amax = 0.0, lo, hi, mid, width, s1, s2, d
    cdef double* ap = <double*>cnp.PyArray_DATA(aa)
    for i in range(n):
        l1 += aa[i]
        l2 += aa[i] * aa[i]
        if aa[i] > amax:
            amax = aa[i]
    if l1 <= target * sqrt(l2):
        return 0.0, STATUS_INACTIVE
    for i in range(n):
        if aa[i] == amax:
            ties += 1
    if ties > target * target:
        return amax, STATUS_DEGENERATE
    lo = 0.0
    hi = amax
    width = rel_tol * amax
    with nogil:
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            s1 = 0.0
            s2 = 0.0
            for i in range(n):
                d = ap[i] - mid
                if d > 0.0:
                    s1 += d
                    s2 += d * d
            if s1 > target * sqrt(s2):
                lo = mid
            else:
                hi = mid
    return hi, STATUS_FOUND


def hamming(y1, y2):
    cdef cnp.ndarray[cnp.int8_t, ndim=1] a = np.ascontiguousarray(y1, dtype=np.int8)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] b = np.ascontiguousarray(y2, dtype=np.int8)
    cdef Py_ssize_t i, n = a.shape[0]
    cdef long long count = 0
    for i in range(n):
        if a[i] != b[i]:
            count += 1
    return count


def pair_disagreements(signs, left, right, out):
    cdef const cnp.uint8_t[:, ::1] S = np.ascontiguousarray(signs, dtype=np.uint8)
    cdef const cnp.intp_t[::1] L = np.ascontiguousarray(left, dtype=np.intp)
    cdef const cnp.intp_t[::1] R = np.ascontiguousarray(right, dtype=np.intp)
    cdef cnp.int64_t[:] acc = out
    cdef Py_ssize_t rows = S.shape[0], k = L.shape[0], i, j
    with nogil:
        for i in range(rows):
            for j in range(k):
                # branchless: random signs defeat the predictor
                acc[j] += S[i, L[j]] != S[i, R[j]]
    return out
