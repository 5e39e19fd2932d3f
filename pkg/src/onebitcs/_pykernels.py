"""Pure numpy implementations of the hot kernels.

Mirrors ``_kernels.pyx`` function for function. Used when the compiled
extension is unavailable or ``ONEBITCS_PURE_PYTHON=1`` is set.
"""
import numpy as np

STATUS_INACTIVE = 0
STATUS_FOUND = 1
STATUS_DEGENERATE = 2


def project_l1_ball(v, radius):
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.shape[0] + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_l2_ball(v, radius):
    v = np.asarray(v, dtype=np.float64)
    nrm = np.sqrt(np.dot(v, v))
    if nrm <= radius:
        return v.copy()
    return v * (radius / nrm)


def project_ellipsoid(v, evals, evecs, diagonal, tol, max_iter):
    """Projection onto {x : x^T S x <= 1}, S = evecs diag(evals) evecs^T.

    Returns ``(x, mu, iterations, residual)``; ``iterations == -1`` flags
    non-convergence.
    """
    v = np.asarray(v, dtype=np.float64)
    w = v if diagonal else evecs.T @ v
    lw2 = evals * w * w
    q = lw2.sum()
    if q <= 1.0:
        return v.copy(), 0.0, 0, q - 1.0
    lo = 0.0
    hi = np.sqrt(np.dot(w, w) / evals.min())
    mu = 0.0
    it = 0
    while True:
        d = 1.0 + mu * evals
        f = np.sum(lw2 / (d * d)) - 1.0
        if abs(f) <= tol:
            break
        if it >= max_iter:
            it = -1
            break
        if f > 0.0:
            lo = mu
        else:
            hi = mu
        fp = -2.0 * np.sum(evals * lw2 / (d * d * d))
        step = mu - f / fp
        mu = step if lo < step < hi else 0.5 * (lo + hi)
        it += 1
    z = w / (1.0 + mu * evals)
    x = z if diagonal else evecs @ z
    return x, mu, it, f


def dykstra_l1_l2(v, r1, r2, tol, max_iter):
    """Dykstra's algorithm for the projection onto {||x||_1 <= r1} ∩ {||x||_2 <= r2}.

    A cycle counts as converged when the iterate and both correction terms
    together change by less than ``tol``; the iterate alone can stall far
    from the projection when the two boundaries meet at a shallow angle.
    Returns ``(x, iterations, last_move)``; ``iterations == -1`` flags that
    ``max_iter`` was hit.
    """
    x = np.array(v, dtype=np.float64)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    move = np.inf
    for it in range(1, max_iter + 1):
        prev, p_prev, q_prev = x, p, q
        y = project_l1_ball(x + p, r1)
        p = x + p - y
        x = project_l2_ball(y + q, r2)
        q = y + q - x
        move = np.sqrt(np.sum((x - prev) ** 2) + np.sum((p - p_prev) ** 2) + np.sum((q - q_prev) ** 2))
        if move < tol:
            return x, it, move
    return x, -1, move


def dykstra_l1_ellipsoid(v, r1, evals, evecs, diagonal, tol, max_iter, inner_tol, inner_max):
    x = np.array(v, dtype=np.float64)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    move = np.inf
    for it in range(1, max_iter + 1):
        prev, p_prev, q_prev = x, p, q
        y = project_l1_ball(x + p, r1)
        p = x + p - y
        x, _, inner, _ = project_ellipsoid(y + q, evals, evecs, diagonal, inner_tol, inner_max)
        if inner < 0:
            return x, -2, move
        q = y + q - x
        move = np.sqrt(np.sum((x - prev) ** 2) + np.sum((p - p_prev) ** 2) + np.sum((q - q_prev) ** 2))
        if move < tol:
            return x, it, move
    return x, -1, move


def soft_threshold_level(a, target, rel_tol):
    """Threshold t with ||S_t(a)||_1 / ||S_t(a)||_2 = target, for a >= 0.

    Returns ``(t, status)``. Bisection keeps the feasible (ratio <= target)
    end of the bracket, which is returned.
    """
    a = np.asarray(a, dtype=np.float64)
    l1 = a.sum()
    l2 = np.sqrt(np.dot(a, a))
    if l1 <= target * l2:
        return 0.0, STATUS_INACTIVE
    amax = a.max()
    ties = np.count_nonzero(a == amax)
    if ties > target * target:
        return amax, STATUS_DEGENERATE
    lo, hi = 0.0, amax
    width = rel_tol * amax
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        st = a - mid
        st = st[st > 0.0]
        if st.sum() > target * np.sqrt(np.dot(st, st)):
            lo = mid
        else:
            hi = mid
    return hi, STATUS_FOUND


def hamming(y1, y2):
    return int(np.count_nonzero(np.asarray(y1) != np.asarray(y2)))


def pair_disagreements(signs, left, right, out):
    """Accumulate, per pair j, the rows where ``signs[:, left[j]] != signs[:, right[j]]``."""
    out += np.count_nonzero(signs[:, left] != signs[:, right], axis=0)
    return out
