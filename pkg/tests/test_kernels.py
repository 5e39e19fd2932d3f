"""Compiled and numpy kernels: agreement with each other and with independent oracles."""
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from onebitcs import kernels

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 40).flatmap(lambda n: arrays(np.float64, n, elements=finite))


def l1_oracle(v, r):
    """Projection onto the l1 ball by bisection on the shrinkage level."""
    a = np.abs(v)
    if a.sum() <= r:
        return v.copy()
    lo, hi = 0.0, a.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(a - mid, 0).sum() > r:
            lo = mid
        else:
            hi = mid
    return np.sign(v) * np.maximum(a - hi, 0)


@given(vectors, st.floats(0.1, 10))
def test_l1_projection_matches_bisection_oracle(backend, v, r):
    got = backend.project_l1_ball(v, r)
    np.testing.assert_allclose(got, l1_oracle(v, r), atol=1e-9 * max(1.0, np.abs(v).max()))


def test_l1_projection_examples(backend):
    np.testing.assert_allclose(backend.project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])
    np.testing.assert_allclose(backend.project_l1_ball(np.array([1.0, 1.0]), 1.0), [0.5, 0.5])
    v = np.array([0.1, -0.2, 0.3])
    np.testing.assert_array_equal(backend.project_l1_ball(v, 1.0), v)


def test_l2_projection_examples(backend):
    np.testing.assert_allclose(backend.project_l2_ball(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
    np.testing.assert_array_equal(backend.project_l2_ball(np.zeros(3), 1.0), np.zeros(3))


def test_ellipsoid_projection_against_multiplier_scan(backend, gen):
    for _ in range(20):
        n = int(gen.integers(2, 8))
        d = gen.uniform(0.5, 5.0, n)
        v = gen.normal(size=n) * 3
        x, mu, it, f = backend.project_ellipsoid(v, d, np.eye(n), True, 1e-12, 200)
        if np.sum(d * v * v) <= 1:
            np.testing.assert_array_equal(x, v)
            continue
        assert it >= 0 and abs(f) <= 1e-10
        # dense scan of the multiplier, refined by bisection on the bracket it finds
        grid = np.linspace(0, 50, 20001)
        g = np.sum(d * (v / (1 + grid[:, None] * d)) ** 2, axis=1) - 1
        k = int(np.nonzero(np.diff(np.sign(g)))[0][0])
        lo, hi = grid[k], grid[k + 1]
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if np.sum(d * (v / (1 + mid * d)) ** 2) > 1:
                lo = mid
            else:
                hi = mid
        np.testing.assert_allclose(x, v / (1 + lo * d), atol=1e-8)


def test_dense_ellipsoid_matches_rotated_diagonal(backend, gen):
    n = 6
    Q, _ = np.linalg.qr(gen.normal(size=(n, n)))
    d = gen.uniform(0.5, 4.0, n)
    v = gen.normal(size=n) * 4
    x, *_ = backend.project_ellipsoid(v, d, Q, False, 1e-12, 200)
    z, *_ = backend.project_ellipsoid(Q.T @ v, d, np.eye(n), True, 1e-12, 200)
    np.testing.assert_allclose(x, Q @ z, atol=1e-10)


def test_backends_agree(gen):
    mods = list(kernels.backends().values())
    if len(mods) < 2:
        pytest.skip("compiled extension not built")
    a, b = mods
    for _ in range(50):
        n = int(gen.integers(2, 60))
        v = gen.normal(size=n) * gen.uniform(0.1, 10)
        r = float(gen.uniform(1, np.sqrt(n)))
        np.testing.assert_allclose(a.project_l1_ball(v, r), b.project_l1_ball(v, r), atol=1e-12)
        xa, ia, _ = a.dykstra_l1_l2(v, r, 1.0, 1e-9, 10000)
        xb, ib, _ = b.dykstra_l1_l2(v, r, 1.0, 1e-9, 10000)
        np.testing.assert_allclose(xa, xb, atol=1e-12)
        assert ia == ib
        d = gen.uniform(0.5, 4, n)
        ea = a.dykstra_l1_ellipsoid(v, r, d, np.eye(n), True, 1e-9, 10000, 1e-12, 200)
        eb = b.dykstra_l1_ellipsoid(v, r, d, np.eye(n), True, 1e-9, 10000, 1e-12, 200)
        np.testing.assert_allclose(ea[0], eb[0], atol=1e-9)
        av = np.abs(v)
        assert a.soft_threshold_level(av, np.sqrt(r), 1e-12) == b.soft_threshold_level(av, np.sqrt(r), 1e-12)
        y1 = np.where(gen.random(n) < 0.5, 1, -1).astype(np.int8)
        y2 = np.where(gen.random(n) < 0.5, 1, -1).astype(np.int8)
        assert a.hamming(y1, y2) == b.hamming(y1, y2) == int(np.sum(y1 != y2))


def test_dykstra_reaches_exact_projection(backend, gen):
    # the exact projection onto B2 ∩ r B1 is the l2-normalised soft threshold of the
    # l1 projection family; find it by bisection on the shrinkage level
    for _ in range(30):
        n = int(gen.integers(2, 30))
        v = gen.normal(size=n) * 3
        r = float(gen.uniform(1, np.sqrt(n)))
        x, it, _ = backend.dykstra_l1_l2(v, r, 1.0, 1e-12, 100000)
        assert it > 0
        for z in gen.normal(size=(50, n)):
            z = l1_oracle(z, r)
            z = z / max(1.0, np.linalg.norm(z))
            assert np.dot(v - x, z - x) <= 1e-7


def test_soft_threshold_status(backend):
    a = np.array([1.0, 1.0, 1.0, 1.0])
    assert backend.soft_threshold_level(a, 2.0, 1e-12)[1] == kernels.STATUS_INACTIVE
    assert backend.soft_threshold_level(a, 1.5, 1e-12)[1] == kernels.STATUS_DEGENERATE
    t, status = backend.soft_threshold_level(np.array([3.0, 2.0, 1.0]), 1.2, 1e-12)
    assert status == kernels.STATUS_FOUND and 0 < t < 3


def test_pair_disagreements(backend, gen):
    signs = (gen.random((100, 6)) < 0.5).astype(np.uint8)
    left = np.array([0, 1, 2], dtype=np.intp)
    right = np.array([3, 4, 2], dtype=np.intp)
    out = np.zeros(3, dtype=np.int64)
    backend.pair_disagreements(signs, left, right, out)
    expect = [(signs[:, i] != signs[:, j]).sum() for i, j in zip(left, right)]
    np.testing.assert_array_equal(out, expect)
