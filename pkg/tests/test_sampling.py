import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from onebitcs.errors import ParameterError
from onebitcs.sampling import (COMPRESSIBLE, EXACT_SPARSE, RngSpec, Signal, derive_seed,
                               gaussian_rows, gaussian_vector, sample_signal)


def test_gaussian_vector_is_reproducible():
    a = gaussian_vector(RngSpec(7), 4)
    b = gaussian_vector(RngSpec(7), 4)
    np.testing.assert_array_equal(a, b)


def test_gaussian_vector_empty_and_negative():
    assert gaussian_vector(RngSpec(3), 0).shape == (0,)
    with pytest.raises(ParameterError):
        gaussian_vector(RngSpec(3), -1)


def test_gaussian_vector_moments():
    g = gaussian_vector(RngSpec(1), 100_000)
    assert abs(g.mean()) <= 0.02
    assert abs(g.var() - 1) <= 0.03


def test_streams_are_distinct():
    a = gaussian_vector(RngSpec(5, 0), 16)
    b = gaussian_vector(RngSpec(5, 1), 16)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(gaussian_rows(RngSpec(5), 3, 4, 2), gaussian_rows(RngSpec(5), 3, 4, 2))
    assert not np.array_equal(gaussian_rows(RngSpec(5), 3, 4, 1), gaussian_rows(RngSpec(5), 3, 4, 2))


def test_child_and_derived_seed_are_deterministic():
    assert RngSpec(9).child(1, 2) == RngSpec(9).child(1, 2)
    assert RngSpec(9).child(1, 2) != RngSpec(9).child(2, 1)
    assert derive_seed(0, 250, 3) == derive_seed(0, 250, 3)
    assert derive_seed(0, 250, 3) != derive_seed(0, 250, 4)


def test_rngspec_validates_range():
    with pytest.raises(ParameterError):
        RngSpec(-1)
    with pytest.raises(ParameterError):
        RngSpec(0, 1 << 64)


def test_s_one_gives_signed_basis_vector():
    x = sample_signal(RngSpec(0), 10, 1, EXACT_SPARSE).values
    assert np.count_nonzero(x) == 1
    assert abs(np.abs(x).max() - 1.0) < 1e-15


def test_exact_sparse_example():
    x = sample_signal(RngSpec(11), 100, 5, EXACT_SPARSE).values
    assert np.count_nonzero(x) == 5
    assert abs(np.linalg.norm(x) - 1) <= 1e-12
    assert np.abs(x).sum() <= math.sqrt(5)


def test_compressible_membership_over_many_draws():
    full = 0
    for j in range(1000):
        x = sample_signal(RngSpec(3, j), 100, 5, COMPRESSIBLE).values
        assert abs(np.linalg.norm(x) - 1) <= 1e-12
        assert np.abs(x).sum() <= math.sqrt(5)
        full += np.count_nonzero(x) == 100
    assert full > 900


def test_compressible_raises_decay_when_needed():
    sig = sample_signal(RngSpec(0), 100, 5, COMPRESSIBLE)
    assert sig.meta["decay"] > 1.0
    sig = sample_signal(RngSpec(0), 100, 60, COMPRESSIBLE)
    assert sig.meta["decay"] == 1.0


@given(n=st.integers(1, 200), frac=st.floats(0, 1), seed=st.integers(0, 2**32),
       kind=st.sampled_from([EXACT_SPARSE, COMPRESSIBLE]))
def test_signals_lie_in_sparse_ball_on_sphere(n, frac, seed, kind):
    s = 1 + frac * (n - 1)
    x = sample_signal(RngSpec(seed), n, s, kind).values
    assert abs(np.linalg.norm(x) - 1) <= 1e-12
    assert np.abs(x).sum() <= math.sqrt(s) * (1 + 1e-12)
    if kind == EXACT_SPARSE:
        assert np.count_nonzero(x) <= s


@pytest.mark.parametrize("n,s", [(10, 0.5), (10, 11), (0, 1)])
def test_invalid_sparsity(n, s):
    with pytest.raises(ParameterError):
        sample_signal(RngSpec(0), n, s)


def test_unknown_kind():
    with pytest.raises(ParameterError):
        sample_signal(RngSpec(0), 10, 2, "dense")


def test_signal_dict_round_trip():
    sig = sample_signal(RngSpec(4), 20, 3)
    back = Signal.from_dict(sig.to_dict())
    np.testing.assert_array_equal(back.values, sig.values)
    assert back.s == sig.s and back.kind == sig.kind
