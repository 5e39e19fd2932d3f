import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from onebitcs.errors import ParameterError
from onebitcs.measure import (BitFlip, CovarianceSpec, Logistic, MeasurementRecord, Noiseless,
                              PreQuantNoise, Tabulated, corrupt, direction_from_bits, flip_count,
                              lambda_analytic, lambda_empirical, model_from_dict, model_to_dict,
                              read_record, sign, synthesize, theta_eval, with_bits, write_record)
from onebitcs.sampling import RngSpec, sample_signal

MODELS = [Noiseless(), BitFlip(0.75), BitFlip(0.9), BitFlip(1.0), PreQuantNoise(0.0),
          PreQuantNoise(1.0), PreQuantNoise(3.0), Logistic(0.5), Logistic(1.0), Logistic(4.0),
          Logistic(30.0)]


def lambda_oracle(model):
    """E theta(g) g by adaptive quadrature, split at the kink of sign-type links."""
    f = lambda z: float(model.theta(z)) * z * stats.norm.pdf(z)  # noqa: E731
    return 2 * integrate.quad(f, 0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=500)[0]


def unit(n, seed=0):
    return sample_signal(RngSpec(seed), n, n).values


def test_sign_zero_is_plus_one():
    np.testing.assert_array_equal(sign(np.array([-1.0, 0.0, 2.0])), [-1, 1, 1])


def test_theta_examples():
    assert theta_eval(Noiseless(), 1.5) == 1
    assert theta_eval(BitFlip(0.9), -2) == pytest.approx(-0.8, abs=1e-15)
    assert theta_eval(Logistic(2.0), 0.0) == 0


@pytest.mark.parametrize("model", MODELS, ids=repr)
@given(z=st.floats(-50, 50))
def test_theta_bounded_and_odd(model, z):
    t = theta_eval(model, z)
    assert -1 <= t <= 1
    if z != 0:
        assert theta_eval(model, -z) == pytest.approx(-t, abs=1e-15)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_lambda_analytic_matches_quadrature_oracle(model):
    assert lambda_analytic(model) == pytest.approx(lambda_oracle(model), abs=1e-10)


def test_lambda_examples():
    assert lambda_analytic(Noiseless()) == pytest.approx(0.7978845608, abs=1e-10)
    assert lambda_analytic(PreQuantNoise(1.0)) == pytest.approx(0.5641895835, abs=1e-10)
    lam = lambda_analytic(Logistic(1.0))
    assert 1 / 6 <= lam <= math.sqrt(2 / math.pi)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1, 2, 4, 10, 100])
def test_logistic_lower_bound(alpha):
    assert lambda_analytic(Logistic(alpha)) >= min(alpha, 1) / 6


def test_tabulated_model_uses_quadrature():
    # generic 64-node Hermite rule
    m = Tabulated(np.tanh)
    assert lambda_analytic(m) == pytest.approx(lambda_oracle(m), abs=1e-8)


def test_model_validation():
    with pytest.raises(ParameterError):
        BitFlip(0.4)
    with pytest.raises(ParameterError):
        PreQuantNoise(-1)
    with pytest.raises(ParameterError):
        Logistic(0)
    with pytest.raises(ParameterError):
        model_from_dict({"name": "bitflip"})
    with pytest.raises(ParameterError):
        model_from_dict({"name": "probit"})


@pytest.mark.parametrize("model", [Noiseless(), BitFlip(0.8), PreQuantNoise(2.0), Logistic(3.0)], ids=repr)
def test_model_dict_round_trip(model):
    assert model_from_dict(model_to_dict(model)) == model


def test_noiseless_bits_are_signs_of_projections():
    x = unit(20)
    rec = synthesize(x, Noiseless(), 100, RngSpec(3), retain=True, keep_projections=True)
    np.testing.assert_array_equal(rec.y, sign(rec.retained_rows @ x))
    np.testing.assert_allclose(rec.projections, rec.retained_rows @ x, atol=1e-12)
    assert set(np.unique(rec.y)) <= {-1, 1}


def test_retained_and_streamed_agree_bitwise():
    x = unit(30, 2)
    a = synthesize(x, BitFlip(0.8), 9000, RngSpec(4), retain=True)
    b = synthesize(x, BitFlip(0.8), 9000, RngSpec(4))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.c, b.c)
    np.testing.assert_allclose(a.c, a.retained_rows.T @ a.y / a.m, atol=1e-10)


def test_worker_count_does_not_change_output():
    x = unit(25, 5)
    a = synthesize(x, Logistic(2.0), 20000, RngSpec(8), workers=1)
    b = synthesize(x, Logistic(2.0), 20000, RngSpec(8), workers=4)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.c, b.c)


def test_bitflip_one_equals_noiseless():
    x = unit(10, 1)
    a = synthesize(x, BitFlip(1.0), 5000, RngSpec(2))
    b = synthesize(x, Noiseless(), 5000, RngSpec(2))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.c, b.c)


def test_direction_concentrates_on_lambda_e1():
    x = np.zeros(5)
    x[0] = 1
    rec = synthesize(x, Noiseless(), 1_000_000, RngSpec(12), workers=4)
    target = np.zeros(5)
    target[0] = math.sqrt(2 / math.pi)
    assert np.max(np.abs(rec.c - target)) <= 0.01


def test_synthesize_validation():
    with pytest.raises(ParameterError):
        synthesize(unit(5), Noiseless(), 0, RngSpec(0))
    with pytest.raises(ParameterError):
        synthesize(2 * unit(5), Noiseless(), 10, RngSpec(0))
    with pytest.raises(ParameterError):
        synthesize(unit(5), Noiseless(), 10, RngSpec(0), covariance=CovarianceSpec.from_diagonal(np.ones(6)))
    with pytest.raises(ParameterError):
        synthesize(unit(5), Noiseless(), 100, RngSpec(0), retain=True, retain_budget=100)


def test_correlated_rows_have_requested_covariance():
    d = np.array([4.0, 1.0, 2.0])
    cov = CovarianceSpec.from_diagonal(d)
    x = unit(3)
    x = x / cov.sigma_norm(x)
    rec = synthesize(x, Noiseless(), 50000, RngSpec(1), retain=True, covariance=cov)
    emp = np.cov(rec.retained_rows.T)
    np.testing.assert_allclose(np.diag(emp), d, rtol=0.03)


def test_covariance_spec():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(5, 5))
    S = B @ B.T + np.eye(5)
    cov = CovarianceSpec.from_matrix(S)
    assert not cov.diagonal and cov.kappa >= 1 and cov.lambda_min > 0
    np.testing.assert_allclose((cov.evecs * cov.evals) @ cov.evecs.T, S, atol=1e-8)
    root = cov.sqrt_matrix()
    np.testing.assert_allclose(root @ root, S, atol=1e-9)
    x = rng.normal(size=5)
    assert cov.sigma_norm(x) == pytest.approx(math.sqrt(x @ S @ x), rel=1e-12)
    assert CovarianceSpec.from_dict(cov.to_dict()).matrix.tolist() == S.tolist()
    assert CovarianceSpec.from_matrix(np.diag([2.0, 3.0])).diagonal
    with pytest.raises(ParameterError):
        CovarianceSpec.from_matrix(-S)
    with pytest.raises(ParameterError):
        CovarianceSpec.from_matrix(B)


def test_corrupt_examples():
    y = np.where(np.random.default_rng(0).random(1000) < 0.5, 1, -1).astype(np.int8)
    np.testing.assert_array_equal(corrupt(y, 0.0, "random", RngSpec(0)), y)
    y8 = np.ones(8, dtype=np.int8)
    assert np.sum(corrupt(y8, 1.0, "random", RngSpec(0)) != y8) == 8
    assert np.sum(corrupt(y, 0.1, "random", RngSpec(1)) != y) == 100


def test_greedy_flips_largest_magnitudes():
    z = np.array([0.1, -3.0, 2.0, 0.5, -0.2])
    y = sign(z).astype(np.int8)
    out = corrupt(y, 0.4, "greedy-magnitude", context=z)
    np.testing.assert_array_equal(np.nonzero(out != y)[0], [1, 2])
    with pytest.raises(ParameterError):
        corrupt(y, 0.4, "greedy-magnitude")


@given(m=st.integers(1, 300), tau=st.floats(0, 1), seed=st.integers(0, 1000))
def test_corrupt_flips_exactly_floor_tau_m(m, tau, seed):
    y = np.ones(m, dtype=np.int8)
    out = corrupt(y, tau, "random", RngSpec(seed))
    assert np.sum(out != y) == flip_count(tau, m) == math.floor(tau * m + 1e-9)


def test_with_bits_recomputes_direction():
    x = unit(15, 3)
    rec = synthesize(x, Noiseless(), 5000, RngSpec(6), retain=True)
    y2 = corrupt(rec.y, 0.2, "random", RngSpec(7))
    new = with_bits(rec, y2)
    np.testing.assert_allclose(new.c, rec.retained_rows.T @ y2 / rec.m, atol=1e-12)
    streamed = synthesize(x, Noiseless(), 5000, RngSpec(6))
    np.testing.assert_allclose(direction_from_bits(streamed, y2), new.c, atol=1e-12)


@pytest.mark.parametrize("model,expected", [
    (Noiseless(), math.sqrt(2 / math.pi)),
    (BitFlip(0.5), 0.0),
    (PreQuantNoise(3.0), math.sqrt(2 / (10 * math.pi))),
])
def test_lambda_empirical_examples(model, expected):
    est, se = lambda_empirical(unit(8), model, 1_000_000, RngSpec(21), workers=4)
    assert abs(est - expected) <= 0.005
    assert 0 < se < 0.002


@pytest.mark.parametrize("model", [BitFlip(0.75), Logistic(1.0), PreQuantNoise(1.0)], ids=repr)
def test_lambda_empirical_within_five_over_sqrt_m(model):
    m = 200_000
    est, _ = lambda_empirical(unit(6, 4), model, m, RngSpec(33))
    assert abs(est - lambda_analytic(model)) <= 5 / math.sqrt(m)


@pytest.mark.parametrize("model", [Noiseless(), BitFlip(0.75), PreQuantNoise(2.5), Logistic(4.0)], ids=repr)
@pytest.mark.parametrize("m", [1, 7, 8, 9, 4097])
def test_record_round_trip(tmp_path, model, m):
    x = unit(12, 9)
    rec = synthesize(x, model, m, RngSpec(123, 45))
    path = tmp_path / "r.obcs"
    write_record(path, rec)
    assert path.stat().st_size == 5 + 8 + 8 + 1 + 8 + 8 + 8 + (m + 7) // 8 + 8 * 12
    back = read_record(path)
    np.testing.assert_array_equal(back.y, rec.y)
    np.testing.assert_array_equal(back.c, rec.c)
    assert back.model == model and back.m == m and back.rng == rec.rng
    # the stored stream regenerates the same rows
    np.testing.assert_allclose(direction_from_bits(back, back.y), rec.c, atol=1e-13)


def test_record_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(b"XXXXX" + bytes(60))
    with pytest.raises(ParameterError):
        read_record(bad)
    rec = synthesize(unit(4), Noiseless(), 10, RngSpec(0))
    good = tmp_path / "good"
    write_record(good, rec)
    bad.write_bytes(good.read_bytes()[:-1])
    with pytest.raises(ParameterError):
        read_record(bad)
    with pytest.raises(ParameterError):
        write_record(tmp_path / "t", MeasurementRecord(rec.y, rec.c, rec.m, Tabulated(np.tanh), rec.rng))
