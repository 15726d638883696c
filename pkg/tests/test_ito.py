import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelnoise.errors import (
    DegenerateError,
    InputError,
    NormalizationError,
    UnsupportedError,
    WindowError,
)
from kernelnoise.ito import (
    build_isometry_pair,
    fourier_process_covariance,
    gaussian_characteristic_function,
    grid_fourier_transform,
    isometry_mc,
    ito_integral,
    ito_lemma_residual,
    polarization_mc,
    quadratic_variation,
    schwartz_transform_check,
)
from kernelnoise.measure_space import GridMeasure, GroundSpace, Partition
from kernelnoise.white_noise import evaluate_set, sample_fields


@pytest.fixture(scope="module")
def leb():
    sp = GroundSpace.interval(0, 1, 256)
    return sp, GridMeasure.lebesgue(sp)


def test_integral_of_indicator_is_set_value(leb):
    sp, mu = leb
    X = sample_fields(mu, 5, seed=1)[3]
    A = sp.range_set(20, 140)
    assert ito_integral(X, A.indicator()) == pytest.approx(evaluate_set(X, A), abs=1e-13)
    assert ito_integral(X, np.zeros(256)) == 0.0
    with pytest.raises(InputError):
        ito_integral(X, np.ones(10))


def test_isometry_linear_integrand(leb):
    sp, mu = leb
    s = sp.representatives
    est = isometry_mc(sample_fields(mu, 100_000, seed=2), [s])[0]
    # midpoint quadrature of s^2: 1/3 - 1/(12 n^2)
    assert est.reference == pytest.approx(1 / 3 - 1 / (12 * 256 ** 2), rel=1e-12)
    assert est.within()


def test_isometry_random_corpus(leb):
    sp, mu = leb
    rng = np.random.default_rng(3)
    s = sp.representatives
    fs = [np.polynomial.polynomial.polyval(s, rng.normal(size=4)) for _ in range(5)]
    fs += [rng.uniform(0.5, 2) * np.cos(rng.uniform(1, 15) * s) for _ in range(5)]
    ens = sample_fields(mu, 60_000, seed=3)
    assert all(e.within() for e in isometry_mc(ens, fs))
    assert polarization_mc(ens, fs[0], fs[7]).within()


def test_isometry_pair_uniform_average():
    pair = build_isometry_pair(4, 2)
    h = np.arange(8.0)
    np.testing.assert_allclose(pair.coisometry @ h, [0.5, 2.5, 4.5, 6.5], rtol=0, atol=1e-15)
    f = np.array([1.0, -2.0, 3.0, 0.5])
    np.testing.assert_allclose(pair.coisometry @ (pair.embedding @ f), f, rtol=0, atol=1e-15)


def test_isometry_pair_invariants():
    pair = build_isometry_pair(64, 8, lambda x: np.exp(-((x - 0.5) / 0.3) ** 2))
    errs = pair.invariant_errors()
    assert max(errs.values()) <= 1e-12
    hs = np.random.default_rng(4).standard_normal((100, 512))
    assert pair.contraction_ratios(hs).max() <= 1 + 1e-12
    with pytest.raises(DegenerateError):
        build_isometry_pair(4, 1)


def test_qv_single_block_and_uniform():
    sp = GroundSpace.interval(0, 1, 64)
    mu = GridMeasure.lebesgue(sp)
    B = sp.full()
    rep = quadratic_variation(mu, B, Partition.single(B), 3, 40_000, seed=5)
    preds = [L.predicted_var for L in rep.levels]
    assert preds == [2.0, 1.0, 0.5, 0.25]
    for L in rep.levels:
        assert L.mean.within() and L.var.within()
        assert L.blocks == 2 ** L.level
    rep = quadratic_variation(mu, B, Partition.uniform(B, 8), 0, 2000, seed=5)
    assert rep.levels[0].predicted_var == pytest.approx(2 / 8, rel=1e-14)


def test_ito_lemma_linear_is_exact(leb):
    sp, mu = leb
    res = ito_lemma_residual(mu, lambda x: 3 * x - 1, lambda x: 3 + 0 * x, lambda x: 0 * x,
                             1.0, 5000, seed=6)
    assert res.max_abs <= 1e-12


def test_ito_lemma_square_variance(leb):
    sp, mu = leb
    pred = 2 * 256 * (1 / 256) ** 2
    res = ito_lemma_residual(mu, lambda x: x * x, lambda x: 2 * x, lambda x: 2 + 0 * x,
                             1.0, 60_000, seed=7, predicted_var=pred)
    assert res.mean.within() and res.variance.within()


def test_ito_lemma_needs_interval():
    mu = GridMeasure.counting(GroundSpace.finite(5))
    with pytest.raises(UnsupportedError):
        ito_lemma_residual(mu, np.cos, np.sin, np.cos, 1.0, 10, 0)


def test_gaussian_quadrature_oracle():
    sp = GroundSpace.interval(-1, 1, 4096)
    mu = GridMeasure.gaussian(sp, 0.0, 0.1)
    lags = np.linspace(-2, 2, 21)
    err = np.abs(grid_fourier_transform(mu, lags) - gaussian_characteristic_function(lags, 0.1))
    assert err.max() <= 1e-6
    assert grid_fourier_transform(mu, 0.0)[0] == pytest.approx(1.0, abs=1e-14)
    a = grid_fourier_transform(mu, 0.7)[0]
    b = grid_fourier_transform(mu, -0.7)[0]
    assert a == pytest.approx(b.conjugate(), abs=1e-15)


def test_fourier_process_covariance_and_stationarity():
    sp = GroundSpace.interval(-1, 1, 512)
    mu = GridMeasure.gaussian(sp, 0.1, 0.2)
    pairs = [(0.5, 0.5), (1.0, 0.0), (1.5, 0.5), (-0.3, 0.9)]
    est = fourier_process_covariance(mu, pairs, 40_000, seed=8)
    assert all(e.within() for e in est)
    assert est[0].reference == pytest.approx(1.0, abs=1e-13)
    assert est[1].reference == pytest.approx(est[2].reference, abs=1e-14)
    d = est[1].estimate - est[2].estimate
    assert abs(d.real) <= 5 * math.hypot(est[1].se_real, est[2].se_real)
    assert abs(d.imag) <= 5 * math.hypot(est[1].se_imag, est[2].se_imag)


def test_fourier_requires_probability():
    sp = GroundSpace.interval(0, 2, 64)
    mu = GridMeasure.lebesgue(sp)
    with pytest.raises(NormalizationError):
        fourier_process_covariance(mu, [(0, 0)], 10, 0)
    with pytest.warns(UserWarning):
        est = fourier_process_covariance(mu, [(0, 0)], 10, 0, rescale=True)
    assert est[0].reference == pytest.approx(1.0)


def test_schwartz_narrow_density():
    sp = GroundSpace.interval(0, 1, 1000)
    mu = GridMeasure.gaussian(sp, 0.3, 0.002)
    x = np.linspace(-10, 10, 4001)
    chk = schwartz_transform_check(mu, lambda u: np.exp(-0.5 * u * u), x, 20_000, seed=9)
    expect = 2 * np.pi * math.exp(-4 * np.pi ** 2 * 0.09)
    assert chk.second_moment.reference == pytest.approx(expect, rel=1e-3)
    assert chk.second_moment.within()
    shifted = schwartz_transform_check(mu, lambda u: np.exp(-0.5 * (u - 1.5) ** 2), x, 10, 0)
    assert shifted.second_moment.reference == pytest.approx(chk.second_moment.reference,
                                                            rel=1e-9)
    zero = schwartz_transform_check(mu, lambda u: 0 * u, x, 10, 0)
    assert zero.second_moment.estimate == 0.0


def test_schwartz_window_error():
    mu = GridMeasure.gaussian(GroundSpace.interval(-1, 1, 64), 0, 0.2)
    with pytest.raises(WindowError):
        schwartz_transform_check(mu, lambda u: np.exp(-0.5 * u * u), np.linspace(-2, 2, 101),
                                 10, 0)


# property tests

@given(st.integers(2, 32), st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_isometry_pair_algebra(coarse, r, seed):
    rng = np.random.default_rng(seed)
    dens = rng.uniform(0.1, 5, coarse * r)
    pair = build_isometry_pair(coarse, r, dens)
    assert max(pair.invariant_errors().values()) <= 1e-12
    assert pair.contraction_ratios(rng.standard_normal((5, coarse * r))).max() <= 1 + 1e-12
