import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelnoise.errors import InputError
from kernelnoise.markov import (
    TransitionKernel,
    apply,
    apply_dual,
    interpolate,
    interpolate_n,
    iterate,
    two_step_sum,
)
from kernelnoise.measure_space import intersect

P2 = [[0.5, 0.5], [0.25, 0.75]]


@pytest.fixture
def two():
    return TransitionKernel.from_matrix(P2)


def test_apply_examples(two):
    np.testing.assert_array_equal(apply(two, [1.0, 1.0]), [1.0, 1.0])
    np.testing.assert_array_equal(apply(two, [1.0, 0.0]), [0.5, 0.25])
    ident = TransitionKernel.from_matrix(np.eye(3))
    f = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(apply(ident, f), f)


def test_apply_dual_examples(two, rng):
    np.testing.assert_array_equal(apply_dual(two, [0.0, 1.0]), P2[1])
    stationary = np.array([1 / 3, 2 / 3])
    np.testing.assert_allclose(apply_dual(two, stationary), stationary, rtol=0, atol=1e-15)
    f, nu = rng.normal(size=2), rng.normal(size=2)
    assert nu @ apply(two, f) == pytest.approx(apply_dual(two, nu) @ f, abs=1e-14)


def test_iterate_examples(two):
    assert np.array_equal(iterate(two, 1).rows, two.rows)
    np.testing.assert_allclose(iterate(two, 2).rows, [[0.375, 0.625], [0.3125, 0.6875]],
                               rtol=0, atol=1e-15)
    np.testing.assert_allclose(iterate(two, 3).rows, [[0.34375, 0.65625],
                                                      [0.328125, 0.671875]], rtol=0, atol=1e-15)
    with pytest.warns(UserWarning):
        assert np.array_equal(iterate(two, 0).rows, np.eye(2))


def test_row_sums_after_iteration(rng):
    P5 = iterate(TransitionKernel.random(64, rng), 5)
    assert np.abs(P5.rows.sum(axis=1) - 1).max() <= 1e-10


def test_rejects_non_stochastic():
    with pytest.raises(ValueError):
        TransitionKernel.from_matrix([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ValueError):
        TransitionKernel.from_matrix([[1.5, -0.5], [0.5, 0.5]])


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "P.csv"
    p.write_text("0.3333333333,0.6666666667\n0.25,0.75\n")
    P = TransitionKernel.from_csv(p)
    assert P.rows.sum(axis=1) == pytest.approx([1, 1], abs=1e-15)
    p.write_text("0.3,0.6\n0.25,0.75\n")
    with pytest.raises(ValueError):
        TransitionKernel.from_csv(p)


def test_interpolate_two_state(two):
    V = two.space.full()
    A, B = two.space.cells([0]), two.space.cells([1])
    res = interpolate(two, 0, 1, V, V, 20_000, seed=1)
    assert res.exact == pytest.approx(1.0) and res.covariance.within()
    assert res.mean_A.within()
    disj = interpolate(two, 1, 1, A, B, 20_000, seed=2)
    assert disj.exact == 0.0 and disj.covariance.within()
    r3 = interpolate_n(two, 0, 3, A, V, 20_000, seed=3)
    assert r3.exact == pytest.approx(0.34375) and r3.covariance.within()


def test_interpolate_n2_is_one_fold(two):
    A = two.space.cells([0])
    a = interpolate(two, 1, 1, A, A, 500, seed=4)
    b = interpolate_n(two, 1, 2, A, A, 500, seed=4)
    assert a == b


def test_interpolate_random_64(rng):
    P = TransitionKernel.random(64, rng)
    A = P.space.cells(rng.choice(64, 30, replace=False))
    B = P.space.cells(rng.choice(64, 40, replace=False))
    res = interpolate(P, 5, 1, A, B, 20_000, seed=5)
    oracle = float((P.rows @ P.rows)[5, intersect(A, B).cells].sum())
    assert res.exact == pytest.approx(oracle, abs=1e-14)
    assert res.covariance.within() and res.mean_A.within()


def test_interpolate_input_errors(two):
    A = two.space.full()
    with pytest.raises(InputError):
        interpolate_n(two, 0, 1, A, A, 10, 0)
    with pytest.raises(IndexError):
        interpolate_n(two, 2, 2, A, A, 10, 0)


# property tests

@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_two_step_identity(seed, S):
    rng = np.random.default_rng(seed)
    P = TransitionKernel.random(S, rng, concentration=rng.uniform(0.1, 3))
    A = P.space.cells(rng.choice(S, rng.integers(0, S + 1), replace=False))
    B = P.space.cells(rng.choice(S, rng.integers(0, S + 1), replace=False))
    x = int(rng.integers(S))
    assert abs(two_step_sum(P, x, A, B) - iterate(P, 2).prob(x, intersect(A, B))) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_iterates_stay_stochastic(seed, n):
    P = TransitionKernel.random(12, np.random.default_rng(seed))
    Pn = iterate(P, n)
    assert Pn.rows.min() >= 0
    assert np.abs(Pn.rows.sum(axis=1) - 1).max() <= 1e-12
