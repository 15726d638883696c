import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelnoise.errors import (
    InputError,
    NonPositiveDefiniteError,
    StaleCertificateError,
    UnsupportedDerivativeError,
)
from kernelnoise.features import (
    FeatureMap,
    SignedFunctional,
    adjointness_gap,
    brownian_features,
    continuous_frame_check,
    delta_expansion,
    factor_through_white_noise,
    factorization_residual,
    functional_pairing,
    indicator_factor,
    indicator_features,
    kernel_metric,
    measure_rkhs_norm,
    parseval_frame_check,
    projection_matrix,
    projection_Q,
    rank_one_factor,
    szego_features,
    szego_monomial_frame,
    transform_J,
    transform_L,
    transform_L_white_noise,
)
from kernelnoise.kernels import (
    BrownianMinKernel,
    GaussianRBFKernel,
    MassProductKernel,
    SetIntersectionKernel,
    Span,
    SzegoKernel,
    TabulatedKernel,
    gram,
    membership_constant,
    rkhs_inner,
)
from kernelnoise.measure_space import GridMeasure, GroundSpace, dyadic_ladder
from kernelnoise.white_noise import sample_fields

SZ = SzegoKernel()
GRID = np.linspace(-0.8, 0.8, 161)


@pytest.fixture(scope="module")
def frame():
    return szego_monomial_frame(60, GRID).certify(SZ, 1e-6)


@pytest.fixture(scope="module")
def bm():
    sp = GroundSpace.interval(0, 1, 512)
    mu = GridMeasure.lebesgue(sp)
    times = list(sp.edges[8::8])
    return mu, brownian_features(times, mu).certify(BrownianMinKernel(), 1e-12)


def test_szego_case_one_residual():
    r = szego_features(list(GRID[::8]), 60)
    assert factorization_residual(SZ, r) <= 1e-6


def test_constant_kernel_residual():
    sp = GroundSpace.finite(3)
    mu = GridMeasure(sp, [0.5, 1.0, 2.5])
    v = np.full(3, 1 / 2)
    r = FeatureMap(("a", "b"), [v, v], mu)
    K = TabulatedKernel(["a", "b"], np.full((2, 2), 1.0))
    assert factorization_residual(K, r) == 0.0


def test_brownian_features_reproduce_min(bm):
    mu, r = bm
    assert factorization_residual(BrownianMinKernel(), r) <= 1e-14


def test_transform_J_examples(bm):
    mu, r = bm
    t = r.index_points[5]
    np.testing.assert_array_equal(transform_J(Span.section(t), r), r.rows([t])[0])
    assert not transform_J(Span([0.0, 0.0], r.index_points[:2]), r).any()


def test_transform_L_examples(bm):
    mu, r = bm
    y = r.index_points[10]
    Lh = transform_L(r.rows([y])[0], r)
    np.testing.assert_allclose(Lh, np.minimum(r.index_points, y), rtol=0, atol=1e-14)
    # a function orthogonal to every indicator of [0, t)
    sp = mu.space
    h = np.zeros(sp.cell_count)
    h[sp.cell_count - 1] = 1.0
    r2 = brownian_features(list(sp.edges[1:-1:4]), mu)
    assert not transform_L(h, r2).any()


def test_transform_L_white_noise(bm):
    mu, _ = bm
    sp = mu.space
    h = np.cos(3 * sp.representatives)
    sets = [sp.interval_set(0, 0.4), sp.interval_set(0.2, 0.9)]
    ests = transform_L_white_noise(h, sample_fields(mu, 40_000, seed=3), sets)
    assert all(e.within() for e in ests)


def test_projection_examples(bm, rng):
    mu, r = bm
    x = r.index_points[3]
    rx = r.rows([x])[0]
    np.testing.assert_allclose(projection_Q(rx, r), rx, rtol=0, atol=1e-12)
    h = rng.normal(size=mu.space.cell_count)
    Qh = projection_Q(h, r)
    assert mu.norm(Qh) <= mu.norm(h)
    assert abs(mu.inner(Qh, h - Qh)) <= 1e-10 * mu.norm(h) ** 2
    ortho = h - Qh
    assert mu.norm(projection_Q(ortho, r)) <= 1e-10 * mu.norm(ortho)


def test_parseval_examples(frame):
    g3, g4 = parseval_frame_check(frame, SZ, Span.section(0.5))
    assert g3 <= 1e-8 and g4 <= 1e-6
    assert parseval_frame_check(frame, SZ, Span([], [])) == (0.0, 0.0)
    g3, g4 = parseval_frame_check(frame, SZ, Span([1.0, -1.0], [0.6, -0.2]))
    assert g4 <= 1e-6


def test_stale_certificate(frame):
    with pytest.raises(StaleCertificateError):
        parseval_frame_check(szego_monomial_frame(60, GRID), SZ, Span.section(0.5))
    with pytest.raises(StaleCertificateError):
        parseval_frame_check(frame, SzegoKernel(), Span.section(0.5))
    bad = szego_monomial_frame(5, GRID).certify(SZ, 1e-6)
    with pytest.raises(StaleCertificateError):
        parseval_frame_check(bad, SZ, Span.section(0.5))


def test_continuous_frame_examples(bm, rng):
    mu, r = bm
    K = r.certificate.kernel
    y = r.index_points[7]
    g8, _ = continuous_frame_check(K, r, Span.section(y))
    assert g8 == pytest.approx(abs(K(y, y) - mu.inner(r.rows([y])[0], r.rows([y])[0])), abs=1e-15)
    assert continuous_frame_check(K, r, Span([], [])) == (0.0, 0.0)
    pts = [r.index_points[i] for i in rng.choice(len(r.index_points), 5, replace=False)]
    g8, g9 = continuous_frame_check(K, r, Span(rng.normal(size=5), pts))
    assert g8 <= 1e-8 and g9 <= 1e-8


def test_measure_rkhs_norm_examples():
    sp = GroundSpace.interval(0, 1, 256)
    mu = GridMeasure.lebesgue(sp)
    ladder = dyadic_ladder(sp.full())
    norms = measure_rkhs_norm(np.ones(256), mu, ladder)
    assert norms[-1] == pytest.approx(1.0, abs=1e-12)
    half = (sp.representatives < 0.5).astype(float)
    norms = measure_rkhs_norm(half, mu, ladder)
    assert norms[1] == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert norms[-1] == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_radon_nikodym_of_section():
    sp = GroundSpace.interval(0, 1, 64)
    mu = GridMeasure.from_density(sp, 1 + sp.representatives)
    A = sp.interval_set(0.25, 0.75)
    atoms = [sp.cells([i]) for i in range(64)]
    section = SetIntersectionKernel(mu).matrix(atoms, [A])[:, 0]
    np.testing.assert_allclose(section / mu.masses, A.indicator(), rtol=0, atol=1e-14)


def test_factorization_examples():
    sp = GroundSpace.interval(0, 1, 128)
    mu = GridMeasure.gaussian(sp, 0.5, 0.2)
    rng = np.random.default_rng(11)
    sets = [sp.cells(rng.choice(128, rng.integers(1, 129), replace=False)) for _ in range(10)]
    pairs = [(2 * k, 2 * k + 1) for k in range(5)]
    rep = factor_through_white_noise(SetIntersectionKernel(mu), indicator_factor, mu, sets,
                                     pairs, 30_000, seed=12)
    assert rep.residual == 0.0
    assert all(e.within() for e in rep.mc)
    rep = factor_through_white_noise(MassProductKernel(mu), rank_one_factor(mu), mu, sets,
                                     pairs, 30_000, seed=13)
    assert rep.residual <= 1e-15
    assert all(e.within() for e in rep.mc)
    with pytest.raises(InputError):
        factor_through_white_noise(SetIntersectionKernel(mu), {}, mu, sets[:1], [], 0, 0)


def test_pairing_examples():
    K = GaussianRBFKernel(0.5)
    assert functional_pairing(SignedFunctional.dirac(0.2), K,
                              SignedFunctional.dirac(-0.4)) == K(0.2, -0.4)
    d = SignedFunctional.dirac(0.3)
    assert functional_pairing(d - d, K, d) == 0.0
    with pytest.raises(UnsupportedDerivativeError):
        functional_pairing(SignedFunctional.dirac(0.1, order=1), K, d)


def test_szego_dirac_table():
    for n in range(7):
        for m in range(7):
            v = functional_pairing(SignedFunctional.dirac(0.0, order=n), SZ,
                                   SignedFunctional.dirac(0.0, order=m))
            if n == m:
                assert v == pytest.approx(math.factorial(n) ** 2, rel=1e-9)
            else:
                assert abs(v) <= 1e-9 * math.factorial(n) * math.factorial(m)


def test_delta_expansion_converges():
    x, y = 0.5, 0.3
    v = functional_pairing(delta_expansion(x, 40), SZ, delta_expansion(y, 40))
    assert v == pytest.approx(SZ(x, y), rel=1e-12)


def test_metric_examples():
    K = BrownianMinKernel()
    assert kernel_metric(K, 0.4, 0.4) == 0.0
    assert kernel_metric(K, 0.2, 0.7) ** 2 == pytest.approx(0.5, abs=1e-15)
    bad = TabulatedKernel([0, 1], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NonPositiveDefiniteError):
        kernel_metric(bad, 0, 1)


# property tests

@given(st.integers(0, 2**32 - 1))
def test_metric_triangle_and_continuity(seed):
    rng = np.random.default_rng(seed)
    K = SZ
    for _ in range(50):
        a, b, c = rng.uniform(-0.9, 0.9, 3)
        assert kernel_metric(K, a, c) <= kernel_metric(K, a, b) + kernel_metric(K, b, c) + 1e-12
        lhs = abs(K(a, c) - K(b, c))
        assert lhs <= kernel_metric(K, a, b) * math.sqrt(K(c, c)) + 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_order_zero_pairing_is_gram_form(seed, k):
    rng = np.random.default_rng(seed)
    K = GaussianRBFKernel(0.8)
    x, y = rng.uniform(-2, 2, k), rng.uniform(-2, 2, k)
    a, b = rng.normal(size=k), rng.normal(size=k)
    xi = sum((SignedFunctional.dirac(p, w) for p, w in zip(x, a)), SignedFunctional())
    eta = sum((SignedFunctional.dirac(p, w) for p, w in zip(y, b)), SignedFunctional())
    v = functional_pairing(xi, K, eta)
    assert v == pytest.approx(a @ K.matrix(x, y) @ b, rel=1e-12, abs=1e-14)
    assert functional_pairing(xi, K, xi) >= -1e-10 * max(1.0, np.abs(a).sum() ** 2)
    assert v == pytest.approx(functional_pairing(eta, K, xi), rel=1e-12, abs=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_transform_identities_brownian(seed):
    rng = np.random.default_rng(seed)
    sp = GroundSpace.interval(0, 1, 128)
    mu = GridMeasure.from_density(sp, rng.uniform(0.2, 3, 128))
    times = list(sp.edges[1::4])
    r = brownian_features(times, mu)
    K = TabulatedKernel(times, r.gram())
    m = int(rng.integers(1, len(times)))
    F = Span(rng.normal(size=m), [times[i] for i in rng.choice(len(times), m, replace=False)])
    g = transform_J(F, r)
    lhs = rkhs_inner(F, F, K)
    assert abs(lhs - mu.inner(g, g)) <= 1e-8 * max(lhs, 1e-12)
    h = rng.normal(size=128)
    assert adjointness_gap(F, h, r) <= 1e-10 * mu.norm(h) * math.sqrt(max(lhs, 1e-300)) + 1e-14
    Q = projection_matrix(r)
    assert mu.norm(Q @ h) <= mu.norm(h) * (1 + 1e-12)
    assert mu.norm(Q @ (Q @ h) - Q @ h) <= 1e-10 * mu.norm(h)
    c = membership_constant(transform_L(h, r), gram(K, times))
    assert c <= mu.inner(h, h) * (1 + 1e-8)
