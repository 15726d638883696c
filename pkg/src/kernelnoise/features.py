"""Feature maps into ``L2(mu)``, frames, the transforms J, L, Q, and
signed functionals paired through a kernel.

A :class:`FeatureMap` tabulates ``x -> r_x`` on a grid measure so that
``K(x, y) = <r_x, r_y>``.  ``J`` sends ``K(., x)`` to ``r_x``, its adjoint
``L`` sends ``h`` to ``x -> <h, r_x>``, and ``Q = J J*`` is the orthogonal
projection onto the closed span of the features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    InputError,
    LookupFailure,
    NonPositiveDefiniteError,
    StaleCertificateError,
)
from .kernels import (
    Kernel,
    SetIntersectionKernel,
    Span,
    gram,
    membership_constant,
    rkhs_inner,
)
from .measure_space import GridMeasure, GroundSpace, MeasurableSet, Partition, measure_of
from .stats import MCEstimate, mean_estimate
from .white_noise import FieldEnsemble, sample_fields, set_values

__all__ = [
    "Certificate",
    "FeatureMap",
    "FrameSequence",
    "Atom",
    "SignedFunctional",
    "szego_features",
    "brownian_features",
    "indicator_features",
    "szego_monomial_frame",
    "factorization_residual",
    "transform_J",
    "transform_L",
    "transform_L_white_noise",
    "adjointness_gap",
    "projection_matrix",
    "projection_Q",
    "parseval_frame_check",
    "continuous_frame_check",
    "measure_rkhs_norm",
    "FactorizationReport",
    "factor_through_white_noise",
    "functional_pairing",
    "kernel_metric",
    "delta_expansion",
]


@dataclass(frozen=True)
class Certificate:
    kernel: Kernel
    residual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.tolerance


@dataclass(frozen=True, eq=False)
class FeatureMap:
    index_points: tuple
    values: np.ndarray
    measure: GridMeasure
    certificate: Certificate | None = None

    def __post_init__(self):
        pts = tuple(self.index_points)
        V = np.array(self.values, dtype=float)
        if V.shape != (len(pts), self.measure.space.cell_count):
            raise ValueError("feature values must have shape (points, cells)")
        V.setflags(write=False)
        object.__setattr__(self, "index_points", pts)
        object.__setattr__(self, "values", V)
        object.__setattr__(self, "_pos", {p: k for k, p in enumerate(pts)})

    def rows(self, points) -> np.ndarray:
        try:
            return self.values[[self._pos[p] for p in points]]
        except KeyError as exc:
            raise LookupFailure(f"unknown index point {exc.args[0]!r}") from None

    def gram(self) -> np.ndarray:
        V = self.values
        return (V * self.measure.masses) @ V.T

    def certify(self, K: Kernel, tol: float) -> "FeatureMap":
        return replace(self, certificate=Certificate(K, factorization_residual(K, self), tol))


def szego_features(points, N: int) -> FeatureMap:
    """Monomials ``r_x(n) = x^n``, ``n = 0..N``, under counting measure."""
    x = np.asarray(points, dtype=float)
    space = GroundSpace.finite(N + 1)
    V = x[:, None] ** np.arange(N + 1)
    return FeatureMap(tuple(x.tolist()), V, GridMeasure.counting(space))


def brownian_features(times, mu: GridMeasure) -> FeatureMap:
    """``r_t = 1_[a, t]`` on an interval grid."""
    V = np.array([mu.space.interval_set(mu.space.a, t).indicator() for t in times])
    return FeatureMap(tuple(float(t) for t in times), V, mu)


def indicator_features(sets: Sequence[MeasurableSet], mu: GridMeasure) -> FeatureMap:
    """``r_A = 1_A``, factoring the set-intersection kernel."""
    V = np.array([A.indicator() for A in sets])
    return FeatureMap(tuple(sets), V, mu)


def factorization_residual(K: Kernel, r: FeatureMap) -> float:
    pts = list(r.index_points)
    return float(np.abs(K.matrix(pts, pts) - r.gram()).max())


def transform_J(span: Span, r: FeatureMap) -> np.ndarray:
    if not span.points:
        return np.zeros(r.measure.space.cell_count)
    return np.asarray(span.coeffs) @ r.rows(span.points)


def transform_L(h, r: FeatureMap) -> np.ndarray:
    """``(Lh)(x) = <h, r_x>`` for every index point, in index order."""
    return r.values @ (np.asarray(h, dtype=float) * r.measure.masses)


def transform_L_white_noise(h, ens: FieldEnsemble,
                            sets: Sequence[MeasurableSet]) -> list[MCEstimate]:
    """Monte Carlo ``E(X_h X_A)`` against ``integral over A of h dmu``."""
    h = np.asarray(h, dtype=float)
    mu = ens.measure

    def one(blk):
        return np.column_stack([blk @ h, set_values(blk, sets)])

    v = ens.replica_values(one)
    return [mean_estimate(v[:, 0] * v[:, k + 1], float(np.dot(h[A.cells], mu.masses[A.cells])))
            for k, A in enumerate(sets)]


def adjointness_gap(span: Span, h, r: FeatureMap) -> float:
    """``|<J f, h> - <f, L h>|``; the right side is ``sum a_i (Lh)(x_i)``."""
    lhs = r.measure.inner(transform_J(span, r), h)
    Lh = transform_L(h, r)
    idx = [r._pos[p] for p in span.points]
    rhs = float(np.dot(span.coeffs, Lh[idx])) if idx else 0.0
    return abs(lhs - rhs)


def projection_matrix(r: FeatureMap, rank_tol: float = 1e-10) -> np.ndarray:
    """Matrix of the orthogonal projection onto ``span{r_x}`` in ``L2(mu)``.

    Built from an SVD of the mass-weighted features so the kept singular
    vectors are orthonormal to working precision.  Zero-mass cells are
    mapped to zero.
    """
    m = r.measure.masses
    sup = m > 0
    w = np.sqrt(m[sup])
    A = (r.values[:, sup] * w).T
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    keep = s > rank_tol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, bool)
    Ur = U[:, keep]
    n = m.size
    Q = np.zeros((n, n))
    Q[np.ix_(sup, sup)] = (Ur / w[:, None]) @ (Ur.T * w)
    return Q


def projection_Q(h, r: FeatureMap, rank_tol: float = 1e-10) -> np.ndarray:
    return projection_matrix(r, rank_tol) @ np.asarray(h, dtype=float)


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Functions ``h_0..h_N`` known through a vectorized evaluator.

    ``evaluate(xs)`` returns an array of shape ``(N + 1, len(xs))``.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    order: int
    index_points: tuple
    certificate: Certificate | None = None

    def certify(self, K: Kernel, tol: float) -> "FrameSequence":
        x = np.asarray(self.index_points, dtype=float)
        H = self.evaluate(x)
        res = float(np.abs(K.matrix(x, x) - H.T @ H).max())
        return replace(self, certificate=Certificate(K, res, tol))


def szego_monomial_frame(N: int, index_points) -> FrameSequence:
    def ev(xs):
        xs = np.asarray(xs, dtype=float)
        return xs[None, :] ** np.arange(N + 1)[:, None]

    return FrameSequence(ev, N, tuple(float(p) for p in index_points))


def _require(cert: Certificate | None, K: Kernel):
    if cert is None or cert.kernel is not K or not cert.ok:
        raise StaleCertificateError(
            "truncation/factorization residual not certified for this kernel")


def parseval_frame_check(frame: FrameSequence, K: Kernel, F: Span,
                         eval_points=None) -> tuple[float, float]:
    """Norm-identity gap and reconstruction gap of a frame on a span.

    Frame coefficients use the reproducing property:
    ``<F, h_n> = sum_i a_i h_n(x_i)``.
    """
    _require(frame.certificate, K)
    xs = np.asarray(frame.index_points if eval_points is None else eval_points, dtype=float)
    if not F.points:
        return 0.0, 0.0
    a = np.asarray(F.coeffs)
    c = frame.evaluate(np.asarray(F.points, dtype=float)) @ a
    norm2 = rkhs_inner(F, F, K)
    gap3 = abs(norm2 - math.fsum(c * c))
    recon = c @ frame.evaluate(xs)
    gap4 = float(np.abs(F.evaluate(K, xs) - recon).max())
    return gap3, gap4


def continuous_frame_check(K: Kernel, r: FeatureMap, F: Span) -> tuple[float, float]:
    """Gaps of the continuous-frame identities, stated through ``g = J F``.

    ``gap8 = | |F|^2 - integral g^2 dmu |`` and
    ``gap9 = max_x |F(x) - integral r_x g dmu|`` over the index points.
    """
    _require(r.certificate, K)
    if not F.points:
        return 0.0, 0.0
    g = transform_J(F, r)
    gap8 = abs(rkhs_inner(F, F, K) - r.measure.inner(g, g))
    pts = list(r.index_points)
    gap9 = float(np.abs(F.evaluate(K, pts) - transform_L(g, r)).max())
    return gap8, gap9


def measure_rkhs_norm(phi, mu: GridMeasure, ladder: Sequence[Partition],
                      rank_tol: float = 1e-10) -> list[float]:
    """Finite-sample RKHS norms of ``F(A) = integral over A of phi dmu``.

    At each partition the norm is the square root of the membership
    constant of the values ``F(A_i)`` against the set-intersection Gram
    matrix of the blocks.
    """
    phi = np.asarray(phi, dtype=float)
    K = SetIntersectionKernel(mu)
    out = []
    for pi in ladder:
        blocks = list(pi.blocks)
        vals = [float(np.dot(phi[A.cells], mu.masses[A.cells])) for A in blocks]
        C = membership_constant(vals, gram(K, blocks), rank_tol)
        out.append(math.sqrt(C))
    return out


@dataclass(frozen=True)
class FactorizationReport:
    residual: float
    mc: list = field(default_factory=list)


def factor_through_white_noise(K: Kernel, G: Mapping | Callable, mu: GridMeasure,
                               sets: Sequence[MeasurableSet], pairs: Sequence[tuple],
                               replicas: int, seed: int, threads: int = 1) -> FactorizationReport:
    """Check ``K(A, B) = integral G(A, x) G(B, x) dmu`` and simulate
    ``X^K_A = integral G(A, .) dX`` against it.

    ``pairs`` holds index pairs into ``sets``.
    """
    def factor(A):
        try:
            g = G(A) if callable(G) else G[A]
        except KeyError:
            raise InputError(f"no factor supplied for {A!r}") from None
        return np.asarray(g, dtype=float)

    Gm = np.array([factor(A) for A in sets])
    Kmat = K.matrix(list(sets), list(sets))
    resid = float(np.abs(Kmat - (Gm * mu.masses) @ Gm.T).max())
    mc = []
    if replicas:
        ens = sample_fields(mu, replicas, seed, threads)
        X = ens.replica_values(lambda blk: blk @ Gm.T)
        for i, j in pairs:
            mc.append(mean_estimate(X[:, i] * X[:, j], float(Kmat[i, j])))
    return FactorizationReport(resid, mc)


def indicator_factor(A: MeasurableSet) -> np.ndarray:
    return A.indicator()


def rank_one_factor(mu: GridMeasure) -> Callable:
    """Factor of ``mu(A) mu(B)``: ``G(A, .) = mu(A) / sqrt(mu(V))``."""
    c = 1.0 / math.sqrt(mu.total)

    def G(A):
        return np.full(mu.space.cell_count, measure_of(mu, A) * c)

    return G


@dataclass(frozen=True)
class Atom:
    location: float
    order: int = 0
    weight: float = 1.0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("derivative order must be >= 0")


@dataclass(frozen=True)
class SignedFunctional:
    """Finite combination of Dirac masses and Dirac derivatives."""

    atoms: tuple = ()

    @classmethod
    def dirac(cls, x, weight: float = 1.0, order: int = 0) -> "SignedFunctional":
        return cls((Atom(x, order, weight),))

    def __add__(self, other):
        return SignedFunctional(self.atoms + other.atoms)

    def __mul__(self, a: float):
        return SignedFunctional(tuple(Atom(t.location, t.order, a * t.weight)
                                      for t in self.atoms))

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    @property
    def max_order(self) -> int:
        return max((t.order for t in self.atoms), default=0)


def delta_expansion(x: float, order: int, at: float = 0.0) -> SignedFunctional:
    """Truncated Taylor expansion ``sum_n (x - at)^n / n! delta_at^(n)``."""
    return SignedFunctional(tuple(
        Atom(at, n, (x - at) ** n / math.factorial(n)) for n in range(order + 1)))


def functional_pairing(xi: SignedFunctional, K: Kernel, eta: SignedFunctional) -> float:
    """``sum_a sum_b w_a w_b d^{m_a}_x d^{m_b}_y K(x_a, y_b)``."""
    terms = [a.weight * b.weight * K.derivative(a.location, b.location, a.order, b.order)
             for a in xi.atoms for b in eta.atoms]
    return math.fsum(terms)


def kernel_metric(K: Kernel, x, y, slack: float = 1e-12) -> float:
    """``d_K(x, y) = sqrt(K(x,x) + K(y,y) - 2 K(x,y))``."""
    kxx, kyy, kxy = K(x, x), K(y, y), K(x, y)
    rad = kxx + kyy - 2.0 * kxy
    if rad < -slack * max(1.0, kxx + kyy):
        raise NonPositiveDefiniteError(
            f"negative metric radicand {rad:.3e}: kernel is not positive definite")
    return math.sqrt(max(rad, 0.0))
