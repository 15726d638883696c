"""Positive definite kernels, Gram matrices and finite-sample RKHS quantities.

Point kernels take real scalars; set kernels take
:class:`~kernelnoise.measure_space.MeasurableSet` objects; tabulated kernels
take labels from a declared index list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy import sparse

from .errors import (
    DegenerateError,
    DomainError,
    LookupFailure,
    NotRepresentableError,
    NumericError,
    UnsupportedDerivativeError,
)
from .measure_space import GridMeasure, MeasurableSet

__all__ = [
    "Kernel",
    "SetIntersectionKernel",
    "MassProductKernel",
    "BrownianMinKernel",
    "SzegoKernel",
    "GaussianRBFKernel",
    "TabulatedKernel",
    "ScaledKernel",
    "GramMatrix",
    "Span",
    "PSDReport",
    "gram",
    "psd_certificate",
    "rkhs_inner",
    "membership_constant",
    "dominance_constant",
    "dominance_from_grams",
]


class Kernel:
    """Symmetric positive definite kernel.

    Subclasses implement :meth:`matrix`; scalar evaluation goes through it.
    """

    index_kind = "point"
    family = "abstract"

    def matrix(self, xs: Sequence, ys: Sequence) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, y) -> float:
        return float(self.matrix([x], [y])[0, 0])

    def derivative(self, x, y, m: int, n: int) -> float:
        """Mixed partial ``d^m/dx^m d^n/dy^n K(x, y)``."""
        if m == 0 and n == 0:
            return self(x, y)
        raise UnsupportedDerivativeError(
            f"{self.family} kernel has no derivative atoms")

    def scaled(self, factor: float) -> "ScaledKernel":
        return ScaledKernel(self, factor)

    def describe(self) -> dict:
        return {"family": self.family}


class ScaledKernel(Kernel):
    def __init__(self, base: Kernel, factor: float):
        if factor < 0:
            raise ValueError("scaling factor must be nonnegative")
        self.base = base
        self.factor = float(factor)
        self.index_kind = base.index_kind
        self.family = f"scaled({base.family})"

    def matrix(self, xs, ys):
        return self.factor * self.base.matrix(xs, ys)

    def derivative(self, x, y, m, n):
        return self.factor * self.base.derivative(x, y, m, n)

    def describe(self):
        return {"family": "scaled", "factor": self.factor, "base": self.base.describe()}


_DENSE_BUDGET = 4e9


class SetIntersectionKernel(Kernel):
    """``K(A, B) = mu(A & B)``, the covariance kernel of white noise."""

    index_kind = "set"
    family = "set_intersection"

    def __init__(self, measure: GridMeasure):
        self.measure = measure

    def _indicators(self, sets):
        for A in sets:
            if A.space != self.measure.space:
                raise DomainError("set is not over the kernel's ground space")
        cols = np.concatenate([A.cells for A in sets]) if sets else np.zeros(0, int)
        indptr = np.concatenate([[0], np.cumsum([len(A) for A in sets])])
        return sparse.csr_matrix((np.ones(cols.size), cols, indptr),
                                 shape=(len(sets), self.measure.space.cell_count))

    def matrix(self, xs, ys):
        X = self._indicators(xs)
        Y = X if ys is xs else self._indicators(ys)
        n = self.measure.space.cell_count
        fill = (X.nnz + Y.nnz) / max(1, (X.shape[0] + Y.shape[0]) * n)
        if fill > 0.05 and X.shape[0] * Y.shape[0] * n <= _DENSE_BUDGET:
            # dense BLAS beats sparse products once indicators are well filled
            G = (X.toarray() * self.measure.masses) @ Y.toarray().T
        else:
            G = (X.multiply(self.measure.masses).tocsr() @ Y.T).toarray()
        if ys is xs:
            # diagonal mu(A) with compensated summation, as in measure_of
            m = self.measure.masses
            G[np.diag_indices_from(G)] = [math.fsum(m[A.cells]) for A in xs]
        return G


class MassProductKernel(SetIntersectionKernel):
    """Rank-one set kernel ``K(A, B) = mu(A) mu(B)``."""

    family = "mass_product"

    def matrix(self, xs, ys):
        m = self.measure.masses
        a = self._indicators(xs) @ m
        b = a if ys is xs else self._indicators(ys) @ m
        return np.outer(a, b)


class BrownianMinKernel(Kernel):
    family = "brownian_min"

    def matrix(self, xs, ys):
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        if np.any(x < 0) or np.any(y < 0):
            raise DomainError("brownian_min kernel needs nonnegative times")
        return np.minimum.outer(x, y)


class SzegoKernel(Kernel):
    """``K(x, y) = 1 / (1 - x y)`` on the open interval (-1, 1)."""

    family = "szego"

    @staticmethod
    def _check(x):
        x = np.asarray(x, dtype=float)
        if np.any(~(np.abs(x) < 1)):
            raise DomainError("szego kernel needs |x| < 1")
        return x

    def matrix(self, xs, ys):
        x = self._check(xs)
        y = self._check(ys)
        return 1.0 / (1.0 - np.multiply.outer(x, y))

    def derivative(self, x, y, m, n):
        """Closed-form mixed partial.

        ``d^n/dy^n K = n! x^n (1 - xy)^-(n+1)``, then Leibniz in ``x``.
        """
        x = float(self._check(x))
        y = float(self._check(y))
        if m < 0 or n < 0:
            raise ValueError("derivative orders must be nonnegative")
        u = 1.0 - x * y
        total = 0.0
        for j in range(min(m, n) + 1):
            coef = (math.comb(m, j) * math.factorial(n) ** 2
                    / math.factorial(n - j)
                    * math.factorial(n + m - j) / math.factorial(n))
            total += coef * x ** (n - j) * y ** (m - j) * u ** (-(n + m - j + 1))
        return total


class GaussianRBFKernel(Kernel):
    family = "gaussian_rbf"

    def __init__(self, bandwidth: float = 1.0):
        if not bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        self.bandwidth = float(bandwidth)

    def matrix(self, xs, ys):
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        d = np.subtract.outer(x, y)
        return np.exp(-0.5 * (d / self.bandwidth) ** 2)

    def describe(self):
        return {"family": self.family, "bandwidth": self.bandwidth}


class TabulatedKernel(Kernel):
    """Kernel given as a symmetric matrix over a list of labels."""

    family = "tabulated"

    def __init__(self, index: Sequence, values):
        v = np.asarray(values, dtype=float)
        if v.shape != (len(index), len(index)):
            raise ValueError("tabulated kernel matrix must be square over its index")
        if not np.all(np.isfinite(v)):
            raise NumericError("tabulated kernel has non-finite entries")
        if not np.allclose(v, v.T, rtol=1e-12, atol=0):
            raise ValueError("tabulated kernel matrix is not symmetric")
        self.index = list(index)
        self._pos = {lab: k for k, lab in enumerate(self.index)}
        self.values = 0.5 * (v + v.T)

    def _lookup(self, labels):
        try:
            return [self._pos[lab] for lab in labels]
        except KeyError as exc:
            raise LookupFailure(f"label {exc.args[0]!r} not in kernel index") from None

    def matrix(self, xs, ys):
        return self.values[np.ix_(self._lookup(xs), self._lookup(ys))]

    def describe(self):
        return {"family": self.family, "size": len(self.index)}


@dataclass(frozen=True, eq=False)
class GramMatrix:
    points: tuple
    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def gram(K: Kernel, points: Sequence) -> GramMatrix:
    """Gram matrix ``G[i, j] = K(p_i, p_j)``, symmetrized exactly."""
    pts = tuple(points)
    G = np.asarray(K.matrix(pts, pts), dtype=float)
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    return GramMatrix(pts, G)


def _entries(G) -> np.ndarray:
    A = G.entries if isinstance(G, GramMatrix) else np.asarray(G, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericError("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class PSDReport:
    min_eigenvalue: float
    is_psd: bool
    tolerance: float
    scale: float


def psd_certificate(G, tol_rel: float = 1e-10, scale: float | None = None) -> PSDReport:
    """Eigenvalue certificate: PSD iff ``min eig >= -tol_rel * scale``.

    ``scale`` defaults to the trace of ``G``.
    """
    A = _entries(G)
    A = 0.5 * (A + A.T)
    if A.size == 0:
        return PSDReport(0.0, True, 0.0, 0.0)
    lam = float(np.linalg.eigvalsh(A)[0])
    if scale is None:
        scale = float(np.trace(A))
    tol = tol_rel * abs(scale)
    return PSDReport(lam, lam >= -tol, tol, float(scale))


@dataclass(frozen=True)
class Span:
    """Finite combination ``sum_i coeffs[i] K(., points[i])``."""

    coeffs: tuple
    points: tuple

    def __init__(self, coeffs, points):
        c = tuple(float(a) for a in np.atleast_1d(coeffs))
        p = tuple(points)
        if len(c) != len(p):
            raise ValueError("span needs one coefficient per point")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "points", p)

    @classmethod
    def section(cls, y) -> "Span":
        return cls([1.0], [y])

    def __mul__(self, a: float) -> "Span":
        return Span([a * c for c in self.coeffs], self.points)

    __rmul__ = __mul__

    def __add__(self, other: "Span") -> "Span":
        return Span(self.coeffs + other.coeffs, self.points + other.points)

    def __sub__(self, other: "Span") -> "Span":
        return self + (-1.0) * other

    def evaluate(self, K: Kernel, xs) -> np.ndarray:
        """Pointwise values ``F(x)`` at the given points."""
        if not self.points:
            return np.zeros(len(xs))
        return K.matrix(list(xs), list(self.points)) @ np.asarray(self.coeffs)


def rkhs_inner(F: Span, H: Span, K: Kernel) -> float:
    if not F.points or not H.points:
        return 0.0
    M = K.matrix(list(F.points), list(H.points))
    return float(np.asarray(F.coeffs) @ M @ np.asarray(H.coeffs))


def _range_split(A, rank_tol):
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    top = lam[-1] if lam.size else 0.0
    keep = lam > rank_tol * top if top > 0 else np.zeros(lam.shape, bool)
    return lam, U, keep


def membership_constant(psi, G, rank_tol: float = 1e-10,
                        range_tol: float | None = None) -> float:
    """Smallest constant ``C`` with ``|sum a_i psi_i|^2 <= C a^T G a``.

    Computed as ``psi^T G^+ psi`` on the numerical range of ``G``.  This is
    the finite-sample lower bound for the squared RKHS norm of ``psi``.

    Parameters
    ----------
    psi
        Candidate function values at the Gram points.
    G
        Gram matrix of the kernel at the same points.
    rank_tol
        Eigenvalues below ``rank_tol * max eigenvalue`` count as zero.
    range_tol
        Relative residual of ``psi`` off the kept eigenspace that is still
        accepted.  Defaults to ``sqrt(rank_tol)``: a true RKHS member has
        off-range components of size at most ``sqrt(cutoff) * norm``.

    Raises
    ------
    NotRepresentableError
        ``psi`` has a component outside the numerical range of ``G``.
    """
    A = _entries(G)
    psi = np.asarray(psi, dtype=float).ravel()
    if psi.size != A.shape[0]:
        raise ValueError("psi must have one value per Gram point")
    if range_tol is None:
        range_tol = math.sqrt(rank_tol)
    pnorm = float(np.linalg.norm(psi))
    if pnorm == 0.0:
        return 0.0

    off = A - np.diag(np.diag(A))
    if not off.any():
        # block-diagonal Grams of disjoint sets: no eigensolve needed
        d = np.diag(A)
        top = d.max()
        keep = d > rank_tol * top if top > 0 else np.zeros(d.shape, bool)
        resid = float(np.linalg.norm(psi[~keep]))
        if resid > range_tol * pnorm:
            raise NotRepresentableError(
                f"off-range residual {resid:.3e} exceeds {range_tol:.1e} * |psi|")
        return math.fsum(psi[keep] ** 2 / d[keep])

    lam, U, keep = _range_split(A, rank_tol)
    c = U.T @ psi
    resid = float(np.linalg.norm(c[~keep]))
    if resid > range_tol * pnorm:
        raise NotRepresentableError(
            f"off-range residual {resid:.3e} exceeds {range_tol:.1e} * |psi|")
    return float(np.sum(c[keep] ** 2 / lam[keep]))


def dominance_from_grams(G1, G2, rank_tol: float = 1e-10) -> float:
    """Largest generalized eigenvalue of ``(G1, G2)`` on the range of ``G2``."""
    A1 = _entries(G1)
    A2 = _entries(G2)
    lam, U, keep = _range_split(A2, rank_tol)
    if not keep.any():
        raise DegenerateError("second Gram matrix is numerically zero")
    W = U[:, keep] / np.sqrt(lam[keep])
    M = W.T @ A1 @ W
    C = float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])
    if (~keep).any():
        N = U[:, ~keep]
        leak = np.abs(N.T @ A1 @ N).max()
        if leak > math.sqrt(rank_tol) * max(np.trace(A1), 1e-300):
            raise NotRepresentableError(
                "first kernel is not dominated: it charges the null space of the second")
    return max(C, 0.0)


def dominance_constant(K1: Kernel, K2: Kernel, points: Sequence,
                       tol_rel: float = 1e-10, rank_tol: float = 1e-10) -> float:
    """Smallest ``C`` with ``C K2 - K1`` positive semidefinite on ``points``.

    ``tol_rel`` is accepted for symmetry with :func:`psd_certificate`; the
    constant itself comes from the generalized eigenproblem and the caller
    certifies it with ``psd_certificate(C G2 - G1, tol_rel, scale=trace G2)``.
    """
    G1 = gram(K1, points)
    G2 = gram(K2, points)
    if float(np.trace(G2.entries)) <= 0:
        raise DegenerateError("second Gram matrix is numerically zero")
    return dominance_from_grams(G1, G2, rank_tol)


def certify_dominance(G1, G2, C: float, tol_rel: float = 1e-10,
                      shrink: float = 0.9) -> tuple[PSDReport, PSDReport]:
    """PSD reports for ``C G2 - G1`` and ``shrink * C G2 - G1``."""
    A1 = _entries(G1)
    A2 = _entries(G2)
    scale = float(np.trace(A2))
    return (psd_certificate(C * A2 - A1, tol_rel, scale=scale),
            psd_certificate(shrink * C * A2 - A1, tol_rel, scale=scale))


def random_psd_pair(rng: np.random.Generator, n: int, rank: int | None = None):
    """Two random PSD matrices for dominance tests."""
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank))
    B = rng.standard_normal((n, n))
    return A @ A.T, B @ B.T + 1e-3 * np.eye(n)


def build_kernel(spec: dict, measure: GridMeasure | None = None,
                 labels: Any = None) -> Kernel:
    """Kernel from a config entry such as ``{"family": "szego"}``."""
    fam = spec["family"]
    if fam == "set_intersection":
        return SetIntersectionKernel(_need(measure))
    if fam == "mass_product":
        return MassProductKernel(_need(measure))
    if fam == "brownian_min":
        return BrownianMinKernel()
    if fam == "szego":
        return SzegoKernel()
    if fam == "gaussian_rbf":
        return GaussianRBFKernel(spec.get("bandwidth", 1.0))
    if fam == "tabulated":
        idx = spec.get("index") or labels or list(range(len(spec["matrix"])))
        return TabulatedKernel(idx, spec["matrix"])
    if fam == "scaled":
        return ScaledKernel(build_kernel(spec["base"], measure, labels), spec["factor"])
    raise ValueError(f"unknown kernel family {fam!r}")


def _need(measure):
    if measure is None:
        raise ValueError("set kernels need a measure")
    return measure
