"""Ito integrals against grid white noise.

Covers the isometry (statistical and operator form), quadratic variation
under partition refinement, the Ito-formula residual on ordered grids, and
the Fourier-side covariance checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateError,
    InputError,
    NormalizationError,
    NumericError,
    PartitionError,
    UnsupportedError,
    WindowError,
)
from .measure_space import (
    GridMeasure,
    GroundSpace,
    MeasurableSet,
    Partition,
    measure_of,
    mesh,
    refine,
)
from .stats import (
    ComplexMCEstimate,
    MCEstimate,
    complex_mean_estimate,
    mean_estimate,
    variance_estimate,
)
from .white_noise import FieldEnsemble, WhiteNoiseField, sample_fields

__all__ = [
    "ItoIntegralResult",
    "ito_integral",
    "ito_integrals",
    "isometry_mc",
    "polarization_mc",
    "IsometryPair",
    "build_isometry_pair",
    "QVLevel",
    "QVReport",
    "quadratic_variation",
    "ItoLemmaResult",
    "ito_lemma_residual",
    "grid_fourier_transform",
    "gaussian_characteristic_function",
    "fourier_process_covariance",
    "SchwartzCheck",
    "schwartz_transform_check",
]


def _check_integrand(f, n):
    f = np.asarray(f)
    if f.shape != (n,):
        raise InputError(f"integrand needs {n} cell values, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise NumericError("integrand has non-finite values")
    return f


@dataclass(frozen=True)
class ItoIntegralResult:
    value: complex | float
    integrand: np.ndarray
    field_ref: int


def ito_integral(field: WhiteNoiseField, f) -> float:
    """``sum_i f(s_i) dX_i`` for one replica."""
    f = _check_integrand(f, field.increments.size)
    return np.dot(f, field.increments).item()


def ito_integrals(ens: FieldEnsemble, fs) -> np.ndarray:
    """Integrals of each integrand (rows of ``fs``) for every replica.

    Returns shape ``(replicas, integrands)``.
    """
    F = np.atleast_2d(np.asarray(fs))
    for f in F:
        _check_integrand(f, ens.measure.space.cell_count)
    return ens.replica_values(lambda blk: blk @ F.T)


def isometry_mc(ens: FieldEnsemble, fs) -> list[MCEstimate]:
    """``E|X_f|^2`` estimates against ``integral of f^2 dmu``."""
    F = np.atleast_2d(np.asarray(fs, dtype=float))
    vals = ito_integrals(ens, F)
    return [mean_estimate(vals[:, k] ** 2, ens.measure.inner(F[k], F[k]))
            for k in range(F.shape[0])]


def polarization_mc(ens: FieldEnsemble, f, g) -> MCEstimate:
    vals = ito_integrals(ens, np.vstack([f, g]))
    return mean_estimate(vals[:, 0] * vals[:, 1], ens.measure.inner(f, g))


@dataclass(frozen=True, eq=False)
class IsometryPair:
    """Coarse ``L2(mu)`` embedded in a fine Gaussian coordinate space.

    ``embedding`` extends coarse functions piecewise-constantly;
    ``coisometry`` is its adjoint for the mass-weighted inner products, i.e.
    the conditional expectation onto coarse cells.
    """

    coarse: GridMeasure
    fine: GridMeasure
    embedding: np.ndarray
    coisometry: np.ndarray

    @property
    def projection(self) -> np.ndarray:
        return self.embedding @ self.coisometry

    def invariant_errors(self) -> dict:
        I, xi = self.embedding, self.coisometry
        Q = self.projection
        W = self.fine.masses[:, None] * Q
        return {
            "xi_I_identity": float(np.abs(xi @ I - np.eye(I.shape[1])).max()),
            "Q_idempotent": float(np.abs(Q @ Q - Q).max()),
            "Q_self_adjoint": float(np.abs(W - W.T).max()),
        }

    def contraction_ratios(self, hs) -> np.ndarray:
        """``|xi h| / |h|`` for each fine function ``h``."""
        hs = np.atleast_2d(hs)
        out = []
        for h in hs:
            out.append(self.coarse.norm(self.coisometry @ h) / self.fine.norm(h))
        return np.array(out)


def build_isometry_pair(coarse_cells: int, refinement: int,
                        density: Callable | Sequence | None = None,
                        a: float = 0.0, b: float = 1.0) -> IsometryPair:
    """Isometry/co-isometry matrices between a coarse and a refined grid.

    ``density`` is a callable on fine midpoints, an array of fine-cell
    density values, or ``None`` for Lebesgue measure.
    """
    if refinement < 2:
        raise DegenerateError("refinement must be >= 2 for a nontrivial projection")
    fine_space = GroundSpace.interval(a, b, coarse_cells * refinement)
    coarse_space = GroundSpace.interval(a, b, coarse_cells)
    if density is None:
        fine = GridMeasure.lebesgue(fine_space)
    else:
        d = density(fine_space.representatives) if callable(density) else density
        fine = GridMeasure.from_density(fine_space, d)
    cm = fine.masses.reshape(coarse_cells, refinement).sum(axis=1)
    if np.any(cm <= 0):
        raise DegenerateError("coarse cell with zero mass")
    coarse = GridMeasure(coarse_space, cm)
    I = np.kron(np.eye(coarse_cells), np.ones((refinement, 1)))
    xi = (I.T * fine.masses) / cm[:, None]
    return IsometryPair(coarse, fine, I, xi)


@dataclass(frozen=True)
class QVLevel:
    level: int
    blocks: int
    mesh: float
    predicted_var: float
    mean: MCEstimate
    var: MCEstimate


@dataclass
class QVReport:
    base: MeasurableSet
    levels: list = field(default_factory=list)


def quadratic_variation(mu: GridMeasure, B: MeasurableSet, pi0: Partition,
                        levels: int, replicas: int, seed: int,
                        threads: int = 1) -> QVReport:
    """Sums of squared block values over a refinement ladder of ``pi0``.

    Level ``k`` uses ``pi0`` refined ``k`` times, ``k = 0..levels``, all on
    the same replicas.  At each level the mean of ``sum X_{A_i}^2`` is
    compared with ``mu(B)`` and the second moment of ``mu(B) - sum X^2``
    with ``2 sum mu(A_i)^2``.
    """
    if pi0.base != B:
        raise PartitionError("initial partition does not partition B")
    ladder = [pi0]
    for _ in range(levels):
        ladder.append(refine(ladder[-1]))
    mats = [p.indicator_matrix() for p in ladder]
    muB = measure_of(mu, B)
    ens = sample_fields(mu, replicas, seed, threads)

    def sums(blk):
        return np.column_stack([((blk @ S.T) ** 2).sum(axis=1) for S in mats])

    qv = ens.replica_values(sums)
    report = QVReport(B)
    for k, p in enumerate(ladder):
        a = np.array([measure_of(mu, blk) for blk in p.blocks])
        pred = 2.0 * math.fsum(a * a)
        report.levels.append(QVLevel(
            level=k, blocks=len(p), mesh=mesh(p, mu), predicted_var=pred,
            mean=mean_estimate(qv[:, k], muB),
            var=variance_estimate(muB - qv[:, k], pred, center=0.0)))
    return report


@dataclass(frozen=True)
class ItoLemmaResult:
    cells: int
    mean: MCEstimate
    variance: MCEstimate
    predicted_var: float | None = None
    max_abs: float = 0.0


def ito_lemma_residual(mu: GridMeasure, f: Callable, fp: Callable, fpp: Callable,
                       t: float, replicas: int, seed: int, threads: int = 1,
                       predicted_var: float | None = None) -> ItoLemmaResult:
    """Residual of the discrete Ito formula on ``[a, t]``.

    ``R = f(X_t) - f(0) - sum f'(X_{i-1}) dX_i - 1/2 sum f''(X_{i-1}) mu_i``
    with left-endpoint (non-anticipating) evaluation.  Only ordered interval
    grids are supported.
    """
    if not mu.space.is_interval:
        raise UnsupportedError("Ito formula needs an ordered interval grid")
    A = mu.space.interval_set(mu.space.a, t)
    idx = A.cells
    if idx.size == 0 or idx[0] != 0:
        raise InputError("t must lie at or after the first cell edge")
    m = mu.masses[idx]
    ens = sample_fields(mu, replicas, seed, threads)

    def resid(blk):
        dX = blk[:, idx]
        X = np.cumsum(dX, axis=1)
        Xprev = np.hstack([np.zeros((dX.shape[0], 1)), X[:, :-1]])
        return (f(X[:, -1]) - f(np.zeros(dX.shape[0]))
                - (fp(Xprev) * dX).sum(axis=1)
                - 0.5 * (fpp(Xprev) * m).sum(axis=1))

    R = ens.replica_values(resid)
    return ItoLemmaResult(idx.size, mean_estimate(R, 0.0),
                          variance_estimate(R, predicted_var), predicted_var,
                          float(np.abs(R).max()))


def grid_fourier_transform(mu: GridMeasure, tau) -> np.ndarray:
    """``sum_j exp(i 2 pi s_j tau) mu_j`` at each lag ``tau``."""
    s = mu.space.representatives
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    return np.exp(2j * np.pi * np.multiply.outer(tau, s)) @ mu.masses


def gaussian_characteristic_function(tau, sigma: float, mean: float = 0.0):
    tau = np.asarray(tau, dtype=float)
    return np.exp(2j * np.pi * mean * tau - 2 * np.pi ** 2 * sigma ** 2 * tau ** 2)


def _probability(mu: GridMeasure, rescale: bool) -> GridMeasure:
    tot = mu.total
    if abs(tot - 1.0) <= 1e-12:
        return mu
    if not rescale:
        raise NormalizationError(f"measure has total mass {tot}, expected 1")
    warnings.warn(f"rescaling measure of total mass {tot} to a probability", stacklevel=3)
    return GridMeasure(mu.space, mu.masses / tot)


def fourier_process_covariance(mu: GridMeasure, pairs: Sequence[tuple], replicas: int,
                               seed: int, rescale: bool = False,
                               threads: int = 1) -> list[ComplexMCEstimate]:
    """Estimates of ``E(X_{e_t} conj(X_{e_s}))`` for each ``(t, s)``.

    ``X_{e_t} = sum_j exp(i 2 pi s_j t) dX_j``; the reference is the grid
    Fourier transform of ``mu`` at ``t - s``.
    """
    if not mu.space.is_interval:
        raise UnsupportedError("Fourier covariance needs an interval grid")
    mu = _probability(mu, rescale)
    freqs = sorted({float(v) for p in pairs for v in p})
    pos = {v: k for k, v in enumerate(freqs)}
    E = np.exp(2j * np.pi * np.multiply.outer(mu.space.representatives, freqs))
    ens = sample_fields(mu, replicas, seed, threads)
    Es = E[ens.support]
    Er, Ei = np.ascontiguousarray(Es.real), np.ascontiguousarray(Es.imag)
    Xe = ens.replica_values(lambda blk: (blk @ Er) + 1j * (blk @ Ei), support_only=True)
    out = []
    for t, s in pairs:
        vals = Xe[:, pos[float(t)]] * np.conj(Xe[:, pos[float(s)]])
        ref = complex(grid_fourier_transform(mu, t - s)[0])
        out.append(complex_mean_estimate(vals, ref))
    return out


@dataclass(frozen=True)
class SchwartzCheck:
    second_moment: MCEstimate
    transform: np.ndarray


def schwartz_transform_check(mu: GridMeasure, phi, x, replicas: int, seed: int,
                             window_tol: float = 1e-10, threads: int = 1) -> SchwartzCheck:
    """``E|Y_phi|^2`` against ``integral |phi_hat|^2 dmu``.

    ``phi`` (callable or values on the uniform auxiliary grid ``x``) is
    transformed by direct quadrature at the measure's cell midpoints, and
    ``Y_phi`` is the Ito integral of that complex integrand.
    """
    x = np.asarray(x, dtype=float)
    vals = phi(x) if callable(phi) else np.asarray(phi, dtype=float)
    dx = x[1] - x[0]
    if not np.allclose(np.diff(x), dx, rtol=1e-9):
        raise InputError("auxiliary grid must be uniform")
    peak = np.abs(vals).max()
    if peak > 0 and max(abs(vals[0]), abs(vals[-1])) > window_tol * peak:
        raise WindowError("test function has not decayed at the window ends")
    s = mu.space.representatives
    phat = np.exp(-2j * np.pi * np.multiply.outer(s, x)) @ vals * dx
    ref = float(np.dot(np.abs(phat) ** 2, mu.masses))
    ens = sample_fields(mu, replicas, seed, threads)
    Y = ens.replica_values(lambda blk: blk @ phat)
    return SchwartzCheck(mean_estimate(np.abs(Y) ** 2, ref), phat)
