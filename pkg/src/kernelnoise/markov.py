"""Row-stochastic transition kernels on finite grids and their Gaussian
interpolation by nested Ito integrals.

For a state ``x`` the interpolating process is

    W_A = sum_i X_A^(y_i) dX^(x)_i

where ``X^(y)`` is white noise with cell variances ``P(y, .)`` and the
driving field ``X^(x)`` has variances ``P(x, .)``; all fields are mutually
independent.  Then ``E(W_A W_B) = P_2(x, A & B)``, and nesting the
construction ``n - 1`` times reproduces ``P_n``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import kurtosis

from .errors import InsufficientDataError, InputError
from .measure_space import GroundSpace, MeasurableSet, intersect
from .stats import MCEstimate, mean_estimate
from .white_noise import BLOCK, keyed_rng

__all__ = [
    "TransitionKernel",
    "apply",
    "apply_dual",
    "iterate",
    "two_step_sum",
    "InterpolationResult",
    "interpolate",
    "interpolate_n",
]


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    space: GroundSpace
    rows: np.ndarray

    def __post_init__(self):
        P = np.array(self.rows, dtype=float)
        n = self.space.cell_count
        if P.shape != (n, n):
            raise ValueError(f"transition matrix must be {n}x{n}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise ValueError("transition probabilities must be finite and >= 0")
        err = np.abs(P.sum(axis=1) - 1.0).max()
        if err > 1e-12:
            raise ValueError(f"rows must sum to 1 (max deviation {err:.2e})")
        P.setflags(write=False)
        object.__setattr__(self, "rows", P)

    @classmethod
    def from_matrix(cls, P) -> "TransitionKernel":
        P = np.asarray(P, dtype=float)
        return cls(GroundSpace.finite(P.shape[0]), P)

    @classmethod
    def random(cls, states: int, rng: np.random.Generator, concentration: float = 1.0):
        """Rows drawn from a symmetric Dirichlet law."""
        P = rng.dirichlet(np.full(states, concentration), size=states)
        P /= P.sum(axis=1, keepdims=True)
        return cls.from_matrix(P)

    @classmethod
    def from_csv(cls, path) -> "TransitionKernel":
        with open(Path(path), newline="") as fh:
            rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
        P = np.array(rows)
        sums = P.sum(axis=1, keepdims=True)
        # absorb rounding from text serialization, reject anything worse
        if np.all(np.abs(sums - 1.0) <= 1e-9):
            P = P / sums
        return cls.from_matrix(P)

    @property
    def states(self) -> int:
        return self.space.cell_count

    def prob(self, x: int, A: MeasurableSet) -> float:
        """``P(x, A)``."""
        return math.fsum(self.rows[x, A.cells])


def apply(P: TransitionKernel, f) -> np.ndarray:
    """``(Pf)(x_j) = sum_i f(s_i) P[j, i]``."""
    return P.rows @ np.asarray(f, dtype=float)


def apply_dual(P: TransitionKernel, nu) -> np.ndarray:
    """Action on a signed measure given as cell masses."""
    return P.rows.T @ np.asarray(nu, dtype=float)


def iterate(P: TransitionKernel, n: int) -> TransitionKernel:
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        warnings.warn("iterate(P, 0) is the identity kernel", stacklevel=2)
    return TransitionKernel(P.space, np.linalg.matrix_power(P.rows, n))


def two_step_sum(P: TransitionKernel, x: int, A: MeasurableSet, B: MeasurableSet) -> float:
    """``sum_i P(y_i, A & B) P(x, cell_i)``, the discrete-model value of
    ``E(W_A W_B)`` before any sampling."""
    C = intersect(A, B)
    return math.fsum(P.prob(y, C) * P.rows[x, y] for y in range(P.states))


@dataclass(frozen=True)
class InterpolationResult:
    n: int
    covariance: MCEstimate
    mean_A: MCEstimate
    exact: float
    kurtosis: float


def _chunk(states: int) -> int:
    # keep one layer of per-replica fields around 32 MB
    return max(1, min(BLOCK, (1 << 22) // (states * states)))


def interpolate_n(P: TransitionKernel, x: int, n: int, A: MeasurableSet,
                  B: MeasurableSet, replicas: int, seed: int) -> InterpolationResult:
    """Monte Carlo ``E(W_A W_B)`` of the ``(n-1)``-fold nested Ito integral.

    Only the cells of ``A | B`` of the innermost fields are drawn: cells
    outside do not enter ``W_A`` or ``W_B``.
    """
    if n < 2:
        raise InputError("interpolate_n needs n >= 2")
    if replicas < 2:
        raise InsufficientDataError("need at least 2 replicas")
    S = P.states
    if not 0 <= x < S:
        raise IndexError(f"state {x} out of range [0, {S})")
    if A.space != P.space or B.space != P.space:
        raise InputError("sets must live on the kernel's state space")
    AB = np.union1d(A.cells, B.cells)
    inA = np.isin(AB, A.cells)
    inB = np.isin(AB, B.cells)
    sq = np.sqrt(P.rows)
    sq_inner = sq[:, AB]
    chunk = _chunk(S)

    WA, WB = [], []
    for c, start in enumerate(range(0, replicas, chunk)):
        R = min(chunk, replicas - start)
        z0 = keyed_rng(seed, 11, 0, c).standard_normal((R, S, AB.size)) * sq_inner
        xa = z0[:, :, inA].sum(axis=2)
        xb = z0[:, :, inB].sum(axis=2)
        for layer in range(1, n - 1):
            D = keyed_rng(seed, 11, layer, c).standard_normal((R, S, S)) * sq
            xa = np.einsum("rz,ryz->ry", xa, D)
            xb = np.einsum("rz,ryz->ry", xb, D)
        top = keyed_rng(seed, 11, n - 1, c).standard_normal((R, S)) * sq[x]
        WA.append((xa * top).sum(axis=1))
        WB.append((xb * top).sum(axis=1))
    wa = np.concatenate(WA)
    wb = np.concatenate(WB)
    exact = iterate(P, n).prob(x, intersect(A, B))
    sd = wa.std()
    kurt = float(kurtosis(wa, fisher=False)) if sd > 0 else float("nan")
    return InterpolationResult(n, mean_estimate(wa * wb, exact),
                               mean_estimate(wa, 0.0), exact, kurt)


def interpolate(P: TransitionKernel, x: int, n_fold: int, A: MeasurableSet,
                B: MeasurableSet, replicas: int, seed: int) -> InterpolationResult:
    """``n_fold`` nested Ito integrals; covariance target ``P_{n_fold+1}``."""
    if n_fold < 1:
        raise InputError("n_fold must be >= 1")
    return interpolate_n(P, x, n_fold + 1, A, B, replicas, seed)
