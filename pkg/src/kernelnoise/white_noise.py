"""Exact white noise on a grid measure, Karhunen-Loeve sampling, and the
characteristic functional.

One replica of the set-indexed process is the vector of independent cell
increments ``dX_i ~ N(0, mu_i)``; ``X_A`` is the sum over the cells of ``A``.

Randomness is keyed: replicas are generated in fixed-size blocks and block
``b`` of stream ``s`` draws from ``Philox(SeedSequence(seed, spawn_key=(*s, b)))``.
A replica's values therefore depend only on ``(seed, stream, replica)``, not
on thread count or the order in which blocks are produced.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import InputError, InsufficientDataError
from .measure_space import GridMeasure, MeasurableSet, intersect, measure_of
from .stats import ComplexMCEstimate, MCEstimate, complex_mean_estimate, mean_estimate

__all__ = [
    "BLOCK",
    "keyed_rng",
    "WhiteNoiseField",
    "FieldEnsemble",
    "OrthonormalBasis",
    "sample_fields",
    "evaluate_set",
    "mc_covariance",
    "haar_basis",
    "indicator_basis",
    "kl_weights",
    "kl_sample",
    "kl_mc_covariance",
    "characteristic_functional",
]

BLOCK = 2048


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the given integer key path."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _blocked(n: int):
    for start in range(0, n, BLOCK):
        yield start // BLOCK, start, min(start + BLOCK, n)


def map_blocks(n: int, fn: Callable[[int, int, int], object], threads: int = 1) -> list:
    """Apply ``fn(block, start, stop)`` over replica blocks, results in block order."""
    jobs = list(_blocked(n))
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        out = []
        for lo in range(0, len(jobs), threads):
            out.extend(pool.map(lambda j: fn(*j), jobs[lo:lo + threads]))
        return out


@dataclass(frozen=True, eq=False)
class WhiteNoiseField:
    measure: GridMeasure
    increments: np.ndarray
    replica: int = 0

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float).ravel()
        if inc.size != self.measure.space.cell_count:
            raise ValueError("one increment per cell required")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)


class FieldEnsemble:
    """Independent white-noise replicas, generated lazily block by block.

    Materializing every replica is avoided on purpose: ``2e5 x 4096`` cells
    would not fit in memory.  Iterate, index, or use :meth:`replica_values`.
    """

    def __init__(self, measure: GridMeasure, n: int, master_seed: int,
                 stream: Sequence[int] = (), threads: int = 1):
        if n < 1:
            raise ValueError("ensemble needs at least one replica")
        self.measure = measure
        self.n = int(n)
        self.master_seed = int(master_seed)
        self.stream = tuple(stream)
        self.threads = int(threads)
        self._support = measure.support
        self._scale = np.sqrt(measure.masses[self._support])

    def __len__(self):
        return self.n

    @property
    def support(self) -> np.ndarray:
        """Cells of positive mass; all other increments are identically 0."""
        return self._support

    def support_block(self, b: int) -> np.ndarray:
        """Increments of block ``b`` restricted to the support cells."""
        lo = b * BLOCK
        hi = min(lo + BLOCK, self.n)
        rng = keyed_rng(self.master_seed, *self.stream, b)
        z = rng.standard_normal((hi - lo, self._support.size))
        z *= self._scale
        return z

    def block(self, b: int, start: int | None = None, stop: int | None = None) -> np.ndarray:
        """Increments of replicas ``start..stop-1`` of block ``b``, all cells."""
        z = self.support_block(b)
        if z.shape[1] == self.measure.space.cell_count:
            out = z
        else:
            out = np.zeros((z.shape[0], self.measure.space.cell_count))
            out[:, self._support] = z
        if start is not None:
            lo = b * BLOCK
            out = out[start - lo:stop - lo]
        return out

    def replica_values(self, fn: Callable[[np.ndarray], np.ndarray],
                       support_only: bool = False) -> np.ndarray:
        """Concatenate ``fn(increments_block)`` over all replicas, in order.

        With ``support_only`` the blocks carry only the support columns.
        """
        get = self.support_block if support_only else self.block
        parts = map_blocks(self.n, lambda b, s, e: fn(get(b)), self.threads)
        return np.concatenate(parts, axis=0)

    def __getitem__(self, r: int) -> WhiteNoiseField:
        if not 0 <= r < self.n:
            raise IndexError(r)
        b = r // BLOCK
        return WhiteNoiseField(self.measure, self.block(b, r, r + 1)[0], r)

    def __iter__(self) -> Iterator[WhiteNoiseField]:
        for b, s, e in _blocked(self.n):
            blk = self.block(b)
            for k in range(e - s):
                yield WhiteNoiseField(self.measure, blk[k], s + k)


def sample_fields(mu: GridMeasure, n: int, seed: int, threads: int = 1) -> FieldEnsemble:
    return FieldEnsemble(mu, n, seed, threads=threads)


def evaluate_set(field: WhiteNoiseField, A: MeasurableSet) -> float:
    return math.fsum(field.increments[A.cells])


def set_values(block: np.ndarray, sets: Sequence[MeasurableSet]) -> np.ndarray:
    """``X_A`` for every replica row and every set column."""
    out = np.empty((block.shape[0], len(sets)))
    for k, A in enumerate(sets):
        out[:, k] = block[:, A.cells].sum(axis=1)
    return out


def mc_covariance(ens: FieldEnsemble, A: MeasurableSet, B: MeasurableSet) -> MCEstimate:
    """Sample mean of ``X_A X_B``; the reference is ``mu(A & B)``."""
    if len(ens) < 2:
        raise InsufficientDataError("mc_covariance needs at least 2 replicas")
    prod = ens.replica_values(lambda blk: np.prod(set_values(blk, [A, B]), axis=1))
    return mean_estimate(prod, measure_of(ens.measure, intersect(A, B)))


def mc_covariances(ens: FieldEnsemble, pairs: Sequence[tuple]) -> list[MCEstimate]:
    """Several set pairs from a single pass over the ensemble."""
    sets = []
    for A, B in pairs:
        sets.extend([A, B])
    vals = ens.replica_values(lambda blk: set_values(blk, sets))
    out = []
    for k, (A, B) in enumerate(pairs):
        ref = measure_of(ens.measure, intersect(A, B))
        out.append(mean_estimate(vals[:, 2 * k] * vals[:, 2 * k + 1], ref))
    return out


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Rows of ``functions`` are grid functions orthonormal in ``L2(mu)``."""

    measure: GridMeasure
    functions: np.ndarray

    def __post_init__(self):
        F = np.array(self.functions, dtype=float)
        if F.ndim != 2 or F.shape[1] != self.measure.space.cell_count:
            raise ValueError("functions must have shape (count, cells)")
        F.setflags(write=False)
        object.__setattr__(self, "functions", F)

    def __len__(self):
        return self.functions.shape[0]

    @property
    def complete(self) -> bool:
        return len(self) == self.measure.support.size

    def gram(self) -> np.ndarray:
        F = self.functions
        return (F * self.measure.masses) @ F.T

    def orthonormality_error(self) -> float:
        return float(np.abs(self.gram() - np.eye(len(self))).max())


def indicator_basis(mu: GridMeasure) -> OrthonormalBasis:
    """``1_{cell_n} / sqrt(mu_n)`` over the cells of positive mass."""
    sup = mu.support
    F = np.zeros((sup.size, mu.space.cell_count))
    F[np.arange(sup.size), sup] = 1.0 / np.sqrt(mu.masses[sup])
    return OrthonormalBasis(mu, F)


def haar_basis(mu: GridMeasure) -> OrthonormalBasis:
    """Measure-weighted Haar system on a dyadic grid.

    The first function is the normalized constant.  On each dyadic interval
    with halves ``L`` and ``R`` the wavelet is ``a 1_L - b 1_R`` with
    ``a mu(L) = b mu(R)`` and unit ``L2(mu)`` norm; for Lebesgue measure this
    is the usual Haar basis.
    """
    n = mu.space.cell_count
    if n & (n - 1):
        raise InputError("Haar basis needs a power-of-two cell count")
    m = mu.masses
    if np.any(m <= 0):
        raise InputError("Haar basis needs strictly positive cell masses")
    rows = [np.full(n, 1.0 / math.sqrt(mu.total))]
    width = n
    while width >= 2:
        half = width // 2
        for lo in range(0, n, width):
            mL = math.fsum(m[lo:lo + half])
            mR = math.fsum(m[lo + half:lo + width])
            tot = mL + mR
            f = np.zeros(n)
            f[lo:lo + half] = math.sqrt(mR / (mL * tot))
            f[lo + half:lo + width] = -math.sqrt(mL / (mR * tot))
            rows.append(f)
        width = half
    return OrthonormalBasis(mu, np.array(rows))


def kl_weights(onb: OrthonormalBasis, A: MeasurableSet) -> np.ndarray:
    """``w_n(A) = integral over A of f_n dmu`` for every basis function."""
    if A.space != onb.measure.space:
        raise InputError("set and basis live on different spaces")
    return onb.functions[:, A.cells] @ onb.measure.masses[A.cells]


def kl_sample(onb: OrthonormalBasis, z, A: MeasurableSet) -> float:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != len(onb):
        raise InputError(f"need {len(onb)} normals, got {z.shape[-1]}")
    return z @ kl_weights(onb, A)


def kl_mc_covariance(onb: OrthonormalBasis, A: MeasurableSet, B: MeasurableSet,
                     replicas: int, seed: int) -> MCEstimate:
    """Monte Carlo ``E(X_A X_B)`` from KL samples with i.i.d. coefficients."""
    wa = kl_weights(onb, A)
    wb = kl_weights(onb, B)

    def one(b, s, e):
        z = keyed_rng(seed, 7, b).standard_normal((e - s, len(onb)))
        return (z @ wa) * (z @ wb)

    vals = np.concatenate(map_blocks(replicas, one))
    return mean_estimate(vals, measure_of(onb.measure, intersect(A, B)))


def characteristic_functional(ens: FieldEnsemble, f) -> ComplexMCEstimate:
    """Mean of ``exp(i X_f)`` against the Gaussian reference ``exp(-|f|^2 / 2)``."""
    f = np.asarray(f, dtype=float)
    ref = math.exp(-0.5 * ens.measure.inner(f, f))
    vals = ens.replica_values(lambda blk: np.exp(1j * (blk @ f)))
    return complex_mean_estimate(vals, complex(ref))
