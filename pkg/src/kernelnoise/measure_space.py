"""Finite-cell measure spaces, measurable sets and partitions.

A ground space is either a uniform subdivision of a half-open interval
``[a, b)`` or an abstract finite set of labelled states.  A measure assigns a
nonnegative mass to every cell; measurable sets are sorted arrays of cell
indices.  Every object here is immutable once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import (
    DegeneratePartitionError,
    InvalidSetError,
    PartitionError,
    SpaceMismatchError,
)

__all__ = [
    "GroundSpace",
    "GridMeasure",
    "MeasurableSet",
    "Partition",
    "measure_of",
    "intersect",
    "union",
    "refine",
    "mesh",
    "dyadic_ladder",
]


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroundSpace:
    """Discretized ground set.

    Use :meth:`interval` or :meth:`finite` rather than the raw constructor.
    """

    kind: str
    cell_count: int
    a: float = 0.0
    b: float = 1.0
    labels: tuple = ()

    def __post_init__(self):
        if self.cell_count < 1:
            raise ValueError("cell_count must be >= 1")
        if self.kind == "interval":
            if not self.a < self.b:
                raise ValueError("interval needs a < b")
        elif self.kind == "finite":
            if len(self.labels) != self.cell_count:
                raise ValueError("finite space needs one label per cell")
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @classmethod
    def interval(cls, a: float, b: float, cells: int) -> "GroundSpace":
        return cls("interval", int(cells), float(a), float(b))

    @classmethod
    def finite(cls, labels) -> "GroundSpace":
        if isinstance(labels, int):
            labels = range(labels)
        labels = tuple(labels)
        return cls("finite", len(labels), labels=labels)

    @property
    def is_interval(self) -> bool:
        return self.kind == "interval"

    @property
    def width(self) -> float:
        """Cell width of an interval space."""
        self._need_interval()
        return (self.b - self.a) / self.cell_count

    @property
    def edges(self) -> np.ndarray:
        self._need_interval()
        return self.a + self.width * np.arange(self.cell_count + 1)

    @property
    def representatives(self) -> np.ndarray:
        """Cell midpoints for intervals, integer positions for finite sets."""
        if self.is_interval:
            return self.a + self.width * (np.arange(self.cell_count) + 0.5)
        return np.arange(self.cell_count, dtype=float)

    def _need_interval(self):
        if not self.is_interval:
            raise TypeError("operation needs an interval ground space")

    # set builders

    def full(self) -> "MeasurableSet":
        return MeasurableSet(self, np.arange(self.cell_count))

    def empty(self) -> "MeasurableSet":
        return MeasurableSet(self, np.arange(0))

    def cells(self, indices: Iterable[int]) -> "MeasurableSet":
        return MeasurableSet(self, np.unique(np.asarray(list(indices), dtype=np.int64)))

    def range_set(self, start: int, stop: int) -> "MeasurableSet":
        """Cells ``start, ..., stop - 1``."""
        if not 0 <= start <= stop <= self.cell_count:
            raise InvalidSetError(f"range [{start}, {stop}) outside [0, {self.cell_count})")
        return MeasurableSet(self, np.arange(start, stop))

    def interval_set(self, lo: float, hi: float) -> "MeasurableSet":
        """All cells contained in ``[lo, hi]`` (grid-aligned endpoints are exact)."""
        edges = self.edges
        slack = 1e-9 * self.width
        keep = (edges[:-1] >= lo - slack) & (edges[1:] <= hi + slack)
        return MeasurableSet(self, np.flatnonzero(keep))


@dataclass(frozen=True, eq=False)
class MeasurableSet:
    space: GroundSpace
    cells: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.cells, dtype=np.int64).ravel()
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.space.cell_count:
                raise InvalidSetError(
                    f"cell index out of range [0, {self.space.cell_count})")
            if np.any(np.diff(idx) <= 0):
                raise InvalidSetError("cell indices must be strictly increasing")
        object.__setattr__(self, "cells", _frozen(idx))

    def __len__(self):
        return int(self.cells.size)

    def __eq__(self, other):
        return (isinstance(other, MeasurableSet) and self.space == other.space
                and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.space, self.cells.tobytes()))

    def __repr__(self):
        if len(self) > 6:
            body = f"{self.cells[0]}..{self.cells[-1]}, n={len(self)}"
        else:
            body = ", ".join(map(str, self.cells))
        return f"MeasurableSet([{body}])"

    def indicator(self) -> np.ndarray:
        out = np.zeros(self.space.cell_count)
        out[self.cells] = 1.0
        return out

    def issubset(self, other: "MeasurableSet") -> bool:
        _check_same(self, other)
        return bool(np.isin(self.cells, other.cells).all())


def _check_same(A: MeasurableSet, B: MeasurableSet):
    if A.space != B.space:
        raise SpaceMismatchError("sets live on different ground spaces")


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Nonnegative finite cell masses over a :class:`GroundSpace`."""

    space: GroundSpace
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).ravel()
        if m.size != self.space.cell_count:
            raise ValueError(f"expected {self.space.cell_count} masses, got {m.size}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("masses must be finite and nonnegative")
        object.__setattr__(self, "masses", _frozen(m))

    @classmethod
    def lebesgue(cls, space: GroundSpace) -> "GridMeasure":
        return cls(space, np.full(space.cell_count, space.width))

    @classmethod
    def counting(cls, space: GroundSpace) -> "GridMeasure":
        return cls(space, np.ones(space.cell_count))

    @classmethod
    def from_density(cls, space: GroundSpace, density_values) -> "GridMeasure":
        """Cell mass = density value at the cell times the cell width."""
        d = np.asarray(density_values, dtype=float)
        return cls(space, d * space.width)

    @classmethod
    def gaussian(cls, space: GroundSpace, mean: float = 0.0, sigma: float = 1.0,
                 truncate: float | None = 5.5) -> "GridMeasure":
        """Normal law sampled by the midpoint rule and renormalized to mass 1.

        Cells whose midpoint lies more than ``truncate`` standard deviations
        from the mean get zero mass.
        """
        s = space.representatives
        z = (s - mean) / sigma
        dens = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2 * math.pi))
        if truncate is not None:
            dens[np.abs(z) > truncate] = 0.0
        m = dens * space.width
        return cls(space, m / math.fsum(m))

    @classmethod
    def gaussian_cdf(cls, space: GroundSpace, mean: float = 0.0, sigma: float = 1.0):
        """Exact cell probabilities of a normal law, renormalized to the window."""
        e = (space.edges - mean) / sigma
        m = np.diff(ndtr(e))
        return cls(space, m / math.fsum(m))

    @property
    def total(self) -> float:
        return math.fsum(self.masses)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.masses > 0)

    def integrate(self, f) -> float:
        """Integral of a grid function (cell values) against the measure."""
        return float(np.dot(np.asarray(f, dtype=float), self.masses))

    def inner(self, f, g) -> float:
        return float(np.dot(np.asarray(f) * self.masses, np.asarray(g)))

    def norm(self, f) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))


def measure_of(mu: GridMeasure, A: MeasurableSet) -> float:
    """Mass of a cell set; compensated summation in ascending cell order."""
    if A.space != mu.space:
        raise SpaceMismatchError("set and measure live on different ground spaces")
    return math.fsum(mu.masses[A.cells])


def intersect(A: MeasurableSet, B: MeasurableSet) -> MeasurableSet:
    _check_same(A, B)
    return MeasurableSet(A.space, np.intersect1d(A.cells, B.cells, assume_unique=True))


def union(A: MeasurableSet, B: MeasurableSet) -> MeasurableSet:
    _check_same(A, B)
    return MeasurableSet(A.space, np.union1d(A.cells, B.cells))


@dataclass(frozen=True, eq=False)
class Partition:
    base: MeasurableSet
    blocks: tuple = field(default_factory=tuple)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            return
        for blk in blocks:
            _check_same(blk, self.base)
        allcells = np.concatenate([blk.cells for blk in blocks])
        if np.unique(allcells).size != allcells.size:
            raise PartitionError("partition blocks overlap")
        if not np.array_equal(np.sort(allcells), self.base.cells):
            raise PartitionError("union of blocks differs from the base set")

    @classmethod
    def single(cls, base: MeasurableSet) -> "Partition":
        return cls(base, (base,))

    @classmethod
    def uniform(cls, base: MeasurableSet, n_blocks: int) -> "Partition":
        """Split ``base`` into ``n_blocks`` runs of (near-)equal cell count."""
        parts = np.array_split(base.cells, n_blocks)
        return cls(base, tuple(MeasurableSet(base.space, p) for p in parts))

    def __len__(self):
        return len(self.blocks)

    def indicator_matrix(self) -> np.ndarray:
        """Rows are block indicators, shape ``(blocks, cells)``."""
        M = np.zeros((len(self.blocks), self.base.space.cell_count))
        for k, blk in enumerate(self.blocks):
            M[k, blk.cells] = 1.0
        return M


def refine(pi: Partition) -> Partition:
    """Halve every block with at least two cells; atoms stay put."""
    out = []
    for blk in pi.blocks:
        if len(blk) == 0:
            raise PartitionError("cannot refine an empty block")
        if len(blk) == 1:
            out.append(blk)
            continue
        half = (len(blk) + 1) // 2
        out.append(MeasurableSet(blk.space, blk.cells[:half]))
        out.append(MeasurableSet(blk.space, blk.cells[half:]))
    return Partition(pi.base, tuple(out))


def mesh(pi: Partition, mu: GridMeasure) -> float:
    if not pi.blocks:
        raise DegeneratePartitionError("mesh of an empty partition")
    return max(measure_of(mu, blk) for blk in pi.blocks)


def dyadic_ladder(base: MeasurableSet, levels: int | None = None) -> list[Partition]:
    """Refinement ladder starting from the one-block partition of ``base``.

    With ``levels=None`` the ladder continues until every block is a single
    cell.
    """
    pi = Partition.single(base)
    ladder = [pi]
    while levels is None or len(ladder) <= levels:
        nxt = refine(pi)
        if levels is None and len(nxt) == len(pi):
            break
        ladder.append(nxt)
        pi = nxt
    return ladder


def sets_from_spec(space: GroundSpace, specs: Sequence) -> list[MeasurableSet]:
    """Build sets from config entries.

    Each entry is ``{"cells": [...]}``, ``{"range": [start, stop]}`` (cell
    indices, stop exclusive), ``{"interval": [lo, hi]}`` (coordinates) or
    ``"all"``.
    """
    out = []
    for s in specs:
        if s == "all":
            out.append(space.full())
        elif "cells" in s:
            out.append(space.cells(s["cells"]))
        elif "range" in s:
            out.append(space.range_set(*s["range"]))
        elif "interval" in s:
            out.append(space.interval_set(*s["interval"]))
        else:
            raise InvalidSetError(f"cannot parse set spec {s!r}")
    return out
