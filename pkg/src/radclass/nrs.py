"""Neighborhood rough sets: neighborhoods, positive region, dependency,
significance, greedy minimal reduct and the radius sweep.

Distances are Euclidean over the chosen attribute subset. A sample lies in
the lower approximation of its own class exactly when no sample of another
class falls inside its radius-delta neighborhood, i.e. when its nearest
"enemy" distance exceeds delta. That distance does not depend on delta, so it
is cached per attribute subset and reused across a radius sweep.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AttributeAlreadyPresent, EmptyAttributeSet

_CHUNK_ELEMS = 2_000_000


def _subset(b: Iterable[int], n: int) -> tuple[int, ...]:
    b = tuple(sorted(set(int(a) for a in b)))
    if not b:
        raise EmptyAttributeSet("attribute subset is empty")
    if b[0] < 0 or b[-1] >= n:
        raise IndexError(f"attribute indices {b} out of range for {n} attributes")
    return b


@dataclass
class NeighborhoodDecisionSystem:
    """Condition attributes ``universe`` (m x n), decisions (m,), radius ``delta``."""

    universe: np.ndarray
    decisions: np.ndarray
    delta: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.universe = np.asarray(self.universe, dtype=np.float64)
        if self.universe.ndim == 1:
            self.universe = self.universe[:, None]
        self.decisions = np.asarray(self.decisions)
        if len(self.decisions) != len(self.universe):
            raise ValueError(
                f"{len(self.decisions)} decisions for {len(self.universe)} objects"
            )
        if not np.all(np.isfinite(self.universe)):
            raise ValueError("attribute values must be finite")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")

    @property
    def m(self) -> int:
        return self.universe.shape[0]

    @property
    def n(self) -> int:
        return self.universe.shape[1]

    def with_delta(self, delta: float) -> "NeighborhoodDecisionSystem":
        """Same universe at another radius; shares the distance cache."""
        return NeighborhoodDecisionSystem(self.universe, self.decisions, delta, self._cache)

    def distances_from(self, rows: np.ndarray, b: tuple[int, ...]) -> np.ndarray:
        # accumulate attribute by attribute in index order (fixed rounding)
        d2 = np.zeros((len(rows), self.m))
        for a in b:
            col = self.universe[:, a]
            diff = col[rows, None] - col[None, :]
            d2 += diff * diff
        return np.sqrt(d2)

    def nearest_enemy(self, b) -> np.ndarray:
        """Distance from each object to the closest object of a different class."""
        b = _subset(b, self.n)
        hit = self._cache.get(b)
        if hit is not None:
            return hit
        m = self.m
        out = np.empty(m)
        step = max(1, _CHUNK_ELEMS // max(m, 1))
        y = self.decisions
        for start in range(0, m, step):
            rows = np.arange(start, min(start + step, m))
            d = self.distances_from(rows, b)
            d[y[rows, None] == y[None, :]] = np.inf
            out[rows] = d.min(axis=1)
        self._cache[b] = out
        return out


def neighborhood(nds: NeighborhoodDecisionSystem, i: int, b) -> np.ndarray:
    """Indices j with distance(z_i, z_j) <= delta on attributes ``b`` (includes i)."""
    b = _subset(b, nds.n)
    d = nds.distances_from(np.array([i]), b)[0]
    return np.flatnonzero(d <= nds.delta)


def positive_region(nds: NeighborhoodDecisionSystem, b) -> np.ndarray:
    """Boolean mask of objects whose whole neighborhood shares their decision."""
    return nds.nearest_enemy(b) > nds.delta


def lower_approximation(nds: NeighborhoodDecisionSystem, b) -> np.ndarray:
    """Union over decision classes of their lower approximations, as sorted indices."""
    return np.flatnonzero(positive_region(nds, b))


def dependency(nds: NeighborhoodDecisionSystem, b) -> float:
    """Fraction of the universe in the positive region; the empty set has dependency 0."""
    b = tuple(b)
    if not b:
        return 0.0
    return int(np.count_nonzero(positive_region(nds, b))) / nds.m


def significance(nds: NeighborhoodDecisionSystem, a: int, b) -> float:
    """Dependency gained by adding attribute ``a`` to ``b``."""
    b = tuple(b)
    if a in b:
        raise AttributeAlreadyPresent(f"attribute {a} is already in {sorted(b)}")
    return dependency(nds, b + (a,)) - dependency(nds, b)


@dataclass
class ReductReport:
    delta: float
    selected: list[int]
    gamma_trace: list[float]
    gamma_full: float
    pruned: list[int] = field(default_factory=list)
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "selected": self.selected,
            "gamma_trace": self.gamma_trace,
            "gamma_full": self.gamma_full,
            "pruned": self.pruned,
            "degenerate": self.degenerate,
        }


def reduce(nds: NeighborhoodDecisionSystem) -> ReductReport:
    """Greedy forward selection by significance, then a backward pruning pass.

    Forward: add the attribute with the largest dependency gain (lowest index
    on ties) until the full-set dependency is reached; a zero-gain step is
    still taken when the full set has not been matched, since pairs of
    attributes can be jointly informative. Backward: scanning in reverse
    insertion order, drop any attribute whose removal keeps the dependency.
    The result satisfies gamma_B = gamma_C and every single removal lowers
    gamma. A system with gamma_C = 0 yields an empty, ``degenerate`` report.
    """
    n = nds.n
    gamma_full = dependency(nds, range(n))
    if gamma_full == 0:
        return ReductReport(nds.delta, [], [], 0.0, degenerate=True)

    selected: list[int] = []
    trace: list[float] = []
    gamma = 0.0
    while gamma < gamma_full:
        best_a, best_g = -1, -1.0
        for a in range(n):
            if a in selected:
                continue
            g = dependency(nds, selected + [a])
            if g > best_g:
                best_a, best_g = a, g
        selected.append(best_a)
        gamma = best_g
        trace.append(gamma)

    pruned = []
    for a in reversed(list(selected)):
        rest = [x for x in selected if x != a]
        if rest and dependency(nds, rest) == gamma:
            selected = rest
            pruned.append(a)
    return ReductReport(nds.delta, selected, trace, gamma_full, pruned)


@dataclass
class SweepResult:
    delta_grid: list[float]
    significance_matrix: np.ndarray  # (len(delta_grid), n): gamma of each single attribute
    reducts: list[ReductReport]
    stable_reduct: list[int]


DEFAULT_DELTA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 11))


def stable_attributes(reducts: Sequence[ReductReport]) -> list[int]:
    """Attributes selected at a strict majority of radii."""
    counts: dict[int, int] = {}
    for r in reducts:
        for a in r.selected:
            counts[a] = counts.get(a, 0) + 1
    return sorted(a for a, c in counts.items() if 2 * c > len(reducts))


def importance_sweep(universe, decisions, delta_grid: Sequence[float] = DEFAULT_DELTA_GRID) -> SweepResult:
    """Single-attribute significance SIG(a, {}, D) and a reduct for each radius."""
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise ValueError("delta_grid is empty")
    if any(d < 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"delta_grid must be non-negative and strictly increasing: {grid}")
    base = NeighborhoodDecisionSystem(universe, decisions, grid[0])
    matrix = np.empty((len(grid), base.n))
    reducts = []
    for r, delta in enumerate(grid):
        nds = base.with_delta(delta)
        for a in range(base.n):
            matrix[r, a] = significance(nds, a, ())
        reducts.append(reduce(nds))
    return SweepResult(grid, matrix, reducts, stable_attributes(reducts))
