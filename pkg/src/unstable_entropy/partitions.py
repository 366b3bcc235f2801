"""Finite partitions, unstable leaf pieces and itinerary refinements.

The torus is cut by a uniform grid (:class:`GridPartition`). A leaf piece
(:class:`SegmentCell`) is the connected component of the local unstable leaf
through a point inside that point's grid cell. Refining a leaf piece by the
dynamical partition ``xi v f^-1 xi v ... v f^-(n-1) xi`` only needs the grid
crossings of the forward images of the segment, which are straight lines in
leaf coordinates; :func:`leaf_itinerary` enumerates them with integer
bookkeeping so names never depend on where a sample point happens to land.

For shifts the analogues are cylinder sets: the leaf piece through ``x``
fixes the past ``x_i, i <= 0`` and the refinement fixes the next ``n - 1``
future symbols.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from ._validation import check_positive_int
from .errors import (
    BudgetExceeded,
    DiameterExceeded,
    EpsilonOutOfRange,
    LengthMismatch,
    ThetaTooLarge,
    UnsupportedSpectrum,
)
from .systems import LinearToralModel, ShiftModel, Word, apply

DEFAULT_BUDGET = 10**8
SNAP = 1e-12


@dataclass(frozen=True)
class GridPartition:
    """``k**d`` congruent boxes ``prod [c_a/k, (c_a+1)/k)`` of the unit torus."""

    k: int
    epsilon0: float
    dimension: int = 2

    @property
    def diameter(self) -> float:
        return math.sqrt(self.dimension) / self.k

    @property
    def cardinality(self) -> int:
        return self.k ** self.dimension

    def multi_index(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.minimum(np.floor(pts * self.k).astype(np.int64), self.k - 1) % self.k

    def cell_index(self, points):
        """Flat (row-major) cell index of each point."""
        idx = self.multi_index(points)
        weights = self.k ** np.arange(self.dimension - 1, -1, -1, dtype=np.int64)
        return idx @ weights


@dataclass(frozen=True)
class CylinderPartition:
    """Partition of a shift space by the symbols ``x_0 .. x_{length-1}``."""

    alphabet_size: int
    length: int = 1

    @property
    def cardinality(self) -> int:
        return self.alphabet_size ** self.length

    @property
    def diameter(self) -> float:
        # two points of one cylinder may already differ at coordinate -1
        return 0.5

    def encode(self, block) -> int:
        code = 0
        for s in block:
            code = code * self.alphabet_size + int(s)
        return code


Partition = Union[GridPartition, CylinderPartition]


def build_grid(k: int, epsilon0: float, dimension: int = 2) -> GridPartition:
    """Grid partition whose cells all have diameter at most ``epsilon0``."""
    check_positive_int(k, "k", minimum=2)
    check_positive_int(dimension, "dimension", minimum=1)
    grid = GridPartition(int(k), float(epsilon0), int(dimension))
    if grid.diameter > epsilon0:
        raise DiameterExceeded(
            f"cell diameter sqrt({dimension})/{k} = {grid.diameter:.6g} exceeds epsilon0 = {epsilon0}")
    return grid


@dataclass(frozen=True, eq=False)
class UnstableScheme:
    """Base partition plus local leaf size; defines ``eta(x) = beta(x) & W_loc(x)``."""

    model: object
    base: Partition
    leaf_halflength: Optional[float] = None


def build_unstable_scheme(model, base: Partition, leaf_halflength=None) -> UnstableScheme:
    """Validate and assemble an unstable partition scheme.

    On the torus the local leaf must reach past the base cell from every
    point inside it, i.e. ``leaf_halflength > diam(base)``; that makes the
    leaf piece through ``x`` the whole connected component, so two pieces
    that overlap coincide. The default is twice the base diameter.
    """
    if isinstance(model, LinearToralModel):
        if not isinstance(base, GridPartition) or base.dimension != model.dimension:
            raise ValueError("linear models need a grid partition of matching dimension")
        if leaf_halflength is None:
            leaf_halflength = 2.0 * base.diameter
        if not leaf_halflength > base.diameter:
            raise ValueError(
                f"leaf_halflength {leaf_halflength} must exceed the base diameter {base.diameter:.6g}")
        return UnstableScheme(model, base, float(leaf_halflength))
    if isinstance(model, ShiftModel):
        if not isinstance(base, CylinderPartition) or base.length != 1:
            raise ValueError("shift schemes use the time-zero partition as base")
        if base.alphabet_size != model.alphabet_size:
            raise ValueError("alphabet size mismatch")
        return UnstableScheme(model, base, None)
    raise TypeError(f"unsupported system {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class SegmentCell:
    """A leaf piece on the torus: ``origin + t u`` for ``t`` in ``[0, length]``.

    ``origin`` is the left end of the piece (a point of the grid boundary),
    which makes the description independent of the point it was built from.
    """

    scheme: UnstableScheme
    origin: np.ndarray
    length: float
    index: tuple
    anchor: np.ndarray = field(default=None, repr=False)
    anchor_t: float = field(default=0.0, repr=False)

    @property
    def model(self) -> LinearToralModel:
        return self.scheme.model

    @property
    def box(self):
        return (0.0, self.length)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        pts = np.mod(self.origin + np.multiply.outer(t, self.model.unstable_dirs[0]), 1.0)
        pts[pts >= 1.0] = 0.0
        return pts

    def same_as(self, other: "SegmentCell", tol: float = 1e-9) -> bool:
        if not isinstance(other, SegmentCell) or self.index != other.index:
            return False
        gap = np.abs((self.origin - other.origin + 0.5) % 1.0 - 0.5)
        return bool(np.all(gap <= tol) and abs(self.length - other.length) <= tol)


@dataclass(frozen=True, eq=False)
class CylinderCell:
    """A leaf piece of a shift: all words agreeing with ``past`` on indices <= 0."""

    scheme: UnstableScheme
    past: Word

    @property
    def model(self) -> ShiftModel:
        return self.scheme.model

    @property
    def symbol(self) -> int:
        return self.past[0]

    def same_as(self, other, tol=0.0) -> bool:
        if not isinstance(other, CylinderCell):
            return False
        lo = max(self.past.start, other.past.start)
        return self.past.slice(lo, 0) == other.past.slice(lo, 0)


LeafCell = Union[SegmentCell, CylinderCell]


@dataclass(frozen=True)
class ItineraryCell:
    """One element of the refined partition restricted to a leaf piece.

    ``trace`` lists the leaf-coordinate intervals carrying ``name`` (torus);
    ``cylinder`` lists the future symbols ``x_1, x_2, ...`` it fixes (shift).
    """

    name: tuple
    trace: tuple = ()
    cylinder: Optional[tuple] = None

    @property
    def length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.trace))

    def contains(self, t) -> bool:
        if self.cylinder is not None:
            return tuple(t[:len(self.cylinder)]) == self.cylinder
        return any(lo <= t <= hi for lo, hi in self.trace)


def _require_segment_model(model):
    if not isinstance(model, LinearToralModel):
        raise TypeError("expected a linear toral model")
    if model.unstable_dimension != 1:
        raise UnsupportedSpectrum("leaf pieces are implemented for one unstable direction")


def leaf_segments(scheme: UnstableScheme, points):
    """Vectorised leaf pieces through many points.

    Returns ``(origins, lengths, offsets, indices)`` where ``offsets`` is the
    leaf coordinate of each input point inside its piece.
    """
    model = scheme.model
    _require_segment_model(model)
    grid = scheme.base
    x = np.atleast_2d(np.asarray(points, dtype=float))
    u = model.unstable_dirs[0]
    k = grid.k
    c = grid.multi_index(x)
    lo_b = c / k
    hi_b = (c + 1) / k
    moving = np.abs(u) > 1e-15
    safe_u = np.where(moving, u, 1.0)
    t_up = np.where(u > 0, (hi_b - x) / safe_u, (lo_b - x) / safe_u)
    t_down = np.where(u > 0, (lo_b - x) / safe_u, (hi_b - x) / safe_u)
    t_up = np.where(moving, t_up, np.inf)
    t_down = np.where(moving, t_down, -np.inf)
    t_hi = np.minimum(t_up.min(axis=1), scheme.leaf_halflength)
    axis_lo = t_down.argmax(axis=1)
    t_lo_raw = t_down.max(axis=1)
    t_lo = np.maximum(t_lo_raw, -scheme.leaf_halflength)
    t_lo = np.minimum(t_lo, 0.0)
    origins = x + t_lo[:, None] * u
    rows = np.flatnonzero(t_lo == t_lo_raw)
    cols = axis_lo[rows]
    snap = np.where(u[cols] > 0, lo_b[rows, cols], hi_b[rows, cols])
    origins[rows, cols] = snap
    return origins, t_hi - t_lo, -t_lo, c


def unstable_cell(scheme: UnstableScheme, x) -> LeafCell:
    """The element ``eta(x)`` of the unstable partition containing ``x``."""
    if isinstance(scheme.model, ShiftModel):
        if not isinstance(x, Word) or not x.covers(0, 0):
            raise ValueError("shift points must be windows containing coordinate 0")
        return CylinderCell(scheme, Word(x.slice(x.start, 0), x.start))
    point = np.asarray(x, dtype=float)
    origins, lengths, offsets, idx = leaf_segments(scheme, point[None, :])
    return SegmentCell(scheme, origins[0], float(lengths[0]), tuple(int(v) for v in idx[0]),
                       anchor=point.copy(), anchor_t=float(offsets[0]))


def _exact_image(model, point, steps):
    """``f^steps(point)`` reduced exactly mod 1, then rounded once."""
    mat, off = model._affine_power(steps)
    x = [Fraction(float(c)) for c in point]
    out = []
    for row, o in zip(mat, off):
        v = sum(row[j] * x[j] for j in range(len(x))) + o
        out.append(float(v - math.floor(v)))
    return np.array(out)


@dataclass
class LeafItinerary:
    """Refinement of one leaf piece into maximal constant-name intervals.

    ``edges`` has ``P + 1`` increasing leaf coordinates from 0 to the piece
    length; ``codes[j, i]`` is the flat ``xi`` index of ``f^i`` on interval
    ``j``. Several intervals may share a name when an image wraps around the
    torus; mass computations merge them.
    """

    cell: SegmentCell
    n: int
    edges: np.ndarray
    codes: np.ndarray
    cardinality: int
    contiguous: bool = False

    @property
    def widths(self):
        return np.diff(self.edges)

    def group_ids(self):
        """Yield ``(m, ids)`` for m = 1..n, ids labelling the ``xi_0^{m-1}`` elements."""
        if self.contiguous:
            # every element is a single run of adjacent intervals
            change = np.zeros(self.codes.shape[0], dtype=bool)
            for i in range(self.n):
                change[1:] |= self.codes[1:, i] != self.codes[:-1, i]
                yield i + 1, np.cumsum(change)
            return
        ids = np.unique(self.codes[:, 0], return_inverse=True)[1].reshape(-1)
        yield 1, ids
        for i in range(1, self.n):
            key = ids.astype(np.int64) * self.cardinality + self.codes[:, i]
            ids = np.unique(key, return_inverse=True)[1].reshape(-1)
            yield i + 1, ids

    def masses_by_horizon(self):
        """Conditional masses of the refined elements for every horizon ``1..n``."""
        w = self.widths / self.cell.length
        return {m: np.bincount(ids, weights=w) for m, ids in self.group_ids()}

    def cells(self) -> list:
        groups = {}
        for j, name in enumerate(map(tuple, self.codes.tolist())):
            lo, hi = float(self.edges[j]), float(self.edges[j + 1])
            ivs = groups.setdefault(name, [])
            if ivs and ivs[-1][1] == lo:
                ivs[-1] = (ivs[-1][0], hi)
            else:
                ivs.append((lo, hi))
        out = [ItineraryCell(name, tuple(ivs)) for name, ivs in groups.items()]
        out.sort(key=lambda c: c.trace[0][0])
        return out


def estimated_crossings(cell: SegmentCell, grid: GridPartition, n: int) -> float:
    model = cell.model
    lam = abs(float(model.unstable_eigenvalues[0]))
    spread = grid.k * float(np.abs(model.unstable_dirs[0]).sum())
    return sum(cell.length * lam**i * spread + 2 * grid.dimension for i in range(n))


def leaf_itinerary(model, xi: GridPartition, cell: SegmentCell, n: int,
                   budget: int = DEFAULT_BUDGET) -> LeafItinerary:
    """Crossing-based refinement of a torus leaf piece (see module docstring)."""
    _require_segment_model(model)
    n = check_positive_int(n, "n")
    if xi.dimension != model.dimension:
        raise ValueError("partition dimension does not match the model")
    if estimated_crossings(cell, xi, n) > budget:
        raise BudgetExceeded(
            f"about {estimated_crossings(cell, xi, n):.3g} crossings exceed the budget {budget}")
    k, d, L = xi.k, xi.dimension, cell.length
    u = model.unstable_dirs[0]
    lam = float(model.unstable_eigenvalues[0])
    tol = SNAP * max(L, 1e-300)
    weights = k ** np.arange(d - 1, -1, -1, dtype=np.int64)

    plans = []
    pieces = [np.array([0.0, L])]
    for i in range(n):
        q = _exact_image(model, cell.origin, i)
        scale = lam**i
        for a in range(d):
            slope = scale * u[a]
            if abs(u[a]) <= 1e-15:
                plans.append((i, a, None, int(math.floor(k * (q[a] % 1.0))) % k, 0))
                continue
            v0, v1 = k * q[a], k * (q[a] + slope * L)
            if slope > 0:
                ms = np.arange(math.ceil(v0), math.floor(v1) + 1, dtype=np.float64)
                base, sign = math.ceil(v0) - 1, 1
            else:
                ms = np.arange(math.floor(v0), math.ceil(v1) - 1, -1, dtype=np.float64)
                base, sign = math.floor(v0), -1
            ts = (ms / k - q[a]) / slope
            plans.append((i, a, ts, base, sign))
            pieces.append(ts[(ts > tol) & (ts < L - tol)])
    edges = np.unique(np.concatenate(pieces))
    edges = edges[np.concatenate([[True], np.diff(edges) > tol])]
    mids = 0.5 * (edges[:-1] + edges[1:])

    codes = np.zeros((mids.size, n), dtype=np.int64)
    for i, a, ts, base, sign in plans:
        if ts is None:
            idx = np.full(mids.size, base, dtype=np.int64)
        else:
            idx = (base + sign * np.searchsorted(ts, mids, side="right")) % k
        codes[:, i] += idx * weights[a]
    # an image shorter than the gap between two lifts of one cell cannot
    # visit that cell twice, so names then label contiguous runs
    gap = 1.0 - 1.0 / k
    contiguous = abs(lam) * xi.diameter < gap and L < gap
    return LeafItinerary(cell, n, edges, codes, xi.cardinality, contiguous)


def _shift_itinerary_cells(cell: CylinderCell, xi: CylinderPartition, n, budget):
    m = cell.model.alphabet_size
    depth = n + xi.length - 2
    if m**depth > budget:
        raise BudgetExceeded(f"{m}**{depth} cylinders exceed the budget {budget}")
    out = []
    x0 = cell.symbol
    for future in itertools.product(range(m), repeat=depth):
        word = (x0,) + future
        name = tuple(xi.encode(word[i:i + xi.length]) for i in range(n))
        out.append(ItineraryCell(name, cylinder=future))
    return out


def refine_on_leaf(model, xi: Partition, cell: LeafCell, n: int,
                   budget: int = DEFAULT_BUDGET) -> list:
    """Elements of ``xi_0^{n-1}`` traced on ``cell``, ordered along the leaf."""
    n = check_positive_int(n, "n")
    if isinstance(cell, CylinderCell):
        if not isinstance(xi, CylinderPartition):
            raise TypeError("shift leaves are refined by cylinder partitions")
        return _shift_itinerary_cells(cell, xi, n, budget)
    return leaf_itinerary(model, xi, cell, n, budget).cells()


def name_of(model, xi: Partition, point, n: int) -> tuple:
    """The ``(xi, n)``-name: partition elements visited at times ``0..n-1``."""
    n = check_positive_int(n, "n")
    if isinstance(model, ShiftModel):
        point.slice(0, n + xi.length - 2)  # WindowTooShort if the future is missing
        return tuple(xi.encode(point.slice(i, i + xi.length - 1)) for i in range(n))
    names = []
    x = np.asarray(point, dtype=float)
    for _ in range(n):
        names.append(int(xi.cell_index(x)[0]))
        x = apply(model, x, 1)
    return tuple(names)


def name_distance(a, b) -> float:
    """Fraction of times at which two names disagree."""
    if len(a) != len(b):
        raise LengthMismatch(f"names of length {len(a)} and {len(b)}")
    if not a:
        return 0.0
    return sum(x != y for x, y in zip(a, b)) / len(a)


def in_boundary_neighborhood(xi: GridPartition, points, theta: float):
    """Membership in ``U_theta``: the theta-ball around the point leaves its cell."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    frac = np.mod(pts * xi.k, 1.0)
    gap = np.minimum(frac, 1.0 - frac) / xi.k
    return gap.min(axis=1) < theta


def boundary_mass(xi: GridPartition, theta: float) -> float:
    """Lebesgue measure of the theta-neighbourhood of the grid lines."""
    if theta < 0 or theta >= 1.0 / (2 * xi.k):
        raise ThetaTooLarge(f"theta must lie in [0, 1/(2k)) = [0, {1.0 / (2 * xi.k):.6g})")
    return 1.0 - (1.0 - 2.0 * theta * xi.k) ** xi.dimension


def name_ball_bound(n: int, epsilon: float, cardinality: int):
    """Exact count bound for an epsilon-ball of names and its exponential majorant.

    Returns ``(sum_{j <= floor(n eps)} C(n, j) card**j, exp((eps + D) n))`` with
    ``D = eps log card - eps log eps - (1 - eps) log(1 - eps)``.
    """
    n = check_positive_int(n, "n")
    cardinality = check_positive_int(cardinality, "cardinality", minimum=2)
    if not 0.0 < epsilon <= 0.5:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1/2], got {epsilon}")
    jmax = math.floor(n * Fraction(str(epsilon)))
    direct = sum(math.comb(n, j) * cardinality**j for j in range(jmax + 1))
    diamond = (epsilon * math.log(cardinality) - epsilon * math.log(epsilon)
               - (1.0 - epsilon) * math.log(1.0 - epsilon))
    return direct, math.exp((epsilon + diamond) * n)
