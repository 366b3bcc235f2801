"""Ambient and leaf metrics, their Bowen versions and leaf Bowen balls.

Torus: the ambient metric is the flat metric on ``R^d / Z^d``; the leaf
metric is arc length along the (straight) unstable leaf.

Shift: ``d(x, y) = 2**-k`` with ``k = min{|i| : x_i != y_i}``. On a leaf piece
(common past) ``d^u(x, y) = 2**-k`` with ``k = min{i >= 1 : x_i != y_i}``;
points of the same global leaf that have drifted into different pieces are
at leaf distance 1. Distances of windows that agree everywhere they overlap
are reported as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._validation import check_positive_int, make_rng
from .errors import DifferentLeaf, UnsupportedSpectrum
from .partitions import CylinderCell, SegmentCell, UnstableScheme, leaf_segments
from .systems import LinearToralModel, ShiftModel, Word


@dataclass(frozen=True, eq=False)
class LeafPoint:
    """Point of a leaf piece: arc-length coordinate (torus) or future symbols (shift)."""

    cell: Union[SegmentCell, CylinderCell]
    t: object

    @property
    def position(self):
        if isinstance(self.cell, SegmentCell):
            return self.cell.point(float(self.t))
        past = self.cell.past
        return Word(past.symbols + tuple(self.t), past.start)


@dataclass(frozen=True)
class BowenBallSpec:
    n: int
    radius: float
    metric_kind: str = "unstable"

    def __post_init__(self):
        check_positive_int(self.n, "n")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.metric_kind not in ("ambient", "unstable"):
            raise ValueError("metric_kind is 'ambient' or 'unstable'")


@dataclass(frozen=True)
class MetricComparison:
    """Constant ``C`` with ``d <= d^u <= C d`` on leaf pairs within ``gamma``."""

    C: float
    gamma: float
    max_ratio: float = float("nan")
    samples: int = 0

    def __post_init__(self):
        if not (self.C > 1.0 and self.gamma > 0.0):
            raise ValueError("need C > 1 and gamma > 0")


def torus_displacement(p, q):
    """Shortest representative of ``q - p`` modulo the integer lattice."""
    diff = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    return diff - np.round(diff)


def _first_difference(x: Word, y: Word, lo: int, hi: int):
    """Smallest ``|i|`` (ordered by absolute value) in [lo, hi] where the windows differ."""
    lo = max(lo, x.start, y.start)
    hi = min(hi, x.stop - 1, y.stop - 1)
    order = sorted(range(lo, hi + 1), key=lambda i: (abs(i), i))
    for i in order:
        if x[i] != y[i]:
            return abs(i)
    return None


def ambient_distance(model, p, q):
    """Flat torus distance (vectorised over leading axes) or shift ultrametric."""
    if isinstance(model, ShiftModel):
        k = _first_difference(p, q, -10**9, 10**9)
        return 0.0 if k is None else 2.0 ** -k
    return np.linalg.norm(torus_displacement(p, q), axis=-1)


def _same_cell(a: LeafPoint, b: LeafPoint):
    if a.cell is not b.cell and not a.cell.same_as(b.cell):
        raise DifferentLeaf("points lie on different leaf pieces")


def _future_gap(a, b, start=1):
    for j in range(start, min(len(a), len(b)) + 1):
        if a[j - 1] != b[j - 1]:
            return j
    return None


def unstable_distance(a: LeafPoint, b: LeafPoint) -> float:
    """Leaf-intrinsic distance between two points of the same leaf piece."""
    _same_cell(a, b)
    if isinstance(a.cell, CylinderCell):
        j = _future_gap(a.t, b.t)
        return 0.0 if j is None else 2.0 ** -j
    return abs(float(a.t) - float(b.t))


def leaf_bowen_gap(model: LinearToralModel, dt, n: int):
    """``max_{i<n} |lambda|^i |dt|`` for a one-dimensional flat leaf."""
    if model.unstable_dimension != 1:
        raise UnsupportedSpectrum("closed form needs one unstable direction")
    return np.abs(dt) * math.exp((n - 1) * float(model.unstable_logs[0]))


def unstable_bowen_distance(model, a: LeafPoint, b: LeafPoint, n: int) -> float:
    """``max_{0<=i<n} d^u(f^i a, f^i b)``."""
    n = check_positive_int(n, "n")
    _same_cell(a, b)
    if isinstance(a.cell, CylinderCell):
        j = _future_gap(a.t, b.t)
        if j is None:
            return 0.0
        return 1.0 if j <= n - 1 else 2.0 ** -(j - (n - 1))
    return float(leaf_bowen_gap(model, float(a.t) - float(b.t), n))


def ambient_bowen_gaps(model: LinearToralModel, p, q, n: int):
    """Vectorised ``d_n``: iterate the displacement, re-wrapping each step."""
    delta = torus_displacement(p, q)
    a = model.matrix.astype(float)
    best = np.linalg.norm(delta, axis=-1)
    for _ in range(n - 1):
        delta = delta @ a.T
        delta -= np.round(delta)
        best = np.maximum(best, np.linalg.norm(delta, axis=-1))
    return best


def bowen_distance(model, p, q, n: int):
    """``max_{0<=i<n} d(f^i p, f^i q)``."""
    n = check_positive_int(n, "n")
    if isinstance(model, ShiftModel):
        return max(ambient_distance(model, Word(p.symbols, p.start - i), Word(q.symbols, q.start - i))
                   for i in range(n))
    return ambient_bowen_gaps(model, p, q, n)


def shift_ball_depth(n: int, epsilon: float) -> int:
    """Number of future symbols a leaf Bowen ball of a shift fixes."""
    return n + math.floor(-math.log2(epsilon)) - 1


def leaf_ball_radius(model: LinearToralModel, n: int, epsilon: float) -> float:
    """Leaf-coordinate radius of ``B^u_n(x, eps)`` on a flat one-dimensional leaf."""
    if model.unstable_dimension != 1:
        raise UnsupportedSpectrum("ball traces need one unstable direction")
    return epsilon * math.exp(-(n - 1) * float(model.unstable_logs[0]))


def unstable_ball_trace(cell, center_t, n: int, epsilon: float):
    """Intersection of the leaf Bowen ball ``B^u_n(center, eps)`` with ``cell``.

    Torus: the coordinate interval ``(lo, hi)`` of radius
    ``eps * exp(-(n-1) log|lambda|)`` clipped to ``[0, length]``.
    Shift: the tuple of future symbols the ball fixes.
    """
    n = check_positive_int(n, "n")
    if isinstance(cell, CylinderCell):
        depth = shift_ball_depth(n, epsilon)
        if len(center_t) < depth:
            raise ValueError("center window shorter than the ball depth")
        return tuple(center_t[:depth])
    r = leaf_ball_radius(cell.model, n, epsilon)
    c = np.asarray(center_t, dtype=float)
    return np.clip(c - r, 0.0, cell.length), np.clip(c + r, 0.0, cell.length)


def sample_leaf_pairs(scheme: UnstableScheme, count: int, rng, max_gap=None):
    """Random anchors with two leaf coordinates on each anchor's piece.

    Returns ``(origins, lengths, t1, t2)``; with ``max_gap`` the second point
    is within that leaf distance of the first (still inside the piece).
    """
    model = scheme.model
    anchors = rng.random((count, model.dimension))
    origins, lengths, _, _ = leaf_segments(scheme, anchors)
    t1 = rng.random(count) * lengths
    if max_gap is None:
        t2 = rng.random(count) * lengths
    else:
        lo = np.maximum(t1 - max_gap, 0.0)
        hi = np.minimum(t1 + max_gap, lengths)
        t2 = lo + rng.random(count) * (hi - lo)
    return origins, lengths, t1, t2


def estimate_metric_comparison(scheme: UnstableScheme, gamma: float = 0.01,
                               samples: int = 10_000, seed: int = 0) -> MetricComparison:
    """Empirical leaf-versus-ambient distortion on pairs within leaf distance ``gamma``.

    ``C`` is the largest observed ratio ``d^u / d`` inflated by ``1e-9`` (the
    flat leaves of linear models give ratio 1 up to rounding).
    """
    rng = make_rng(seed, 0)
    origins, _, t1, t2 = sample_leaf_pairs(scheme, samples, rng, max_gap=gamma)
    u = scheme.model.unstable_dirs[0]
    p = np.mod(origins + t1[:, None] * u, 1.0)
    q = np.mod(origins + t2[:, None] * u, 1.0)
    d = np.linalg.norm(torus_displacement(p, q), axis=-1)
    du = np.abs(t1 - t2)
    ok = d > 0
    ratio = float(np.max(du[ok] / d[ok])) if np.any(ok) else 1.0
    if not math.isfinite(ratio):
        raise ArithmeticError("unbounded leaf/ambient ratio")
    return MetricComparison(max(ratio, 1.0) * (1.0 + 1e-9), gamma, ratio, samples)
