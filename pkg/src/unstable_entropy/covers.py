"""Partial covers of a leaf piece by leaf Bowen balls.

Three routes to the covering number: a lazy greedy on sampled centres
(upper bound), an exhaustive search over at most 20 candidates (certified
minimum) and the closed form for uniform measure on a flat segment (exact).
Covered mass is always computed exactly on the union of ball traces; samples
only propose centres.
"""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import check_delta, check_positive_int
from .errors import CoverageImpossible, TooManyCandidates
from .geometry import LeafPoint, leaf_ball_radius, shift_ball_depth
from .measures import ConditionalMeasure, PointMassMeasure

MASS_TOL = 1e-12
MAX_BRUTE_FORCE = 20
_GAIN_SCALE = 1e12


@dataclass(frozen=True, eq=False)
class CoverResult:
    n: int
    epsilon: float
    delta: float
    method: str
    count: int
    covered_mass: float
    _centers: object = field(default=None, repr=False)
    support: object = field(default=None, repr=False)

    @property
    def centers(self):
        """Centre coordinates (leaf coordinates, or future words on a shift)."""
        c = self._centers
        return c() if callable(c) else c

    def center_points(self) -> list:
        return [LeafPoint(self.support, t) for t in self.centers]


def _quantize(gain: float) -> int:
    # gains equal up to rounding must tie so the leftmost candidate wins
    return int(round(gain * _GAIN_SCALE))


class _IntervalUnion:
    """Disjoint sorted intervals with exact uncovered-length queries."""

    def __init__(self):
        self.starts: list = []
        self.ends: list = []

    def uncovered(self, lo: float, hi: float) -> float:
        free = hi - lo
        i = bisect.bisect_right(self.ends, lo)
        while i < len(self.starts) and self.starts[i] < hi:
            free -= min(hi, self.ends[i]) - max(lo, self.starts[i])
            i += 1
        return max(free, 0.0)

    def add(self, lo: float, hi: float):
        i = bisect.bisect_left(self.ends, lo)
        j = i
        while j < len(self.starts) and self.starts[j] <= hi:
            lo = min(lo, self.starts[j])
            hi = max(hi, self.ends[j])
            j += 1
        self.starts[i:j] = [lo]
        self.ends[i:j] = [hi]

    def length(self) -> float:
        return math.fsum(e - s for s, e in zip(self.starts, self.ends))


class _PointCoverage:
    def __init__(self, measure: PointMassMeasure):
        self.pos = measure.positions
        self.w = measure.weights / measure.total_mass
        self.covered = np.zeros(self.pos.size, dtype=bool)

    def _range(self, lo, hi):
        return (int(np.searchsorted(self.pos, lo, side="left")),
                int(np.searchsorted(self.pos, hi, side="right")))

    def gain(self, lo, hi) -> float:
        a, b = self._range(lo, hi)
        return float(self.w[a:b][~self.covered[a:b]].sum())

    def add(self, lo, hi):
        a, b = self._range(lo, hi)
        self.covered[a:b] = True

    def mass(self) -> float:
        return math.fsum(self.w[self.covered])


def _lazy_greedy(order_keys, gains0, gain: Callable, add: Callable, target: float):
    """Lazy greedy on a submodular coverage function.

    Stored gains only overestimate current gains, so a popped candidate whose
    refreshed gain still matches its key is a true maximiser. Ties go to the
    smallest ``order_keys`` entry.
    """
    heap = [(-_quantize(g), float(t), j) for j, (t, g) in enumerate(zip(order_keys, gains0))]
    heapq.heapify(heap)
    chosen = []
    covered = 0.0
    while covered < target - MASS_TOL:
        if not heap:
            raise CoverageImpossible(
                f"all candidates together cover {covered:.6g} < {target:.6g}; sample more centres")
        negq, t, j = heapq.heappop(heap)
        g = gain(j)
        q = _quantize(g)
        if q <= 0:
            continue
        if q < -negq:
            heapq.heappush(heap, (-q, t, j))
            continue
        add(j)
        chosen.append(j)
        covered += g
    return chosen


def interval_cover_greedy(measure, centers, radius: float, delta: float,
                          n: int = 1, epsilon: Optional[float] = None) -> CoverResult:
    """Greedy partial cover of a 1-D measure by intervals ``[c - r, c + r]``.

    ``measure`` is a uniform :class:`ConditionalMeasure` (exact interval
    arithmetic) or a :class:`PointMassMeasure`.
    """
    delta = check_delta(delta, allow_zero=True)
    target = 1.0 - delta
    c = np.asarray(centers, dtype=float).reshape(-1)
    if isinstance(measure, PointMassMeasure):
        state = _PointCoverage(measure)
        lo, hi = c - radius, c + radius
        gains0 = [state.gain(a, b) for a, b in zip(lo, hi)]
        support = None

        def mass():
            return state.mass()
    else:
        L = measure.support.length
        lo, hi = np.clip(c - radius, 0.0, L), np.clip(c + radius, 0.0, L)
        union = _IntervalUnion()
        state = None
        gains0 = (hi - lo) / L
        support = measure.support

        def mass():
            return union.length() / L
    lo_l, hi_l = lo.tolist(), hi.tolist()
    if state is not None:
        chosen = _lazy_greedy(c, gains0, lambda j: state.gain(lo_l[j], hi_l[j]),
                              lambda j: state.add(lo_l[j], hi_l[j]), target)
    else:
        chosen = _lazy_greedy(c, gains0, lambda j: union.uncovered(lo_l[j], hi_l[j]) / L,
                              lambda j: union.add(lo_l[j], hi_l[j]), target)
    return CoverResult(n, radius if epsilon is None else epsilon, delta, "greedy", len(chosen),
                       mass(), c[chosen], support)


def _cylinder_cover_greedy(cond: ConditionalMeasure, futures, n, epsilon, delta):
    depth = shift_ball_depth(n, epsilon)
    futures = np.asarray(futures)
    if futures.ndim != 2 or futures.shape[1] < depth:
        raise ValueError(f"sampled futures must have at least {depth} symbols")
    traces = sorted({tuple(int(s) for s in row[:depth]) for row in futures})
    masses = [cond.chain_mass(t) for t in traces]
    # disjoint traces: greedy is heaviest-first, ties lexicographic
    order = sorted(range(len(traces)), key=lambda j: (-_quantize(masses[j]), traces[j]))
    chosen, covered = [], 0.0
    for j in order:
        if covered >= 1.0 - delta - MASS_TOL:
            break
        chosen.append(traces[j])
        covered += masses[j]
    if covered < 1.0 - delta - MASS_TOL:
        raise CoverageImpossible(f"sampled cylinders cover {covered:.6g} < {1.0 - delta:.6g}")
    return CoverResult(n, epsilon, delta, "greedy", len(chosen), covered, chosen, cond.support)


def ball_cover_greedy(cond: ConditionalMeasure, samples, n: int, epsilon: float,
                      delta: float) -> CoverResult:
    """Greedy cover of ``cond`` by leaf Bowen balls ``B^u_n(s, eps)`` centred at samples.

    ``samples`` are :class:`LeafPoint` objects or raw draws from
    :func:`~unstable_entropy.measures.sample_coordinates`.
    """
    n = check_positive_int(n, "n")
    delta = check_delta(delta)
    if len(samples) and isinstance(samples[0], LeafPoint):
        samples = [s.t for s in samples]
    if cond.density_kind == "cylinder":
        return _cylinder_cover_greedy(cond, samples, n, epsilon, delta)
    radius = leaf_ball_radius(cond.support.model, n, epsilon)
    return interval_cover_greedy(cond, samples, radius, delta, n=n, epsilon=epsilon)


def oracle_interval_count(length: float, radius: float, delta: float) -> int:
    """``ceil((1 - delta) L / 2r)``: the fewest length-``2r`` intervals covering ``(1-delta) L``."""
    x = (1.0 - delta) * length / (2.0 * radius)
    return max(1, math.ceil(x * (1.0 - 1e-12)))


def ball_cover_oracle_interval(cond: ConditionalMeasure, n: int, epsilon: float,
                               delta: float, model=None) -> CoverResult:
    """Exact minimal cover of a uniform 1-D leaf piece, tiling from the left end."""
    n = check_positive_int(n, "n")
    delta = check_delta(delta, allow_zero=True)
    if cond.density_kind != "uniform":
        raise ValueError("the interval oracle needs a uniform conditional measure")
    model = model if model is not None else cond.support.model
    L = cond.support.length
    r = leaf_ball_radius(model, n, epsilon)
    count = oracle_interval_count(L, r, delta)
    covered = min(1.0, count * 2.0 * r / L)

    def centers():
        return np.minimum(r + 2.0 * r * np.arange(count), L)

    return CoverResult(n, epsilon, delta, "oracle_interval", count, covered, centers, cond.support)


def _atoms(measure, lo, hi):
    """Atom masses and the candidate-by-atom membership matrix."""
    if isinstance(measure, PointMassMeasure):
        pos = measure.positions
        member = (pos[None, :] >= lo[:, None]) & (pos[None, :] <= hi[:, None])
        return measure.weights / measure.total_mass, member
    L = measure.support.length
    cuts = np.unique(np.concatenate([[0.0, L], np.clip(lo, 0.0, L), np.clip(hi, 0.0, L)]))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    member = (mids[None, :] > lo[:, None]) & (mids[None, :] < hi[:, None])
    return np.diff(cuts) / L, member


def ball_cover_brute_force(measure, traces, delta: float, centers=None,
                           n: int = 1, epsilon: float = float("nan")) -> CoverResult:
    """Certified minimum number of candidate traces covering ``1 - delta`` of ``measure``.

    Enumerates every subset of the (at most 20) candidates at once: the
    union of a subset is built by doubling over candidates on bit-packed atom
    sets, and its mass is summed bytewise through lookup tables.
    """
    delta = check_delta(delta, allow_zero=True)
    traces = np.asarray(traces, dtype=float).reshape(-1, 2)
    m = len(traces)
    if m > MAX_BRUTE_FORCE:
        raise TooManyCandidates(f"{m} candidates; exhaustive search allows {MAX_BRUTE_FORCE}")
    if m == 0:
        raise CoverageImpossible("no candidates")
    masses, member = _atoms(measure, traces[:, 0], traces[:, 1])
    bits = np.packbits(member, axis=1)
    nbytes = bits.shape[1]
    cover = np.zeros((1, nbytes), dtype=np.uint8)
    sizes = np.zeros(1, dtype=np.int64)
    for j in range(m):
        cover = np.concatenate([cover, cover | bits[j]])
        sizes = np.concatenate([sizes, sizes + 1])
    padded = np.zeros(nbytes * 8)
    padded[:masses.size] = masses
    bit_table = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).astype(float)
    mass = np.zeros(cover.shape[0])
    for b in range(nbytes):
        mass += (bit_table @ padded[8 * b:8 * b + 8])[cover[:, b]]
    ok = mass >= 1.0 - delta - MASS_TOL
    if not ok.any():
        raise CoverageImpossible("even all candidates together fall short of 1 - delta")
    best = int(sizes[ok].min())
    picks = np.flatnonzero(ok & (sizes == best))
    mask = int(picks[np.argmax(mass[picks])])
    chosen = [j for j in range(m) if mask >> j & 1]
    if centers is None:
        centers = 0.5 * (traces[:, 0] + traces[:, 1])
    centers = np.asarray(centers)[chosen]
    return CoverResult(n, epsilon, delta, "brute_force", best, float(mass[mask]), centers,
                       getattr(measure, "support", None))
