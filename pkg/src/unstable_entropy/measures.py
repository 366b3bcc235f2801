"""Invariant measures and their exact disintegration along leaf pieces.

Lebesgue measure on the torus disintegrates into normalised arc length on
each leaf piece. A Bernoulli or Markov measure on a shift disintegrates into
the law of the future ``x_1, x_2, ...`` given the past, which only depends on
``x_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_positive_int, make_rng
from .errors import IncompatibleScheme, RegionOutsideSupport
from .geometry import LeafPoint
from .partitions import CylinderCell, ItineraryCell, SegmentCell, UnstableScheme, leaf_segments, unstable_cell
from .systems import LinearToralModel, ShiftModel, Word

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class InvariantMeasureModel:
    kind: str
    transition: Optional[np.ndarray] = None
    stationary: Optional[np.ndarray] = None


def lebesgue() -> InvariantMeasureModel:
    return InvariantMeasureModel("lebesgue")


def measure_for(system) -> InvariantMeasureModel:
    """The natural invariant measure carried by a built-in system."""
    if isinstance(system, LinearToralModel):
        return lebesgue()
    if isinstance(system, ShiftModel):
        return InvariantMeasureModel(system.kind, system.transition, system.stationary)
    raise TypeError(f"unsupported system {type(system).__name__}")


def _check_compatible(mu, scheme):
    model = scheme.model
    if mu.kind == "lebesgue":
        if not isinstance(model, LinearToralModel):
            raise IncompatibleScheme("Lebesgue measure needs a toral scheme")
        return
    if not isinstance(model, ShiftModel):
        raise IncompatibleScheme(f"{mu.kind} measure needs a shift scheme")
    if mu.transition.shape != model.transition.shape:
        raise IncompatibleScheme("alphabet size mismatch")


@dataclass(frozen=True, eq=False)
class ConditionalMeasure:
    """Conditional probability on one leaf piece.

    ``density_kind`` is ``"uniform"`` (arc length on a segment) or
    ``"cylinder"`` (Markov kernel on the future, started at ``x_0``).
    """

    support: object
    density_kind: str
    kernel: Optional[np.ndarray] = None
    normalization: float = 1.0

    @property
    def total_mass(self) -> float:
        return self.normalization

    def interval_mass(self, lo, hi):
        """Vectorised mass of coordinate intervals (must lie in the support)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return np.clip(hi - lo, 0.0, None) / self.support.length

    def chain_mass(self, future) -> float:
        p = 1.0
        prev = self.support.symbol
        for s in future:
            p *= self.kernel[prev, s]
            prev = s
        return float(p)


@dataclass(frozen=True)
class Interval:
    """Bare coordinate interval ``[0, length]`` standing in for a leaf piece."""

    length: float


def uniform_on_interval(length: float) -> ConditionalMeasure:
    """Normalised length on ``[0, length]``; handy for stand-alone cover instances."""
    if not length > 0:
        raise ValueError("length must be positive")
    return ConditionalMeasure(Interval(float(length)), "uniform")


def disintegrate(mu: InvariantMeasureModel, scheme: UnstableScheme, x) -> ConditionalMeasure:
    """Conditional measure of ``mu`` on the leaf piece through ``x``."""
    _check_compatible(mu, scheme)
    cell = x if isinstance(x, (SegmentCell, CylinderCell)) else unstable_cell(scheme, x)
    if mu.kind == "lebesgue":
        return ConditionalMeasure(cell, "uniform")
    return ConditionalMeasure(cell, "cylinder", kernel=np.asarray(mu.transition))


def conditional_mass(cond: ConditionalMeasure, region) -> float:
    """Exact conditional mass of a coordinate interval, itinerary cell or cylinder.

    Regions for a segment: ``(lo, hi)`` or an :class:`ItineraryCell`.
    Regions for a cylinder support: an :class:`ItineraryCell` or the tuple of
    future symbols ``(x_1, ..., x_j)``.
    """
    if cond.density_kind == "uniform":
        L = cond.support.length
        ivs = region.trace if isinstance(region, ItineraryCell) else [tuple(region)]
        total = 0.0
        for lo, hi in ivs:
            if hi <= lo:
                continue
            if lo < -MASS_TOL * max(L, 1.0) or hi > L + MASS_TOL * max(L, 1.0):
                raise RegionOutsideSupport(f"interval ({lo}, {hi}) not inside [0, {L}]")
            total += (min(hi, L) - max(lo, 0.0)) / L
        return total
    if isinstance(region, ItineraryCell):
        if region.cylinder is None:
            raise RegionOutsideSupport("itinerary cell carries no cylinder")
        future = region.cylinder
    else:
        future = tuple(region)
    if any(not 0 <= s < cond.kernel.shape[0] for s in future):
        raise RegionOutsideSupport("symbol outside the alphabet")
    return cond.chain_mass(future)


def sample_coordinates(cond: ConditionalMeasure, count: int, seed: int, horizon: int = 32,
                       stream: tuple = ()):
    """Raw draws: leaf coordinates (segment) or an array of future words (cylinder).

    ``stream`` selects an independent substream, e.g. ``(anchor_index,)``.
    """
    count = check_positive_int(count, "count")
    rng = make_rng(seed, 1, *stream)
    if cond.density_kind == "uniform":
        return rng.random(count) * cond.support.length
    m = cond.kernel.shape[0]
    out = np.empty((count, horizon), dtype=np.int64)
    prev = np.full(count, cond.support.symbol)
    cum = np.cumsum(cond.kernel, axis=1)
    for j in range(horizon):
        u = rng.random(count)
        nxt = (u[:, None] >= cum[prev]).sum(axis=1)
        out[:, j] = np.minimum(nxt, m - 1)
        prev = out[:, j]
    return out


def sample_conditional(cond: ConditionalMeasure, count: int, seed: int, horizon: int = 32) -> list:
    """``count`` i.i.d. leaf points drawn from ``cond``; deterministic in ``seed``."""
    raw = sample_coordinates(cond, count, seed, horizon)
    if cond.density_kind == "uniform":
        return [LeafPoint(cond.support, float(t)) for t in raw]
    return [LeafPoint(cond.support, tuple(int(s) for s in row)) for row in raw]


@dataclass(frozen=True)
class PointMassMeasure:
    """Finitely many weighted atoms on a one-dimensional leaf."""

    positions: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_points(cls, positions, weights=None):
        pos = np.asarray(positions, dtype=float)
        order = np.argsort(pos, kind="stable")
        pos = pos[order]
        if weights is None:
            w = np.full(pos.size, 1.0 / pos.size)
        else:
            w = np.asarray(weights, dtype=float)[order]
            w = w / w.sum()
        return cls(pos, w)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


# ---------------------------------------------------------------------------
# disintegration check


@dataclass(frozen=True)
class DisintegrationCheck:
    relative_error: float
    average: float
    expected: float
    variance: float
    sample_count: int

    @property
    def bound(self) -> float:
        """Three standard errors of the average, relative to the target."""
        return 3.0 * math.sqrt(self.variance / self.sample_count) / max(self.expected, 1e-6)

    @property
    def passed(self) -> bool:
        return self.relative_error <= self.bound + 1e-12


def box_conditional_masses(scheme: UnstableScheme, anchors, lo, hi):
    """Exact conditional mass of the box ``prod [lo_a, hi_a]`` on each anchor's leaf piece."""
    origins, lengths, _, _ = leaf_segments(scheme, anchors)
    u = scheme.model.unstable_dirs[0]
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    t_lo = np.zeros(len(origins))
    t_hi = lengths.copy()
    for a in range(u.size):
        if abs(u[a]) <= 1e-15:
            inside = (origins[:, a] >= lo[a]) & (origins[:, a] <= hi[a])
            t_hi = np.where(inside, t_hi, t_lo)
            continue
        e1 = (lo[a] - origins[:, a]) / u[a]
        e2 = (hi[a] - origins[:, a]) / u[a]
        t_lo = np.maximum(t_lo, np.minimum(e1, e2))
        t_hi = np.minimum(t_hi, np.maximum(e1, e2))
    return np.clip(t_hi - t_lo, 0.0, None) / lengths


def _cylinder_probability(constraints, transition, stationary, start_symbol=None, start=None):
    """Probability of ``{x_i = s_i}``; conditioned on ``x_start`` when given."""
    items = sorted(constraints.items())
    if start is None:
        first_i, first_s = items[0]
        prob, prev_i, prev_s, items = float(stationary[first_s]), first_i, first_s, items[1:]
    else:
        prob, prev_i, prev_s = 1.0, start, start_symbol
    for i, s in items:
        step = np.linalg.matrix_power(transition, i - prev_i)
        prob *= float(step[prev_s, s])
        prev_i, prev_s = i, s
    return prob


def cylinder_conditional_mass(cond: ConditionalMeasure, constraints: dict) -> float:
    """Conditional mass of a general cylinder ``{x_i = s_i}`` on a shift leaf."""
    past = {i: s for i, s in constraints.items() if i <= 0}
    future = {i: s for i, s in constraints.items() if i > 0}
    for i, s in past.items():
        if cond.support.past[i] != s:
            return 0.0
    if not future:
        return 1.0
    return _cylinder_probability(future, cond.kernel, None, cond.support.symbol, 0)


def verify_disintegration(mu: InvariantMeasureModel, scheme: UnstableScheme, region,
                          sample_count: int, seed: int) -> DisintegrationCheck:
    """Monte Carlo check of ``mu(B) = integral of mu_x(B) dmu(x)``.

    ``region`` is a pair ``(lo, hi)`` of corner vectors on the torus or a
    cylinder ``{index: symbol}`` on a shift. Each conditional mass is exact;
    only the outer integral is sampled.
    """
    _check_compatible(mu, scheme)
    sample_count = check_positive_int(sample_count, "sample_count")
    rng = make_rng(seed, 2)
    if mu.kind == "lebesgue":
        lo, hi = (np.asarray(v, dtype=float) for v in region)
        anchors = rng.random((sample_count, scheme.model.dimension))
        values = box_conditional_masses(scheme, anchors, lo, hi)
        expected = float(np.prod(np.clip(hi - lo, 0.0, None)))
    else:
        constraints = {int(i): int(s) for i, s in dict(region).items()}
        expected = _cylinder_probability(constraints, mu.transition, mu.stationary) if constraints else 1.0
        lowest = min([0, *constraints])
        pasts = _sample_pasts(mu, rng, sample_count, -lowest + 1)
        cache = {}
        values = np.empty(sample_count)
        keys = [i for i in constraints if i <= 0]
        for j, row in enumerate(pasts):
            key = (row[-1],) + tuple(row[i - lowest] for i in keys)
            if key not in cache:
                word = Word(tuple(row), lowest)
                cond = ConditionalMeasure(CylinderCell(scheme, word), "cylinder", kernel=mu.transition)
                cache[key] = cylinder_conditional_mass(cond, constraints)
            values[j] = cache[key]
    average = math.fsum(values) / sample_count
    variance = float(np.var(values, ddof=1)) if sample_count > 1 else 0.0
    rel = abs(average - expected) / max(expected, 1e-6)
    return DisintegrationCheck(rel, average, expected, variance, sample_count)


def _sample_pasts(mu, rng, count, length):
    """Stationary draws of ``x_{1-length}, ..., x_0`` (one row per anchor)."""
    m = mu.stationary.size
    out = np.empty((count, length), dtype=np.int64)
    cum_pi = np.cumsum(mu.stationary)
    out[:, 0] = np.minimum((rng.random(count)[:, None] >= cum_pi).sum(axis=1), m - 1)
    cum = np.cumsum(mu.transition, axis=1)
    for j in range(1, length):
        u = rng.random(count)
        out[:, j] = np.minimum((u[:, None] >= cum[out[:, j - 1]]).sum(axis=1), m - 1)
    return out
