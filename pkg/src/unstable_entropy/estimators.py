"""Katok-type counting estimates of the unstable metric entropy.

Partition formula: the fewest elements of ``xi_0^{n-1}`` whose union carries
``1 - delta`` of the conditional measure on a leaf piece. Ball formula: the
fewest leaf Bowen balls ``B^u_n(., eps)`` doing the same. Both counts grow
like ``exp(n h)``; the slope of ``log count`` against ``n`` estimates ``h``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import partial
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ._validation import check_delta, check_positive_int, make_rng
from .covers import CoverResult, ball_cover_greedy, ball_cover_oracle_interval
from .errors import MassDeficit, WindowTooSmall, ZeroMassCell
from .geometry import LeafPoint, shift_ball_depth
from .measures import ConditionalMeasure, conditional_mass, disintegrate, sample_coordinates
from .partitions import (DEFAULT_BUDGET, SNAP, CylinderCell, CylinderPartition, SegmentCell,
                         leaf_itinerary, unstable_cell)
from .systems import ShiftModel, Word

MASS_TOL = 1e-12
TILING_TOL = 1e-9


@dataclass(frozen=True)
class PartitionCountResult:
    """``cells_used`` is ``None`` when counting went through mass classes, not cells."""

    n: int
    delta: float
    count: int
    covered_mass: float
    cells_used: Optional[tuple] = None


def _tie_key(mass: float) -> float:
    # masses equal to 12 significant digits tie, so names decide
    return float(f"{mass:.12g}")


def partition_count(cond: ConditionalMeasure, cells: Sequence, delta: float) -> PartitionCountResult:
    """Fewest cells (heaviest first, ties by name) carrying ``1 - delta`` of ``cond``."""
    delta = check_delta(delta)
    masses = [conditional_mass(cond, c) for c in cells]
    total = math.fsum(masses)
    if abs(total - 1.0) > TILING_TOL:
        raise MassDeficit(f"cells carry mass {total!r}, not 1")
    order = sorted(range(len(cells)), key=lambda j: (-_tie_key(masses[j]), cells[j].name))
    target = 1.0 - delta
    covered = 0.0
    used = []
    for j in order:
        used.append(cells[j].name)
        covered += masses[j]
        if covered >= target - MASS_TOL:
            break
    n = len(cells[0].name) if cells else 0
    return PartitionCountResult(n, delta, len(used), covered, tuple(used))


def count_from_masses(masses, delta: float) -> tuple:
    """``(count, covered)`` for the heaviest-first partial cover by disjoint cells."""
    m = np.sort(np.asarray(masses, dtype=float))[::-1]
    cum = np.cumsum(m)
    k = int(np.searchsorted(cum, 1.0 - delta - MASS_TOL, side="left"))
    k = min(k, m.size - 1)
    return k + 1, float(cum[k])


def count_from_classes(classes: dict, delta: float) -> tuple:
    """Exact heaviest-first count when cells come in classes ``{mass: multiplicity}``."""
    remaining = Fraction(1) - Fraction(float(delta))
    count = 0
    covered = Fraction(0)
    for mass in sorted(classes, reverse=True):
        mult = classes[mass]
        if mass == 0:
            break
        if mass * mult >= remaining:
            take = -(-remaining // mass)  # ceil
            return count + int(take), float(covered + take * mass)
        count += mult
        covered += mass * mult
        remaining -= mass * mult
    raise MassDeficit("cylinder masses do not reach 1 - delta")


# ---------------------------------------------------------------------------
# exact cylinder mass classes on shifts


def cylinder_mass_classes(model: ShiftModel, x0: int, depth: int) -> dict:
    """``{mass: number of futures}`` over all ``(x_1..x_depth)`` given ``x_0``.

    Bernoulli: futures with equal symbol counts share a mass (multinomial
    multiplicities). Markov: futures with equal transition counts do; the
    multiplicities come from a dynamic programme over (last symbol, counts).
    Masses are exact rationals of the binary floats defining the measure.
    """
    m = model.alphabet_size
    P = [[Fraction(float(v)) for v in row] for row in model.transition]
    out = defaultdict(int)
    if depth == 0:
        return {Fraction(1): 1}
    if model.kind == "bernoulli":
        p = P[0]
        for comp in _compositions(depth, m):
            mass = math.prod(p[s] ** c for s, c in enumerate(comp))
            out[mass] += math.factorial(depth) // math.prod(math.factorial(c) for c in comp)
        return dict(out)
    states = {(x0, (0,) * (m * m)): 1}
    for _ in range(depth):
        nxt = defaultdict(int)
        for (last, counts), mult in states.items():
            for b in range(m):
                if P[last][b] == 0:
                    continue
                c = list(counts)
                c[last * m + b] += 1
                nxt[(b, tuple(c))] += mult
        states = nxt
    for (_, counts), mult in states.items():
        mass = math.prod(P[i // m][i % m] ** c for i, c in enumerate(counts) if c)
        out[mass] += mult
    return dict(out)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def shift_partition_count(model: ShiftModel, xi: CylinderPartition, x0: int, n: int,
                          delta: float) -> PartitionCountResult:
    """Partition count on a shift leaf, exact for any ``n`` via mass classes."""
    depth = n + xi.length - 2
    count, covered = count_from_classes(cylinder_mass_classes(model, x0, depth), delta)
    return PartitionCountResult(n, delta, count, covered)


# ---------------------------------------------------------------------------
# pointwise and averaged rates


def _segment_name_masses(model, xi, cell: SegmentCell, n: int, budget: int):
    it = leaf_itinerary(model, xi, cell, n, budget)
    *_, (_, ids) = it.group_ids()  # labels at the full horizon n
    masses = np.bincount(ids, weights=it.widths / cell.length)
    return it, ids, masses


def smb_rates(cond: ConditionalMeasure, model, xi, ts, n: int, budget: int = DEFAULT_BUDGET):
    """``-log mu_x(xi_0^{n-1}(y)) / n`` for many leaf coordinates ``ts`` on one segment."""
    n = check_positive_int(n, "n")
    cell = cond.support
    it, ids, masses = _segment_name_masses(model, xi, cell, n, budget)
    ts = np.asarray(ts, dtype=float)
    inner = it.edges[1:-1]
    if inner.size:
        pos = np.clip(np.searchsorted(inner, ts), 0, inner.size - 1)
        near = np.abs(inner[pos] - ts)
        pos2 = np.clip(pos - 1, 0, inner.size - 1)
        near = np.minimum(near, np.abs(inner[pos2] - ts))
        if np.any(near <= SNAP * cell.length):
            raise ZeroMassCell("a point lies on a boundary between itinerary cells")
    j = np.clip(np.searchsorted(it.edges, ts, side="right") - 1, 0, ids.size - 1)
    mass = masses[ids[j]]
    if np.any(mass <= 0):
        raise ZeroMassCell("a point lies in a cell of zero conditional mass")
    return -np.log(mass) / n


def smb_rate(cond: ConditionalMeasure, model, xi, y: LeafPoint, n: int,
             budget: int = DEFAULT_BUDGET) -> float:
    """Pointwise rate ``-log mu_x(xi_0^{n-1}(y)) / n``."""
    n = check_positive_int(n, "n")
    if cond.density_kind == "cylinder":
        depth = n + xi.length - 2
        if len(y.t) < depth:
            raise ValueError(f"the point needs {depth} future symbols")
        mass = cond.chain_mass(tuple(y.t[:depth]))
        if mass <= 0:
            raise ZeroMassCell("the point's cylinder has zero conditional mass")
        return -math.log(mass) / n
    return float(smb_rates(cond, model, xi, [float(y.t)], n, budget)[0])


def _entropy(masses) -> float:
    m = np.asarray(masses, dtype=float)
    m = m[m > 0]
    return float(-(m * np.log(m)).sum())


def shift_conditional_entropy(model: ShiftModel, x0: int, depth: int) -> float:
    """``H(x_1..x_depth | x_0)`` for the chain: sum of expected row entropies."""
    P = np.asarray(model.transition, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rows = -np.where(P > 0, P * np.log(P), 0.0).sum(axis=1)
    dist = np.zeros(model.alphabet_size)
    dist[x0] = 1.0
    total = 0.0
    for _ in range(depth):
        total += float(dist @ rows)
        dist = dist @ P
    return total


def conditional_entropy_rate(model, mu, xi, scheme, n: int, anchor_count: int, seed: int,
                             budget: int = DEFAULT_BUDGET) -> tuple:
    """Monte Carlo ``H_mu(xi_0^{n-1} | eta) / n`` over anchors; returns ``(mean, stderr)``."""
    n = check_positive_int(n, "n")
    anchor_count = check_positive_int(anchor_count, "anchor_count")
    rng = make_rng(seed, 3)
    values = np.empty(anchor_count)
    if isinstance(model, ShiftModel):
        depth = n + xi.length - 2
        x0s = rng.choice(model.alphabet_size, size=anchor_count, p=model.stationary)
        cache = {}
        for j, x0 in enumerate(x0s):
            if x0 not in cache:
                cache[x0] = shift_conditional_entropy(model, int(x0), depth) / n
            values[j] = cache[x0]
    else:
        for j, x in enumerate(rng.random((anchor_count, model.dimension))):
            cell = unstable_cell(scheme, x)
            values[j] = _entropy(_segment_name_masses(model, xi, cell, n, budget)[2]) / n
    stderr = float(values.std(ddof=1) / math.sqrt(anchor_count)) if anchor_count > 1 else 0.0
    return float(values.mean()), stderr


# ---------------------------------------------------------------------------
# slope fits


@dataclass(frozen=True)
class EntropyEstimate:
    rows: tuple
    slope: float
    intercept: float
    residual: float
    window: tuple

    @property
    def naive_rates(self):
        return [r[2] for r in self.rows]


def entropy_from_counts(rows, window=None) -> EntropyEstimate:
    """Least-squares slope of ``log count`` against ``n`` over ``window``."""
    rows = sorted((int(n), int(c)) for n, c in rows)
    if any(c < 1 for _, c in rows):
        raise ValueError("counts must be positive")
    if window is None:
        window = (rows[0][0], rows[-1][0]) if rows else (0, -1)
    lo, hi = window
    sel = [(n, c) for n, c in rows if lo <= n <= hi]
    if len({n for n, _ in sel}) < 3:
        raise WindowTooSmall(f"window {window} holds {len(sel)} rows; need 3")
    ns = np.array([n for n, _ in sel], dtype=float)
    ys = np.log(np.array([c for _, c in sel], dtype=float))
    slope, intercept = np.polyfit(ns, ys, 1)
    resid = ys - (slope * ns + intercept)
    table = tuple((n, c, math.log(c) / n) for n, c in rows)
    return EntropyEstimate(table, float(slope), float(intercept),
                           float(np.sqrt(np.mean(resid**2))), (lo, hi))


# ---------------------------------------------------------------------------
# orchestration


@dataclass(frozen=True)
class CountRow:
    anchor_index: int
    formula: str
    n: int
    epsilon: float
    delta: float
    method: str
    count: int
    covered_mass: float

    @property
    def naive_rate(self) -> float:
        return math.log(self.count) / self.n


@dataclass(frozen=True)
class SummaryRow:
    formula: str
    method: str
    epsilon: float
    delta: float
    median_slope: float
    iqr: float
    anchors: int


@dataclass(frozen=True)
class KatokResult:
    rows: tuple
    estimates: dict
    summary: tuple

    def headline(self, formula: str = "partition") -> SummaryRow:
        """Summary row of ``formula``, preferring the exact ball oracle when present."""
        rank = {"partition": 0, "oracle_interval": 0, "oracle_cylinder": 0, "greedy": 1}
        rows = [s for s in self.summary if s.formula == formula]
        return min(rows, key=lambda s: (rank.get(s.method, 2), -s.epsilon, s.delta))


def sample_anchors(system, count: int, seed: int):
    """Anchors drawn from the invariant measure: torus points, or ``x_0`` on a shift."""
    rng = make_rng(seed, 4)
    if isinstance(system, ShiftModel):
        return [int(s) for s in rng.choice(system.alphabet_size, size=count, p=system.stationary)]
    return list(rng.random((count, system.dimension)))


def anchor_rows(system, mu, scheme, xi, anchor_index: int, anchor, ns, epsilons, deltas,
                formulas, ball_methods, sample_count: int, seed: int,
                budget: int = DEFAULT_BUDGET) -> list:
    """All count rows of one anchor leaf (a pure task; safe to run in a worker)."""
    rows = []
    ns = list(ns)
    if isinstance(system, ShiftModel):
        x0 = int(anchor)
        cell = CylinderCell(scheme, Word((x0,), 0))
        cond = disintegrate(mu, scheme, cell)
        if "partition" in formulas:
            for n in ns:
                classes = cylinder_mass_classes(system, x0, n + xi.length - 2)
                for d in deltas:
                    count, cov = count_from_classes(classes, d)
                    rows.append(CountRow(anchor_index, "partition", n, 0.0, d, "partition", count, cov))
        if "ball" in formulas:
            samples = None
            for eps in epsilons:
                for n in ns:
                    classes = cylinder_mass_classes(system, x0, shift_ball_depth(n, eps))
                    for method in ball_methods:
                        for d in deltas:
                            if method == "greedy":
                                if samples is None:
                                    horizon = max(shift_ball_depth(m, e) for m in ns for e in epsilons)
                                    samples = sample_coordinates(cond, sample_count, seed, horizon,
                                                                 stream=(anchor_index,))
                                res = ball_cover_greedy(cond, samples, n, eps, d)
                                count, cov = res.count, res.covered_mass
                            else:
                                # disjoint cylinder traces: heaviest-first is the exact minimum
                                count, cov = count_from_classes(classes, d)
                                method = "oracle_cylinder"
                            rows.append(CountRow(anchor_index, "ball", n, eps, d, method, count, cov))
        return rows

    cell = unstable_cell(scheme, anchor)
    cond = disintegrate(mu, scheme, cell)
    if "partition" in formulas:
        masses = leaf_itinerary(system, xi, cell, max(ns), budget).masses_by_horizon()
        for n in ns:
            for d in deltas:
                count, cov = count_from_masses(masses[n], d)
                rows.append(CountRow(anchor_index, "partition", n, 0.0, d, "partition", count, cov))
    if "ball" in formulas:
        samples = None
        for eps in epsilons:
            for n in ns:
                for method in ball_methods:
                    for d in deltas:
                        if method == "greedy":
                            if samples is None:
                                samples = sample_coordinates(cond, sample_count, seed,
                                                             stream=(anchor_index,))
                            res = ball_cover_greedy(cond, samples, n, eps, d)
                        else:
                            res = ball_cover_oracle_interval(cond, n, eps, d)
                        rows.append(CountRow(anchor_index, "ball", n, eps, d, res.method,
                                             res.count, res.covered_mass))
    return rows


def summarize(rows, window) -> tuple:
    """Per-anchor slope fits and their median / interquartile range per series."""
    series = defaultdict(list)
    for r in rows:
        series[(r.formula, r.method, r.epsilon, r.delta, r.anchor_index)].append((r.n, r.count))
    estimates = {key: entropy_from_counts(pts, window) for key, pts in sorted(series.items())}
    grouped = defaultdict(list)
    for (formula, method, eps, d, _), est in estimates.items():
        grouped[(formula, method, eps, d)].append(est.slope)
    summary = []
    for (formula, method, eps, d), slopes in sorted(grouped.items()):
        q25, q50, q75 = np.percentile(slopes, [25, 50, 75])
        summary.append(SummaryRow(formula, method, eps, d, float(q50), float(q75 - q25), len(slopes)))
    return estimates, tuple(summary)


def katok_estimate(system, mu, scheme, xi=None, epsilons=(), delta=0.1, n_window=(8, 14),
                   anchors: int = 32, seed: int = 0, formulas=("partition",),
                   ball_methods=("oracle_interval",), sample_count: int = 100_000,
                   budget: int = DEFAULT_BUDGET, executor=None) -> KatokResult:
    """Run the partition and/or ball formula on random anchor leaves and fit slopes.

    ``delta`` may be a single value or a sequence. ``executor`` (anything with
    an ordered ``map``) runs anchors concurrently; rows are merged by
    ``(anchor, formula, method, epsilon, delta, n)`` either way.
    """
    deltas = [check_delta(d) for d in np.atleast_1d(delta)]
    lo, hi = n_window
    ns = range(check_positive_int(lo, "n_min"), check_positive_int(hi, "n_max") + 1)
    if len(ns) < 3:
        raise WindowTooSmall(f"window {n_window} holds fewer than 3 values of n")
    if "partition" in formulas and xi is None:
        raise ValueError("the partition formula needs a partition xi")
    if "ball" in formulas and not epsilons:
        raise ValueError("the ball formula needs at least one epsilon")
    points = sample_anchors(system, check_positive_int(anchors, "anchors"), seed)

    task = partial(anchor_rows, system, mu, scheme, xi, ns=list(ns), epsilons=tuple(epsilons),
                   deltas=deltas, formulas=tuple(formulas), ball_methods=tuple(ball_methods),
                   sample_count=sample_count, seed=seed, budget=budget)
    mapper = executor.map if executor is not None else map
    rows = [r for chunk in mapper(task, range(len(points)), points) for r in chunk]
    rows.sort(key=lambda r: (r.anchor_index, r.formula, r.method, r.epsilon, r.delta, r.n))
    estimates, summary = summarize(rows, (lo, hi))
    return KatokResult(tuple(rows), estimates, summary)


__all__ = [
    "CountRow", "CoverResult", "EntropyEstimate", "KatokResult", "PartitionCountResult",
    "SummaryRow", "conditional_entropy_rate", "count_from_classes", "count_from_masses",
    "cylinder_mass_classes", "entropy_from_counts", "katok_estimate", "partition_count",
    "shift_partition_count", "smb_rate", "smb_rates",
]
