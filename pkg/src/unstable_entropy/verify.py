"""Sampled property suites run by ``unstable-entropy verify``.

Each suite draws its own reproducible random stream ``(seed, suite index)``
and reports how many checks it made and how many failed. Suites that do not
apply to the configured system are skipped with a notice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import make_rng
from .covers import (ball_cover_brute_force, interval_cover_greedy, oracle_interval_count)
from .errors import CoverageImpossible
from .estimators import count_from_classes, cylinder_mass_classes, partition_count
from .geometry import (ambient_bowen_gaps, estimate_metric_comparison, leaf_ball_radius,
                       torus_displacement)
from .measures import (conditional_mass, disintegrate,
                       uniform_on_interval, verify_disintegration)
from .partitions import (CylinderCell, in_boundary_neighborhood, leaf_itinerary, leaf_segments,
                         name_ball_bound, name_distance, name_of, refine_on_leaf, unstable_cell)
from .systems import ShiftModel, Word, push_forward

REL_TOL = 1e-9
ABS_TOL = 1e-12
SCALE_LEAF_METRIC = "scale_leaf_metric"


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    violations: int = 0
    seed: int = 0
    skipped: bool = False
    notice: str = ""
    example: str = ""

    @property
    def passed(self) -> bool:
        return self.skipped or self.violations == 0

    def line(self) -> str:
        if self.skipped:
            return f"SKIP  {self.name}: {self.notice}"
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name}: {self.checks} checks, {self.violations} violations, seed {self.seed}"
        if self.example:
            text += f" (first: {self.example})"
        return text


@dataclass
class VerifyContext:
    system: object
    mu: object
    scheme: object
    xi: object
    seed: int = 0
    pair_samples: int = 10_000
    triple_samples: int = 1_000
    anchor_samples: int = 100_000
    gamma: float = 0.01
    max_n: int = 10
    epsilon0: Optional[float] = None
    faults: frozenset = frozenset()

    @property
    def is_shift(self) -> bool:
        return isinstance(self.system, ShiftModel)

    def leaf_scale(self) -> float:
        return 0.5 if SCALE_LEAF_METRIC in self.faults else 1.0


@dataclass
class VerifyReport:
    suites: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def text(self) -> str:
        lines = [s.line() for s in self.suites]
        failed = [s.name for s in self.suites if not s.passed]
        lines.append("overall: " + ("PASS" if not failed else "FAIL (" + ", ".join(failed) + ")"))
        return "\n".join(lines) + "\n"


def _count(result: SuiteResult, bad, describe: Callable = None):
    bad = np.asarray(bad, dtype=bool).reshape(-1)
    result.checks += bad.size
    nbad = int(bad.sum())
    if nbad and not result.violations and describe is not None:
        result.example = describe(int(np.flatnonzero(bad)[0]))
    result.violations += nbad


def _leaf_pairs(ctx, rng, count, gap_of_n=None):
    """Anchors, per-pair horizons and two leaf coordinates on each anchor's piece."""
    model = ctx.system
    anchors = rng.random((count, model.dimension))
    origins, lengths, _, _ = leaf_segments(ctx.scheme, anchors)
    ns = rng.integers(1, ctx.max_n + 1, size=count)
    t1 = rng.random(count) * lengths
    gap = gap_of_n(ns) if gap_of_n is not None else lengths
    t2 = np.clip(t1 + (2.0 * rng.random(count) - 1.0) * gap, 0.0, lengths)
    u = model.unstable_dirs[0]
    p = np.mod(origins + t1[:, None] * u, 1.0)
    q = np.mod(origins + t2[:, None] * u, 1.0)
    return ns, t1, t2, p, q


def _bowen_by_n(model, p, q, ns):
    out = np.empty(len(ns))
    for n in np.unique(ns):
        sel = ns == n
        out[sel] = ambient_bowen_gaps(model, p[sel], q[sel], int(n))
    return out


def _lam(model):
    return math.exp(float(model.unstable_logs[0]))


# ---------------------------------------------------------------------------
# geometry


def suite_metric_comparison(ctx, res, rng):
    """``d <= d^u <= C d`` on leaf pairs within leaf distance ``gamma``."""
    comp = estimate_metric_comparison(ctx.scheme, ctx.gamma, ctx.pair_samples, res.seed)
    _, t1, t2, p, q = _leaf_pairs(ctx, rng, ctx.pair_samples, lambda ns: ctx.gamma)
    d = np.linalg.norm(torus_displacement(p, q), axis=-1)
    du = ctx.leaf_scale() * np.abs(t1 - t2)
    bad = (d > du * (1 + REL_TOL) + ABS_TOL) | (du > comp.C * d * (1 + REL_TOL) + ABS_TOL)
    _count(res, bad, lambda j: f"d={d[j]:.6g}, d^u={du[j]:.6g}, C={comp.C:.10g}")


def suite_leaf_ball_in_ambient_ball(ctx, res, rng):
    """``B^u_n(x, gamma)`` lies inside ``B_n(x, gamma)`` for ``n <= max_n``."""
    model = ctx.system
    lam = _lam(model)
    ns, t1, t2, p, q = _leaf_pairs(ctx, rng, ctx.pair_samples,
                                   lambda ns: ctx.gamma * lam ** -(ns - 1.0))
    du_n = ctx.leaf_scale() * np.abs(t1 - t2) * lam ** (ns - 1.0)
    d_n = _bowen_by_n(model, p, q, ns)
    inside = du_n < ctx.gamma
    res.checks += int(inside.sum())
    bad = inside & (d_n >= ctx.gamma * (1 + REL_TOL))
    res.violations += int(bad.sum())
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        res.example = f"n={ns[j]}, d^u_n={du_n[j]:.6g}, d_n={d_n[j]:.6g}"


def suite_ambient_ball_in_leaf_ball(ctx, res, rng):
    """``B_n(y, eps/C)`` meets the piece inside ``B^u_n(y, eps)``."""
    model = ctx.system
    lam = _lam(model)
    eps0 = ctx.epsilon0 if ctx.epsilon0 is not None else ctx.xi.diameter
    comp = estimate_metric_comparison(ctx.scheme, ctx.gamma, ctx.pair_samples, res.seed)
    count = ctx.triple_samples
    eps = eps0 * (0.05 + 0.95 * rng.random(count))
    # z is drawn near y so that the premise holds for a good share of triples
    ns, t1, t2, p, q = _leaf_pairs(ctx, rng, count,
                                   lambda ns: 1.2 * eps / comp.C * lam ** -(ns - 1.0))
    d_n = _bowen_by_n(model, p, q, ns)
    du_n = ctx.leaf_scale() * np.abs(t1 - t2) * lam ** (ns - 1.0)
    premise = d_n < eps / comp.C
    res.checks += int(premise.sum())
    bad = premise & (du_n >= eps * (1 + REL_TOL))
    res.violations += int(bad.sum())
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        res.example = f"n={ns[j]}, eps={eps[j]:.4g}, d_n={d_n[j]:.6g}, d^u_n={du_n[j]:.6g}"


def suite_bowen_monotone(ctx, res, rng):
    """``d_n`` and ``d^u_n`` never decrease with ``n``."""
    model = ctx.system
    lam = _lam(model)
    _, t1, t2, p, q = _leaf_pairs(ctx, rng, min(ctx.pair_samples, 2000))
    prev = ambient_bowen_gaps(model, p, q, 1)
    prev_u = np.abs(t1 - t2)
    for n in range(2, ctx.max_n + 1):
        cur = ambient_bowen_gaps(model, p, q, n)
        cur_u = np.abs(t1 - t2) * lam ** (n - 1)
        _count(res, (cur < prev) | (cur_u < prev_u))
        prev, prev_u = cur, cur_u


# ---------------------------------------------------------------------------
# partitions


def _random_cells(ctx, rng, count):
    if ctx.is_shift:
        m = ctx.system.alphabet_size
        return [CylinderCell(ctx.scheme, Word(tuple(int(s) for s in rng.integers(0, m, 3)), -2))
                for _ in range(count)]
    return [unstable_cell(ctx.scheme, x) for x in rng.random((count, ctx.system.dimension))]


def suite_eta_consistency(ctx, res, rng):
    """Two leaf pieces sharing a positive-length stretch are the same piece."""
    model = ctx.system
    count = min(ctx.triple_samples, 1000)
    cells = _random_cells(ctx, rng, count)
    bad = []
    for cell in cells:
        if ctx.is_shift:
            future = tuple(int(s) for s in rng.integers(0, model.alphabet_size, 4))
            other = unstable_cell(ctx.scheme, Word(cell.past.symbols + future, cell.past.start))
        else:
            t = rng.random() * cell.length
            other = unstable_cell(ctx.scheme, np.mod(cell.point(t), 1.0))
        bad.append(not cell.same_as(other))
    _count(res, bad)


def _horizons(rng, count, top):
    return [int(v) for v in rng.integers(1, top + 1, size=count)]


def suite_tiling(ctx, res, rng):
    """Refined traces tile the piece: lengths (or masses) add up to the whole."""
    cells = _random_cells(ctx, rng, 20)
    for cell, n in zip(cells, _horizons(rng, 20, 8)):
        if ctx.is_shift:
            cond = disintegrate(ctx.mu, ctx.scheme, cell)
            traces = refine_on_leaf(ctx.system, ctx.xi, cell, min(n, 10))
            total = math.fsum(conditional_mass(cond, c) for c in traces)
            _count(res, [abs(total - 1.0) > REL_TOL])
        else:
            traces = refine_on_leaf(ctx.system, ctx.xi, cell, n)
            total = math.fsum(c.length for c in traces)
            _count(res, [abs(total - cell.length) > REL_TOL * cell.length])


def suite_name_coherence(ctx, res, rng):
    """Points drawn inside a trace carry that trace's name."""
    model, xi = ctx.system, ctx.xi
    for cell, n in zip(_random_cells(ctx, rng, 5), _horizons(rng, 5, 6)):
        traces = refine_on_leaf(model, xi, cell, n)
        pick = rng.permutation(len(traces))[:20]
        for j in pick:
            tr = traces[j]
            for _ in range(10):
                if ctx.is_shift:
                    word = Word(cell.past.symbols + tr.cylinder, cell.past.start)
                    got = name_of(model, xi, word, n)
                else:
                    lo, hi = tr.trace[int(rng.integers(len(tr.trace)))]
                    if hi - lo < 1e-9:
                        continue
                    t = lo + (hi - lo) * (0.001 + 0.998 * rng.random())
                    got = name_of(model, xi, np.mod(cell.point(t), 1.0), n)
                want = tuple(tr.name) if ctx.is_shift else tuple(int(v) for v in tr.name)
                _count(res, [got != want])


def suite_refinement_monotone(ctx, res, rng):
    """Every ``(n+1)``-trace sits inside exactly one ``n``-trace."""
    model, xi = ctx.system, ctx.xi
    for cell, n in zip(_random_cells(ctx, rng, 10), _horizons(rng, 10, 7)):
        if ctx.is_shift:
            coarse = {c.cylinder: c.name for c in refine_on_leaf(model, xi, cell, n)}
            for c in refine_on_leaf(model, xi, cell, n + 1):
                parent = coarse.get(c.cylinder[:len(c.cylinder) - 1])
                _count(res, [parent is None or tuple(parent) != tuple(c.name[:n])])
            continue
        fine = leaf_itinerary(model, xi, cell, n + 1)
        coarse = leaf_itinerary(model, xi, cell, n)
        mids = 0.5 * (fine.edges[:-1] + fine.edges[1:])
        j = np.searchsorted(coarse.edges, mids, side="right") - 1
        inside = np.isin(coarse.edges, fine.edges)
        _count(res, ~inside)
        _count(res, np.any(coarse.codes[j] != fine.codes[:, :n], axis=1))


def suite_name_pseudometric(ctx, res, rng):
    """``name_distance`` is symmetric, zero on the diagonal and satisfies the triangle inequality."""
    card = ctx.xi.cardinality
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        a, b, c = (tuple(int(v) for v in rng.integers(0, min(card, 4), n)) for _ in range(3))
        dab, dba = name_distance(a, b), name_distance(b, a)
        bad = dab != dba or name_distance(a, a) != 0 or \
            name_distance(a, c) > dab + name_distance(b, c) + ABS_TOL
        _count(res, [bad])


def suite_name_ball_bridge(ctx, res, rng, eps=0.2):
    """Close leaf orbits that mostly avoid cell walls have close names."""
    model, xi = ctx.system, ctx.xi
    gamma = min(ctx.gamma, 0.49 / xi.k)
    lam = _lam(model)
    count = min(ctx.triple_samples, 1000)
    ns, t1, t2, p, q = _leaf_pairs(ctx, rng, count, lambda ns: gamma * lam ** -(ns - 1.0))
    for j in range(count):
        n = int(ns[j])
        if abs(t1[j] - t2[j]) * lam ** (n - 1) >= gamma:
            continue
        orbit = np.array([push_forward(model, p[j], i) for i in range(n)]).reshape(n, -1)
        avoid = 1.0 - in_boundary_neighborhood(xi, orbit, gamma).mean()
        if avoid < 1.0 - eps:
            continue
        dist = name_distance(name_of(model, xi, p[j], n), name_of(model, xi, q[j], n))
        _count(res, [dist > eps + ABS_TOL])


def suite_stirling_bound(ctx, res, rng):
    """The exact name-ball count never exceeds its exponential majorant."""
    for card in (2, 4, 8, 16):
        for k in range(1, 11):
            eps = round(0.05 * k, 2)
            for n in range(1, 61):
                direct, bound = name_ball_bound(n, eps, card)
                _count(res, [direct > bound])


# ---------------------------------------------------------------------------
# measures


def suite_normalization(ctx, res, rng):
    """Every conditional measure gives its whole piece mass 1."""
    for cell in _random_cells(ctx, rng, 200):
        cond = disintegrate(ctx.mu, ctx.scheme, cell)
        whole = conditional_mass(cond, () if ctx.is_shift else (0.0, cell.length))
        _count(res, [abs(whole - 1.0) > ABS_TOL or abs(cond.total_mass - 1.0) > ABS_TOL])


def disintegration_battery(system):
    """Five fixed test sets per model."""
    if isinstance(system, ShiftModel):
        m = system.alphabet_size
        return [{}, {1: 0}, {1: m - 1, 2: 0}, {0: 0, 3: m - 1}, {-1: 0, 2: m - 1}]
    d = system.dimension
    return [
        (np.zeros(d), np.ones(d)),
        (np.zeros(d), np.r_[0.5, np.ones(d - 1)]),
        (np.full(d, 0.2), np.full(d, 0.45)),
        (np.full(d, 0.13), np.full(d, 0.87)),
        (np.r_[0.3, np.zeros(d - 1)], np.r_[0.35, np.full(d - 1, 0.6)]),
    ]


def suite_disintegration(ctx, res, rng):
    """``mu(B)`` equals the average of exact conditional masses (3 sigma)."""
    for j, region in enumerate(disintegration_battery(ctx.system)):
        check = verify_disintegration(ctx.mu, ctx.scheme, region, ctx.anchor_samples, res.seed + j)
        _count(res, [not check.passed], lambda _: f"set {j}: error {check.relative_error:.3g} "
                                                  f"> bound {check.bound:.3g}")


def suite_invariance(ctx, res, rng):
    """Pushing Lebesgue samples forward keeps grid-cell frequencies."""
    model, xi = ctx.system, ctx.xi
    count = ctx.anchor_samples
    x = push_forward(model, rng.random((count, model.dimension)), 1)
    freq = np.bincount(xi.cell_index(x), minlength=xi.cardinality) / count
    cell_mass = 1.0 / xi.cardinality
    _count(res, np.abs(freq - cell_mass) > 4.0 * math.sqrt(cell_mass / count))


def suite_leaf_constancy(ctx, res, rng):
    """Points of one piece share the same conditional measure."""
    for cell in _random_cells(ctx, rng, 200):
        a = disintegrate(ctx.mu, ctx.scheme, cell)
        if ctx.is_shift:
            future = tuple(int(s) for s in rng.integers(0, ctx.system.alphabet_size, 3))
            y = Word(cell.past.symbols + future, cell.past.start)
        else:
            y = np.mod(cell.point(rng.random() * cell.length), 1.0)
        b = disintegrate(ctx.mu, ctx.scheme, y)
        _count(res, [not (a.support.same_as(b.support) and a.density_kind == b.density_kind)])


# ---------------------------------------------------------------------------
# estimators


def suite_minimality(ctx, res, rng, delta=0.1):
    """Dropping the last chosen cell leaves less than ``1 - delta``."""
    for cell, n in zip(_random_cells(ctx, rng, 10), _horizons(rng, 10, 8)):
        cond = disintegrate(ctx.mu, ctx.scheme, cell)
        cells = refine_on_leaf(ctx.system, ctx.xi, cell, n)
        result = partition_count(cond, cells, delta)
        masses = sorted((conditional_mass(cond, c) for c in cells), reverse=True)
        before = math.fsum(masses[:result.count - 1])
        after = math.fsum(masses[:result.count])
        _count(res, [not (before < 1 - delta - 1e-12 <= after)])


def suite_cover_dominance(ctx, res, rng, instances=200):
    """Exhaustive minimum <= greedy; dense greedy <= interval oracle + 1."""
    for _ in range(instances):
        m = int(rng.integers(1, 21))
        centers = rng.random(m)
        r = 0.02 + 0.13 * rng.random()
        cond = uniform_on_interval(1.0)
        traces = np.c_[centers - r, centers + r]
        lo, hi = np.clip(traces[:, 0], 0, 1), np.clip(traces[:, 1], 0, 1)
        reach = _union_length(lo, hi)
        delta = 1.0 - reach * (0.3 + 0.7 * rng.random())
        try:
            greedy = interval_cover_greedy(cond, centers, r, delta)
        except CoverageImpossible:
            continue
        brute = ball_cover_brute_force(cond, traces, delta)
        _count(res, [brute.count > greedy.count])
    for _ in range(50):
        r = 0.01 + 0.1 * rng.random()
        delta = 0.05 + 0.5 * rng.random()
        greedy = interval_cover_greedy(uniform_on_interval(1.0), np.linspace(0, 1, 4001), r, delta)
        _count(res, [greedy.count > oracle_interval_count(1.0, r, delta) + 1])


def _union_length(lo, hi):
    order = np.argsort(lo)
    total, cur_lo, cur_hi = 0.0, None, None
    for a, b in zip(lo[order], hi[order]):
        if cur_hi is None or a > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    return total + (cur_hi - cur_lo if cur_hi is not None else 0.0)


def suite_count_monotone(ctx, res, rng):
    """Counts do not increase with ``delta`` (partitions) or ``epsilon`` (balls)."""
    deltas = (0.05, 0.1, 0.25, 0.5)
    for cell, n in zip(_random_cells(ctx, rng, 10), _horizons(rng, 10, 8)):
        cond = disintegrate(ctx.mu, ctx.scheme, cell)
        cells = refine_on_leaf(ctx.system, ctx.xi, cell, n)
        counts = [partition_count(cond, cells, d).count for d in deltas]
        _count(res, [a < b for a, b in zip(counts, counts[1:])])
        if ctx.is_shift:
            continue
        for d in deltas:
            balls = [oracle_interval_count(cell.length, leaf_ball_radius(ctx.system, n, e), d)
                     for e in (0.025, 0.05, 0.1)]
            _count(res, [a > b for a, b in zip(balls[1:], balls)])


def suite_smb_partition_bridge(ctx, res, rng, delta=0.25):
    """``log count / n`` sits within the pointwise-rate range plus the delta margin."""
    model = ctx.system
    probs = np.asarray(model.probabilities) if model.kind == "bernoulli" else None
    if probs is None or not np.allclose(probs, probs[0]):
        res.skipped = True
        res.notice = "closed forms on both sides need a uniform Bernoulli shift"
        return
    for n in range(1, 31):
        depth = n + ctx.xi.length - 2
        classes = cylinder_mass_classes(model, 0, depth)
        count, _ = count_from_classes(classes, delta)
        rates = [-math.log(float(m)) / n for m in classes]
        margin = 2.0 / n * math.log(1.0 / (1.0 - delta))
        value = math.log(count) / n
        _count(res, [not (min(rates) - margin <= value <= max(rates) + margin)])


SUITES = [
    ("d <= d^u on leaf pairs", suite_metric_comparison, "geometry"),
    ("leaf Bowen ball inside ambient Bowen ball", suite_leaf_ball_in_ambient_ball, "geometry"),
    ("ambient Bowen ball on a piece inside leaf Bowen ball", suite_ambient_ball_in_leaf_ball, "geometry"),
    ("Bowen metrics monotone in n", suite_bowen_monotone, "geometry"),
    ("leaf pieces consistent", suite_eta_consistency, "partition"),
    ("traces tile the piece", suite_tiling, "partition"),
    ("name coherence", suite_name_coherence, "partition"),
    ("refinement monotone", suite_refinement_monotone, "partition"),
    ("name distance is a pseudometric", suite_name_pseudometric, "any"),
    ("name/ball bridge", suite_name_ball_bridge, "geometry"),
    ("name-ball Stirling bound", suite_stirling_bound, "any"),
    ("conditional normalization", suite_normalization, "partition"),
    ("disintegration identity", suite_disintegration, "partition"),
    ("Lebesgue invariance", suite_invariance, "geometry"),
    ("leaf constancy of conditionals", suite_leaf_constancy, "partition"),
    ("partition count minimality", suite_minimality, "partition"),
    ("cover oracle dominance", suite_cover_dominance, "any"),
    ("counts monotone in delta and epsilon", suite_count_monotone, "partition"),
    ("pointwise rate / count consistency", suite_smb_partition_bridge, "shift"),
]


def run_suites(ctx: VerifyContext, only=None) -> VerifyReport:
    """Run every applicable suite; geometry suites are skipped on shifts."""
    report = VerifyReport()
    for index, (name, fn, scope) in enumerate(SUITES):
        if only is not None and name not in only:
            continue
        res = SuiteResult(name, seed=(ctx.seed * 1000 + index) & 0xFFFFFFFFFFFFFFFF)
        if scope == "geometry" and ctx.is_shift:
            res.skipped, res.notice = True, "needs a torus leaf geometry"
        elif scope == "shift" and not ctx.is_shift:
            res.skipped, res.notice = True, "needs a shift with closed-form cylinder masses"
        else:
            fn(ctx, res, make_rng(res.seed, 99))
        report.suites.append(res)
    return report


__all__ = ["SuiteResult", "VerifyContext", "VerifyReport", "run_suites", "SUITES",
           "SCALE_LEAF_METRIC", "disintegration_battery"]
