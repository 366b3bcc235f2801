import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unstable_entropy import (build_grid, build_unstable_scheme, name_ball_bound, name_distance,
                              name_of, refine_on_leaf, unstable_cell)
from unstable_entropy.errors import (BudgetExceeded, DiameterExceeded, EpsilonOutOfRange,
                                     LengthMismatch, ThetaTooLarge)
from unstable_entropy.partitions import boundary_mass, leaf_itinerary
from unstable_entropy.systems import Word

from conftest import LAMBDA, shift_setup


def test_build_grid_examples():
    g = build_grid(10, 0.15)
    assert g.diameter == pytest.approx(0.1414214, abs=1e-7)
    assert g.cardinality == 100
    with pytest.raises(DiameterExceeded):
        build_grid(5, 0.15)


def test_scheme_leaf_longer_than_diameter(cat, grid10):
    scheme = build_unstable_scheme(cat, grid10)
    assert 2 * scheme.leaf_halflength > grid10.diameter
    with pytest.raises(ValueError):
        build_unstable_scheme(cat, grid10, leaf_halflength=0.05)


def test_unstable_cell_center(cat_scheme):
    cell = unstable_cell(cat_scheme, [0.05, 0.05])
    assert 0 < cell.anchor_t < cell.length
    # the nearest grid crossings on either side are within the cell diagonal
    assert cell.anchor_t <= 0.1 * math.sqrt(2)
    assert cell.length - cell.anchor_t <= 0.1 * math.sqrt(2)
    # endpoints lie on grid lines
    ends = np.array([cell.point(0.0), cell.point(cell.length)]) * 10
    assert np.all(np.min(np.abs(ends - np.round(ends)), axis=1) < 1e-9)


def test_same_piece_gives_same_cell(cat, cat_scheme):
    a = unstable_cell(cat_scheme, [0.05, 0.05])
    b = unstable_cell(cat_scheme, a.point(a.anchor_t + 0.02))
    assert a.same_as(b)


def test_refine_n1_single_cell(cat, grid10, cat_scheme):
    cell = unstable_cell(cat_scheme, [0.43, 0.71])
    cells = refine_on_leaf(cat, grid10, cell, 1)
    assert len(cells) == 1
    assert cells[0].trace == ((0.0, cell.length),)


def test_refine_bernoulli(coin):
    _, xi, scheme = shift_setup(coin)
    cells = refine_on_leaf(coin, xi, unstable_cell(scheme, Word((0,), 0)), 3)
    assert [c.name for c in cells] == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]


@pytest.mark.parametrize("x, n", [([0.05, 0.05], 4), ([0.31, 0.77], 6), ([0.62, 0.18], 8)])
def test_crossing_count_oracle(cat, grid10, cat_scheme, x, n):
    cell = unstable_cell(cat_scheme, x)
    it = leaf_itinerary(cat, grid10, cell, n)
    pieces = len(it.edges) - 1
    u = np.abs(cat.unstable_dirs[0]).sum()
    expected = [cell.length * LAMBDA**i * 10 * u for i in range(n)]
    assert abs(pieces - 1 - sum(expected)) <= 2 * n


def test_crossings_match_point_sampling(cat, grid10, cat_scheme):
    # brute force: walk dense leaf points and count name changes
    cell = unstable_cell(cat_scheme, [0.31, 0.77])
    n = 4
    it = leaf_itinerary(cat, grid10, cell, n)
    ts = np.linspace(0, cell.length, 20001)[1:-1]
    names = [name_of(cat, grid10, cell.point(t), n) for t in ts]
    runs = 1 + sum(a != b for a, b in zip(names, names[1:]))
    assert runs == len(it.edges) - 1


def test_budget(cat, grid10, cat_scheme):
    cell = unstable_cell(cat_scheme, [0.31, 0.77])
    with pytest.raises(BudgetExceeded):
        refine_on_leaf(cat, grid10, cell, 20, budget=1000)


def test_name_of_fixed_point(cat, grid10):
    assert name_of(cat, grid10, [0.0, 0.0], 5) == (0,) * 5
    assert name_of(cat, grid10, [0.55, 0.25], 1) == (grid10.cell_index(np.array([[0.55, 0.25]]))[0],)


def test_name_distance_examples():
    assert name_distance((1, 2, 3), (1, 2, 3)) == 0
    assert name_distance((1, 2, 3), (4, 5, 6)) == 1
    assert name_distance((1, 2, 3, 4, 5), (1, 0, 3, 0, 5)) == 0.4
    with pytest.raises(LengthMismatch):
        name_distance((1,), (1, 2))


def test_boundary_mass_examples():
    assert boundary_mass(build_grid(10, 0.15), 0.0) == 0.0
    assert boundary_mass(build_grid(10, 0.15), 0.01) == pytest.approx(0.36)
    assert boundary_mass(build_grid(4, 0.3, dimension=1), 0.05) == pytest.approx(0.4)
    with pytest.raises(ThetaTooLarge):
        boundary_mass(build_grid(10, 0.15), 0.05)


def test_name_ball_bound_examples():
    direct, bound = name_ball_bound(10, 0.1, 4)
    assert direct == 41
    # exp((0.1 + 0.1 log 4 - 0.1 log 0.1 - 0.9 log 0.9) * 10)
    assert bound == pytest.approx(280.6546, abs=1e-3)
    assert bound == pytest.approx(280.67, abs=0.02)
    assert name_ball_bound(5, 0.1, 2)[0] == 1
    with pytest.raises(EpsilonOutOfRange):
        name_ball_bound(10, 0.6, 4)


def test_tiling_and_monotone_refinement(cat, grid10, rng):
    scheme = build_unstable_scheme(cat, grid10)
    for x in rng.random((10, 2)):
        cell = unstable_cell(scheme, x)
        coarse = refine_on_leaf(cat, grid10, cell, 5)
        fine = refine_on_leaf(cat, grid10, cell, 6)
        assert sum(c.length for c in fine) == pytest.approx(cell.length, rel=1e-9)
        for c in fine:
            parents = [p for p in coarse if p.name == c.name[:5]]
            assert len(parents) == 1
            for lo, hi in c.trace:
                assert any(plo - 1e-12 <= lo and hi <= phi + 1e-12 for plo, phi in parents[0].trace)


def test_name_coherence(cat, grid10, rng):
    scheme = build_unstable_scheme(cat, grid10)
    cell = unstable_cell(scheme, [0.27, 0.64])
    for c in refine_on_leaf(cat, grid10, cell, 5):
        for lo, hi in c.trace:
            for t in lo + (hi - lo) * (0.05 + 0.9 * rng.random(3)):
                assert name_of(cat, grid10, cell.point(t), 5) == c.name


names = st.lists(st.integers(0, 3), min_size=6, max_size=6)


@settings(max_examples=200, deadline=None)
@given(names, names, names)
def test_name_distance_pseudometric(a, b, c):
    assert name_distance(a, b) == name_distance(b, a)
    assert name_distance(a, c) <= name_distance(a, b) + name_distance(b, c) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 60), st.sampled_from([0.05 * j for j in range(1, 11)]),
       st.sampled_from([2, 4, 8, 16]))
def test_stirling_bound_property(n, eps, card):
    direct, bound = name_ball_bound(n, eps, card)
    assert direct <= bound * (1 + 1e-12)
