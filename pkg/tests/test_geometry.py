import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unstable_entropy import (LeafPoint, ambient_distance, apply, bowen_distance,
                              estimate_metric_comparison, unstable_ball_trace,
                              unstable_bowen_distance, unstable_cell, unstable_distance)
from unstable_entropy.errors import DifferentLeaf
from unstable_entropy.geometry import BowenBallSpec, MetricComparison, leaf_ball_radius
from unstable_entropy.systems import Word

from conftest import LAMBDA, shift_setup


def test_ambient_distance_examples(cat):
    assert ambient_distance(cat, [0.1, 0.1], [0.9, 0.1]) == pytest.approx(0.2)
    assert ambient_distance(cat, [0.3, 0.4], [0.3, 0.4]) == 0.0
    assert ambient_distance(cat, [0, 0], [0.5, 0.5]) == pytest.approx(0.7071068, abs=1e-7)


def test_unstable_distance_examples(cat_scheme):
    cell = unstable_cell(cat_scheme, [0.05, 0.05])
    a, b = LeafPoint(cell, 0.01), LeafPoint(cell, 0.04)
    assert unstable_distance(a, a) == 0.0
    assert unstable_distance(a, b) == pytest.approx(0.03)


def test_shift_ultrametric(coin):
    _, _, scheme = shift_setup(coin)
    cell = unstable_cell(scheme, Word((1,), 0))
    a = LeafPoint(cell, (0, 1, 1, 0, 1, 0, 0))
    b = LeafPoint(cell, (0, 1, 1, 0, 1, 1, 0))
    assert unstable_distance(a, b) == 2.0 ** -6


def test_different_leaf(cat_scheme):
    c1 = unstable_cell(cat_scheme, [0.05, 0.05])
    c2 = unstable_cell(cat_scheme, [0.55, 0.55])
    with pytest.raises(DifferentLeaf):
        unstable_distance(LeafPoint(c1, 0.0), LeafPoint(c2, 0.0))


def test_unstable_bowen_distance(cat, cat_scheme):
    cell = unstable_cell(cat_scheme, [0.05, 0.05])
    a, b = LeafPoint(cell, 0.010), LeafPoint(cell, 0.011)
    assert unstable_bowen_distance(cat, a, b, 1) == pytest.approx(unstable_distance(a, b))
    assert unstable_bowen_distance(cat, a, b, 3) == pytest.approx(0.006854102, abs=1e-9)
    assert unstable_bowen_distance(cat, a, a, 7) == 0.0


def test_bowen_distance_examples(cat):
    p, q = np.array([0.2, 0.3]), np.array([0.25, 0.31])
    assert bowen_distance(cat, p, q, 1) == pytest.approx(ambient_distance(cat, p, q))
    assert bowen_distance(cat, p, p, 5) == 0.0


def test_bowen_distance_against_iteration(cat):
    u = cat.unstable_dirs[0]
    p, q = np.zeros(2), 0.001 * u
    direct = max(ambient_distance(cat, apply(cat, p, i), apply(cat, q, i)) for i in range(3))
    assert bowen_distance(cat, p, q, 3) == pytest.approx(direct, rel=1e-9)
    # on a leaf the ambient Bowen distance never exceeds the leaf one
    assert direct <= 0.001 * LAMBDA**2 * (1 + 1e-9)


def test_ball_trace(cat, cat_scheme):
    cell = unstable_cell(cat_scheme, [0.05, 0.05])
    mid = cell.length / 2
    lo, hi = unstable_ball_trace(cell, mid, 1, 0.01)
    assert (lo, hi) == pytest.approx((mid - 0.01, mid + 0.01))
    assert leaf_ball_radius(cat, 2, 0.1) == pytest.approx(0.0381966, abs=1e-7)
    assert unstable_ball_trace(cell, 0.0, 1, 0.14) == pytest.approx((0.0, cell.length))


def test_spec_validation():
    with pytest.raises(ValueError):
        BowenBallSpec(0, 0.1)
    with pytest.raises(ValueError):
        MetricComparison(1.0, 0.01)


def test_metric_comparison(cat_scheme):
    comp = estimate_metric_comparison(cat_scheme, 0.01, 2000, seed=3)
    assert 1.0 < comp.C < 1.0 + 1e-6


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_torus_triangle_inequality(a, b, c, d, e, f):
    from unstable_entropy import build_linear_model
    m = build_linear_model([[2, 1], [1, 1]])
    p, q, r = (a, b), (c, d), (e, f)
    assert ambient_distance(m, p, r) <= ambient_distance(m, p, q) + ambient_distance(m, q, r) + 1e-12
    assert ambient_distance(m, p, q) == pytest.approx(ambient_distance(m, q, p))
