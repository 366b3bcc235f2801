import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unstable_entropy import Word, apply, build_linear_model, build_shift_model, leaf_chart
from unstable_entropy.errors import (NotUnimodular, NoUnstableDirection,
                                     UnsupportedSpectrum, WindowTooShort)
from unstable_entropy.geometry import ambient_distance

from conftest import LAMBDA, LOG_LAMBDA

GOLDEN = (1 + math.sqrt(5)) / 2


def test_cat_map_spectrum(cat):
    assert cat.unstable_logs[0] == pytest.approx(0.9624236501192069, abs=1e-12)
    assert cat.unstable_logs[0] == pytest.approx(LOG_LAMBDA, abs=1e-12)
    assert len(cat.stable_dirs) == 1 and len(cat.center_dirs) == 0


def test_identity_has_no_unstable_direction():
    with pytest.raises(NoUnstableDirection):
        build_linear_model([[1, 0], [0, 1]])


def test_rejections():
    with pytest.raises(NotUnimodular):
        build_linear_model([[2, 0], [0, 1]])
    with pytest.raises(NoUnstableDirection):
        build_linear_model([[1, 1], [0, 1]])


def test_repeated_unstable_eigenvalue_rejected():
    block = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]]
    with pytest.raises(UnsupportedSpectrum):
        build_linear_model(block)


def test_block_model_splitting():
    m = build_linear_model([[2, 1, 0], [1, 1, 0], [0, 0, 1]])
    assert m.dimension == 3
    assert (len(m.unstable_dirs), len(m.center_dirs), len(m.stable_dirs)) == (1, 1, 1)
    assert m.unstable_logs[0] == pytest.approx(LOG_LAMBDA, abs=1e-12)


def test_apply_examples(cat):
    np.testing.assert_allclose(apply(cat, [0.5, 0.5], 1), [0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(apply(cat, [0.5, 0.0], -1), [0.5, 0.5], atol=1e-15)
    # [[5, 3], [3, 2]] (0.1, 0.2) = (1.1, 0.7)
    two = apply(cat, [0.1, 0.2], 2)
    np.testing.assert_allclose(two, [0.1, 0.7], atol=1e-12)
    np.testing.assert_allclose(apply(cat, apply(cat, [0.1, 0.2], 1), 1), two, atol=1e-12)


def test_apply_shift_window():
    w = Word((0, 1, 1, 0), start=-1)
    out = apply(build_shift_model(probabilities=[0.5, 0.5]), w, 1)
    assert out[0] == 1 and out[-2] == 0


def test_shift_window_too_short():
    with pytest.raises(WindowTooShort):
        Word((0, 1), start=0)[5]


def test_leaf_chart_examples(cat):
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(leaf_chart(cat, x, 0.0), x)
    u = np.array([GOLDEN, 1.0]) / math.hypot(GOLDEN, 1.0)
    np.testing.assert_allclose(leaf_chart(cat, [0.0, 0.0], 0.1), 0.1 * u, atol=1e-12)


def test_leaf_chart_wraps():
    m = build_linear_model([[2, 1], [1, 1]])
    u = m.unstable_dirs[0]
    t = 0.1 / u[0]
    p = leaf_chart(m, [0.95, 0.0], t)
    assert p[0] == pytest.approx(0.05, abs=1e-12)


def test_identity_string_is_pure():
    a = build_linear_model([[2, 1], [1, 1]]).identity
    b = build_linear_model([[2, 1], [1, 1]]).identity
    assert a == b
    assert build_shift_model(probabilities=[0.3, 0.7]).identity != \
        build_shift_model(probabilities=[0.7, 0.3]).identity


def test_rebuild_is_bitwise_identical():
    a = build_linear_model([[2, 1], [1, 1]])
    b = build_linear_model([[2, 1], [1, 1]])
    assert a.unstable_dirs.tobytes() == b.unstable_dirs.tobytes()
    assert a.unstable_logs.tobytes() == b.unstable_logs.tobytes()


def test_shift_validation():
    with pytest.raises(ValueError):
        build_shift_model(probabilities=[0.5, 0.6])
    with pytest.raises(ValueError):
        build_shift_model(probabilities=[1.2, -0.2])
    m = build_shift_model(transition=[[0.9, 0.1], [0.4, 0.6]])
    np.testing.assert_allclose(m.stationary @ m.transition, m.stationary, atol=1e-10)


points = st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))


@settings(max_examples=200, deadline=None)
@given(points, st.floats(-0.3, 0.3))
def test_conjugation_identity(x, t):
    cat = build_linear_model([[2, 1], [1, 1]])
    lhs = apply(cat, leaf_chart(cat, x, t), 1)
    rhs = leaf_chart(cat, apply(cat, x, 1), LAMBDA * t)
    assert ambient_distance(cat, lhs, rhs) < 1e-10


@settings(max_examples=200, deadline=None)
@given(points, st.integers(0, 20))
def test_apply_inverse_exact(x, k):
    cat = build_linear_model([[2, 1], [1, 1]])
    exact = tuple(Fraction(c) for c in x)
    back = apply(cat, apply(cat, exact, -k), k)
    assert back == exact
    # float round trips lose about lambda**k ulps
    fb = apply(cat, apply(cat, x, -k), k)
    assert ambient_distance(cat, fb, x) < 1e-10 + 4 * LAMBDA**k * 2.0**-53
