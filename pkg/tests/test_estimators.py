import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unstable_entropy import (LeafPoint, conditional_entropy_rate, disintegrate,
                              entropy_from_counts, katok_estimate, partition_count,
                              refine_on_leaf, sample_conditional, smb_rate, unstable_cell)
from unstable_entropy.errors import MassDeficit, WindowTooSmall
from unstable_entropy.estimators import (count_from_classes, cylinder_mass_classes,
                                         shift_partition_count, smb_rates)
from unstable_entropy.covers import ball_cover_oracle_interval
from unstable_entropy.systems import Word

from conftest import LOG_LAMBDA, shift_setup


def shift_cells(model, x0, n):
    mu, xi, scheme = shift_setup(model)
    cond = disintegrate(mu, scheme, Word((x0,), 0))
    return cond, refine_on_leaf(model, xi, cond.support, n)


def test_partition_count_examples(coin, biased):
    cond, cells = shift_cells(coin, 0, 3)
    assert partition_count(cond, cells, 0.25).count == 3
    cond, cells = shift_cells(biased, 0, 3)
    res = partition_count(cond, cells, 0.3)
    assert res.count == 2 and res.covered_mass == pytest.approx(0.75)
    assert res.cells_used[0] == (0, 0, 0)
    assert partition_count(cond, cells, 1e-12).count == 4


def test_partition_count_mass_deficit(coin):
    cond, cells = shift_cells(coin, 0, 3)
    with pytest.raises(MassDeficit):
        partition_count(cond, cells[:3], 0.1)


def test_minimality_certificate(cat, grid10, leb, cat_scheme, rng):
    for x in rng.random((5, 2)):
        cond = disintegrate(leb, cat_scheme, x)
        cells = refine_on_leaf(cat, grid10, cond.support, 7)
        for delta in (0.05, 0.1, 0.25, 0.5):
            res = partition_count(cond, cells, delta)
            heavy = sorted((cond.support.length and c.length / cond.support.length for c in cells),
                           reverse=True)
            assert sum(heavy[:res.count]) >= 1 - delta - 1e-12
            assert sum(heavy[:res.count - 1]) < 1 - delta
            assert res.count <= len(cells)


def test_class_counts_match_enumeration(coin, markov):
    for model in (coin, markov):
        for n in range(2, 9):
            for x0 in (0, 1):
                cond, cells = shift_cells(model, x0, n)
                enum = partition_count(cond, cells, 0.25).count
                assert shift_partition_count(model, shift_setup(model)[1], x0, n, 0.25).count == enum


def test_exact_class_counts(coin):
    for depth in range(1, 12):
        classes = cylinder_mass_classes(coin, 0, depth)
        assert sum(m * c for m, c in classes.items()) == 1
        count, _ = count_from_classes(classes, 0.25)
        assert count == math.ceil(Fraction(3, 4) * 2**depth)


def test_smb_examples(coin):
    cond, _ = shift_cells(coin, 1, 1)
    y = LeafPoint(cond.support, (0, 1) * 10)
    assert smb_rate(cond, coin, shift_setup(coin)[1], y, 10) == pytest.approx(0.6238325, abs=1e-7)
    assert smb_rate(cond, coin, shift_setup(coin)[1], y, 1) == 0.0


def test_smb_n1_on_torus(cat, grid10, leb, cat_scheme):
    cond = disintegrate(leb, cat_scheme, [0.05, 0.05])
    y = LeafPoint(cond.support, cond.support.length / 3)
    assert smb_rate(cond, cat, grid10, y, 1) == pytest.approx(0.0, abs=1e-12)


def test_smb_vectorised_matches_scalar(cat, grid10, leb, cat_scheme):
    cond = disintegrate(leb, cat_scheme, [0.41, 0.12])
    pts = sample_conditional(cond, 20, seed=4)
    many = smb_rates(cond, cat, grid10, [p.t for p in pts], 9)
    assert many == pytest.approx([smb_rate(cond, cat, grid10, p, 9) for p in pts])


def test_conditional_entropy_rate_examples(coin, biased, cat, grid10, leb, cat_scheme):
    mu, xi, scheme = shift_setup(coin)
    mean, err = conditional_entropy_rate(coin, mu, xi, scheme, 4, 50, seed=0)
    assert mean == pytest.approx(0.5198604, abs=1e-7) and err < 1e-15
    mu, xi, scheme = shift_setup(biased)
    mean, err = conditional_entropy_rate(biased, mu, xi, scheme, 3, 50, seed=0)
    assert mean == pytest.approx(0.3748901, abs=1e-7) and err < 1e-15
    mean, _ = conditional_entropy_rate(cat, leb, grid10, cat_scheme, 1, 20, seed=0)
    assert mean == pytest.approx(0.0, abs=1e-12)


def test_entropy_from_counts_examples():
    geo = [(n, round(3 * math.exp(n - 1))) for n in range(5, 11)]
    assert entropy_from_counts(geo).slope == pytest.approx(1.0, abs=0.01)
    assert entropy_from_counts([(n, 7) for n in range(1, 6)]).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(WindowTooSmall):
        entropy_from_counts([(1, 2), (2, 4)])
    est = entropy_from_counts(geo, (6, 9))
    assert est.rows[0] == (5, geo[0][1], math.log(geo[0][1]) / 5)


def test_oracle_counts_slope(leb, cat_scheme):
    cond = disintegrate(leb, cat_scheme, [0.05, 0.05])
    rows = [(n, ball_cover_oracle_interval(cond, n, 0.1, 0.1).count) for n in range(6, 15)]
    assert entropy_from_counts(rows).slope == pytest.approx(LOG_LAMBDA, abs=0.01)


def test_bernoulli_naive_rate(coin):
    mu, xi, scheme = shift_setup(coin)
    res = katok_estimate(coin, mu, scheme, xi, delta=0.25, n_window=(20, 30), anchors=2)
    row = [r for r in res.rows if r.n == 30][0]
    assert row.naive_rate == pytest.approx((29 * math.log(2) + math.log(0.75)) / 30, abs=1e-6)
    assert row.naive_rate == pytest.approx(0.66045, abs=1e-5)
    assert res.headline().median_slope == pytest.approx(math.log(2), abs=0.001)


def test_katok_deterministic_and_executor(cat, grid10, leb, cat_scheme):
    from concurrent.futures import ThreadPoolExecutor
    kw = dict(n_window=(4, 7), anchors=3, seed=11, formulas=("partition", "ball"),
              epsilons=(0.1,), ball_methods=("oracle_interval", "greedy"), sample_count=2000)
    a = katok_estimate(cat, leb, cat_scheme, grid10, **kw)
    with ThreadPoolExecutor(2) as ex:
        b = katok_estimate(cat, leb, cat_scheme, grid10, executor=ex, **kw)
    assert a.rows == b.rows
    assert {s.method for s in a.summary} == {"partition", "oracle_interval", "greedy"}


def test_katok_argument_errors(cat, grid10, leb, cat_scheme):
    with pytest.raises(WindowTooSmall):
        katok_estimate(cat, leb, cat_scheme, grid10, n_window=(3, 4))
    with pytest.raises(ValueError):
        katok_estimate(cat, leb, cat_scheme, None)
    with pytest.raises(ValueError):
        katok_estimate(cat, leb, cat_scheme, grid10, formulas=("ball",))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.001, 1.0), min_size=2, max_size=30), st.floats(0.01, 0.99),
       st.floats(0.01, 0.99))
def test_counts_monotone_in_delta(weights, d1, d2):
    from unstable_entropy.estimators import count_from_masses
    m = np.asarray(weights) / np.sum(weights)
    lo, hi = sorted((d1, d2))
    assert count_from_masses(m, hi)[0] <= count_from_masses(m, lo)[0]
