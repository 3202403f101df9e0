import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abcdp.analytics import (
    ErrorBoundReport,
    PosteriorFunctional,
    default_epsilon_grid,
    default_rho_samples,
    expected_error_bound,
    flip_probability,
    flip_profile,
    flip_profile_grid,
    realized_error,
    tail_error_bound,
)
from abcdp.engine import IndicatorTrace, rejection_indicators
from abcdp.seeding import make_rng


def test_flip_probability_examples():
    assert flip_probability(0.2, 0.2, 0.7) == 0.5
    assert flip_probability(0.3, 0.2, 0.4) == pytest.approx(0.45853, abs=1e-5)
    assert flip_probability(0.3, 0.2, 1e-4) < 1e-10
    assert flip_probability(0.3, 0.2, 0.0) == 0.0


def test_expected_error_bound_examples():
    profile = flip_profile(np.full(100, 0.2), 0.2, 1.0)
    assert expected_error_bound(profile, 1.0, 10) == pytest.approx(10.0)
    assert expected_error_bound(flip_profile(np.linspace(0, 1, 50), 0.2, 0.0), 3.0, 4) == 0.0
    with pytest.raises(ValueError):
        expected_error_bound(profile, 1.0, 0)


def test_tail_bound_limits():
    profile = flip_profile(np.linspace(0, 1, 50), 0.5, 0.3)
    assert tail_error_bound(profile, 1.0, 5, 1e12) == pytest.approx(1.0)
    assert tail_error_bound(flip_profile(np.linspace(0, 1, 50), 0.5, 0.0), 1.0, 5, 0.1) == 1.0
    assert tail_error_bound(profile, 1.0, 5, 1e-6) == 0.0
    with pytest.raises(ValueError):
        tail_error_bound(profile, 1.0, 5, 0.0)


@settings(max_examples=100, deadline=None)
@given(
    rho=st.lists(st.floats(0, 2), min_size=1, max_size=40),
    eps=st.floats(0, 2),
    b=st.floats(1e-3, 10),
    a1=st.floats(1e-3, 1e3),
    a2=st.floats(1e-3, 1e3),
)
def test_tail_bound_in_unit_interval_and_monotone_in_a(rho, eps, b, a1, a2):
    profile = flip_profile(rho, eps, b)
    lo, hi = sorted((a1, a2))
    p_lo, p_hi = tail_error_bound(profile, 2.0, 3, lo), tail_error_bound(profile, 2.0, 3, hi)
    assert 0.0 <= p_lo <= p_hi <= 1.0


def test_functional_and_realized_error():
    f = PosteriorFunctional.from_thetas([[3.0, 4.0], [0.0, 1.0], [1.0, 0.0]])
    assert f.k_max == 5.0
    sq = PosteriorFunctional.from_thetas([[2.0], [3.0]], f=lambda th: np.square(th))
    assert sq.values.ravel().tolist() == [4.0, 9.0]
    pub = rejection_indicators([0.1, 0.9, 0.1], 0.5)
    assert realized_error(f, pub, pub) == 0.0
    priv = IndicatorTrace(np.array([1, 1], dtype=np.int8), np.array([1, 2]), True)
    # private mean (1.5, 2.5), public mean (2, 2)
    assert realized_error(f, priv, pub) == pytest.approx(math.hypot(0.5, 0.5))
    none = IndicatorTrace(np.zeros(3, dtype=np.int8), np.array([], dtype=np.int64), False)
    assert realized_error(f, none, pub) is None


def test_error_report():
    r = ErrorBoundReport(1.0, 2.0, 0.3, 5, 6)
    assert r.tail_bound(4.0) == 0.5
    assert r.to_dict()["c_prime"] == 6


def test_grid_shape_and_order():
    rho = default_rho_samples(make_rng(0))
    grid = default_epsilon_grid()
    assert grid[0] == pytest.approx(0.1) and grid[-1] == pytest.approx(100.0) and grid.size == 25
    rows = flip_profile_grid(rho, 0.2, (10, 100, 1000), (10, 100, 1000), grid, True)
    assert len(rows) == 3 * 3 * 25
    assert [(r["N"], r["c"]) for r in rows[:26:25]] == [(10, 10), (10, 100)]


@pytest.mark.parametrize("resample", [True, False])
def test_grid_monotonicities(resample):
    rho = default_rho_samples(make_rng(1))
    grid = default_epsilon_grid()
    rows = flip_profile_grid(rho, 0.2, (10, 100, 1000), (10, 100, 1000), grid, resample)
    table = {(r["N"], r["c"], r["epsilon_total"]): r["mean_flip_prob"] for r in rows}
    for n in (10, 100, 1000):
        for c in (10, 100, 1000):
            seq = [table[(n, c, e)] for e in grid]
            assert all(a > b for a, b in zip(seq, seq[1:]))
        for e in grid:
            seq = [table[(n, c, e)] for c in (10, 100, 1000)]
            assert all(a <= b for a, b in zip(seq, seq[1:]))
    for c in (10, 100, 1000):
        for e in grid:
            seq = [table[(n, c, e)] for n in (10, 100, 1000)]
            assert all(a >= b for a, b in zip(seq, seq[1:]))
    assert table[(1000, 10, grid[-1])] < 0.01
