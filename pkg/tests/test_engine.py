import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abcdp.distance import GaussianKernel, MMDDistance
from abcdp.engine import (
    AccountingError,
    PrivacyBudget,
    ProposalRecord,
    accountant_report,
    epsilon_from_scale,
    noise_scale_from_budget,
    rejection_indicators,
    run_abcdp,
    run_rejection_abc,
    sparse_vector_indicators,
)
from abcdp.seeding import derive_seed, make_rng


def test_budget_examples():
    assert noise_scale_from_budget(1.0, 10, True, 0.02) == pytest.approx(0.4)
    assert noise_scale_from_budget(1.0, 5, False, 0.02) == pytest.approx(0.12)
    assert noise_scale_from_budget(math.inf, 3, True, 0.02) == 0.0
    assert epsilon_from_scale(0.4, 10, True, 0.02) == pytest.approx(1.0)
    assert epsilon_from_scale(0.12, 5, False, 0.02) == pytest.approx(1.0)
    assert epsilon_from_scale(0.0, 5, False, 0.02) == math.inf
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            noise_scale_from_budget(bad, 10, True, 0.02)


@settings(max_examples=300, deadline=None)
@given(
    eps=st.floats(1e-3, 1e4),
    c=st.integers(1, 5000),
    resample=st.booleans(),
    delta=st.floats(1e-6, 1e3),
)
def test_budget_round_trip(eps, c, resample, delta):
    budget = PrivacyBudget(eps, c, resample, delta)
    report = accountant_report(budget)
    assert abs(report["epsilon_total"] - eps) <= 1e-12 * max(1.0, eps)


def test_accountant_rejects_wrong_sensitivity():
    budget = PrivacyBudget(1.0, 10, True, 0.02)
    with pytest.raises(AccountingError):
        accountant_report(budget, delta_rho=0.04)


def test_rejection_examples():
    t = rejection_indicators([0.3, 0.1, 0.25], 0.2)
    assert t.indicators.tolist() == [0, 1, 0] and not t.terminated_early
    assert t.accepted_indices.tolist() == [2]
    t = rejection_indicators([0.3, 0.1, 0.25], 0.2, c_stop=1)
    assert t.indicators.tolist() == [0, 1] and t.terminated_early
    assert rejection_indicators([0.0, 1.3, 2.0], 2.0).indicators.tolist() == [1, 1, 1]


def test_zero_noise_matches_rejection():
    rho = [0.3, 0.1, 0.25]
    for resample in (True, False):
        private = sparse_vector_indicators(rho, 0.2, 5, 0.0, resample, make_rng(1))
        assert private.same_as(rejection_indicators(rho, 0.2, 5))


@settings(max_examples=100, deadline=None)
@given(
    rho=st.lists(st.floats(0, 2), min_size=1, max_size=60),
    eps=st.floats(0, 2),
    c=st.integers(1, 20),
    resample=st.booleans(),
    seed=st.integers(0, 2**32),
)
def test_infinite_budget_is_bit_identical_to_abc(rho, eps, c, resample, seed):
    b = noise_scale_from_budget(math.inf, c, resample, 0.1)
    assert sparse_vector_indicators(rho, eps, c, b, resample, make_rng(seed)).same_as(
        rejection_indicators(rho, eps, c)
    )


@settings(max_examples=100, deadline=None)
@given(
    rho=st.lists(st.floats(0, 2), min_size=1, max_size=60),
    eps=st.floats(0, 2),
    c=st.integers(1, 10),
    b=st.floats(1e-3, 2),
    resample=st.booleans(),
    seed=st.integers(0, 2**32),
)
def test_private_trace_follows_logged_noise(rho, eps, c, b, resample, seed):
    """Replay the decisions one step at a time from the logged draws."""
    trace = sparse_vector_indicators(rho, eps, c, b, resample, make_rng(seed), record_noise=True)
    assert trace.n_accepted <= c
    assert len(trace.noise_log) == trace.n_steps
    count = 0
    thresholds = set()
    for t, (m, nu) in enumerate(trace.noise_log):
        decision = int(rho[t] + nu <= eps + m)
        assert trace.indicators[t] == decision
        count += decision
        thresholds.add(m)
    if not resample:
        assert len(thresholds) <= 1
    assert trace.terminated_early == (trace.n_steps < len(rho))
    if trace.terminated_early:
        assert count == c and trace.indicators[-1] == 1


def test_one_step_acceptance_frequencies():
    rng = make_rng(derive_seed(99, "one-step"))
    n = 100_000
    for rho, expected in ((0.2, 0.5), (0.3, 0.4585311379)):
        hits = sum(sparse_vector_indicators([rho], 0.2, 1, 0.4, True, rng).n_accepted for _ in range(n))
        assert abs(hits / n - expected) < 0.005


def _toy(n_prop=40, n_obs=30):
    g = np.random.default_rng(0)
    props = [ProposalRecord(t, np.array([mu]), g.normal(mu, 1, size=(20, 1)))
             for t, mu in enumerate(g.uniform(-2, 2, n_prop), start=1)]
    return props, g.normal(0.3, 1, size=(n_obs, 1)), MMDDistance(GaussianKernel(1.0))


def test_run_abcdp_output_surface():
    props, obs, dist = _toy()
    budget = PrivacyBudget(5.0, 5, True, dist.sensitivity(obs.shape[0]))
    res = run_abcdp(props, obs, dist, 0.4, budget, make_rng(0))
    assert res.distances is None and res.trace.noise_log is None
    assert res.accepted_thetas.shape[0] == res.trace.n_accepted
    res = run_abcdp(props, obs, dist, 0.4, budget, make_rng(0), synthetic=True)
    assert res.distances is not None and res.distances.shape == (40,)


def test_run_abcdp_infinite_budget_matches_abc():
    props, obs, dist = _toy()
    budget = PrivacyBudget(math.inf, 5, False, dist.sensitivity(obs.shape[0]))
    private = run_abcdp(props, obs, dist, 0.4, budget, make_rng(0))
    public = run_rejection_abc(props, obs, dist, 0.4, c_stop=5)
    assert private.trace.same_as(public.trace)
    assert np.array_equal(private.posterior_mean, public.posterior_mean)
    assert private.distances is not None


def test_run_abcdp_validation():
    props, obs, dist = _toy()
    wrong = PrivacyBudget(1.0, 5, True, 0.5)
    with pytest.raises(ValueError):
        run_abcdp(props, obs, dist, 0.4, wrong, make_rng(0))
    good = PrivacyBudget(1.0, 5, True, dist.sensitivity(obs.shape[0]))
    with pytest.raises(ValueError):
        run_abcdp([], obs, dist, 0.4, good, make_rng(0))


def test_zero_acceptances_flagged():
    props, obs, dist = _toy()
    res = run_rejection_abc(props, obs, dist, 1e-9)
    assert not res.has_posterior and res.trace.n_accepted == 0


def test_same_seed_same_trace():
    rho = np.linspace(0, 1, 200)
    a = sparse_vector_indicators(rho, 0.3, 10, 0.05, True, make_rng(derive_seed(1, "noise", 0)))
    b = sparse_vector_indicators(rho, 0.3, 10, 0.05, True, make_rng(derive_seed(1, "noise", 0)))
    assert a.same_as(b)
