import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invsq.angular import AngularMode, angular_spectrum
from invsq.errors import ConvergenceError, GridError, HypothesisError
from invsq.oscillation import (DEFAULT_E_GRID, QProfile, count_bound_states, count_report, count_zeros,
                               inertia_oracle, make_q_profile, predicted_count, sign_change_oracle,
                               slope_fit)
from invsq.potential import RadialPerturbation, SpherePotential


def test_constant_positive_q_counts_sine_zeros():
    # g = sin(s): zeros at k pi, k = 1..10 on (0, 10 pi]
    q = QProfile.custom(lambda s: np.ones_like(np.asarray(s, dtype=float)))
    assert count_zeros(q, r_max=10 * math.pi).zero_count == 10
    assert sign_change_oracle(q, r_max=10 * math.pi) == 10


def test_constant_negative_q_has_no_zero():
    q = QProfile.custom(lambda s: -np.ones_like(np.asarray(s, dtype=float)))
    assert count_zeros(q, r_max=30.0).zero_count == 0
    assert sign_change_oracle(q, r_max=30.0) == 0


def test_turning_point_profile():
    q = make_q_profile(1.25, math.exp(-20.0))
    assert q.r0 == pytest.approx(10.0, abs=1e-9)
    tr = count_zeros(q)
    assert tr.zero_count == sign_change_oracle(q) == inertia_oracle(1.25, math.exp(-20.0)) == 3
    assert tr.r_end > q.r0
    assert not tr.tail_zero_possible


def test_r_max_before_turning_point_rejected():
    q = make_q_profile(1.25, math.exp(-20.0))
    with pytest.raises(ValueError):
        count_zeros(q, r_max=5.0)


def test_subcritical_mode_has_no_zeros():
    for E in (1e-2, 1e-6, 1e-10):
        assert count_zeros(make_q_profile(0.2, E)).zero_count == 0


def test_phase_samples_monotone_at_zeros():
    tr = count_zeros(make_q_profile(5.0, 1e-6))
    th = tr.theta_samples[:, 1]
    assert th[0] == pytest.approx(math.pi / 2)
    assert tr.theta_end <= th[0]


def test_predicted_count_arithmetic():
    modes = [AngularMode.from_mu(5.0, multiplicity=1), AngularMode.from_mu(3.0, multiplicity=3)]
    val = predicted_count(modes, 1e-4)
    assert val == pytest.approx(math.log(1e4) / (2 * math.pi) * (math.sqrt(4.75) + 3 * math.sqrt(2.75)))
    with pytest.raises(HypothesisError):
        predicted_count([AngularMode.from_mu(0.1)], 1e-4)


def test_constant_minus5_totals_frozen():
    # [DERIVED] frozen from the Pruefer counter, confirmed by both oracles below
    rep = count_report(angular_spectrum(SpherePotential.constant(-5.0)), DEFAULT_E_GRID)
    assert rep.totals == (5, 9, 14, 21, 26, 31)
    for E in (1e-2, 1e-6):
        a = inertia_oracle(5.0, E)
        b = inertia_oracle(3.0, E)
        assert a + 3 * b == rep.totals[DEFAULT_E_GRID.index(E)]


def test_zero_potential_counts_zero():
    total, per = count_bound_states(angular_spectrum(SpherePotential.constant(0.0)), 1e-8)
    assert total == 0 and per == []


def test_slope_fit_needs_grid():
    with pytest.raises(GridError):
        slope_fit(([1e-2, 1e-3, 1e-4], [1, 2, 3]))
    with pytest.raises(GridError):
        slope_fit(([1e-2, 1e-3, 1e-4, 1e-5, 1e-6], [1, 2, 3, 4, 5]))
    s, i, r = slope_fit(([10.0 ** -k for k in range(1, 8)], [k for k in range(1, 8)]))
    assert s == pytest.approx(1 / math.log(10)) and r < 1e-12


def test_threads_do_not_change_results():
    sp = angular_spectrum(SpherePotential.constant(-3.0), 12)
    a = count_report(sp, DEFAULT_E_GRID)
    b = count_report(sp, DEFAULT_E_GRID, threads=3)
    assert a.totals == b.totals and np.array_equal(a.per_mode_counts, b.per_mode_counts)


@given(mu=st.floats(0.3, 30.0), logE=st.floats(-10 * math.log(10), -2 * math.log(10)),
       C=st.floats(0.0, 3.0), p=st.floats(2.1, 4.0), use_t=st.booleans())
@settings(max_examples=25, deadline=None)
def test_prufer_agrees_with_sign_changes(mu, logE, C, p, use_t):
    t = RadialPerturbation.log_power(C, p) if use_t else RadialPerturbation.zero()
    q = make_q_profile(mu, math.exp(logE), t)
    tr = count_zeros(q)
    if not tr.tail_zero_possible:
        assert tr.zero_count == sign_change_oracle(q)


@given(mu=st.floats(0.3, 30.0), logE=st.floats(-8 * math.log(10), -2 * math.log(10)))
@settings(max_examples=10, deadline=None)
def test_inertia_within_one(mu, logE):
    E = math.exp(logE)
    try:
        c = inertia_oracle(mu, E)
    except ConvergenceError:
        return
    assert abs(count_zeros(make_q_profile(mu, E)).zero_count - c) <= 1


@given(st.floats(0.3, 10.0))
@settings(max_examples=10, deadline=None)
def test_counts_monotone_in_E(mu):
    counts = [count_zeros(make_q_profile(mu, E)).zero_count for E in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert counts == sorted(counts)


@given(st.floats(0.5, 3.0))
@settings(max_examples=8, deadline=None)
def test_sturm_comparison_in_t(C):
    # a larger attractive correction never loses zeros
    E = 1e-5
    lo = count_zeros(make_q_profile(2.0, E, RadialPerturbation.log_power(C, 2.5))).zero_count
    hi = count_zeros(make_q_profile(2.0, E, RadialPerturbation.log_power(C + 1.0, 2.5))).zero_count
    assert hi >= lo
