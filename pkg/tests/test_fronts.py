"""Tests for the front-expansion recurrence and arrival-time analysis."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from aggrokin import (
    DomainError,
    InsufficientDataError,
    ModelParams,
    StepGeometry,
    check_asymptote,
    fit_arrivals,
    front_min_threshold,
    front_recurrence,
    lambert_w,
    predicted_arrival,
    threshold_for_depth,
)


def bisect_larger_root(target: float, quarter: float = 4.0) -> float:
    """Independent oracle: larger root of b * exp(-b/quarter) = target."""
    lo, hi = quarter, 4000.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid / quarter) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# minimal start level


def test_min_threshold_frozen_values():
    assert_allclose(
        front_min_threshold(ModelParams(m=1.0, lam=1.0)),
        16.840269491443436,
        rtol=1e-15,
    )
    assert_allclose(
        front_min_threshold(ModelParams(m=6.0, lam=2.0)),
        22.37062068483995,
        rtol=1e-14,
    )


def test_min_threshold_matches_bisection_oracle():
    for m, lam in ((1.0, 1.0), (6.0, 2.0), (2.0, 0.5), (1.0, 5.0)):
        thr = front_min_threshold(ModelParams(m=m, lam=lam))
        assert_allclose(thr, bisect_larger_root(lam / (4.0 * m)), rtol=1e-9)
        # the level balances: thr * exp(-thr/4) = lam / (4 m)
        assert_allclose(thr * math.exp(-thr / 4.0), lam / (4.0 * m), rtol=1e-12)


def test_min_threshold_saturated_branch():
    # beyond lam = 16 m / e the balance is unsolvable; the threshold parks
    # at the larger of the recurrence fixed point lam/(4m) and the peak 4
    assert front_min_threshold(ModelParams(m=1.0, lam=16.0)) == 4.0
    assert front_min_threshold(ModelParams(m=1.0, lam=32.0)) == 8.0


def test_min_threshold_shape_and_continuity():
    """Decreasing toward 4 on the solvable branch, continuous through the
    branch switch at lam = 16 m / e, then max(4, lam/(4m))."""
    switch = 16.0 / math.e
    lams = np.linspace(0.5, switch - 1e-9, 100)
    thr = [front_min_threshold(ModelParams(m=1.0, lam=la)) for la in lams]
    assert np.all(np.diff(thr) < 0)
    assert np.all(np.array(thr) > 4.0)
    assert_allclose(thr[-1], 4.0, atol=1e-3)
    # flat at the peak until the fixed point overtakes it, then linear
    assert front_min_threshold(ModelParams(m=1.0, lam=0.9 * 16.0)) == 4.0
    assert front_min_threshold(ModelParams(m=1.0, lam=40.0)) == 10.0


# ---------------------------------------------------------------------------
# the level recurrence


def test_recurrence_three_forms_agree():
    """Log-space iteration must satisfy the exponential-form and
    Lambert-W-form statements of the same recurrence to 1e-10."""
    params = ModelParams(m=1.0, lam=1.0)
    d0 = 1.2 * front_min_threshold(params)
    seq = front_recurrence(params, d0, steps=20)
    assert seq.log_residual < 1e-10
    scale = params.lam / (4.0 * params.m)
    for k in range(1, 21):
        dk, dk1 = seq.d_seq[k], seq.d_seq[k - 1]
        lhs = dk * math.exp(-dk / 4.0)
        rhs = scale * math.exp(-dk1 / 4.0)
        assert abs(lhs - rhs) <= 1e-10 * rhs
        ck = -lambert_w(-math.exp(-(seq.c_seq[k - 1] - seq.mu)), branch="negative")
        assert_allclose(seq.c_seq[k], ck, rtol=1e-10)


def test_recurrence_is_increasing_with_positive_step_times():
    params = ModelParams(m=2.0, lam=3.0)
    seq = front_recurrence(params, 1.5 * front_min_threshold(params), steps=50)
    assert np.all(np.diff(seq.d_seq) > 0)
    assert np.all(seq.t_seq > 0)
    assert_allclose(seq.c_seq, seq.d_seq / 4.0, rtol=1e-15)
    assert seq.steps == 50
    # step times telescope to the total level gain
    assert_allclose(
        seq.t_seq.sum(), (2.0 / params.lam) * (seq.d_seq[-1] - seq.d_seq[0]),
        rtol=1e-12,
    )


def test_recurrence_monotone_in_start_level():
    params = ModelParams(m=1.0, lam=1.0)
    b = front_min_threshold(params)
    lo = front_recurrence(params, 1.1 * b, steps=30)
    hi = front_recurrence(params, 1.3 * b, steps=30)
    assert np.all(hi.d_seq > lo.d_seq)


def test_recurrence_guards():
    params = ModelParams(m=1.0, lam=1.0)
    with pytest.raises(DomainError):
        front_recurrence(params, 30.0, steps=0)
    with pytest.raises(DomainError):
        front_recurrence(params, 0.9 * front_min_threshold(params), steps=10)


def test_asymptote_closed_form_and_nan_region():
    params = ModelParams(m=1.0, lam=16.0)   # mu = 0
    seq = front_recurrence(params, 8.0, steps=10)
    assert math.isnan(seq.asymptote(np.array([1.0]))[0])
    k = np.array([2.0, 5.0])
    expected = k * np.log(k) + k * np.log(np.log(k)) - 1.0 * k
    assert_allclose(seq.asymptote(k), expected, rtol=1e-14)
    errs = seq.errors()
    assert errs.size == 11
    assert np.isnan(errs[0]) and np.isnan(errs[1]) and np.isfinite(errs[2:]).all()


def test_asymptote_check_long_run():
    params = ModelParams(m=1.0, lam=16.0)   # mu = 0, start c_0 = 2
    seq = front_recurrence(params, 8.0, steps=10_000)
    rep = check_asymptote(seq)
    assert rep.passed
    assert rep.per_step_final < rep.per_step_half < rep.per_step_quarter
    assert rep.per_step_final < rep.bound
    assert 1.0 < rep.leading_ratio < 1.3
    assert rep.steps == 10_000


def test_asymptote_check_needs_steps():
    params = ModelParams(m=1.0, lam=16.0)
    with pytest.raises(InsufficientDataError):
        check_asymptote(front_recurrence(params, 8.0, steps=50))


# ---------------------------------------------------------------------------
# geometry and predictions


def test_step_geometry_counts_quarter_steps():
    geo = StepGeometry(region_halfwidth=1.0)
    assert geo.steps_to(0.5) == 0
    assert geo.steps_to(1.0) == 0
    assert geo.steps_to(1.25) == 1
    assert geo.steps_to(1.26) == 2
    assert geo.steps_to(-3.0) == 8
    assert geo.steps_to(3.0) == geo.steps_to(-3.0)


def test_predicted_arrival_nondecreasing_in_distance():
    params = ModelParams(m=1.0, lam=1.0)
    d0 = 1.1 * front_min_threshold(params)
    geo = StepGeometry(region_halfwidth=1.0)
    xs = np.linspace(0.0, 8.0, 60)
    ts = [predicted_arrival(params, d0, float(x), geo) for x in xs]
    assert ts[0] == 0.0
    assert np.all(np.diff(ts) >= 0)
    assert ts[-1] > 0
    assert predicted_arrival(params, d0, -5.0, geo) == predicted_arrival(
        params, d0, 5.0, geo
    )


def test_predicted_arrival_telescopes_the_recurrence():
    params = ModelParams(m=2.0, lam=1.0)
    d0 = 1.2 * front_min_threshold(params)
    geo = StepGeometry(region_halfwidth=1.0)
    k = geo.steps_to(4.0)
    seq = front_recurrence(params, d0, k)
    assert_allclose(
        predicted_arrival(params, d0, 4.0, geo),
        (2.0 / params.lam) * (seq.d_seq[k] - d0),
        rtol=1e-12,
    )


# ---------------------------------------------------------------------------
# arrival fitting


def test_fit_recovers_exact_growth_law():
    xs = np.arange(2.0, 14.0)
    ts = 0.3 * xs * np.log(xs) + 0.5 * xs
    rep = fit_arrivals(xs, ts, lambda x: 2.0 * (0.3 * x * math.log(x) + 0.5 * x))
    assert_allclose(rep.coef_xlogx, 0.3, rtol=1e-10)
    assert_allclose(rep.coef_x, 0.5, rtol=1e-10)
    assert rep.rms_residual < 1e-12
    assert rep.bound_ok
    assert_allclose(rep.max_time_ratio, 0.5, rtol=1e-12)
    assert rep.probes == 12


def test_fit_flags_slow_measurements():
    xs = np.arange(2.0, 8.0)
    pred = 0.3 * xs * np.log(xs) + 0.5 * xs
    rep = fit_arrivals(xs, 1.2 * pred, lambda x: 0.3 * x * math.log(x) + 0.5 * x)
    assert not rep.bound_ok
    assert rep.max_time_ratio > 1.05


def test_fit_drops_unreached_probes_and_guards():
    xs = np.array([2.0, 3.0, 4.0, 5.0, 6.0])
    ts = np.array([1.0, 2.0, np.nan, 3.0, 4.0])
    rep = fit_arrivals(xs, ts, lambda x: 10.0 * x)
    assert rep.probes == 4
    with pytest.raises(InsufficientDataError):
        fit_arrivals(xs[:4], ts[:4], lambda x: 10.0 * x)   # only 3 finite
    with pytest.raises(DomainError):
        fit_arrivals(xs, np.ones(5), lambda x: 0.0)


# ---------------------------------------------------------------------------
# depth inversion


def test_threshold_for_depth_identity_and_round_trip():
    params = ModelParams(m=1.0, lam=1.0)
    b = threshold_for_depth(params, coverage_at=0.5, theta=0.1)
    assert_allclose(b * math.exp(-0.5 * b), 1.0 * 0.1, rtol=1e-12)
    # transporting back through the depth map returns the same theta
    from aggrokin import threshold_depth

    assert_allclose(threshold_depth(1.0, 0.5, b), 0.1, rtol=1e-12)


def test_threshold_for_depth_grows_as_coverage_shrinks():
    params = ModelParams(m=1.0, lam=1.0)
    covs = np.linspace(0.2, 1.0, 30)
    bs = [threshold_for_depth(params, float(s), 0.05) for s in covs]
    assert np.all(np.diff(bs) < 0)


def test_threshold_for_depth_guards():
    params = ModelParams(m=1.0, lam=1.0)
    with pytest.raises(DomainError):
        threshold_for_depth(params, 0.0, 0.1)
    with pytest.raises(DomainError):
        threshold_for_depth(params, 1.0, 0.0)
    with pytest.raises(DomainError):
        threshold_for_depth(params, 1.0, 1.0)   # depth beyond 1/e
