"""Tests for uniform equilibria, growth certificates, and horizon estimates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from aggrokin import (
    ConfigurationError,
    DomainError,
    ModelParams,
    Potential,
    Region,
    balance_larger_root,
    balance_smaller_root,
    equilibrium_densities,
    existence_horizon,
    growth_speed,
    make_certificate,
    min_threshold,
    threshold_depth,
)

INV_E = math.exp(-1.0)


# ---------------------------------------------------------------------------
# balance roots r * exp(-r) = q


def test_balance_roots_bracket_one():
    for q in (1e-6, 0.01, 0.2, 0.36, INV_E * 0.999):
        r1 = balance_smaller_root(q)
        r2 = balance_larger_root(q)
        assert 0.0 < r1 <= 1.0 <= r2
        assert_allclose(r1 * math.exp(-r1), q, rtol=1e-12)
        assert_allclose(r2 * math.exp(-r2), q, rtol=1e-12)


def test_balance_roots_merge_at_critical():
    assert balance_smaller_root(INV_E) == 1.0
    assert balance_larger_root(INV_E) == 1.0


def test_balance_root_domain_errors():
    for q in (0.0, -0.5, INV_E * 1.01, 2.0):
        with pytest.raises(DomainError):
            balance_smaller_root(q)
        with pytest.raises(DomainError):
            balance_larger_root(q)


@given(q=st.floats(1e-8, INV_E * 0.9999))
@settings(max_examples=200, deadline=None)
def test_balance_roots_are_exact_roots(q):
    for r in (balance_smaller_root(q), balance_larger_root(q)):
        assert abs(r * math.exp(-r) - q) <= 1e-12 * max(1.0, q)


# ---------------------------------------------------------------------------
# uniform equilibria


def test_equilibria_dual_route():
    """Lambert-W route must match the independent bisection route."""
    rng = np.random.default_rng(42)
    for _ in range(300):
        m = rng.uniform(0.1, 10.0)
        beta = rng.uniform(0.05, 5.0)
        q = rng.uniform(1e-4, INV_E * 0.999)
        lam = q * m / beta
        eq = equilibrium_densities(ModelParams(m=m, lam=lam), beta)
        assert eq.regime == "subcritical"
        assert_allclose(eq.low, balance_smaller_root(q) / beta, rtol=1e-10)
        assert_allclose(eq.high, balance_larger_root(q) / beta, rtol=1e-10)


def test_equilibria_ordering_and_residuals():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = rng.uniform(0.1, 10.0)
        beta = rng.uniform(0.05, 5.0)
        lam = rng.uniform(1e-4, INV_E * 0.999) * m / beta
        eq = equilibrium_densities(ModelParams(m=m, lam=lam), beta)
        assert eq.low < 1.0 / beta < eq.high
        assert eq.residual_low < 1e-10
        assert eq.residual_high < 1e-10


def test_equilibria_regimes():
    critical = equilibrium_densities(ModelParams(m=1.0, lam=INV_E), 1.0)
    assert critical.regime == "critical"
    assert_allclose(critical.low, 1.0, rtol=1e-12)
    assert critical.low == critical.high

    sup = equilibrium_densities(ModelParams(m=1.0, lam=1.0), 1.0)
    assert sup.regime == "supercritical"
    assert sup.low is None and sup.high is None
    assert sup.residual_low is None and sup.residual_high is None


def test_equilibria_rescaling_invariance():
    """Scaling lam and m together fixes the densities; scaling the kernel
    mass by s while holding lam*mass/m scales both densities by 1/s."""
    eq = equilibrium_densities(ModelParams(m=2.0, lam=0.3), 1.5)
    for c in (0.1, 3.0, 17.0):
        scaled = equilibrium_densities(ModelParams(m=2.0 * c, lam=0.3 * c), 1.5)
        assert_allclose(scaled.low, eq.low, rtol=1e-12)
        assert_allclose(scaled.high, eq.high, rtol=1e-12)
    for s in (0.25, 4.0):
        thin = equilibrium_densities(ModelParams(m=2.0, lam=0.3 / s), 1.5 * s)
        assert_allclose(thin.low, eq.low / s, rtol=1e-12)
        assert_allclose(thin.high, eq.high / s, rtol=1e-12)


def test_equilibria_guards():
    with pytest.raises(DomainError):
        equilibrium_densities(ModelParams(m=1.0, lam=0.1), 0.0)
    with pytest.raises(ConfigurationError):
        ModelParams(m=-1.0, lam=1.0)
    with pytest.raises(ConfigurationError):
        ModelParams(m=1.0, lam=0.0)
    with pytest.raises(ConfigurationError):
        ModelParams(m=1.0, lam=1.0, eps=1.5)


# ---------------------------------------------------------------------------
# threshold arithmetic


def test_min_threshold_balances():
    """b_hat solves b*exp(-cov*b) = (lam/m)/4 on the decreasing branch."""
    for lam_over_m, cov in ((1.0, 0.5), (4.0, 0.2), (0.3, 1.0)):
        b_hat = min_threshold(lam_over_m, cov)
        assert b_hat >= 1.0 / cov
        assert_allclose(
            b_hat * math.exp(-cov * b_hat), lam_over_m / 4.0, rtol=1e-10
        )


def test_min_threshold_saturated_branch():
    # lam_over_m * cov / 4 beyond 1/e: the balance is unsolvable and the
    # threshold parks at the decay peak 1/cov
    assert min_threshold(10.0, 1.0) == 1.0
    with pytest.raises(DomainError):
        min_threshold(1.0, 0.0)
    with pytest.raises(DomainError):
        min_threshold(0.0, 1.0)


def test_threshold_depth_identity_and_monotonicity():
    lam_over_m, cov = 2.0, 0.5
    b_hat = min_threshold(lam_over_m, cov)
    bs = np.linspace(b_hat, 5.0 * b_hat, 50)
    depths = [threshold_depth(lam_over_m, cov, float(b)) for b in bs]
    expected = bs * np.exp(-cov * bs) / lam_over_m
    assert_allclose(depths, expected, rtol=1e-14)
    assert np.all(np.diff(depths) < 0)
    with pytest.raises(DomainError):
        threshold_depth(lam_over_m, cov, 0.5 * b_hat)


def test_depth_at_minimal_threshold_is_one_quarter():
    # the two defining identities meet: theta(b_hat) = 1/4 exactly
    for lam_over_m, cov in ((1.0, 0.5), (0.7, 1.3)):
        b_hat = min_threshold(lam_over_m, cov)
        assert_allclose(
            threshold_depth(lam_over_m, cov, b_hat), 0.25, rtol=1e-10
        )


# ---------------------------------------------------------------------------
# growth certificates


def demo_setup():
    params = ModelParams(m=1.0, lam=1.0)
    pot = Potential.indicator(0.5, 1.0)
    region = Region((-1.0,), (1.0,))
    return params, pot, region


def test_certificate_valid_instance():
    params, pot, region = demo_setup()
    b_hat = min_threshold(1.0, 0.5)
    cert = make_certificate(params, pot, region, b=1.5 * b_hat, kappa=2.0)
    assert cert.valid
    assert cert.violations == ()
    assert_allclose(cert.min_cov, 0.5, rtol=1e-12)
    assert_allclose(cert.min_admissible, b_hat, rtol=1e-12)
    # speed identity v = lam * (1 - kappa * theta)
    assert_allclose(cert.speed, params.lam * (1.0 - 2.0 * cert.theta), rtol=1e-12)
    # a valid certificate always promises speed above lam/kappa
    assert cert.speed > params.lam / cert.kappa


def test_certificate_violation_reporting():
    params, pot, region = demo_setup()
    b_hat = min_threshold(1.0, 0.5)

    low_b = make_certificate(params, pot, region, b=0.5 * b_hat, kappa=2.0)
    assert not low_b.valid
    assert any("threshold" in v for v in low_b.violations)

    flat_kappa = make_certificate(params, pot, region, b=1.5 * b_hat, kappa=1.0)
    assert not flat_kappa.valid
    assert any("kappa" in v for v in flat_kappa.violations)

    # at b = b_hat the depth equals 1/4, exactly the best possible kappa
    # margin, so the strict inequality fails
    edge = make_certificate(params, pot, region, b=b_hat, kappa=2.0)
    assert not edge.valid
    assert any("decay depth" in v for v in edge.violations)


@given(
    scale=st.floats(1.2, 6.0),
    kappa=st.floats(1.05, 8.0),
    lam=st.floats(0.2, 4.0),
)
@settings(max_examples=80, deadline=None)
def test_valid_certificates_promise_fast_growth(scale, kappa, lam):
    params = ModelParams(m=1.0, lam=lam)
    pot = Potential.indicator(0.5, 1.0)
    region = Region((-1.0,), (1.0,))
    b_hat = min_threshold(lam, 0.5)
    cert = make_certificate(params, pot, region, b=scale * b_hat, kappa=kappa)
    if cert.valid:
        assert cert.speed > params.lam / kappa
        assert cert.speed <= params.lam
    else:
        # only the depth clause can fail here (b and kappa are admissible)
        assert all("decay depth" in v for v in cert.violations)


def test_certificate_speed_helper():
    params = ModelParams(m=2.0, lam=3.0)
    v = growth_speed(params, min_cov=0.5, b=4.0, kappa=2.0)
    assert_allclose(v, 3.0 - 2.0 * 2.0 * 4.0 * math.exp(-2.0), rtol=1e-14)


def test_certificate_zero_coverage_rejected():
    params, _, region = demo_setup()
    with pytest.raises(DomainError):
        make_certificate(params, Potential.zero(1), region, b=5.0, kappa=2.0)


# ---------------------------------------------------------------------------
# existence horizons


def test_horizon_frozen_example():
    est = existence_horizon(
        ModelParams(m=1.0, lam=1.0), mayer=1.0, total=1.0, c_low=1.0, c_high=2.0
    )
    assert_allclose(est.t_mayer, 0.029800730505529387, rtol=1e-15)
    assert est.t_mass == est.t_mayer
    assert est.bound_ok


def test_horizon_tuple_unpacking_and_ordering():
    t, t1 = existence_horizon(
        ModelParams(m=1.0, lam=1.0), mayer=1.0, total=1.5, c_low=1.0, c_high=2.0
    )
    assert_allclose(t, 1.0 / (4.0 * (math.e**2 + 1.0)), rtol=1e-14)
    assert_allclose(t1, 1.0 / (4.0 * (math.e**3 + 1.0)), rtol=1e-14)
    # the plain-mass horizon is shorter whenever total mass >= mayer mass
    assert t1 < t


def test_horizon_universal_bound_bulk():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        lam = rng.uniform(0.01, 10.0)
        mayer = rng.uniform(0.0, 5.0)
        total = mayer * rng.uniform(1.0, 2.0)
        c_low = rng.uniform(0.1, 3.0)
        c_high = c_low * rng.uniform(1.0, 5.0)
        est = existence_horizon(
            ModelParams(m=1.0, lam=lam), mayer, total, c_low, c_high
        )
        assert est.t_mayer <= est.bound + 1e-15
        assert est.bound_ok
        assert est.t_mass <= est.t_mayer + 1e-15


def test_horizon_degenerate_and_guards():
    est = existence_horizon(
        ModelParams(m=1.0, lam=1.0), mayer=1.0, total=1.0, c_low=1.0, c_high=1.0
    )
    assert est.t_mayer == 0.0
    with pytest.raises(DomainError):
        existence_horizon(ModelParams(m=1.0, lam=1.0), 1.0, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        existence_horizon(ModelParams(m=1.0, lam=1.0), 1.0, 1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        existence_horizon(ModelParams(m=1.0, lam=1.0), -0.1, 1.0, 1.0, 2.0)
