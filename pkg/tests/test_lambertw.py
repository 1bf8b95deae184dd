"""Tests for the real Lambert W branches and the log-domain balance solver."""

import math

import numpy as np
import pytest
import scipy.special
from numpy.testing import assert_allclose

from aggrokin import DomainError
from aggrokin.lambertw import BRANCH_POINT, lambert_w, log_balance_root


def test_known_values():
    assert lambert_w(0.0) == 0.0
    assert_allclose(lambert_w(math.e), 1.0, rtol=1e-14)
    assert_allclose(lambert_w(BRANCH_POINT), -1.0, rtol=1e-14)
    assert_allclose(lambert_w(BRANCH_POINT, branch="negative"), -1.0, rtol=1e-14)
    # W0(1) is the omega constant
    assert_allclose(lambert_w(1.0), 0.5671432904097838, rtol=1e-14)
    assert_allclose(
        lambert_w(-0.25, branch="negative"), -2.153292364110349, rtol=1e-13
    )


def test_principal_branch_residual_on_log_grid():
    xs = np.concatenate(
        [
            -np.exp(np.linspace(math.log(1e-12), math.log(-BRANCH_POINT), 2500)),
            np.exp(np.linspace(math.log(1e-12), math.log(1e12), 2500)),
        ]
    )
    for x in xs:
        w = lambert_w(float(x))
        assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


def test_negative_branch_residual_on_log_grid():
    xs = -np.exp(np.linspace(math.log(1e-12), math.log(-BRANCH_POINT), 5000))
    for x in xs:
        w = lambert_w(float(x), branch="negative")
        assert w <= -1.0 + 1e-12
        assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


def test_matches_scipy_oracle():
    xs = np.concatenate(
        [np.linspace(BRANCH_POINT + 1e-6, 50.0, 400), [-1e-8, -1e-4, 1e4]]
    )
    ours = np.array([lambert_w(float(x)) for x in xs])
    ref = scipy.special.lambertw(xs, 0).real
    assert_allclose(ours, ref, rtol=1e-10, atol=1e-12)
    xs_neg = np.linspace(BRANCH_POINT + 1e-6, -1e-6, 400)
    ours_neg = np.array([lambert_w(float(x), branch="negative") for x in xs_neg])
    ref_neg = scipy.special.lambertw(xs_neg, -1).real
    assert_allclose(ours_neg, ref_neg, rtol=1e-10, atol=1e-12)


def test_series_accuracy_at_branch_point():
    # scipy flattens to -1 here; the sqrt series resolves the approach
    delta = 1e-9
    x = BRANCH_POINT + delta
    expected = -1.0 - math.sqrt(2.0 * math.e * delta)
    assert_allclose(lambert_w(x, "negative"), expected, atol=3e-9)
    assert_allclose(lambert_w(x, "principal"), -expected - 2.0, atol=3e-9)


def test_domain_errors():
    with pytest.raises(DomainError):
        lambert_w(BRANCH_POINT - 1e-6)
    with pytest.raises(DomainError):
        lambert_w(0.5, branch="negative")
    with pytest.raises(DomainError):
        lambert_w(0.0, branch="negative")
    with pytest.raises(DomainError):
        lambert_w(float("nan"))
    with pytest.raises(DomainError):
        lambert_w(1.0, branch="middle")
    with pytest.raises(DomainError):
        log_balance_root(0.5)
    with pytest.raises(DomainError):
        log_balance_root(2.0, branch="sideways")


def test_log_balance_matches_lambert_in_overlap():
    # c - ln c = R has upper root -Wm1(-exp(-R)) and lower root -W0(-exp(-R))
    for R in np.linspace(1.5, 30.0, 40):
        up = log_balance_root(float(R), "upper")
        lo = log_balance_root(float(R), "lower")
        assert_allclose(up, -lambert_w(-math.exp(-R), "negative"), rtol=1e-12)
        assert_allclose(lo, -lambert_w(-math.exp(-R), "principal"), rtol=1e-12)


def test_log_balance_deep_regime():
    # exp(-R) underflows here; the direct solve must still be accurate
    for R in (500.0, 800.0, 5000.0, 1e6):
        c = log_balance_root(R, "upper")
        assert_allclose(c - math.log(c), R, rtol=1e-14)
        assert c > R
    c_lo = log_balance_root(700.0, "lower")
    assert 0.0 < c_lo < 1.0
    assert_allclose(c_lo - math.log(c_lo), 700.0, rtol=1e-14)
    # below the normal float range the lower root is not representable
    with pytest.raises(DomainError):
        log_balance_root(750.0, "lower")


def test_branches_bracket_the_minimum():
    for R in (1.0 + 1e-9, 1.1, 4.0):
        assert log_balance_root(R, "lower") <= 1.0 <= log_balance_root(R, "upper")


def test_monotonicity():
    xs = np.linspace(BRANCH_POINT, 5.0, 300)
    w0 = [lambert_w(float(x)) for x in xs]
    assert np.all(np.diff(w0) > 0)
    xs_neg = np.linspace(BRANCH_POINT, -1e-4, 300)
    wm = [lambert_w(float(x), branch="negative") for x in xs_neg]
    assert np.all(np.diff(wm) < 0)
