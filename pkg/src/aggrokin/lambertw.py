"""Real branches of the Lambert W function.

W solves w * exp(w) = x.  Only the two real branches matter here: the
principal branch W0 (increasing, defined for x >= -1/e) and the negative
branch Wm1 (decreasing, defined for -1/e <= x < 0, values <= -1).  Every
equation of the form r * exp(-r) = q that appears in the model reduces to
one of these branches.

The implementation is self-contained Halley iteration from branch-adapted
seeds; no special-function library is assumed.  A log-domain companion
:func:`log_balance_root` solves c - ln c = R directly, which is the only
numerically usable form of the negative branch once exp(-R) underflows.
"""

from __future__ import annotations

import math

from .errors import DomainError

__all__ = ["lambert_w", "log_balance_root", "BRANCH_POINT"]

# Branch point of the real W: both branches meet at (x, w) = (-1/e, -1).
BRANCH_POINT = -1.0 / math.e

# Absolute slack below -1/e accepted as rounding of the branch point.
_BRANCH_SLACK = 1e-14

_MAX_ITER = 100


def _halley(w: float, x: float) -> float:
    """Polish an estimate of W(x) by Halley's method."""
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if abs(wp1) < 1e-12:
            # At the branch point the iteration degenerates; the seed is
            # already a high-order series there.
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-16 * (2.0 + abs(w)):
            break
    if abs(w * math.exp(w) - x) > 1e-10 * max(1.0, abs(x)):
        raise DomainError(f"lambert_w failed to converge at x={x!r}")
    return w


def _seed_principal(x: float) -> float:
    if x < -0.25:
        # Series about the branch point in p = sqrt(2(1 + e x)).
        p = math.sqrt(2.0 * (1.0 + math.e * x))
        return -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    if x <= math.e:
        # log1p tracks W0 well below the asymptotic regime and stays
        # inside the Halley basin (always above -1).
        return math.log1p(x)
    # Asymptotic seed; safe once log(x) >= 1.
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def _seed_negative(x: float) -> float:
    if x > -0.1:
        # Near 0- the branch runs to -inf like log(-x).
        l1 = math.log(-x)
        l2 = math.log(-l1)
        return l1 - l2 + l2 / l1
    # Series about the branch point, mirrored for the lower branch.
    p = -math.sqrt(2.0 * (1.0 + math.e * x))
    return -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0


def lambert_w(x: float, branch: str = "principal") -> float:
    """Evaluate a real branch of the Lambert W function.

    Parameters
    ----------
    x : float
        Argument.  Must be >= -1/e for the principal branch and in
        [-1/e, 0) for the negative branch.
    branch : {"principal", "negative"}

    Returns
    -------
    float
        w with w * exp(w) = x, residual below ~1e-12.

    Raises
    ------
    DomainError
        If x lies outside the domain of the requested branch.
    """
    x = float(x)
    if math.isnan(x):
        raise DomainError("lambert_w: argument is NaN")
    if x < BRANCH_POINT:
        if x >= BRANCH_POINT - _BRANCH_SLACK:
            x = BRANCH_POINT
        else:
            raise DomainError(
                f"lambert_w: x={x!r} below the branch point -1/e"
            )
    if branch == "principal":
        if x == BRANCH_POINT:
            return -1.0
        if x == 0.0:
            return 0.0
        return _halley(_seed_principal(x), x)
    if branch == "negative":
        if not x < 0.0:
            raise DomainError(
                f"lambert_w: negative branch needs x in [-1/e, 0), got {x!r}"
            )
        if x == BRANCH_POINT:
            return -1.0
        return _halley(_seed_negative(x), x)
    raise DomainError(f"lambert_w: unknown branch {branch!r}")


def log_balance_root(R: float, branch: str = "upper") -> float:
    """Solve c - ln(c) = R for c > 0.

    The upper root (c >= 1) equals -Wm1(-exp(-R)) and the lower root
    (0 < c <= 1) equals -W0(-exp(-R)), but this direct Newton solve stays
    accurate for R in the thousands where exp(-R) underflows to zero.

    Parameters
    ----------
    R : float
        Right-hand side; must be >= 1 (the map c -> c - ln c has minimum 1
        at c = 1).
    branch : {"upper", "lower"}
    """
    R = float(R)
    if math.isnan(R) or R < 1.0 - 1e-12:
        raise DomainError(f"log_balance_root: need R >= 1, got {R!r}")
    if R <= 1.0:
        return 1.0
    if branch == "lower":
        if R > 708.0:
            # The lower root ~ exp(-R) leaves the normal float range; no
            # representable c can satisfy the equation to full precision.
            raise DomainError(
                f"log_balance_root: lower root underflows for R={R!r}"
            )
        # Newton in log space: y = ln c solves exp(y) - y = R with y <= 0.
        # The iteration is monotone and never leaves the branch.
        y = -R
        for _ in range(_MAX_ITER):
            ey = math.exp(y)
            step = (ey - y - R) / (ey - 1.0)
            y -= step
            if abs(step) <= 1e-16 * (1.0 + abs(y)):
                break
        return math.exp(y)
    if branch != "upper":
        raise DomainError(f"log_balance_root: unknown branch {branch!r}")
    # Upper root: Newton from c = R + ln R approaches from below and the
    # iterates stay above the minimum at c = 1.
    c = R + math.log(R)
    for _ in range(_MAX_ITER):
        f = c - math.log(c) - R
        fp = 1.0 - 1.0 / c
        if fp == 0.0:
            break
        step = f / fp
        nxt = c - step
        if nxt < 1.0:
            nxt = 0.5 * (c + 1.0)
        moved = abs(nxt - c)
        c = nxt
        if moved <= 1e-16 * (2.0 + abs(c)):
            break
    return c
