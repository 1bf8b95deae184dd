"""Spatially uniform equilibria, growth certificates, and horizon bounds.

The uniform steady states of the kinetic model solve lam = m * u * exp(-B*u)
where B is the total kernel mass.  Writing q = lam*B/m, the equation has two
positive roots when q < 1/e (a low stable one and a high unstable one), a
double root at q = 1/e, and none beyond -- the model then has no uniform
equilibrium and mass grows without bound.

A growth certificate witnesses unbounded growth on a region A: with
phi_A = min_coverage(kernel, A), threshold b and overshoot ratio kappa > 1,
the certificate is valid when b >= b_hat, kappa > 1 and
b*exp(-phi_A*b) < (lam/m) * (1/kappa) * (1 - 1/kappa).  A valid certificate
guarantees the density on A, once above b, grows at least at speed
v = lam - kappa*m*b*exp(-phi_A*b) forever.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ConfigurationError, DomainError
from .fields import Region
from .lambertw import lambert_w
from .potential import Potential, min_coverage

__all__ = [
    "ModelParams",
    "EquilibriumPair",
    "GrowthCertificate",
    "HorizonEstimate",
    "balance_smaller_root",
    "balance_larger_root",
    "equilibrium_densities",
    "threshold_depth",
    "min_threshold",
    "growth_speed",
    "make_certificate",
    "existence_horizon",
]

_INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class ModelParams:
    """Death rate m, birth intensity lam, and micro scale eps."""

    m: float
    lam: float
    eps: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ConfigurationError("death rate m must be positive")
        if not self.lam > 0:
            raise ConfigurationError("birth intensity lam must be positive")
        if not 0 < self.eps <= 1:
            raise ConfigurationError("scale eps must lie in (0, 1]")

    @property
    def lam_over_m(self) -> float:
        return self.lam / self.m


# ---------------------------------------------------------------------------
# roots of r * exp(-r) = q


def _balance(r: float) -> float:
    return r * math.exp(-r)


def _balance_root(q: float, lo: float, hi: float) -> float:
    """Bisection to 1e-12 plus one Newton polish on r*exp(-r) = q."""
    flo = _balance(lo) - q
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = _balance(mid) - q
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    r = 0.5 * (lo + hi)
    deriv = (1.0 - r) * math.exp(-r)
    if deriv != 0.0:
        r -= (_balance(r) - q) / deriv
    return r


def balance_smaller_root(q: float) -> float:
    """The root of r*exp(-r) = q in (0, 1]."""
    if not 0 < q <= _INV_E:
        raise DomainError(f"no real balance root for q={q}")
    if abs(q - _INV_E) < 1e-15:
        return 1.0
    return _balance_root(q, 0.0, 1.0)


def balance_larger_root(q: float) -> float:
    """The root of r*exp(-r) = q in [1, inf)."""
    if not 0 < q <= _INV_E:
        raise DomainError(f"no real balance root for q={q}")
    if abs(q - _INV_E) < 1e-15:
        return 1.0
    hi = 51.0
    while _balance(hi) > q:
        hi = 1.0 + 2.0 * (hi - 1.0)
    return _balance_root(q, 1.0, hi)


# ---------------------------------------------------------------------------
# uniform equilibria


@dataclass(frozen=True)
class EquilibriumPair:
    """The two uniform steady densities (or their absence).

    ``low`` is the stable density, ``high`` the unstable one; both are None
    in the supercritical regime where no uniform equilibrium exists.
    """

    low: float | None
    high: float | None
    regime: str                   # "subcritical" | "critical" | "supercritical"
    residual_low: float | None
    residual_high: float | None
    kernel_mass: float

    def to_dict(self) -> dict:
        return {
            "kappa1": self.low,
            "kappa2": self.high,
            "regime": self.regime,
            "residual_kappa1": self.residual_low,
            "residual_kappa2": self.residual_high,
            "beta": self.kernel_mass,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def equilibrium_densities(params: ModelParams, kernel_mass: float) -> EquilibriumPair:
    """Solve lam = m*u*exp(-B*u) for the uniform densities.

    Uses both real branches of Lambert W; the bisection route
    (``balance_smaller_root`` / ``balance_larger_root``) provides an
    independent cross-check in the test suite.
    """
    beta = kernel_mass
    if not beta > 0:
        raise DomainError("kernel mass must be positive to define equilibria")
    q = params.lam * beta / params.m
    if q > _INV_E * (1.0 + 1e-12):
        return EquilibriumPair(None, None, "supercritical", None, None, beta)

    def residual(u: float) -> float:
        return abs(params.lam - params.m * u * math.exp(-beta * u))

    if abs(q - _INV_E) <= 1e-12 * _INV_E:
        u = 1.0 / beta
        r = residual(u)
        return EquilibriumPair(u, u, "critical", r, r, beta)
    low = -lambert_w(-q, branch="principal") / beta
    high = -lambert_w(-q, branch="negative") / beta
    return EquilibriumPair(low, high, "subcritical", residual(low), residual(high), beta)


# ---------------------------------------------------------------------------
# certificate arithmetic


def _theta_raw(lam_over_m: float, min_cov: float, b: float) -> float:
    return b * math.exp(-min_cov * b) / lam_over_m


def min_threshold(lam_over_m: float, min_cov: float) -> float:
    """Smallest admissible growth threshold b_hat for the given coverage.

    This is the larger root of b*exp(-min_cov*b) = lam_over_m/4 when that
    equation is solvable, and 1/min_cov otherwise.
    """
    if not min_cov > 0:
        raise DomainError("min_threshold requires positive minimum coverage")
    if not lam_over_m > 0:
        raise DomainError("min_threshold requires positive lam_over_m")
    q = lam_over_m * min_cov / 4.0
    if q <= _INV_E:
        return balance_larger_root(q) / min_cov
    return 1.0 / min_cov


def threshold_depth(lam_over_m: float, min_cov: float, b: float) -> float:
    """Normalized decay depth theta(b) = (m/lam)*b*exp(-min_cov*b).

    Defined (and monotone decreasing) for b at or above the minimal
    admissible threshold.
    """
    b_hat = min_threshold(lam_over_m, min_cov)
    if b < b_hat * (1.0 - 1e-12):
        raise DomainError(
            f"threshold b={b} below the minimal admissible value {b_hat}"
        )
    return _theta_raw(lam_over_m, min_cov, b)


def growth_speed(params: ModelParams, min_cov: float, b: float, kappa: float) -> float:
    """Guaranteed density growth speed lam - kappa*m*b*exp(-min_cov*b)."""
    return params.lam - kappa * params.m * b * math.exp(-min_cov * b)


@dataclass(frozen=True)
class GrowthCertificate:
    """Witness that the density grows without bound on a region.

    All numeric fields are populated even when ``valid`` is false; the
    ``violations`` tuple then names every failed clause.
    """

    region: Region
    b: float
    kappa: float
    min_admissible: float         # smallest usable b for this coverage
    theta: float                  # normalized decay depth at b
    speed: float                  # guaranteed growth speed when valid
    min_cov: float                # minimum kernel coverage over the region
    valid: bool
    violations: tuple
    min_admissible_slack: float   # lam/(4m) minus the balance value at b_hat

    def to_dict(self) -> dict:
        return {
            "region": {"lo": list(self.region.lo), "hi": list(self.region.hi)},
            "b": self.b,
            "kappa": self.kappa,
            "b_hat": self.min_admissible,
            "theta_of_b": self.theta,
            "v": self.speed,
            "valid": self.valid,
            "violations": list(self.violations),
            "phi_A": self.min_cov,
            "b_hat_residual": self.min_admissible_slack,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def make_certificate(
    params: ModelParams,
    potential: Potential,
    region: Region,
    b: float,
    kappa: float,
) -> GrowthCertificate:
    """Assemble and check a growth certificate for the region.

    Validity requires all three clauses: b at or above the minimal
    threshold, overshoot ratio above one, and the decay-depth inequality
    theta(b) < (1/kappa)*(1 - 1/kappa).
    """
    phi_a = min_coverage(potential, region)
    if not phi_a > 0:
        raise DomainError(
            "region has zero minimum kernel coverage; certificate undefined"
        )
    lam_over_m = params.lam_over_m
    b_hat = min_threshold(lam_over_m, phi_a)
    theta = _theta_raw(lam_over_m, phi_a, b)
    speed = growth_speed(params, phi_a, b, kappa)
    violations = []
    if b < b_hat * (1.0 - 1e-12):
        violations.append(f"b={b} below minimal admissible threshold b_hat={b_hat}")
    if not kappa > 1.0:
        violations.append(f"overshoot ratio kappa={kappa} must exceed 1")
    margin = (1.0 / kappa) * (1.0 - 1.0 / kappa) if kappa > 0 else 0.0
    if not theta < margin:
        violations.append(
            f"decay depth theta={theta} not below kappa margin {margin}"
        )
    slack = params.lam / (4.0 * params.m) - b_hat * math.exp(-phi_a * b_hat)
    return GrowthCertificate(
        region=region,
        b=b,
        kappa=kappa,
        min_admissible=b_hat,
        theta=theta,
        speed=speed,
        min_cov=phi_a,
        valid=not violations,
        violations=tuple(violations),
        min_admissible_slack=slack,
    )


# ---------------------------------------------------------------------------
# short-time existence horizons


@dataclass(frozen=True)
class HorizonEstimate:
    """Guaranteed lifetime of the correlation-function hierarchy.

    ``t_mayer`` uses the Mayer mass of the kernel, ``t_mass`` the plain
    mass (never larger when the kernel is nonnegative).  Iterating the
    estimate yields the pair, so ``t, t1 = existence_horizon(...)`` works.
    """

    t_mayer: float
    t_mass: float
    bound: float        # universal ceiling 1/(1 + 2*sqrt(lam*mayer_mass))
    bound_ok: bool

    def __iter__(self):
        return iter((self.t_mayer, self.t_mass))

    def to_dict(self) -> dict:
        return {
            "T": self.t_mayer,
            "T1": self.t_mass,
            "bound": self.bound,
            "bound_ok": self.bound_ok,
        }


def existence_horizon(
    params: ModelParams,
    mayer: float,
    total: float,
    c_low: float,
    c_high: float,
) -> HorizonEstimate:
    """Lifetime T = C0*(C-C0) / (C^2*(exp(C*Cphi) + lam/C0)) and its twin.

    ``c_low`` and ``c_high`` are the initial and working correlation
    scales C0 < C; equal scales give a zero-width (T = 0) horizon.
    """
    if not (c_low > 0 and c_high >= c_low):
        raise DomainError("need correlation scales c_high >= c_low > 0")
    if mayer < 0 or total < 0:
        raise DomainError("kernel masses must be nonnegative")

    def horizon(cphi: float) -> float:
        num = c_low * (c_high - c_low)
        den = c_high**2 * (math.exp(c_high * cphi) + params.lam / c_low)
        return num / den

    t = horizon(mayer)
    t1 = horizon(total)
    ceiling = 1.0 / (1.0 + 2.0 * math.sqrt(params.lam * mayer))
    return HorizonEstimate(t, t1, ceiling, t <= ceiling + 1e-15)
