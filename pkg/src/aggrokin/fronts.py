"""Front-expansion recurrence and arrival-time analysis.

For the unit-box kernel the growing cluster advances in fixed geometric
steps: segments of length one half whose midpoint moves by one quarter.
Crossing step k requires the density to reach a level d_k given by the
recurrence

    d_k * exp(-d_k / 4) = (lam / (4 m)) * exp(-d_{k-1} / 4)

(larger root), with per-step time t_k = (2/lam) * (d_k - d_{k-1}).  In the
normalized variable c_k = d_k / 4 and with mu = ln(lam / (16 m)) this is
the log-space fixed-point relation c_k - ln(c_k) = c_{k-1} - mu, which is
how it is iterated here -- the exponential form underflows once c exceeds
a few hundred, while the log form stays exact.

The predicted arrival time at distance x sums the first k(x) step times,
which telescopes to (2/lam) * (d_{k(x)} - d_0); measured arrival times
from a solver run are fitted against the A*|x|*ln|x| + B*|x| law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibria import ModelParams
from .errors import DomainError, InsufficientDataError, RegimeError
from .lambertw import lambert_w, log_balance_root

__all__ = [
    "FrontRecurrence",
    "StepGeometry",
    "AsymptoteReport",
    "FitReport",
    "front_min_threshold",
    "front_recurrence",
    "check_asymptote",
    "predicted_arrival",
    "fit_arrivals",
    "threshold_for_depth",
]

SEGMENT_LENGTH = 0.5
ADVANCE_STEP = 0.25
OVERLAP_MASS = 0.25


def front_min_threshold(params: ModelParams) -> float:
    """Smallest density level from which the step recurrence can start.

    For lam <= 16 m / e this is the larger root of b*exp(-b/4) = lam/(4m).
    Beyond that the equation has no root; the recurrence then has a fixed
    point at lam/(4m), so any usable start must exceed max(4, lam/(4m)).
    """
    ratio = params.lam / (16.0 * params.m)
    if ratio <= math.exp(-1.0):
        return -4.0 * lambert_w(-ratio, branch="negative")
    return max(4.0, params.lam / (4.0 * params.m))


@dataclass
class FrontRecurrence:
    """The level sequence d_k, its normalized form c_k, and step times."""

    mu: float
    d_seq: np.ndarray        # d_0 .. d_K
    c_seq: np.ndarray        # c_k = d_k / 4
    t_seq: np.ndarray        # t_1 .. t_K
    log_residual: float      # worst |c_k - ln c_k + mu - c_{k-1}|

    @property
    def steps(self) -> int:
        return self.d_seq.size - 1

    def asymptote(self, k) -> np.ndarray:
        """Closed-form leading behavior k*ln k + k*ln ln k - (mu+1)*k."""
        k = np.asarray(k, dtype=float)
        out = np.full(k.shape, np.nan)
        ok = k >= 2
        kk = k[ok]
        out[ok] = kk * np.log(kk) + kk * np.log(np.log(kk)) - (self.mu + 1.0) * kk
        return out if out.shape else float(out)

    def errors(self) -> np.ndarray:
        """c_k minus the asymptote, NaN where the asymptote is undefined."""
        ks = np.arange(self.c_seq.size, dtype=float)
        return self.c_seq - self.asymptote(ks)

    def rows(self):
        """CSV rows: k, d_k, c_k, t_k, asymptote, error."""
        asym = self.asymptote(np.arange(self.c_seq.size))
        err = self.c_seq - asym
        for k in range(self.c_seq.size):
            tk = float(self.t_seq[k - 1]) if k >= 1 else float("nan")
            yield k, float(self.d_seq[k]), float(self.c_seq[k]), tk, float(
                asym[k]
            ), float(err[k])


def front_recurrence(params: ModelParams, d0: float, steps: int) -> FrontRecurrence:
    """Iterate the level recurrence for the given number of steps.

    Requires d0 strictly above ``front_min_threshold`` so every step has a
    larger root above the previous level; the sequence is then strictly
    increasing with positive step times.
    """
    if steps < 1:
        raise DomainError("front_recurrence needs at least one step")
    b_hat = front_min_threshold(params)
    if not d0 > b_hat:
        raise DomainError(
            f"start level d0={d0} must exceed the minimal threshold {b_hat}"
        )
    mu = math.log(params.lam / (16.0 * params.m))
    c = np.empty(steps + 1)
    c[0] = d0 / 4.0
    worst = 0.0
    for k in range(1, steps + 1):
        r = c[k - 1] - mu
        if r < 1.0:
            raise RegimeError(
                f"recurrence left its domain at step {k} (level too low)"
            )
        c[k] = log_balance_root(r, branch="upper")
        worst = max(worst, abs(c[k] - math.log(c[k]) + mu - c[k - 1]))
    d = 4.0 * c
    t = (2.0 / params.lam) * np.diff(d)
    return FrontRecurrence(mu, d, c, t, worst)


@dataclass
class AsymptoteReport:
    """Agreement of the recurrence with its closed-form growth law.

    Residuals are normalized per step (e_k / k): the o(.) correction in
    the growth law is sublinear in k, not vanishing, so the honest check
    is that the per-step error shrinks along the sequence.
    """

    passed: bool
    per_step_quarter: float   # |e_{K/4}| / (K/4)
    per_step_half: float
    per_step_final: float
    bound: float              # 0.05 * ln K
    decay_ok: bool
    bound_ok: bool
    leading_ratio: float      # c_K / (K ln K)
    steps: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "per_step_quarter": self.per_step_quarter,
            "per_step_half": self.per_step_half,
            "per_step_final": self.per_step_final,
            "bound": self.bound,
            "decay_ok": self.decay_ok,
            "bound_ok": self.bound_ok,
            "leading_ratio": self.leading_ratio,
            "steps": self.steps,
        }


def check_asymptote(seq: FrontRecurrence) -> AsymptoteReport:
    """Check the per-step asymptote error decays along the sequence.

    Pass requires |e_K|/K < |e_{K/2}|/(K/2) < |e_{K/4}|/(K/4) and the
    final per-step error below 0.05 * ln K.
    """
    K = seq.steps
    if K < 100:
        raise InsufficientDataError("asymptote check needs at least 100 steps")
    err = seq.errors()

    def per_step(k: int) -> float:
        return abs(err[k]) / k

    q, h, f = per_step(K // 4), per_step(K // 2), per_step(K)
    bound = 0.05 * math.log(K)
    decay_ok = f < h < q
    bound_ok = f < bound
    return AsymptoteReport(
        passed=bool(decay_ok and bound_ok),
        per_step_quarter=q,
        per_step_half=h,
        per_step_final=f,
        bound=bound,
        decay_ok=bool(decay_ok),
        bound_ok=bool(bound_ok),
        leading_ratio=float(seq.c_seq[K] / (K * math.log(K))),
        steps=K,
    )


@dataclass(frozen=True)
class StepGeometry:
    """Geometry of the advancing front for the unit-box kernel."""

    region_halfwidth: float
    advance: float = ADVANCE_STEP

    def steps_to(self, x: float) -> int:
        """Number of quarter-steps needed to reach |x| from the region."""
        excess = abs(x) - self.region_halfwidth
        if excess <= 0:
            return 0
        return int(math.ceil(excess / self.advance - 1e-12))


def predicted_arrival(
    params: ModelParams, d0: float, x: float, geometry: StepGeometry
) -> float:
    """Predicted time for the front to reach x: (2/lam)*(d_k(x) - d_0)."""
    k = geometry.steps_to(x)
    if k == 0:
        return 0.0
    seq = front_recurrence(params, d0, k)
    return (2.0 / params.lam) * float(seq.d_seq[k] - seq.d_seq[0])


@dataclass
class FitReport:
    """Fit of measured arrival times against the x*ln x growth law."""

    coef_xlogx: float
    coef_x: float
    bound_ok: bool            # every measured time <= 1.05 * predicted
    max_time_ratio: float     # worst measured / predicted
    rms_residual: float       # of the least-squares fit
    probes: int

    def to_dict(self) -> dict:
        return {
            "coef_xlogx": self.coef_xlogx,
            "coef_x": self.coef_x,
            "bound_ok": self.bound_ok,
            "max_time_ratio": self.max_time_ratio,
            "rms_residual": self.rms_residual,
            "probes": self.probes,
        }


def fit_arrivals(probes, measured_times, predicted_fn) -> FitReport:
    """Compare measured arrivals with predictions and fit the growth law.

    ``predicted_fn(x)`` supplies the recurrence prediction; the theory
    gives an upper bound, so each measured time must stay below it (with
    five percent slack).  The least-squares model is
    t = A * |x| ln|x| + B * |x| with no intercept.
    """
    xs = np.asarray(probes, dtype=float)
    ts = np.asarray(measured_times, dtype=float)
    keep = np.isfinite(ts)
    xs, ts = xs[keep], ts[keep]
    if xs.size < 4:
        raise InsufficientDataError(
            f"front fit needs at least 4 crossed probes, got {xs.size}"
        )
    pred = np.array([predicted_fn(x) for x in xs])
    if np.any(pred <= 0):
        raise DomainError("predicted arrival times must be positive at the probes")
    ratios = ts / pred
    ax = np.abs(xs)
    design = np.stack([ax * np.log(ax), ax], axis=1)
    coef, *_ = np.linalg.lstsq(design, ts, rcond=None)
    resid = ts - design @ coef
    return FitReport(
        coef_xlogx=float(coef[0]),
        coef_x=float(coef[1]),
        bound_ok=bool(np.all(ratios <= 1.05)),
        max_time_ratio=float(ratios.max()),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        probes=int(xs.size),
    )


def threshold_for_depth(params: ModelParams, coverage_at: float, theta: float) -> float:
    """Level b(x) whose decay depth at coverage s equals the given theta.

    Solves b * exp(-s*b) = (lam/m) * theta for the larger root.  Used to
    transport a certificate threshold to viewpoints with lower coverage:
    smaller coverage forces a higher level.
    """
    if not coverage_at > 0:
        raise DomainError("coverage must be positive")
    if not theta > 0:
        raise DomainError("decay depth must be positive")
    arg = coverage_at * params.lam_over_m * theta
    if arg > math.exp(-1.0) * (1.0 + 1e-12):
        raise DomainError(
            f"depth {theta} outside the invertible range at coverage {coverage_at}"
        )
    arg = min(arg, math.exp(-1.0))
    return -lambert_w(-arg, branch="negative") / coverage_at
