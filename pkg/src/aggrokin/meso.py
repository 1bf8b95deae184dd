"""Grid solvers for the kinetic equation and its verification instruments.

The density u(x, t) on a periodic box evolves by

    du/dt = -m * u * exp(-(phi * u)) + lam          (* = convolution)

Two independent integration schemes are provided: a classical RK4
method-of-lines march (``solve``), and the fixed-point iteration of the
integral-form map on short contraction windows (``solve_picard``).  On top
of them sit the checks used in the experiments: boundedness below the high
equilibrium, the pointwise comparison principle, Lyapunov stability of the
low equilibrium, and front tracking for the unbounded-growth regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibria import (
    GrowthCertificate,
    ModelParams,
    equilibrium_densities,
)
from .errors import (
    ConfigurationError,
    ContractionError,
    IntegrationError,
    RegimeError,
    ResolutionError,
)
from .fields import Field, FieldPath, Grid
from .potential import Potential, convolve, mass

__all__ = [
    "Trajectory",
    "PicardSolution",
    "BoundedReport",
    "ComparisonReport",
    "StabilityReport",
    "FrontTrace",
    "rhs",
    "rk4_step",
    "default_dt",
    "solve",
    "phi_map",
    "solve_picard",
    "check_bounded",
    "check_comparison",
    "check_stability",
    "front_trace",
    "smooth_noise",
]

POSITIVITY_TOL = 1e-8
MIN_TIME_NODES = 16
PICARD_WINDOW_NODES = 64


# ---------------------------------------------------------------------------
# right-hand side and RK4 stepping


def _rhs_values(params: ModelParams, p: Potential, u: Field, conv_method: str) -> np.ndarray:
    shade = convolve(p, u, method=conv_method).values
    return -params.m * u.values * np.exp(-shade) + params.lam


def rhs(params: ModelParams, p: Potential, u: Field, conv_method: str = "fft") -> Field:
    """Time derivative of the density field (death shaded by neighbors, plus births)."""
    return Field(u.grid, _rhs_values(params, p, u, conv_method), u.time)


def _require_finite(arr: np.ndarray, t: float) -> np.ndarray:
    bad = ~np.isfinite(arr)
    if np.any(bad):
        cell = tuple(int(i) for i in np.argwhere(bad)[0])
        raise IntegrationError(f"non-finite density at cell {cell} near t={t}")
    return arr


def rk4_step(
    params: ModelParams, p: Potential, u: Field, dt: float, conv_method: str = "fft"
) -> Field:
    """One classical Runge-Kutta step.  Positivity is monitored, never enforced."""
    if not dt > 0:
        raise ConfigurationError("rk4_step needs dt > 0")
    g = u.grid
    y = u.values
    t = u.time
    k1 = _rhs_values(params, p, u, conv_method)
    k2 = _rhs_values(
        params, p, Field(g, _require_finite(y + 0.5 * dt * k1, t), t), conv_method
    )
    k3 = _rhs_values(
        params, p, Field(g, _require_finite(y + 0.5 * dt * k2, t), t), conv_method
    )
    k4 = _rhs_values(
        params, p, Field(g, _require_finite(y + dt * k3, t), t), conv_method
    )
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Field(g, _require_finite(out, t + dt), t + dt)


def default_dt(params: ModelParams, p: Potential) -> float:
    """Step size keyed to the relaxation scale of the uniform dynamics."""
    beta = mass(p)
    low = params.lam / params.m  # uniform equilibrium of the non-interacting model
    if beta > 0:
        q = params.lam * beta / params.m
        if q < math.exp(-1.0) * (1.0 - 1e-12):
            low = equilibrium_densities(params, beta).low
        else:
            low = 1.0
    rate = params.m + params.lam / low
    return min(1e-2, 0.1 / rate)


@dataclass
class Trajectory:
    """Snapshots of a solver run plus the bounds monitored along the way."""

    path: FieldPath
    min_value: float
    max_value: float
    dt: float

    @property
    def positivity_ok(self) -> bool:
        return self.min_value >= -POSITIVITY_TOL

    @property
    def final(self) -> Field:
        return self.path.final


def _report_times(t_end: float, report_every: float) -> np.ndarray:
    n = max(1, int(round(t_end / report_every)))
    # keep the spacing close to the request but land exactly on t_end
    return np.linspace(0.0, t_end, n + 1)


def solve(
    params: ModelParams,
    p: Potential,
    u0: Field,
    t_end: float,
    dt: float = None,
    report_every: float = None,
    conv_method: str = "fft",
) -> Trajectory:
    """Integrate the kinetic equation, reporting snapshots on a uniform mesh.

    Substeps between report times are uniform so every report time is hit
    exactly.  The returned trajectory records the global min/max over all
    substeps, not just the stored snapshots.
    """
    if not t_end > 0:
        raise ConfigurationError("solve needs t_end > 0")
    if dt is None:
        dt = default_dt(params, p)
    if report_every is None:
        report_every = max(dt, t_end / 200.0)
    times = _report_times(t_end, report_every)
    snaps = [u0.values.copy()]
    lo = u0.min()
    hi = u0.max()
    u = u0
    for t_next in times[1:]:
        span = t_next - u.time
        n_sub = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / n_sub
        for _ in range(n_sub):
            u = rk4_step(params, p, u, h, conv_method)
            lo = min(lo, u.min())
            hi = max(hi, u.max())
        u = Field(u.grid, u.values, t_next)
        snaps.append(u.values.copy())
    path = FieldPath(u0.grid, times, np.stack(snaps))
    return Trajectory(path, lo, hi, dt)


def solve_path(
    params: ModelParams,
    p: Potential,
    u0: Field,
    times,
    dt: float = None,
    conv_method: str = "fft",
) -> FieldPath:
    """Integrate the kinetic equation, landing exactly on the given times.

    ``times`` must be increasing and start at the initial time of ``u0``.
    Useful for comparing against a path produced on a non-uniform mesh.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 1 or abs(times[0] - u0.time) > 1e-12:
        raise ConfigurationError("times must start at the initial field's time")
    if dt is None:
        dt = default_dt(params, p)
    snaps = [u0.values.copy()]
    u = u0
    for t_next in times[1:]:
        span = t_next - u.time
        if span <= 0:
            raise ConfigurationError("times must be strictly increasing")
        n_sub = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / n_sub
        for _ in range(n_sub):
            u = rk4_step(params, p, u, h, conv_method)
        u = Field(u.grid, u.values, t_next)
        snaps.append(u.values.copy())
    return FieldPath(u0.grid, times, np.stack(snaps))


# ---------------------------------------------------------------------------
# integral-form fixed-point scheme


def phi_map(params: ModelParams, p: Potential, v: FieldPath, u0: Field) -> FieldPath:
    """Apply the integral-form solution map to a candidate path.

    Given a nonnegative path v on [t0, t0+T], returns the path
        t -> exp(-m * I(t0, t)) * u0 + lam * int_{t0}^{t} exp(-m * I(s, t)) ds,
    where I(s, t) integrates exp(-(phi * v)) in time.  Time integrals use
    the trapezoid rule on the stored mesh.  A fixed point of this map
    solves the kinetic equation with initial value u0.
    """
    times = np.asarray(v.times, dtype=float)
    if times.size < MIN_TIME_NODES:
        raise ResolutionError(
            f"phi_map needs at least {MIN_TIME_NODES} time nodes, got {times.size}"
        )
    if float(np.min(v.values)) < -1e-12:
        raise ConfigurationError("phi_map expects a nonnegative candidate path")
    g = v.grid
    m = params.m
    shade = np.empty_like(v.values)
    for j in range(times.size):
        shade[j] = np.exp(-convolve(p, v.at(j)).values)
    # cumulative trapezoid of shade over time, per cell
    dt = np.diff(times)
    incr = 0.5 * dt.reshape((-1,) + (1,) * g.dim) * (shade[1:] + shade[:-1])
    cum = np.concatenate([np.zeros((1,) + g.shape), np.cumsum(incr, axis=0)])
    out = np.empty_like(v.values)
    out[0] = u0.values
    for i in range(1, times.size):
        survive = np.exp(-m * (cum[i] - cum[:i + 1]))  # exponent <= 0
        birth = np.zeros(g.shape)
        for j in range(i):
            birth += 0.5 * dt[j] * (survive[j] + survive[j + 1])
        out[i] = survive[0] * u0.values + params.lam * birth
    return FieldPath(g, times, out)


@dataclass
class PicardSolution:
    """Fixed-point solution path with contraction diagnostics."""

    path: FieldPath
    window: float
    sweeps: tuple
    max_ratio: float      # worst measured per-sweep contraction factor

    @property
    def final(self) -> Field:
        return self.path.final


def contraction_window(params: ModelParams, beta: float, c: float) -> float:
    """Largest window T with lam*B*m*T^2/2 + c*B*m*T <= 1/2."""
    if beta <= 0:
        return math.inf
    a = params.lam * beta * params.m
    b = c * beta * params.m
    return (-b + math.sqrt(b * b + a)) / a


def solve_picard(
    params: ModelParams,
    p: Potential,
    u0: Field,
    c: float,
    t_end: float,
    tol: float = 1e-10,
    nodes: int = PICARD_WINDOW_NODES,
) -> PicardSolution:
    """Solve by iterating the integral-form map on contraction windows.

    Requires a uniform bound c on the data with 0 <= u0 <= c and c inside
    the equilibrium band [low, high]; the window length is chosen so the
    map provably contracts, and successive windows restart from the last
    computed field.
    """
    beta = mass(p)
    if beta > 0:
        eq = equilibrium_densities(params, beta)
        if eq.regime == "supercritical":
            raise RegimeError(
                "no uniform equilibria: fixed-point windows need the "
                "subcritical or critical regime"
            )
        if not (eq.low <= c * (1 + 1e-12) and c <= eq.high * (1 + 1e-12)):
            raise ConfigurationError(
                f"bound c={c} outside the equilibrium band [{eq.low}, {eq.high}]"
            )
    if u0.min() < -1e-12 or u0.max() > c * (1 + 1e-12):
        raise ConfigurationError("initial field must satisfy 0 <= u0 <= c")
    if not t_end > 0:
        raise ConfigurationError("solve_picard needs t_end > 0")

    window = min(contraction_window(params, beta, c), t_end)
    all_times = [np.array([0.0])]
    all_vals = [u0.values[None].copy()]
    sweeps = []
    worst = 0.0
    start = u0
    t0 = 0.0
    while t0 < t_end - 1e-12:
        t1 = min(t0 + window, t_end)
        times = np.linspace(t0, t1, nodes)
        v = FieldPath(
            start.grid, times, np.broadcast_to(start.values, (nodes,) + start.grid.shape).copy()
        )
        prev_change = None
        n_sweeps = 0
        for _ in range(200):
            nxt = phi_map(params, p, v, start)
            change = float(np.max(np.abs(nxt.values - v.values)))
            n_sweeps += 1
            v = nxt
            if prev_change is not None and prev_change > tol:
                ratio = change / prev_change
                worst = max(worst, ratio)
                if ratio >= 1.0 and change > tol:
                    raise ContractionError(
                        f"fixed-point sweep expanded (ratio {ratio:.3f}) on "
                        f"window [{t0}, {t1}]"
                    )
            prev_change = change
            if change < tol:
                break
        else:
            raise ContractionError(
                f"fixed-point iteration did not reach tol {tol} on window [{t0}, {t1}]"
            )
        sweeps.append(n_sweeps)
        all_times.append(times[1:])
        all_vals.append(v.values[1:])
        start = v.final
        t0 = t1
    path = FieldPath(u0.grid, np.concatenate(all_times), np.concatenate(all_vals))
    return PicardSolution(path, window, tuple(sweeps), worst)


# ---------------------------------------------------------------------------
# regime checks


@dataclass
class BoundedReport:
    """Outcome of the bounded-regime check."""

    passed: bool
    max_density: float
    high_equilibrium: float
    band: tuple | None       # (low_eq, c) when the band clause applied
    band_ok: bool
    min_density: float
    t_end: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_density": self.max_density,
            "kappa2": self.high_equilibrium,
            "band": list(self.band) if self.band else None,
            "band_ok": self.band_ok,
            "min_density": self.min_density,
            "t_end": self.t_end,
        }


def check_bounded(
    params: ModelParams,
    p: Potential,
    u0: Field,
    t_end: float,
    dt: float = None,
) -> BoundedReport:
    """Verify the density stays below the high equilibrium.

    If the data also starts inside a band [low, c] with c below the high
    equilibrium, the run must stay inside (nearly) that band.
    """
    beta = mass(p)
    if beta <= 0:
        raise ConfigurationError("bounded-regime check needs an interacting kernel")
    if params.lam > params.m / (beta * math.e) * (1 + 1e-12):
        raise ConfigurationError(
            "bounded-regime check requires lam <= m/(B*e) (regulation regime)"
        )
    eq = equilibrium_densities(params, beta)
    if u0.min() < -1e-12 or u0.max() > eq.high * (1 + 1e-12):
        raise ConfigurationError("initial field must satisfy 0 <= u0 <= high equilibrium")
    band = None
    if u0.min() >= eq.low * (1 - 1e-12):
        band = (eq.low, u0.max())
    traj = solve(params, p, u0, t_end, dt=dt)
    tol = 1e-6
    ok = traj.max_value <= eq.high + tol
    band_ok = True
    if band is not None:
        band_ok = (traj.min_value >= band[0] - tol) and (traj.max_value <= band[1] + tol)
    return BoundedReport(
        passed=bool(ok and band_ok),
        max_density=traj.max_value,
        high_equilibrium=eq.high,
        band=band,
        band_ok=bool(band_ok),
        min_density=traj.min_value,
        t_end=t_end,
    )


@dataclass
class ComparisonReport:
    """Outcome of the pointwise ordering check between two runs."""

    passed: bool
    max_violation: float
    t_end: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "t_end": self.t_end,
        }


def check_comparison(
    params: ModelParams,
    p: Potential,
    u0_low: Field,
    u0_high: Field,
    t_end: float,
    dt: float = None,
) -> ComparisonReport:
    """Co-integrate an ordered pair and verify the order is preserved."""
    if u0_low.grid != u0_high.grid:
        raise ConfigurationError("comparison pair must share a grid")
    if np.any(u0_low.values > u0_high.values + 1e-12) or u0_low.min() < -1e-12:
        raise ConfigurationError("need 0 <= u0_low <= u0_high pointwise")
    beta = mass(p)
    if beta > 0:
        eq = equilibrium_densities(params, beta)
        if eq.regime != "supercritical" and u0_high.max() > eq.high * (1 + 1e-12):
            raise ConfigurationError("upper field must start below the high equilibrium")
    lo = solve(params, p, u0_low, t_end, dt=dt)
    hi = solve(params, p, u0_high, t_end, dt=dt)
    gap = lo.path.values - hi.path.values
    return ComparisonReport(
        passed=bool(np.max(gap) <= 1e-6),
        max_violation=float(np.max(gap)),
        t_end=t_end,
    )


def smooth_noise(grid: Grid, seed: int, modes: int = 4) -> np.ndarray:
    """Zero-mean smooth random field with sup-norm one (low Fourier modes)."""
    rng = np.random.default_rng(seed)
    x = grid.coords()
    out = np.zeros(grid.shape)
    twopi = 2.0 * math.pi / grid.length
    if grid.dim == 1:
        xs = x[..., 0]
        for k in range(1, modes + 1):
            a, b = rng.normal(size=2)
            out += a * np.cos(twopi * k * xs) + b * np.sin(twopi * k * xs)
    else:
        xs, ys = x[..., 0], x[..., 1]
        for kx in range(0, modes + 1):
            for ky in range(0, modes + 1):
                if kx == 0 and ky == 0:
                    continue
                a, b = rng.normal(size=2)
                arg = twopi * (kx * xs + ky * ys)
                out += a * np.cos(arg) + b * np.sin(arg)
        out -= out.mean()  # cos(0*x) cross terms can leave a tiny mean
    return out / np.max(np.abs(out))


@dataclass
class StabilityReport:
    """Outcome of the low-equilibrium stability check."""

    passed: bool
    initial_deviation: float
    max_deviation: float
    final_deviation: float
    bounded_ok: bool
    decayed_ok: bool
    t_end: float
    low_equilibrium: float
    times: np.ndarray = None
    deviations: np.ndarray = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "initial_deviation": self.initial_deviation,
            "max_deviation": self.max_deviation,
            "final_deviation": self.final_deviation,
            "bounded_ok": self.bounded_ok,
            "decayed_ok": self.decayed_ok,
            "t_end": self.t_end,
            "kappa1": self.low_equilibrium,
        }


def stability_horizon(params: ModelParams, beta: float) -> float:
    """Default observation time: 50 relaxation periods of the low state."""
    eq = equilibrium_densities(params, beta)
    return 50.0 / (params.m * math.exp(-beta * eq.low))


def check_stability(
    params: ModelParams,
    p: Potential,
    amplitude: float,
    t_end: float = None,
    grid: Grid = None,
    seed: int = 0,
    dt: float = None,
) -> StabilityReport:
    """Perturb the low equilibrium and verify the deviation stays small and decays.

    The perturbation is a seeded smooth random field with zero mean and
    sup-norm one, scaled by ``amplitude``.  Pass requires the sup-norm
    deviation never to exceed twice its initial value and to fall below
    ten percent of it by the end.
    """
    beta = mass(p)
    if beta <= 0:
        raise ConfigurationError("stability check needs an interacting kernel")
    eq = equilibrium_densities(params, beta)
    if eq.regime != "subcritical":
        raise RegimeError("stability check requires the subcritical regime")
    if amplitude < 0 or amplitude > 0.1 * eq.low * (1 + 1e-12):
        raise ConfigurationError(
            f"amplitude must lie in [0, {0.1 * eq.low}] (one tenth of the low state)"
        )
    if t_end is None:
        t_end = stability_horizon(params, beta)
    if grid is None:
        side = max(8.0 * p.cutoff, 4.0)
        cells = 32
        while (side / cells) > p.cutoff / 4.0:
            cells *= 2
            if cells > 1 << 15:
                raise ResolutionError("kernel cutoff too small for a default grid")
        grid = Grid(dim=p.dim, length=side, cells=cells)
    noise = smooth_noise(grid, seed) if amplitude > 0 else np.zeros(grid.shape)
    u0 = Field(grid, eq.low + amplitude * noise)
    traj = solve(params, p, u0, t_end, dt=dt)
    dev = np.max(np.abs(traj.path.values - eq.low), axis=tuple(range(1, 1 + grid.dim)))
    initial = float(dev[0])
    bounded_ok = bool(np.all(dev <= 2.0 * initial + 1e-14))
    decayed_ok = bool(dev[-1] <= 0.1 * initial + 1e-14)
    return StabilityReport(
        passed=bounded_ok and decayed_ok,
        initial_deviation=initial,
        max_deviation=float(dev.max()),
        final_deviation=float(dev[-1]),
        bounded_ok=bounded_ok,
        decayed_ok=decayed_ok,
        t_end=t_end,
        low_equilibrium=eq.low,
        times=traj.path.times.copy(),
        deviations=dev,
    )


# ---------------------------------------------------------------------------
# front tracking in the growth regime


@dataclass
class FrontTrace:
    """Arrival times of the growth front at a set of probe points.

    ``t_level`` is the first crossing of the certificate threshold b
    (linear interpolation between report times); ``t_speed`` is the first
    report time from which the growth rate stays above the certified speed
    for a full reporting interval.  NaN marks probes never reached.
    """

    probes: np.ndarray
    t_level: np.ndarray
    t_speed: np.ndarray
    threshold: float
    speed: float
    rate_min: float        # min over region cells / report times of du/dt
    rate_max: float
    # Pinching margins, normalized by (1 + lam*t) so that a fixed tolerance
    # covers the whole run: min over region cells / report times of
    # (u - (b + (lam/kappa) t)) / (1 + lam t)  and of
    # (kappa*(b + (lam/kappa) t) - u) / (1 + lam t).
    chain_lower_margin: float
    chain_upper_margin: float
    boundary_clear: bool   # density beyond |x| = L/4 never reached b
    t_end: float

    def rows(self):
        for x, tl, ts in zip(self.probes, self.t_level, self.t_speed):
            yield float(x), float(tl), float(ts)


def front_trace(
    params: ModelParams,
    p: Potential,
    u0: Field,
    cert: GrowthCertificate,
    probes,
    t_end: float,
    dt: float = None,
    report_every: float = 0.25,
) -> FrontTrace:
    """Track the expanding front of a certified growth run.

    Integration stops early once every probe has produced both arrival
    times (one extra reporting interval is kept to confirm the sustained
    rate).  Requires a valid certificate and data pinched between b and
    kappa*b on the region.
    """
    if not cert.valid:
        raise ConfigurationError(
            "front_trace needs a valid growth certificate; violations: "
            + "; ".join(cert.violations)
        )
    g = u0.grid
    if g.dim != 1:
        raise ConfigurationError("front tracking is implemented for dimension 1")
    msk = g.region_mask(cert.region)
    vals = u0.values[msk]
    if not (np.all(vals > cert.b) and np.all(vals < cert.kappa * cert.b)):
        raise ConfigurationError(
            "initial data must lie strictly between b and kappa*b on the region"
        )
    if dt is None:
        dt = min(1e-2, 0.1 / (params.m + params.lam / max(1.0, cert.b)))
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    pidx = [g.index_of(np.array([x])) for x in probes]
    lam, kap, b = params.lam, cert.kappa, cert.b
    v = cert.speed
    ax = np.abs(g.axis())
    outer = ax > 0.25 * g.length

    t_level = np.full(probes.shape, np.nan)
    t_speed = np.full(probes.shape, np.nan)
    rate_hit = np.full(probes.shape, np.nan)  # candidate first rate-threshold time
    rate_min, rate_max = math.inf, -math.inf
    low_margin, up_margin = math.inf, math.inf
    boundary_clear = True

    u = u0
    t_prev = 0.0
    u_probe_prev = np.array([u0.values[i] for i in pidx])
    rate_prev = None
    n_reports = max(1, int(math.ceil(t_end / report_every - 1e-12)))
    grace = 2
    last_t = 0.0

    def absorb(field: Field):
        nonlocal rate_min, rate_max, low_margin, up_margin, boundary_clear
        t = field.time
        r = _rhs_values(params, p, field, "fft")
        rate_min = min(rate_min, float(r[msk].min()))
        rate_max = max(rate_max, float(r[msk].max()))
        floor = b + (lam / kap) * t
        scale = 1.0 + lam * t
        low_margin = min(low_margin, float((field.values[msk] - floor).min()) / scale)
        up_margin = min(up_margin, float((kap * floor - field.values[msk]).min()) / scale)
        if np.any(field.values[outer] >= b):
            boundary_clear = False
        return r

    rate_prev_vals = absorb(u0)
    rate_prev = np.array([rate_prev_vals[i] for i in pidx])
    for k in range(1, n_reports + 1):
        t_next = min(k * report_every, t_end)
        n_sub = max(1, int(math.ceil((t_next - u.time) / dt - 1e-12)))
        h = (t_next - u.time) / n_sub
        for _ in range(n_sub):
            u = rk4_step(params, p, u, h)
        u = Field(g, u.values, t_next)
        r = absorb(u)
        u_probe = np.array([u.values[i] for i in pidx])
        rate_now = np.array([r[i] for i in pidx])
        # level crossings (linear interpolation inside the interval)
        for j in range(probes.size):
            if math.isnan(t_level[j]) and u_probe[j] >= b:
                if u_probe_prev[j] >= b:
                    t_level[j] = t_prev
                else:
                    frac = (b - u_probe_prev[j]) / (u_probe[j] - u_probe_prev[j])
                    t_level[j] = t_prev + frac * (t_next - t_prev)
            # sustained-rate detection: rate above v at both ends of interval
            if math.isnan(t_speed[j]):
                if rate_prev[j] >= v and rate_now[j] >= v:
                    t_speed[j] = t_prev if math.isnan(rate_hit[j]) else rate_hit[j]
                elif rate_now[j] >= v:
                    rate_hit[j] = t_next
                else:
                    rate_hit[j] = np.nan
        u_probe_prev = u_probe
        rate_prev = rate_now
        t_prev = t_next
        last_t = t_next
        if not (np.any(np.isnan(t_level)) or np.any(np.isnan(t_speed))):
            grace -= 1
            if grace <= 0:
                break
    return FrontTrace(
        probes=probes,
        t_level=t_level,
        t_speed=t_speed,
        threshold=b,
        speed=v,
        rate_min=rate_min,
        rate_max=rate_max,
        chain_lower_margin=low_margin,
        chain_upper_margin=up_margin,
        boundary_clear=boundary_clear,
        t_end=last_t,
    )
