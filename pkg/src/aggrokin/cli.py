"""Command-line driver: run one verification experiment from a JSON config.

Every run writes its delimited artifacts plus a ``report.json`` that
records content hashes of all inputs, every tolerance used, and one
PASS/FAIL entry per check; the process exits zero exactly when all
checks pass.  Artifacts contain no timestamps and print floats through
``repr``, so re-running the same config and seed reproduces them byte
for byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, load_config
from .equilibria import (
    equilibrium_densities,
    existence_horizon,
    make_certificate,
    min_threshold,
)
from .errors import AggrokinError, ConfigurationError
from .fronts import (
    StepGeometry,
    check_asymptote,
    fit_arrivals,
    front_min_threshold,
    front_recurrence,
    predicted_arrival,
)
from .meso import (
    POSITIVITY_TOL,
    check_bounded,
    check_comparison,
    check_stability,
    front_trace,
    solve,
    solve_path,
    solve_picard,
)
from .micro import (
    HARD_CAP,
    MIN_REPLICAS,
    estimate_density,
    estimate_pair_correlation,
    fluctuation_demo,
    micro_meso_compare,
    run_replicas,
)
from .potential import mass, mayer_mass, min_coverage
from .reports import (
    hash_config,
    hash_file,
    write_csv,
    write_estimate,
    write_front_trace,
    write_json,
    write_recurrence,
    write_snapshots,
    write_trajectory,
)

EXPERIMENTS = {}


def experiment(name):
    def register(fn):
        EXPERIMENTS[name] = fn
        return fn

    return register


class RunContext:
    """Output directory plus accumulated checks, tolerances, artifacts."""

    def __init__(self, out_dir: Path, seed: int, threads: int, plots: bool):
        self.out_dir = Path(out_dir)
        self.seed = seed
        self.threads = threads
        self.plots = plots
        self.checks = []
        self.tolerances = {}
        self.artifacts = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out_dir / name

    def check(self, name: str, passed, **detail) -> bool:
        entry = {"name": name, "passed": bool(passed)}
        entry.update(detail)
        self.checks.append(entry)
        return bool(passed)

    def tol(self, **kw):
        self.tolerances.update(kw)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _kernel_and_beta(cfg: Config):
    """Kernel mass from the config: explicit ``beta`` wins, else integrate."""
    beta = cfg.get("beta")
    if beta is not None:
        return None, float(beta)
    p = cfg.potential()
    return p, mass(p)


# ---------------------------------------------------------------------------
# recipes


@experiment("equilibria")
def _run_equilibria(cfg: Config, ctx: RunContext):
    params = cfg.params()
    _, beta = _kernel_and_beta(cfg)
    ctx.tol(equilibrium_residual=1e-10)
    eq = equilibrium_densities(params, beta)
    write_json(ctx.path("equilibria.json"), eq.to_dict())
    if eq.regime == "supercritical":
        ctx.check(
            "no_equilibrium_in_supercritical_regime",
            eq.low is None and eq.high is None,
            regime=eq.regime,
        )
        return
    ctx.check(
        "low_state_balances", abs(eq.residual_low) < 1e-10, residual=eq.residual_low
    )
    ctx.check(
        "high_state_balances", abs(eq.residual_high) < 1e-10, residual=eq.residual_high
    )
    if eq.regime == "subcritical":
        ctx.check(
            "states_straddle_inverse_mass",
            eq.low < 1.0 / beta < eq.high,
            low=eq.low,
            pivot=1.0 / beta,
            high=eq.high,
        )


@experiment("meso-run")
def _run_meso(cfg: Config, ctx: RunContext):
    cfg.require("t_end")
    params = cfg.params()
    p = cfg.potential()
    g = cfg.grid(p.dim)
    u0 = cfg.initial_field(g)
    t_end = float(cfg.get("t_end"))
    traj = solve(
        params, p, u0, t_end, dt=cfg.get("dt"), report_every=cfg.get("report_every")
    )
    sidecar = {
        "m": params.m,
        "lambda": params.lam,
        "dt": traj.dt,
        "t_end": t_end,
        "min_value": traj.min_value,
        "max_value": traj.max_value,
    }
    write_trajectory(ctx.path("trajectory.csv"), traj.path, sidecar)
    ctx.artifacts.append("trajectory.json")
    ctx.tol(positivity=POSITIVITY_TOL, linear_growth_bound=1e-6)
    ctx.check("stays_nonnegative", traj.positivity_ok, min_value=traj.min_value)
    ceiling = u0.max() + params.lam * t_end
    ctx.check(
        "respects_linear_growth_bound",
        traj.max_value <= ceiling + 1e-6,
        max_value=traj.max_value,
        ceiling=ceiling,
    )
    if ctx.plots:
        from .plots import plot_field, plot_trajectory

        plot_trajectory(traj.path, ctx.path("trajectory.png"))
        plot_field(traj.final, ctx.path("final.png"), title="final density")


@experiment("picard-run")
def _run_picard(cfg: Config, ctx: RunContext):
    cfg.require("t_end", "c")
    params = cfg.params()
    p = cfg.potential()
    g = cfg.grid(p.dim)
    u0 = cfg.initial_field(g)
    t_end = float(cfg.get("t_end"))
    sol = solve_picard(
        params, p, u0, float(cfg.get("c")), t_end, tol=cfg.get("tol", 1e-10)
    )
    mol = solve_path(params, p, u0, sol.path.times, dt=cfg.get("dt"))
    sup_diff = float(np.max(np.abs(sol.path.values - mol.values)))
    write_trajectory(
        ctx.path("trajectory.csv"),
        sol.path,
        {
            "scheme": "fixed-point",
            "window": sol.window,
            "sweeps": list(sol.sweeps),
            "max_contraction_ratio": sol.max_ratio,
            "sup_diff_vs_time_stepper": sup_diff,
        },
    )
    ctx.artifacts.append("trajectory.json")
    ctx.tol(cross_scheme_sup=1e-4, contraction_ratio=0.6)
    ctx.check(
        "fixed_point_map_contracts", sol.max_ratio <= 0.6, max_ratio=sol.max_ratio
    )
    ctx.check(
        "schemes_agree",
        sup_diff < 1e-4,
        sup_diff=sup_diff,
        t_end=float(sol.path.times[-1]),
    )
    if ctx.plots:
        from .plots import plot_trajectory

        plot_trajectory(sol.path, ctx.path("trajectory.png"))


@experiment("bounded-check")
def _run_bounded(cfg: Config, ctx: RunContext):
    params = cfg.params()
    p = cfg.potential()
    g = cfg.grid(p.dim)
    u0 = cfg.initial_field(g)
    rep = check_bounded(params, p, u0, float(cfg.get("t_end", 10.0)), dt=cfg.get("dt"))
    write_json(ctx.path("bounded.json"), rep.to_dict())
    ctx.tol(overshoot=1e-6)
    ctx.check(
        "stays_below_high_state",
        rep.passed,
        max_density=rep.max_density,
        high_state=rep.high_equilibrium,
    )
    if rep.band is not None:
        ctx.check(
            "stays_inside_band",
            rep.band_ok,
            band=list(rep.band),
            min_density=rep.min_density,
        )


@experiment("comparison-check")
def _run_comparison(cfg: Config, ctx: RunContext):
    params = cfg.params()
    p = cfg.potential()
    g = cfg.grid(p.dim)
    lo = cfg.initial_field(g, "initial_low")
    hi = cfg.initial_field(g, "initial_high")
    rep = check_comparison(params, p, lo, hi, float(cfg.get("t_end", 10.0)), dt=cfg.get("dt"))
    write_json(ctx.path("comparison.json"), rep.to_dict())
    ctx.tol(ordering=1e-6)
    ctx.check("order_preserved", rep.passed, max_violation=rep.max_violation)


@experiment("stability-check")
def _run_stability(cfg: Config, ctx: RunContext):
    cfg.require("amplitude")
    params = cfg.params()
    p = cfg.potential()
    grid = cfg.grid(p.dim) if "grid" in cfg.raw else None
    rep = check_stability(
        params,
        p,
        float(cfg.get("amplitude")),
        t_end=cfg.get("t_end"),
        grid=grid,
        seed=ctx.seed,
        dt=cfg.get("dt"),
    )
    write_json(ctx.path("stability.json"), rep.to_dict())
    write_csv(
        ctx.path("deviation.csv"),
        ["t", "deviation"],
        zip(rep.times.tolist(), rep.deviations.tolist()),
    )
    ctx.tol(bounded_factor=2.0, decay_fraction=0.1)
    ctx.check(
        "deviation_never_doubles",
        rep.bounded_ok,
        max_deviation=rep.max_deviation,
        initial=rep.initial_deviation,
    )
    ctx.check(
        "deviation_decays",
        rep.decayed_ok,
        final_deviation=rep.final_deviation,
        initial=rep.initial_deviation,
        t_end=rep.t_end,
    )
    if ctx.plots:
        from .plots import plot_stability

        plot_stability(
            rep.times, rep.deviations, ctx.path("deviation.png"), rep.initial_deviation
        )


def _growth_setup(cfg: Config, ctx: RunContext, front_threshold: bool = False):
    """Shared certificate + front-tracking stage of the growth recipes.

    When ``front_threshold`` is set, a ``b_factor`` scales the (stronger)
    step-recurrence threshold instead of the bare certificate threshold,
    so the resulting level also seeds valid arrival-time predictions.
    """
    cfg.require("t_end", "kappa")
    params = cfg.params()
    p = cfg.potential()
    g = cfg.grid(p.dim)
    region = cfg.region(p.dim)
    kappa = float(cfg.get("kappa"))
    b = cfg.get("b")
    if b is None:
        phi_a = min_coverage(p, region)
        thr = min_threshold(params.lam_over_m, phi_a)
        if front_threshold:
            thr = max(thr, front_min_threshold(params))
        b = float(cfg.get("b_factor", 1.1)) * thr
    cert = make_certificate(params, p, region, float(b), kappa)
    write_json(ctx.path("certificate.json"), cert.to_dict())
    ctx.check(
        "certificate_valid",
        cert.valid,
        violations=list(cert.violations),
        b=cert.b,
        b_hat=cert.min_admissible,
        speed=cert.speed,
    )
    if not cert.valid:
        return params, p, cert, None
    u0 = cfg.initial_field(g)
    a = max(abs(v) for v in (*region.lo, *region.hi))
    probes = cfg.get("probes")
    if probes is None:
        probes = [a + k for k in range(1, 9)]
    trace = front_trace(
        params,
        p,
        u0,
        cert,
        probes,
        float(cfg.get("t_end")),
        dt=cfg.get("dt"),
        report_every=float(cfg.get("report_every", 0.25)),
    )
    write_front_trace(ctx.path("front.csv"), trace)
    ctx.tol(chain_margin=1e-6, rate_upper_slack=1e-9)
    floor_rate = params.lam / cert.kappa
    ctx.check(
        "growth_rate_above_floor",
        trace.rate_min > floor_rate,
        rate_min=trace.rate_min,
        floor=floor_rate,
    )
    ctx.check(
        "growth_rate_at_most_birth_rate",
        trace.rate_max <= params.lam + 1e-9,
        rate_max=trace.rate_max,
        birth_rate=params.lam,
    )
    ctx.check(
        "pinched_above_moving_floor",
        trace.chain_lower_margin >= -1e-6,
        normalized_margin=trace.chain_lower_margin,
    )
    ctx.check(
        "pinched_below_moving_ceiling",
        trace.chain_upper_margin >= -1e-6,
        normalized_margin=trace.chain_upper_margin,
    )
    ctx.check(
        "fronts_do_not_wrap", trace.boundary_clear, t_end=trace.t_end
    )
    return params, p, cert, trace


@experiment("aggregation-run")
def _run_aggregation(cfg: Config, ctx: RunContext):
    params, p, cert, trace = _growth_setup(cfg, ctx)
    if trace is None:
        return
    ctx.check(
        "all_probes_reached",
        not (np.any(np.isnan(trace.t_level)) or np.any(np.isnan(trace.t_speed))),
        t_level=trace.t_level.tolist(),
        t_speed=trace.t_speed.tolist(),
    )
    if ctx.plots:
        from .plots import plot_front

        plot_front(trace, ctx.path("front.png"))


@experiment("front-fit")
def _run_front_fit(cfg: Config, ctx: RunContext):
    params, p, cert, trace = _growth_setup(cfg, ctx, front_threshold=True)
    if trace is None:
        return
    a = max(abs(v) for v in (*cert.region.lo, *cert.region.hi))
    geometry = StepGeometry(region_halfwidth=a)

    def predict(x):
        return predicted_arrival(params, cert.b, x, geometry)
    fit = fit_arrivals(trace.probes, trace.t_level, predict)
    write_json(ctx.path("fit.json"), fit.to_dict())
    k_max = geometry.steps_to(float(np.max(np.abs(trace.probes))))
    seq = front_recurrence(params, cert.b, max(k_max, 1))
    write_recurrence(ctx.path("recurrence.csv"), seq)
    ctx.tol(time_ratio=1.05)
    ctx.check(
        "measured_at_most_predicted",
        fit.bound_ok,
        max_time_ratio=fit.max_time_ratio,
    )
    ctx.check(
        "superlinear_term_present",
        fit.coef_xlogx > 0,
        coef_xlogx=fit.coef_xlogx,
        coef_x=fit.coef_x,
    )
    if ctx.plots:
        from .plots import plot_front

        predicted = [predict(x) for x in trace.probes]
        plot_front(trace, ctx.path("front.png"), predicted=predicted)


@experiment("recurrence")
def _run_recurrence(cfg: Config, ctx: RunContext):
    cfg.require("d0")
    params = cfg.params()
    seq = front_recurrence(params, float(cfg.get("d0")), int(cfg.get("steps", 10_000)))
    rep = check_asymptote(seq)
    write_recurrence(ctx.path("recurrence.csv"), seq)
    write_json(ctx.path("asymptote.json"), rep.to_dict())
    ctx.tol(normalized_error_bound=rep.bound, log_form_consistency=1e-10)
    ctx.check(
        "per_step_error_decays",
        rep.decay_ok,
        quarter=rep.per_step_quarter,
        half=rep.per_step_half,
        final=rep.per_step_final,
    )
    ctx.check(
        "per_step_error_below_bound",
        rep.bound_ok,
        final=rep.per_step_final,
        bound=rep.bound,
    )
    ctx.check(
        "log_form_consistent",
        seq.log_residual < 1e-10,
        log_residual=seq.log_residual,
    )
    if ctx.plots:
        from .plots import plot_recurrence

        plot_recurrence(seq, ctx.path("recurrence.png"))


@experiment("micro-run")
def _run_micro(cfg: Config, ctx: RunContext):
    cfg.require("t_end")
    params = cfg.params()
    p = cfg.potential()
    if "grid" in cfg.raw:
        g = cfg.grid(p.dim)
        length = g.length
        intensity = cfg.initial_field(g)
    else:
        cfg.require("length", "intensity")
        length = float(cfg.get("length"))
        intensity = float(cfg.get("intensity"))
    t_end = float(cfg.get("t_end"))
    snap_times = cfg.get("snapshot_times") or [t_end]
    snap_times = sorted(float(t) for t in snap_times)
    if snap_times[-1] > t_end + 1e-12:
        raise ConfigurationError("snapshot_times must not exceed t_end")
    replicas = int(cfg.get("replicas", 1))
    trajs = run_replicas(
        intensity,
        params,
        p,
        length,
        params.eps,
        t_end,
        snap_times,
        replicas,
        base_seed=ctx.seed,
        threads=ctx.threads,
        cap=int(cfg.get("cap", HARD_CAP)),
    )
    manifest = {
        "replicas": replicas,
        "base_seed": ctx.seed,
        "eps": params.eps,
        "length": length,
        "t_end": t_end,
        "snapshot_times": snap_times,
        "events": [tr.events for tr in trajs],
        "final_counts": [tr.final_count for tr in trajs],
        "audit_errors": [tr.audit_error for tr in trajs],
    }
    write_snapshots(ctx.path("snapshots.csv"), trajs, manifest)
    ctx.artifacts.append("snapshots.json")
    ctx.tol(energy_cache_audit=1e-6)
    worst = max(tr.audit_error for tr in trajs)
    ctx.check("energy_caches_consistent", worst < 1e-6, worst_error=worst)
    if replicas >= MIN_REPLICAS:
        finals = [tr.configs[-1] for tr in trajs]
        est = estimate_density(finals, params.eps, int(cfg.get("bins", 16)), length)
        write_estimate(ctx.path("estimate.csv"), est)
        if cfg.get("distance_bins"):
            pair = estimate_pair_correlation(
                finals, params.eps, int(cfg.get("distance_bins")), length
            )
            write_json(
                ctx.path("pair.json"),
                {
                    "bin_centers": pair.bin_centers,
                    "ratio": pair.ratio,
                    "ratio_stderr": pair.ratio_stderr,
                    "mean_density": pair.mean_density,
                },
            )
        if ctx.plots:
            from .plots import plot_estimate

            plot_estimate(est, ctx.path("estimate.png"))


@experiment("micro-meso-compare")
def _run_compare(cfg: Config, ctx: RunContext):
    cfg.require("t_end", "eps_list", "replicas")
    params = cfg.params()
    p = cfg.potential()
    g = cfg.grid(p.dim)
    u0 = cfg.initial_field(g)
    rep = micro_meso_compare(
        params,
        p,
        u0,
        [float(e) for e in cfg.get("eps_list")],
        float(cfg.get("t_end")),
        int(cfg.get("replicas")),
        bins=int(cfg.get("bins", 16)),
        base_seed=ctx.seed,
        threads=ctx.threads,
        dt=cfg.get("dt"),
        cap=int(cfg.get("cap", HARD_CAP)),
        distance_bins=int(cfg.get("distance_bins", 8)),
    )
    write_json(ctx.path("compare.json"), rep.to_dict())
    reference = (rep.bin_centers, rep.reference)
    for eps, est in zip(rep.eps_list, rep.estimates):
        write_estimate(ctx.path(f"estimate_eps{eps:g}.csv"), est)
        if ctx.plots:
            from .plots import plot_estimate

            plot_estimate(
                est,
                ctx.path(f"estimate_eps{eps:g}.png"),
                reference=reference,
                title=f"density estimate, eps={eps:g}",
            )
    ctx.tol(z_max=3.0)
    ctx.check(
        "finest_scale_matches_kinetic_field",
        rep.passed,
        max_z=rep.max_z[-1],
        eps=rep.eps_list[-1],
    )
    ctx.check(
        "discrepancy_shrinks_with_eps", rep.monotone, rms=list(rep.rms)
    )
    if rep.pair is not None:
        beyond = rep.pair.bin_centers > (rep.pair.bin_centers[1] - rep.pair.bin_centers[0])
        z = np.abs(rep.pair.ratio - 1.0) / np.maximum(rep.pair.ratio_stderr, 1e-300)
        ctx.check(
            "pair_correlation_factorizes",
            bool(np.all(z[beyond] <= 3.0)),
            max_z=float(z[beyond].max()) if np.any(beyond) else 0.0,
        )


@experiment("fluctuation-demo")
def _run_fluctuation(cfg: Config, ctx: RunContext):
    cfg.require("initial_count", "region")
    params = cfg.params()
    p = cfg.potential()
    rep = fluctuation_demo(
        params,
        p,
        cfg.region(p.dim),
        int(cfg.get("initial_count")),
        int(cfg.get("replicas", 16)),
        length=cfg.get("length"),
        t_end=float(cfg.get("t_end", 10.0)),
        snapshots=int(cfg.get("snapshots", 21)),
        base_seed=ctx.seed,
        cap=int(cfg.get("cap", HARD_CAP)),
    )
    write_json(ctx.path("fluctuation.json"), rep.to_dict())
    write_csv(
        ctx.path("counts.csv"),
        ["t", "seeded_mean", "seeded_stderr", "baseline_mean", "baseline_stderr"],
        zip(
            rep.times.tolist(),
            rep.seeded_mean.tolist(),
            rep.seeded_stderr.tolist(),
            rep.baseline_mean.tolist(),
            rep.baseline_stderr.tolist(),
        ),
    )
    ctx.check(
        "seeded_cluster_grows",
        rep.seeded_grew,
        start=float(rep.seeded_mean[0]),
        end=float(rep.seeded_mean[-1]),
    )
    ctx.check(
        "empty_start_stays_steady",
        rep.baseline_steady,
        steady_count=rep.steady_count,
        end=float(rep.baseline_mean[-1]),
    )
    if ctx.plots:
        from .plots import plot_fluctuation

        plot_fluctuation(rep, ctx.path("fluctuation.png"))


@experiment("horizon")
def _run_horizon(cfg: Config, ctx: RunContext):
    cfg.require("c_low", "c_high")
    params = cfg.params()
    c_phi = cfg.get("c_phi")
    beta = cfg.get("beta")
    if c_phi is None or beta is None:
        p = cfg.potential()
        if c_phi is None:
            c_phi = mayer_mass(p)
        if beta is None:
            beta = mass(p)
    est = existence_horizon(
        params, float(c_phi), float(beta), float(cfg.get("c_low")), float(cfg.get("c_high"))
    )
    write_json(ctx.path("horizon.json"), est.to_dict())
    ctx.tol(bound_slack=1e-12)
    ctx.check(
        "horizon_below_universal_bound",
        est.bound_ok,
        t_mayer=est.t_mayer,
        bound=est.bound,
    )
    if float(beta) >= float(c_phi):
        ctx.check(
            "plain_mass_horizon_is_shorter",
            est.t_mass <= est.t_mayer + 1e-12,
            t_mass=est.t_mass,
            t_mayer=est.t_mayer,
        )


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggrokin",
        description=(
            "Numerical laboratory for an attractive birth-and-death model: "
            "run a verification experiment described by a JSON config."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "experiment",
        choices=sorted(EXPERIMENTS),
        help="which experiment to run (must match the config's own entry)",
    )
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument(
        "--out",
        default=None,
        help="output directory (default: config out_dir, else ./aggrokin_out)",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the config's seed"
    )
    parser.add_argument(
        "--threads", type=int, default=1, help="worker processes for replica runs"
    )
    parser.add_argument(
        "--no-plots", action="store_true", help="skip rendering figures"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigurationError(
                f"config describes experiment {cfg.experiment!r}, "
                f"but {args.experiment!r} was requested"
            )
        out_dir = Path(args.out or cfg.get("out_dir") or "aggrokin_out")
        out_dir.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else cfg.seed
        ctx = RunContext(out_dir, seed, max(1, args.threads), not args.no_plots)
        EXPERIMENTS[args.experiment](cfg, ctx)
        input_hashes = {"config": hash_file(cfg.source)}
        for path in cfg.input_files():
            input_hashes[str(path.name)] = hash_file(path)
        report = {
            "experiment": args.experiment,
            "config_hash": hash_config(cfg.raw),
            "input_hashes": input_hashes,
            "seed": seed,
            "tolerances": ctx.tolerances,
            "checks": ctx.checks,
            "artifacts": sorted(set(ctx.artifacts)),
            "passed": ctx.passed,
        }
        write_json(out_dir / "report.json", report)
    except AggrokinError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    for c in ctx.checks:
        print(("PASS" if c["passed"] else "FAIL") + f" {c['name']}")
    print(f"report: {out_dir / 'report.json'}")
    print("overall: " + ("PASS" if ctx.passed else "FAIL"))
    return 0 if ctx.passed else 1


if __name__ == "__main__":
    sys.exit(main())
