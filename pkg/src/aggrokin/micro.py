"""Exact event-driven simulation of the interacting birth-and-death process.

Particles live on a periodic box (centered coordinates).  Births arrive
uniformly at total rate lam * volume / eps; a particle at x dies at rate
m * exp(-eps * E(x)) where E(x) sums the kernel over all other particles
(minimum-image convention).  Attraction therefore shelters particles:
crowded particles die more slowly.

The engine is exact Gillespie: exponential waiting times at the total
rate, event selection by a binary-indexed tree over per-particle death
rates, and cell lists (cell size at least the kernel cutoff) so an event
touches only its neighborhood.  Estimators turn replica snapshots into
binned density and pair-correlation profiles comparable with the kinetic
solver fields.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .equilibria import ModelParams, equilibrium_densities
from .errors import (
    CapacityError,
    ConfigurationError,
    ConsistencyError,
    InsufficientDataError,
)
from .fields import Field, Region
from .meso import solve
from .potential import Potential, mass

__all__ = [
    "ParticleSystem",
    "Event",
    "MicroTrajectory",
    "DensityEstimate",
    "PairCorrelationEstimate",
    "CompareReport",
    "FluctuationReport",
    "init_poisson",
    "run_replicas",
    "estimate_density",
    "estimate_pair_correlation",
    "micro_meso_compare",
    "fluctuation_demo",
]

HARD_CAP = 10_000_000
MIN_REPLICAS = 8


class _Fenwick:
    """Binary-indexed tree over nonnegative per-particle rates."""

    def __init__(self, capacity: int):
        self.cap = capacity
        self.tree = np.zeros(capacity + 1)
        self.vals = np.zeros(capacity)

    def grow(self, capacity: int):
        old = self.vals
        self.cap = capacity
        self.tree = np.zeros(capacity + 1)
        self.vals = np.zeros(capacity)
        self.vals[: old.size] = old
        # rebuild in O(n)
        for i in range(old.size):
            if old[i] != 0.0:
                self._add(i, old[i])

    def _add(self, i: int, delta: float):
        j = i + 1
        while j <= self.cap:
            self.tree[j] += delta
            j += j & (-j)

    def set(self, i: int, value: float):
        delta = value - self.vals[i]
        if delta != 0.0:
            self.vals[i] = value
            self._add(i, delta)

    def total(self) -> float:
        # prefix sum over the whole range
        s = 0.0
        j = self.cap
        while j > 0:
            s += self.tree[j]
            j -= j & (-j)
        return s

    def find(self, r: float) -> int:
        """Smallest index i with cumulative rate above r."""
        idx = 0
        bit = 1 << (self.cap.bit_length())
        while bit:
            nxt = idx + bit
            if nxt <= self.cap and self.tree[nxt] <= r:
                idx = nxt
                r -= self.tree[nxt]
            bit >>= 1
        return min(idx, self.cap - 1)


@dataclass
class Event:
    """One jump of the process."""

    kind: str          # "birth" | "death"
    time: float
    position: np.ndarray


@dataclass
class MicroTrajectory:
    """Snapshots (position arrays) of one trajectory at requested times."""

    times: np.ndarray
    configs: list
    events: int
    final_count: int
    audit_error: float = float("nan")   # worst cache error at the end of the run

    def counts(self) -> np.ndarray:
        return np.array([c.shape[0] for c in self.configs])


class ParticleSystem:
    """Interacting birth-and-death process on a periodic box.

    State consists of particle positions, the cached interaction energy of
    each particle, and the matching death rates inside the event tree.
    All incremental updates are local (cell lists); ``audit`` recomputes
    everything from scratch and verifies the caches.
    """

    def __init__(
        self,
        params: ModelParams,
        potential: Potential,
        length: float,
        positions=None,
        seed: int = 0,
        cap: int = HARD_CAP,
    ):
        if potential.cutoff > 0 and length <= 2.0 * potential.cutoff:
            raise ConfigurationError(
                f"box length {length} must exceed twice the kernel cutoff"
            )
        self.params = params
        self.potential = potential
        self.length = float(length)
        self.dim = potential.dim
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.cap = int(cap)
        self.t = 0.0
        self.events = 0
        self.birth_rate = params.lam * self.length**self.dim / params.eps
        # cell grid for neighbor queries (cell size >= cutoff)
        cut = potential.cutoff
        self.ncell = max(1, int(self.length / cut)) if cut > 0 else 1
        self.interacting = cut > 0
        alloc = 1024
        if positions is not None:
            alloc = max(alloc, 2 * len(positions))
        alloc = min(max(alloc, 16), self.cap)
        self.pos = np.zeros((alloc, self.dim))
        self.energy = np.zeros(alloc)
        self.cell_id = np.zeros(alloc, dtype=np.int64)
        self.slot_in_cell = np.zeros(alloc, dtype=np.int64)
        self.cell_members = [[] for _ in range(self.ncell**self.dim)]
        self.fen = _Fenwick(alloc)
        self.n = 0
        if positions is not None:
            self._bulk_insert(np.asarray(positions, dtype=float))

    # -- geometry helpers ---------------------------------------------

    def _wrap(self, x: np.ndarray) -> np.ndarray:
        L = self.length
        return (x + 0.5 * L) % L - 0.5 * L

    def _min_image(self, dx: np.ndarray) -> np.ndarray:
        L = self.length
        return (dx + 0.5 * L) % L - 0.5 * L

    def _cell_of(self, x: np.ndarray) -> int:
        L, nc = self.length, self.ncell
        ij = np.floor((x + 0.5 * L) / L * nc).astype(np.int64) % nc
        if self.dim == 1:
            return int(ij[0])
        return int(ij[0] * nc + ij[1])

    def _neighbor_cells(self, cid: int):
        nc = self.ncell
        if nc <= 3:
            return range(len(self.cell_members))
        if self.dim == 1:
            return {(cid + d) % nc for d in (-1, 0, 1)}
        ci, cj = divmod(cid, nc)
        out = set()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                out.add(((ci + di) % nc) * nc + ((cj + dj) % nc))
        return out

    def _neighbors_of(self, x: np.ndarray, cid: int):
        """Indices of stored particles in cells adjacent to x's cell."""
        idx = []
        for c in self._neighbor_cells(cid):
            idx.extend(self.cell_members[c])
        return idx

    # -- bookkeeping ---------------------------------------------------

    def _rate(self, energy: float) -> float:
        return self.params.m * math.exp(-self.params.eps * energy)

    def _ensure_capacity(self, need: int):
        if need <= self.pos.shape[0]:
            return
        if need > self.cap:
            raise CapacityError(
                f"population {need} exceeds the hard cap {self.cap}"
            )
        new = min(self.cap, max(2 * self.pos.shape[0], need))
        grow = lambda a, shape: np.concatenate([a, np.zeros(shape)], axis=0)
        extra = new - self.pos.shape[0]
        self.pos = grow(self.pos, (extra, self.dim))
        self.energy = grow(self.energy, (extra,))
        self.cell_id = np.concatenate([self.cell_id, np.zeros(extra, dtype=np.int64)])
        self.slot_in_cell = np.concatenate(
            [self.slot_in_cell, np.zeros(extra, dtype=np.int64)]
        )
        self.fen.grow(new)

    def _bulk_insert(self, positions: np.ndarray):
        if positions.ndim == 1:
            positions = positions[:, None]
        if positions.shape[1] != self.dim:
            raise ConfigurationError("position array has wrong dimension")
        n = positions.shape[0]
        if n > self.cap:
            raise CapacityError(f"initial population {n} exceeds the hard cap")
        self._ensure_capacity(n)
        self.pos[:n] = self._wrap(positions)
        self.n = n
        for i in range(n):
            cid = self._cell_of(self.pos[i])
            self.cell_id[i] = cid
            self.slot_in_cell[i] = len(self.cell_members[cid])
            self.cell_members[cid].append(i)
        self._recompute_energies()

    def _recompute_energies(self):
        """Full from-scratch energy and rate rebuild."""
        for i in range(self.n):
            self.energy[i] = self._energy_at(self.pos[i], exclude=i)
        for i in range(self.n):
            self.fen.set(i, self._rate(self.energy[i]))
        for i in range(self.n, self.fen.cap):
            self.fen.set(i, 0.0)

    def _energy_at(self, x: np.ndarray, exclude: int = -1) -> float:
        if not self.interacting or self.n == 0:
            return 0.0
        cand = self._neighbors_of(x, self._cell_of(x))
        if not cand:
            return 0.0
        idx = np.array([j for j in cand if j != exclude], dtype=np.int64)
        if idx.size == 0:
            return 0.0
        dx = self._min_image(x[None, :] - self.pos[idx])
        if self.dim == 1:
            vals = self.potential.value(dx[:, 0])
        else:
            vals = self.potential.value(dx)
        return float(np.sum(vals))

    def _insert(self, x: np.ndarray):
        self._ensure_capacity(self.n + 1)
        i = self.n
        self.pos[i] = x
        cid = self._cell_of(x)
        # energy of the newcomer, and its contribution to neighbors
        if self.interacting:
            cand = np.array(self._neighbors_of(x, cid), dtype=np.int64)
            if cand.size:
                dx = self._min_image(x[None, :] - self.pos[cand])
                vals = (
                    self.potential.value(dx[:, 0])
                    if self.dim == 1
                    else self.potential.value(dx)
                )
                self.energy[i] = float(np.sum(vals))
                touched = cand[vals != 0.0]
                self.energy[touched] += vals[vals != 0.0]
                for j in touched:
                    self.fen.set(int(j), self._rate(self.energy[j]))
            else:
                self.energy[i] = 0.0
        else:
            self.energy[i] = 0.0
        self.cell_id[i] = cid
        self.slot_in_cell[i] = len(self.cell_members[cid])
        self.cell_members[cid].append(i)
        self.fen.set(i, self._rate(self.energy[i]))
        self.n += 1

    def _remove(self, i: int):
        x = self.pos[i].copy()
        cid = int(self.cell_id[i])
        if self.interacting:
            cand = np.array(
                [j for j in self._neighbors_of(x, cid) if j != i], dtype=np.int64
            )
            if cand.size:
                dx = self._min_image(x[None, :] - self.pos[cand])
                vals = (
                    self.potential.value(dx[:, 0])
                    if self.dim == 1
                    else self.potential.value(dx)
                )
                touched = cand[vals != 0.0]
                self.energy[touched] -= vals[vals != 0.0]
                for j in touched:
                    self.fen.set(int(j), self._rate(self.energy[j]))
        # drop i from its cell (swap with the cell's last member)
        members = self.cell_members[cid]
        s = int(self.slot_in_cell[i])
        last = members[-1]
        members[s] = last
        self.slot_in_cell[last] = s
        members.pop()
        # move the globally last particle into slot i
        last_i = self.n - 1
        if i != last_i:
            self.pos[i] = self.pos[last_i]
            self.energy[i] = self.energy[last_i]
            lc = int(self.cell_id[last_i])
            self.cell_id[i] = lc
            sl = int(self.slot_in_cell[last_i])
            self.cell_members[lc][sl] = i
            self.slot_in_cell[i] = sl
            self.fen.set(i, self.fen.vals[last_i])
        self.fen.set(last_i, 0.0)
        self.n = last_i

    # -- dynamics ------------------------------------------------------

    @property
    def total_death_rate(self) -> float:
        return self.fen.total()

    @property
    def total_rate(self) -> float:
        return self.birth_rate + self.total_death_rate

    def positions(self) -> np.ndarray:
        return self.pos[: self.n].copy()

    def count_in(self, region: Region) -> int:
        if self.n == 0:
            return 0
        pts = self.pos[: self.n]
        lo = np.asarray(region.lo)
        hi = np.asarray(region.hi)
        inside = np.all((pts >= lo) & (pts < hi), axis=1)
        return int(np.count_nonzero(inside))

    def step(self) -> Event:
        """Advance by exactly one jump and return it."""
        total = self.total_rate
        if not (math.isfinite(total) and total > 0):
            raise ConsistencyError(f"total event rate is {total}")
        self.t += self.rng.exponential(1.0 / total)
        r = self.rng.random() * total
        self.events += 1
        if r < self.birth_rate or self.n == 0:
            x = self._wrap(
                self.rng.uniform(-0.5 * self.length, 0.5 * self.length, size=self.dim)
            )
            self._insert(x)
            return Event("birth", self.t, x)
        i = self.fen.find(r - self.birth_rate)
        x = self.pos[i].copy()
        self._remove(i)
        return Event("death", self.t, x)

    def run(self, t_end: float, snapshot_times=None) -> MicroTrajectory:
        """Advance to t_end, recording the state at each snapshot time.

        A snapshot holds the state immediately before the first jump after
        the snapshot time.  On hitting the population cap, the error
        carries the snapshots gathered so far in its ``partial`` field.
        """
        if not t_end > self.t:
            raise ConfigurationError("run needs t_end beyond the current time")
        if snapshot_times is None:
            snapshot_times = np.array([t_end])
        snap = np.sort(np.asarray(snapshot_times, dtype=float))
        taken_t, taken_c = [], []
        k = 0
        while True:
            total = self.total_rate
            if not (math.isfinite(total) and total > 0):
                raise ConsistencyError(f"total event rate is {total}")
            dt = self.rng.exponential(1.0 / total)
            t_event = self.t + dt
            while k < snap.size and snap[k] <= min(t_event, t_end) + 1e-300:
                if snap[k] > t_end:
                    break
                taken_t.append(snap[k])
                taken_c.append(self.positions())
                k += 1
            if t_event > t_end:
                self.t = t_end
                break
            self.t = t_event
            r = self.rng.random() * total
            self.events += 1
            try:
                if r < self.birth_rate or self.n == 0:
                    x = self._wrap(
                        self.rng.uniform(
                            -0.5 * self.length, 0.5 * self.length, size=self.dim
                        )
                    )
                    self._insert(x)
                else:
                    self._remove(self.fen.find(r - self.birth_rate))
            except CapacityError as exc:
                exc.partial = MicroTrajectory(
                    np.array(taken_t), taken_c, self.events, self.n
                )
                raise
        while k < snap.size and snap[k] <= t_end + 1e-300:
            taken_t.append(snap[k])
            taken_c.append(self.positions())
            k += 1
        return MicroTrajectory(np.array(taken_t), taken_c, self.events, self.n)

    # -- verification --------------------------------------------------

    def audit(self, tol: float = 1e-6) -> float:
        """Recompute all energies from scratch; raise on cache drift.

        Returns the worst relative energy error observed.
        """
        worst = 0.0
        for i in range(self.n):
            ref = self._energy_at(self.pos[i], exclude=i)
            err = abs(self.energy[i] - ref) / max(1.0, abs(ref))
            worst = max(worst, err)
            if err > tol:
                raise ConsistencyError(
                    f"energy cache drift {err:.3e} at particle {i} exceeds {tol}"
                )
            rate_err = abs(self.fen.vals[i] - self._rate(ref)) / max(
                1e-300, self._rate(ref)
            )
            if rate_err > tol:
                raise ConsistencyError(
                    f"death-rate cache drift {rate_err:.3e} at particle {i}"
                )
        total_ref = sum(self._rate(self._energy_at(self.pos[i], i)) for i in range(self.n))
        if abs(self.fen.total() - total_ref) > 1e-8 * max(1.0, total_ref):
            raise ConsistencyError("event-tree total drifted from recomputed rates")
        return worst


# ---------------------------------------------------------------------------
# initial states


def init_poisson(
    intensity,
    eps: float,
    length: float,
    seed: int,
    params: ModelParams = None,
    potential: Potential = None,
    cap: int = HARD_CAP,
) -> ParticleSystem:
    """Sample the chaotic Poisson state with spatial intensity u0/eps.

    ``intensity`` is a density field (piecewise constant per grid cell) or
    a constant.  Sampling is by thinning a uniform Poisson cloud at the
    maximum intensity, which is exact for the piecewise-constant profile.
    """
    if params is None:
        raise ConfigurationError("init_poisson needs model params")
    if potential is None:
        potential = Potential.zero()
    rng = np.random.default_rng(seed)
    dim = potential.dim
    vol = length**dim
    if isinstance(intensity, Field):
        if abs(intensity.grid.length - length) > 1e-12:
            raise ConfigurationError("intensity grid length disagrees with the box")
        umax = intensity.max()
        if intensity.min() < 0:
            raise ConfigurationError("intensity must be nonnegative")
    else:
        umax = float(intensity)
        if umax < 0:
            raise ConfigurationError("intensity must be nonnegative")
    expected = umax * vol / eps
    if expected > cap:
        raise CapacityError(
            f"expected initial population {expected:.3g} exceeds the cap {cap}"
        )
    prm = ModelParams(params.m, params.lam, eps)
    if umax == 0.0:
        return ParticleSystem(prm, potential, length, None, seed=seed, cap=cap)
    n = rng.poisson(expected)
    pts = rng.uniform(-0.5 * length, 0.5 * length, size=(n, dim))
    if isinstance(intensity, Field):
        g = intensity.grid
        if dim == 1:
            idx = np.floor((pts[:, 0] + 0.5 * length) / g.pitch).astype(np.int64)
            cellvals = intensity.values[np.clip(idx, 0, g.cells - 1)]
        else:
            cellvals = np.array(
                [intensity.values[g.index_of(x)] for x in pts]
            )
        keep = rng.random(n) * umax < cellvals
        pts = pts[keep]
    sys = ParticleSystem(prm, potential, length, pts, seed=seed, cap=cap)
    sys.rng = rng  # continue the same stream for the dynamics
    return sys


# ---------------------------------------------------------------------------
# replica running and estimators


def _run_one_replica(args):
    (intensity, eps, length, seed, params, potential, cap, t_end, snap) = args
    sys = init_poisson(intensity, eps, length, seed, params, potential, cap)
    traj = sys.run(t_end, snap)
    traj.audit_error = sys.audit()
    return traj


def run_replicas(
    intensity,
    params: ModelParams,
    potential: Potential,
    length: float,
    eps: float,
    t_end: float,
    snapshot_times,
    replicas: int,
    base_seed: int = 0,
    threads: int = 1,
    cap: int = HARD_CAP,
) -> list:
    """Independent trajectories; replica r uses seed base_seed + r."""
    jobs = [
        (intensity, eps, length, base_seed + r, params, potential, cap, t_end,
         np.asarray(snapshot_times, dtype=float))
        for r in range(replicas)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_run_one_replica, jobs))
    return [_run_one_replica(j) for j in jobs]


@dataclass
class DensityEstimate:
    """Binned one-point density across replicas, in kinetic units."""

    bin_centers: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    replicas: int

    def rows(self):
        for c, v, s in zip(self.bin_centers, self.value, self.stderr):
            yield float(c), float(v), float(s)


def _bin_edges(length: float, bins: int) -> np.ndarray:
    return np.linspace(-0.5 * length, 0.5 * length, bins + 1)


def estimate_density(snapshots, eps: float, bins, length: float = None) -> DensityEstimate:
    """Density profile: eps * mean particle count per bin / bin volume.

    ``snapshots`` is one position array per replica, all at the same time.
    """
    if len(snapshots) < MIN_REPLICAS:
        raise InsufficientDataError(
            f"need at least {MIN_REPLICAS} replicas, got {len(snapshots)}"
        )
    if length is None:
        raise ConfigurationError("estimate_density needs the box length")
    if np.isscalar(bins):
        edges = _bin_edges(length, int(bins))
    else:
        edges = np.asarray(bins, dtype=float)
    width = np.diff(edges)
    per = []
    for cfg in snapshots:
        xs = cfg[:, 0] if cfg.ndim == 2 else cfg
        counts, _ = np.histogram(xs, bins=edges)
        per.append(eps * counts / width)
    per = np.array(per)
    r = per.shape[0]
    return DensityEstimate(
        bin_centers=0.5 * (edges[:-1] + edges[1:]),
        value=per.mean(axis=0),
        stderr=per.std(axis=0, ddof=1) / math.sqrt(r),
        replicas=r,
    )


@dataclass
class PairCorrelationEstimate:
    """Binned two-point function on pair distances, plus the chaos ratio."""

    bin_centers: np.ndarray
    value: np.ndarray        # k2 estimate per distance bin
    stderr: np.ndarray
    ratio: np.ndarray        # k2 / (mean density)^2
    ratio_stderr: np.ndarray
    mean_density: float
    replicas: int

    def rows(self):
        for c, v, s in zip(self.bin_centers, self.value, self.stderr):
            yield float(c), float(v), float(s)


def estimate_pair_correlation(
    snapshots, eps: float, distance_bins, length: float = None
) -> PairCorrelationEstimate:
    """Two-point correlation on wrapped pair distances (ordered pairs).

    The chaos ratio divides by the squared pooled mean density; it sits
    near one for a Poisson cloud and above one when particles cluster.
    """
    if len(snapshots) < MIN_REPLICAS:
        raise InsufficientDataError(
            f"need at least {MIN_REPLICAS} replicas, got {len(snapshots)}"
        )
    if length is None:
        raise ConfigurationError("estimate_pair_correlation needs the box length")
    edges = (
        np.linspace(0.0, 0.5 * length, int(distance_bins) + 1)
        if np.isscalar(distance_bins)
        else np.asarray(distance_bins, dtype=float)
    )
    if edges[-1] > 0.5 * length + 1e-12:
        raise ConfigurationError("distance bins must stay below half the box")
    width = np.diff(edges)
    per = []
    dens = []
    for cfg in snapshots:
        xs = cfg[:, 0] if cfg.ndim == 2 else cfg
        n = xs.size
        dens.append(eps * n / length)
        if n < 2:
            per.append(np.zeros(width.size))
            continue
        dx = xs[:, None] - xs[None, :]
        dx = (dx + 0.5 * length) % length - 0.5 * length
        d = np.abs(dx[~np.eye(n, dtype=bool)])
        counts, _ = np.histogram(d, bins=edges)
        # ordered pairs with |separation| in the bin; measure of the bin
        # per unit box volume is 2*width
        per.append(eps**2 * counts / (length * 2.0 * width))
    per = np.array(per)
    r = per.shape[0]
    mean_rho = float(np.mean(dens))
    value = per.mean(axis=0)
    stderr = per.std(axis=0, ddof=1) / math.sqrt(r)
    denom = max(mean_rho**2, 1e-300)
    return PairCorrelationEstimate(
        bin_centers=0.5 * (edges[:-1] + edges[1:]),
        value=value,
        stderr=stderr,
        ratio=value / denom,
        ratio_stderr=stderr / denom,
        mean_density=mean_rho,
        replicas=r,
    )


# ---------------------------------------------------------------------------
# micro <-> meso comparison


@dataclass
class CompareReport:
    """Agreement between particle-density estimates and the kinetic field."""

    eps_list: tuple
    rms: tuple                # RMS k1-vs-field discrepancy per eps
    max_z: tuple              # worst per-bin discrepancy in stderr units
    estimates: tuple          # DensityEstimate per eps
    reference: np.ndarray     # kinetic field binned like the estimates
    bin_centers: np.ndarray
    passed: bool
    monotone: bool            # rms does not increase as eps shrinks
    t_end: float
    replicas: int
    pair: PairCorrelationEstimate = None   # chaos diagnostic at smallest eps

    def to_dict(self) -> dict:
        out = {
            "eps_list": list(self.eps_list),
            "rms": list(self.rms),
            "max_z": list(self.max_z),
            "passed": self.passed,
            "monotone": self.monotone,
            "t_end": self.t_end,
            "replicas": self.replicas,
        }
        if self.pair is not None:
            out["chaos_ratio"] = list(self.pair.ratio)
            out["chaos_ratio_stderr"] = list(self.pair.ratio_stderr)
            out["chaos_bin_centers"] = list(self.pair.bin_centers)
        return out


def micro_meso_compare(
    params: ModelParams,
    potential: Potential,
    u0: Field,
    eps_list,
    t_end: float,
    replicas: int,
    bins: int = 16,
    base_seed: int = 202,
    threads: int = 1,
    dt: float = None,
    cap: int = HARD_CAP,
    distance_bins: int = 8,
) -> CompareReport:
    """Run the particle system at several scales against the kinetic field.

    Pass requires every bin of the smallest-eps density estimate to sit
    within three standard errors of the binned kinetic solution.  The
    smallest-eps snapshots additionally yield a pair-correlation (chaos)
    diagnostic; set ``distance_bins`` to 0 to skip it.
    """
    grid = u0.grid
    if grid.dim != 1:
        raise ConfigurationError("micro/meso comparison is implemented for dim 1")
    L = grid.length
    if grid.cells % bins != 0:
        raise ConfigurationError("bins must divide the kinetic grid cells")
    traj = solve(params, potential, u0, t_end, dt=dt, report_every=t_end)
    ref_field = traj.final.values
    ref = ref_field.reshape(bins, grid.cells // bins).mean(axis=1)
    eps_list = tuple(float(e) for e in eps_list)
    rms, max_z, ests = [], [], []
    for j, eps in enumerate(sorted(eps_list, reverse=True)):
        trajs = run_replicas(
            u0, params, potential, L, eps, t_end, [t_end], replicas,
            base_seed=base_seed + 10_000 * j, threads=threads, cap=cap,
        )
        snaps = [tr.configs[0] for tr in trajs]
        est = estimate_density(snaps, eps, bins, length=L)
        diff = est.value - ref
        rms.append(float(np.sqrt(np.mean(diff**2))))
        z = np.abs(diff) / np.maximum(est.stderr, 1e-300)
        max_z.append(float(z.max()))
        ests.append(est)
        last_snaps, last_eps = snaps, eps
    monotone = all(rms[i] >= rms[i + 1] - 1e-12 for i in range(len(rms) - 1))
    pair = None
    if distance_bins:
        pair = estimate_pair_correlation(
            last_snaps, last_eps, distance_bins, length=L
        )
    return CompareReport(
        eps_list=tuple(sorted(eps_list, reverse=True)),
        rms=tuple(rms),
        max_z=tuple(max_z),
        estimates=tuple(ests),
        reference=ref,
        bin_centers=ests[-1].bin_centers,
        passed=bool(max_z[-1] <= 3.0),
        monotone=bool(monotone),
        t_end=t_end,
        replicas=replicas,
        pair=pair,
    )


# ---------------------------------------------------------------------------
# fluctuation demonstration


@dataclass
class FluctuationReport:
    """Seeded-cluster growth versus the empty-start baseline (eps = 1)."""

    times: np.ndarray
    seeded_mean: np.ndarray
    seeded_stderr: np.ndarray
    baseline_mean: np.ndarray
    baseline_stderr: np.ndarray
    initial_count: int
    seeded_grew: bool
    baseline_steady: bool
    steady_count: float     # lam * |region| / m, the non-interacting level
    replicas: int

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "seeded_mean": self.seeded_mean.tolist(),
            "seeded_stderr": self.seeded_stderr.tolist(),
            "baseline_mean": self.baseline_mean.tolist(),
            "baseline_stderr": self.baseline_stderr.tolist(),
            "initial_count": self.initial_count,
            "seeded_grew": self.seeded_grew,
            "baseline_steady": self.baseline_steady,
            "steady_count": self.steady_count,
            "replicas": self.replicas,
        }


def fluctuation_demo(
    params: ModelParams,
    potential: Potential,
    region: Region,
    initial_count: int,
    replicas: int,
    length: float = None,
    t_end: float = 10.0,
    snapshots: int = 21,
    base_seed: int = 77,
    cap: int = HARD_CAP,
) -> FluctuationReport:
    """Track the mean particle count in a region, seeded versus empty.

    A large enough seeded cluster shelters itself (attraction cuts the
    death rate) and its mean count rises; the empty start relaxes to the
    kinetic steady level (the low equilibrium density when one exists,
    the non-interacting level lam/m otherwise).  Statistical report only.
    """
    if length is None:
        length = 4.0 * max(
            region.hi[0] - region.lo[0], 2.0 * potential.cutoff, 1.0
        )
    dim = potential.dim
    if region.dim != dim:
        raise ConfigurationError("region and kernel dimension differ")
    times = np.linspace(0.0, t_end, snapshots)
    prm = ModelParams(params.m, params.lam, 1.0)

    def one(kind_seed, seeded: bool):
        rng = np.random.default_rng(kind_seed)
        if seeded and initial_count > 0:
            lo = np.asarray(region.lo)
            hi = np.asarray(region.hi)
            pts = rng.uniform(lo, hi, size=(initial_count, dim))
        else:
            pts = np.zeros((0, dim))
        sys = ParticleSystem(prm, potential, length, pts, seed=kind_seed, cap=cap)
        sys.rng = rng
        tr = sys.run(t_end, times)
        out = []
        for cfg in tr.configs:
            lo = np.asarray(region.lo)
            hi = np.asarray(region.hi)
            if cfg.shape[0] == 0:
                out.append(0)
            else:
                inside = np.all((cfg >= lo) & (cfg < hi), axis=1)
                out.append(int(np.count_nonzero(inside)))
        return np.array(out)

    def batch(offset, seeded):
        rows = [one(base_seed + offset + r, seeded) for r in range(replicas)]
        arr = np.array(rows, dtype=float)
        return arr.mean(axis=0), arr.std(axis=0, ddof=1) / math.sqrt(replicas)

    seeded_mean, seeded_err = batch(0, True)
    base_mean, base_err = batch(500_000, False)
    steady_density = params.lam / params.m
    beta = mass(potential)
    if beta > 0:
        eq = equilibrium_densities(prm, beta)
        if eq.regime != "supercritical":
            steady_density = eq.low
    steady = steady_density * region.volume
    seeded_grew = bool(seeded_mean[-1] > seeded_mean[0])
    # baseline counted as steady when the late-time mean sits within a few
    # errors of the non-interacting level
    tail = slice(max(1, len(times) // 2), None)
    err_tail = np.maximum(base_err[tail], 1e-300)
    base_steady = bool(
        np.all(np.abs(base_mean[tail] - steady) <= 5.0 * err_tail + 0.5)
    )
    return FluctuationReport(
        times=times,
        seeded_mean=seeded_mean,
        seeded_stderr=seeded_err,
        baseline_mean=base_mean,
        baseline_stderr=base_err,
        initial_count=initial_count,
        seeded_grew=seeded_grew,
        baseline_steady=base_steady,
        steady_count=steady,
        replicas=replicas,
    )
