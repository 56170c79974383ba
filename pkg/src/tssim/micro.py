"""Exact event-driven simulator of the rescaled individual-based process.

State is a finite collection of trait groups (exact trait value, integer
count) scaled by the system size K. Per-capita rates:

    birth   b(x); a birth is a mutation with probability u_K * mu(x)
    death   d(x) + (1/K) * sum_y alpha(x, y) * count(y)

The death sum runs over the whole population including the focal group's own
count, i.e. an individual competes with itself at weight alpha(x, x) / K.
Events are drawn by the direct stochastic simulation algorithm: exponential
waiting time at the total rate, then rate-proportional selection. Clonal
births copy the parent trait bit-for-bit, so group identity is exact.

Per-group death rates are maintained incrementally in O(#groups) per event
and recomputed from scratch every `refresh_interval` events to wash out
float drift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import EcologyParams, Trait

CLONAL_BIRTH = "birth"
MUTANT_BIRTH = "mutant-birth"
DEATH = "death"

DEFAULT_EVENT_BUDGET = 10**8
REFRESH_INTERVAL = 100_000


class ExtinctPopulationError(RuntimeError):
    """An event was requested from an empty population."""


class EventBudgetExceededError(RuntimeError):
    """The configured event cap was hit; signals runaway growth."""


class Event(NamedTuple):
    time: float
    kind: str
    trait: Trait
    parent: Trait | None


class BlockRng:
    """Scalar exponential/uniform draws served from cached blocks.

    Wraps a numpy Generator; consumption order is deterministic, so a fixed
    seed reproduces the exact event sequence.
    """

    __slots__ = ("rng", "_exp", "_uni", "_ie", "_iu", "_block")

    def __init__(self, rng, block: int = 4096):
        self.rng = rng
        self._block = block
        self._exp = rng.standard_exponential(block).tolist()
        self._uni = rng.random(block).tolist()
        self._ie = 0
        self._iu = 0

    def standard_exponential(self) -> float:
        i = self._ie
        if i == self._block:
            self._exp = self.rng.standard_exponential(self._block).tolist()
            i = 0
        self._ie = i + 1
        return self._exp[i]

    def random(self) -> float:
        i = self._iu
        if i == self._block:
            self._uni = self.rng.random(self._block).tolist()
            i = 0
        self._iu = i + 1
        return self._uni[i]

    def standard_normal(self, n: int):
        return self.rng.standard_normal(n)


class PopulationState:
    """Trait groups with cached per-group and total event rates."""

    __slots__ = (
        "K", "invK", "traits", "counts", "birth_pc", "mu_pc", "death_base",
        "alpha", "death_pc", "index", "N", "total_birth", "total_death",
        "time", "events_since_refresh",
    )

    def __init__(self, params: EcologyParams, K: int, groups):
        if K < 1:
            raise ValueError("K must be a positive integer")
        self.K = K
        self.invK = 1.0 / K
        self.traits: list[Trait] = []
        self.counts: list[int] = []
        self.birth_pc: list[float] = []
        self.mu_pc: list[float] = []
        self.death_base: list[float] = []
        self.alpha: list[list[float]] = []
        self.death_pc: list[float] = []
        self.index: dict[Trait, int] = {}
        self.N = 0
        self.time = 0.0
        self.events_since_refresh = 0
        items = groups.items() if isinstance(groups, dict) else groups
        for trait, count in items:
            trait = params.space.require(trait)
            count = int(count)
            if count < 1:
                raise ValueError("group counts must be positive integers")
            if trait in self.index:
                raise ValueError(f"duplicate group trait {trait}")
            self._append_group(params, trait, count)
        self.recompute_rates()

    # -- construction / bookkeeping -------------------------------------

    def _append_group(self, params: EcologyParams, trait: Trait, count: int) -> None:
        comp = params.competition
        row = [comp(trait, t) for t in self.traits]
        for j, t in enumerate(self.traits):
            self.alpha[j].append(comp(t, trait))
        row.append(comp(trait, trait))
        self.alpha.append(row)
        self.index[trait] = len(self.traits)
        self.traits.append(trait)
        self.counts.append(count)
        self.birth_pc.append(params.birth(trait))
        self.mu_pc.append(params.mutation_prob(trait))
        self.death_base.append(params.death(trait))
        self.death_pc.append(0.0)  # recompute_rates fills this
        self.N += count

    def recompute_rates(self) -> None:
        """Full refresh of per-group death rates and cached totals."""
        invK = self.invK
        counts = self.counts
        tb = td = 0.0
        for i in range(len(self.traits)):
            row = self.alpha[i]
            pressure = 0.0
            for j, c in enumerate(counts):
                pressure += row[j] * c
            dpc = self.death_base[i] + pressure * invK
            self.death_pc[i] = dpc
            tb += counts[i] * self.birth_pc[i]
            td += counts[i] * dpc
        self.total_birth = tb
        self.total_death = td
        self.events_since_refresh = 0

    def rate_cache_error(self) -> float:
        """Relative deviation of the cached totals from a fresh recompute."""
        invK = self.invK
        counts = self.counts
        td = 0.0
        for i in range(len(self.traits)):
            row = self.alpha[i]
            pressure = sum(row[j] * c for j, c in enumerate(counts))
            td += counts[i] * (self.death_base[i] + pressure * invK)
        if td == 0.0:
            return abs(self.total_death - td)
        return abs(self.total_death - td) / td

    def copy(self) -> "PopulationState":
        clone = object.__new__(PopulationState)
        clone.K = self.K
        clone.invK = self.invK
        clone.traits = list(self.traits)
        clone.counts = list(self.counts)
        clone.birth_pc = list(self.birth_pc)
        clone.mu_pc = list(self.mu_pc)
        clone.death_base = list(self.death_base)
        clone.alpha = [list(row) for row in self.alpha]
        clone.death_pc = list(self.death_pc)
        clone.index = dict(self.index)
        clone.N = self.N
        clone.total_birth = self.total_birth
        clone.total_death = self.total_death
        clone.time = self.time
        clone.events_since_refresh = self.events_since_refresh
        return clone

    # -- views -----------------------------------------------------------

    @property
    def groups(self) -> dict[Trait, int]:
        return dict(zip(self.traits, self.counts))

    @property
    def total_individuals(self) -> int:
        return self.N

    @property
    def mass(self) -> float:
        return self.N * self.invK

    @property
    def support_size(self) -> int:
        return len(self.traits)

    def support(self) -> list[tuple[Trait, float]]:
        return [(t, c * self.invK) for t, c in zip(self.traits, self.counts)]

    # -- event application (shared by step and simulate) ------------------

    def _totals(self) -> None:
        tb = td = 0.0
        counts = self.counts
        bpc = self.birth_pc
        dpc = self.death_pc
        for i in range(len(counts)):
            c = counts[i]
            tb += c * bpc[i]
            td += c * dpc[i]
        self.total_birth = tb
        self.total_death = td

    def apply_clonal_birth(self, i: int) -> None:
        self.counts[i] += 1
        self.N += 1
        invK = self.invK
        dpc = self.death_pc
        for j, row in enumerate(self.alpha):
            dpc[j] += row[i] * invK
        self._totals()

    def apply_death(self, i: int) -> None:
        self.counts[i] -= 1
        self.N -= 1
        invK = self.invK
        dpc = self.death_pc
        for j, row in enumerate(self.alpha):
            dpc[j] -= row[i] * invK
        if self.counts[i] == 0:
            self._drop_group(i)
        self._totals()

    def _drop_group(self, i: int) -> None:
        for name in ("traits", "counts", "birth_pc", "mu_pc", "death_base", "death_pc"):
            del getattr(self, name)[i]
        del self.alpha[i]
        for row in self.alpha:
            del row[i]
        self.index = {t: j for j, t in enumerate(self.traits)}

    def apply_mutant_birth(self, params: EcologyParams, parent_i: int, mutant: Trait) -> None:
        j = self.index.get(mutant)
        if j is not None:
            # the mutant landed exactly on an existing group (measure-zero)
            self.apply_clonal_birth(j)
            return
        invK = self.invK
        comp = params.competition
        for k, t in enumerate(self.traits):
            self.death_pc[k] += comp(t, mutant) * invK
        self._append_group(params, mutant, 1)
        i = len(self.traits) - 1
        row = self.alpha[i]
        pressure = 0.0
        for k, c in enumerate(self.counts):
            pressure += row[k] * c
        self.death_pc[i] = self.death_base[i] + pressure * invK
        self._totals()


def support(state: PopulationState) -> list[tuple[Trait, float]]:
    """Distinct live traits with their rescaled masses count / K."""
    return state.support()


def _select_group(state: PopulationState, u: float) -> tuple[bool, int]:
    """Map u ~ Uniform(0, total rate) to (is_birth, group index)."""
    tb = state.total_birth
    counts = state.counts
    if u < tb:
        acc = 0.0
        bpc = state.birth_pc
        last = len(counts) - 1
        for i in range(last):
            acc += counts[i] * bpc[i]
            if u < acc:
                return True, i
        return True, last
    u -= tb
    acc = 0.0
    dpc = state.death_pc
    last = len(counts) - 1
    for i in range(last):
        acc += counts[i] * dpc[i]
        if u < acc:
            return False, i
    return False, last


def step(state: PopulationState, params: EcologyParams, u_K: float, rng) -> tuple[Event, float]:
    """Draw and apply one event in place; returns (event, waiting time).

    `rng` may be a numpy Generator or a BlockRng; a Generator is wrapped on
    the fly so standalone calls and simulate() share one code path.
    """
    if state.N == 0:
        raise ExtinctPopulationError("cannot step an extinct population")
    if not isinstance(rng, BlockRng):
        rng = BlockRng(rng, block=1)
    total = state.total_birth + state.total_death
    dt = rng.standard_exponential() / total
    state.time += dt
    is_birth, i = _select_group(state, rng.random() * total)
    trait = state.traits[i]
    if is_birth:
        u_mu = u_K * state.mu_pc[i]
        if u_mu > 0.0 and rng.random() < u_mu:
            h = params.mutation_kernel.sample(params.space, trait, rng)
            mutant = tuple(a + b for a, b in zip(trait, h))
            state.apply_mutant_birth(params, i, mutant)
            event = Event(state.time, MUTANT_BIRTH, mutant, trait)
        else:
            state.apply_clonal_birth(i)
            event = Event(state.time, CLONAL_BIRTH, trait, None)
    else:
        state.apply_death(i)
        event = Event(state.time, DEATH, trait, None)
    state.events_since_refresh += 1
    if state.events_since_refresh >= REFRESH_INTERVAL:
        state.recompute_rates()
    return event, dt


@dataclass
class Trajectory:
    """Sampled observables plus terminal bookkeeping of one simulate() run."""

    K: int
    t_end: float
    sample_times: np.ndarray | None
    total_mass: np.ndarray | None
    support_size: np.ndarray | None
    tracked: dict[Trait, np.ndarray]
    support_snapshots: list[list[tuple[Trait, int]]] | None
    events: list[Event] | None
    final_state: PopulationState
    n_events: int
    n_mutations: int
    extinct: bool
    extinction_time: float | None
    first_mutation: float | None
    budget_exhausted: bool
    band_exit_time: float | None = None

    def to_csv(self, path) -> None:
        if self.sample_times is None:
            raise ValueError("trajectory was run without sample_times")
        tracked = sorted(self.tracked.items())
        cols = ["time", "total_mass", "support_size"]
        cols += ["mass_" + "_".join("%.17g" % c for c in t) for t, _ in tracked]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for k, t in enumerate(self.sample_times):
                row = ["%.17g" % t, "%.17g" % self.total_mass[k], "%d" % self.support_size[k]]
                row += ["%.17g" % series[k] for _, series in tracked]
                fh.write(",".join(row) + "\n")

    def events_to_csv(self, path) -> None:
        if self.events is None:
            raise ValueError("trajectory was run without record_events")
        dim = self.final_state and len(self.final_state.traits[0]) if self.final_state.traits else None
        dim = dim or (len(self.events[0].trait) if self.events else 1)
        head = ["time", "kind"]
        head += [f"trait_{i}" for i in range(dim)]
        head += [f"parent_{i}" for i in range(dim)]
        with open(path, "w") as fh:
            fh.write(",".join(head) + "\n")
            for ev in self.events:
                row = ["%.17g" % ev.time, ev.kind]
                row += ["%.17g" % c for c in ev.trait]
                row += ["%.17g" % c for c in ev.parent] if ev.parent else [""] * dim
                fh.write(",".join(row) + "\n")


def first_mutation_time(trajectory: Trajectory) -> float | None:
    """Time of the first mutant birth, None if no mutation occurred."""
    return trajectory.first_mutation


def simulate(params: EcologyParams, K: int, u_K: float, init: PopulationState,
             t_end: float, *, sample_times: Sequence[float] | None = None,
             track_traits: Sequence | None = None, record_events: bool = False,
             record_support: bool = False, max_events: int = DEFAULT_EVENT_BUDGET,
             rng=None, stop_at_first_mutation: bool = False,
             stop_when_monomorphic: bool = False,
             stop_outside_counts: tuple[int, int] | None = None) -> Trajectory:
    """Run the process from a copy of `init` until t_end or a stop condition.

    Observables are sampled at the exact requested times by holding the state
    constant between events. Extinction terminates the run normally; only an
    exhausted event budget raises through the returned flag. Identical
    (arguments, seed) reproduce the event sequence bit for bit.
    """
    if not (0.0 <= u_K <= 1.0):
        raise ValueError("u_K must lie in [0, 1]")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if rng is None:
        rng = np.random.default_rng()
    base_rng = rng.rng if isinstance(rng, BlockRng) else rng

    state = init.copy()
    state.time = 0.0
    state.events_since_refresh = 0

    times = None
    if sample_times is not None:
        times = [float(t) for t in sample_times]
        if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample_times must be nonnegative and strictly increasing")
        if times and times[-1] > t_end:
            raise ValueError("sample_times must not exceed t_end")
    tracked_traits = [params.space.require(t) for t in (track_traits or [])]
    masses: list[float] = []
    sizes: list[int] = []
    tracked_series: list[list[float]] = [[] for _ in tracked_traits]
    snapshots: list[list[tuple[Trait, int]]] | None = [] if record_support else None
    events: list[Event] | None = [] if record_events else None

    n_si = len(times) if times is not None else 0
    si = 0

    def record_sample() -> None:
        masses.append(state.N * state.invK)
        sizes.append(state.support_size)
        for k, tr in enumerate(tracked_traits):
            gi = state.index.get(tr)
            tracked_series[k].append(state.counts[gi] * state.invK if gi is not None else 0.0)
        if snapshots is not None:
            snapshots.append(list(zip(state.traits, state.counts)))

    n_events = 0
    n_mutations = 0
    extinct = False
    extinction_time = None
    first_mut = None
    budget_hit = False
    band_exit = None
    n_lo, n_hi = stop_outside_counts if stop_outside_counts else (0, None)

    # Hot loop. Structure-preserving events (clonal birth, death that leaves
    # the group alive) update the cached rates incrementally on local aliases;
    # group creation/removal falls back to the shared PopulationState methods.
    # Scalars (time, N, totals) live in locals and are synced to the state at
    # every slow-path event, sample, refresh and exit.
    counts = state.counts
    birth_pc = state.birth_pc
    death_pc = state.death_pc
    mu_pc = state.mu_pc
    alpha = state.alpha
    invK = state.invK
    tb = state.total_birth
    td = state.total_death
    live_n = state.N
    t_now = 0.0
    since_refresh = 0
    block = 4096
    exp_buf = base_rng.standard_exponential(block).tolist()
    uni_buf = base_rng.random(block).tolist()
    ie = iu = 0

    def sync() -> None:
        state.N = live_n
        state.total_birth = tb
        state.total_death = td
        state.time = t_now
        state.events_since_refresh = 0

    def reload() -> None:
        nonlocal counts, birth_pc, death_pc, mu_pc, alpha, tb, td, live_n
        counts = state.counts
        birth_pc = state.birth_pc
        death_pc = state.death_pc
        mu_pc = state.mu_pc
        alpha = state.alpha
        tb = state.total_birth
        td = state.total_death
        live_n = state.N

    while True:
        if live_n == 0:
            extinct = True
            break
        if n_events >= max_events:
            budget_hit = True
            break
        total = tb + td
        if ie == block:
            exp_buf = base_rng.standard_exponential(block).tolist()
            ie = 0
        t_next = t_now + exp_buf[ie] / total
        ie += 1
        if si < n_si and times[si] <= t_next:
            sync()
            while si < n_si and times[si] <= t_next and times[si] <= t_end:
                record_sample()
                si += 1
        if t_next >= t_end:
            t_now = t_end
            break
        t_now = t_next
        if iu == block:
            uni_buf = base_rng.random(block).tolist()
            iu = 0
        u = uni_buf[iu] * total
        iu += 1
        n_groups = len(counts)
        if u < tb:
            # birth: locate the group
            i = n_groups - 1
            if n_groups > 1:
                acc = 0.0
                for j in range(n_groups - 1):
                    acc += counts[j] * birth_pc[j]
                    if u < acc:
                        i = j
                        break
            mutated = False
            u_mu = u_K * mu_pc[i]
            if u_mu > 0.0:
                if iu == block:
                    uni_buf = base_rng.random(block).tolist()
                    iu = 0
                mutated = uni_buf[iu] < u_mu
                iu += 1
            if mutated:
                trait = state.traits[i]
                h = params.mutation_kernel.sample(params.space, trait, base_rng)
                mutant = tuple(a + b for a, b in zip(trait, h))
                sync()
                state.apply_mutant_birth(params, i, mutant)
                reload()
                n_mutations += 1
                if first_mut is None:
                    first_mut = t_next
                if events is not None:
                    events.append(Event(t_next, MUTANT_BIRTH, mutant, trait))
                if stop_at_first_mutation:
                    n_events += 1
                    break
            else:
                # clonal birth: every group's death pressure gains alpha(., i)/K
                s = 0.0
                for j in range(n_groups):
                    a = alpha[j][i] * invK
                    s += counts[j] * a
                    death_pc[j] += a
                counts[i] += 1
                live_n += 1
                tb += birth_pc[i]
                td += s + death_pc[i]
                if events is not None:
                    events.append(Event(t_next, CLONAL_BIRTH, state.traits[i], None))
        else:
            # death: locate the group
            u -= tb
            i = n_groups - 1
            if n_groups > 1:
                acc = 0.0
                for j in range(n_groups - 1):
                    acc += counts[j] * death_pc[j]
                    if u < acc:
                        i = j
                        break
            if counts[i] > 1:
                s = 0.0
                for j in range(n_groups):
                    a = alpha[j][i] * invK
                    s += counts[j] * a
                    death_pc[j] -= a
                counts[i] -= 1
                live_n -= 1
                tb -= birth_pc[i]
                td -= s + death_pc[i]
                if events is not None:
                    events.append(Event(t_next, DEATH, state.traits[i], None))
            else:
                # the group dies out: remove it through the state
                trait = state.traits[i]
                sync()
                state.apply_death(i)
                reload()
                if events is not None:
                    events.append(Event(t_next, DEATH, trait, None))
                if live_n == 0:
                    extinct = True
                    extinction_time = t_next
                    n_events += 1
                    break
        n_events += 1
        since_refresh += 1
        if since_refresh >= REFRESH_INTERVAL:
            sync()
            state.recompute_rates()
            reload()
            since_refresh = 0
        if stop_when_monomorphic and len(counts) <= 1:
            break
        if stop_outside_counts and (live_n < n_lo or (n_hi is not None and live_n > n_hi)):
            band_exit = t_next
            break

    sync()
    # flush remaining sample times; the state stays constant after the last event
    while si < n_si and times[si] <= t_end:
        record_sample()
        si += 1

    return Trajectory(
        K=K,
        t_end=t_end,
        sample_times=np.asarray(times) if times is not None else None,
        total_mass=np.asarray(masses) if times is not None else None,
        support_size=np.asarray(sizes, dtype=np.int64) if times is not None else None,
        tracked={t: np.asarray(s) for t, s in zip(tracked_traits, tracked_series)},
        support_snapshots=snapshots,
        events=events,
        final_state=state,
        n_events=n_events,
        n_mutations=n_mutations,
        extinct=extinct,
        extinction_time=extinction_time,
        first_mutation=first_mut,
        budget_exhausted=budget_hit,
        band_exit_time=band_exit,
    )
