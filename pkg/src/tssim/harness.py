"""Replicate orchestration and statistical checks of the limit claims.

Desk-scale experiments against the convergence statements connecting the
individual-based process to its limits:

  * estimate_invasion_probability: fixation frequency of a single mutant vs
    the branching survival probability [f(y, x)]_+ / b(y)
  * mutation_time_test: rescaled first-mutation time K u_K tau_1 vs the
    exponential law with rate beta(x)
  * compare_fdd: binned support-trait law, monomorphicity and
    equilibrium-mass frequencies across a ladder of K, vs the jump-process
    marginal on the mutation time scale t / (K u_K)
  * exit_time_scaling: growth of the time to leave a band around the
    monomorphic equilibrium as K increases

Every estimator is a deterministic function of (arguments, master seed):
replicate i always uses the stream derived from (master seed, stream id, i),
so results are identical at any parallelism degree.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import kstest

from .micro import PopulationState, simulate
from .model import (
    EcologyParams,
    InvasionOutcome,
    Trait,
    as_trait,
    classify_pair,
    equilibrium_density,
    mutation_rate_beta,
)
from .tss import simulate_tss

TV_BIN_WIDTH = 0.02


# ---------------------------------------------------------------------------
# Mutation-probability scaling rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UKRule:
    """Per-K choice of the mutation-probability scaling u_K.

    "log-squared" is 1 / (K (log K)^2), sitting inside the admissible window
    between exp(-V K) and 1 / (K log K); "power" is coeff * K^-exponent with
    exponent > 1, also admissible; "fixed" pins an explicit value.
    """

    rule: str = "log-squared"
    coeff: float = 1.0
    exponent: float = 1.5
    value: float | None = None

    def for_K(self, K: int) -> float:
        if K < 1:
            raise ValueError("K must be a positive integer")
        if self.rule == "log-squared":
            lg = math.log(K)
            u = 1.0 if lg == 0.0 else 1.0 / (K * lg * lg)
        elif self.rule == "power":
            if self.exponent <= 1.0:
                raise ValueError("power rule needs exponent > 1")
            u = self.coeff * K ** (-self.exponent)
        elif self.rule == "fixed":
            if self.value is None:
                raise ValueError("fixed rule needs a value")
            u = self.value
        else:
            raise ValueError(f"unknown u_K rule: {self.rule!r}")
        if not (0.0 <= u <= 1.0):
            u = min(max(u, 0.0), 1.0)
        return u

    def to_config(self) -> dict:
        cfg = {"rule": self.rule}
        if self.rule == "power":
            cfg.update(coeff=self.coeff, exponent=self.exponent)
        if self.rule == "fixed":
            cfg["value"] = self.value
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "UKRule":
        return cls(
            rule=cfg.get("rule", "log-squared"),
            coeff=float(cfg.get("coeff", 1.0)),
            exponent=float(cfg.get("exponent", 1.5)),
            value=cfg.get("value"),
        )


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Complete experiment description; serializes to one JSON document."""

    params: EcologyParams
    initial_trait: Trait
    K_list: list[int] = field(default_factory=lambda: [1000])
    u_rule: UKRule = field(default_factory=UKRule)
    mutant_trait: Trait | None = None
    initial_mass: float | None = None  # None: start at the equilibrium density
    observation_times: list[float] = field(default_factory=lambda: [0.5, 1.0])
    replicates: int = 200
    seed: int = 12345
    t_end: float = 10.0       # raw-time horizon for direct micro runs
    tss_t_end: float = 20.0   # jump-process horizon for direct runs
    dt: float = 1e-3
    exit_eta1: float | None = None
    exit_eta2: float | None = None
    exit_t_max: float = 5000.0

    def __post_init__(self):
        self.initial_trait = self.params.space.require(self.initial_trait)
        if self.mutant_trait is not None:
            self.mutant_trait = self.params.space.require(self.mutant_trait)
        if any(k < 1 for k in self.K_list):
            raise ValueError("all K must be >= 1")
        times = self.observation_times
        if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("observation times must be nonnegative and strictly increasing")
        if self.replicates < 1:
            raise ValueError("replicate count must be >= 1")

    def initial_count(self, K: int) -> int:
        mass = self.initial_mass
        if mass is None:
            mass = equilibrium_density(self.params, self.initial_trait)
        n = int(math.floor(K * mass))
        if n < 1:
            raise ValueError(f"initial mass {mass} yields an empty population at K={K}")
        return n

    def to_dict(self) -> dict:
        cfg = {"schema": "tssim/scenario-v1"}
        cfg.update(self.params.to_config())
        cfg.update(
            initial_trait=list(self.initial_trait),
            mutant_trait=list(self.mutant_trait) if self.mutant_trait else None,
            initial_mass=self.initial_mass,
            K=list(self.K_list),
            u_K=self.u_rule.to_config(),
            observation_times=list(self.observation_times),
            replicates=self.replicates,
            seed=self.seed,
            t_end=self.t_end,
            tss_t_end=self.tss_t_end,
            dt=self.dt,
            exit_eta1=self.exit_eta1,
            exit_eta2=self.exit_eta2,
            exit_t_max=self.exit_t_max,
        )
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, cfg: dict) -> "ScenarioConfig":
        params = EcologyParams.from_config(cfg)
        kwargs = {}
        for key in ("initial_mass", "replicates", "seed", "t_end", "tss_t_end",
                    "dt", "exit_eta1", "exit_eta2", "exit_t_max"):
            if cfg.get(key) is not None:
                kwargs[key] = cfg[key]
        return cls(
            params=params,
            initial_trait=as_trait(cfg["initial_trait"]),
            mutant_trait=as_trait(cfg["mutant_trait"]) if cfg.get("mutant_trait") else None,
            K_list=[int(k) for k in cfg.get("K", [1000])],
            u_rule=UKRule.from_config(cfg.get("u_K", {})),
            observation_times=[float(t) for t in cfg.get("observation_times", [0.5, 1.0])],
            **kwargs,
        )

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))


def default_scenario() -> ScenarioConfig:
    """Shipped default: 1-D box, gentle directional selection toward 1."""
    from .model import (
        BilinearKernel,
        ConstantFn,
        GaussianMutationKernel,
        LinearFn,
        TraitSpace,
    )

    params = EcologyParams(
        space=TraitSpace((0.0,), (1.0,)),
        birth=LinearFn(2.0, (1.0,)),
        death=ConstantFn(1.0),
        competition=BilinearKernel(1.0, (0.5,), (-0.5,), clip_lo=0.25, clip_hi=4.0),
        mutation_prob=ConstantFn(0.1),
        mutation_kernel=GaussianMutationKernel(0.05),
    )
    return ScenarioConfig(
        params=params,
        initial_trait=(0.5,),
        mutant_trait=(0.7,),
        K_list=[1000],
        replicates=200,
        seed=12345,
    )


def strong_selection_scenario(replicates: int = 500, seed: int = 90210) -> ScenarioConfig:
    """Benchmark scenario for the K-ladder convergence check.

    Flat equilibrium density 1 (competition tracks the growth rate), fitness
    2.5 (y - x), wide mutant steps and a power-rule u_K = K^{-3/2}: mutant
    sweeps are fast and visibly rarer per unit raw time as K grows, which is
    what the ladder verdicts need at desk scale.
    """
    from .model import (
        BilinearKernel,
        ConstantFn,
        GaussianMutationKernel,
        LinearFn,
        TraitSpace,
    )

    params = EcologyParams(
        space=TraitSpace((0.0,), (1.0,)),
        birth=LinearFn(2.0, (5.0,)),
        death=ConstantFn(1.0),
        competition=BilinearKernel(1.0, (2.5,), (2.5,)),
        mutation_prob=ConstantFn(0.5),
        mutation_kernel=GaussianMutationKernel(0.25),
    )
    return ScenarioConfig(
        params=params,
        initial_trait=(0.2,),
        K_list=[300, 1000, 3000],
        u_rule=UKRule(rule="power", coeff=1.0, exponent=1.5),
        observation_times=[1.0, 2.0],
        replicates=replicates,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Deterministic replicate running
# ---------------------------------------------------------------------------

def derive_rng(master_seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent stream for replicate `index` of logical stream `stream`."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(stream, index)))


@dataclass
class ReplicateResult:
    index: int
    ok: bool
    value: object
    error: str | None = None


def _run_one(task) -> ReplicateResult:
    job, args, master_seed, stream, index = task
    try:
        value = job(args, derive_rng(master_seed, stream, index))
        return ReplicateResult(index, True, value)
    except Exception as exc:  # per-replicate isolation: never abort the batch
        return ReplicateResult(index, False, None, f"{type(exc).__name__}: {exc}")


def run_replicates(job, args, reps: int, master_seed: int, parallelism: int = 1,
                   stream: int = 0) -> list[ReplicateResult]:
    """Run `job(args, rng_i)` for i in range(reps), keyed by replicate index.

    Results are identical for any parallelism degree; failures are isolated
    per replicate. For parallelism > 1 the job must be a module-level
    function with picklable args.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    tasks = [(job, args, master_seed, stream, i) for i in range(reps)]
    if not tasks:
        return []
    if parallelism == 1 or reps == 1:
        return [_run_one(t) for t in tasks]
    chunk = max(1, reps // (parallelism * 8))
    with ProcessPoolExecutor(max_workers=parallelism) as ex:
        return list(ex.map(_run_one, tasks, chunksize=chunk))


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """95% score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


# ---------------------------------------------------------------------------
# Invasion probability
# ---------------------------------------------------------------------------

@dataclass
class InvasionEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    target: float
    n_mutant: int
    n_resident: int
    n_extinct: int
    n_budget: int
    reps: int
    K: int

    def to_dict(self) -> dict:
        return asdict(self)


def _invasion_worker(args, rng) -> str:
    params, x, y, K, budget = args
    resident = int(math.floor(K * equilibrium_density(params, x)))
    init = PopulationState(params, K, [(x, resident), (y, 1)])
    traj = simulate(params, K, 0.0, init, t_end=math.inf,
                    stop_when_monomorphic=True, max_events=budget, rng=rng)
    if traj.budget_exhausted:
        return "budget"
    if traj.extinct:
        return "extinct"
    winner = traj.final_state.traits[0]
    return "mutant" if winner == y else "resident"


def estimate_invasion_probability(params: EcologyParams, x, y, K: int, reps: int,
                                  master_seed: int, parallelism: int = 1,
                                  event_budget: int = 10**8) -> InvasionEstimate:
    """Fixation frequency of one y-mutant in an equilibrium x-resident colony.

    Mutation is switched off (u_K = 0), so each replicate is a pure
    competition race ending at fixation of one trait; the limiting value is
    the branching survival probability [f(y, x)]_+ / b(y).
    """
    x = params.space.require(x)
    y = params.space.require(y)
    cls = classify_pair(params, x, y)
    if cls.outcome is InvasionOutcome.DEGENERATE:
        raise ValueError("degenerate pair: invasion estimate needs a sign-definite pair")
    if int(math.floor(K * equilibrium_density(params, x))) < 10:
        raise ValueError("K too small: resident colony needs at least 10 individuals")
    results = run_replicates(_invasion_worker, (params, x, y, K, event_budget),
                             reps, master_seed, parallelism)
    outcomes = [r.value for r in results if r.ok]
    n_mut = sum(1 for o in outcomes if o == "mutant")
    n_res = sum(1 for o in outcomes if o == "resident")
    n_ext = sum(1 for o in outcomes if o == "extinct")
    n_bud = sum(1 for o in outcomes if o == "budget") + sum(1 for r in results if not r.ok)
    lo, hi = wilson_interval(n_mut, reps)
    target = max(cls.fitness_mutant, 0.0) / params.birth(y)
    return InvasionEstimate(n_mut / reps, lo, hi, target, n_mut, n_res, n_ext, n_bud, reps, K)


# ---------------------------------------------------------------------------
# First-mutation-time law
# ---------------------------------------------------------------------------

@dataclass
class MutationTimeReport:
    ks_statistic: float
    p_value: float
    ks_pass: bool
    scaled_mean: float
    expected_mean: float
    mean_within_3se: bool
    beta: float
    u_K: float
    n_samples: int
    n_extinct: int
    n_censored: int
    reps: int
    K: int

    def to_dict(self) -> dict:
        return asdict(self)


def _mutation_time_worker(args, rng):
    params, x, K, u_K, t_cap = args
    n0 = int(math.floor(K * equilibrium_density(params, x)))
    init = PopulationState(params, K, {x: n0})
    traj = simulate(params, K, u_K, init, t_end=t_cap,
                    stop_at_first_mutation=True, rng=rng)
    if traj.first_mutation is not None:
        return ("mutation", traj.first_mutation)
    if traj.extinct:
        return ("extinct", traj.extinction_time)
    return ("censored", None)


def mutation_time_test(params: EcologyParams, x, K: int, reps: int, master_seed: int,
                       u_K: float | None = None, parallelism: int = 1,
                       significance: float = 0.01) -> MutationTimeReport:
    """KS check of K u_K tau_1 against the exponential law with rate beta(x)."""
    x = params.space.require(x)
    beta = mutation_rate_beta(params, x)
    if u_K is None:
        u_K = UKRule().for_K(K)
    if u_K <= 0.0 or params.mutation_prob(x) <= 0.0:
        raise ValueError("degenerate input: u_K * mu(x) = 0 never produces a mutation")
    scale = K * u_K
    t_cap = 30.0 / (scale * beta)
    results = run_replicates(_mutation_time_worker, (params, x, K, u_K, t_cap),
                             reps, master_seed, parallelism)
    taus = [r.value[1] for r in results if r.ok and r.value[0] == "mutation"]
    n_ext = sum(1 for r in results if r.ok and r.value[0] == "extinct")
    n_cens = sum(1 for r in results if r.ok and r.value[0] == "censored")
    if not taus:
        raise RuntimeError("no mutation was observed in any replicate")
    scaled = np.asarray(taus) * scale
    stat, pval = kstest(scaled, "expon", args=(0.0, 1.0 / beta))
    mean = float(scaled.mean())
    se = (1.0 / beta) / math.sqrt(len(scaled))
    return MutationTimeReport(
        ks_statistic=float(stat),
        p_value=float(pval),
        ks_pass=bool(pval > significance),
        scaled_mean=mean,
        expected_mean=1.0 / beta,
        mean_within_3se=bool(abs(mean - 1.0 / beta) <= 3.0 * se),
        beta=beta,
        u_K=u_K,
        n_samples=len(scaled),
        n_extinct=n_ext,
        n_censored=n_cens,
        reps=reps,
        K=K,
    )


# ---------------------------------------------------------------------------
# Finite-dimensional-distribution comparison
# ---------------------------------------------------------------------------

@dataclass
class TimePointStats:
    time: float
    monomorphic_freq: float
    mass_ok_freq: float
    tv_distance: float
    tv_sigma: float
    micro_bins: list[int]
    n_extinct: int


@dataclass
class KLadderStats:
    K: int
    u_K: float
    per_time: list[TimePointStats]
    mono_avg: float = 0.0      # monomorphicity frequency averaged over times
    tv_avg: float = 0.0        # TV distance averaged over times
    tv_avg_sigma: float = 0.0


@dataclass
class ComparisonReport:
    times: list[float]
    epsilon: float
    reps: int
    tss_reference_reps: int
    bin_width: float
    per_K: list[KLadderStats]
    tss_bins: list[list[int]]  # one histogram per observation time
    tv_nonincreasing: bool
    mono_increasing: bool
    mono_final: float
    seed: int
    # raw per-replicate observations (K, replicate, time, support size,
    # dominant trait coordinate, total mass); exported as CSV, not JSON
    raw_replicates: list[tuple] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["raw_replicates"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def raw_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("K,replicate,time,support_size,dominant_trait_0,total_mass\n")
            for K, rep, t, size, dom, mass in self.raw_replicates:
                fh.write("%d,%d,%.17g,%d,%s,%.17g\n"
                         % (K, rep, t, size, "%.17g" % dom if dom is not None else "", mass))


def _tss_ref_worker(args, rng):
    params, x0, times = args
    horizon = max(times)
    if horizon == 0.0:
        return [x0 for _ in times]
    path = simulate_tss(params, x0, horizon, rng, record_proposals=False)
    return [path.trait_at(t) if t > 0 else x0 for t in times]


def _fdd_micro_worker(args, rng):
    params, x0, n0, K, u_K, raw_times = args
    init = PopulationState(params, K, {x0: n0})
    traj = simulate(params, K, u_K, init, t_end=max(raw_times) if raw_times[-1] > 0 else 1.0,
                    sample_times=raw_times, record_support=True, rng=rng)
    out = []
    for snap, mass in zip(traj.support_snapshots, traj.total_mass):
        if not snap:
            out.append((0, None, 0.0))
            continue
        dominant = max(snap, key=lambda g: g[1])[0]
        out.append((len(snap), dominant, float(mass)))
    return out


def _bin_index(coord: float, lo: float, n_bins: int, width: float) -> int:
    i = int((coord - lo) / width)
    return min(max(i, 0), n_bins - 1)


def _tv(p_counts, q_counts) -> float:
    p = np.asarray(p_counts, dtype=float)
    q = np.asarray(q_counts, dtype=float)
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())


def compare_fdd(config: ScenarioConfig, parallelism: int = 1,
                tss_reference_reps: int | None = None) -> ComparisonReport:
    """Ladder comparison of the micro process against the jump-process limit.

    For each K, micro replicates are observed at the raw times t_i / (K u_K).
    Per observation time the report carries the monomorphicity frequency, the
    frequency of the joint event (monomorphic and mass within epsilon of the
    support trait's equilibrium density), and the total-variation distance
    between the binned dominant-trait law and the jump-process marginal.
    Polymorphic replicates are counted, not errors: they are the vanishing
    event of the limit statement.

    The ladder verdicts compare time-averaged quantities per K (monomorphic
    frequency nondecreasing within one combined standard error; TV distance
    nonincreasing within one bootstrap sigma), which averages out the
    per-time sampling noise the verdict would otherwise sit on.
    """
    params = config.params
    x0 = config.initial_trait
    times = list(config.observation_times)
    reps = config.replicates
    seed = config.seed
    eps = 0.1 * equilibrium_density(params, x0)
    space = params.space
    lo = space.lower[0]
    n_bins = max(1, int(math.ceil((space.upper[0] - lo) / TV_BIN_WIDTH)))

    ref_reps = tss_reference_reps or max(20_000, 4 * reps)
    ref = run_replicates(_tss_ref_worker, (params, x0, times), ref_reps, seed,
                         parallelism, stream=1)
    tss_bins = [[0] * n_bins for _ in times]
    for r in ref:
        if not r.ok:
            continue
        for ti, trait in enumerate(r.value):
            tss_bins[ti][_bin_index(trait[0], lo, n_bins, TV_BIN_WIDTH)] += 1

    per_K: list[KLadderStats] = []
    raw_rows: list[tuple] = []
    for ki, K in enumerate(config.K_list):
        u_K = config.u_rule.for_K(K)
        raw_times = [t / (K * u_K) for t in times]
        n0 = config.initial_count(K)
        results = run_replicates(
            _fdd_micro_worker, (params, x0, n0, K, u_K, raw_times),
            reps, seed, parallelism, stream=100 + ki)
        for r in results:
            if not r.ok:
                continue
            for t, (size, dominant, mass) in zip(times, r.value):
                raw_rows.append((K, r.index, t, size,
                                 dominant[0] if dominant else None, mass))
        stats: list[TimePointStats] = []
        for ti, t in enumerate(times):
            bins = [0] * n_bins
            mono = mass_ok = extinct = 0
            for r in results:
                if not r.ok:
                    continue
                size, dominant, mass = r.value[ti]
                if size == 0:
                    extinct += 1
                    continue
                bins[_bin_index(dominant[0], lo, n_bins, TV_BIN_WIDTH)] += 1
                if size == 1:
                    mono += 1
                    if abs(mass - equilibrium_density(params, dominant)) < eps:
                        mass_ok += 1
            total = sum(bins)
            if total == 0:  # every replicate extinct at this time
                stats.append(TimePointStats(t, 0.0, 0.0, 1.0, 0.0, bins, extinct))
                continue
            tv = _tv(bins, tss_bins[ti])
            # multinomial bootstrap of the micro histogram for a 1-sigma scale
            boot_rng = derive_rng(seed, 200 + ki, ti)
            probs = np.asarray(bins, dtype=float)
            probs /= probs.sum()
            draws = boot_rng.multinomial(total, probs, size=200)
            tvs = [_tv(row, tss_bins[ti]) for row in draws]
            stats.append(TimePointStats(
                time=t,
                monomorphic_freq=mono / reps,
                mass_ok_freq=mass_ok / reps,
                tv_distance=tv,
                tv_sigma=float(np.std(tvs)),
                micro_bins=bins,
                n_extinct=extinct,
            ))
        n_times = len(stats)
        mono_avg = sum(s.monomorphic_freq for s in stats) / n_times
        tv_avg = sum(s.tv_distance for s in stats) / n_times
        tv_avg_sigma = math.sqrt(sum(s.tv_sigma**2 for s in stats)) / n_times
        per_K.append(KLadderStats(K=K, u_K=u_K, per_time=stats, mono_avg=mono_avg,
                                  tv_avg=tv_avg, tv_avg_sigma=tv_avg_sigma))

    tv_ok = True
    mono_ok = True
    n_times = len(times)
    for a, b in zip(per_K, per_K[1:]):
        if b.tv_avg > a.tv_avg + math.hypot(a.tv_avg_sigma, b.tv_avg_sigma):
            tv_ok = False
        se_a = math.sqrt(max(a.mono_avg * (1 - a.mono_avg), 1e-12) / (reps * n_times))
        se_b = math.sqrt(max(b.mono_avg * (1 - b.mono_avg), 1e-12) / (reps * n_times))
        if b.mono_avg < a.mono_avg - math.hypot(se_a, se_b):
            mono_ok = False
    mono_final = per_K[-1].mono_avg if per_K else 0.0

    return ComparisonReport(
        times=times,
        epsilon=eps,
        reps=reps,
        tss_reference_reps=ref_reps,
        bin_width=TV_BIN_WIDTH,
        per_K=per_K,
        tss_bins=tss_bins,
        tv_nonincreasing=tv_ok,
        mono_increasing=mono_ok,
        mono_final=mono_final,
        seed=seed,
        raw_replicates=raw_rows,
    )


# ---------------------------------------------------------------------------
# Exit-time growth
# ---------------------------------------------------------------------------

@dataclass
class ExitTimeKStats:
    K: int
    median: float  # inf when at least half the replicates were censored
    n_exited: int
    n_censored: int
    exit_times: list[float]


@dataclass
class ExitTimeReport:
    eta1: float
    eta2: float
    equilibrium: float
    t_max: float
    reps: int
    per_K: list[ExitTimeKStats]
    strictly_increasing: bool
    log_median_slope: float | None
    seed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        for row in d["per_K"]:
            if math.isinf(row["median"]):
                row["median"] = "censored"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _exit_time_worker(args, rng):
    params, x0, K, n0, band, t_max = args
    init = PopulationState(params, K, {x0: n0})
    traj = simulate(params, K, 0.0, init, t_end=t_max,
                    stop_outside_counts=band, rng=rng)
    if traj.band_exit_time is not None:
        return traj.band_exit_time
    if traj.extinct:
        return traj.extinction_time
    return None  # censored at t_max


def exit_time_scaling(b: float, d: float, alpha: float, eta1: float, eta2: float,
                      K_list: list[int], reps: int, master_seed: int,
                      t_max: float = 5000.0, parallelism: int = 1) -> ExitTimeReport:
    """Median time for the no-mutation process to leave a band around n_bar.

    Censoring at t_max counts as exceedance: the verdict treats a censored
    median as +infinity, which is evidence for exit times growing with K.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive: without competition there is no equilibrium")
    if b <= d:
        raise ValueError("b must exceed d for a positive equilibrium")
    nbar = (b - d) / alpha
    if not (0.0 < eta1 < nbar):
        raise ValueError("eta1 must lie strictly between 0 and the equilibrium density")
    if eta2 <= 0:
        raise ValueError("eta2 must be positive")

    from .model import ConstantFn, ConstantKernel, GaussianMutationKernel, TraitSpace

    params = EcologyParams(
        space=TraitSpace((0.0,), (1.0,)),
        birth=ConstantFn(b),
        death=ConstantFn(d),
        competition=ConstantKernel(alpha),
        mutation_prob=ConstantFn(1.0),
        mutation_kernel=GaussianMutationKernel(0.1),
    )
    x0 = (0.5,)
    per_K: list[ExitTimeKStats] = []
    for ki, K in enumerate(K_list):
        n0 = int(round(K * nbar))
        n_in_min = int(math.ceil(K * (nbar - eta1) - 1e-9))
        n_in_max = int(math.floor(K * (nbar + eta2) + 1e-9))
        results = run_replicates(
            _exit_time_worker, (params, x0, K, n0, (n_in_min, n_in_max), t_max),
            reps, master_seed, parallelism, stream=300 + ki)
        exits = [r.value for r in results if r.ok and r.value is not None]
        censored = sum(1 for r in results if r.ok and r.value is None)
        values = sorted(exits) + [math.inf] * censored
        median = float(np.median(values)) if values else math.inf
        per_K.append(ExitTimeKStats(K=K, median=median, n_exited=len(exits),
                                    n_censored=censored, exit_times=sorted(exits)))

    medians = [s.median for s in per_K]
    increasing = all(b2 > a2 for a2, b2 in zip(medians, medians[1:]))
    finite = [(k, m) for k, m in zip(K_list, medians) if math.isfinite(m) and m > 0]
    slope = None
    if len(finite) >= 2:
        ks = np.array([k for k, _ in finite], dtype=float)
        logm = np.log([m for _, m in finite])
        slope = float(np.polyfit(ks, logm, 1)[0])
    return ExitTimeReport(
        eta1=eta1, eta2=eta2, equilibrium=nbar, t_max=t_max, reps=reps,
        per_K=per_K, strictly_increasing=increasing, log_median_slope=slope,
        seed=master_seed,
    )
