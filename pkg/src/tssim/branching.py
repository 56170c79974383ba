"""Binary branching processes: closed forms and exact simulators.

A binary branching process with per-capita birth rate b and death rate d is
the linear (competition-free) birth-death chain used to approximate the early
and late phases of a mutant invasion. Closed forms implemented here:

    extinction probability            min(d / b, 1)
    extinction-time distribution      P(T_0 <= t) = (d (1 - e^{-(b-d)t}) /
                                                    (b - d e^{-(b-d)t}))^n
    hitting bound (subcritical)       P(hit k*n before 0 | start n) <= 1/k

The non-critical extinction-time formula is evaluated in a branch-stable way
so large t never overflows. Statistical checks run on `BranchingBatch`, a
vectorized direct-method engine that advances many independent replicates at
once; each replicate still follows the exact jump law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DegenerateParameterError


@dataclass(frozen=True)
class BranchingParams:
    birth: float
    death: float
    n0: int

    def __post_init__(self):
        if self.birth < 0 or self.death < 0:
            raise ValueError("rates must be nonnegative")
        if self.n0 < 0:
            raise ValueError("n0 must be a nonnegative integer")

    @property
    def criticality(self) -> str:
        if self.birth > self.death:
            return "supercritical"
        if self.birth < self.death:
            return "subcritical"
        return "critical"


def extinction_probability(b: float, d: float) -> float:
    """Probability that the line of descent of one individual dies out."""
    if b <= 0.0:
        # pure-death convention: certain extinction whenever d > 0
        raise DegenerateParameterError(
            "b = 0 has no branching structure; extinction is certain for d > 0"
        )
    return min(d / b, 1.0)


def extinction_time_cdf(b: float, d: float, n: int, t: float) -> float:
    """P(extinct by time t) for n independent initial individuals; b != d."""
    if b == d:
        raise DegenerateParameterError("critical case b = d is outside the closed form")
    if n < 0:
        raise ValueError("n must be a nonnegative integer")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if n == 0:
        return 1.0
    if t == 0.0 or d == 0.0:
        return 0.0
    if b > d:
        e = math.exp(-(b - d) * t)  # decays: safe
        base = d * (1.0 - e) / (b - d * e)
    else:
        g = math.exp(-(d - b) * t)  # decays: safe
        base = d * (1.0 - g) / (d - b * g)
    # clamp rounding excursions outside [0, 1]
    base = min(max(base, 0.0), 1.0)
    return base**n


@dataclass
class BranchingPath:
    """One exact trajectory: jump times and the count after each jump."""

    times: list[float]
    counts: list[int]
    extinct: bool
    cap_hit: bool
    truncated: bool  # stopped by t_max

    @property
    def final_count(self) -> int:
        return self.counts[-1]


def simulate_branching(params: BranchingParams, t_max: float, cap: int, rng) -> BranchingPath:
    """Exact direct-method path until extinction, t_max, or the count cap.

    The cap plays the role of "reached a fixed fraction of the system size"
    in invasion arguments; hitting it is flagged, not an error.
    """
    if cap <= params.n0:
        raise ValueError("cap must exceed the initial count")
    b, d = params.birth, params.death
    n = params.n0
    t = 0.0
    times = [0.0]
    counts = [n]
    if n == 0:
        return BranchingPath(times, counts, extinct=True, cap_hit=False, truncated=False)
    p_birth = b / (b + d) if (b + d) > 0 else 0.0
    while True:
        total = n * (b + d)
        if total == 0.0:
            return BranchingPath(times, counts, extinct=False, cap_hit=False, truncated=True)
        t += rng.exponential(1.0 / total)
        if t > t_max:
            return BranchingPath(times, counts, extinct=False, cap_hit=False, truncated=True)
        n = n + 1 if rng.random() < p_birth else n - 1
        times.append(t)
        counts.append(n)
        if n == 0:
            return BranchingPath(times, counts, extinct=True, cap_hit=False, truncated=False)
        if n >= cap:
            return BranchingPath(times, counts, extinct=False, cap_hit=True, truncated=False)


class BranchingBatch:
    """Vectorized direct method over many independent replicates.

    Per step every active replicate draws its own exponential waiting time
    with rate n (b + d) and a birth/death flip with probability b / (b + d),
    exactly as the scalar simulator does; replicates retire on absorption at
    0, at the cap, or when their clock passes t_max.
    """

    def __init__(self, b: float, d: float, n0: int, reps: int, rng):
        if b + d <= 0:
            raise DegenerateParameterError("b + d must be positive")
        self.b = b
        self.d = d
        self.rng = rng
        self.counts = np.full(reps, n0, dtype=np.int64)
        self.times = np.zeros(reps)
        self.p_birth = b / (b + d)

    def run(self, t_max: float = math.inf, cap: int | None = None):
        """Advance all replicates to absorption; returns (counts, times, cap_hit).

        On return counts[i] == 0 means extinct (times[i] = extinction time),
        counts[i] >= cap means the cap was hit first, and any other count
        means the replicate was still alive at t_max.
        """
        counts = self.counts
        times = self.times
        rng = self.rng
        rate = self.b + self.d
        active = np.flatnonzero(counts > 0)
        if cap is not None:
            active = active[counts[active] < cap]
        while active.size:
            n = counts[active]
            times[active] += rng.exponential(1.0, active.size) / (n * rate)
            births = rng.random(active.size) < self.p_birth
            counts[active] = n + np.where(births, 1, -1)
            alive = counts[active] > 0
            if cap is not None:
                alive &= counts[active] < cap
            alive &= times[active] <= t_max
            active = active[alive]
        cap_hit = np.zeros(counts.size, dtype=bool) if cap is None else counts >= cap
        return counts.copy(), times.copy(), cap_hit


def extinction_frequency_by(b: float, d: float, n0: int, t: float, reps: int, rng) -> float:
    """Monte Carlo estimate of P(extinct by t); exact per-replicate law."""
    batch = BranchingBatch(b, d, n0, reps, rng)
    counts, times, _ = batch.run(t_max=t)
    extinct = (counts == 0) & (times <= t)
    return float(np.mean(extinct))


def cap_hitting_frequency(b: float, d: float, n0: int, cap: int, reps: int, rng) -> float:
    """Monte Carlo estimate of P(hit cap before 0); no time horizon."""
    batch = BranchingBatch(b, d, n0, reps, rng)
    counts, _, cap_hit = batch.run(cap=cap)
    return float(np.mean(cap_hit))


@dataclass
class HittingBoundReport:
    frequency: float
    bound: float
    sigma: float
    reps: int
    ok: bool


def hitting_bound_check(b: float, d: float, n: int, k: int, reps: int, rng) -> HittingBoundReport:
    """Empirical P(hit k*n before 0) from n, against the 1/k martingale bound."""
    if b >= d:
        raise ValueError("the hitting bound is stated for the subcritical case b < d")
    if k < 1:
        raise ValueError("k must be a positive integer")
    if n < 0:
        raise ValueError("n must be nonnegative")
    bound = 1.0 / k
    if n == 0:
        return HittingBoundReport(0.0, bound, 0.0, reps, ok=True)
    freq = cap_hitting_frequency(b, d, n, k * n, reps, rng)
    sigma = math.sqrt(bound * (1.0 - bound) / reps)
    return HittingBoundReport(freq, bound, sigma, reps, ok=freq <= bound + 3.0 * sigma)
