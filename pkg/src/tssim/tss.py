"""Simulator of the limiting trait-substitution jump process.

The limit process sits on a single trait at a time and jumps at proposal rate
beta(x) = mu(x) b(x) n_bar(x). A proposal draws a mutant step h from the
mutation kernel and is accepted with probability [f(x+h, x)]_+ / b(x+h), the
survival probability of the mutant's early branching phase; a rejected
proposal leaves the trait in place, which realizes the jump kernel's atom at
zero without ever integrating it. Under the standing assumptions the
acceptance ratio never exceeds one.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .model import EcologyParams, Trait, invasion_fitness, mutation_rate_beta


class AcceptanceBoundError(RuntimeError):
    """[f]_+ / b exceeded 1: the parameters break the standing assumptions."""


@dataclass(frozen=True)
class TssProposal:
    time: float
    candidate: Trait
    accepted: bool


@dataclass
class TssPath:
    """Piecewise-constant trait path: jump times with the trait adopted there."""

    initial: Trait
    jumps: list[tuple[float, Trait]]
    proposals: list[TssProposal] | None
    t_end: float

    def trait_at(self, t: float) -> Trait:
        if t < 0:
            raise ValueError("t must be nonnegative")
        i = bisect.bisect_right([jt for jt, _ in self.jumps], t)
        return self.initial if i == 0 else self.jumps[i - 1][1]

    @property
    def terminal(self) -> Trait:
        return self.jumps[-1][1] if self.jumps else self.initial

    def to_csv(self, path) -> None:
        dim = len(self.initial)
        with open(path, "w") as fh:
            fh.write("jump_time," + ",".join(f"trait_{i}" for i in range(dim)) + "\n")
            fh.write("0," + ",".join("%.17g" % c for c in self.initial) + "\n")
            for t, trait in self.jumps:
                fh.write("%.17g," % t + ",".join("%.17g" % c for c in trait) + "\n")


def _propose(params: EcologyParams, x: Trait, rng) -> tuple[Trait, bool]:
    """One mutant proposal from x: returns (candidate, accepted)."""
    h = params.mutation_kernel.sample(params.space, x, rng)
    candidate = tuple(a + b for a, b in zip(x, h))
    fitness = invasion_fitness(params, candidate, x)
    if fitness <= 0.0:
        return candidate, False
    ratio = fitness / params.birth(candidate)
    if ratio > 1.0 + 1e-12:
        raise AcceptanceBoundError(
            f"[f]_+/b = {ratio} > 1 at {candidate} vs {x}; assumptions violated"
        )
    return candidate, rng.random() < ratio


def sample_jump_kernel(params: EcologyParams, x, rng) -> Trait:
    """Draw the post-proposal trait: the accepted mutant, or x itself.

    Exactly one mutation-kernel draw per call, so the acceptance frequency
    over repeated calls equals the kernel's non-atom mass.
    """
    x = params.space.require(x)
    candidate, accepted = _propose(params, x, rng)
    return candidate if accepted else x


def simulate_tss(params: EcologyParams, x0, t_end: float, rng,
                 record_proposals: bool = True) -> TssPath:
    """Exponential clocks at rate beta(current trait); jumps via the kernel."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x = params.space.require(x0)
    t = 0.0
    jumps: list[tuple[float, Trait]] = []
    proposals: list[TssProposal] | None = [] if record_proposals else None
    while True:
        beta = mutation_rate_beta(params, x)
        t += rng.exponential(1.0 / beta)
        if t > t_end:
            return TssPath(params.space.require(x0), jumps, proposals, t_end)
        candidate, accepted = _propose(params, x, rng)
        if proposals is not None:
            proposals.append(TssProposal(t, candidate, accepted))
        if accepted:
            jumps.append((t, candidate))
            x = candidate


def tss_marginal(params: EcologyParams, x0, t: float, reps: int, rng) -> list[Trait]:
    """Monte Carlo sample of the trait marginal at time t (t = 0 allowed)."""
    if reps < 1:
        raise ValueError("reps must be positive")
    x0 = params.space.require(x0)
    if t == 0.0:
        return [x0] * reps
    out = []
    for _ in range(reps):
        path = simulate_tss(params, x0, t, rng, record_proposals=False)
        out.append(path.terminal)
    return out
