"""Tests for the trait-substitution jump process."""

import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.stats import kstest

from tssim.model import (
    BilinearKernel,
    ConstantFn,
    ConstantKernel,
    EcologyParams,
    GaussianBumpFn,
    GaussianMutationKernel,
    LinearFn,
    TraitSpace,
    invasion_fitness,
    mutation_rate_beta,
)
from tssim.tss import TssPath, sample_jump_kernel, simulate_tss, tss_marginal

BOX = TraitSpace((0.0,), (1.0,))


def ess_params():
    """Birth peaked at 0.5 with flat competition: no mutant can invade 0.5."""
    return EcologyParams(
        space=BOX,
        birth=GaussianBumpFn(2.0, 1.0, (0.5,), 0.2),
        death=ConstantFn(1.0),
        competition=ConstantKernel(1.0),
        mutation_prob=ConstantFn(0.5),
        mutation_kernel=GaussianMutationKernel(0.1),
    )


def directional_params(mu=0.5, sigma=0.25):
    """Equilibrium density 1 everywhere, fitness 2.5 (y - x): selection up."""
    return EcologyParams(
        space=BOX,
        birth=LinearFn(2.0, (5.0,)),
        death=ConstantFn(1.0),
        competition=BilinearKernel(1.0, (2.5,), (2.5,)),
        mutation_prob=ConstantFn(mu),
        mutation_kernel=GaussianMutationKernel(sigma),
    )


def acceptance_integral(params, x):
    """Quadrature oracle for the kernel's non-atom mass from x."""
    lo = params.space.lower[0] - x[0]
    hi = params.space.upper[0] - x[0]

    def integrand(h):
        y = (x[0] + h,)
        f = invasion_fitness(params, y, x)
        if f <= 0.0:
            return 0.0
        return f / params.birth(y) * params.mutation_kernel.density(params.space, x, (h,))

    total = 0.0
    for a, b in ((lo, 0.0), (0.0, hi)):
        val, _ = quad(integrand, a, b, limit=200)
        total += val
    return total


class TestJumpKernel:
    def test_ess_always_stays_put(self):
        params = ess_params()
        rng = np.random.default_rng(0)
        x = (0.5,)
        for _ in range(2000):
            assert sample_jump_kernel(params, x, rng) == x

    def test_acceptance_ratio_never_exceeds_one(self):
        params = directional_params()
        rng = np.random.default_rng(1)
        x = (0.1,)
        for _ in range(5000):
            y = sample_jump_kernel(params, x, rng)
            if y != x:
                f = invasion_fitness(params, y, x)
                assert 0.0 < f / params.birth(y) <= 1.0

    def test_acceptance_frequency_matches_quadrature(self):
        params = directional_params()
        x = (0.3,)
        target = acceptance_integral(params, x)
        rng = np.random.default_rng(42)
        n = 20_000
        hits = sum(sample_jump_kernel(params, x, rng) != x for _ in range(n))
        sigma = math.sqrt(target * (1.0 - target) / n)
        assert abs(hits / n - target) < 3.0 * sigma, (hits / n, target)


class TestSimulateTss:
    def test_constant_path_under_ess(self):
        params = ess_params()
        path = simulate_tss(params, (0.5,), t_end=20.0, rng=np.random.default_rng(3))
        assert path.jumps == []
        assert path.proposals  # clocks fired, every proposal rejected
        assert all(not p.accepted for p in path.proposals)
        assert path.terminal == (0.5,)

    def test_every_jump_increases_fitness_and_moves_up(self):
        params = directional_params()
        rng = np.random.default_rng(7)
        jumps_seen = 0
        for _ in range(100):
            path = simulate_tss(params, (0.2,), t_end=6.0, rng=rng)
            prev = (0.2,)
            for _, trait in path.jumps:
                assert invasion_fitness(params, trait, prev) > 0.0
                assert trait[0] > prev[0]  # linear fitness: only upward moves
                prev = trait
                jumps_seen += 1
        assert jumps_seen > 20

    def test_jump_times_strictly_increasing_consecutive_traits_distinct(self):
        params = directional_params()
        path = simulate_tss(params, (0.1,), t_end=10.0, rng=np.random.default_rng(11))
        times = [t for t, _ in path.jumps]
        assert all(b > a for a, b in zip(times, times[1:]))
        traits = [(0.1,)] + [tr for _, tr in path.jumps]
        assert all(b != a for a, b in zip(traits, traits[1:]))

    def test_proposal_interarrivals_are_exponential(self):
        # under the ESS the trait never moves, so every clock has rate beta(x0)
        params = ess_params()
        beta = mutation_rate_beta(params, (0.5,))
        rng = np.random.default_rng(13)
        arrivals = []
        while len(arrivals) < 4000:
            path = simulate_tss(params, (0.5,), t_end=50.0, rng=rng)
            ts = [p.time for p in path.proposals]
            arrivals.extend(np.diff([0.0] + ts))
        assert kstest(arrivals, "expon", args=(0, 1.0 / beta)).pvalue > 0.01

    def test_zero_proposal_probability(self):
        params = ess_params()
        x = (0.5,)
        beta = mutation_rate_beta(params, x)
        t_end = 0.4
        target = math.exp(-beta * t_end)
        rng = np.random.default_rng(17)
        n = 10_000
        none_seen = sum(
            not simulate_tss(params, x, t_end, rng, record_proposals=True).proposals
            for _ in range(n)
        )
        sigma = math.sqrt(target * (1.0 - target) / n)
        assert abs(none_seen / n - target) < 3.0 * sigma

    def test_path_lookup(self):
        path = TssPath(initial=(0.0,), jumps=[(1.0, (0.3,)), (2.0, (0.6,))],
                       proposals=None, t_end=3.0)
        assert path.trait_at(0.5) == (0.0,)
        assert path.trait_at(1.5) == (0.3,)
        assert path.trait_at(2.5) == (0.6,)

    def test_csv_export(self, tmp_path):
        params = directional_params()
        path = simulate_tss(params, (0.2,), t_end=5.0, rng=np.random.default_rng(19))
        out = tmp_path / "tss.csv"
        path.to_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "jump_time,trait_0"
        assert len(lines) == 2 + len(path.jumps)


class TestMarginal:
    def test_t_zero_is_point_mass(self):
        params = directional_params()
        out = tss_marginal(params, (0.4,), t=0.0, reps=50, rng=np.random.default_rng(0))
        assert out == [(0.4,)] * 50

    def test_marginal_against_discretized_jump_chain(self):
        """Independent oracle: master equation of the jump chain on a fine grid."""
        params = directional_params(mu=1.0, sigma=0.3)
        x0, t = (0.3,), 1.0
        n_fine = 400
        width = 1.0 / n_fine
        centers = np.array([(i + 0.5) * width for i in range(n_fine)])

        beta = np.array([mutation_rate_beta(params, (c,)) for c in centers])
        dens = np.zeros((n_fine, n_fine))
        acc = np.zeros((n_fine, n_fine))
        for i, c in enumerate(centers):
            for j, y in enumerate(centers):
                if i == j:
                    continue
                m = params.mutation_kernel.density(BOX, (c,), (y - c,))
                if m == 0.0:
                    continue
                f = invasion_fitness(params, (y,), (c,))
                if f <= 0.0:
                    continue
                dens[i, j] = m
                acc[i, j] = f / params.birth((y,))
        rate = beta[:, None] * acc * dens * width
        np.fill_diagonal(rate, 0.0)
        np.fill_diagonal(rate, -rate.sum(axis=1))
        i0 = int(x0[0] / width)
        law = expm(rate * t)[i0]
        law = np.maximum(law, 0.0)
        law /= law.sum()

        # coarse bins (width 0.02) for the comparison
        coarse = law.reshape(50, -1).sum(axis=1)
        reps = 4000
        sample = tss_marginal(params, x0, t, reps, np.random.default_rng(23))
        counts = np.zeros(50)
        for trait in sample:
            counts[min(int(trait[0] / 0.02), 49)] += 1
        tv = 0.5 * np.abs(counts / reps - coarse).sum()
        assert tv < 0.05, tv
