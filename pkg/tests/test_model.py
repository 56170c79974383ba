"""Tests for the trait space, parameter catalog and derived quantities."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from tssim.model import (
    BilinearKernel,
    ConstantFn,
    ConstantKernel,
    DegenerateParameterError,
    EcologyParams,
    GaussianBumpFn,
    GaussianKernel,
    GaussianMutationKernel,
    InvasionOutcome,
    LinearFn,
    TraitDomainError,
    TraitSpace,
    classify_pair,
    equilibrium_density,
    invasion_fitness,
    mutation_rate_beta,
    validate_assumptions,
)

BOX = TraitSpace((0.0,), (1.0,))


def constant_params(b=2.0, d=1.0, alpha=1.0, mu=0.1, sigma=0.05):
    return EcologyParams(
        space=BOX,
        birth=ConstantFn(b),
        death=ConstantFn(d),
        competition=ConstantKernel(alpha),
        mutation_prob=ConstantFn(mu),
        mutation_kernel=GaussianMutationKernel(sigma),
    )


def default_like_params():
    """The shipped default scenario: directional selection on [0, 1]."""
    return EcologyParams(
        space=BOX,
        birth=LinearFn(2.0, (1.0,)),
        death=ConstantFn(1.0),
        competition=BilinearKernel(1.0, (0.5,), (-0.5,), clip_lo=0.25, clip_hi=4.0),
        mutation_prob=ConstantFn(0.1),
        mutation_kernel=GaussianMutationKernel(0.05),
    )


class TestTraitSpace:
    def test_membership_is_exact_on_closed_box(self):
        assert BOX.contains((0.0,))
        assert BOX.contains((1.0,))
        assert not BOX.contains((1.0 + 1e-16,)) or (1.0 + 1e-16) == 1.0
        assert not BOX.contains((-1e-300,))

    def test_dimension_mismatch_rejected(self):
        assert not BOX.contains((0.5, 0.5))

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            TraitSpace((0.0,), (0.0,))

    def test_grid_covers_corners(self):
        g = BOX.grid(5)
        assert g[0] == (0.0,) and g[-1] == (1.0,)
        assert len(g) == 5


class TestEquilibriumDensity:
    def test_direct_formula(self):
        assert equilibrium_density(constant_params(2, 1, 1), (0.3,)) == 1.0
        assert equilibrium_density(constant_params(3, 1, 4), (0.3,)) == 0.5

    def test_b_equals_d_is_degenerate(self):
        with pytest.raises(DegenerateParameterError):
            equilibrium_density(constant_params(b=1.0, d=1.0), (0.5,))

    def test_zero_alpha_is_degenerate(self):
        with pytest.raises(DegenerateParameterError):
            equilibrium_density(constant_params(alpha=0.0), (0.5,))

    def test_outside_box_is_domain_error(self):
        with pytest.raises(TraitDomainError):
            equilibrium_density(constant_params(), (2.0,))


class TestMutationRateBeta:
    def test_direct_formula(self):
        assert mutation_rate_beta(constant_params(b=2, d=1, alpha=1, mu=0.5), (0.1,)) == 1.0
        assert mutation_rate_beta(constant_params(b=2, d=1, alpha=2, mu=0.1), (0.1,)) == pytest.approx(0.1)

    def test_zero_mutation_probability(self):
        assert mutation_rate_beta(constant_params(mu=0.0), (0.1,)) == 0.0


class TestInvasionFitness:
    def test_neutrality_identity(self):
        params = default_like_params()
        rng = np.random.default_rng(7)
        for _ in range(1000):
            x = params.space.sample(rng)
            assert abs(invasion_fitness(params, x, x)) <= 1e-12

    def test_direct_values(self):
        # resident at equilibrium density 1, mutant with b=3, d=1, alpha=1
        params = EcologyParams(
            space=BOX,
            birth=LinearFn(1.5, (2.0,)),  # b(0.25)=2, b(0.75)=3
            death=ConstantFn(1.0),
            competition=ConstantKernel(1.0),
            mutation_prob=ConstantFn(0.1),
            mutation_kernel=GaussianMutationKernel(0.05),
        )
        assert invasion_fitness(params, (0.75,), (0.25,)) == pytest.approx(1.0)

    def test_negative_fitness(self):
        params = EcologyParams(
            space=BOX,
            birth=LinearFn(2.0, (-1.0,)),  # b(0)=2 resident, b(0.5)=1.5 mutant
            death=ConstantFn(1.0),
            competition=ConstantKernel(1.0),
            mutation_prob=ConstantFn(0.1),
            mutation_kernel=GaussianMutationKernel(0.05),
        )
        assert invasion_fitness(params, (0.5,), (0.0,)) == pytest.approx(-0.5)


class TestClassifyPair:
    def test_sign_table(self):
        params = default_like_params()
        # default scenario: f(y, x) = 0.5 (y - x) (1 - x), directional toward 1
        res = classify_pair(params, (0.5,), (0.7,))
        assert res.outcome is InvasionOutcome.MUTANT_INVADES
        assert res.fitness_mutant > 0 and res.fitness_resident < 0
        res = classify_pair(params, (0.5,), (0.3,))
        assert res.outcome is InvasionOutcome.RESIDENT_STABLE
        assert res.fitness_mutant < 0

    def test_neutral_pair_degenerate(self):
        params = constant_params()
        res = classify_pair(params, (0.2,), (0.8,))
        assert res.outcome is InvasionOutcome.DEGENERATE

    def test_invasion_implies_reverse_stability(self):
        # (x, y) mutant-invades forces f(x, y) < 0, i.e. (y, x) resident-stable
        params = default_like_params()
        rng = np.random.default_rng(11)
        seen = 0
        for _ in range(200):
            x, y = params.space.sample(rng), params.space.sample(rng)
            res = classify_pair(params, x, y)
            if res.outcome is InvasionOutcome.MUTANT_INVADES:
                seen += 1
                rev = classify_pair(params, y, x)
                assert rev.outcome is InvasionOutcome.RESIDENT_STABLE
        assert seen > 10


class TestValidateAssumptions:
    def test_constants_pass(self):
        report = validate_assumptions(constant_params(), BOX.grid(21))
        assert report.ok and not report.failures

    def test_growth_violation_is_located(self):
        # d crosses b at x = 0.5; grid points above it must be reported
        params = EcologyParams(
            space=BOX,
            birth=ConstantFn(2.0),
            death=LinearFn(1.0, (2.0,)),  # d(0.5) = 2 = b
            competition=ConstantKernel(1.0),
            mutation_prob=ConstantFn(0.1),
            mutation_kernel=GaussianMutationKernel(0.05),
        )
        report = validate_assumptions(params, BOX.grid(21))
        assert not report.ok
        assert any("0.5" in msg and "growth" in msg for msg in report.failures)

    def test_zero_competition_floor_fails(self):
        params = EcologyParams(
            space=BOX,
            birth=ConstantFn(2.0),
            death=ConstantFn(1.0),
            competition=BilinearKernel(0.0, (1.0,), (0.0,), clip_lo=0.0, clip_hi=4.0),
            mutation_prob=ConstantFn(0.1),
            mutation_kernel=GaussianMutationKernel(0.05),
        )
        report = validate_assumptions(params, BOX.grid(5))
        assert not report.ok
        assert any("not positive" in msg for msg in report.failures)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            validate_assumptions(constant_params(), [])


class TestCatalogBounds:
    """Computed extrema vs dense grid evaluation."""

    def test_linear_bounds(self):
        fn = LinearFn(2.0, (-3.0,))
        lo, hi = fn.bounds(BOX)
        vals = [fn(x) for x in BOX.grid(201)]
        assert lo == pytest.approx(min(vals))
        assert hi == pytest.approx(max(vals))

    def test_gaussian_bump_bounds_center_outside(self):
        fn = GaussianBumpFn(1.0, 2.0, (1.5,), 0.3)
        lo, hi = fn.bounds(BOX)
        vals = [fn(x) for x in BOX.grid(2001)]
        assert lo <= min(vals) + 1e-9 and lo == pytest.approx(min(vals), abs=1e-4)
        assert hi >= max(vals) - 1e-9 and hi == pytest.approx(max(vals), abs=1e-4)

    def test_bilinear_clip_bounds(self):
        k = BilinearKernel(1.0, (0.5,), (-0.5,), clip_lo=0.25, clip_hi=4.0)
        lo, hi = k.bounds(BOX)
        grid = BOX.grid(41)
        vals = [k(x, y) for x in grid for y in grid]
        assert lo == pytest.approx(min(vals))
        assert hi == pytest.approx(max(vals))

    def test_gaussian_kernel_bounds(self):
        k = GaussianKernel(2.0, 0.4)
        lo, hi = k.bounds(BOX)
        grid = BOX.grid(41)
        vals = [k(x, y) for x in grid for y in grid]
        assert lo == pytest.approx(min(vals))
        assert hi == pytest.approx(max(vals))
        assert lo > 0.0


class TestMutationKernel:
    def test_samples_stay_in_box_and_are_dominated(self):
        kernel = GaussianMutationKernel(0.2)
        rng = np.random.default_rng(3)
        for x in [(0.0,), (0.5,), (1.0,)]:
            for _ in range(2000):
                h = kernel.sample(BOX, x, rng)
                y = tuple(a + b for a, b in zip(x, h))
                assert BOX.contains(y)
                ratio = kernel.density(BOX, x, h) / kernel.dominating_density(BOX, h)
                assert ratio <= 1.0 + 1e-12

    def test_large_sample_sweep(self):
        kernel = GaussianMutationKernel(0.1)
        rng = np.random.default_rng(5)
        x = (0.05,)
        hs = [kernel.sample(BOX, x, rng) for _ in range(100_000)]
        assert all(BOX.contains((x[0] + h[0],)) for h in hs)

    def test_density_normalizes_to_one(self):
        kernel = GaussianMutationKernel(0.3)
        for x in [(0.0,), (0.37,), (1.0,)]:
            total, _ = quad(lambda h: kernel.density(BOX, x, (h,)), -x[0], 1.0 - x[0])
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_rejection_budget_error(self):
        # a box the kernel can essentially never land in from its corner
        space = TraitSpace((0.0,), (1e-9,))
        kernel = GaussianMutationKernel(5.0, max_rejects=50)
        rng = np.random.default_rng(1)
        with pytest.raises(Exception):
            for _ in range(200):
                kernel.sample(space, (0.0,), rng)

    def test_normalizer_matches_acceptance_rate(self):
        kernel = GaussianMutationKernel(0.5)
        x = (0.2,)
        z = kernel.normalizer(BOX, x)
        rng = np.random.default_rng(12)
        n, hits = 50_000, 0
        for _ in range(n):
            h = rng.standard_normal(1)
            if BOX.contains((x[0] + 0.5 * h[0],)):
                hits += 1
        se = math.sqrt(z * (1 - z) / n)
        assert abs(hits / n - z) < 4 * se


class TestTwoDimensionalTraits:
    """The machinery is dimension-generic; the default scenarios use l = 1."""

    def test_fitness_and_kernel_in_2d(self):
        space = TraitSpace((0.0, 0.0), (1.0, 2.0))
        params = EcologyParams(
            space=space,
            birth=LinearFn(2.0, (1.0, 0.5)),
            death=ConstantFn(1.0),
            competition=GaussianKernel(2.0, 1.5),
            mutation_prob=ConstantFn(0.2),
            mutation_kernel=GaussianMutationKernel(0.1),
        )
        report = validate_assumptions(params, space.grid(5))
        assert report.ok, report.failures
        rng = np.random.default_rng(8)
        for _ in range(200):
            x = space.sample(rng)
            assert abs(invasion_fitness(params, x, x)) <= 1e-12
            h = params.mutation_kernel.sample(space, x, rng)
            assert space.contains(tuple(a + b for a, b in zip(x, h)))
        y = (0.5, 1.0)
        x = (0.1, 0.2)
        assert classify_pair(params, x, y).outcome is not None


class TestConfigRoundTrip:
    def test_params_config_round_trip(self):
        params = default_like_params()
        clone = EcologyParams.from_config(params.to_config())
        rng = np.random.default_rng(2)
        for _ in range(50):
            x, y = params.space.sample(rng), params.space.sample(rng)
            assert clone.birth(x) == params.birth(x)
            assert clone.competition(x, y) == params.competition(x, y)
        assert clone.b_max == params.b_max
        assert clone.alpha_min == params.alpha_min
