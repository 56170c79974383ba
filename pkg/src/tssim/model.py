"""Trait space, ecological rate functions and the quantities derived from them.

Everything else in the package consumes this module: the box-shaped trait
space, a closed catalog of parametric forms for the birth rate b, natural
death rate d, competition kernel alpha and per-birth mutation probability mu,
a truncated Gaussian mutation kernel, and the derived quantities

    equilibrium density   n_bar(x) = (b(x) - d(x)) / alpha(x, x)
    mutation rate         beta(x)  = mu(x) * b(x) * n_bar(x)
    invasion fitness      f(y, x)  = b(y) - d(y) - alpha(y, x) * n_bar(x)

The parametric forms compute their own extrema over the trait box, so rate
bounds are derived from the catalog rather than declared by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

Trait = tuple[float, ...]


class TraitDomainError(ValueError):
    """A trait lies outside the trait space."""


class DegenerateParameterError(ValueError):
    """A parameter combination makes the requested quantity undefined."""


class MutationSamplingError(RuntimeError):
    """Rejection sampling of a mutant step exhausted its attempt budget."""


def as_trait(x) -> Trait:
    """Canonicalize a scalar or sequence of coordinates to a trait tuple."""
    if isinstance(x, tuple) and all(isinstance(c, float) for c in x):
        return x
    if isinstance(x, (int, float)):
        return (float(x),)
    return tuple(float(c) for c in x)


@dataclass(frozen=True)
class TraitSpace:
    """Axis-aligned box of admissible trait values, with exact membership."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("lower/upper must be non-empty and equal length")
        for lo, hi in zip(self.lower, self.upper):
            if not (lo < hi):
                raise ValueError(f"degenerate box: [{lo}, {hi}]")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, x: Trait) -> bool:
        if len(x) != self.dimension:
            return False
        return all(lo <= c <= hi for c, lo, hi in zip(x, self.lower, self.upper))

    def require(self, x) -> Trait:
        x = as_trait(x)
        if not self.contains(x):
            raise TraitDomainError(f"trait {x} outside box {self.lower}..{self.upper}")
        return x

    def grid(self, per_dim: int) -> list[Trait]:
        """Regular mesh with per_dim points per coordinate, corners included."""
        axes = []
        for lo, hi in zip(self.lower, self.upper):
            step = (hi - lo) / (per_dim - 1)
            axes.append([lo + i * step for i in range(per_dim - 1)] + [hi])
        pts = [()]
        for ax in axes:
            pts = [p + (v,) for p in pts for v in ax]
        return pts

    def sample(self, rng) -> Trait:
        return tuple(
            lo + rng.random() * (hi - lo) for lo, hi in zip(self.lower, self.upper)
        )

    def to_config(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_config(cls, cfg: dict) -> "TraitSpace":
        return cls(tuple(cfg["lower"]), tuple(cfg["upper"]))


# ---------------------------------------------------------------------------
# Catalog of trait functions (rates over X)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantFn:
    """Constant rate over the whole trait space."""

    value: float

    def __call__(self, x: Trait) -> float:
        return self.value

    def bounds(self, space: TraitSpace) -> tuple[float, float]:
        return (self.value, self.value)

    def to_config(self) -> dict:
        return {"form": "constant", "value": self.value}


@dataclass(frozen=True)
class LinearFn:
    """Affine rate: intercept + sum_i slope_i * x_i."""

    intercept: float
    slope: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "slope", tuple(float(s) for s in self.slope))

    def __call__(self, x: Trait) -> float:
        return self.intercept + sum(s * c for s, c in zip(self.slope, x))

    def bounds(self, space: TraitSpace) -> tuple[float, float]:
        lo = hi = self.intercept
        for s, a, b in zip(self.slope, space.lower, space.upper):
            lo += min(s * a, s * b)
            hi += max(s * a, s * b)
        return (lo, hi)

    def to_config(self) -> dict:
        return {"form": "linear", "intercept": self.intercept, "slope": list(self.slope)}


@dataclass(frozen=True)
class GaussianBumpFn:
    """base + amplitude * exp(-|x - center|^2 / (2 width^2)), amplitude >= 0."""

    base: float
    amplitude: float
    center: tuple[float, ...]
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.width <= 0:
            raise ValueError("width must be positive")

    def __call__(self, x: Trait) -> float:
        d2 = sum((c - m) ** 2 for c, m in zip(x, self.center))
        return self.base + self.amplitude * math.exp(-d2 / (2.0 * self.width**2))

    def bounds(self, space: TraitSpace) -> tuple[float, float]:
        near2 = far2 = 0.0
        for m, lo, hi in zip(self.center, space.lower, space.upper):
            near = max(lo - m, 0.0, m - hi)
            far = max(m - lo, hi - m)
            near2 += near * near
            far2 += far * far
        w2 = 2.0 * self.width**2
        return (
            self.base + self.amplitude * math.exp(-far2 / w2),
            self.base + self.amplitude * math.exp(-near2 / w2),
        )

    def to_config(self) -> dict:
        return {
            "form": "gaussian-bump",
            "base": self.base,
            "amplitude": self.amplitude,
            "center": list(self.center),
            "width": self.width,
        }


# ---------------------------------------------------------------------------
# Catalog of pair kernels (competition over X x X)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantKernel:
    value: float

    def __call__(self, x: Trait, y: Trait) -> float:
        return self.value

    def bounds(self, space: TraitSpace) -> tuple[float, float]:
        return (self.value, self.value)

    def to_config(self) -> dict:
        return {"form": "constant", "value": self.value}


@dataclass(frozen=True)
class BilinearKernel:
    """intercept + coef_x . x + coef_y . y, optionally clipped to [clip_lo, clip_hi]."""

    intercept: float
    coef_x: tuple[float, ...]
    coef_y: tuple[float, ...]
    clip_lo: float | None = None
    clip_hi: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "coef_x", tuple(float(s) for s in self.coef_x))
        object.__setattr__(self, "coef_y", tuple(float(s) for s in self.coef_y))

    def __call__(self, x: Trait, y: Trait) -> float:
        v = self.intercept
        v += sum(s * c for s, c in zip(self.coef_x, x))
        v += sum(s * c for s, c in zip(self.coef_y, y))
        if self.clip_lo is not None and v < self.clip_lo:
            return self.clip_lo
        if self.clip_hi is not None and v > self.clip_hi:
            return self.clip_hi
        return v

    def bounds(self, space: TraitSpace) -> tuple[float, float]:
        lo = hi = self.intercept
        for coefs in (self.coef_x, self.coef_y):
            for s, a, b in zip(coefs, space.lower, space.upper):
                lo += min(s * a, s * b)
                hi += max(s * a, s * b)
        if self.clip_lo is not None:
            lo = max(lo, self.clip_lo)
            hi = max(hi, self.clip_lo)
        if self.clip_hi is not None:
            lo = min(lo, self.clip_hi)
            hi = min(hi, self.clip_hi)
        return (lo, hi)

    def to_config(self) -> dict:
        cfg = {
            "form": "bilinear",
            "intercept": self.intercept,
            "coef_x": list(self.coef_x),
            "coef_y": list(self.coef_y),
        }
        if self.clip_lo is not None:
            cfg["clip_lo"] = self.clip_lo
        if self.clip_hi is not None:
            cfg["clip_hi"] = self.clip_hi
        return cfg


@dataclass(frozen=True)
class GaussianKernel:
    """amplitude * exp(-|x - y|^2 / (2 width^2)); strictly positive on a box."""

    amplitude: float
    width: float

    def __call__(self, x: Trait, y: Trait) -> float:
        d2 = sum((a - b) ** 2 for a, b in zip(x, y))
        return self.amplitude * math.exp(-d2 / (2.0 * self.width**2))

    def bounds(self, space: TraitSpace) -> tuple[float, float]:
        diam2 = sum((hi - lo) ** 2 for lo, hi in zip(space.lower, space.upper))
        return (self.amplitude * math.exp(-diam2 / (2.0 * self.width**2)), self.amplitude)

    def to_config(self) -> dict:
        return {"form": "gaussian", "amplitude": self.amplitude, "width": self.width}


_TRAIT_FORMS = {"constant": ConstantFn, "linear": LinearFn, "gaussian-bump": GaussianBumpFn}
_PAIR_FORMS = {"constant": ConstantKernel, "bilinear": BilinearKernel, "gaussian": GaussianKernel}


def trait_fn_from_config(cfg: dict):
    kind = cfg.get("form")
    if kind not in _TRAIT_FORMS:
        raise ValueError(f"unknown trait-function form: {kind!r}")
    kwargs = {k: v for k, v in cfg.items() if k != "form"}
    if "slope" in kwargs:
        kwargs["slope"] = tuple(kwargs["slope"])
    if "center" in kwargs:
        kwargs["center"] = tuple(kwargs["center"])
    return _TRAIT_FORMS[kind](**kwargs)


def pair_fn_from_config(cfg: dict):
    kind = cfg.get("form")
    if kind not in _PAIR_FORMS:
        raise ValueError(f"unknown pair-kernel form: {kind!r}")
    kwargs = {k: v for k, v in cfg.items() if k != "form"}
    for key in ("coef_x", "coef_y"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return _PAIR_FORMS[kind](**kwargs)


# ---------------------------------------------------------------------------
# Mutation kernel
# ---------------------------------------------------------------------------

def _phi(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass(frozen=True)
class GaussianMutationKernel:
    """Isotropic Gaussian mutant step, truncated to the box by rejection.

    The step h has untruncated density phi_sigma(h) (product of per-coordinate
    normals with standard deviation `scale`). Truncation keeps x + h inside the
    trait space, so the realized density is

        m(x, h) = phi_sigma(h) / Z(x),   Z(x) = integral of phi_sigma over X - x,

    and m(x, h) <= m_bar(h) := phi_sigma(h) / Z_min, where Z_min is the minimum
    of Z over the box (attained at a corner). m_bar is integrable, as required
    of a dominating density.
    """

    scale: float
    max_rejects: int = 1000

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def sample(self, space: TraitSpace, x: Trait, rng) -> Trait:
        """Draw h with x + h in the box; raises after max_rejects failures."""
        dim = space.dimension
        for _ in range(self.max_rejects):
            h = rng.standard_normal(dim)
            y = tuple(c + self.scale * v for c, v in zip(x, h))
            if space.contains(y):
                return tuple(b - a for a, b in zip(x, y))
        raise MutationSamplingError(
            f"no admissible mutant from {x} in {self.max_rejects} attempts"
        )

    def _untruncated_density(self, h: Trait) -> float:
        s = self.scale
        norm = (math.sqrt(2.0 * math.pi) * s) ** len(h)
        return math.exp(-sum(c * c for c in h) / (2.0 * s * s)) / norm

    def normalizer(self, space: TraitSpace, x: Trait) -> float:
        """Gaussian mass of X - x: the acceptance probability of one proposal."""
        z = 1.0
        for c, lo, hi in zip(x, space.lower, space.upper):
            z *= _phi((hi - c) / self.scale) - _phi((lo - c) / self.scale)
        return z

    def min_normalizer(self, space: TraitSpace) -> float:
        # The sliding-window Gaussian mass is minimized with x at a corner.
        z = 1.0
        for lo, hi in zip(space.lower, space.upper):
            z *= _phi((hi - lo) / self.scale) - 0.5
        return z

    def density(self, space: TraitSpace, x: Trait, h: Trait) -> float:
        """Truncated, normalized density m(x, h)."""
        y = tuple(a + b for a, b in zip(x, h))
        if not space.contains(y):
            return 0.0
        return self._untruncated_density(h) / self.normalizer(space, x)

    def dominating_density(self, space: TraitSpace, h: Trait) -> float:
        return self._untruncated_density(h) / self.min_normalizer(space)

    def to_config(self) -> dict:
        return {"family": "gaussian", "scale": self.scale, "max_rejects": self.max_rejects}

    @classmethod
    def from_config(cls, cfg: dict) -> "GaussianMutationKernel":
        if cfg.get("family", "gaussian") != "gaussian":
            raise ValueError(f"unknown mutation kernel family: {cfg.get('family')!r}")
        return cls(scale=float(cfg["scale"]), max_rejects=int(cfg.get("max_rejects", 1000)))


# ---------------------------------------------------------------------------
# Full ecological parameter set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EcologyParams:
    """Rates of the individual-based process plus their computed box extrema.

    Immutable after construction; instances are safe to share across
    concurrent replicate workers.
    """

    space: TraitSpace
    birth: object
    death: object
    competition: object
    mutation_prob: object
    mutation_kernel: GaussianMutationKernel
    b_max: float = field(init=False)
    d_max: float = field(init=False)
    alpha_min: float = field(init=False)
    alpha_max: float = field(init=False)

    def __post_init__(self):
        b_lo, b_hi = self.birth.bounds(self.space)
        _, d_hi = self.death.bounds(self.space)
        a_lo, a_hi = self.competition.bounds(self.space)
        object.__setattr__(self, "b_max", b_hi)
        object.__setattr__(self, "d_max", d_hi)
        object.__setattr__(self, "alpha_min", a_lo)
        object.__setattr__(self, "alpha_max", a_hi)

    def to_config(self) -> dict:
        return {
            "trait_space": self.space.to_config(),
            "birth": self.birth.to_config(),
            "death": self.death.to_config(),
            "competition": self.competition.to_config(),
            "mutation_prob": self.mutation_prob.to_config(),
            "mutation_kernel": self.mutation_kernel.to_config(),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "EcologyParams":
        return cls(
            space=TraitSpace.from_config(cfg["trait_space"]),
            birth=trait_fn_from_config(cfg["birth"]),
            death=trait_fn_from_config(cfg["death"]),
            competition=pair_fn_from_config(cfg["competition"]),
            mutation_prob=trait_fn_from_config(cfg["mutation_prob"]),
            mutation_kernel=GaussianMutationKernel.from_config(cfg["mutation_kernel"]),
        )


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------

def equilibrium_density(params: EcologyParams, x) -> float:
    """Stable fixed point (b - d) / alpha(x, x) of the one-trait logistic flow."""
    x = params.space.require(x)
    a = params.competition(x, x)
    if a == 0.0:
        raise DegenerateParameterError(f"alpha(x, x) = 0 at {x}")
    n = (params.birth(x) - params.death(x)) / a
    if n <= 0.0:
        raise DegenerateParameterError(
            f"b - d = {params.birth(x) - params.death(x)} at {x}: no positive equilibrium"
        )
    return n


def mutation_rate_beta(params: EcologyParams, x) -> float:
    """Rate of mutant proposals in an equilibrium population with trait x."""
    x = params.space.require(x)
    return params.mutation_prob(x) * params.birth(x) * equilibrium_density(params, x)


def invasion_fitness(params: EcologyParams, y, x) -> float:
    """Initial growth rate of a rare y-mutant against an equilibrium x-resident.

    Always computed through the defining formula, with the equilibrium density
    of x itself, so the neutrality identity f(x, x) = 0 holds to rounding.
    """
    y = params.space.require(y)
    x = params.space.require(x)
    return params.birth(y) - params.death(y) - params.competition(y, x) * equilibrium_density(params, x)


class InvasionOutcome(Enum):
    RESIDENT_STABLE = "resident-stable"
    MUTANT_INVADES = "mutant-invades"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class InvasionClassification:
    outcome: InvasionOutcome
    fitness_mutant: float   # f(y, x)
    fitness_resident: float  # f(x, y)


def classify_pair(params: EcologyParams, x, y) -> InvasionClassification:
    """Sign-classify the resident/mutant pair (x resident, y mutant).

    resident-stable  iff f(y, x) < 0;
    mutant-invades   iff f(y, x) > 0 and f(x, y) < 0;
    degenerate otherwise (neutral or mutually invasible pair).
    """
    fyx = invasion_fitness(params, y, x)
    fxy = invasion_fitness(params, x, y)
    if fyx < 0.0:
        out = InvasionOutcome.RESIDENT_STABLE
    elif fyx > 0.0 and fxy < 0.0:
        out = InvasionOutcome.MUTANT_INVADES
    else:
        out = InvasionOutcome.DEGENERATE
    return InvasionClassification(out, fyx, fxy)


@dataclass
class AssumptionReport:
    ok: bool
    failures: list[str]
    checked_points: int


def validate_assumptions(params: EcologyParams, grid: Sequence) -> AssumptionReport:
    """Check rate bounds, positivity and mutation-probability sanity on a grid.

    Violations are collected in the report, never raised.
    """
    pts = [params.space.require(p) for p in grid]
    if not pts:
        raise ValueError("empty validation grid")
    failures: list[str] = []
    tol = 1e-12
    if params.alpha_min <= 0.0:
        failures.append(f"competition lower bound {params.alpha_min} is not positive")
    for x in pts:
        b, d, mu = params.birth(x), params.death(x), params.mutation_prob(x)
        if b < 0.0 or b > params.b_max + tol:
            failures.append(f"b({x}) = {b} outside [0, {params.b_max}]")
        if d < 0.0 or d > params.d_max + tol:
            failures.append(f"d({x}) = {d} outside [0, {params.d_max}]")
        if b - d <= 0.0:
            failures.append(f"b - d = {b - d} at {x}: growth rate not positive")
        if not (0.0 < mu <= 1.0):
            failures.append(f"mu({x}) = {mu} outside (0, 1]")
    for x in pts:
        for y in pts:
            a = params.competition(x, y)
            if a < params.alpha_min - tol or a > params.alpha_max + tol:
                failures.append(
                    f"alpha({x}, {y}) = {a} outside [{params.alpha_min}, {params.alpha_max}]"
                )
    return AssumptionReport(ok=not failures, failures=failures, checked_points=len(pts))
