"""Seeded factor-return simulations.

Random numbers come from numpy's PCG64 bit generator. Uniforms are
``Generator.random`` doubles on [0, 1); normals are produced by the
Box-Muller transform on those uniforms, two per pair of uniforms, cosine
branch first. Draw order within one dataset is: every value of the first
factor, then the second, then the third, then the noise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .exceptions import ValidationError

EXPERIMENTS = ("linear3", "nonlinear3", "twofactor")
STYLE_FACTORS = ("Size", "Value", "Momentum")
TWO_FACTORS = ("Factor1", "Factor2")
LINEAR_COEFFICIENTS = (0.1, 0.2, 0.3)


class RngState:
    """PCG64 stream with Box-Muller normals.

    An odd-length normal draw leaves the sine half of its last pair pending;
    the next normal draw starts with it.
    """

    algorithm = "PCG64"

    def __init__(self, seed=0):
        if not 0 <= int(seed) < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._spare = None

    def uniform(self, n):
        return self._gen.random(n)

    def normal(self, n, loc=0.0, scale=1.0):
        out = np.empty(n)
        k = 0
        if n and self._spare is not None:
            out[0] = self._spare
            self._spare = None
            k = 1
        pairs = (n - k + 1) // 2
        if pairs:
            u = self._gen.random(2 * pairs)
            radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
            angle = 2.0 * math.pi * u[1::2]
            z = np.empty(2 * pairs)
            z[0::2] = radius * np.cos(angle)
            z[1::2] = radius * np.sin(angle)
            out[k:] = z[: n - k]
            if 2 * pairs > n - k:
                self._spare = float(z[-1])
        return loc + scale * out

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size=size)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "linear3"
    n: int = 1000
    noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        if self.n < 10:
            raise ValidationError(f"n must be >= 10, got {self.n}")
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise ValidationError(f"noise_sd must be a finite value >= 0, got {self.noise_sd}")
        RngState(self.seed)

    def as_dict(self):
        return asdict(self)


def _expect(spec, name):
    if spec.name != name:
        raise ValidationError(f"expected a {name!r} spec, got {spec.name!r}")


def _style_factors(rng, n):
    return [rng.normal(n) for _ in STYLE_FACTORS]


def linear3_returns(size, value, momentum, noise):
    return 0.1 * size + 0.2 * value + 0.3 * momentum + noise


def nonlinear3_returns(size, value, momentum, noise):
    return (0.1 * size + 0.2 * value + 0.3 * momentum
            + 0.4 * size**2 + 0.5 * value**2 + 0.6 * momentum**2
            + 0.7 * size * value + noise)


def twofactor_returns(f1, f2, noise):
    return 3 * f1**2 + 5 * np.exp(f2) + 2 * f1 * f2 + noise


def generate_linear3(spec):
    _expect(spec, "linear3")
    rng = RngState(spec.seed)
    factors = _style_factors(rng, spec.n)
    noise = rng.normal(spec.n, scale=spec.noise_sd)
    return Dataset(np.column_stack(factors), linear3_returns(*factors, noise),
                   STYLE_FACTORS, "Return")


def generate_nonlinear3(spec):
    """Quadratic and Size-Value interaction returns.

    The factors are the same draws ``generate_linear3`` makes under the same
    seed; the linear noise is drawn and skipped, and fresh noise follows, as
    when both datasets come from one sequential stream.
    """
    _expect(spec, "nonlinear3")
    rng = RngState(spec.seed)
    factors = _style_factors(rng, spec.n)
    rng.normal(spec.n)
    noise = rng.normal(spec.n, scale=spec.noise_sd)
    return Dataset(np.column_stack(factors), nonlinear3_returns(*factors, noise),
                   STYLE_FACTORS, "Return")


def generate_twofactor(spec):
    _expect(spec, "twofactor")
    rng = RngState(spec.seed)
    f1 = rng.uniform(spec.n)
    f2 = rng.uniform(spec.n)
    noise = rng.normal(spec.n, scale=spec.noise_sd)
    return Dataset(np.column_stack([f1, f2]), twofactor_returns(f1, f2, noise),
                   TWO_FACTORS, "Return")


GENERATORS = {
    "linear3": generate_linear3,
    "nonlinear3": generate_nonlinear3,
    "twofactor": generate_twofactor,
}


def generate(spec):
    return GENERATORS[spec.name](spec)
