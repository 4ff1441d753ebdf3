"""Normal-approximation primitives for sequential significance testing.

Everything here is pure and stateless: the standard normal CDF and its
inverse, two-sided p-value/Z-score conversions, the required-Z curves that
describe how finely a Type I budget is sliced, sample-size ratios, and the
always-valid (continuous monitoring) comparator bound.

The two-sided convention is used throughout: a Z score z corresponds to the
p-value ``2 * (1 - cdf(z))`` and a p-value p to ``quantile(1 - p/2)``.
One-sided conversions are deliberately not offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "SignificancePoint",
    "AlwaysValidParams",
    "EffectModel",
    "std_normal_cdf",
    "std_normal_quantile",
    "z_from_p_two_sided",
    "p_from_z_two_sided",
    "required_z_uniform",
    "required_z_by_rate",
    "sample_size_ratio",
    "always_valid_z",
    "always_valid_curve",
    "always_valid_min",
    "rho_for_min_at",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SignificancePoint:
    """A two-sided p-value and its Z score, kept mutually consistent.

    ``p == 1`` corresponds to ``z == 0``; smaller p-values map to larger
    scores. Build one with :meth:`from_p` or :meth:`from_z` rather than
    pairing the fields by hand.
    """

    p: float
    z: float

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise DomainError(f"p must be in (0, 1], got {self.p}")
        if not (self.z >= 0.0 and math.isfinite(self.z)):
            raise DomainError(f"z must be finite and nonnegative, got {self.z}")

    @classmethod
    def from_p(cls, p: float) -> "SignificancePoint":
        return cls(p=p, z=z_from_p_two_sided(p))

    @classmethod
    def from_z(cls, z: float) -> "SignificancePoint":
        return cls(p=p_from_z_two_sided(z), z=z)


@dataclass(frozen=True)
class AlwaysValidParams:
    """Inputs to the always-valid comparator bound.

    ``rho`` tunes where (in observation count ``t``) the required Z score is
    minimized; ``alpha`` is the Type I budget.
    """

    rho: float
    alpha: float
    t: int

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise DomainError(f"rho must be positive, got {self.rho}")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.t < 1:
            raise DomainError(f"t must be >= 1, got {self.t}")


@dataclass(frozen=True)
class EffectModel:
    """True mean and standard deviation of the observation distribution."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if not math.isfinite(z):
        raise DomainError(f"z must be finite, got {z}")
    return 0.5 * math.erfc(-z / _SQRT2)


# Wichura's algorithm AS 241 (PPND16): rational approximations for the
# standard normal quantile, accurate to about 1e-15 over (0, 1).
_A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _horner(coeffs, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def std_normal_quantile(p: float) -> float:
    """Inverse standard normal CDF on (0, 1) (Wichura AS 241)."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile argument must be in (0, 1), got {p}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(_A, r) / _horner(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _horner(_C, r) / _horner(_D, r)
    else:
        r -= 5.0
        val = _horner(_E, r) / _horner(_F, r)
    return -val if q < 0.0 else val


def z_from_p_two_sided(p: float) -> float:
    """Z score whose two-sided p-value is ``p``: quantile(1 - p/2)."""
    if not (0.0 < p <= 1.0):
        raise DomainError(f"p must be in (0, 1], got {p}")
    if p == 1.0:
        return 0.0
    # quantile(1 - p/2) == -quantile(p/2); the latter keeps full precision
    # for small p, where 1 - p/2 would round to 1.
    return -std_normal_quantile(p / 2.0)


def p_from_z_two_sided(z: float) -> float:
    """Two-sided p-value of a nonnegative Z score: 2 * (1 - cdf(z))."""
    if not (z >= 0.0 and math.isfinite(z)):
        raise DomainError(f"z must be finite and nonnegative, got {z}")
    # 2 * (1 - cdf(z)) simplifies to erfc(z / sqrt(2)) without cancellation.
    return math.erfc(z / _SQRT2)


def required_z_uniform(alpha: float, dm: int) -> float:
    """Required Z when alpha is split uniformly over ``dm`` slices.

    ``dm`` is the number of (criterion, decision point) pairs a uniform
    partition spreads alpha across; each slice demands p <= alpha / dm.
    """
    _check_alpha(alpha)
    if dm < 1:
        raise DomainError(f"dm must be >= 1, got {dm}")
    return z_from_p_two_sided(alpha / dm)


def required_z_by_rate(alpha: float, u: float) -> float:
    """Required Z when a fraction ``u`` of decision points must be significant.

    Fixing the repetition rate makes the per-point requirement p <= u * alpha,
    independent of how many decision points there are.
    """
    _check_alpha(alpha)
    if not (0.0 < u <= 1.0):
        raise DomainError(f"u must be in (0, 1], got {u}")
    return z_from_p_two_sided(u * alpha)


def sample_size_ratio(z_ref: float, z: float) -> float:
    """Approximate test-length ratio (z_ref / z)**2.

    The sample size needed to reach score z at a fixed effect scales like
    z**2, so this is the length of a test requiring ``z_ref`` relative to one
    requiring ``z``.
    """
    if not (z_ref > 0 and math.isfinite(z_ref)):
        raise DomainError(f"z_ref must be positive, got {z_ref}")
    if not (z > 0 and math.isfinite(z)):
        raise DomainError(f"z must be positive, got {z}")
    return (z_ref / z) ** 2


def always_valid_z(params: AlwaysValidParams) -> float:
    """Required Z of the always-valid comparator at observation count t.

    Evaluates sqrt( (2(t*rho^2 +1)/(t*rho^2)) * ln( sqrt(t*rho^2 + 1)/alpha ) ).
    For fixed rho and alpha the curve in t decreases and then increases.
    """
    x = params.t * params.rho * params.rho
    value = (2.0 * (x + 1.0) / x) * math.log(math.sqrt(x + 1.0) / params.alpha)
    if not math.isfinite(value) or value < 0.0:
        raise DomainError(
            f"comparator bound is not finite at t={params.t}, rho={params.rho}"
        )
    return math.sqrt(value)


def always_valid_curve(rho: float, alpha: float, ts) -> np.ndarray:
    """Vectorized :func:`always_valid_z` over an array of observation counts."""
    if not (rho > 0):
        raise DomainError(f"rho must be positive, got {rho}")
    _check_alpha(alpha)
    t = np.asarray(ts, dtype=float)
    if t.size and t.min() < 1:
        raise DomainError("observation counts must be >= 1")
    x = t * rho * rho
    return np.sqrt(2.0 * (x + 1.0) / x * np.log(np.sqrt(x + 1.0) / alpha))


def always_valid_min(rho: float, alpha: float, t_max: int) -> tuple[int, float]:
    """Observation count in [1, t_max] minimizing the comparator bound.

    Coarse geometric scan followed by an exact integer scan around the coarse
    minimum; the curve is unimodal in t, so the bracket contains the minimum.
    """
    if t_max < 1:
        raise DomainError(f"t_max must be >= 1, got {t_max}")
    grid = np.unique(np.geomspace(1, t_max, num=min(4096, t_max)).astype(np.int64))
    values = always_valid_curve(rho, alpha, grid)
    i = int(values.argmin())
    lo = int(grid[max(i - 1, 0)])
    hi = int(grid[min(i + 1, grid.size - 1)])
    window = np.arange(lo, hi + 1, dtype=np.int64)
    refined = always_valid_curve(rho, alpha, window)
    j = int(refined.argmin())
    return int(window[j]), float(refined[j])


def rho_for_min_at(
    alpha: float,
    t_target: int,
    rho_grid=None,
    search_factor: float = 4.0,
) -> float:
    """Grid-search the rho whose comparator minimum falls nearest t_target.

    Scans a geometric grid of rho values, locates each curve's minimizing
    observation count over [1, search_factor * t_target], and returns the rho
    whose minimizer is closest to t_target on a log scale.
    """
    _check_alpha(alpha)
    if t_target < 1:
        raise DomainError(f"t_target must be >= 1, got {t_target}")
    if rho_grid is None:
        rho_grid = np.geomspace(1e-6, 10.0, num=400)
    t_max = int(search_factor * t_target)
    best_rho, best_gap = None, math.inf
    for rho in rho_grid:
        t_min, _ = always_valid_min(float(rho), alpha, t_max)
        gap = abs(math.log(t_min) - math.log(t_target))
        if gap < best_gap:
            best_rho, best_gap = float(rho), gap
    return best_rho


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
