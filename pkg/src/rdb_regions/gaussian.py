"""Quadratic-Gaussian source with a helper over a two-hop Gaussian broadcast channel.

The source S ~ N(0, sigma_s2) is also the helper's observation.  The helper
reaches the strong receiver through Y = X + N2 and the weak receiver through
Z = Y + N1, so the channel is degraded by construction.  Rates are in bits
per source sample and the bandwidth factor is fixed to one.

Two helper strategies are compared: sending the source uncoded (the problem
becomes source coding with degraded side information) and a separation
scheme (successive-refinement source code plus superposition channel code).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

TIE_TOL = 1e-9
ALPHA_TOL = 1e-12


class GaussianInputError(ValueError):
    pass


class Regime(enum.Enum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4

    def __str__(self):
        return f"case{self.value}"


class Winner(enum.Enum):
    UNCODED = "uncoded"
    SEPARATION = "separation"
    TIE = "tie"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class GaussianProblem:
    sigma_s2: float
    sigma_12: float
    sigma_22: float
    power: Optional[float] = None
    rho: float = 1.0
    allow_power_mismatch: bool = False

    def __post_init__(self):
        power = self.sigma_s2 if self.power is None else self.power
        object.__setattr__(self, "power", float(power))
        for name in ("sigma_s2", "sigma_12", "sigma_22", "power"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise GaussianInputError(f"{name} must be finite and positive, got {v!r}")
        if self.rho != 1:
            raise GaussianInputError("the Gaussian comparison is defined for rho = 1 only")
        if not self.allow_power_mismatch and not math.isclose(self.power, self.sigma_s2, rel_tol=1e-12):
            raise GaussianInputError(
                "power must equal sigma_s2 so both schemes use the same input power; "
                "pass allow_power_mismatch=True for exploratory runs"
            )

    @property
    def equal_power(self) -> bool:
        return math.isclose(self.power, self.sigma_s2, rel_tol=1e-12)

    @property
    def uncoded_noise(self) -> tuple:
        """Noise variances seen by the uncoded scheme, scaled to the source.

        Sending sqrt(P / sigma_s2) * S makes the receivers see S plus noise
        scaled by sigma_s2 / P.  With P = sigma_s2 this is the identity.
        """
        scale = self.sigma_s2 / self.power
        return self.sigma_12 * scale, self.sigma_22 * scale


@dataclass(frozen=True)
class DistortionPair:
    d1: float
    d2: float

    def check(self, p: GaussianProblem) -> None:
        if not (math.isfinite(self.d1) and math.isfinite(self.d2)):
            raise GaussianInputError("distortions must be finite")
        if not 0 < self.d2 <= self.d1 <= p.sigma_s2:
            raise GaussianInputError(
                f"need 0 < d2 <= d1 <= sigma_s2, got d1={self.d1}, d2={self.d2}, sigma_s2={p.sigma_s2}"
            )


@dataclass(frozen=True)
class Thresholds:
    d1_star: float
    d2_star: float
    gamma: float
    _s12: float
    _s22: float
    _ss2: float

    def d1_tilde(self, d2: float) -> float:
        """Weak-receiver threshold below which only the weak description matters."""
        den = self.gamma * self._s12 - (1 - self.gamma) ** 2 * d2
        if den <= 0:
            return math.inf
        return self.gamma * self._s12 * d2 / den

    def d2_tilde(self, d1: float) -> float:
        return d1 * self._s22 / (self._ss2 + self._s22)


def thresholds(p: GaussianProblem) -> Thresholds:
    s, a, b = p.sigma_s2, *p.uncoded_noise
    return Thresholds(
        d1_star=s * (a + b) / (s + a + b),
        d2_star=s * b / (s + b),
        gamma=b / (a + b),
        _s12=a,
        _s22=b,
        _ss2=s,
    )


def wz_rate(sigma_cond2: float, d: float) -> float:
    """Gaussian Wyner-Ziv rate for conditional variance ``sigma_cond2``."""
    if sigma_cond2 <= 0 or d <= 0:
        raise GaussianInputError("conditional variance and distortion must be positive")
    return max(0.0, 0.5 * math.log2(sigma_cond2 / d))


def classify_uncoded_regime(p: GaussianProblem, d: DistortionPair) -> Regime:
    d.check(p)
    th = thresholds(p)
    d1, d2 = d.d1, d.d2
    if th.d1_tilde(d2) <= d1 <= th.d1_star and d2 <= th.d2_star:
        return Regime.CASE1
    if d1 > th.d1_star and d2 <= th.d2_star:
        return Regime.CASE2
    if d1 <= th.d1_star and d1 <= th.d1_tilde(d2):
        return Regime.CASE3
    if d1 > th.d1_star and d2 > th.d2_star:
        return Regime.CASE4
    # d1_tilde(d2_star) == d1_star, so the four cases cover every valid pair;
    # reaching this line means rounding at that corner.
    return Regime.CASE3


def uncoded_rate(p: GaussianProblem, d: DistortionPair) -> float:
    regime = classify_uncoded_regime(p, d)
    th = thresholds(p)
    s, a, b = p.sigma_s2, *p.uncoded_noise
    if regime is Regime.CASE1:
        g = th.gamma
        val = 0.5 * math.log2(s * a * b / (d.d2 * (s + a + b) * ((1 - g) ** 2 * d.d1 + g * a)))
        return max(0.0, val)
    if regime is Regime.CASE2:
        return wz_rate(th.d2_star, d.d2)
    if regime is Regime.CASE3:
        return wz_rate(th.d1_star, d.d1)
    return 0.0


def _sep_terms(p: GaussianProblem, d: DistortionPair, alpha: float) -> tuple:
    s, a, b, P = p.sigma_s2, p.sigma_12, p.sigma_22, p.power
    r1 = 0.5 * math.log2(s * (alpha * P + a + b) / (d.d1 * (P + a + b)))
    r2 = 0.5 * math.log2(s * b * (alpha * P + a + b) / (d.d2 * (P + a + b) * (alpha * P + b)))
    return r1, r2


def separation_rate_numeric(p: GaussianProblem, d: DistortionPair) -> tuple:
    """min over alpha of max(R1, R2), found by bisection on R1 - R2.

    R1 grows and R2 shrinks with alpha, so the minimum sits at the crossing
    when there is one, otherwise at the endpoint where the larger term is
    smallest.  Returns ``(rate, alpha_star)``.
    """
    d.check(p)

    def gap(x):
        r1, r2 = _sep_terms(p, d, x)
        return r1 - r2

    g0, g1 = gap(0.0), gap(1.0)
    if g1 <= 0:
        alpha = 1.0
    elif g0 >= 0:
        alpha = 0.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > ALPHA_TOL:
            mid = 0.5 * (lo + hi)
            if gap(mid) < 0:
                lo = mid
            else:
                hi = mid
        alpha = 0.5 * (lo + hi)
    return max(0.0, max(_sep_terms(p, d, alpha))), alpha


def separation_alpha(p: GaussianProblem, d: DistortionPair) -> float:
    """Closed-form minimizing power split, clipped to [0, 1]."""
    d.check(p)
    return min(1.0, p.sigma_22 * (d.d1 - d.d2) / (p.power * d.d2))


def separation_rate_closed(p: GaussianProblem, d: DistortionPair) -> float:
    d.check(p)
    s, a, b, P = p.sigma_s2, p.sigma_12, p.sigma_22, p.power
    if d.d2 > d.d1 * b / (P + b):
        val = 0.5 * math.log2(s * (b * d.d1 + a * d.d2) / (d.d1 * d.d2 * (P + a + b)))
        return max(0.0, val)
    # the optimum sits at alpha = 1: Wyner-Ziv with side information Y
    return wz_rate(s * b / (P + b), d.d2)


@dataclass(frozen=True)
class RateComparison:
    d1: float
    d2: float
    r_uncoded: float
    r_separation: float
    uncoded_regime: Regime
    separation_alpha: float
    winner: Winner
    equal_power: bool = True


def _winner(r_u: float, r_se: float) -> Winner:
    if abs(r_u - r_se) <= TIE_TOL:
        return Winner.TIE
    return Winner.UNCODED if r_u < r_se else Winner.SEPARATION


def compare(p: GaussianProblem, d: DistortionPair) -> RateComparison:
    r_u = uncoded_rate(p, d)
    r_se, alpha = separation_rate_numeric(p, d)
    return RateComparison(
        d1=d.d1,
        d2=d.d2,
        r_uncoded=r_u,
        r_separation=r_se,
        uncoded_regime=classify_uncoded_regime(p, d),
        separation_alpha=alpha,
        winner=_winner(r_u, r_se),
        equal_power=p.equal_power,
    )


def crossover_interval(p: GaussianProblem, d1: float) -> Optional[tuple]:
    """D2 range where separation does at least as well as uncoded, or None.

    Meaningful inside the non-degenerate regime; empty once d1 > d1_star.
    """
    if not 0 < d1 <= p.sigma_s2:
        raise GaussianInputError(f"need 0 < d1 <= sigma_s2, got {d1}")
    if not p.equal_power:
        raise GaussianInputError("the crossover formula assumes power == sigma_s2")
    th = thresholds(p)
    if d1 > th.d1_star:
        return None
    a, b = p.sigma_12, p.sigma_22
    low = th.d2_tilde(d1)
    high = d1 * b * (a + b - d1) / (a * d1 + b * (a + b))
    return low, max(low, high)


def single_helper_gaussian_bound(nu: float, rho_c: float, d: float) -> float:
    """Rate lower bound for unit-variance S, T with correlation ``nu``.

    ``rho_c`` is the helper's total channel budget in bits per source sample.
    """
    if not -1 <= nu <= 1:
        raise GaussianInputError("correlation must lie in [-1, 1]")
    if rho_c < 0:
        raise GaussianInputError("rho * C must be nonnegative")
    if not 0 < d <= 1:
        raise GaussianInputError("distortion must lie in (0, 1]")
    residual = 1 - nu * nu + nu * nu * 2.0 ** (-2 * rho_c)
    if residual <= 0:
        return math.inf
    return max(0.0, 0.5 * math.log2(residual / d))


SWEEP_HEADER = ("d2", "r_uncoded", "r_separation", "regime", "alpha_star", "winner")


def sweep_curve(p: GaussianProblem, d1: float, d2_grid: Iterable[float]) -> list:
    grid = [float(x) for x in d2_grid]
    if not grid:
        raise GaussianInputError("empty d2 grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise GaussianInputError("d2 grid must be strictly increasing")
    if grid[-1] > d1:
        raise GaussianInputError("every d2 must satisfy d2 <= d1")
    return [compare(p, DistortionPair(d1, d2)) for d2 in grid]


def fmt12(x: float) -> str:
    return f"{x:.12g}"


def write_sweep_csv(rows: list, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([fmt12(r.d2), fmt12(r.r_uncoded), fmt12(r.r_separation), str(r.uncoded_regime),
                    fmt12(r.separation_alpha), str(r.winner)])


def case5_mask(sigma_s2, sigma_12, sigma_22, d1, d2) -> np.ndarray:
    """Vectorized test of the three simultaneous comparison-case-5 conditions."""
    s, a, b = (np.asarray(x, dtype=float) for x in (sigma_s2, sigma_12, sigma_22))
    d1, d2 = np.asarray(d1, dtype=float), np.asarray(d2, dtype=float)
    d1_star = s * (a + b) / (s + a + b)
    g = b / (a + b)
    den = g * a - (1 - g) ** 2 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        d1_tilde = np.where(den > 0, g * a * d2 / den, np.inf)
    d2_tilde = d1 * b / (s + b)
    return (d1 <= d1_star) & (d1 <= d1_tilde) & (d2 <= d2_tilde)
