"""Equilibria and release thresholds of the frozen-coefficient SIT system.

With a standing sterile population M_T, positive aquatic equilibria solve

    (1-r) gamma / mu_M * A^2 - (M* - beta M_T) A + beta M_T (gamma + mu_A1)/mu_A2 (1 - eps N) = 0

where M* = Q (N - 1) is the wild male equilibrium. For eps < 1/N there are two
positive roots A1 < A2 while beta M_T < beta M_T1, and none above it.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .bio_params import EntoParams, basic_offspring, q_factor
from .errors import NoEquilibriumError
from .population import NO_RF, ResidualFertility

log = logging.getLogger(__name__)

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class WildEquilibrium:
    A: float
    M: float
    F: float
    N: float
    exists: bool

    @property
    def triple(self) -> Triple:
        return (self.A, self.M, self.F)


def wild_equilibrium(ep: EntoParams, mu_A2: float) -> WildEquilibrium:
    """Positive equilibrium of the release-free system; ``exists`` is False when N <= 1."""
    N = float(basic_offspring(ep))
    if N <= 1.0 or mu_A2 <= 0:
        return WildEquilibrium(0.0, 0.0, 0.0, N, False)
    A = (ep.gamma + ep.mu_A1) * (N - 1.0) / mu_A2
    return WildEquilibrium(A, (1.0 - ep.r) * ep.gamma * A / ep.mu_M, ep.r * ep.gamma * A / ep.mu_F, N, True)


def lift(A: float, ep: EntoParams, mu_A2: float) -> Triple:
    """Complete an aquatic equilibrium value to (A, M, F) via the male and aquatic balances."""
    M = (1.0 - ep.r) * ep.gamma * A / ep.mu_M
    F = (ep.gamma + ep.mu_A1 + mu_A2 * A) * A / ep.phi
    return (A, M, F)


def quadratic_coefficients(ep: EntoParams, mu_A2: float, rf: ResidualFertility, M_T: float):
    """Coefficients ``(a, b, c)`` of ``a A^2 + b A + c = 0`` for the aquatic equilibria."""
    N = float(basic_offspring(ep))
    Q = float(q_factor(ep, mu_A2))
    y = rf.beta * M_T
    a = (1.0 - ep.r) * ep.gamma / ep.mu_M
    b = -(Q * (N - 1.0) - y)
    c = y * (ep.gamma + ep.mu_A1) / mu_A2 * (1.0 - rf.epsilon * N)
    return a, b, c


def discriminant(ep: EntoParams, mu_A2: float, rf: ResidualFertility, M_T: float) -> float:
    """Delta(eps) = (M* - beta M_T)^2 - 4 Q beta M_T (1 - eps N)."""
    N = float(basic_offspring(ep))
    Q = float(q_factor(ep, mu_A2))
    y = rf.beta * M_T
    return (Q * (N - 1.0) - y) ** 2 - 4.0 * Q * y * (1.0 - rf.epsilon * N)


@dataclass(frozen=True)
class EquilibriumSet:
    """Equilibria of the frozen system for one standing sterile population.

    ``case`` is one of ``no_release``, ``two_roots``, ``extinction``,
    ``single_root`` (eps >= 1/N) or ``no_wild`` (N <= 1). When present, E1 is
    unstable and E2 is stable; E0 = 0 always exists.
    """

    case: str
    N: float
    M_T: float
    delta: float
    E1: Triple | None
    E2: Triple | None

    @property
    def A1(self) -> float:
        return self.E1[0] if self.E1 else math.nan

    @property
    def A2(self) -> float:
        return self.E2[0] if self.E2 else math.nan


def sit_equilibria(ep: EntoParams, mu_A2: float, rf: ResidualFertility = NO_RF, M_T: float = 0.0) -> EquilibriumSet:
    if M_T < 0:
        raise ValueError("standing sterile population must be non-negative")
    N = float(basic_offspring(ep))
    if N <= 1.0 or mu_A2 <= 0:
        return EquilibriumSet("no_wild", N, M_T, math.nan, None, None)
    a, b, c = quadratic_coefficients(ep, mu_A2, rf, M_T)
    delta = discriminant(ep, mu_A2, rf, M_T)
    s = -b  # M* - beta M_T
    if M_T == 0:
        return EquilibriumSet("no_release", N, M_T, delta, None, lift(s / a, ep, mu_A2))
    if c < 0:
        # eps > 1/N: roots of opposite sign; take the positive one through the
        # product of roots, since s + sqrt(delta) cancels for large releases
        root = math.sqrt(delta)
        A = (s + root) / (2.0 * a) if s >= 0 else 2.0 * c / (s - root)
        return EquilibriumSet("single_root", N, M_T, delta, None, lift(A, ep, mu_A2))
    if c == 0:
        if s > 0:
            return EquilibriumSet("single_root", N, M_T, delta, None, lift(s / a, ep, mu_A2))
        return EquilibriumSet("extinction", N, M_T, delta, None, None)
    if delta < 0 or s <= 0:
        return EquilibriumSet("extinction", N, M_T, delta, None, None)
    A2 = (s + math.sqrt(delta)) / (2.0 * a)
    A1 = c / (a * A2)
    return EquilibriumSet("two_roots", N, M_T, delta, lift(A1, ep, mu_A2), lift(A2, ep, mu_A2))


@dataclass(frozen=True)
class ReleaseThresholds:
    """Standing sterile-male thresholds; ``beta_*`` are the products with beta."""

    M_T1: float
    M_T2: float
    beta_M_T1: float
    beta_M_T2: float
    exists: bool


def release_thresholds(ep: EntoParams, mu_A2: float, rf: ResidualFertility = NO_RF) -> ReleaseThresholds:
    """Roots in beta*M_T of Delta(eps) = 0; only defined for eps < 1/N."""
    N = float(basic_offspring(ep))
    eps = rf.epsilon
    if N <= 1.0 or mu_A2 <= 0 or eps * N >= 1.0:
        return ReleaseThresholds(math.nan, math.nan, math.nan, math.nan, False)
    Q = float(q_factor(ep, mu_A2))
    root = 2.0 * math.sqrt((1.0 - eps * N) * (1.0 - eps) * N)
    y2 = Q * (N + 1.0 - 2.0 * eps * N + root)
    # product of the two roots is (Q (N-1))^2; dividing avoids cancellation in y1
    y1 = (Q * (N - 1.0)) ** 2 / y2
    return ReleaseThresholds(y1 / rf.beta, y2 / rf.beta, y1, y2, True)


def standing_sterile_peak(small_bolus: float, mu_S, tau: float = 7.0):
    """Post-release peak of the periodic steady state of M_S under releases every ``tau`` days."""
    return small_bolus / (1.0 - np.exp(-np.asarray(mu_S) * tau))


@dataclass(frozen=True)
class E1MinBox:
    """Componentwise minimum of E1(t) over the window.

    ``day_min`` holds the day index attaining each component's minimum.
    """

    A: float
    M: float
    F: float
    days_used: int
    days_skipped: int
    day_min: tuple[int, int, int]
    statistic: str = "post-release peak M_S"

    @property
    def triple(self) -> Triple:
        return (self.A, self.M, self.F)

    def contains(self, A: float, M: float, F: float) -> bool:
        """Strictly inside the box on every component."""
        return A < self.A and M < self.M and F < self.F


def daily_equilibria(env, rf: ResidualFertility, small_bolus: float, tau: float = 7.0) -> list[EquilibriumSet]:
    """Frozen-coefficient equilibria for every day under the small-release standing population."""
    MS_bar = standing_sterile_peak(small_bolus, env.mu_S, tau)
    return [sit_equilibria(env.ep_at(d), float(env.mu_A2[d]), rf, float(MS_bar[d])) for d in range(env.n_days)]


def e1_min_box(env, rf: ResidualFertility = NO_RF, small_bolus: float = 20 * 100, tau: float = 7.0,
               days: range | None = None) -> E1MinBox:
    """Box [0, E1_min) under small releases of ``small_bolus`` every ``tau`` days.

    Days without an E1 (eps >= 1/N, N <= 1, or small releases already above
    threshold) are skipped and counted.
    """
    eqs = daily_equilibria(env, rf, small_bolus, tau)
    idx = list(days) if days is not None else list(range(env.n_days))
    pts = [(d, eqs[d].E1) for d in idx if eqs[d].E1 is not None]
    skipped = len(idx) - len(pts)
    if not pts:
        raise NoEquilibriumError(
            f"no day admits E1 (residual fertility {rf.epsilon} too large or releases above threshold)")
    if skipped:
        log.info("E1 missing on %d of %d days; skipped in the minimum", skipped, len(idx))
    arr = np.array([p for _, p in pts])
    arg = arr.argmin(axis=0)
    day_min = tuple(int(pts[i][0]) for i in arg)
    return E1MinBox(float(arr[arg[0], 0]), float(arr[arg[1], 1]), float(arr[arg[2], 2]), len(pts), skipped, day_min)


def write_equilibria_csv(path, env, rf: ResidualFertility, small_bolus: float, tau: float = 7.0,
                         header: list[str] | None = None):
    """Per-day ``date,A1,M1,F1,A2,M2,F2,MT1,MT2``; empty cells where an equilibrium is absent."""
    eqs = daily_equilibria(env, rf, small_bolus, tau)
    fmt = lambda v: "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "A1", "M1", "F1", "A2", "M2", "F2", "MT1", "MT2"])
        for d, eq in enumerate(eqs):
            th = release_thresholds(env.ep_at(d), float(env.mu_A2[d]), rf)
            e1 = eq.E1 or (None, None, None)
            e2 = eq.E2 or (None, None, None)
            w.writerow([str(env.dates[d])] + [fmt(v) for v in (*e1, *e2)] + [fmt(th.M_T1), fmt(th.M_T2)])
