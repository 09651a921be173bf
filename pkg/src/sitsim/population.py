"""Mosquito population dynamics under impulsive sterile-male releases.

State vectors are absolute counts over the treated area:

* SIT model: ``(A, M, F, M_S)`` -- aquatic stage, wild males, females, sterile males
* SEI-SIR model: ``(A, M, F_S, F_E, F_I, M_S, S_h, I_h, R_h)``

Coefficients are held constant within each day. Integration uses classical
fixed-step RK4 on a mesh that contains every integer day, and releases are
applied as exact jumps of ``M_S`` at their scheduled instants.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bio_params import EntoParams
from .epi_risk import DEFAULT_EPI, EpiParams, EpiRates, epi_rates
from .errors import IntegrationError

SIT_FIELDS = ("A", "M", "F", "M_S")
EPI_FIELDS = ("A", "M", "F_S", "F_E", "F_I", "M_S", "S_h", "I_h", "R_h")
NEG_TOL = 1e-9
MESH_TOL = 1e-9


@dataclass(frozen=True)
class ResidualFertility:
    """Fraction ``epsilon`` of released males that stay fertile; ``beta`` is their competitiveness."""

    epsilon: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"residual fertility must lie in [0, 1), got {self.epsilon}")
        if self.beta <= 0:
            raise ValueError("competition parameter beta must be positive")


NO_RF = ResidualFertility()


@dataclass(frozen=True)
class ImpulseSchedule:
    """Periodic releases at ``t0 + i*tau``.

    The first ``n_releases`` events release ``bolus`` individuals; later events
    release ``small_bolus`` (open-ended). ``n_releases=None`` keeps releasing
    ``bolus`` forever.
    """

    t0: float
    bolus: float
    tau: float = 7.0
    n_releases: int | None = None
    small_bolus: float = 0.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("release period must be positive")
        if self.bolus < 0 or self.small_bolus < 0:
            raise ValueError("release sizes must be non-negative")
        if self.n_releases is not None and self.n_releases < 0:
            raise ValueError("n_releases must be non-negative")

    def amount(self, i: int) -> float:
        if self.n_releases is None or i < self.n_releases:
            return self.bolus
        return self.small_bolus

    def events(self, t_start: float, t_end: float) -> list[tuple[float, float]]:
        """``(time, amount)`` for events in ``[t_start, t_end)`` with a positive amount."""
        out = []
        i = max(0, math.ceil((t_start - self.t0) / self.tau - MESH_TOL))
        while True:
            t = self.t0 + i * self.tau
            if t >= t_end - MESH_TOL:
                break
            a = self.amount(i)
            if self.n_releases is not None and i >= self.n_releases and a == 0:
                break
            if a > 0:
                out.append((t, a))
            i += 1
        return out


def mating_fraction(M: float, M_S: float, rf: ResidualFertility) -> float:
    """Share of matings yielding viable offspring; 1 when no males are present."""
    denom = M + rf.beta * M_S
    if denom <= 0:
        return 1.0
    return (M + rf.epsilon * rf.beta * M_S) / denom


def rhs_wild(y: Sequence[float], ep: EntoParams, mu_A2: float) -> np.ndarray:
    """Wild system without releases, state ``(A, M, F)``."""
    A, M, F = y[0], y[1], y[2]
    return np.array([
        ep.phi * F - (ep.gamma + ep.mu_A1 + mu_A2 * A) * A,
        (1.0 - ep.r) * ep.gamma * A - ep.mu_M * M,
        ep.r * ep.gamma * A - ep.mu_F * F,
    ])


def rhs_sit(y: Sequence[float], ep: EntoParams, mu_A2: float, rf: ResidualFertility = NO_RF,
            u_S: float = 0.0) -> np.ndarray:
    """SIT system, state ``(A, M, F, M_S)``; ``u_S`` is an optional continuous release rate."""
    A, M, F, M_S = y
    frac = mating_fraction(M, M_S, rf)
    return np.array([
        ep.phi * F - (ep.gamma + ep.mu_A1 + mu_A2 * A) * A,
        (1.0 - ep.r) * ep.gamma * A - ep.mu_M * M,
        ep.r * ep.gamma * frac * A - ep.mu_F * F,
        u_S - ep.mu_S * M_S,
    ])


def rhs_epi(y: Sequence[float], ep: EntoParams, mu_A2: float, rf: ResidualFertility = NO_RF,
            epi: EpiRates | None = None, u_S: float = 0.0) -> np.ndarray:
    """Coupled SEI (females) / SIR (humans) dengue system, state ordered as :data:`EPI_FIELDS`."""
    if epi is None:
        raise ValueError("rhs_epi needs transmission rates")
    if epi.N_h <= 0:
        raise ValueError("human population N_h must be positive")
    A, M, F_S, F_E, F_I, M_S, S_h, I_h, R_h = y
    frac = mating_fraction(M, M_S, rf)
    infect_m = epi.B * epi.beta_hm * F_S * I_h / epi.N_h
    infect_h = epi.B * epi.beta_mh * F_I * S_h / epi.N_h
    return np.array([
        ep.phi * (F_S + F_E + F_I) - (ep.gamma + ep.mu_A1 + mu_A2 * A) * A,
        (1.0 - ep.r) * ep.gamma * A - ep.mu_M * M,
        ep.r * ep.gamma * frac * A - infect_m - ep.mu_F * F_S,
        infect_m - (epi.nu_m + ep.mu_F) * F_E,
        epi.nu_m * F_E - ep.mu_F * F_I,
        u_S - ep.mu_S * M_S,
        epi.mu_h * epi.N_h - infect_h - epi.mu_h * S_h,
        infect_h - (epi.eta_h + epi.mu_h) * I_h,
        epi.eta_h * I_h - epi.mu_h * R_h,
    ])


@dataclass
class Trajectory:
    """Sampled states. ``y[i]`` is the state at ``t[i]`` after any release at that instant."""

    t: np.ndarray
    y: np.ndarray
    fields: tuple[str, ...]
    jumps: list[tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "F" and "F" not in self.fields:
            return self["F_S"] + self["F_E"] + self["F_I"]
        return self.y[:, self.fields.index(name)]

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def to_csv(self, path, header: list[str] | None = None):
        cols = ["A", "M", "F", "M_S"]
        if self.fields == EPI_FIELDS:
            cols += ["F_S", "F_E", "F_I", "S_h", "I_h", "R_h"]
        data = {c: self[c] for c in cols}
        with open(path, "w", newline="") as fh:
            for line in header or []:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + cols)
            for i, t in enumerate(self.t):
                w.writerow([repr(float(t))] + [repr(float(data[c][i])) for c in cols])


def _check_mesh(dt: float) -> int:
    n_sub = round(1.0 / dt)
    if n_sub < 1 or abs(n_sub * dt - 1.0) > 1e-12:
        raise ValueError(f"step {dt} must divide one day")
    return n_sub


def stiffness(A: float, gamma: float, mu_A1: float, mu_A2: float, mu_max: float) -> float:
    """Upper estimate of the fastest decay rate (1/day) of the frozen system at aquatic level ``A``."""
    return gamma + mu_A1 + 2.0 * mu_A2 * max(A, 0.0) + mu_max


def refinement(L: float, n_sub: int) -> int:
    """Factor splitting each base step so that ``h * L <= 1``.

    Collapsing carrying capacity makes density-dependent mortality very fast;
    refining whole days keeps the base mesh, and so every release instant.
    """
    return max(1, math.ceil(L / n_sub))


def _fields_for(n: int) -> tuple[str, ...]:
    return {3: ("A", "M", "F"), 4: SIT_FIELDS, 9: EPI_FIELDS}.get(n, tuple(f"y{i}" for i in range(n)))


def _ms_index(n: int) -> int | None:
    return {4: 3, 9: 5}.get(n)


def _guard(y: np.ndarray, t: float) -> np.ndarray:
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state", t)
    lo = y.min()
    if lo < 0:
        if lo < -NEG_TOL:
            raise IntegrationError(f"negative state component {lo:.3e}", t)
        y = np.maximum(y, 0.0)
    return y


def integrate(rhs: Callable, state0: Sequence[float], t_span: tuple[int, int], env,
              schedule: ImpulseSchedule | None = None, *, dt: float = 0.05, sample_every: int = 1,
              day_kwargs: Callable[[int], dict] | None = None, **rhs_kwargs) -> Trajectory:
    """Integrate ``rhs(y, ep, mu_A2, **kwargs)`` over whole days ``t_span``.

    Coefficients for day ``d`` come from ``env`` (an :class:`~sitsim.weather.Environment`);
    ``day_kwargs(d)`` may add per-day keyword arguments. Releases in
    ``[t_start, t_end)`` jump ``M_S`` by their amount before the step that starts
    at their instant.
    """
    t_start, t_end = int(t_span[0]), int(t_span[1])
    if t_start != t_span[0] or t_end != t_span[1] or t_end < t_start:
        raise ValueError(f"t_span must be whole days with start <= end, got {t_span}")
    if t_start < 0 or t_end > env.n_days:
        raise ValueError(f"t_span {t_span} exceeds the {env.n_days}-day environment")
    n_sub = _check_mesh(dt)
    h = 1.0 / n_sub
    y = np.array(state0, dtype=float)
    ms = _ms_index(len(y))
    events: dict[tuple[int, int], float] = {}
    if schedule is not None:
        for t_ev, amount in schedule.events(t_start, t_end):
            d = math.floor(t_ev + MESH_TOL)
            k = round((t_ev - d) * n_sub)
            if abs(d + k * h - t_ev) > MESH_TOL:
                raise ValueError(f"release at t={t_ev} is not on the integration mesh")
            if ms is None:
                raise ValueError("releases need a state with a sterile-male compartment")
            events[(d, k)] = events.get((d, k), 0.0) + amount
    times, states, jumps = [], [], []

    for d in range(t_start, t_end):
        ep = env.ep_at(d)
        mu_A2 = float(env.mu_A2[d])
        kw = dict(rhs_kwargs)
        if day_kwargs is not None:
            kw.update(day_kwargs(d))
        f = lambda yy: rhs(yy, ep, mu_A2, **kw)
        m = refinement(stiffness(y[0], ep.gamma, ep.mu_A1, mu_A2, max(ep.mu_M, ep.mu_F, ep.mu_S)), n_sub)
        hd = h / m
        for k in range(n_sub * m):
            t = d + k * hd
            amount = events.get((d, k // m)) if k % m == 0 else None
            if amount is not None:
                pre = y.copy()
                y[ms] += amount
                jumps.append((t, pre, y.copy()))
            if k == 0 and (d - t_start) % sample_every == 0:
                times.append(float(d))
                states.append(y.copy())
            k1 = f(y)
            k2 = f(y + 0.5 * hd * k1)
            k3 = f(y + 0.5 * hd * k2)
            k4 = f(y + hd * k3)
            y = _guard(y + (hd / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t + hd)
    if not times or times[-1] != t_end:
        times.append(float(t_end))
        states.append(y.copy())
    return Trajectory(np.array(times), np.array(states), _fields_for(len(y)), jumps)


def simulate_epi(state0: Sequence[float], t_span: tuple[int, int], env, schedule: ImpulseSchedule | None = None,
                 rf: ResidualFertility = NO_RF, epi: EpiParams = DEFAULT_EPI, *, dt: float = 0.05,
                 u_S: float = 0.0) -> Trajectory:
    """Coupled dengue simulation with transmission rates taken from each day's temperature."""
    cache: dict[int, EpiRates] = {}

    def per_day(d: int) -> dict:
        if d not in cache:
            cache[d] = epi_rates(float(env.epi_temp[d]), epi)
        return {"epi": cache[d]}

    return integrate(rhs_epi, state0, t_span, env, schedule, dt=dt, day_kwargs=per_day, rf=rf, u_S=u_S)


class SITStepper:
    """Scalar RK4 advance of the ``(A, M, F, M_S)`` system by whole days.

    Same scheme as :func:`integrate` with :func:`rhs_sit`, written on plain floats
    for the thousands of runs in a start-date scan.
    """

    def __init__(self, env, rf: ResidualFertility = NO_RF, dt: float = 0.05, u_S: float = 0.0):
        self.n_sub = _check_mesh(dt)
        self.h = 1.0 / self.n_sub
        self.rows = env.coeff_rows()
        self.eps = rf.epsilon
        self.beta = rf.beta
        self.u_S = u_S

    def advance(self, y: tuple[float, float, float, float], day: int) -> tuple[float, float, float, float]:
        phi, g, m1, m2, mM, mF, mS, r = self.rows[day]
        rg, qg, base = r * g, (1.0 - r) * g, g + m1
        eps_b, beta, u = self.eps * self.beta, self.beta, self.u_S
        A, M, F, S = y
        m = refinement(stiffness(A, g, m1, m2, max(mM, mF, mS)), self.n_sub)
        h = self.h / m
        h2, h6 = 0.5 * h, h / 6.0

        def f(A, M, F, S):
            den = M + beta * S
            frac = (M + eps_b * S) / den if den > 0 else 1.0
            return phi * F - (base + m2 * A) * A, qg * A - mM * M, rg * frac * A - mF * F, u - mS * S

        for _ in range(self.n_sub * m):
            a1, b1, c1, d1 = f(A, M, F, S)
            a2, b2, c2, d2 = f(A + h2 * a1, M + h2 * b1, F + h2 * c1, S + h2 * d1)
            a3, b3, c3, d3 = f(A + h2 * a2, M + h2 * b2, F + h2 * c2, S + h2 * d2)
            a4, b4, c4, d4 = f(A + h * a3, M + h * b3, F + h * c3, S + h * d3)
            A += h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            M += h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            F += h6 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            S += h6 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        out = (A, M, F, S)
        lo = min(out)
        if not all(map(math.isfinite, out)):
            raise IntegrationError("non-finite state", day + 1)
        if lo < 0:
            if lo < -NEG_TOL:
                raise IntegrationError(f"negative state component {lo:.3e}", day + 1)
            out = tuple(max(v, 0.0) for v in out)
        return out
