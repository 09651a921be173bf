"""Massive-small release strategy: how many weekly massive releases are needed.

For every candidate start day the SIT system is integrated from the
release-free population, with weekly boluses of ``massive_rate * area``
sterile males, until the objective holds at a day boundary:

* ``nuisance`` -- the wild triple (A, M, F) is strictly inside [0, E1_min),
  the basin that small releases alone keep suppressed;
* ``epi`` -- the female count is under the R_eff = 0.5 threshold of that day.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .bio_params import EntoParams
from .epi_risk import DEFAULT_EPI, EpiParams, f_threshold
from .equilibria import E1MinBox, e1_min_box, wild_equilibrium
from .errors import ConfigError, NumericalError
from .population import ResidualFertility, SITStepper
from .weather import CapacityConfig, Environment, WeatherSeries, build_environment, canonical_variant

log = logging.getLogger(__name__)

OBJECTIVES = ("nuisance", "epi")
OBJECTIVE_ALIASES = {"epi_risk": "epi"}


@dataclass(frozen=True)
class ScanConfig:
    """One cell of a release-strategy study; rates are individuals per hectare per release."""

    objective: str = "nuisance"
    massive_rate: float = 6000.0
    small_rate: float = 100.0
    area: float = 20.0
    tau: int = 7
    eps: float = 0.0
    beta: float = 1.0
    mc_level: float = 0.0
    variant: str = "full"
    start_grid: tuple[int, ...] | None = None
    max_releases: int = 400
    burn_in: int = 365
    dt: float = 0.05
    epi: EpiParams = DEFAULT_EPI

    def __post_init__(self):
        object.__setattr__(self, "objective", OBJECTIVE_ALIASES.get(self.objective, self.objective))
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.massive_rate < 0 or self.small_rate < 0 or self.area <= 0:
            raise ConfigError("release rates must be >= 0 and the area > 0")
        if int(self.tau) != self.tau or self.tau <= 0:
            raise ConfigError("release period must be a positive whole number of days")
        if not 0.0 <= self.eps < 1.0:
            raise ConfigError("residual fertility must lie in [0, 1)")
        if not 0.0 <= self.mc_level < 1.0:
            raise ConfigError("mechanical-control level must lie in [0, 1)")
        if self.max_releases < 0 or self.burn_in < 0:
            raise ConfigError("max_releases and burn_in must be non-negative")
        if self.start_grid is not None:
            object.__setattr__(self, "start_grid", tuple(int(t) for t in self.start_grid))

    @property
    def rf(self) -> ResidualFertility:
        return ResidualFertility(self.eps, self.beta)

    @property
    def massive_bolus(self) -> float:
        return self.massive_rate * self.area

    @property
    def small_bolus(self) -> float:
        return self.small_rate * self.area

    def cell(self) -> tuple:
        return (self.objective, self.variant, self.eps, self.mc_level, self.massive_rate)


@dataclass
class StrategyOutcome:
    t0: int
    t0_date: str
    n_massive: int
    stop_day: int | None
    stop_date: str | None
    total_sterile_males: float
    objective_met: bool
    reason: str
    stop_state: tuple[float, float, float, float] | None = None
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def effective_n(self) -> float:
        """Release count for comparisons; unmet runs count as infinitely long."""
        return float(self.n_massive) if self.objective_met else math.inf


def initial_wild_state(env: Environment) -> tuple[float, float, float, float]:
    """Equilibrium of day 0's frozen coefficients, or of the window-mean ones when day 0 has none."""
    eq = wild_equilibrium(env.ep_at(0), float(env.mu_A2[0]))
    if not eq.exists:
        mean_ep = EntoParams(**{k: float(np.mean(v)) for k, v in env.ep.as_dict().items()})
        eq = wild_equilibrium(mean_ep, float(np.mean(env.mu_A2)))
    if not eq.exists:
        raise NumericalError("no positive wild equilibrium to start the burn-in from")
    return (eq.A, eq.M, eq.F, 0.0)


def wild_baseline(env: Environment, dt: float = 0.05, state0=None) -> list[tuple[float, float, float, float]]:
    """Release-free states at every day boundary ``0..n_days``, from :func:`initial_wild_state` by default."""
    if state0 is None:
        state0 = initial_wild_state(env)
    stepper = SITStepper(env, dt=dt)
    y = tuple(float(v) for v in state0)
    out = [y]
    for d in range(env.n_days):
        y = stepper.advance(y, d)
        out.append(y)
    return out


def default_start_grid(env: Environment, burn_in: int = 365) -> tuple[int, ...]:
    """Every Monday from the end of the burn-in to the last day of the window."""
    weekday = (env.dates.astype("datetime64[D]").view("int64") - 4) % 7  # 1970-01-05 was a Monday
    return tuple(int(d) for d in range(burn_in, env.n_days) if weekday[d] == 0)


@dataclass
class StrategyContext:
    """Read-only data shared by every start date of one scan cell."""

    cfg: ScanConfig
    env: Environment
    baseline: list
    box: E1MinBox | None = None
    f_bound: np.ndarray | None = None

    @classmethod
    def build(cls, cfg: ScanConfig, env: Environment, baseline: list | None = None) -> "StrategyContext":
        if baseline is None:
            baseline = wild_baseline(env, cfg.dt)
        box = f_bound = None
        if cfg.objective == "nuisance":
            box = e1_min_box(env, cfg.rf, cfg.small_bolus, cfg.tau)
        else:
            f_bound = np.atleast_1d(f_threshold(env.epi_temp, env.mu_F, cfg.epi))
        return cls(cfg, env, baseline, box, f_bound)

    def with_config(self, cfg: ScanConfig) -> "StrategyContext":
        """Same environment and burn-in, different release settings."""
        if (cfg.mc_level, cfg.variant, cfg.dt) != (self.cfg.mc_level, self.cfg.variant, self.cfg.dt):
            raise ConfigError("with_config cannot change the environment (mc_level, variant, dt)")
        return StrategyContext.build(cfg, self.env, self.baseline)

    def objective_met(self, y, day: int) -> bool:
        if self.box is not None:
            return self.box.contains(y[0], y[1], y[2])
        return y[2] < self.f_bound[day]

    def start_grid(self) -> tuple[int, ...]:
        grid = self.cfg.start_grid if self.cfg.start_grid is not None else default_start_grid(self.env, self.cfg.burn_in)
        for t0 in grid:
            if not self.cfg.burn_in <= t0 < self.env.n_days:
                raise ConfigError(f"start day {t0} outside [{self.cfg.burn_in}, {self.env.n_days})")
        return tuple(grid)


def build_context(cfg: ScanConfig, series: WeatherSeries, capacity: CapacityConfig | None = None,
                  baseline: list | None = None) -> StrategyContext:
    cap = replace(capacity or CapacityConfig(), mc_level=cfg.mc_level, variant=cfg.variant)
    return StrategyContext.build(cfg, build_environment(series, cap), baseline)


def run_strategy(t0: int, ctx: StrategyContext, keep_trace: bool = False) -> StrategyOutcome:
    """Weekly massive releases from day ``t0`` until the objective holds at a day boundary.

    The objective is tested at every day boundary before that day's release,
    so ``n_massive`` counts the releases made strictly before the stop day.
    """
    cfg, env = ctx.cfg, ctx.env
    if not 0 <= t0 < env.n_days:
        raise ConfigError(f"start day {t0} outside the environment window")
    stepper = SITStepper(env, cfg.rf, cfg.dt)
    A, M, F, _ = ctx.baseline[t0]
    y = (A, M, F, 0.0)
    trace = [y] if keep_trace else None
    n, d, bolus = 0, t0, cfg.massive_bolus
    reason = "window_end"
    met = False
    while d < env.n_days:
        if ctx.objective_met(y, d):
            met, reason = True, "met"
            break
        if (d - t0) % cfg.tau == 0:
            if n >= cfg.max_releases:
                reason = "max_releases"
                break
            y = (y[0], y[1], y[2], y[3] + bolus)
            n += 1
        y = stepper.advance(y, d)
        d += 1
        if trace is not None:
            trace.append(y)
    return StrategyOutcome(
        t0=t0, t0_date=str(env.dates[t0]), n_massive=n,
        stop_day=d if met else None, stop_date=str(env.dates[d]) if met else None,
        total_sterile_males=n * cfg.massive_rate * cfg.area, objective_met=met, reason=reason,
        stop_state=y, trace=np.array(trace) if trace is not None else None,
    )


_WORKER_CTX: StrategyContext | None = None


def _init_worker(ctx: StrategyContext):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _safe_run(t0: int, ctx: StrategyContext | None = None) -> StrategyOutcome:
    ctx = ctx or _WORKER_CTX
    try:
        return run_strategy(t0, ctx)
    except (NumericalError, ValueError) as exc:
        log.warning("start day %d failed: %s", t0, exc)
        return StrategyOutcome(t0, str(ctx.env.dates[t0]), 0, None, None, 0.0, False, f"error: {exc}")


def scan_start_dates(ctx: StrategyContext, jobs: int = 1) -> list[StrategyOutcome]:
    """One outcome per start day, ordered by start day; failures are recorded per entry."""
    grid = sorted(ctx.start_grid())
    if not grid:
        raise ConfigError("empty start grid")
    if jobs <= 1 or len(grid) < 2:
        return [_safe_run(t0, ctx) for t0 in grid]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
        out = list(pool.map(_safe_run, grid, chunksize=max(1, len(grid) // (4 * jobs))))
    return sorted(out, key=lambda o: o.t0)


@dataclass(frozen=True)
class SummaryRow:
    objective: str
    variant: str
    eps: float
    mc_level: float
    massive_rate: float
    area: float
    n_starts: int
    n_met: int
    mean_n_massive: float
    n_massive: int
    total_males: float


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    notes: list[str]

    def to_csv(self, path, header: list[str] | None = None):
        cols = [f for f in SummaryRow.__dataclass_fields__]
        with open(path, "w", newline="") as fh:
            for line in header or []:
                fh.write(f"# {line}\n")
            for note in self.notes:
                fh.write(f"# note: {note}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows:
                w.writerow([_fmt(v) for v in asdict(row).values()])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def summarize(results: Iterable[tuple[ScanConfig, Sequence[StrategyOutcome]]]) -> SummaryTable:
    """Mean release count per cell over the start dates that reached the objective.

    The mean is rounded half-up to whole releases and the total is that
    rounded count times the bolus, as in a release-planning table.
    """
    rows, notes = [], []
    for cfg, outcomes in results:
        met = [o for o in outcomes if o.objective_met]
        cell = f"{cfg.objective}/{cfg.variant} eps={cfg.eps} mc={cfg.mc_level} rate={cfg.massive_rate}"
        if not met:
            notes.append(f"{cell}: no start date reached the objective; row omitted")
            continue
        if len(met) < len(outcomes):
            notes.append(f"{cell}: {len(outcomes) - len(met)} of {len(outcomes)} start dates did not reach the objective")
        mean_n = float(np.mean([o.n_massive for o in met]))
        n = round_half_up(mean_n)
        rows.append(SummaryRow(cfg.objective, cfg.variant, cfg.eps, cfg.mc_level, cfg.massive_rate, cfg.area,
                               len(outcomes), len(met), mean_n, n, n * cfg.massive_rate * cfg.area))
    return SummaryTable(rows, notes)


def write_scan_csv(path, outcomes: Sequence[StrategyOutcome], header: list[str] | None = None):
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t0", "n_massive", "stop_date", "total_males", "objective_met"])
        for o in outcomes:
            w.writerow([o.t0_date, o.n_massive, o.stop_date or "", _fmt(float(o.total_sterile_males)),
                        str(o.objective_met).lower()])


@dataclass
class MaintenancePreview:
    """States after the massive phase; ``held`` tells whether the objective stayed satisfied daily."""

    days: np.ndarray
    states: np.ndarray
    held: bool
    first_exit_day: int | None
    mode: str


def maintenance_preview(outcome: StrategyOutcome, ctx: StrategyContext, horizon: int) -> MaintenancePreview:
    """Continue past the stop day with small releases (nuisance) or none ("massive and stop", epi)."""
    if not outcome.objective_met:
        raise ValueError("maintenance preview needs a run that reached its objective")
    cfg, env = ctx.cfg, ctx.env
    start = outcome.stop_day
    end = min(start + max(horizon, 0), env.n_days)
    mode = "small_releases" if cfg.objective == "nuisance" else "massive_and_stop"
    if end <= start:
        return MaintenancePreview(np.array([], dtype=int), np.empty((0, 4)), True, None, mode)
    stepper = SITStepper(env, cfg.rf, cfg.dt)
    bolus = cfg.small_bolus if mode == "small_releases" else 0.0
    y = outcome.stop_state
    days, states = [], []
    first_exit = None
    for d in range(start, end):
        if first_exit is None and not ctx.objective_met(y, d):
            first_exit = d
        if bolus and (d - outcome.t0) % cfg.tau == 0:
            y = (y[0], y[1], y[2], y[3] + bolus)
        days.append(d)
        states.append(y)
        y = stepper.advance(y, d)
    return MaintenancePreview(np.array(days), np.array(states), first_exit is None, first_exit, mode)


PRESET_OFFSPRING = 49.3


def mean_preset(offspring: float = PRESET_OFFSPRING, K: float | None = None, n_days: int = 7 * 400 + 7,
                capacity: CapacityConfig | None = None) -> Environment:
    """Constant environment whose rates give a basic offspring number of ``offspring``.

    The temperature is found by root-finding on the rate splines between
    15 and 25 degrees; K defaults to half-full breeding sites.
    """
    from scipy.optimize import brentq

    from .bio_params import basic_offspring, rates_at

    cap = capacity or CapacityConfig()
    T = brentq(lambda x: float(basic_offspring(rates_at(x))) - offspring, 15.0, 25.0, xtol=1e-12)
    if K is None:
        K = (1.0 - cap.mc_level) * (0.5 * cap.K_max + cap.K_0)
    return Environment.constant(rates_at(T), K, n_days, temp=T)


def preset_run(cfg: ScanConfig, env: Environment | None = None) -> StrategyOutcome:
    """Single run from the wild equilibrium of a constant environment (no burn-in needed)."""
    env = env or mean_preset(capacity=CapacityConfig(mc_level=cfg.mc_level))
    ctx = StrategyContext.build(replace(cfg, burn_in=0, start_grid=(0,)), env)
    return run_strategy(0, ctx)
