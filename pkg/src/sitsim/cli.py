"""Command-line entry point: ``sitsim {weather,simulate,scan,equilibria}``.

A JSON config file supplies defaults and command-line flags override it.
Every output file starts with ``#`` header lines carrying the config hash,
and each run writes a ``manifest.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bio_params import rates_at
from .epi_risk import EpiParams, risk_table, write_risk_csv
from .equilibria import e1_min_box, write_equilibria_csv
from .errors import ConfigError, DataError, NumericalError
from .population import ImpulseSchedule, ResidualFertility, SITStepper
from .strategy import (
    ScanConfig, StrategyContext, initial_wild_state, mean_preset, scan_start_dates, summarize, wild_baseline,
    write_scan_csv,
)
from .weather import (
    VARIANTS, CapacityConfig, Environment, WeatherSeries, build_environment, canonical_variant, synth_weather,
)

log = logging.getLogger("sitsim")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
PRESETS = ("constant25", "mean")
DATA_DIR_ENV = "SITSIM_DATA_DIR"


@dataclass
class CapacitySection:
    K_max: float = 200_000.0
    K_0: float = 2_000.0
    evap_k: float = 1e-3
    H0: float | None = None


@dataclass
class ReleaseSection:
    objective: str = "nuisance"
    massive_rate: list[float] = field(default_factory=lambda: [6000.0])
    small_rate: float = 100.0
    area: float = 20.0
    tau: int = 7
    eps: list[float] = field(default_factory=lambda: [0.0])
    beta: float = 1.0
    mc_level: list[float] = field(default_factory=lambda: [0.0])
    start_grid: str = "mondays"
    max_releases: int = 400
    burn_in: int = 365


@dataclass
class SimulateSection:
    t0: int | None = None
    n_releases: int = 0
    days: int | None = None
    initial_fraction: float = 1.0


@dataclass
class RunConfig:
    weather_path: str | None = None
    synth: str | None = None
    preset: str | None = None
    preset_days: int = 1000
    seed: int | None = None
    variant: str = "full"
    capacity: CapacitySection = field(default_factory=CapacitySection)
    release: ReleaseSection = field(default_factory=ReleaseSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    epi: dict = field(default_factory=dict)
    out: str = "out"
    dt: float = 0.05
    jobs: int = 1
    all_variants: bool = False

    def to_dict(self) -> dict:
        """Settings that determine the outputs; the output directory and job count are left out."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("jobs")
        return d

    def hash(self) -> str:
        d = self.to_dict()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def epi_params(self) -> EpiParams:
        try:
            return EpiParams(**self.epi)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"epi: {exc}") from None


_SECTIONS = {"capacity": CapacitySection, "release": ReleaseSection, "simulate": SimulateSection}


def _as_list(v) -> list[float]:
    return [float(x) for x in v] if isinstance(v, (list, tuple)) else [float(v)]


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        if k in _SECTIONS and cls is RunConfig:
            v = _from_dict(_SECTIONS[k], v, k)
        elif cls is ReleaseSection and k in ("massive_rate", "eps", "mc_level"):
            v = _as_list(v)
        kw[k] = v
    return cls(**kw)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return _from_dict(RunConfig, data, "config")


def _csv_floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {s!r}") from None


def apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "weather", None):
        cfg.weather_path, cfg.synth, cfg.preset = args.weather, None, None
    if getattr(args, "synth", None):
        cfg.synth, cfg.weather_path, cfg.preset = args.synth, None, None
    if getattr(args, "preset", None):
        cfg.preset, cfg.weather_path, cfg.synth = args.preset, None, None
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    if getattr(args, "dt", None) is not None:
        cfg.dt = args.dt
    if getattr(args, "all_variants", False):
        cfg.all_variants = True
    rel = cfg.release
    if getattr(args, "objective", None):
        rel.objective = args.objective
    if getattr(args, "eps", None):
        rel.eps = _csv_floats(args.eps)
    if getattr(args, "mc", None):
        rel.mc_level = _csv_floats(args.mc)
    if getattr(args, "rate", None):
        rel.massive_rate = _csv_floats(args.rate)
    if getattr(args, "start_grid", None):
        rel.start_grid = args.start_grid
    sim = cfg.simulate
    for name in ("t0", "n_releases", "days"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(sim, name, v)
    return validate(cfg)


def validate(cfg: RunConfig) -> RunConfig:
    sources = [s for s in (cfg.weather_path, cfg.synth, cfg.preset) if s]
    if len(sources) != 1:
        raise ConfigError("exactly one of weather_path, synth or preset is required")
    if cfg.preset is not None and cfg.preset not in PRESETS:
        raise ConfigError(f"preset must be one of {PRESETS}")
    if cfg.synth is not None:
        seed, days = parse_synth(cfg.synth)
        if cfg.seed is not None and cfg.seed != seed:
            raise ConfigError("seed disagrees with the synth spec")
        cfg.seed = seed
    try:
        cfg.variant = canonical_variant(cfg.variant)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if not cfg.release.eps or not cfg.release.mc_level or not cfg.release.massive_rate:
        raise ConfigError("eps, mc and rate lists must not be empty")
    cfg.epi_params()
    return cfg


def parse_synth(spec: str) -> tuple[int, int]:
    try:
        seed, days = spec.split(":")
        seed, days = int(seed), int(days)
    except ValueError:
        raise ConfigError(f"--synth expects SEED:DAYS, got {spec!r}") from None
    if days < 1:
        raise ConfigError("--synth needs at least one day")
    return seed, days


def resolve_data_path(path: str) -> Path:
    p = Path(path)
    if not p.is_absolute() and not p.exists() and os.environ.get(DATA_DIR_ENV):
        p = Path(os.environ[DATA_DIR_ENV]) / p
    return p


def load_weather(cfg: RunConfig) -> WeatherSeries | None:
    if cfg.synth is not None:
        seed, days = parse_synth(cfg.synth)
        return synth_weather(seed, days)
    if cfg.weather_path is not None:
        p = resolve_data_path(cfg.weather_path)
        if not p.exists():
            raise DataError(f"weather file not found: {p}")
        return WeatherSeries.from_csv(p)
    return None


def capacity_config(cfg: RunConfig, mc_level: float = 0.0, variant: str | None = None) -> CapacityConfig:
    c = cfg.capacity
    try:
        return CapacityConfig(K_max=c.K_max, K_0=c.K_0, evap_k=c.evap_k, mc_level=mc_level,
                              variant=variant or cfg.variant, H0=c.H0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def make_environment(cfg: RunConfig, series: WeatherSeries | None, mc_level: float = 0.0,
                     variant: str | None = None) -> Environment:
    cap = capacity_config(cfg, mc_level, variant)
    if series is not None:
        return build_environment(series, cap)
    if cfg.preset == "constant25":
        return Environment.constant(rates_at(25.0), (1.0 - mc_level) * (cap.K_max + cap.K_0), cfg.preset_days)
    return mean_preset(capacity=cap, n_days=cfg.preset_days)


class Outputs:
    """Writes files under the output directory and records them for the manifest."""

    def __init__(self, cfg: RunConfig, command: str, series: WeatherSeries | None):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.command = command
        self.checksum = series.checksum() if series is not None else None
        self.header = [f"sitsim {__version__} {command}", f"config_hash: {cfg.hash()}"]
        if self.checksum:
            self.header.append(f"data_sha256: {self.checksum}")

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def manifest(self, extra: dict | None = None):
        doc = {
            "command": self.command, "version": __version__, "config_hash": self.cfg.hash(),
            "config": self.cfg.to_dict(), "data_sha256": self.checksum, "seed": self.cfg.seed,
            "evap_k": self.cfg.capacity.evap_k, "files": sorted(self.files),
        }
        doc.update(extra or {})
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _num(v: float) -> str:
    return repr(float(v))


def cmd_weather(cfg: RunConfig) -> int:
    series = load_weather(cfg)
    if series is None:
        raise ConfigError("the weather command needs weather data, not a preset")
    out = Outputs(cfg, "weather", series)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        env = make_environment(cfg, series, cfg.release.mc_level[0])
    for w in caught:
        log.warning("%s", w.message)
    meta = env.meta
    header = out.header + [f"evap_k: {meta['evap_k']!r}", f"H0: {meta['H0']!r}", f"variant: {env.variant}"]
    with open(out.path("weather_derived.csv"), "w") as fh:
        fh.writelines(f"# {h}\n" for h in header)
        fh.write("date,H,K,mu_A2\n")
        for i in range(env.n_days):
            fh.write(f"{env.dates[i]},{_num(env.H[i])},{_num(env.K[i])},{_num(env.mu_A2[i])}\n")
    out.manifest({"H0": meta["H0"], "H_max": meta["H_max"], "degenerate_rain": bool(meta["degenerate_rain"])})
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    series = load_weather(cfg)
    out = Outputs(cfg, "simulate", series)
    rel, sim = cfg.release, cfg.simulate
    env = make_environment(cfg, series, rel.mc_level[0])
    days = env.n_days if sim.days is None else sim.days
    if not 0 < days <= env.n_days:
        raise ConfigError(f"simulate.days must lie in [1, {env.n_days}]")
    if sim.initial_fraction < 0:
        raise ConfigError("initial_fraction must be non-negative")
    A, M, F, _ = initial_wild_state(env)
    y = tuple(sim.initial_fraction * v for v in (A, M, F)) + (0.0,)
    rf = ResidualFertility(rel.eps[0], rel.beta)
    schedule = None
    if sim.n_releases > 0:
        t0 = sim.t0 if sim.t0 is not None else 0
        schedule = ImpulseSchedule(t0=t0, bolus=rel.massive_rate[0] * rel.area, tau=rel.tau, n_releases=sim.n_releases)
    releases = {int(t): a for t, a in schedule.events(0, days)} if schedule else {}
    stepper = SITStepper(env, rf, cfg.dt)
    states = [y]
    for d in range(days):
        if d in releases:
            y = (y[0], y[1], y[2], y[3] + releases[d])
        y = stepper.advance(y, d)
        states.append(y)
    arr = np.array(states)
    with open(out.path("trajectory.csv"), "w") as fh:
        fh.writelines(f"# {h}\n" for h in out.header)
        fh.write("t,date,A,M,F,M_S\n")
        for d, row in enumerate(arr):
            date = env.dates[0] + np.timedelta64(d, "D")
            fh.write(f"{d},{date}," + ",".join(_num(v) for v in row) + "\n")
    table = risk_table(env.epi_temp[:days], env.mu_F[:days], arr[:days, 2], cfg.epi_params())
    write_risk_csv(out.path("epi_risk.csv"), env.dates[:days], table, out.header)
    out.manifest({"final_state": [float(v) for v in arr[-1]]})
    return EXIT_OK


def parse_start_grid(spec: str, env: Environment, burn_in: int) -> tuple[int, ...] | None:
    spec = spec.strip()
    if spec == "mondays":
        return None
    if spec.startswith("stride:"):
        try:
            stride = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad start grid {spec!r}") from None
        if stride < 1:
            raise ConfigError("start-grid stride must be >= 1")
        return tuple(range(burn_in, env.n_days, stride))
    try:
        return tuple(env.day_index(s.strip()) for s in spec.split(",") if s.strip())
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad start grid {spec!r}: {exc}") from None


def _tag(v: float) -> str:
    return f"{v:g}"


def cmd_scan(cfg: RunConfig) -> int:
    series = load_weather(cfg)
    out = Outputs(cfg, "scan", series)
    rel = cfg.release
    variants = VARIANTS if cfg.all_variants else (cfg.variant,)
    summaries = {}
    for variant in variants:
        results = []
        for mc in rel.mc_level:
            env = make_environment(cfg, series, mc, variant)
            baseline = wild_baseline(env, cfg.dt)
            grid = parse_start_grid(rel.start_grid, env, rel.burn_in)
            for eps in rel.eps:
                for rate in rel.massive_rate:
                    try:
                        sc = ScanConfig(objective=rel.objective, massive_rate=rate, small_rate=rel.small_rate,
                                        area=rel.area, tau=rel.tau, eps=eps, beta=rel.beta, mc_level=mc,
                                        variant=variant, start_grid=grid, max_releases=rel.max_releases,
                                        burn_in=rel.burn_in, dt=cfg.dt, epi=cfg.epi_params())
                    except ValueError as exc:
                        raise ConfigError(str(exc)) from None
                    ctx = StrategyContext.build(sc, env, baseline)
                    outcomes = scan_start_dates(ctx, cfg.jobs)
                    name = f"scan_{variant}_{sc.objective}_eps{_tag(eps)}_mc{_tag(mc)}_rate{_tag(rate)}.csv"
                    write_scan_csv(out.path(name), outcomes, out.header)
                    results.append((sc, outcomes))
        table = summarize(results)
        for note in table.notes:
            log.warning("%s", note)
        name = f"summary_{variant}_{rel.objective}.csv"
        table.to_csv(out.path(name), out.header)
        summaries[variant] = [dataclasses.asdict(r) for r in table.rows]
    out.manifest({"summary": summaries})
    return EXIT_OK


def cmd_equilibria(cfg: RunConfig) -> int:
    series = load_weather(cfg)
    out = Outputs(cfg, "equilibria", series)
    rel = cfg.release
    env = make_environment(cfg, series, rel.mc_level[0])
    small = rel.small_rate * rel.area
    boxes = {}
    with open(out.path("e1_min.csv"), "w") as fh:
        fh.writelines(f"# {h}\n" for h in out.header)
        fh.write("eps,A,M,F,days_used,days_skipped\n")
        for eps in rel.eps:
            rf = ResidualFertility(eps, rel.beta)
            write_equilibria_csv(out.path(f"equilibria_eps{_tag(eps)}.csv"), env, rf, small, rel.tau, out.header)
            box = e1_min_box(env, rf, small, rel.tau)
            fh.write(f"{eps!r},{_num(box.A)},{_num(box.M)},{_num(box.F)},{box.days_used},{box.days_skipped}\n")
            boxes[repr(eps)] = list(box.triple)
    out.manifest({"e1_min": boxes})
    return EXIT_OK


COMMANDS = {"weather": cmd_weather, "simulate": cmd_simulate, "scan": cmd_scan, "equilibria": cmd_equilibria}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sitsim", description="SIT release planning for Aedes albopictus")
    p.add_argument("--version", action="version", version=f"sitsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        src = s.add_mutually_exclusive_group()
        src.add_argument("--weather", help="daily weather CSV (date,rain_mm,temp_c,humidity_pct)")
        src.add_argument("--synth", metavar="SEED:DAYS", help="synthetic seasonal weather")
        src.add_argument("--preset", choices=PRESETS, help="constant environment instead of weather")
        s.add_argument("--variant", help="full | mean | temp | rain")
        s.add_argument("--objective", choices=["nuisance", "epi", "epi_risk"])
        s.add_argument("--eps", help="residual fertility, comma list")
        s.add_argument("--mc", help="mechanical-control level, comma list")
        s.add_argument("--rate", help="massive release rate per ha, comma list")
        s.add_argument("--start-grid", dest="start_grid", help="mondays | stride:N | ISO dates, comma list")
        s.add_argument("--jobs", type=int)
        s.add_argument("--dt", type=float)
        s.add_argument("--out", help="output directory")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "scan":
            s.add_argument("--all-variants", dest="all_variants", action="store_true")
        if name == "simulate":
            s.add_argument("--t0", type=int, help="first release day (index)")
            s.add_argument("--n-releases", dest="n_releases", type=int)
            s.add_argument("--days", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = apply_flags(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
