"""Daily weather ingestion, breeding-site water balance and carrying capacity.

The rainfall-driven water balance H(t) sets the larval carrying capacity
K(t) = K_max H(t)/H_max + K_0, from which the density-dependent aquatic death
rate mu_A2(t) follows. Four weather-model variants are supported:

``full``             temperature-dependent rates, rainfall-driven K
``constant_mean``    every rate and K replaced by its window mean
``temperature_only`` temperature-dependent rates, K piecewise-linear in temperature
``rainfall_only``    window-mean rates, rainfall-driven K
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bio_params import EntoParams, RATE_NAMES, RateSplines, rates_at
from .errors import DataError

log = logging.getLogger(__name__)

VARIANTS = ("full", "constant_mean", "temperature_only", "rainfall_only")
VARIANT_ALIASES = {
    "full": "full",
    "mean": "constant_mean",
    "constant_mean": "constant_mean",
    "temp": "temperature_only",
    "temperature_only": "temperature_only",
    "rain": "rainfall_only",
    "rainfall_only": "rainfall_only",
}
WEATHER_COLUMNS = ("date", "rain_mm", "temp_c", "humidity_pct")
DEFAULT_EVAP_K = 1e-3

# temperature-only capacity: (degC, fraction of K_max)
TEMP_CAPACITY_NODES = ((15.0, 0.1), (27.0, 1.0), (35.0, 0.75))


def canonical_variant(name: str) -> str:
    try:
        return VARIANT_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown weather-model variant {name!r}; expected one of {sorted(VARIANT_ALIASES)}")


@dataclass(frozen=True, eq=False)
class WeatherSeries:
    """Contiguous daily weather records."""

    dates: np.ndarray
    rain: np.ndarray
    temp: np.ndarray
    humidity: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        object.__setattr__(self, "dates", dates)
        for name in ("rain", "temp", "humidity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(dates)
        if not (len(self.rain) == len(self.temp) == len(self.humidity) == n):
            raise DataError("weather columns have different lengths")
        if n > 1 and np.any(np.diff(dates).astype(int) != 1):
            gap = int(np.argmax(np.diff(dates).astype(int) != 1))
            raise DataError(f"weather series is not a contiguous daily sequence after {dates[gap]}")
        if np.any(~np.isfinite(self.rain)) or np.any(~np.isfinite(self.temp)) or np.any(~np.isfinite(self.humidity)):
            raise DataError("weather series contains non-finite values")
        if np.any(self.rain < 0):
            raise DataError(f"negative rainfall on {dates[np.argmax(self.rain < 0)]}")
        bad = (self.humidity < 0) | (self.humidity > 100)
        if np.any(bad):
            raise DataError(f"humidity outside [0, 100] on {dates[np.argmax(bad)]}")

    def __len__(self):
        return len(self.dates)

    @property
    def start(self) -> dt.date:
        return self.dates[0].astype(dt.date)

    def day_index(self, date) -> int:
        i = int((np.datetime64(date, "D") - self.dates[0]).astype(int))
        if not 0 <= i < len(self):
            raise IndexError(f"{date} outside the weather window {self.dates[0]}..{self.dates[-1]}")
        return i

    def slice(self, start: int, stop: int) -> "WeatherSeries":
        return WeatherSeries(self.dates[start:stop], self.rain[start:stop], self.temp[start:stop], self.humidity[start:stop])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(WEATHER_COLUMNS)
        for d, r, t, h in zip(self.dates, self.rain, self.temp, self.humidity):
            w.writerow([str(d), repr(float(r)), repr(float(t)), repr(float(h))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def checksum(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()

    @classmethod
    def from_csv(cls, path) -> "WeatherSeries":
        """Read ``date,rain_mm,temp_c,humidity_pct`` rows; errors carry line numbers."""
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith("#")]
        if not body:
            raise DataError(f"{path}: empty weather file")
        header_line, header = body[0]
        cols = [c.strip() for c in next(csv.reader([header]))]
        missing = [c for c in WEATHER_COLUMNS if c not in cols]
        if missing:
            raise DataError(f"{path}:{header_line}: missing column(s) {', '.join(missing)}")
        idx = {c: cols.index(c) for c in WEATHER_COLUMNS}
        dates, rain, temp, hum = [], [], [], []
        for lineno, ln in body[1:]:
            rec = next(csv.reader([ln]))
            try:
                dates.append(np.datetime64(dt.date.fromisoformat(rec[idx["date"]].strip()), "D"))
                rain.append(float(rec[idx["rain_mm"]]))
                temp.append(float(rec[idx["temp_c"]]))
                hum.append(float(rec[idx["humidity_pct"]]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row {ln!r} ({exc})") from None
        if not dates:
            raise DataError(f"{path}: no data rows")
        return cls(np.array(dates), rain, temp, hum)


def evaporation(temp, humidity, evap_k: float = DEFAULT_EVAP_K):
    """Daily evaporation k (25 + T^2)(100 - Hum), same unit as rainfall."""
    hum = np.asarray(humidity, dtype=float)
    if np.any(hum < 0) or np.any(hum > 100):
        raise ValueError("humidity must lie in [0, 100]")
    out = evap_k * (25.0 + np.asarray(temp, dtype=float) ** 2) * (100.0 - hum)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class WaterBalance:
    """Water available for breeding sites.

    ``H`` has one more entry than the series: ``H[t]`` is the water at the start
    of day ``t`` and ``H[-1]`` the water after the last day.
    """

    H: np.ndarray
    H_max: float
    H0: float
    evap_k: float

    @property
    def daily(self) -> np.ndarray:
        return self.H[:-1]


def water_balance(series: WeatherSeries, H0: float | None = None, evap_k: float = DEFAULT_EVAP_K) -> WaterBalance:
    """Run H(t+1) = clamp(H(t) + Rain(t) - Evap(t), 0, H_max) day by day.

    ``H_max`` is the largest daily rainfall over the whole series; ``H0``
    defaults to ``H_max / 2``.
    """
    n = len(series)
    if n == 0:
        raise DataError("empty weather series")
    H_max = float(series.rain.max())
    if H0 is None:
        H0 = 0.5 * H_max
    if not 0.0 <= H0 <= H_max:
        raise ValueError(f"initial water H0={H0} must lie in [0, H_max={H_max}]")
    delta = series.rain - evaporation(series.temp, series.humidity, evap_k)
    H = np.empty(n + 1)
    H[0] = H0
    h = float(H0)
    for t in range(n):
        h = min(max(h + delta[t], 0.0), H_max)
        H[t + 1] = h
    return WaterBalance(H=H, H_max=H_max, H0=float(H0), evap_k=evap_k)


@dataclass(frozen=True)
class CapacityConfig:
    K_max: float = 20 * 10_000
    K_0: float = 20 * 100
    evap_k: float = DEFAULT_EVAP_K
    mc_level: float = 0.0
    variant: str = "full"
    H0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.K_max <= 0 or self.K_0 <= 0:
            raise ValueError("K_max and K_0 must be positive")
        if not 0.0 <= self.mc_level < 1.0:
            raise ValueError(f"mechanical-control level must lie in [0, 1), got {self.mc_level}")
        if self.evap_k < 0:
            raise ValueError("evap_k must be non-negative")


def temperature_capacity(temps, K_max: float) -> np.ndarray:
    """K_max-scaled piecewise-linear capacity in temperature (clamped at the ends)."""
    xs = [x for x, _ in TEMP_CAPACITY_NODES]
    ys = [f * K_max for _, f in TEMP_CAPACITY_NODES]
    return np.interp(np.asarray(temps, dtype=float), xs, ys)


def carrying_capacity(wb: WaterBalance, cfg: CapacityConfig, temps) -> np.ndarray:
    """Daily carrying capacity for the configured variant.

    Mechanical control scales the whole capacity, K -> (1 - mc) K.
    """
    temps = np.asarray(temps, dtype=float)
    H = wb.daily
    if len(H) != len(temps):
        raise ValueError("water balance and temperature series cover different day ranges")
    keep = 1.0 - cfg.mc_level
    if cfg.variant == "temperature_only":
        return keep * (temperature_capacity(temps, cfg.K_max) + cfg.K_0)
    if wb.H_max <= 0:
        warnings.warn("all-zero rainfall window: carrying capacity falls back to K_0", RuntimeWarning, stacklevel=2)
        K = np.full(len(H), keep * cfg.K_0)
    else:
        K = keep * (cfg.K_max * H / wb.H_max + cfg.K_0)
    if cfg.variant == "constant_mean":
        K = np.full(len(H), K.mean())
    return K


def density_death_rate(K, ep: EntoParams):
    """mu_A2 = r gamma phi / (mu_F K), so that the aquatic equilibrium is (1 - 1/N) K."""
    K = np.asarray(K, dtype=float)
    if np.any(K <= 0):
        raise ValueError("carrying capacity must be positive")
    out = ep.r * ep.gamma * ep.phi / (ep.mu_F * K)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class Environment:
    """Day-indexed model coefficients, held constant within each day.

    ``epi_temp`` is the temperature fed to the dengue transmission functions;
    it is the daily mean for the temperature-driven variants and the window
    mean otherwise.
    """

    dates: np.ndarray
    epi_temp: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    mu_A1: np.ndarray
    mu_M: np.ndarray
    mu_F: np.ndarray
    mu_S: np.ndarray
    r: np.ndarray
    K: np.ndarray
    mu_A2: np.ndarray
    H: np.ndarray | None = None
    variant: str = "full"
    meta: dict = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def ep(self) -> EntoParams:
        return EntoParams(self.phi, self.gamma, self.mu_A1, self.mu_M, self.mu_F, self.mu_S, self.r)

    def ep_at(self, day: int) -> EntoParams:
        return EntoParams(
            float(self.phi[day]), float(self.gamma[day]), float(self.mu_A1[day]),
            float(self.mu_M[day]), float(self.mu_F[day]), float(self.mu_S[day]), float(self.r[day]),
        )

    def coeff_rows(self) -> list[tuple[float, ...]]:
        """Per-day ``(phi, gamma, mu_A1, mu_A2, mu_M, mu_F, mu_S, r)`` as plain floats."""
        return list(zip(*(a.tolist() for a in (
            self.phi, self.gamma, self.mu_A1, self.mu_A2, self.mu_M, self.mu_F, self.mu_S, self.r))))

    def day_index(self, date) -> int:
        i = int((np.datetime64(date, "D") - self.dates[0]).astype(int))
        if not 0 <= i < self.n_days:
            raise IndexError(f"{date} outside the environment window")
        return i

    @classmethod
    def constant(cls, ep: EntoParams, K: float, n_days: int, temp: float = 25.0,
                 start="2000-01-01", mu_A2: float | None = None) -> "Environment":
        """Time-invariant environment, for preset runs and equilibrium checks."""
        full = lambda v: np.full(n_days, float(v))
        if mu_A2 is None:
            mu_A2 = density_death_rate(K, ep)
        dates = np.datetime64(start, "D") + np.arange(n_days)
        return cls(
            dates=dates, epi_temp=full(temp), phi=full(ep.phi), gamma=full(ep.gamma), mu_A1=full(ep.mu_A1),
            mu_M=full(ep.mu_M), mu_F=full(ep.mu_F), mu_S=full(ep.mu_S), r=full(ep.r),
            K=full(K), mu_A2=full(mu_A2), variant="constant", meta={"K": float(K), "temp": float(temp)},
        )


def build_environment(series: WeatherSeries, cfg: CapacityConfig | None = None,
                      splines: RateSplines | None = None) -> Environment:
    cfg = cfg or CapacityConfig()
    wb = water_balance(series, cfg.H0, cfg.evap_k)
    K = carrying_capacity(wb, cfg, series.temp)
    ep = rates_at(series.temp, splines)
    n = len(series)
    if cfg.variant in ("constant_mean", "rainfall_only"):
        rates = {name: np.full(n, float(np.mean(getattr(ep, name)))) for name in RATE_NAMES}
        epi_temp = np.full(n, float(series.temp.mean()))
    else:
        rates = {name: np.asarray(getattr(ep, name), dtype=float) for name in RATE_NAMES}
        epi_temp = series.temp.copy()
    ep_arr = EntoParams(mu_S=rates["mu_M"], r=np.full(n, ep.r), **rates)
    mu_A2 = density_death_rate(K, ep_arr)
    meta = {
        "variant": cfg.variant, "evap_k": cfg.evap_k, "H0": wb.H0, "H_max": wb.H_max,
        "K_max": cfg.K_max, "K_0": cfg.K_0, "mc_level": cfg.mc_level,
        "degenerate_rain": wb.H_max <= 0,
    }
    return Environment(
        dates=series.dates.copy(), epi_temp=epi_temp, phi=ep_arr.phi, gamma=ep_arr.gamma, mu_A1=ep_arr.mu_A1,
        mu_M=ep_arr.mu_M, mu_F=ep_arr.mu_F, mu_S=ep_arr.mu_S, r=ep_arr.r, K=K, mu_A2=mu_A2,
        H=wb.daily.copy(), variant=cfg.variant, meta=meta,
    )


@dataclass(frozen=True)
class ClimateProfile:
    """Seasonal climate for the synthetic generator.

    Defaults mimic a southern-hemisphere tropical site: hot wet summer peaking
    in February, cool dry winter around August.
    """

    temp_mean: float = 21.0
    temp_amplitude: float = 2.5
    peak_day: int = 40
    temp_noise_frac: float = 0.15
    rain_prob_wet: float = 0.6
    rain_prob_dry: float = 0.22
    rain_mean_wet: float = 22.0
    rain_mean_dry: float = 7.0
    hum_dry: float = 77.0
    hum_wet: float = 86.0
    hum_noise: float = 3.0
    season_sharpness: float = 2.0


def season_weight(doy, profile: ClimateProfile = ClimateProfile()) -> np.ndarray:
    """1 at the wet-season peak, 0 at the driest point of the year."""
    c = 0.5 * (1.0 + np.cos(2.0 * np.pi * (np.asarray(doy, dtype=float) - profile.peak_day) / 365.25))
    return c ** profile.season_sharpness


def synth_weather(seed: int, days: int, profile: ClimateProfile | None = None, start="2009-01-01") -> WeatherSeries:
    """Deterministic synthetic daily weather with a sinusoidal year and a wet season."""
    if days < 1:
        raise ValueError("days must be >= 1")
    profile = profile or ClimateProfile()
    rng = np.random.default_rng(seed)
    dates = np.datetime64(start, "D") + np.arange(days)
    doy = (dates - dates.astype("datetime64[Y]")).astype(int)
    phase = 2.0 * np.pi * (doy - profile.peak_day) / 365.25
    amp = profile.temp_amplitude
    temp = profile.temp_mean + amp * np.cos(phase) + amp * profile.temp_noise_frac * rng.standard_normal(days)
    w = season_weight(doy, profile)
    p_rain = profile.rain_prob_dry + (profile.rain_prob_wet - profile.rain_prob_dry) * w
    mean_rain = profile.rain_mean_dry + (profile.rain_mean_wet - profile.rain_mean_dry) * w
    wet = rng.random(days) < p_rain
    rain = np.where(wet, rng.exponential(1.0, days) * mean_rain, 0.0)
    hum = profile.hum_dry + (profile.hum_wet - profile.hum_dry) * w + profile.hum_noise * rng.standard_normal(days)
    hum = np.clip(hum + np.where(wet, 4.0, 0.0), 50.0, 100.0)
    return WeatherSeries(dates, np.round(rain, 3), np.round(temp, 3), np.round(hum, 2))
