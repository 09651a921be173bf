"""Sterile insect technique control of Aedes albopictus under daily weather forcing."""

from .bio_params import EntoParams, RateSplines, basic_offspring, rates_at
from .epi_risk import EpiParams, f_threshold, r_eff
from .equilibria import e1_min_box, release_thresholds, sit_equilibria, wild_equilibrium
from .errors import ConfigError, DataError, IntegrationError, NoEquilibriumError, NumericalError
from .population import ImpulseSchedule, ResidualFertility, SITStepper, integrate, rhs_sit
from .strategy import ScanConfig, run_strategy, scan_start_dates, summarize
from .weather import CapacityConfig, Environment, WeatherSeries, build_environment, synth_weather

__version__ = "0.1.0"
