"""Entomological parameters of *Aedes albopictus* as functions of temperature.

Laboratory life-history measurements at 15, 20, 25, 30 and 35 degC are turned
into model rates (fecundity, maturation, mortalities) and interpolated over
temperature with natural cubic splines.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

SEX_RATIO = 0.5
T_MIN = 15.0
T_MAX = 35.0
KNOT_TEMPS = (15.0, 20.0, 25.0, 30.0, 35.0)
RATE_NAMES = ("phi", "gamma", "mu_A1", "mu_M", "mu_F")


@dataclass(frozen=True)
class LabTableRow:
    """One temperature column of the laboratory life-history table.

    Percentages are stored as proportions. ``tau_gono`` is ``None`` where no
    gonotrophic cycle was observed (15 degC).
    """

    temp: float
    r_viable: float
    N_eggs: float
    tau_gono: float | None
    tau_A: float
    s_A: float
    tau_M: float
    tau_F: float

    def __post_init__(self):
        for name in ("r_viable", "s_A"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} at {self.temp} degC is not a proportion")
        for name in ("tau_A", "tau_M", "tau_F", "tau_gono"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive, got {v} at {self.temp} degC")


LAB_TABLE: tuple[LabTableRow, ...] = (
    LabTableRow(15.0, 0.082, 0.0, None, 35.0, 0.500, 15.45, 19.65),
    LabTableRow(20.0, 0.669, 50.8, 8.1, 14.4, 0.775, 10.25, 15.15),
    LabTableRow(25.0, 0.492, 65.3, 3.1, 10.4, 0.763, 9.6, 15.3),
    LabTableRow(30.0, 0.514, 74.2, 3.9, 8.8, 0.675, 8.55, 16.9),
    LabTableRow(35.0, 0.100, 48.7, 1.3, 12.3, 0.025, 7.4, 10.0),
)

# Published rates at the knot temperatures, rounded to four decimals.
PUBLISHED_RATES: dict[str, tuple[float, ...]] = {
    "phi": (0.0, 4.1957, 10.3637, 9.7792, 3.7462),
    "mu_A1": (0.0198, 0.0177, 0.0260, 0.0447, 0.2999),
    "gamma": (0.0286, 0.0694, 0.0962, 0.1136, 0.0813),
    "mu_M": (0.0449, 0.0676, 0.0722, 0.0811, 0.0937),
    "mu_F": (0.0353, 0.0458, 0.0453, 0.0413, 0.0693),
}


@dataclass(frozen=True)
class EntoParams:
    """Rates of the mosquito model at one temperature (or one array of them).

    ``gamma`` is the aquatic-to-adult transition rate. Sterile males die at the
    wild-male rate, so ``mu_S`` mirrors ``mu_M``.
    """

    phi: float
    gamma: float
    mu_A1: float
    mu_M: float
    mu_F: float
    mu_S: float
    r: float = SEX_RATIO

    def with_(self, **changes) -> "EntoParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def derive_rates(row: LabTableRow, r: float = SEX_RATIO) -> EntoParams:
    """Convert a laboratory row to model rates.

    phi = r_viable * N_eggs / tau_gono, mu_A1 = -log(s_A)/tau_A,
    gamma = 1/tau_A and mu_{M,F} = log(2) / half-life.
    """
    if row.s_A <= 0:
        raise ValueError(f"aquatic survivorship must be > 0, got {row.s_A}")
    if row.tau_gono is None or row.N_eggs == 0:
        phi = 0.0
    else:
        phi = row.r_viable * row.N_eggs / row.tau_gono
    mu_M = math.log(2.0) / row.tau_M
    return EntoParams(
        phi=phi,
        gamma=1.0 / row.tau_A,
        mu_A1=-math.log(row.s_A) / row.tau_A,
        mu_M=mu_M,
        mu_F=math.log(2.0) / row.tau_F,
        mu_S=mu_M,
        r=r,
    )


def load_lab_table(path: str | Path) -> tuple[LabTableRow, ...]:
    """Read a laboratory table from CSV.

    Columns: ``temp,r_viable,N_eggs,tau_gono,tau_A,s_A,tau_M,tau_F``; proportions
    in [0, 1]; an empty ``tau_gono`` cell means no gonotrophic cycle.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        required = [f.name for f in fields(LabTableRow)]
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"lab table {path} is missing columns: {', '.join(missing)}")
        for rec in reader:
            gono = rec["tau_gono"].strip()
            rows.append(
                LabTableRow(
                    temp=float(rec["temp"]),
                    r_viable=float(rec["r_viable"]),
                    N_eggs=float(rec["N_eggs"]),
                    tau_gono=float(gono) if gono and gono.upper() != "NA" else None,
                    tau_A=float(rec["tau_A"]),
                    s_A=float(rec["s_A"]),
                    tau_M=float(rec["tau_M"]),
                    tau_F=float(rec["tau_F"]),
                )
            )
    rows.sort(key=lambda r: r.temp)
    return tuple(rows)


class RateSplines:
    """Natural cubic splines of each rate over the temperature grid.

    Temperatures outside the grid are clamped to its ends and every rate is
    floored at zero (the phi spline dips below zero just above 15 degC).
    """

    def __init__(self, temps: Sequence[float], knots: dict[str, Sequence[float]], r: float = SEX_RATIO):
        self.temps = np.asarray(temps, dtype=float)
        if np.any(np.diff(self.temps) <= 0):
            raise ValueError("knot temperatures must be strictly increasing")
        self.knots = {name: np.asarray(knots[name], dtype=float) for name in RATE_NAMES}
        self.r = r
        self._splines = {
            name: CubicSpline(self.temps, vals, bc_type="natural") for name, vals in self.knots.items()
        }

    @classmethod
    def default(cls) -> "RateSplines":
        return cls(KNOT_TEMPS, PUBLISHED_RATES)

    @classmethod
    def from_table(cls, rows: Sequence[LabTableRow]) -> "RateSplines":
        derived = [derive_rates(row) for row in rows]
        knots = {name: [getattr(d, name) for d in derived] for name in RATE_NAMES}
        return cls([row.temp for row in rows], knots)

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.temps[0]), float(self.temps[-1])

    def evaluate(self, name: str, T):
        lo, hi = self.t_range
        Tc = np.clip(np.asarray(T, dtype=float), lo, hi)
        out = np.maximum(self._splines[name](Tc), 0.0)
        return float(out) if out.ndim == 0 else out


def rates_at(T, splines: RateSplines | None = None) -> EntoParams:
    """Rates at temperature ``T`` (scalar or array), clamped to the knot range."""
    splines = splines or _default_splines()
    vals = {name: splines.evaluate(name, T) for name in RATE_NAMES}
    return EntoParams(mu_S=vals["mu_M"], r=splines.r, **vals)


_DEFAULT: RateSplines | None = None


def _default_splines() -> RateSplines:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = RateSplines.default()
    return _DEFAULT


def basic_offspring(ep: EntoParams):
    """Basic offspring number N = r phi gamma / ((gamma + mu_A1) mu_F)."""
    denom = (np.asarray(ep.gamma) + ep.mu_A1) * ep.mu_F
    if np.any(denom <= 0):
        raise ZeroDivisionError("gamma + mu_A1 and mu_F must be positive")
    return ep.r * ep.phi * ep.gamma / denom


def q_factor(ep: EntoParams, mu_A2):
    """Equilibrium male scale Q = (1-r) gamma (gamma + mu_A1) / (mu_A2 mu_M).

    The wild male equilibrium is M* = Q (N - 1).
    """
    if np.any(np.asarray(mu_A2) <= 0) or np.any(np.asarray(ep.mu_M) <= 0):
        raise ValueError("Q needs mu_A2 > 0 and mu_M > 0")
    return (1.0 - ep.r) * ep.gamma * (ep.gamma + ep.mu_A1) / (mu_A2 * ep.mu_M)
