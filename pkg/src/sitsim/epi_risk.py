"""Temperature-dependent dengue transmission and the effective reproduction number.

R_eff(t) = nu_m/(nu_m + mu_F) * B^2 beta_mh beta_hm / (mu_F (eta_h + mu_h)) * F_S/N_h

The epidemiological stop rule asks for R_eff below a target (0.5), i.e. for the
wild female population to drop under :func:`f_threshold`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EpiParams:
    B: float = 0.2
    mu_h: float = 1.0 / (365.0 * 78.0)
    eta_h: float = 1.0 / 7.0
    N_h: float = 2000.0
    lactin_alpha: float = 0.20404
    lactin_T_max: float = 37.354
    lactin_delta_T: float = 4.89694
    beta_h: float = 18.9871
    nu_a: float = -0.001
    nu_b: float = 0.0670
    nu_c: float = -0.866
    target: float = 0.5

    def __post_init__(self):
        if self.N_h <= 0:
            raise ValueError("human population N_h must be positive")
        for name in ("B", "mu_h", "eta_h", "lactin_alpha", "lactin_T_max", "lactin_delta_T", "beta_h", "target"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_EPI = EpiParams()


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def beta_mh(T, epi: EpiParams = DEFAULT_EPI):
    """Mosquito-to-human transmission probability (Lactin-1 curve, floored at 0)."""
    T = np.asarray(T, dtype=float)
    a, Tm, dT = epi.lactin_alpha, epi.lactin_T_max, epi.lactin_delta_T
    val = np.exp(a * T) - np.exp(a * Tm - (Tm - T) / dT)
    return _out(np.maximum(val, 0.0))


def beta_hm(T, epi: EpiParams = DEFAULT_EPI):
    """Human-to-mosquito transmission probability T^7 / (T^7 + beta_h^7); 0 for T <= 0."""
    T = np.asarray(T, dtype=float)
    Tp = np.where(T > 0, T, 0.0)
    # ratio form avoids overflow of T**7 for large T
    val = np.where(T > 0, 1.0 / (1.0 + (epi.beta_h / np.where(T > 0, Tp, 1.0)) ** 7), 0.0)
    return _out(val)


def nu_m(T, epi: EpiParams = DEFAULT_EPI):
    """Extrinsic incubation rate a T^2 + b T + c, floored at 0."""
    T = np.asarray(T, dtype=float)
    return _out(np.maximum(epi.nu_a * T**2 + epi.nu_b * T + epi.nu_c, 0.0))


@dataclass(frozen=True)
class EpiRates:
    """Transmission coefficients frozen at one temperature."""

    B: float
    beta_mh: float
    beta_hm: float
    nu_m: float
    eta_h: float
    mu_h: float
    N_h: float


def epi_rates(T: float, epi: EpiParams = DEFAULT_EPI) -> EpiRates:
    return EpiRates(epi.B, beta_mh(T, epi), beta_hm(T, epi), nu_m(T, epi), epi.eta_h, epi.mu_h, epi.N_h)


def _transmission_factor(T, mu_F, epi: EpiParams):
    """R_eff per susceptible female; 0 wherever incubation is impossible."""
    nu = np.asarray(nu_m(T, epi))
    mu_F = np.asarray(mu_F, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        incub = np.where(nu > 0, nu / (nu + mu_F), 0.0)
        trans = epi.B**2 * np.asarray(beta_mh(T, epi)) * np.asarray(beta_hm(T, epi)) / (mu_F * (epi.eta_h + epi.mu_h))
    return incub * trans / epi.N_h


def r_eff(F_S, T, mu_F, epi: EpiParams = DEFAULT_EPI):
    """Effective reproduction number for ``F_S`` susceptible females at temperature ``T``."""
    if np.any(np.asarray(mu_F) <= 0):
        raise ValueError("mu_F must be positive")
    return _out(_transmission_factor(T, mu_F, epi) * np.asarray(F_S, dtype=float))


def r0_sit_squared(F_S_star, T, mu_F, epi: EpiParams = DEFAULT_EPI):
    """Squared SIT basic reproduction number at a disease-free female level ``F_S_star``.

    Written with the two half-cycle factors kept apart; algebraically equal to
    :func:`r_eff` evaluated at the same female count.
    """
    nu, bmh, bhm = nu_m(T, epi), beta_mh(T, epi), beta_hm(T, epi)
    if nu <= 0:
        return 0.0
    mosquito_to_human = epi.B * bmh / mu_F
    human_to_mosquito = epi.B * bhm / (epi.eta_h + epi.mu_h)
    return nu / (nu + mu_F) * mosquito_to_human * human_to_mosquito * F_S_star / epi.N_h


def f_threshold(T, mu_F, epi: EpiParams = DEFAULT_EPI):
    """Female count below which R_eff < ``epi.target``; ``inf`` when transmission is impossible."""
    factor = np.asarray(_transmission_factor(T, mu_F, epi))
    with np.errstate(divide="ignore"):
        bound = np.where(factor > 0, epi.target / np.where(factor > 0, factor, 1.0), np.inf)
    return _out(bound)


def risk_table(temps, mu_F, F, epi: EpiParams = DEFAULT_EPI) -> dict[str, np.ndarray]:
    """Daily columns ``beta_mh, beta_hm, nu_m, F_threshold, R_eff`` for export."""
    temps = np.asarray(temps, dtype=float)
    return {
        "beta_mh": np.atleast_1d(beta_mh(temps, epi)),
        "beta_hm": np.atleast_1d(beta_hm(temps, epi)),
        "nu_m": np.atleast_1d(nu_m(temps, epi)),
        "F_threshold": np.atleast_1d(f_threshold(temps, mu_F, epi)),
        "R_eff": np.atleast_1d(r_eff(F, temps, mu_F, epi)),
    }


def write_risk_csv(path, dates, table: dict[str, np.ndarray], header: list[str] | None = None):
    cols = ("beta_mh", "beta_hm", "nu_m", "F_threshold", "R_eff")
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date",) + cols)
        for i, d in enumerate(dates):
            w.writerow([str(d)] + [repr(float(table[c][i])) for c in cols])
