"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line with its runtime."""

import math
import time

import numpy as np
import pytest

from sitsim.bio_params import KNOT_TEMPS, LAB_TABLE, RATE_NAMES, basic_offspring, derive_rates, q_factor, rates_at
from sitsim.epi_risk import beta_hm, beta_mh, f_threshold, nu_m, r_eff
from sitsim.equilibria import discriminant, release_thresholds, sit_equilibria, wild_equilibrium
from sitsim.population import NO_RF, ImpulseSchedule, ResidualFertility, integrate, rhs_sit
from sitsim.strategy import ScanConfig, build_context, preset_run, scan_start_dates, summarize
from sitsim.weather import CapacityConfig, Environment, build_environment, density_death_rate, synth_weather

RESULTS: list[str] = []

PUBLISHED = {
    "phi": (0.0, 4.1957, 10.3637, 9.7792, 3.7462),
    "mu_A1": (0.0198, 0.0177, 0.0260, 0.0447, 0.2999),
    "gamma": (0.0286, 0.0694, 0.0962, 0.1136, 0.0813),
    "mu_M": (0.0449, 0.0676, 0.0722, 0.0811, 0.0937),
    "mu_F": (0.0353, 0.0458, 0.0453, 0.0413, 0.0693),
}
PRESET_N_MASSIVE = 44  # first computed value for eps=0, no mechanical control, 6000/ha


@pytest.fixture
def verdict(capsys):
    start = time.perf_counter()

    def _verdict(number: int, title: str, ok: bool, detail: str, budget: float | None = None):
        elapsed = time.perf_counter() - start
        in_time = budget is None or elapsed < budget
        passed = bool(ok) and in_time
        limit = f" (budget {budget:g} s)" if budget else ""
        line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'} {title}: {detail}; {elapsed:.2f} s{limit}"
        RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, detail
        assert in_time, f"runtime {elapsed:.1f} s exceeds {budget} s"

    return _verdict


def fertile_knots():
    return [T for T in KNOT_TEMPS if rates_at(T).phi > 0]


def test_01_rate_table_round_trip(verdict):
    worst = 0.0
    for i, row in enumerate(LAB_TABLE):
        ep = derive_rates(row)
        for name in RATE_NAMES:
            worst = max(worst, abs(getattr(ep, name) - PUBLISHED[name][i]))
    verdict(1, "rate table round trip", worst < 1e-3, f"max |derived - published| = {worst:.2e} (tol 1e-3)", 1.0)


def test_02_equilibrium_identity(verdict):
    worst = 0.0
    for T in fertile_knots():
        ep = rates_at(T)
        N = basic_offspring(ep)
        for K in (2e4, 2e5, 2e6):
            A = wild_equilibrium(ep, density_death_rate(K, ep)).A
            worst = max(worst, abs(A / ((1 - 1 / N) * K) - 1))
    verdict(2, "equilibrium identity", worst < 1e-9, f"max rel error {worst:.2e} (tol 1e-9)", 1.0)


def test_03_threshold_closed_form(verdict):
    worst_closed, worst_delta, skipped = 0.0, 0.0, []
    for T in fertile_knots():
        ep = rates_at(T)
        mu_A2 = density_death_rate(202_000.0, ep)
        N, Q = basic_offspring(ep), q_factor(ep, mu_A2)
        th0 = release_thresholds(ep, mu_A2)
        worst_closed = max(worst_closed, abs(th0.beta_M_T1 / (Q * (math.sqrt(N) - 1) ** 2) - 1))
        for eps in (0.0, 0.006, 0.012):
            rf = ResidualFertility(eps)
            th = release_thresholds(ep, mu_A2, rf)
            if not th.exists:
                skipped.append(f"{T:g}C/eps={eps}")
                continue
            worst_delta = max(worst_delta, abs(discriminant(ep, mu_A2, rf, th.M_T1)) / (Q * (N - 1)) ** 2)
    ok = worst_closed < 1e-12 and worst_delta < 1e-8
    note = f"; no threshold (eps >= 1/N) at {', '.join(skipped)}" if skipped else ""
    verdict(3, "threshold closed form", ok,
            f"closed form rel err {worst_closed:.1e} (tol 1e-12), |Delta| rel {worst_delta:.1e} (tol 1e-8){note}", 1.0)


def test_04_dynamics_reach_equilibrium(verdict):
    ep = rates_at(25.0)
    env = Environment.constant(ep, 202_000.0, 1000)
    eq = wild_equilibrium(ep, float(env.mu_A2[0]))
    y0 = (0.1 * eq.A, 0.1 * eq.M, 0.1 * eq.F, 0.0)
    a = integrate(rhs_sit, y0, (0, 1000), env, dt=0.05)
    b = integrate(rhs_sit, y0, (0, 1000), env, dt=0.025)
    dist = np.max(np.abs(a.final[:3] / np.array(eq.triple) - 1))
    halving = np.max(np.abs(a.y[:, :3] - b.y[:, :3]) / np.abs(b.y[:, :3]))
    verdict(4, "dynamics reach equilibrium", dist < 0.01 and halving < 1e-6,
            f"distance to E* {dist:.1e} (tol 1e-2), step-halving change {halving:.1e} (tol 1e-6)", 10.0)


def test_05_sit_dichotomy(verdict):
    ep = rates_at(25.0)
    env = Environment.constant(ep, 202_000.0, 1500)
    mu_A2 = float(env.mu_A2[0])
    eq = wild_equilibrium(ep, mu_A2)
    th = release_thresholds(ep, mu_A2)
    high = 1.2 * th.M_T1
    tr = integrate(rhs_sit, (*eq.triple, high), (0, 1500), env, u_S=high * ep.mu_S)
    ratio_high = np.max(tr.final[:3] / np.array(eq.triple))
    low = 0.5 * th.M_T1
    eqs = sit_equilibria(ep, mu_A2, NO_RF, low)
    assert eq.A > eqs.A1
    tr = integrate(rhs_sit, (*eq.triple, low), (0, 1500), env, u_S=low * ep.mu_S)
    dist_low = np.max(np.abs(tr.final[:3] / np.array(eqs.E2) - 1))
    verdict(5, "SIT dichotomy", ratio_high < 1e-3 and dist_low < 0.05,
            f"above threshold state/E* = {ratio_high:.1e} (tol 1e-3); below threshold distance to E2 {dist_low:.1e} (tol 5e-2)",
            30.0)


def test_06_residual_fertility_floor(verdict):
    ep = rates_at(25.0)
    env = Environment.constant(ep, 202_000.0, 3000)
    mu_A2 = float(env.mu_A2[0])
    eq = wild_equilibrium(ep, mu_A2)
    N = eq.N
    eps = 1.5 / N
    th0 = release_thresholds(ep, mu_A2)
    tr = integrate(rhs_sit, (*eq.triple, 0.0), (0, 3000), env, ImpulseSchedule(0, 100 * th0.M_T1, tau=7),
                   rf=ResidualFertility(eps))
    long_run = float(tr["A"][-365:].min())
    bound = 2 * (eps * N - 1) / (N - 1) * eq.A
    verdict(6, "residual fertility floor", long_run >= bound * 0.999,
            f"long-run A = {long_run:.1f}, required >= {bound * 0.999:.1f} (ratio {long_run / bound:.3f})", 30.0)


def test_07_mechanical_control_arithmetic(verdict):
    worst = 0.0
    for seed in (1, 2, 3):
        s = synth_weather(seed, 730)
        for variant in ("full", "constant_mean", "temperature_only", "rainfall_only"):
            base = build_environment(s, CapacityConfig(variant=variant))
            mc = build_environment(s, CapacityConfig(variant=variant, mc_level=0.4))
            worst = max(worst, float(np.max(np.abs(mc.mu_A2 / base.mu_A2 * 0.6 - 1))))
    verdict(7, "mechanical control arithmetic", worst < 1e-12,
            f"max |ratio x 0.6 - 1| = {worst:.1e} over 12 series/variants (factor 1/0.6 = {1 / 0.6:.3f})")


def test_08_epi_inversion(verdict):
    env = build_environment(synth_weather(2, 730))
    bound = f_threshold(env.epi_temp, env.mu_F)
    finite = np.isfinite(bound)
    worst = float(np.max(np.abs(r_eff(bound[finite], env.epi_temp[finite], env.mu_F[finite]) - 0.5)))
    # days with an infinite bound carry no transmission at all
    zero_risk = bool(np.all(r_eff(1e12, env.epi_temp[~finite], env.mu_F[~finite]) == 0)) if (~finite).any() else True
    point = (abs(beta_mh(37.354)) < 1e-12, abs(beta_hm(18.9871) - 0.5) < 1e-15, abs(nu_m(25.0) - 0.184) < 1e-12)
    ok = worst < 1e-12 and zero_risk and all(point)
    verdict(8, "epi inversion", ok,
            f"max |R_eff(threshold) - 0.5| = {worst:.1e} over {finite.sum()} days; point values {point}")


def _scan(weather, baselines, **kw):
    cfg = ScanConfig(**kw)
    key = (cfg.mc_level, cfg.variant)
    ctx = build_context(cfg, weather, baseline=baselines.get(key))
    baselines[key] = ctx.baseline
    return cfg, scan_start_dates(ctx, jobs=2)


def _violations(lo, hi):
    """Start dates where ``lo`` needs more massive releases than ``hi`` (unmet counts as infinite)."""
    return [a.t0_date for a, b in zip(lo, hi) if not a.effective_n <= b.effective_n]


@pytest.fixture(scope="module")
def scan_weather():
    return synth_weather(seed=1, days=3 * 365)


def test_09_scan_monotonicity(verdict, scan_weather):
    base: dict = {}
    eps = [_scan(scan_weather, base, eps=e)[1] for e in (0.0, 0.006, 0.012)]
    mcs = [eps[0]] + [_scan(scan_weather, base, mc_level=m)[1] for m in (0.2, 0.4)]
    fast = _scan(scan_weather, base, massive_rate=12000)[1]
    bad = {
        "eps": _violations(eps[0], eps[1]) + _violations(eps[1], eps[2]),
        "mc": _violations(mcs[1], mcs[0]) + _violations(mcs[2], mcs[1]),
        "rate": _violations(fast, eps[0]),
    }
    means = [summarize([(ScanConfig(eps=e), o)]).rows for e, o in zip((0.0, 0.006, 0.012), eps)]
    means = [r[0].n_massive if r else None for r in means]
    n = len(eps[0])
    ok = not any(bad.values())
    verdict(9, "scan monotonicity", ok,
            f"{n} weekly start dates; violations eps/mc/rate = {len(bad['eps'])}/{len(bad['mc'])}/{len(bad['rate'])}; "
            f"mean n_massive by eps {means}", 300.0)


def test_10_epi_easier_than_nuisance(verdict, scan_weather):
    base: dict = {}
    total, bad = 0, []
    for e in (0.0, 0.006, 0.012):
        for m in (0.0, 0.2, 0.4):
            _, nui = _scan(scan_weather, base, eps=e, mc_level=m)
            _, epi = _scan(scan_weather, base, eps=e, mc_level=m, objective="epi")
            bad += _violations(epi, nui)
            total += len(nui)
    verdict(10, "epi objective easier than nuisance", not bad,
            f"{len(bad)} violations over {total} (start date, eps, mc) combinations", 300.0)


def test_11_preset_regression(verdict):
    rows = []
    for e in (0.0, 0.006, 0.012):
        for m in (0.0, 0.2, 0.4):
            for rate in (6000, 12000):
                cfg = ScanConfig(eps=e, mc_level=m, massive_rate=rate)
                rows.append((cfg, preset_run(cfg)))
    arithmetic = all(o.total_sterile_males == o.n_massive * c.massive_rate * c.area for c, o in rows)
    all_met = all(o.objective_met for _, o in rows)
    pinned = rows[0][1].n_massive
    verdict(11, "mean-parameter preset regression", arithmetic and all_met and pinned == PRESET_N_MASSIVE,
            f"{len(rows)} cells, one run each; eps=0/mc=0/6000 -> n_massive={pinned} (pinned {PRESET_N_MASSIVE}), "
            f"total={rows[0][1].total_sterile_males:.0f}", 60.0)
