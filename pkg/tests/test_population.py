import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sitsim.bio_params import rates_at
from sitsim.epi_risk import epi_rates, r_eff
from sitsim.equilibria import release_thresholds, wild_equilibrium
from sitsim.errors import IntegrationError
from sitsim.population import (
    NO_RF, ImpulseSchedule, ResidualFertility, SITStepper, integrate, mating_fraction, refinement, rhs_epi,
    rhs_sit, rhs_wild, simulate_epi, stiffness,
)
from sitsim.weather import Environment

from oracles import reference_sit


@pytest.fixture
def estar(ep25, const_env):
    return wild_equilibrium(ep25, float(const_env.mu_A2[0]))


class TestRightHandSides:
    def test_origin_is_stationary(self, ep25):
        assert np.all(rhs_wild([0, 0, 0], ep25, 1e-4) == 0)

    def test_equilibrium_is_stationary(self, ep25, estar, const_env):
        d = rhs_wild(estar.triple, ep25, float(const_env.mu_A2[0]))
        assert np.all(np.abs(d) < 1e-9 * np.array(estar.triple))

    def test_eggs_from_females(self, ep25):
        assert rhs_wild([0, 0, 10.0], ep25, 1e-4)[0] == pytest.approx(10 * ep25.phi)

    @given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6))
    def test_no_sterile_males_matches_wild(self, A, M, F):
        ep = rates_at(23.0)
        assert np.array_equal(rhs_sit([A, M, F, 0.0], ep, 1e-4)[:3], rhs_wild([A, M, F], ep, 1e-4))

    @given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6))
    def test_fully_fertile_releases_match_wild(self, A, M, F, S):
        ep = rates_at(27.0)
        got = rhs_sit([A, M, F, S], ep, 1e-4, ResidualFertility(epsilon=0.999999999999))[:3]
        assert np.allclose(got, rhs_wild([A, M, F], ep, 1e-4), rtol=1e-9, atol=1e-6)

    def test_only_sterile_males(self, ep25):
        assert rhs_sit([100.0, 0.0, 50.0, 10.0], ep25, 1e-4)[2] == pytest.approx(-ep25.mu_F * 50.0)

    def test_mating_fraction_without_males(self):
        assert mating_fraction(0.0, 0.0, NO_RF) == 1.0

    def test_epi_disease_free_block(self, ep25):
        rates = epi_rates(25.0)
        y = [1e4, 5e3, 8e3, 0, 0, 100.0, 2000, 0, 0]
        d = rhs_epi(y, ep25, 1e-4, NO_RF, rates)
        assert np.all(d[3:5] == 0) and np.all(d[6:] == 0)
        assert d[2] == pytest.approx(rhs_sit([1e4, 5e3, 8e3, 100.0], ep25, 1e-4)[2])

    @given(st.floats(0, 2000), st.floats(0, 50), st.floats(0, 1e5))
    def test_human_total_conserved_at_N_h(self, I, F_I, F_S):
        rates = epi_rates(26.0)
        S = 2000 - I
        d = rhs_epi([1e4, 5e3, F_S, 0, F_I, 0, S, I, 0], rates_at(26.0), 1e-4, NO_RF, rates)
        assert abs(d[6] + d[7] + d[8]) < 1e-9

    def test_epi_needs_positive_population(self, ep25):
        from dataclasses import replace
        with pytest.raises(ValueError):
            rhs_epi([0] * 9, ep25, 1e-4, NO_RF, replace(epi_rates(25.0), N_h=0.0))


class TestSchedule:
    def test_first_release_at_t0(self):
        ev = ImpulseSchedule(t0=3, bolus=10, tau=7, n_releases=3).events(0, 100)
        assert ev == [(3, 10), (10, 10), (17, 10)]

    def test_switch_to_small(self):
        ev = ImpulseSchedule(t0=0, bolus=10, tau=7, n_releases=2, small_bolus=1).events(0, 22)
        assert [a for _, a in ev] == [10, 10, 1, 1]

    def test_half_open_window(self):
        assert ImpulseSchedule(t0=0, bolus=1, tau=7).events(7, 14) == [(7, 1)]


class TestIntegrate:
    def test_zero_bolus_same_as_none(self, ep25, const_env, estar):
        y0 = (*estar.triple, 0.0)
        a = integrate(rhs_sit, y0, (0, 50), const_env)
        b = integrate(rhs_sit, y0, (0, 50), const_env, ImpulseSchedule(0, 0.0))
        assert np.array_equal(a.y, b.y)

    def test_jump_is_exact(self, const_env, estar):
        tr = integrate(rhs_sit, (*estar.triple, 5.0), (0, 30), const_env, ImpulseSchedule(2, 1234.5, n_releases=2))
        assert len(tr.jumps) == 2
        for _, pre, post in tr.jumps:
            assert post[3] - pre[3] == 1234.5
            assert np.array_equal(pre[:3], post[:3])

    def test_converges_from_ten_percent(self, const_env, estar):
        tr = integrate(rhs_sit, (0.1 * estar.A, 0.1 * estar.M, 0.1 * estar.F, 0.0), (0, 1000), const_env)
        assert np.allclose(tr.final[:3], estar.triple, rtol=1e-2)

    def test_step_halving(self, const_env, estar):
        y0 = (0.3 * estar.A, 0.5 * estar.M, 0.2 * estar.F, 1e5)
        a = integrate(rhs_sit, y0, (0, 100), const_env, dt=0.05)
        b = integrate(rhs_sit, y0, (0, 100), const_env, dt=0.025)
        assert np.max(np.abs(a.y - b.y) / np.maximum(np.abs(b.y), 1e-300)) < 1e-6

    def test_matches_adaptive_reference(self, ep25, const_env, estar):
        y0 = (0.2 * estar.A, 0.1 * estar.M, 0.3 * estar.F, 2e5)
        ref = reference_sit(ep25, float(const_env.mu_A2[0]), y0, 60, eps=0.004)
        errs = []
        for dt in (0.05, 0.025):
            tr = integrate(rhs_sit, y0, (0, 60), const_env, dt=dt, rf=ResidualFertility(0.004))
            errs.append(np.max(np.abs(tr.y - ref) / np.abs(ref)))
        assert errs[0] < 1e-5
        assert errs[0] / errs[1] > 10  # fourth order: ideally 16

    def test_step_must_divide_a_day(self, const_env):
        with pytest.raises(ValueError):
            integrate(rhs_sit, (1, 1, 1, 0), (0, 2), const_env, dt=0.3)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up_reports_time(self, ep25):
        env = Environment.constant(ep25, 1e5, 10, mu_A2=-1.0)
        with pytest.raises(IntegrationError, match="t="):
            integrate(rhs_sit, (1e3, 1e3, 1e3, 0), (0, 10), env)

    def test_stiff_capacity_collapse_stays_stable(self, ep25):
        # equilibrium at a large capacity, then the capacity drops a hundredfold
        big = Environment.constant(ep25, 2e5, 1)
        eq = wild_equilibrium(ep25, float(big.mu_A2[0]))
        small = Environment.constant(ep25, 2e3, 800)
        tr = integrate(rhs_sit, (*eq.triple, 0.0), (0, 800), small)
        target = wild_equilibrium(ep25, float(small.mu_A2[0]))
        assert np.allclose(tr.final[:3], target.triple, rtol=1e-3)
        assert refinement(stiffness(eq.A, ep25.gamma, ep25.mu_A1, float(small.mu_A2[0]), 0.1), 20) > 1

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.floats(0, 5e5), min_size=2, max_size=4))
    def test_more_sterile_males_fewer_females(self, boluses):
        env = Environment.constant(rates_at(25.0), 202_000.0, 120)
        eq = wild_equilibrium(env.ep_at(0), float(env.mu_A2[0]))
        Fs = [integrate(rhs_sit, (*eq.triple, 0.0), (0, 120), env, ImpulseSchedule(0, b))["F"]
              for b in sorted(boluses)]
        for lo, hi in zip(Fs, Fs[1:]):
            assert np.all(hi <= lo + 1e-9 * np.maximum(lo, 1.0))

    def test_continuous_release_above_threshold_eliminates(self, ep25, const_env, estar):
        th = release_thresholds(ep25, float(const_env.mu_A2[0]))
        u = 1.2 * th.M_T1 * ep25.mu_S
        tr = integrate(rhs_sit, (*estar.triple, 1.2 * th.M_T1), (0, 1500), const_env, u_S=u)
        assert np.all(tr.final[:3] < 1e-3 * np.array(estar.triple))


class TestResidualFertilityFloor:
    @settings(max_examples=6, deadline=None)
    @given(st.floats(1.05, 3.0), st.sampled_from([0.5, 5.0, 100.0, 2000.0]), st.sampled_from([22.0, 25.0]))
    def test_aquatic_stage_never_cleared(self, eps_times_N, bolus_factor, T):
        # with eps N > 1 the aquatic stage stays above (eps N - 1)/(N - 1) A*, whatever the release size
        ep = rates_at(T)
        env = Environment.constant(ep, 202_000.0, 1500)
        eq = wild_equilibrium(ep, float(env.mu_A2[0]))
        N = eq.N
        th = release_thresholds(ep, float(env.mu_A2[0]))
        rf = ResidualFertility(eps_times_N / N)
        tr = integrate(rhs_sit, (*eq.triple, 0.0), (0, 1500), env, ImpulseSchedule(0, bolus_factor * th.M_T1), rf=rf)
        floor = (eps_times_N - 1) / (N - 1) * eq.A
        assert tr["A"][-365:].min() >= floor * (1 - 1e-3)


class TestStepper:
    def test_matches_generic_integrator(self, env3y):
        rf = ResidualFertility(0.006)
        sched = ImpulseSchedule(400, 120_000, n_releases=10, small_bolus=2000)
        tr = integrate(rhs_sit, (5e4, 3e4, 4e4, 0.0), (365, 600), env3y, sched, rf=rf)
        releases = {int(t): a for t, a in sched.events(365, 600)}
        stepper = SITStepper(env3y, rf)
        y = (5e4, 3e4, 4e4, 0.0)
        for i, d in enumerate(range(365, 600)):
            y = (y[0], y[1], y[2], y[3] + releases.get(d, 0.0))
            assert np.allclose(y, tr.y[i], rtol=1e-10)
            y = stepper.advance(y, d)
        assert np.allclose(y, tr.final, rtol=1e-10)


class TestEpiSimulation:
    def test_seed_grows_when_risk_high(self, ep25, const_env, estar):
        y0 = (estar.A, estar.M, estar.F, 0, 0, 0, 1999, 1, 0)
        assert r_eff(estar.F, 25.0, ep25.mu_F) > 1
        tr = simulate_epi(y0, (0, 10), const_env)
        assert tr["I_h"][5] > 1.0

    def test_linearisation_sign_matches_threshold(self, ep25, const_env, estar):
        # leading eigenvalue of the infection subsystem is positive iff R_eff > 1
        rates = epi_rates(25.0)
        for F_S in (0.2 * estar.F, 1e-4 * estar.F):
            y = np.array([estar.A, estar.M, F_S, 0, 0, 0, 2000, 0, 0], dtype=float)
            J = np.empty((3, 3))
            idx = (3, 4, 7)
            for j, k in enumerate(idx):
                h = 1e-6
                yp, ym = y.copy(), y.copy()
                yp[k] += h
                ym[k] -= h
                J[:, j] = (rhs_epi(yp, ep25, 1e-4, NO_RF, rates)[list(idx)]
                           - rhs_epi(ym, ep25, 1e-4, NO_RF, rates)[list(idx)]) / (2 * h)
            grows = np.max(np.linalg.eigvals(J).real) > 0
            assert grows == (r_eff(F_S, 25.0, ep25.mu_F) > 1)

    def test_sustained_releases_make_cases_decline(self, ep25, const_env, estar):
        th = release_thresholds(ep25, float(const_env.mu_A2[0]))
        pre = integrate(rhs_sit, (*estar.triple, 0.0), (0, 300), const_env, ImpulseSchedule(0, 3 * th.M_T1))
        A, M, F, S = pre.final
        assert r_eff(F, 25.0, ep25.mu_F) < 0.5
        y0 = (A, M, F, 0, 0, S, 1999, 1, 0)
        tr = simulate_epi(y0, (300, 400), const_env, ImpulseSchedule(301, 3 * th.M_T1))
        assert np.all(np.diff(tr["I_h"]) < 0)
