import numpy as np
import pytest

from sirsq.core import EpidemicParams, RandomSource
from sirsq.population import (
    CountState,
    CountTrajectory,
    SingularSystemError,
    event_rates,
    simulate_gillespie,
    simulate_window,
    solve_truncated_stationary,
    stationary_expectations,
)
from sirsq import stats as stats_mod

BASE = EpidemicParams(beta=0.001, gamma=0.7, alpha=0.8, lambda_in=3.0, revive_frac=0.995)

# downscaled set with endemic-regime means around (1.35, 2.82, 1.78); small
# enough that a cap of 15 leaves negligible boundary mass
SMALL = EpidemicParams(beta=0.07, gamma=0.42, alpha=0.60, lambda_in=0.8, revive_frac=0.25)


class TestEventRates:
    def test_hand_evaluated_rates(self):
        rates = event_rates(CountState(100, 10, 5), BASE, 5.0)
        assert rates.s_down == pytest.approx(5.0, abs=1e-12)
        assert rates.i_up == pytest.approx(5.0, abs=1e-12)
        assert rates.i_down == pytest.approx(7.0, abs=1e-12)
        assert rates.r_up == pytest.approx(7.0, abs=1e-12)
        assert rates.r_down == pytest.approx(4.0, abs=1e-12)
        assert rates.s_up == pytest.approx(3.0 + 0.995 * 0.8 * 5, abs=1e-12)

    def test_extinct_state_only_arrivals_and_drain(self):
        rates = event_rates(CountState(50, 0, 3), BASE, 5.0)
        assert rates.s_down == 0.0
        assert rates.i_down == 0.0
        assert rates.r_down > 0.0
        assert rates.s_up > 0.0

    def test_empty_r_and_no_arrivals(self):
        p = EpidemicParams(beta=0.001, gamma=0.7, alpha=0.8, lambda_in=0.0, revive_frac=0.9)
        rates = event_rates(CountState(10, 3, 0), p, 5.0)
        assert rates.s_up == 0.0

    def test_mean_degree_required_positive(self):
        with pytest.raises(ValueError):
            event_rates(CountState(1, 1, 1), BASE, 0.0)


class TestStationaryExpectations:
    def test_base_parameter_set(self):
        exp = stationary_expectations(BASE, 5.0)
        assert exp.e_s == pytest.approx(140.0, abs=1e-9)
        assert exp.e_i == pytest.approx(6000.0 / 7.0, abs=1e-9)
        assert exp.e_r == pytest.approx(750.0, abs=1e-9)

    def test_beta_doubled_only_moves_s(self):
        p = EpidemicParams(beta=0.002, gamma=0.7, alpha=0.8, lambda_in=3.0, revive_frac=0.995)
        exp = stationary_expectations(p, 5.0)
        assert exp.e_s == pytest.approx(70.0, abs=1e-9)
        assert exp.e_i == pytest.approx(6000.0 / 7.0, abs=1e-9)
        assert exp.e_r == pytest.approx(750.0, abs=1e-9)

    def test_no_reflux_limit(self):
        p = EpidemicParams(beta=0.01, gamma=0.5, alpha=0.5, lambda_in=2.0, revive_frac=0.0)
        exp = stationary_expectations(p, 5.0)
        assert exp.e_i == pytest.approx(4.0, abs=1e-12)

    def test_zero_divisions_named(self):
        with pytest.raises(ZeroDivisionError, match="beta"):
            stationary_expectations(
                EpidemicParams(beta=0.0, gamma=0.7, alpha=0.8, lambda_in=3.0), 5.0
            )
        with pytest.raises(ZeroDivisionError, match="gamma"):
            stationary_expectations(
                EpidemicParams(beta=0.1, gamma=0.0, alpha=0.8, lambda_in=3.0), 5.0
            )


class TestSimulateGillespie:
    def test_empty_system_stays_empty(self):
        p = EpidemicParams(beta=0.001, gamma=0.7, alpha=0.8, lambda_in=0.0, revive_frac=0.5)
        traj = simulate_gillespie(CountState(0, 0, 0), p, 5.0, 100.0, RandomSource(1))
        assert len(traj) == 1
        assert traj.final_state == CountState(0, 0, 0)

    def test_trajectory_legality(self):
        traj = simulate_gillespie(CountState(5, 4, 3), SMALL, 5.0, 200.0, RandomSource(2))
        traj.validate()
        assert len(traj) > 10

    def test_beta_zero_infected_nonincreasing(self):
        p = EpidemicParams(beta=0.0, gamma=0.5, alpha=0.5, lambda_in=1.0, revive_frac=0.3)
        traj = simulate_gillespie(CountState(5, 20, 0), p, 5.0, 500.0, RandomSource(3))
        i_path = traj.component("i")
        assert (np.diff(i_path) <= 0).all()
        assert i_path[-1] == 0

    def test_near_empty_start_dies_out_and_s_drifts(self):
        # from (0, 1, 0) the infection chain cannot establish itself: the
        # first infected recovers long before arrivals build enough
        # susceptible mass, so the run extinguishes and S grows linearly
        traj = simulate_gillespie(CountState(0, 1, 0), BASE, 5.0, 2000.0, RandomSource(4))
        assert traj.final_state.i == 0
        assert traj.final_state.s > 1000

    def test_conservation_by_move_type(self):
        traj = simulate_gillespie(CountState(5, 4, 3), SMALL, 5.0, 300.0, RandomSource(5))
        totals = traj.counts.sum(axis=1)
        deltas = np.diff(totals)
        assert set(deltas.tolist()) <= {-1, 0, 1}

    def test_reproducible(self):
        a = simulate_gillespie(CountState(5, 4, 3), SMALL, 5.0, 100.0, RandomSource(6))
        b = simulate_gillespie(CountState(5, 4, 3), SMALL, 5.0, 100.0, RandomSource(6))
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.counts, b.counts)

    def test_resample_grid(self):
        traj = simulate_gillespie(CountState(5, 4, 3), SMALL, 5.0, 50.0, RandomSource(7))
        grid, states = traj.resample(1.0)
        assert len(grid) == 51
        assert np.array_equal(states[0], traj.counts[0])
        assert np.array_equal(states[-1], traj.counts[-1])


class TestCompiledEngineEquivalence:
    def test_identical_event_sequence_and_occupancy(self):
        init = CountState(140, 857, 750)
        ref = simulate_gillespie(init, BASE, 5.0, 30.0, RandomSource(42))
        win = simulate_window(init, BASE, 5.0, 30.0, (5.0, 30.0), RandomSource(42),
                              block_size=4096)
        assert win.final_state == ref.final_state
        assert win.final_time == float(ref.times[-1])
        for comp in "sir":
            st = stats_mod.stationary_stats(ref, comp, 5.0, 30.0)
            occ = win.component_occupancy(comp)
            for value, dwell in st.occupancy.items():
                assert occ[value] == pytest.approx(dwell, rel=1e-12, abs=1e-12)
            assert win.std_paper(comp) == pytest.approx(st.std_paper, rel=1e-9)

    def test_equivalence_with_infected_floor(self):
        init = CountState(2, 3, 2)
        ref = simulate_gillespie(init, SMALL, 5.0, 500.0, RandomSource(11), i_floor=1)
        win = simulate_window(init, SMALL, 5.0, 500.0, (0.0, 500.0), RandomSource(11),
                              i_floor=1, block_size=2048)
        assert win.final_state == ref.final_state
        assert (ref.component("i") >= 1).all()

    def test_grid_recording_matches_trajectory_resample(self):
        init = CountState(10, 8, 6)
        ref = simulate_gillespie(init, SMALL, 5.0, 80.0, RandomSource(12))
        win = simulate_window(init, SMALL, 5.0, 80.0, (0.0, 80.0), RandomSource(12),
                              grid_dt=1.0, block_size=1024)
        grid, states = ref.resample(1.0)
        assert np.array_equal(win.grid_counts, states)

    def test_migration_events_are_arrivals_and_exits(self):
        init = CountState(10, 8, 6)
        win = simulate_window(init, SMALL, 5.0, 400.0, (0.0, 400.0), RandomSource(13),
                              record_migration=True, block_size=1024)
        assert win.migration is not None
        assert len(win.migration) > 0
        assert set(np.unique(win.migration.kinds)) <= {0, 1}
        assert (np.diff(win.migration.times) > 0).all()
        # arrivals occur at constant rate lambda: expect roughly lam * t_end
        n_arrivals = (win.migration.kinds == 0).sum()
        assert n_arrivals == pytest.approx(0.8 * 400, rel=0.25)


class TestTruncatedStationary:
    def test_no_arrivals_point_mass_at_origin(self):
        p = EpidemicParams(beta=0.05, gamma=0.5, alpha=0.5, lambda_in=0.0, revive_frac=0.5)
        sol = solve_truncated_stationary(p, 5.0, cap=6)
        assert sol.prob(0, 0, 0) == pytest.approx(1.0, abs=1e-12)
        assert sol.balance_residual < 1e-9

    def test_full_box_collapses_onto_extinct_corner(self):
        # with arrivals, the extinct face i == 0 is absorbing inside the
        # truncation box, so the literal stationary solve concentrates all
        # mass at (cap, 0, 0); the endemic regime needs the infected floor
        sol = solve_truncated_stationary(SMALL, 5.0, cap=8, i_floor=0)
        assert sol.prob(8, 0, 0) == pytest.approx(1.0, abs=1e-9)

    def test_floored_solve_matches_event_simulation(self):
        sol = solve_truncated_stationary(SMALL, 5.0, cap=15, i_floor=1)
        assert sol.balance_residual < 1e-9
        assert sol.boundary_mass() < 1e-6
        oracle_means = sol.marginal_means()
        sims = []
        for seed in (21, 22, 23):
            init = CountState(*(int(round(v)) for v in oracle_means))
            win = simulate_window(init, SMALL, 5.0, 6000.0, (400.0, 6000.0),
                                  RandomSource(seed), i_floor=1, block_size=200_000)
            sims.append(win.means())
        gaps = np.abs(np.mean(sims, axis=0) - oracle_means) / oracle_means
        assert gaps.max() < 0.03

    def test_global_balance_residual(self):
        sol = solve_truncated_stationary(SMALL, 5.0, cap=10, i_floor=1)
        assert sol.balance_residual < 1e-9

    def test_probabilities_normalised(self):
        sol = solve_truncated_stationary(SMALL, 5.0, cap=10, i_floor=1)
        assert sol.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert sol.probs.min() >= 0.0

    def test_csv_export(self, tmp_path):
        sol = solve_truncated_stationary(SMALL, 5.0, cap=4, i_floor=1)
        path = tmp_path / "oracle.csv"
        sol.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "s,i,r,prob"
        assert len(lines) > 10

    def test_reducible_floored_chain_raises(self):
        # no arrivals, no infection, recovery blocked at the floor: every
        # (s, 1, 0) is absorbing, so no single normalised solution exists
        p = EpidemicParams(beta=0.0, gamma=0.5, alpha=0.5, lambda_in=0.0, revive_frac=0.5)
        with pytest.raises(SingularSystemError):
            solve_truncated_stationary(p, 5.0, cap=6, i_floor=1)

    def test_floored_drain_funnels_to_single_survivor_state(self):
        # with arrivals off but infection on, the floored chain drains onto
        # the one state where a lone infected waits in an empty system
        p = EpidemicParams(beta=0.05, gamma=0.5, alpha=0.5, lambda_in=0.0, revive_frac=0.5)
        sol = solve_truncated_stationary(p, 5.0, cap=6, i_floor=1)
        assert sol.prob(0, 1, 0) == pytest.approx(1.0, abs=1e-9)


class TestDistributionModes:
    def test_infected_mode_near_theory_and_scales_with_arrivals(self):
        window = (1000.0, 2000.0)
        pooled_base = []
        pooled_double = []
        for seed in (51, 52, 53):
            win = simulate_window(CountState(140, 857, 750), BASE, 5.0, 2000.0,
                                  window, RandomSource(seed))
            pooled_base.append(win)
            p2 = EpidemicParams(beta=0.001, gamma=0.7, alpha=0.8, lambda_in=6.0,
                                revive_frac=0.995)
            win2 = simulate_window(CountState(140, 1714, 1500), p2, 5.0, 2000.0,
                                   window, RandomSource(seed))
            pooled_double.append(win2)
        dist = stats_mod.count_distribution(pooled_base, "i", window)
        assert abs(dist.mode() - 6000.0 / 7.0) / (6000.0 / 7.0) < 0.05
        dist2 = stats_mod.count_distribution(pooled_double, "i", window)
        ratio = dist2.mode() / dist.mode()
        assert abs(ratio - 2.0) < 0.2
