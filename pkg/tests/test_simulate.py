"""Integrator tests: exactness of transport, fixed points, monitors, bounds.

Scheme-level oracles:

* The cell-averaged disease-free density is an exact fixed point of the
  step map because shifting the averages one cell and multiplying by
  exp(-mu*da) reproduces the next cell's average, and the boundary formula
  is that same average for cell zero.
* With zero force the density after n steps is the initial one shifted by
  n cells times exp(-mu*n*da), to machine precision.
* The infection-age integrator must agree with the aggregated one to first
  order in da (the discrete aggregation identity differs from the explicit
  Euler count update at O(da^2) per step).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from semiflow_lab.errors import NumericalFailureError, ParameterDomainError
from semiflow_lab.model import (
    InfectionAgeState,
    ModelParams,
    SystemState,
    cell_averaged_exponential,
    disease_free_equilibrium,
    endemic_equilibrium,
    make_grid,
    make_profile,
    state_norm,
)
from semiflow_lab.simulate import (
    SimConfig,
    dissipativity_bound,
    dissipativity_check,
    simulate,
    simulate_infection_age,
    step,
    upper_envelope_check,
)


@pytest.fixture(scope="module")
def small_grid(ref_params):
    return make_grid(0.1, 400.0, ref_params, truncation_tol=1e-3)


def dfe_state(params, grid, big_i=0.0, big_j=0.0, scale=1.0):
    eq = disease_free_equilibrium(params, grid)
    return SystemState(s=scale * eq.s, big_i=big_i, big_j=big_j, time=0.0)


class TestStep:
    def test_disease_free_is_fixed_point(self, ref_params, ref_profile, ref_grid):
        state = dfe_state(ref_params, ref_grid)
        after = step(state, ref_params, ref_profile, ref_grid)
        assert np.max(np.abs(after.s - state.s) / state.s) < 1e-13
        assert after.big_i == 0.0 and after.big_j == 0.0

    def test_endemic_one_step_residual(self, ref_params_perturbed, ref_profile, ref_grid):
        eq = endemic_equilibrium(ref_params_perturbed, ref_profile, ref_grid)
        state = SystemState(s=eq.s, big_i=eq.big_i, big_j=eq.big_j, time=0.0)
        after = step(state, ref_params_perturbed, ref_profile, ref_grid)
        assert np.max(np.abs(after.s - state.s) / state.s) < 1e-6
        assert abs(after.big_i - state.big_i) / state.big_i < 1e-6
        assert abs(after.big_j - state.big_j) / state.big_j < 1e-6

    def test_empty_density_boundary_inflow(self, ref_params, ref_profile, ref_grid):
        state = SystemState(s=np.zeros(ref_grid.n_cells), big_i=0.0, big_j=0.0, time=0.0)
        after = step(state, ref_params, ref_profile, ref_grid)
        h = ref_grid.da
        expected0 = 1.0 * (-math.expm1(-0.02 * h)) / (0.02 * h)
        assert after.s[0] == pytest.approx(expected0, rel=1e-14)
        assert np.all(after.s[1:] == 0.0)

    def test_mismatched_grid_rejected(self, ref_params, ref_profile, ref_grid):
        state = SystemState(s=np.zeros(10), big_i=0.0, big_j=0.0, time=0.0)
        with pytest.raises(ParameterDomainError):
            step(state, ref_params, ref_profile, ref_grid)


class TestSimulate:
    def test_matches_repeated_step_exactly(self, ref_params_perturbed, ref_profile, small_grid):
        rng = np.random.default_rng(3)
        s0 = rng.uniform(0.0, 1.0, small_grid.n_cells)
        state = SystemState(s=s0, big_i=0.3, big_j=0.7, time=0.0)
        config = SimConfig(dt=small_grid.da, horizon=0.7, output_stride=1)
        traj = simulate(state, ref_params_perturbed, ref_profile, small_grid, config)
        manual = state
        for _ in range(config.n_steps):
            manual = step(manual, ref_params_perturbed, ref_profile, small_grid)
        assert np.array_equal(traj.final_state.s, manual.s)
        assert traj.final_state.big_i == manual.big_i
        assert traj.final_state.big_j == manual.big_j

    def test_pure_transport_is_exact_shift(self, ref_profile, small_grid):
        params = ModelParams(1e-30, 0.02, 0.5, 0.0, 0.5, 0.1)
        rng = np.random.default_rng(5)
        s0 = rng.uniform(0.5, 2.0, small_grid.n_cells)
        state = SystemState(s=s0, big_i=0.0, big_j=0.0, time=0.0)
        n = 13
        config = SimConfig(dt=small_grid.da, horizon=n * small_grid.da, output_stride=n)
        traj = simulate(state, params, ref_profile, small_grid, config)
        factor = math.exp(-0.02 * small_grid.da)
        expected = s0[:-n] * factor**n
        got = traj.final_state.s[n:]
        assert np.max(np.abs(got - expected) / expected) < 1e-13

    def test_stationary_at_disease_free(self, ref_params, ref_profile, small_grid):
        state = dfe_state(ref_params, small_grid)
        config = SimConfig(dt=small_grid.da, horizon=20.0, output_stride=50)
        traj = simulate(state, ref_params, ref_profile, small_grid, config)
        assert np.max(np.abs(traj.final_state.s - state.s) / state.s) < 1e-11
        assert traj.monitors["force"].max() == 0.0

    def test_positivity_and_snapshot_stride(self, ref_params_perturbed, ref_profile, small_grid):
        state = dfe_state(ref_params_perturbed, small_grid, big_i=0.1, big_j=0.0)
        config = SimConfig(dt=small_grid.da, horizon=10.0, output_stride=25)
        traj = simulate(state, ref_params_perturbed, ref_profile, small_grid, config)
        for snap in traj.states:
            assert np.all(snap.s >= 0.0)
            assert snap.big_i >= 0.0 and snap.big_j >= 0.0
        times = [snap.time for snap in traj.states]
        gaps = np.diff(times)
        assert np.allclose(gaps, 25 * small_grid.da, rtol=0, atol=1e-12)
        assert traj.monitor_times.shape[0] == config.n_steps + 1

    def test_monitor_values_match_states(self, ref_params_perturbed, ref_profile, small_grid):
        state = dfe_state(ref_params_perturbed, small_grid, big_i=0.2, big_j=0.1)
        config = SimConfig(dt=small_grid.da, horizon=5.0, output_stride=10)
        traj = simulate(state, ref_params_perturbed, ref_profile, small_grid, config)
        for k, snap in enumerate(traj.states):
            idx = k * 10
            assert traj.monitors["norm"][idx] == pytest.approx(
                state_norm(snap, small_grid), rel=1e-12
            )
            lam = 0.5 * snap.big_i + 0.01 * snap.big_j
            assert traj.monitors["force"][idx] == pytest.approx(lam, rel=1e-12)
            ell = (0.5 / 0.5) * snap.big_i + (0.01 / 0.1) * snap.big_j
            assert traj.monitors["extinction"][idx] == pytest.approx(ell, rel=1e-12)

    def test_divergence_aborts(self, ref_params, ref_profile, small_grid):
        # an astronomically infective count overflows the explicit count
        # update within a couple of steps; the monitor check must abort
        params = ModelParams(1.0, 0.02, 1e8, 0.0, 0.5, 0.1)
        eq = disease_free_equilibrium(params, small_grid)
        state = SystemState(s=eq.s, big_i=1e300, big_j=0.0, time=0.0)
        config = SimConfig(dt=small_grid.da, horizon=2.0, output_stride=1)
        with pytest.raises(NumericalFailureError):
            simulate(state, params, ref_profile, small_grid, config)

    def test_dt_lock_enforced(self, ref_params, ref_profile, small_grid):
        state = dfe_state(ref_params, small_grid)
        config = SimConfig(dt=0.07, horizon=1.0)
        with pytest.raises(ParameterDomainError):
            simulate(state, ref_params, ref_profile, small_grid, config)

    def test_count_stability_limit_enforced(self, ref_profile):
        params = ModelParams(1.0, 0.02, 0.5, 0.0, 0.5, 3.0)
        grid = make_grid(0.5, 400.0, params, truncation_tol=1e-3)
        state = dfe_state(params, grid)
        config = SimConfig(dt=0.5, horizon=1.0)
        with pytest.raises(ParameterDomainError):
            simulate(state, params, ref_profile, grid, config)


class TestDissipativity:
    def test_stationary_slack_nonnegative(self, ref_params, ref_profile, small_grid):
        state = dfe_state(ref_params, small_grid)
        config = SimConfig(dt=small_grid.da, horizon=50.0, output_stride=100)
        traj = simulate(state, ref_params, ref_profile, small_grid, config)
        slack = dissipativity_check(traj, ref_params, state_norm(state, small_grid))
        assert np.min(slack) >= 0.0

    def test_inflated_initial_decays_toward_ball(self, ref_params, ref_profile, small_grid):
        # twice the steady mass: the norm must decay and stay under the bound
        state = dfe_state(ref_params, small_grid, scale=2.0)
        config = SimConfig(dt=small_grid.da, horizon=100.0, output_stride=200)
        traj = simulate(state, ref_params, ref_profile, small_grid, config)
        norm0 = state_norm(state, small_grid)
        slack = dissipativity_check(traj, ref_params, norm0)
        assert np.min(slack) >= -1e-9
        # the norm decays monotonically toward the ball radius 1/mu = 50
        norms = traj.monitors["norm"]
        assert np.all(np.diff(norms) < 0.0)
        assert abs(norms[-1] - 50.0) < 0.2 * abs(norms[0] - 50.0)

    def test_pure_decay_bound_without_influx(self, ref_profile):
        # degenerate zero-influx form of the bound: norm <= norm0 * exp(-nu t)
        # (transmission kept subcritical for the initial mass so the force
        # stays small and the scheme tracks the continuum inequality)
        params = ModelParams(1e-12, 0.05, 0.02, 0.0, 0.5, 0.1)
        grid = make_grid(0.1, 400.0, params)
        rng = np.random.default_rng(9)
        state = SystemState(
            s=rng.uniform(0.0, 0.05, grid.n_cells), big_i=0.4, big_j=0.2, time=0.0
        )
        config = SimConfig(dt=grid.da, horizon=30.0, output_stride=100)
        traj = simulate(state, params, ref_profile, grid, config)
        norm0 = state_norm(state, grid)
        pure_decay = norm0 * np.exp(-params.nu_min * traj.monitor_times)
        assert np.all(traj.monitors["norm"] <= pure_decay + 1e-3)

    def test_bound_formula(self, ref_params):
        t = np.array([0.0, 10.0, 1e6])
        bound = dissipativity_bound(ref_params, 3.0, t)
        nu = 0.02
        assert bound[0] == pytest.approx(3.0, rel=1e-15)
        assert bound[1] == pytest.approx(
            (1.0 / nu) * (1 - math.exp(-nu * 10)) + 3.0 * math.exp(-nu * 10), rel=1e-13
        )
        assert bound[2] == pytest.approx(1.0 / nu, rel=1e-9)


class TestEnvelope:
    def test_dominated_initial_never_violates(self, ref_params_perturbed, ref_profile, small_grid):
        state = dfe_state(ref_params_perturbed, small_grid, big_i=0.1, big_j=0.05, scale=0.9)
        config = SimConfig(dt=small_grid.da, horizon=30.0, output_stride=30)
        traj = simulate(state, ref_params_perturbed, ref_profile, small_grid, config)
        assert upper_envelope_check(traj, ref_params_perturbed, small_grid) == 0

    def test_inflated_initial_clean_on_renewed_cells(self, ref_params, ref_profile, small_grid):
        state = dfe_state(ref_params, small_grid, big_i=0.1, scale=2.0)
        config = SimConfig(dt=small_grid.da, horizon=20.0, output_stride=20)
        traj = simulate(state, ref_params, ref_profile, small_grid, config)
        assert upper_envelope_check(traj, ref_params, small_grid) == 0

    def test_violation_detected_when_planted(self, ref_params, ref_profile, small_grid):
        state = dfe_state(ref_params, small_grid)
        config = SimConfig(dt=small_grid.da, horizon=5.0, output_stride=10)
        traj = simulate(state, ref_params, ref_profile, small_grid, config)
        # plant a density spike in a renewed cell of the last snapshot
        doctored = traj.states[-1].s.copy()
        doctored[3] *= 1.5
        traj.states[-1] = SystemState(
            s=doctored,
            big_i=traj.states[-1].big_i,
            big_j=traj.states[-1].big_j,
            time=traj.states[-1].time,
        )
        assert upper_envelope_check(traj, ref_params, small_grid) == 1


class TestInfectionAge:
    def test_no_infection_invariant(self, ref_params, ref_profile, small_grid):
        zeros = np.zeros(small_grid.n_cells)
        s0 = cell_averaged_exponential(0.7, 0.02, small_grid)
        initial = InfectionAgeState(s=s0, i=zeros, j=zeros, time=0.0)
        config = SimConfig(dt=small_grid.da, horizon=50.0, output_stride=250)
        traj = simulate_infection_age(initial, ref_params, ref_profile, small_grid, config)
        assert traj.monitors["force"].max() == 0.0
        # susceptibles relax toward the disease-free profile on renewed cells
        eq = disease_free_equilibrium(ref_params, small_grid)
        renewed = small_grid.left_edges < 50.0
        final = traj.final_state.s
        assert np.max(np.abs(final[renewed] - eq.s[renewed]) / eq.s[renewed]) < 1e-12

    def test_aggregation_mismatch_first_order(self, ref_profile):
        # moderate-endemicity configuration: the mismatch between the two
        # integrators halves when the grid is halved
        mismatches = []
        for da in (0.1, 0.05):
            params = ModelParams(1.0, 0.02, 0.05, 0.01, 0.5, 0.1)
            grid = make_grid(da, 400.0, params, truncation_tol=1e-3)
            s0 = cell_averaged_exponential(0.9, 0.02, grid)
            agg0 = SystemState(s=s0, big_i=0.05, big_j=0.02, time=0.0)
            ia0 = InfectionAgeState(
                s=s0,
                i=cell_averaged_exponential(0.05, 1.0, grid),
                j=cell_averaged_exponential(0.02, 1.0, grid),
                time=0.0,
            )
            config = SimConfig(dt=da, horizon=80.0, output_stride=10**9)
            ta = simulate(agg0, params, ref_profile, grid, config)
            tb = simulate_infection_age(ia0, params, ref_profile, grid, config)
            err = np.max(np.abs(ta.monitors["force"] - tb.monitors["force"]))
            err = max(err, np.max(np.abs(ta.monitors["extinction"] - tb.monitors["extinction"])))
            mismatches.append(err)
        assert mismatches[0] / mismatches[1] == pytest.approx(2.0, abs=0.3)
        assert mismatches[1] < 0.5 * 0.05 / 0.05  # sup-norm C*da with C = 10

    def test_matched_initial_stays_close(self, ref_profile):
        params = ModelParams(1.0, 0.02, 0.05, 0.01, 0.5, 0.1)
        grid = make_grid(0.1, 400.0, params, truncation_tol=1e-3)
        s0 = cell_averaged_exponential(0.9, 0.02, grid)
        agg0 = SystemState(s=s0, big_i=0.05, big_j=0.02, time=0.0)
        ia0 = InfectionAgeState(
            s=s0,
            i=cell_averaged_exponential(0.05, 1.0, grid),
            j=cell_averaged_exponential(0.02, 1.0, grid),
            time=0.0,
        )
        config = SimConfig(dt=0.1, horizon=80.0, output_stride=100)
        ta = simulate(agg0, params, ref_profile, grid, config)
        tb = simulate_infection_age(ia0, params, ref_profile, grid, config)
        for sa, sb in zip(ta.states, tb.states):
            assert sa.time == sb.time
            assert abs(sa.big_i - sb.big_i) < 1.5 * grid.da * 10
            assert abs(sa.big_j - sb.big_j) < 1.5 * grid.da * 10
