import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from battcool.cost import CostModel, DpConfig, stage_cost
from battcool.dp import (
    Policy, ThermalModel, backward_induction, bellman_residual, execute, interp_uniform,
    monotone_violations, rollout, solve, solve_profile,
)
from battcool.cell import BatteryParams
from battcool.errors import DataError, GridEscape, InfeasibleEverywhere
from battcool.simulation import NoCooling, simulate
from battcool.controllers import RuleBased, RuleParams

COARSE = DpConfig(n_temp_states=34, n_actions=21)


def random_instance(seed, n_steps=5, n_temps=5, n_actions=3):
    """Successors on grid nodes, so interpolation is exact and brute force comparable."""
    rng = np.random.default_rng(seed)
    temps = np.linspace(20.0, 24.0, n_temps)
    nxt = rng.integers(0, n_temps, size=(n_steps, n_temps, n_actions))
    cost = rng.uniform(0, 1, size=(n_steps, n_temps, n_actions))

    def transition(k):
        return temps[nxt[k]], cost[k]

    return temps, nxt, cost, transition


def brute_force(i0, nxt, cost):
    n_steps, _, n_actions = cost.shape
    best = np.inf
    for seq in itertools.product(range(n_actions), repeat=n_steps):
        i, total = i0, 0.0
        for k, a in enumerate(seq):
            total += cost[k, i, a]
            i = nxt[k, i, a]
        best = min(best, total)
    return best


class TestBackwardInduction:
    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_matches_brute_force(self, seed):
        temps, nxt, cost, tr = random_instance(seed)
        choice, values = backward_induction(5, temps, np.arange(3), tr)
        for i0 in range(len(temps)):
            opt = brute_force(i0, nxt, cost)
            assert values[0, i0] == pytest.approx(opt, abs=1e-12)
            total, _ = rollout(choice, temps, np.arange(3), tr, i0)
            assert total == pytest.approx(opt, abs=1e-9)

    def test_never_worse_than_any_fixed_action(self):
        temps, nxt, cost, tr = random_instance(7)
        _, values = backward_induction(5, temps, np.arange(3), tr)
        for a in range(3):
            fixed = np.zeros((5, 5), dtype=int) + a
            for i0 in range(5):
                assert values[0, i0] <= rollout(fixed, temps, np.arange(3), tr, i0)[0] + 1e-12

    def test_infeasible_everywhere(self):
        temps = np.linspace(0, 1, 3)
        with pytest.raises(InfeasibleEverywhere):
            backward_induction(2, temps, [0], lambda k: (temps[:, None], np.full((3, 1), np.inf)))

    def test_nonuniform_grid(self):
        with pytest.raises(DataError):
            backward_induction(1, [0.0, 1.0, 3.0], [0], lambda k: None)

    def test_interp_clamps(self):
        v = np.array([0.0, 1.0, 4.0])
        assert interp_uniform(v, 0.0, 1.0, np.array([-5.0, 0.5, 1.5, 9.0])).tolist() == [0.0, 0.5, 2.5, 4.0]


class TestStageCost:
    def test_zero(self):
        assert stage_cost(0.0, 25.0, 0.0, DpConfig()) == 0.0

    def test_electricity_only(self):
        assert stage_cost(0.0, 25.0, 700.0, DpConfig()) == pytest.approx(1.9444444e-5, rel=1e-6)

    def test_replacement_prefactor(self):
        cm = CostModel.build(DpConfig(loss_units="fraction"), BatteryParams())
        assert cm.replacement == 7416.0
        # pricing the full 0 -> 0.2 budget, in any number of increments, recovers the pack price
        steps = np.full(1000, 0.2 / 1000)
        assert cm.wear_per_loss() * steps.sum() == pytest.approx(7416.0, rel=1e-12)

    def test_percent_units_scale(self):
        pct = stage_cost(150.0, 30.0, 0.0, DpConfig())
        frac = stage_cost(150.0, 30.0, 0.0, DpConfig(loss_units="fraction"))
        assert pct == pytest.approx(100.0 * frac, rel=1e-12)

    def test_hotter_costs_more(self):
        assert stage_cost(100.0, 35.0, 0.0, DpConfig()) > stage_cost(100.0, 25.0, 0.0, DpConfig())


@pytest.fixture(scope="module")
def solved(plant, cycles):
    return solve(cycles["us06"], plant, COARSE)


class TestSolve:
    def test_empty_horizon(self, plant):
        pol = solve_profile(np.zeros(0), np.zeros(0), np.zeros(0), plant, COARSE)
        assert pol.n_steps == 0 and pol.cost_to_go(30.0) == 0.0

    def test_bellman_consistency(self, plant, cycles, solved):
        v, _ = cycles["us06"].speed_pairs()
        from battcool.dp import nominal_soc
        from battcool.vehicle import cycle_power

        model = ThermalModel(plant, solved.temps, COARSE.action_grid(), cycle_power(cycles["us06"], plant.vehicle),
                             v, nominal_soc(cycles["us06"], plant))
        assert bellman_residual(solved.values, solved.temps, model.step) <= 1e-9

    def test_admissible_actions(self, solved):
        a = solved.actions
        assert not np.any((a > 0) & (a < 500)) and a.max() <= 4500
        assert np.all(a[:, solved.temps <= 25.0] == 0)

    def test_monotone_above_lockout(self, solved):
        hot = solved.temps > 25.3
        assert len(monotone_violations(solved.values[:, hot])) == 0
        assert np.all(np.diff(solved.values[0, hot]) > 0)

    def test_lookup(self, solved):
        t = solved.temps
        j = int(np.argmax(t > 30))
        assert solved.lookup(3, t[j]) == solved.actions[3, j]
        assert solved.lookup(3, 25.0) == 0.0
        with pytest.raises(GridEscape):
            solved.lookup(3, t[-1] + 0.5)
        with pytest.raises(GridEscape):
            solved.lookup(solved.n_steps, 30.0)

    def test_save_load(self, solved, tmp_path):
        back = Policy.load(solved.save(tmp_path / "p.npz"))
        assert np.array_equal(back.actions, solved.actions) and back.config == solved.config
        assert back.fingerprint == solved.fingerprint
        with pytest.raises(DataError):
            Policy.load(tmp_path / "missing.npz")

    def test_execute_beats_rule_and_off(self, plant, cycles, solved):
        dp_run = execute(solved, cycles["us06"], plant)
        off = simulate(cycles["us06"], NoCooling(), plant)
        rule = simulate(cycles["us06"], RuleBased(RuleParams.preset("highway")), plant)
        assert dp_run.final.battery.t_bat < off.final.battery.t_bat
        assert dp_run.total_cost <= rule.total_cost * 1.01

    def test_policy_horizon_checked(self, plant, solved):
        from battcool.vehicle import bundled_cycle

        with pytest.raises(DataError):
            execute(solved, bundled_cycle("us06", repeat=2), plant)
