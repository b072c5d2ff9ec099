"""Acceptance gate: every criterion at its stated tolerance, one pass/fail line each.

The long-trip runs are shared across criteria through a session cache; the
whole module takes several minutes on one core.
"""

import itertools
import time

import numpy as np
import pytest

from battcool import dp
from battcool.controllers import CYCLE_PRESET, Mpc, RuleBased, RuleParams
from battcool.economy import CASES, degradation_reduction, life_extension
from battcool.cell import aging_step
from battcool.simulation import NoCooling, Plant, initial_state, simulate
from battcool.vehicle import bundled_cycle

pytestmark = pytest.mark.slow

CYCLES = ("nycc", "sc03", "us06")
AGING_ORACLE = 3.73974193214831353e-10


class Runs:
    """Lazily computed long-trip trajectories keyed by (strategy, cycle, case)."""

    def __init__(self):
        self.cache = {}
        self.timing = {}

    def get(self, strategy, cycle, case="case1"):
        key = (strategy, cycle, case)
        if key not in self.cache:
            plant = next(c for c in CASES if c.label == case).apply(Plant())
            cyc = bundled_cycle(cycle)
            t0 = time.perf_counter()
            if strategy == "dp":
                policy = dp.solve(cyc, plant, state=initial_state(plant), store_values=False)
                self.timing[("dp-solve", cycle)] = time.perf_counter() - t0
                t0 = time.perf_counter()
                traj = dp.execute(policy, cyc, plant)
            else:
                ctrl = {"off": NoCooling, "mpc": Mpc}.get(strategy)
                ctrl = ctrl() if ctrl else RuleBased(RuleParams.preset(CYCLE_PRESET[cycle]))
                traj = simulate(cyc, ctrl, plant)
            self.timing[key] = time.perf_counter() - t0
            self.cache[key] = traj
        return self.cache[key]

    def q_per_km(self, *key):
        t = self.get(*key)
        return t.q_loss_gain / t.final.distance_km

    def cost_per_100km(self, *key):
        t = self.get(*key)
        return 100.0 * t.total_cost / t.final.distance_km


@pytest.fixture(scope="module")
def runs():
    return Runs()


def test_c1_dp_matches_brute_force(criterion):
    rng = np.random.default_rng(11)
    temps = np.linspace(24.0, 26.0, 5)
    worst, same_seq, elapsed = 0.0, True, 0.0
    for _ in range(20):
        nxt = rng.integers(0, 5, size=(5, 5, 3))
        cost = rng.uniform(0, 1, size=(5, 5, 3))

        def tr(k):
            return temps[nxt[k]], cost[k]

        t0 = time.perf_counter()
        choice, values = dp.backward_induction(5, temps, np.arange(3), tr)
        elapsed = max(elapsed, time.perf_counter() - t0)
        for i0 in range(5):
            best, best_seq = np.inf, None
            for seq in itertools.product(range(3), repeat=5):
                i, tot = i0, 0.0
                for k, a in enumerate(seq):
                    tot += cost[k, i, a]
                    i = nxt[k, i, a]
                if tot < best:
                    best, best_seq = tot, list(seq)
            total, dp_seq = dp.rollout(choice, temps, np.arange(3), tr, i0)
            worst = max(worst, abs(total - best), abs(values[0, i0] - best))
            same_seq &= [int(a) for a in dp_seq] == best_seq
    ok = worst < 1e-12 and same_seq and elapsed < 1.0
    assert criterion(1, ok, f"max |DP - brute force| = {worst:.1e}, same actions = {same_seq}, solve {elapsed * 1e3:.1f} ms")


def test_c2_rule_close_to_dp(runs, criterion):
    parts, ok = [], True
    for c in CYCLES:
        q_dp = runs.get("dp", c).q_loss_gain
        q_rule = runs.get("rule", c).q_loss_gain
        rel = 100.0 * (q_rule - q_dp) / q_dp
        t_rule, t_solve = runs.timing[("rule", c, "case1")], runs.timing[("dp-solve", c)]
        ok &= rel <= 5.0 and t_rule <= 60.0 and t_solve <= 600.0
        parts.append(f"{c} +{rel:.2f}% (rule run {t_rule:.0f} s, dp solve {t_solve:.0f} s)")
    assert criterion(2, ok, "rule vs DP loss: " + ", ".join(parts))


def test_c3_degradation_reduction(runs, criterion):
    parts, ok = [], True
    for s in ("dp", "rule", "mpc"):
        for c in CYCLES:
            red = degradation_reduction(runs.get(s, c).q_loss_gain, runs.get("off", c).q_loss_gain)
            ok &= 10.0 <= red <= 30.0
            parts.append(f"{s}/{c} {red:.1f}%")
    assert criterion(3, ok, "reduction vs off: " + ", ".join(parts))


def test_c4_temperature_regulation(runs, criterion):
    parts, ok = [], True
    for s in ("dp", "rule", "mpc"):
        for c in CYCLES:
            t = runs.get(s, c).final.battery.t_bat
            ok &= abs(t - 25.0) <= 0.2
            parts.append(f"{s}/{c} {t:.3f}")
    assert criterion(4, ok, "final T_bat [degC]: " + ", ".join(parts))


def test_c5_cycle_ingestion(criterion):
    target = {"nycc": 11.40, "sc03": 34.58, "us06": 77.36}
    dev = {c: 100.0 * (bundled_cycle(c).mean_speed / v - 1.0) for c, v in target.items()}
    ok = all(abs(d) <= 2.0 for d in dev.values())
    assert criterion(5, ok, "mean speed deviation: " + ", ".join(f"{c} {d:+.2f}%" for c, d in dev.items()))


def test_c6_economy_identities(runs, criterion):
    parts, ok = [], True
    for s in ("dp", "rule"):
        for c in CYCLES:
            q, q_off = runs.q_per_km(s, c), runs.q_per_km("off", c)
            ext = life_extension(q, q_off)
            red = degradation_reduction(q, q_off)
            ok &= 10.0 <= ext <= 35.0
            ok &= abs(ext - red / (100.0 - red) * 100.0) <= 1e-9 * max(1.0, abs(ext))
            parts.append(f"{s}/{c} +{ext:.1f}%")
    assert criterion(6, ok, "life extension: " + ", ".join(parts) + "; identity exact")


def test_c7_sensitivity_orderings(runs, criterion):
    def cost_red(case, c):
        return runs.cost_per_100km("off", c, case) - runs.cost_per_100km("rule", c, case)

    def deg_red(case, c):
        return degradation_reduction(runs.q_per_km("rule", c, case), runs.q_per_km("off", c, case))

    parts, ok = [], True
    for c in CYCLES:
        r1, r2, r3 = cost_red("case1", c), cost_red("case2", c), cost_red("case3", c)
        gap = abs(deg_red("case1", c) - deg_red("case4", c))
        ok &= r3 > r1 > r2 and gap <= 1.0
        parts.append(f"{c} cost red c3 {r3:.3f} > c1 {r1:.3f} > c2 {r2:.3f}, |c1-c4| deg {gap:.2f} pt")
    assert criterion(7, ok, "rule strategy; " + "; ".join(parts))


def test_c8_aging_law(criterion):
    ok = aging_step(0.0, 30.0, 0.05, 1.0) == 0.0 and all(aging_step(i, 30.0, 0.05, 1.0) > 0 for i in (-50.0, 1e-3, 100.0))
    temps = np.linspace(0.0, 50.0, 26)
    ok &= all(np.diff([aging_step(120.0, t, 0.05, 1.0) for t in temps]) > 0)
    prior = np.linspace(1e-4, 0.2, 21)
    ok &= all(np.diff([aging_step(120.0, 25.0, q, 1.0) for q in prior]) < 0)
    rel = abs(aging_step(120.0, 25.0, 0.05, 1.0) / AGING_ORACLE - 1.0)
    ok &= rel < 1e-3
    assert criterion(8, ok, f"zero iff I=0, increasing in T, decreasing in prior loss, oracle rel err {rel:.1e}")


def test_c9_invariants(plant, cycles, criterion):
    from battcool.btms import BtmsState, coolant_outlet, cooling_rate
    from battcool.dp import ThermalModel, bellman_residual, nominal_soc
    from battcool.cost import DpConfig
    from battcool.vehicle import cycle_power

    rng = np.random.default_rng(3)
    pp = plant.btms
    t_in, t_bat = rng.uniform(0, 60, 200), rng.uniform(0, 60, 200)
    out = coolant_outlet(t_in, t_bat, pp)
    exchange = bool(np.all((out >= np.minimum(t_in, t_bat) - 1e-12) & (out <= np.maximum(t_in, t_bat) + 1e-12)))
    dead = all(cooling_rate(p, BtmsState(28, 30, 0), 33.0, 60.0, pp, plant.table) == 0 for p in (0.0, 250.0, 499.9))

    traj = simulate(cycles["sc03"], RuleBased(RuleParams.preset("suburban")), plant)
    charge = (traj["i_bat"]).sum() / 3600.0 / plant.battery.capacity_pack
    conserved = abs(0.95 - traj.final.battery.soc - charge) < 1e-9
    admissible = bool(np.all((traj["p_comp"] == 0) | ((traj["p_comp"] >= 500) & (traj["p_comp"] <= 4500))))

    cfg = DpConfig(n_temp_states=34, n_actions=21)
    cyc = cycles["us06"]
    policy = dp.solve(cyc, plant, cfg)
    v, _ = cyc.speed_pairs()
    model = ThermalModel(plant, policy.temps, cfg.action_grid(), cycle_power(cyc, plant.vehicle), v,
                         nominal_soc(cyc, plant))
    resid = bellman_residual(policy.values, policy.temps, model.step)
    admissible &= not np.any((policy.actions > 0) & (policy.actions < 500))
    ok = exchange and dead and conserved and admissible and resid <= 1e-9
    assert criterion(9, ok, f"exchange bound {exchange}, dead band {dead}, charge {conserved}, "
                            f"admissible {admissible}, Bellman residual {resid:.1e}")


def test_c10_fit_round_trip(criterion):
    from battcool.btms import default_lambda_table, fit_lambda, fit_quality
    from test_btms import synthetic_samples

    truth = default_lambda_table()
    s = synthetic_samples(truth)
    fitted = fit_lambda(s)
    err = float(np.max(np.abs(fitted.coefs - truth.coefs) / np.maximum(np.abs(truth.coefs), 1e-300)))
    quality = fit_quality(fitted, s)
    ok = err <= 1e-8 and quality == (1.0, 1.0)
    assert criterion(10, ok, f"max rel coefficient error {err:.1e}, fit quality {quality}")
