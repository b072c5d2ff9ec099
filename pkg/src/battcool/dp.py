"""Offline battery-cooling optimisation by backward dynamic programming.

The state is pack temperature on a uniform grid; the control is compressor
power. SoC-dependent quantities (open-circuit voltage, the SoC bounds) come
from a nominal trajectory computed with the cooling system off, and the
coolant loop is taken at its quasi-steady operating point. Forward execution
then replays the policy on the full plant with true SoC and coolant dynamics.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .btms import air_mass_flow, V_MAX_KMH
from .cell import KELVIN
from .cost import DpConfig, stage_cost  # noqa: F401  (re-exported)
from .errors import DataError, GridEscape, InfeasibleEverywhere
from .simulation import NoCooling, initial_state, simulate
from .vehicle import cycle_power


def interp_uniform(values, lo, step, x):
    """Linear interpolation of ``values`` sampled at ``lo + step*i``, clamped at the ends."""
    n = values.shape[-1]
    pos = np.minimum(np.maximum((x - lo) / step, 0.0), n - 1)
    i = np.minimum(pos.astype(np.intp), n - 2)
    w = pos - i
    return values[i] * (1.0 - w) + values[i + 1] * w


def backward_induction(n_steps, temps, actions, transition, store_values=True):
    """Generic finite-horizon DP on a uniform 1-D grid.

    ``transition(k)`` returns ``(t_next, cost)``, both shaped
    ``(len(temps), len(actions))``; inadmissible pairs carry ``inf`` cost.
    Successor values are interpolated linearly and clamped to the grid.
    Ties go to the lowest action index. Returns ``(action_index, values)``
    where ``values[k]`` is the cost-to-go before step ``k``.
    """
    temps = np.asarray(temps, dtype=float)
    lo, step = temps[0], temps[1] - temps[0]
    if not np.allclose(np.diff(temps), step, rtol=1e-9, atol=1e-12):
        raise DataError("temperature grid must be uniform")
    nt = len(temps)
    choice = np.zeros((n_steps, nt), dtype=np.int16 if len(actions) < 32768 else np.int32)
    values = np.zeros((n_steps + 1, nt)) if store_values else None
    v = np.zeros(nt)
    rows = np.arange(nt)
    for k in range(n_steps - 1, -1, -1):
        t_next, cost = transition(k)
        total = cost + interp_uniform(v, lo, step, t_next)
        idx = np.argmin(total, axis=1)
        best = total[rows, idx]
        if not np.all(np.isfinite(best)):
            bad = temps[~np.isfinite(best)][0]
            raise InfeasibleEverywhere(f"no admissible action at step {k}, T={bad:.2f} degC")
        choice[k] = idx
        v = best
        if store_values:
            values[k] = v
    return choice, values


def bellman_residual(values, temps, transition):
    """Largest |V(k, T) - min_a [cost + V(k+1, T')]| over every stored cell.

    ``values`` has one more row than there are steps (the last is terminal).
    """
    temps = np.asarray(temps, dtype=float)
    lo, step = temps[0], temps[1] - temps[0]
    worst = 0.0
    for k in range(values.shape[0] - 1):
        t_next, cost = transition(k)
        best = np.min(cost + interp_uniform(values[k + 1], lo, step, t_next), axis=1)
        scale = np.maximum(1.0, np.abs(values[k]))
        worst = max(worst, float(np.max(np.abs(best - values[k]) / scale)))
    return worst


def monotone_violations(values, tol=1e-12):
    """(step, node) pairs where the cost-to-go decreases with temperature."""
    d = np.diff(values, axis=1)
    return np.argwhere(d < -tol * np.maximum(1.0, np.abs(values[:, 1:])))


@dataclass
class Policy:
    """Optimal compressor power per (step, temperature node)."""

    actions: np.ndarray  # (n_steps, n_temps), W
    temps: np.ndarray
    config: DpConfig
    values: np.ndarray | None = None
    fingerprint: str = ""

    @property
    def n_steps(self):
        return self.actions.shape[0]

    def cost_to_go(self, t_bat, k=0):
        if self.values is None:
            raise DataError("policy was solved without storing values")
        t = self.temps
        return float(interp_uniform(self.values[k], t[0], t[1] - t[0], np.asarray(t_bat, dtype=float)))

    def lookup(self, k, t_bat):
        """Interpolated action, with the target lockout and the dead band applied."""
        t = self.temps
        if not t[0] - 1e-9 <= t_bat <= t[-1] + 1e-9:
            raise GridEscape(f"T_bat={t_bat:.3f} degC left the policy grid [{t[0]}, {t[-1]}]")
        if k >= self.n_steps:
            raise GridEscape(f"step {k} beyond the policy horizon {self.n_steps}")
        if t_bat <= self.config.t_target:
            return 0.0
        a = float(np.interp(t_bat, t, self.actions[k]))
        return 0.0 if a < 500.0 else a

    def save(self, path):
        path = Path(path)
        levels, index = np.unique(self.actions, return_inverse=True)
        np.savez_compressed(
            path,
            # actions come from a small grid: store level indices for an exact, compact round trip
            levels=levels,
            index=index.reshape(self.actions.shape).astype(np.int16 if len(levels) < 32768 else np.int32),
            temps=self.temps,
            config=json.dumps(asdict(self.config)),
            fingerprint=self.fingerprint,
        )
        return path

    @classmethod
    def load(cls, path):
        try:
            with np.load(path, allow_pickle=False) as z:
                cfg = json.loads(str(z["config"]))
                cfg["q_loss_anchors"] = tuple(cfg["q_loss_anchors"])
                return cls(
                    z["levels"][z["index"]], z["temps"], DpConfig(**cfg),
                    fingerprint=str(z["fingerprint"]),
                )
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot load policy {path}: {exc}") from exc


class ThermalModel:
    """Vectorised one-step pack-temperature model over (temperature, action) grids.

    Used by the DP backward pass and by the MPC predictor. The coolant loop
    is replaced by its quasi-steady outlet temperature, so the state is the
    pack temperature alone.
    """

    def __init__(self, plant, temps, actions, p_d, v, soc):
        self.plant = plant
        self.temps = np.asarray(temps, dtype=float)
        self.actions = np.asarray(actions, dtype=float)
        self.p_d = np.asarray(p_d, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.soc = np.asarray(soc, dtype=float)
        self.m_air = air_mass_flow(np.clip(self.v, 0.0, V_MAX_KMH))
        self.cm = plant.cost_model()
        pp = plant.btms
        a_row = self.actions[None, :]
        lam = plant.table.coefficients(plant.t_air, pp.m_clnt)
        e = pp.exchange_factor
        kk = e / (1.0 - e) / pp.coolant_capacity_rate
        b = lam[2] + lam[4] * pp.m_clnt
        # quasi-steady cooling = (a(P) + b*T_bat + c*m_air) / (1 + k b); see btms.quasi_steady_cooling
        den = 1.0 + kk * b
        self._q_act = (lam[0] * a_row + lam[1] * a_row**2 + lam[5]) / den
        self._q_temp = b / den
        self._q_air = lam[3] * plant.t_air / den
        self._active = a_row >= pp.p_comp_min
        self.p_cool = a_row + pp.aux_power

    def freeze(self, t_col, soc):
        """Cache the table lookups that depend only on temperature and SoC."""
        bp = self.plant.battery
        t_col = np.asarray(t_col, dtype=float).reshape(-1, 1)
        rd, rc = bp.resistances(soc, t_col)
        return (
            t_col,
            float(soc),
            float(bp.ocv(soc)),
            rd,
            rc,
            (t_col + KELVIN) * float(bp.dvdt(soc)),
            self._q_temp * t_col,
        )

    def predict(self, k, t_col, soc=None, frozen=None):
        """Next temperature, current and infeasibility mask for temperatures ``t_col`` (column).

        ``k`` may be an array of steps, in which case outputs gain a leading
        step axis (SoC is then taken from ``soc`` or ``frozen`` for all of them).
        """
        pl = self.plant
        bp, ts = pl.battery, pl.ts
        if frozen is None:
            frozen = self.freeze(t_col, self.soc[k] if soc is None else soc)
        t_col, soc, v_oc, rd, rc, entropy, q_temp = frozen
        if np.ndim(k):
            p_d = self.p_d[k].reshape(-1, 1, 1)
            m_air = self.m_air[k].reshape(-1, 1, 1)
        else:
            p_d, m_air = self.p_d[k], self.m_air[k]
        p_bat = (p_d + self.p_cool) / pl.vehicle.eta_dcac
        r = np.where(p_bat >= 0, rd, rc)
        disc = v_oc * v_oc - 4.0 * r * p_bat
        i_bat = 2.0 * p_bat / (v_oc + np.sqrt(np.maximum(disc, 0.0)))
        bad = (disc < 0) | (i_bat < bp.i_min) | (i_bat > bp.i_max)
        soc_next = soc - i_bat * ts / (3600.0 * bp.capacity_pack)
        bad |= (soc_next < bp.soc_min) | (soc_next > bp.soc_max)
        q_gen = i_bat * i_bat * r + i_bat * entropy
        q_cool = self._q_act + q_temp + self._q_air * m_air
        q_cool = np.where(self._active & (q_cool > 0), q_cool, 0.0)
        t_next = t_col + ts * (q_gen - q_cool) / bp.heat_capacity
        return t_next, i_bat, bad

    def lockout(self, t_col):
        """Actions barred at or below the target temperature (only zero remains)."""
        t_col = np.asarray(t_col, dtype=float).reshape(-1, 1)
        return (t_col <= self.plant.costs.t_target) & (self.actions[None, :] > 0)

    def step(self, k):
        t_col = self.temps[:, None]
        t_next, i_bat, bad = self.predict(k, t_col)
        ts = self.plant.ts
        cost = self.cm.degradation(i_bat, t_col, ts) + self.cm.electricity(self.p_cool, ts)
        cost = np.where(bad | self.lockout(t_col), np.inf, cost)
        return t_next, cost


def nominal_soc(cycle, plant, state=None):
    """SoC before every step of an uncooled run; used to freeze SoC effects in the backward pass."""
    traj = simulate(cycle, NoCooling(), plant, state=state, soc_stop=-1.0)
    start = (state or initial_state(plant)).battery.soc
    return np.concatenate([[start], traj["soc"][:-1]])


def config_fingerprint(*parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(json.dumps(p, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def solve_profile(p_d, v, soc, plant, config=None, store_values=True):
    """Backward DP for a traction-power sequence with its speeds and nominal SoC."""
    config = config or plant.costs
    if config != plant.costs:
        plant = replace(plant, costs=config)
    temps = config.temperature_grid(plant.t_air)
    actions = config.action_grid(plant.btms.p_comp_min, plant.btms.p_comp_max)
    n = len(p_d)
    if n == 0:
        return Policy(np.zeros((0, len(temps))), temps, config, np.zeros((1, len(temps))))
    model = ThermalModel(plant, temps, actions, p_d, v, soc)
    choice, values = backward_induction(n, temps, actions, model.step, store_values)
    return Policy(actions[choice], temps, config, values)


def solve(cycle, plant, config=None, state=None, store_values=True):
    """Backward DP over every step of ``cycle`` (all repetitions)."""
    config = config or plant.costs
    if config != plant.costs:
        plant = replace(plant, costs=config)
    p_d = cycle_power(cycle, plant.vehicle)
    v, _ = cycle.speed_pairs()
    soc = nominal_soc(cycle, plant, state)
    policy = solve_profile(p_d, v, soc, plant, config, store_values)
    policy.fingerprint = config_fingerprint(asdict(config), cycle.name, cycle.repeat, plant.t_air)
    return policy


def rollout(choice, temps, actions, transition, i0):
    """Forward pass of an index policy whose dynamics stay on grid nodes.

    Returns ``(total_cost, action_sequence)``; successors are rounded to the
    nearest node, which is exact for on-grid transitions.
    """
    temps = np.asarray(temps, dtype=float)
    i, total, seq = i0, 0.0, []
    for k in range(len(choice)):
        a = int(choice[k][i])
        t_next, cost = transition(k)
        total += float(cost[i, a])
        seq.append(actions[a])
        i = int(np.argmin(np.abs(temps - t_next[i, a])))
    return total, seq


class DpPolicyController:
    """Replays a solved :class:`Policy` by interpolating over temperature."""

    name = "dp"

    def __init__(self, policy):
        self.policy = policy

    def reset(self, plant, p_d, v):
        if len(p_d) > self.policy.n_steps:
            raise DataError(f"policy covers {self.policy.n_steps} steps, run needs {len(p_d)}")

    def act(self, k, state, p_d):
        return self.policy.lookup(k, state.battery.t_bat)


def execute(policy, cycle, plant, state=None):
    return simulate(cycle, DpPolicyController(policy), plant, state=state)
