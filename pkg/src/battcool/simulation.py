"""Coupled vehicle / pack / cooling-plant simulation.

One step runs, in order: traction power, cooling power, power balance, pack
current, heat generation, cooling rate, pack temperature, coolant loop, SoC
and capacity loss. Constraint breaches raise :class:`StepFailure`; nothing is
silently clamped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import btms as plant_mod
from .btms import BtmsParams, BtmsState, LambdaTable, default_lambda_table
from .cell import KELVIN, Q_LOSS_SEED, BatteryParams, BatteryState, aging_step
from .cost import CostModel, DpConfig
from .errors import InvalidActuation, StepFailure
from .vehicle import VehicleParams, cycle_power, power_balance, traction_power

COLUMNS = (
    "t", "v", "p_d", "p_comp", "p_bat", "i_bat", "soc", "t_bat", "t_clnt_in", "t_clnt_out",
    "q_gen", "q_cool", "dq_loss", "cost_deg", "cost_ele",
)
SOC_STOP = 0.10


@dataclass(frozen=True)
class Plant:
    """Everything a step needs besides the state and the control."""

    battery: BatteryParams = field(default_factory=BatteryParams)
    btms: BtmsParams = field(default_factory=BtmsParams)
    table: LambdaTable = field(default_factory=default_lambda_table)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    costs: DpConfig = field(default_factory=DpConfig)
    ts: float = 1.0
    btms_enabled: bool = True

    @property
    def t_air(self):
        return self.btms.t_air

    def cost_model(self):
        return CostModel.build(self.costs, self.battery)

    def without_btms(self):
        return replace(self, btms_enabled=False)


@dataclass(frozen=True)
class SimState:
    battery: BatteryState
    btms: BtmsState
    time_index: int = 0
    energy_out: float = 0.0  # J drawn from the pack
    energy_in: float = 0.0  # J pushed into the pack
    cost_deg: float = 0.0
    cost_ele: float = 0.0
    distance_km: float = 0.0


def initial_state(plant, soc=0.95, t_bat=None, q_loss=Q_LOSS_SEED):
    t0 = plant.t_air if t_bat is None else t_bat
    return SimState(
        BatteryState(soc=soc, t_bat=t0, q_loss=q_loss, v_term=float(plant.battery.ocv(soc))),
        BtmsState(t_clnt_in=plant.t_air, t_clnt_out=plant.t_air, p_comp=0.0),
    )


def simulate_step(state, p_comp, v, v_next, plant, cost_model=None):
    """Advance the coupled model one sample. Returns ``(new_state, record)``."""
    bp, pp, ts = plant.battery, plant.btms, plant.ts
    bat = state.battery
    k = state.time_index
    cm = cost_model or plant.cost_model()

    p_d = traction_power(v, v_next, plant.vehicle, ts)
    if plant.btms_enabled:
        p_cooling = plant_mod.total_cooling_power(p_comp, pp)
    else:
        if p_comp != 0:
            raise InvalidActuation("compressor request with the cooling system switched off")
        p_cooling = 0.0
    p_bat = power_balance(p_d, p_cooling, plant.vehicle)

    v_oc = float(bp.ocv(bat.soc))
    r = float(bp.resistance(bat.soc, bat.t_bat, p_bat >= 0))
    disc = v_oc * v_oc - 4.0 * r * p_bat
    if disc < 0:
        raise StepFailure("power", k, f"{p_bat:.0f} W exceeds pack capability")
    i_bat = 2.0 * p_bat / (v_oc + disc**0.5)
    if not bp.i_min <= i_bat <= bp.i_max:
        raise StepFailure("current", k, f"{i_bat:.1f} A outside [{bp.i_min}, {bp.i_max}]")

    q_gen = i_bat * i_bat * r + i_bat * (bat.t_bat + KELVIN) * float(bp.dvdt(bat.soc))
    if plant.btms_enabled:
        q_cool = plant_mod.cooling_rate(p_comp, state.btms, plant.t_air, v, pp, plant.table)
    else:
        q_cool = 0.0
    t_next = bat.t_bat + ts * (q_gen - q_cool) / bp.heat_capacity

    t_in = plant_mod.coolant_inlet(state.btms.t_clnt_out, q_cool, pp)
    t_out = plant_mod.coolant_outlet(t_in, t_next, pp)

    soc_next = bat.soc - i_bat * ts / (3600.0 * bp.capacity_pack)
    if not bp.soc_min <= soc_next <= bp.soc_max:
        raise StepFailure("soc", k, f"SoC {soc_next:.4f} outside [{bp.soc_min}, {bp.soc_max}]")
    dq = aging_step(i_bat, bat.t_bat, bat.q_loss, ts, bp.capacity_pack)

    c_deg = float(cm.degradation(i_bat, bat.t_bat, ts))
    c_ele = cm.electricity(p_cooling, ts)
    e = p_bat * ts
    new = SimState(
        BatteryState(soc_next, t_next, bat.q_loss + dq, v_oc - i_bat * r, i_bat),
        BtmsState(t_in, t_out, float(p_comp)),
        k + 1,
        state.energy_out + max(e, 0.0),
        state.energy_in + max(-e, 0.0),
        state.cost_deg + c_deg,
        state.cost_ele + c_ele,
        state.distance_km + 0.5 * (v + v_next) * ts / 3600.0,
    )
    rec = (k * ts, v, p_d, float(p_comp), p_bat, i_bat, soc_next, t_next, t_in, t_out,
           q_gen, q_cool, dq, c_deg, c_ele)
    return new, rec


class NoCooling:
    """Benchmark with the whole cooling system switched off."""

    name = "off"
    needs_btms = False

    def reset(self, plant, p_d, v):
        pass

    def act(self, k, state, p_d):
        return 0.0


@dataclass
class Trajectory:
    """Per-step records of one run plus its final state."""

    cycle: str
    controller: str
    data: dict
    final: SimState
    initial: SimState
    repeats_done: int
    steps_per_repeat: int
    failure: Exception | None = None

    def __len__(self):
        return len(self.data["t"])

    def __getitem__(self, key):
        return self.data[key]

    @property
    def q_loss_gain(self):
        """Capacity loss accrued during the run (fraction)."""
        return self.final.battery.q_loss - self.initial.battery.q_loss

    @property
    def total_cost(self):
        return self.final.cost_deg + self.final.cost_ele

    def to_csv(self, path, fingerprint=None):
        path = Path(path)
        with path.open("w", newline="") as f:
            if fingerprint:
                f.write(f"# fingerprint: {fingerprint}\n")
            w = csv.writer(f)
            w.writerow(COLUMNS)
            cols = [self.data[c] for c in COLUMNS]
            for row in zip(*cols):
                w.writerow([repr(float(x)) for x in row])
        return path


def simulate(cycle, controller, plant, state=None, soc_stop=SOC_STOP, raise_on_failure=True):
    """Run ``controller`` over every repetition of ``cycle``.

    The run stops early at a cycle boundary once SoC has fallen below
    ``soc_stop``. A constraint breach raises :class:`StepFailure`
    (with the partial trajectory attached as ``exc.trajectory``) unless
    ``raise_on_failure`` is false, in which case it is stored on the result.
    """
    if not getattr(controller, "needs_btms", True):
        plant = plant.without_btms()
    state = state or initial_state(plant)
    start = state
    v, v_next = cycle.speed_pairs()
    p_d = cycle_power(cycle, plant.vehicle)
    controller.reset(plant, p_d, v)
    cm = plant.cost_model()
    n_rep = len(cycle)
    records = []
    failure = None
    repeats = 0
    try:
        for rep in range(cycle.repeat):
            if rep > 0 and state.battery.soc < soc_stop:
                break
            base = rep * n_rep
            for j in range(n_rep):
                k = base + j
                a = controller.act(k, state, p_d[k])
                state, rec = simulate_step(state, a, float(v[k]), float(v_next[k]), plant, cm)
                records.append(rec)
            repeats += 1
    except StepFailure as exc:
        failure = exc
    arr = np.array(records, dtype=float).reshape(-1, len(COLUMNS))
    data = {c: arr[:, i] for i, c in enumerate(COLUMNS)}
    traj = Trajectory(cycle.name, getattr(controller, "name", type(controller).__name__), data,
                      state, start, repeats, n_rep, failure)
    if failure is not None and raise_on_failure:
        failure.trajectory = traj
        raise failure
    return traj
