"""Online cooling controllers sharing the ``reset``/``act`` interface of :func:`simulate`."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dp import DpPolicyController, ThermalModel, interp_uniform
from .errors import ConfigError
from .simulation import NoCooling

__all__ = [
    "NoCooling", "DpPolicyController", "RuleParams", "RuleBased", "rule_action",
    "RULE_PRESETS", "CYCLE_PRESET", "MpcParams", "Mpc", "extract_rules", "make_controller",
]

FAST, SLOW, MAINTAIN = "fast", "slow", "maintain"

RULE_PRESETS = {"urban": 31.0, "suburban": 28.0, "highway": 26.0}
CYCLE_PRESET = {"nycc": "urban", "sc03": "suburban", "us06": "highway"}


@dataclass(frozen=True)
class RuleParams:
    t_sw1: float = 28.0
    t_sw2: float = 25.0
    p_low: float = 532.0
    hysteresis: float = 0.1
    p_min: float = 500.0
    p_max: float = 4500.0

    def __post_init__(self):
        if not self.t_sw2 < self.t_sw1:
            raise ConfigError("rule thresholds need t_sw2 < t_sw1")
        if not self.p_min <= self.p_low <= self.p_max:
            raise ConfigError(f"p_low must lie in [{self.p_min}, {self.p_max}]")
        if self.hysteresis < 0:
            raise ConfigError("hysteresis must be >= 0")

    @classmethod
    def preset(cls, name, **overrides):
        try:
            t_sw1 = RULE_PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown rule preset {name!r}; choose from {sorted(RULE_PRESETS)}") from None
        return cls(**{"t_sw1": t_sw1, **overrides})


def next_stage(stage, t_bat, params):
    """Stage after observing ``t_bat``. Moves at most one stage per call."""
    if stage is None:
        if t_bat > params.t_sw1:
            return FAST
        return SLOW if t_bat > params.t_sw2 else MAINTAIN
    if stage == FAST:
        return FAST if t_bat > params.t_sw1 else SLOW
    if stage == SLOW:
        return MAINTAIN if t_bat <= params.t_sw2 else SLOW
    return SLOW if t_bat > params.t_sw2 + params.hysteresis else MAINTAIN


def rule_action(stage, p_d, params):
    """Compressor power for a stage and traction demand."""
    if stage == MAINTAIN:
        return 0.0
    if p_d < 0:
        regen = min(-p_d, params.p_max)
        if regen >= params.p_min:
            return float(regen)
        return params.p_low if stage == FAST else 0.0
    return params.p_low if stage == FAST else 0.0


class RuleBased:
    """Three-stage controller: continuous low-power cooling, regen-only cooling, then idle."""

    name = "rule"
    needs_btms = True

    def __init__(self, params=None):
        self.params = params or RuleParams()
        self.stage = None
        self.stages = []

    def reset(self, plant, p_d, v):
        self.stage = None
        self.stages = []

    def act(self, k, state, p_d):
        self.stage = next_stage(self.stage, state.battery.t_bat, self.params)
        self.stages.append(self.stage)
        return rule_action(self.stage, p_d, self.params)


@dataclass(frozen=True)
class MpcParams:
    horizon: int = 10
    alpha: float = 5e-3  # USD per degC^2 per second
    t_target: float = 25.0
    preview: bool = True
    n_actions: int = 9
    n_temps: int = 26
    span_below: float = 0.25  # local temperature grid, degC under the current value
    span_above: float = 0.10

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("MPC horizon must be >= 1")
        if self.alpha < 0:
            raise ConfigError("MPC alpha must be >= 0")
        if self.n_actions < 2 or self.n_temps < 2:
            raise ConfigError("MPC grids need at least two points")
        if not self.preview:
            raise ConfigError("only perfect preview is supported")


class Mpc:
    """Receding-horizon tracking controller.

    Each step solves a short DP over a local temperature grid around the
    measured temperature. The stage cost is a quadratic penalty on the
    end-of-step temperature error plus cooling electricity; the first action
    is evaluated exactly from the measured temperature.
    """

    name = "mpc"
    needs_btms = True

    def __init__(self, params=None):
        self.params = params or MpcParams()
        self.model = None

    def reset(self, plant, p_d, v):
        prm = self.params
        costs = replace(plant.costs, t_target=prm.t_target) if plant.costs.t_target != prm.t_target else plant.costs
        self.plant = replace(plant, costs=costs)
        actions = np.concatenate([[0.0], np.linspace(plant.btms.p_comp_min, plant.btms.p_comp_max, prm.n_actions - 1)])
        self.model = ThermalModel(self.plant, np.zeros(1), actions, p_d, v, np.zeros(len(p_d)))
        self.elec = costs.price_ele * self.model.p_cool * plant.ts / 3.6e6  # (1, nA)
        self.n = len(p_d)

    def _stage(self, k, frozen, lock):
        t_next, _, bad = self.model.predict(k, None, frozen=frozen)
        prm = self.params
        cost = prm.alpha * self.plant.ts * (t_next - prm.t_target) ** 2 + self.elec
        cost[bad | np.broadcast_to(lock, bad.shape)] = np.inf
        return t_next, cost

    def plan(self, k, t_bat, soc):
        """Optimal first action and its predicted horizon cost."""
        prm = self.params
        h = min(prm.horizon, self.n - k)
        lo, hi = t_bat - prm.span_below, t_bat + prm.span_above
        grid = np.linspace(lo, hi, prm.n_temps)
        step = grid[1] - grid[0]
        # one table lookup for the local grid plus the measured temperature (last row)
        rows = np.append(grid, t_bat)
        frozen = self.model.freeze(rows, soc)
        lock = self.model.lockout(rows)
        value = np.zeros(prm.n_temps)
        if h > 1:
            head = tuple(x[:-1] if np.ndim(x) else x for x in frozen)
            t_all, c_all = self._stage(np.arange(k + 1, k + h), head, lock[:-1])
            for j in range(h - 2, -1, -1):
                value = np.min(c_all[j] + interp_uniform(value, lo, step, t_all[j]), axis=1)
        tail = tuple(x[-1:] if np.ndim(x) else x for x in frozen)
        t_next, cost = self._stage(k, tail, lock[-1:])
        total = (cost + interp_uniform(value, lo, step, t_next))[0]
        i = int(np.argmin(total))
        return float(self.model.actions[i]), float(total[i])

    def act(self, k, state, p_d):
        if self.params.alpha == 0:
            return 0.0
        return self.plan(k, state.battery.t_bat, state.battery.soc)[0]


def extract_rules(traj, t_target=25.0, p_min=500.0, window=60):
    """Summarise a DP trajectory as three-stage rule parameters.

    The fast stage is the initial stretch of continuous compressor operation
    (gaps shorter than ``window`` samples tolerated); ``t_sw1`` is the pack
    temperature where it ends and ``p_low`` the median compressor power under
    traction inside it. ``t_sw2`` is the temperature after which the
    compressor stays off, floored at the target.
    """
    p = np.asarray(traj["p_comp"])
    t = np.asarray(traj["t_bat"])
    pd = np.asarray(traj["p_d"])
    on = p >= p_min
    if not on.any():
        return {"t_sw1": float("nan"), "t_sw2": t_target, "p_low": float("nan"),
                "fast_end": 0, "slow_end": 0}
    off_run = 0
    fast_end = 0
    for k in range(np.argmax(on), len(p)):
        if on[k]:
            off_run = 0
            fast_end = k + 1
        else:
            off_run += 1
            if off_run >= window:
                break
    idx = np.nonzero(on)[0]
    slow_end = int(idx[-1]) + 1
    fast = slice(0, fast_end)
    traction = on[fast] & (pd[fast] >= 0)
    p_low = float(np.median(p[fast][traction])) if traction.any() else float("nan")
    return {
        "t_sw1": float(t[fast_end - 1]),
        "t_sw2": float(max(t[slow_end - 1], t_target)),
        "p_low": p_low,
        "fast_end": fast_end,
        "slow_end": slow_end,
    }


def make_controller(kind, *, rule=None, mpc=None, policy=None):
    if kind == "off":
        return NoCooling()
    if kind == "rule":
        return RuleBased(rule)
    if kind == "mpc":
        return Mpc(mpc)
    if kind == "dp-policy":
        if policy is None:
            raise ConfigError("dp-policy controller needs a solved policy")
        return DpPolicyController(policy)
    raise ConfigError(f"unknown controller {kind!r}")
