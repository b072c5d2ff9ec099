"""Per-step cost shared by the optimisers and the economy ledger.

A step costs battery wear plus cooling electricity. Wear is priced as the
share of a replacement pack consumed: the pack price is spread over the loss
budget that ends its life. Because loss depends on the history through the
self-damping term, the wear is averaged over a fixed set of prior-loss
anchors spanning the pack's life instead of being tracked as a state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import END_OF_LIFE, damping_factor, fade_rate_factor
from .errors import ConfigError

J_PER_KWH = 3.6e6

# Multiplier applied to the per-step loss before dividing by the loss budget.
# "percent" prices the fade law's native percent output against the 0.2
# budget; "fraction" converts to a fraction first.
LOSS_UNITS = {"percent": 100.0, "fraction": 1.0}


@dataclass(frozen=True)
class DpConfig:
    n_temp_states: int = 111
    n_actions: int = 111
    t_min: float = 24.0
    t_max: float | None = None  # None -> t_air + 2
    t_target: float = 25.0
    price_bat: float = 150.0  # USD/kWh
    price_ele: float = 0.1  # USD/kWh
    q_loss_anchors: tuple = (1e-4, 0.05, 0.10, 0.15, 0.20)
    eol_fraction: float = END_OF_LIFE
    loss_units: str = "percent"

    def __post_init__(self):
        if self.n_temp_states < 2 or self.n_actions < 2:
            raise ConfigError("DP grids need at least two points")
        if self.t_max is not None and not self.t_min < self.t_target < self.t_max:
            raise ConfigError("need t_min < t_target < t_max")
        if not self.t_min < self.t_target:
            raise ConfigError("need t_min < t_target")
        if not self.q_loss_anchors or min(self.q_loss_anchors) <= 0:
            raise ConfigError("capacity-loss anchors must be strictly positive")
        if self.loss_units not in LOSS_UNITS:
            raise ConfigError(f"loss_units must be one of {sorted(LOSS_UNITS)}")
        if self.price_bat < 0 or self.price_ele < 0 or self.eol_fraction <= 0:
            raise ConfigError("prices must be >= 0 and the end-of-life loss > 0")
        object.__setattr__(self, "q_loss_anchors", tuple(float(a) for a in self.q_loss_anchors))

    def temp_max(self, t_air):
        return t_air + 2.0 if self.t_max is None else self.t_max

    def temperature_grid(self, t_air):
        hi = self.temp_max(t_air)
        if not self.t_target < hi:
            raise ConfigError(f"upper temperature bound {hi} must exceed the target {self.t_target}")
        return np.linspace(self.t_min, hi, self.n_temp_states)

    def action_grid(self, p_lo=500.0, p_hi=4500.0):
        """Zero plus ``n_actions - 1`` evenly spaced powers across the operating range."""
        return np.concatenate([[0.0], np.linspace(p_lo, p_hi, self.n_actions - 1)])


def pack_price(capacity_ah, voltage, price_bat):
    """Replacement cost of the pack in USD."""
    return capacity_ah * voltage * price_bat / 1000.0


@dataclass(frozen=True)
class CostModel:
    """Precomputed constants of the stage cost for one pack and price set."""

    replacement: float
    anchor_damping: float
    loss_scale: float
    eol: float
    price_ele: float
    capacity_ah: float

    @classmethod
    def build(cls, config, battery):
        return cls(
            replacement=pack_price(battery.capacity_pack, battery.nominal_voltage, config.price_bat),
            anchor_damping=float(np.mean(damping_factor(np.array(config.q_loss_anchors)))),
            loss_scale=LOSS_UNITS[config.loss_units],
            eol=config.eol_fraction,
            price_ele=config.price_ele,
            capacity_ah=battery.capacity_pack,
        )

    def wear_per_loss(self):
        """USD per unit of capacity-loss fraction."""
        return self.replacement * self.loss_scale / self.eol

    def degradation(self, i_bat, t_bat, ts):
        mean_loss = fade_rate_factor(i_bat, t_bat, ts, self.capacity_ah) * self.anchor_damping / 100.0
        return self.wear_per_loss() * mean_loss

    def electricity(self, p_cooling, ts):
        return self.price_ele * p_cooling * ts / J_PER_KWH


def stage_cost(i_bat, t_bat, p_cooling, config, battery=None, ts=1.0):
    """Wear plus electricity cost (USD) of one step."""
    from .cell import BatteryParams

    model = CostModel.build(config, battery or BatteryParams())
    return model.degradation(i_bat, t_bat, ts) + model.electricity(p_cooling, ts)
