"""Electrical, thermal and aging model of the LiFePO4 pack.

All functions are pure and accept numpy arrays where it makes sense, so the
DP backward pass can evaluate a whole temperature x action grid at once.
Temperatures are in degrees Celsius at every public boundary; conversion to
kelvin happens inside :func:`aging_step` and :func:`heat_generation`.

Capacity loss is stored as a fraction (0.2 = end of life). The empirical
fade law is written in percent, so :func:`aging_step` converts on the way in
and on the way out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ._interp import bilinear_many
from .errors import DomainError, ParseError, PowerInfeasible

GAS_CONSTANT = 8.314  # J/(mol K)
KELVIN = 273.15

# capacity-fade law coefficients (percent form)
FADE_PREFACTOR = 9.78e-4
FADE_ACTIVATION = -15162.0
FADE_CRATE_SLOPE = 1516.0
FADE_EXPONENT_SCALE = 0.849
FADE_POWER = -0.1779

END_OF_LIFE = 0.2
Q_LOSS_SEED = 1e-4  # 0.01 %, keeps the negative power finite


def _read_csv(path):
    path = Path(path)
    try:
        with path.open(newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def _float(row, key, path):
    try:
        return float(row[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad or missing column {key!r}") from exc


@dataclass(frozen=True)
class CurveTable:
    """Piecewise-linear curve ``y(x)``, clamped outside the sampled range."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise ParseError("curve table needs two equal-length 1-D columns of >= 2 points")
        if np.any(np.diff(x) <= 0):
            raise ParseError("curve table abscissa must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __call__(self, q):
        return np.interp(q, self.x, self.y)

    @classmethod
    def from_csv(cls, path, xcol, ycol):
        rows = _read_csv(path)
        pairs = sorted((_float(r, xcol, path), _float(r, ycol, path)) for r in rows)
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))


@dataclass(frozen=True)
class ResistanceTable:
    """Pack resistance on a (SoC, temperature) grid, one layer per current direction."""

    soc: np.ndarray
    temp_c: np.ndarray
    discharge: np.ndarray  # shape (len(soc), len(temp_c))
    charge: np.ndarray

    def __post_init__(self):
        for name in ("soc", "temp_c", "discharge", "charge"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        shape = (len(self.soc), len(self.temp_c))
        if self.discharge.shape != shape or self.charge.shape != shape:
            raise ParseError(f"resistance grid must have shape {shape}")
        if np.any(np.diff(self.soc) <= 0) or np.any(np.diff(self.temp_c) <= 0):
            raise ParseError("resistance axes must be strictly increasing")
        if np.any(self.discharge <= 0) or np.any(self.charge <= 0):
            raise ParseError("resistance values must be strictly positive")

    def __call__(self, soc, temp_c, discharging):
        rd, rc = self.both(soc, temp_c)
        return np.where(discharging, rd, rc)

    def both(self, soc, temp_c):
        """(discharge, charge) resistances at the query points."""
        rd, rc = bilinear_many(self.soc, self.temp_c, (self.discharge, self.charge), soc, temp_c)
        return rd, rc

    @classmethod
    def from_csv(cls, path):
        rows = _read_csv(path)
        socs = sorted({_float(r, "soc", path) for r in rows})
        temps = sorted({_float(r, "temp_c", path) for r in rows})
        layers = {
            "discharge": np.full((len(socs), len(temps)), np.nan),
            "charge": np.full((len(socs), len(temps)), np.nan),
        }
        for r in rows:
            direction = r.get("direction", "").strip().lower()
            if direction not in layers:
                raise ParseError(f"{path}: direction must be 'charge' or 'discharge', got {direction!r}")
            i = socs.index(_float(r, "soc", path))
            j = temps.index(_float(r, "temp_c", path))
            layers[direction][i, j] = _float(r, "ohms", path)
        if any(np.isnan(v).any() for v in layers.values()):
            raise ParseError(f"{path}: resistance grid is incomplete")
        return cls(np.array(socs), np.array(temps), layers["discharge"], layers["charge"])


def _data_path(name):
    return resources.files("battcool") / "data" / name


def default_tables():
    with resources.as_file(_data_path("ocv.csv")) as p:
        ocv = CurveTable.from_csv(p, "soc", "volts")
    with resources.as_file(_data_path("resistance.csv")) as p:
        res = ResistanceTable.from_csv(p)
    with resources.as_file(_data_path("entropy.csv")) as p:
        ent = CurveTable.from_csv(p, "soc", "volts_per_kelvin")
    return ocv, res, ent


@dataclass(frozen=True)
class BatteryParams:
    capacity_pack: float = 120.0  # Ah
    nominal_voltage: float = 412.0
    n_cells: int = 250
    cell_heat_capacity: float = 2299.0  # J/degC per cell
    soc_min: float = 0.05
    soc_max: float = 1.0
    i_min: float = -240.0  # A, charging limit (2C)
    i_max: float = 360.0  # A, discharging limit (3C)
    ocv_table: CurveTable = None
    resistance_table: ResistanceTable = None
    entropy_table: CurveTable = None

    def __post_init__(self):
        if self.ocv_table is None or self.resistance_table is None or self.entropy_table is None:
            ocv, res, ent = default_tables()
            object.__setattr__(self, "ocv_table", self.ocv_table or ocv)
            object.__setattr__(self, "resistance_table", self.resistance_table or res)
            object.__setattr__(self, "entropy_table", self.entropy_table or ent)
        if self.capacity_pack <= 0 or self.n_cells <= 0 or self.cell_heat_capacity <= 0:
            raise DomainError("capacity, cell count and heat capacity must be positive")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise DomainError("need 0 <= soc_min < soc_max <= 1")
        if self.i_min >= 0 or self.i_max <= 0:
            raise DomainError("current bounds must straddle zero")
        lo, hi = self.soc_min, self.soc_max
        probe = np.linspace(lo, hi, 200)
        if np.any(np.diff(self.ocv_table(probe)) <= 0) or np.any(np.diff(self.ocv_table.y) <= 0):
            raise DomainError("OCV must be strictly increasing in SoC")

    @property
    def heat_capacity(self):
        """Lumped pack heat capacity in J/degC."""
        return self.n_cells * self.cell_heat_capacity

    def ocv(self, soc):
        return self.ocv_table(soc)

    def resistance(self, soc, t_bat, discharging):
        return self.resistance_table(soc, t_bat, discharging)

    def resistances(self, soc, t_bat):
        """(discharge, charge) resistances, sharing one table lookup."""
        return self.resistance_table.both(soc, t_bat)

    def dvdt(self, soc):
        return self.entropy_table(soc)

    def with_tables(self, ocv=None, resistance=None, entropy=None):
        return replace(
            self,
            ocv_table=ocv or self.ocv_table,
            resistance_table=resistance or self.resistance_table,
            entropy_table=entropy or self.entropy_table,
        )


@dataclass(frozen=True)
class BatteryState:
    soc: float
    t_bat: float
    q_loss: float = Q_LOSS_SEED
    v_term: float = field(default=float("nan"))
    i_bat: float = 0.0


def current_from_power(p_bat, soc, t_bat, params):
    """Pack current (A, positive discharging) that delivers ``p_bat`` watts.

    Solves ``P = V_oc I - I^2 R`` for the high-voltage root. Written as
    ``2P / (V_oc + sqrt(V_oc^2 - 4RP))`` to avoid cancellation at low power.
    Raises :class:`PowerInfeasible` when the discriminant is negative.
    """
    v_oc = params.ocv(soc)
    r = params.resistance(soc, t_bat, np.asarray(p_bat) >= 0)
    disc = v_oc * v_oc - 4.0 * r * p_bat
    if np.any(disc < 0):
        raise PowerInfeasible(f"demanded {np.max(p_bat):.0f} W exceeds pack capability")
    i = 2.0 * p_bat / (v_oc + np.sqrt(disc))
    return float(i) if np.ndim(i) == 0 else i


def terminal_voltage(i_bat, soc, t_bat, params):
    return params.ocv(soc) - i_bat * params.resistance(soc, t_bat, i_bat >= 0)


def soc_step(soc, i_bat, ts, capacity_pack):
    """Coulomb counting. No clamping: bound violations are the caller's business."""
    return soc - i_bat * ts / (3600.0 * capacity_pack)


def fade_rate_factor(i_bat, t_bat, ts, capacity_pack=120.0):
    """Loss increment in percent for a prior loss of 1 %, i.e. without the self-damping term."""
    i_abs = np.abs(i_bat)
    c_rate = i_abs / capacity_pack
    t_k = np.asarray(t_bat, dtype=float) + KELVIN
    arrhenius = np.exp(
        (FADE_ACTIVATION + FADE_CRATE_SLOPE * c_rate) / (FADE_EXPONENT_SCALE * GAS_CONSTANT * t_k)
    )
    return FADE_PREFACTOR * i_abs * ts / 3600.0 * arrhenius


def damping_factor(q_loss_prev):
    """Self-damping multiplier of the fade law; ``q_loss_prev`` is a fraction."""
    q = np.asarray(q_loss_prev, dtype=float)
    if np.any(q <= 0):
        raise DomainError("prior capacity loss must be strictly positive")
    return (100.0 * q) ** FADE_POWER


def aging_step(i_bat, t_bat, q_loss_prev, ts, capacity_pack=120.0):
    """Capacity-loss increment (fraction) over one sample.

    ``q_loss_prev`` is the accumulated loss as a fraction and must be > 0;
    seed fresh packs with :data:`Q_LOSS_SEED`.
    """
    out = fade_rate_factor(i_bat, t_bat, ts, capacity_pack) * damping_factor(q_loss_prev) / 100.0
    return float(out) if np.ndim(out) == 0 else out


def heat_generation(i_bat, t_bat, soc, params):
    """Joule plus reversible entropy heat, in watts."""
    r = params.resistance(soc, t_bat, np.asarray(i_bat) >= 0)
    out = i_bat * i_bat * r + i_bat * (np.asarray(t_bat) + KELVIN) * params.dvdt(soc)
    return float(out) if np.ndim(out) == 0 else out


def temperature_step(t_bat, q_gen, q_cool, ts, heat_capacity=250 * 2299.0):
    """Forward-Euler lumped thermal update."""
    return t_bat + ts * (q_gen - q_cool) / heat_capacity


__all__ = [
    "BatteryParams",
    "BatteryState",
    "CurveTable",
    "ResistanceTable",
    "aging_step",
    "current_from_power",
    "heat_generation",
    "soc_step",
    "temperature_step",
    "END_OF_LIFE",
    "Q_LOSS_SEED",
]
