"""TOML run configuration: validation, object construction and a reproducibility fingerprint."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli

from . import __version__
from .btms import BtmsParams, LambdaTable, default_lambda_table
from .cell import BatteryParams, CurveTable, ResistanceTable
from .controllers import CYCLE_PRESET, RULE_PRESETS, MpcParams, RuleParams
from .cost import DpConfig
from .economy import CASES, STRATEGIES, TRIPS, MatrixSpec
from .errors import BattcoolError, ConfigError
from .simulation import Plant
from .vehicle import LONG_TRIP_REPEATS, VehicleParams

ENV_VAR = "BATTCOOL_CONFIG"
CONTROLLERS = ("rule", "dp-policy", "mpc", "off")


@dataclass(frozen=True)
class RunSection:
    cycle: str = "sc03"
    repeat: int | None = None  # None -> the bundled cycle's long-trip count
    controller: str = "rule"
    rule_preset: str | None = None  # None -> chosen from the cycle name
    output_dir: str = "out"
    lambda_table: str | None = None
    calibration_samples: str | None = None
    policy: str | None = None
    initial_soc: float = 0.95
    initial_t_bat: float | None = None  # None -> ambient


@dataclass(frozen=True)
class BatterySection:
    capacity_pack: float = 120.0
    nominal_voltage: float = 412.0
    n_cells: int = 250
    cell_heat_capacity: float = 2299.0
    soc_min: float = 0.05
    soc_max: float = 1.0
    i_min: float = -240.0
    i_max: float = 360.0
    ocv_table: str | None = None
    resistance_table: str | None = None
    entropy_table: str | None = None


@dataclass(frozen=True)
class EconomySection:
    strategies: tuple = STRATEGIES
    cases: tuple = tuple(c.label for c in CASES)
    cycles: tuple = ("nycc", "sc03", "us06")
    trips: tuple = TRIPS
    workers: int = 1


@dataclass(frozen=True)
class RuleSection:
    t_sw1: float | None = None  # None -> preset
    t_sw2: float = 25.0
    p_low: float = 532.0
    hysteresis: float = 0.1


SECTIONS = {
    "run": RunSection,
    "battery": BatterySection,
    "btms": BtmsParams,
    "vehicle": VehicleParams,
    "dp": DpConfig,
    "rule": RuleSection,
    "mpc": MpcParams,
    "economy": EconomySection,
}


def _coerce(cls, name, value, where):
    """Light type check against the dataclass annotation (strings under PEP 563)."""
    ann = str(cls.__dataclass_fields__[name].type)
    if value is None:
        return None
    if ann.startswith("tuple"):
        if not isinstance(value, list):
            raise ConfigError(f"{where}.{name} must be a list")
        return tuple(value)
    if "bool" in ann:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}.{name} must be true or false")
        return value
    if "int" in ann and "float" not in ann:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}.{name} must be an integer")
        return value
    if "float" in ann:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{name} must be a number")
        return float(value)
    if "str" in ann:
        if not isinstance(value, str):
            raise ConfigError(f"{where}.{name} must be a string")
        return value
    return value


def _build(cls, table, where):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = cls.__dataclass_fields__
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {k: _coerce(cls, k, v, where) for k, v in table.items()}
    try:
        return cls(**kwargs)
    except BattcoolError as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    battery: BatterySection = field(default_factory=BatterySection)
    btms: BtmsParams = field(default_factory=BtmsParams)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    dp: DpConfig = field(default_factory=DpConfig)
    rule: RuleSection = field(default_factory=RuleSection)
    mpc: MpcParams = field(default_factory=MpcParams)
    economy: EconomySection = field(default_factory=EconomySection)
    base_dir: Path = Path(".")
    source: str = "<defaults>"

    # ---- construction -------------------------------------------------
    @classmethod
    def from_dict(cls, doc, base_dir=".", source="<dict>"):
        unknown = sorted(set(doc) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
        parts = {name: _build(sc, doc.get(name, {}), name) for name, sc in SECTIONS.items()}
        cfg = cls(**parts, base_dir=Path(base_dir), source=source)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            with path.open("rb") as f:
                doc = tomli.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent, source=str(path))

    def validate(self):
        r = self.run
        if r.controller not in CONTROLLERS:
            raise ConfigError(f"run.controller must be one of {CONTROLLERS}")
        if r.rule_preset is not None and r.rule_preset not in RULE_PRESETS:
            raise ConfigError(f"run.rule_preset must be one of {sorted(RULE_PRESETS)}")
        if r.repeat is not None and r.repeat < 1:
            raise ConfigError("run.repeat must be >= 1")
        if not self.battery.soc_min < r.initial_soc <= self.battery.soc_max:
            raise ConfigError("run.initial_soc must lie in (soc_min, soc_max]")
        e = self.economy
        labels = {c.label for c in CASES}
        for name, values, allowed in (
            ("strategies", e.strategies, set(STRATEGIES)),
            ("cases", e.cases, labels),
            ("trips", e.trips, set(TRIPS)),
            ("cycles", e.cycles, set(LONG_TRIP_REPEATS)),
        ):
            bad = [v for v in values if v not in allowed]
            if bad:
                raise ConfigError(f"economy.{name}: unknown entries {bad}; allowed {sorted(allowed)}")
        if e.workers < 1:
            raise ConfigError("economy.workers must be >= 1")
        try:
            self.rule_params(r.cycle)
        except ConfigError as exc:
            raise ConfigError(f"[rule]: {exc}") from exc
        # the surrogate must cover the configured operating point
        self.plant()

    # ---- object builders ---------------------------------------------
    def resolve(self, p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def battery_params(self):
        b = self.battery
        tables = {}
        if b.ocv_table:
            tables["ocv_table"] = CurveTable.from_csv(self.resolve(b.ocv_table), "soc", "volts")
        if b.resistance_table:
            tables["resistance_table"] = ResistanceTable.from_csv(self.resolve(b.resistance_table))
        if b.entropy_table:
            tables["entropy_table"] = CurveTable.from_csv(self.resolve(b.entropy_table), "soc", "volts_per_kelvin")
        scalars = {k: getattr(b, k) for k in BatterySection.__dataclass_fields__ if not k.endswith("_table")}
        try:
            return BatteryParams(**scalars, **tables)
        except BattcoolError as exc:
            raise ConfigError(f"[battery]: {exc}") from exc

    def lambda_table(self):
        if self.run.lambda_table:
            return LambdaTable.from_csv(self.resolve(self.run.lambda_table))
        return default_lambda_table()

    def plant(self):
        table = self.lambda_table()
        try:
            table.coefficients(self.btms.t_air, self.btms.m_clnt)
        except BattcoolError as exc:
            raise ConfigError(f"[btms] operating point outside the surrogate grid: {exc}") from exc
        return Plant(self.battery_params(), self.btms, table, self.vehicle, self.dp)

    def rule_params(self, cycle_name=None):
        r = self.rule
        if r.t_sw1 is not None:
            t_sw1 = r.t_sw1
        else:
            preset = self.run.rule_preset or CYCLE_PRESET.get(str(cycle_name or "").lower(), "suburban")
            t_sw1 = RULE_PRESETS[preset]
        return RuleParams(t_sw1=t_sw1, t_sw2=r.t_sw2, p_low=r.p_low, hysteresis=r.hysteresis)

    def matrix_spec(self):
        e = self.economy
        by_label = {c.label: c for c in CASES}
        rule = self.rule_params() if self.rule.t_sw1 is not None or self.run.rule_preset else None
        return MatrixSpec(
            strategies=tuple(e.strategies), cases=tuple(by_label[c] for c in e.cases),
            cycles=tuple(e.cycles), trips=tuple(e.trips), rule=rule, mpc=self.mpc,
        )

    def with_overrides(self, section, **values):
        """Copy with some fields of one section replaced (values re-validated)."""
        current = dataclasses.asdict(getattr(self, section)) if dataclasses.is_dataclass(getattr(self, section)) else {}
        current = {k: v for k, v in current.items() if k in SECTIONS[section].__dataclass_fields__}
        current.update({k: v for k, v in values.items() if v is not None})
        doc = self.to_dict()
        doc[section] = _plain(current)
        return RunConfig.from_dict(doc, self.base_dir, self.source)

    # ---- identity -----------------------------------------------------
    def to_dict(self):
        out = {}
        for name, cls in SECTIONS.items():
            sec = getattr(self, name)
            out[name] = _plain({k: getattr(sec, k) for k in cls.__dataclass_fields__
                                if not (name == "battery" and k.endswith("_table") and getattr(sec, k) is None)})
        return out

    def referenced_files(self):
        paths = [self.run.lambda_table, self.run.calibration_samples, self.run.policy,
                 self.battery.ocv_table, self.battery.resistance_table, self.battery.entropy_table]
        cyc = self.run.cycle
        if cyc.lower() not in LONG_TRIP_REPEATS:
            paths.append(cyc)
        return [self.resolve(p) for p in paths if p]

    def fingerprint(self):
        """sha256 over the resolved settings, the package version and referenced file contents."""
        h = hashlib.sha256()
        h.update(__version__.encode())
        h.update(json.dumps(self.to_dict(), sort_keys=True, default=str).encode())
        for p in self.referenced_files():
            h.update(str(p.name).encode())
            try:
                h.update(p.read_bytes())
            except OSError:
                h.update(b"<missing>")
        return h.hexdigest()


def _plain(d):
    out = {}
    for k, v in d.items():
        if v is None:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def default_config_path():
    return resources.files("battcool") / "data" / "default.toml"


def load_config(path=None):
    """Explicit path, else ``$BATTCOOL_CONFIG``, else the bundled defaults."""
    path = path or os.environ.get(ENV_VAR)
    if path:
        return RunConfig.load(path)
    with resources.as_file(default_config_path()) as p:
        cfg = RunConfig.load(p)
    return dataclasses.replace(cfg, base_dir=Path("."), source="<bundled default>")
