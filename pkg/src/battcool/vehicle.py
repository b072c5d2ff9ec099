"""Drive cycles and the longitudinal road-load model."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, NonuniformSampling, ParseError

GRAVITY = 9.81
CYCLE_DURATION = 600  # s; shorter traces are zero-padded to this length

BUNDLED_CYCLES = {"nycc": "nycc.csv", "sc03": "sc03.csv", "us06": "us06.csv"}
# Repeat counts that take a 95 % pack to roughly 10 % SoC
LONG_TRIP_REPEATS = {"nycc": 165, "sc03": 55, "us06": 18}


@dataclass(frozen=True)
class DriveCycle:
    name: str
    velocity: np.ndarray  # km/h, one sample per ``ts``
    ts: float = 1.0
    repeat: int = 1

    def __post_init__(self):
        v = np.asarray(self.velocity, dtype=float)
        if v.ndim != 1 or len(v) < 1:
            raise DataError("drive cycle needs at least one sample")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DataError(f"cycle {self.name}: velocities must be finite and non-negative")
        if self.ts <= 0 or self.repeat < 1:
            raise DataError("sample period must be positive and repeat >= 1")
        v.setflags(write=False)
        object.__setattr__(self, "velocity", v)

    def __len__(self):
        return len(self.velocity)

    @property
    def mean_speed(self):
        return float(self.velocity.mean())

    @property
    def distance_km(self):
        """Distance of one repetition (trapezoidal, closing back to the first sample)."""
        v = self.velocity
        v_next = np.append(v[1:], v[0])
        return float(np.sum(0.5 * (v + v_next)) * self.ts / 3600.0)

    def with_repeat(self, repeat):
        return DriveCycle(self.name, self.velocity, self.ts, int(repeat))

    def speed_pairs(self):
        """(v_k, v_{k+1}) over all repetitions; the cycle wraps onto itself."""
        v = np.tile(self.velocity, self.repeat)
        v_next = np.append(v[1:], self.velocity[0])
        return v, v_next


def load_cycle(path, name=None, repeat=1, pad_to=CYCLE_DURATION):
    """Read a ``time_s,speed_kmh`` CSV sampled every second.

    Traces shorter than ``pad_to`` seconds are padded with standstill.
    """
    path = Path(path)
    try:
        with path.open(newline="") as f:
            rows = [r for r in csv.reader(f) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ParseError(f"{path}: empty drive cycle")
    header = [h.strip().lower() for h in rows[0]]
    try:
        ti, vi = header.index("time_s"), header.index("speed_kmh")
    except ValueError as exc:
        raise ParseError(f"{path}: expected columns time_s, speed_kmh") from exc
    try:
        t = np.array([float(r[ti]) for r in rows[1:]])
        v = np.array([float(r[vi]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: non-numeric entry") from exc
    if len(t) > 1:
        dt = np.diff(t)
        if np.any(np.abs(dt - 1.0) > 1e-9):
            raise NonuniformSampling(f"{path}: samples must be spaced exactly 1 s apart")
    if pad_to and len(v) < pad_to:
        v = np.concatenate([v, np.zeros(pad_to - len(v))])
    return DriveCycle(name or path.stem, v, 1.0, repeat)


def bundled_cycle(name, repeat=None):
    key = name.lower()
    if key not in BUNDLED_CYCLES:
        raise DataError(f"unknown bundled cycle {name!r}; choose from {sorted(BUNDLED_CYCLES)}")
    ref = resources.files("battcool") / "data" / "cycles" / BUNDLED_CYCLES[key]
    with resources.as_file(ref) as p:
        return load_cycle(p, name=key, repeat=repeat or LONG_TRIP_REPEATS[key])


def resolve_cycle(spec, repeat=None):
    """Accept a bundled cycle name or a CSV path."""
    if str(spec).lower() in BUNDLED_CYCLES:
        return bundled_cycle(str(spec), repeat)
    return load_cycle(spec, repeat=repeat or 1)


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1650.0  # kg, with driver
    c_rr: float = 0.009
    cd_a: float = 0.62  # m2
    air_density: float = 1.16  # kg/m3 at ~33 degC
    eta_drivetrain: float = 0.88
    eta_regen: float = 0.60
    eta_dcac: float = 0.95

    def __post_init__(self):
        for name in ("mass", "c_rr", "cd_a", "air_density"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be positive")
        for name in ("eta_drivetrain", "eta_regen", "eta_dcac"):
            if not 0 < getattr(self, name) <= 1:
                raise DataError(f"{name} must lie in (0, 1]")


def traction_power(v, v_next, params, ts=1.0):
    """Electrical traction power (W) at the inverter DC side over one sample.

    Negative values are recovered braking power. Works elementwise on arrays.
    """
    v0 = np.asarray(v, dtype=float) / 3.6
    v1 = np.asarray(v_next, dtype=float) / 3.6
    vm = 0.5 * (v0 + v1)
    accel = (v1 - v0) / ts
    force = (
        params.mass * accel
        + params.mass * GRAVITY * params.c_rr * (vm > 0)
        + 0.5 * params.air_density * params.cd_a * vm * vm
    )
    wheel = force * vm
    out = np.where(wheel >= 0, wheel / params.eta_drivetrain, wheel * params.eta_regen)
    return float(out) if out.ndim == 0 else out


def power_balance(p_d, p_cooling, params):
    """Battery power needed to cover traction and cooling through the inverter."""
    return (p_d + p_cooling) / params.eta_dcac


def cycle_power(cycle, params):
    """Traction power for every step of every repetition."""
    v, v_next = cycle.speed_pairs()
    return traction_power(v, v_next, params, cycle.ts)


@dataclass
class CycleSummary:
    name: str
    duration_s: float
    mean_speed_kmh: float
    max_speed_kmh: float
    distance_km: float
    mean_traction_kw: float
    extra: dict = field(default_factory=dict)


def summarize(cycle, params=None):
    params = params or VehicleParams()
    one = cycle.with_repeat(1)
    p = cycle_power(one, params)
    return CycleSummary(
        cycle.name,
        len(one) * one.ts,
        one.mean_speed,
        float(one.velocity.max()),
        one.distance_km,
        float(p.mean()) / 1000.0,
    )
