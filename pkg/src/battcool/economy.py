"""Driving-economy and battery-life comparisons across strategies, cases and trip lengths."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import dp
from .controllers import CYCLE_PRESET, Mpc, MpcParams, RuleBased, RuleParams
from .errors import BattcoolError, OutOfEnvelope
from .simulation import NoCooling, initial_state, simulate
from .vehicle import LONG_TRIP_REPEATS, bundled_cycle

STRATEGIES = ("off", "dp", "rule", "mpc")
# wall-clock time varies run to run, so it stays out of written reports
_VOLATILE = ("runtime_s",)
TRIPS = ("short", "long")


def degradation_reduction(q_strategy, q_off):
    """Percent of the uncooled capacity loss avoided."""
    if q_off == 0:
        raise ZeroDivisionError("reference capacity loss is zero")
    return 100.0 * (q_off - q_strategy) / q_off


def life_extension(q_strategy, q_off):
    """Percent longer pack life, taking life as inversely proportional to loss per km."""
    if q_strategy == 0:
        raise ZeroDivisionError("strategy capacity loss is zero")
    return 100.0 * (q_off / q_strategy - 1.0)


@dataclass(frozen=True)
class SensitivityCase:
    label: str
    t_air: float  # degC
    m_clnt: float  # kg/s
    a_bat: float  # m2

    def apply(self, plant):
        btms = replace(plant.btms, t_air=self.t_air, m_clnt=self.m_clnt, a_bat=self.a_bat)
        plant.table.coefficients(self.t_air, self.m_clnt)  # raises OutOfEnvelope early
        return replace(plant, btms=btms)


CASES = (
    SensitivityCase("case1", 33.0, 0.180, 3.1),
    SensitivityCase("case2", 28.0, 0.180, 3.1),
    SensitivityCase("case3", 38.0, 0.180, 3.1),
    SensitivityCase("case4", 33.0, 0.144, 2.1),
)


@dataclass
class RunReport:
    case: str
    cycle: str
    trip: str
    strategy: str
    repeats: int
    distance_km: float = float("nan")
    cost_deg: float = float("nan")
    cost_ele: float = float("nan")
    cost_total: float = float("nan")
    cost_per_100km: float = float("nan")
    q_loss: float = float("nan")  # accrued during the run, fraction
    final_soc: float = float("nan")
    final_t_bat: float = float("nan")
    runtime_s: float = 0.0
    error: str | None = None

    @property
    def ok(self):
        return self.error is None

    @property
    def q_per_km(self):
        return self.q_loss / self.distance_km


@dataclass
class Comparison:
    case: str
    cycle: str
    trip: str
    strategy: str
    degradation_reduction: float
    cost_reduction_per_100km: float
    life_extension: float


def report_from_trajectory(traj, case, trip, strategy, runtime=0.0):
    fin = traj.final
    dist = fin.distance_km
    total = fin.cost_deg + fin.cost_ele
    return RunReport(
        case=case, cycle=traj.cycle, trip=trip, strategy=strategy, repeats=traj.repeats_done,
        distance_km=dist, cost_deg=fin.cost_deg, cost_ele=fin.cost_ele, cost_total=total,
        cost_per_100km=100.0 * total / dist if dist > 0 else float("nan"),
        q_loss=traj.q_loss_gain, final_soc=fin.battery.soc, final_t_bat=fin.battery.t_bat,
        runtime_s=runtime,
    )


def compare(run, off):
    """Reductions of ``run`` against the matched uncooled run, per km driven."""
    return Comparison(
        run.case, run.cycle, run.trip, run.strategy,
        degradation_reduction(run.q_per_km, off.q_per_km),
        off.cost_per_100km - run.cost_per_100km,
        life_extension(run.q_per_km, off.q_per_km),
    )


@dataclass(frozen=True)
class MatrixSpec:
    strategies: tuple = STRATEGIES
    cases: tuple = CASES
    cycles: tuple = ("nycc", "sc03", "us06")
    trips: tuple = TRIPS
    repeats: dict = field(default_factory=lambda: dict(LONG_TRIP_REPEATS))
    rule: RuleParams | None = None  # None -> preset chosen by cycle name
    mpc: MpcParams = field(default_factory=MpcParams)

    def jobs(self):
        out = []
        for case in self.cases:
            for name in self.cycles:
                for trip in self.trips:
                    for s in self.strategies:
                        out.append((case, name, trip, s))
        return out


def make_strategy(strategy, cycle, plant, spec):
    if strategy == "off":
        return NoCooling()
    if strategy == "rule":
        return RuleBased(spec.rule or RuleParams.preset(CYCLE_PRESET.get(cycle.name, "suburban")))
    if strategy == "mpc":
        return Mpc(spec.mpc)
    if strategy == "dp":
        return dp.DpPolicyController(dp.solve(cycle, plant, state=initial_state(plant)))
    raise ValueError(f"unknown strategy {strategy!r}")


def run_one(job, plant, spec, cycle_loader=bundled_cycle):
    case, name, trip, strategy = job
    repeats = spec.repeats.get(name, 1) if trip == "long" else 1
    rep = RunReport(case.label, name, trip, strategy, repeats)
    t0 = time.perf_counter()
    try:
        p = case.apply(plant)
        cycle = cycle_loader(name, repeat=repeats)
        traj = simulate(cycle, make_strategy(strategy, cycle, p, spec), p, state=initial_state(p))
        rep = report_from_trajectory(traj, case.label, trip, strategy, time.perf_counter() - t0)
    except (BattcoolError, OutOfEnvelope, ZeroDivisionError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        rep.runtime_s = time.perf_counter() - t0
    return rep


@dataclass
class EconomyReport:
    runs: list
    comparisons: list

    def failures(self):
        return [r for r in self.runs if not r.ok]

    def find(self, case, cycle, trip, strategy):
        for c in self.comparisons:
            if (c.case, c.cycle, c.trip, c.strategy) == (case, cycle, trip, strategy):
                return c
        return None

    def to_json(self, path=None, fingerprint=None):
        doc = {
            "fingerprint": fingerprint,
            "runs": [{k: v for k, v in asdict(r).items() if k not in _VOLATILE} for r in self.runs],
            "comparisons": [asdict(c) for c in self.comparisons],
        }
        text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=True)
        if path:
            Path(path).write_text(text + "\n")
        return text

    def runs_csv(self, path, fingerprint=None):
        """Per-run metrics, one row per (case, cycle, trip, strategy)."""
        cols = [c for c in RunReport.__dataclass_fields__ if c not in _VOLATILE]
        return _write_rows(path, cols, ([getattr(r, c) for c in cols] for r in self.runs), fingerprint)

    def reductions_csv(self, path, fingerprint=None):
        """Cost and degradation reductions against the uncooled runs."""
        cols = list(Comparison.__dataclass_fields__)
        return _write_rows(path, cols, ([getattr(c, k) for k in cols] for c in self.comparisons),
                           fingerprint)


def _write_rows(path, cols, rows, fingerprint):
    path = Path(path)
    with path.open("w", newline="") as f:
        if fingerprint:
            f.write(f"# fingerprint: {fingerprint}\n")
        w = csv.writer(f)
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else ("" if x is None else x) for x in row])
    return path


def assemble(runs):
    """Pair every cooled run with its uncooled twin. Order follows ``runs``."""
    offs = {(r.case, r.cycle, r.trip): r for r in runs if r.strategy == "off" and r.ok}
    comps = []
    for r in runs:
        off = offs.get((r.case, r.cycle, r.trip))
        if r.strategy == "off" or not r.ok or off is None:
            continue
        try:
            comps.append(compare(r, off))
        except ZeroDivisionError:
            continue
    return EconomyReport(list(runs), comps)


def _run_star(args):
    return run_one(*args)


def run_matrix(spec, plant, workers=1):
    """Execute every (case, cycle, trip, strategy) job; failures are recorded, not raised."""
    jobs = spec.jobs()
    if "off" not in spec.strategies:
        jobs += [(c, n, t, "off") for c, n, t, _ in jobs if (c, n, t, "off") not in jobs]
        jobs = list(dict.fromkeys(jobs))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            runs = list(ex.map(_run_star, [(j, plant, spec) for j in jobs]))
    else:
        runs = [run_one(j, plant, spec) for j in jobs]
    return assemble(runs)
