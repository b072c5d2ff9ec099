"""Command-line entry point: ``battcool <subcommand> [options]``.

Exit status: 0 success, 2 configuration or usage error, 3 bad input data,
4 infeasible optimisation or simulation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import dp
from .btms import fit_lambda, fit_quality, read_samples
from .config import CONTROLLERS, load_config
from .controllers import Mpc, RuleBased, extract_rules
from .economy import MatrixSpec, run_matrix
from .errors import BattcoolError, ConfigError, DataError, InfeasibilityError
from .simulation import NoCooling, initial_state, simulate
from .vehicle import BUNDLED_CYCLES, resolve_cycle

EXIT_CONFIG, EXIT_DATA, EXIT_INFEASIBLE = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p, cycle=True):
    p.add_argument("--config", help="TOML run configuration (default: $BATTCOOL_CONFIG or bundled defaults)")
    p.add_argument("--out", help="output directory (default: run.output_dir)")
    if cycle:
        p.add_argument("--cycle", help="bundled cycle name (nycc, sc03, us06) or a time_s,speed_kmh CSV")
        p.add_argument("--repeat", type=int, help="number of back-to-back repetitions")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser():
    ap = _Parser(prog="battcool", description="Battery cooling optimisation and control toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one controller over a drive cycle")
    _common(p)
    p.add_argument("--controller", choices=CONTROLLERS)
    p.add_argument("--rule-preset", choices=("urban", "suburban", "highway"))
    p.add_argument("--mpc-alpha", type=float)
    p.add_argument("--mpc-horizon", type=int)
    p.add_argument("--policy", help="saved DP policy (.npz) for --controller dp-policy")

    p = sub.add_parser("dp", help="solve the offline optimum and execute it")
    _common(p)

    p = sub.add_parser("mpc", help="run the receding-horizon controller")
    _common(p)
    p.add_argument("--mpc-alpha", type=float)
    p.add_argument("--mpc-horizon", type=int)

    p = sub.add_parser("rules", help="extract three-stage rule parameters from the DP optimum")
    _common(p)
    p.add_argument("--policy", help="reuse a saved DP policy instead of solving")

    p = sub.add_parser("calibrate", help="fit the cooling-rate surrogate from samples")
    _common(p, cycle=False)
    p.add_argument("--samples", help="calibration CSV (default: run.calibration_samples)")

    p = sub.add_parser("economy", help="compare strategies against the uncooled benchmark (case 1)")
    _common(p)
    p.add_argument("--strategies", help="comma-separated subset of off,dp,rule,mpc")
    p.add_argument("--trips", help="comma-separated subset of short,long")

    p = sub.add_parser("sweep", help="run the full case x cycle x trip x strategy matrix")
    _common(p, cycle=False)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("validate-config", help="check a configuration and print its fingerprint")
    p.add_argument("--config")
    return ap


# ---------------------------------------------------------------- helpers
def _setup(args):
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "rule_preset", None):
        cfg = cfg.with_overrides("run", rule_preset=args.rule_preset)
    if getattr(args, "mpc_alpha", None) is not None or getattr(args, "mpc_horizon", None) is not None:
        cfg = cfg.with_overrides("mpc", alpha=args.mpc_alpha, horizon=args.mpc_horizon)
    if getattr(args, "controller", None):
        cfg = cfg.with_overrides("run", controller=args.controller)
    out = Path(getattr(args, "out", None) or cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _cycle(args, cfg):
    repeat = getattr(args, "repeat", None) or cfg.run.repeat
    if repeat is not None and repeat < 1:
        raise ConfigError("--repeat must be >= 1")
    if args.cycle:
        return resolve_cycle(args.cycle, repeat)
    name = cfg.run.cycle
    return resolve_cycle(name if name.lower() in BUNDLED_CYCLES else cfg.resolve(name), repeat)


def _state(cfg, plant):
    return initial_state(plant, soc=cfg.run.initial_soc, t_bat=cfg.run.initial_t_bat)


def _fingerprint(cfg, *extra):
    import hashlib

    h = hashlib.sha256(cfg.fingerprint().encode())
    for e in extra:
        h.update(str(e).encode())
    return h.hexdigest()


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _summary(traj, fp):
    fin = traj.final
    return {
        "fingerprint": fp,
        "cycle": traj.cycle,
        "controller": traj.controller,
        "repeats": traj.repeats_done,
        "steps": len(traj),
        "distance_km": fin.distance_km,
        "q_loss_accrued": traj.q_loss_gain,
        "final_soc": fin.battery.soc,
        "final_t_bat": fin.battery.t_bat,
        "cost_deg_usd": fin.cost_deg,
        "cost_ele_usd": fin.cost_ele,
        "cost_total_usd": fin.cost_deg + fin.cost_ele,
        "failure": None if traj.failure is None else str(traj.failure),
    }


def _emit(traj, out, stem, fp, plots, log):
    csv_path = traj.to_csv(out / f"{stem}.csv", fp)
    _write_json(out / f"{stem}.json", _summary(traj, fp))
    written = [csv_path, out / f"{stem}.json"]
    if plots:
        from .plotting import plot_trajectory

        written.append(plot_trajectory(traj, out / f"{stem}.png", fingerprint=fp))
    for p in written:
        log(f"wrote {p}")


def _solve_policy(cfg, plant, cycle, log):
    log(f"solving DP over {len(cycle) * cycle.repeat} steps ...")
    policy = dp.solve(cycle, plant, state=_state(cfg, plant), store_values=False)
    policy.fingerprint = _fingerprint(cfg, cycle.name, cycle.repeat)
    return policy


def _controller(cfg, plant, cycle, policy_path, log):
    kind = cfg.run.controller
    if kind == "off":
        return NoCooling()
    if kind == "rule":
        return RuleBased(cfg.rule_params(cycle.name))
    if kind == "mpc":
        return Mpc(cfg.mpc)
    path = policy_path or cfg.resolve(cfg.run.policy)
    policy = dp.Policy.load(path) if path else _solve_policy(cfg, plant, cycle, log)
    return dp.DpPolicyController(policy)


# ---------------------------------------------------------------- commands
def cmd_simulate(args, log):
    cfg, out = _setup(args)
    plant = cfg.plant()
    cycle = _cycle(args, cfg)
    ctl = _controller(cfg, plant, cycle, args.policy, log)
    traj = simulate(cycle, ctl, plant, state=_state(cfg, plant))
    fp = _fingerprint(cfg, cycle.name, cycle.repeat, cfg.run.controller)
    _emit(traj, out, f"{cycle.name}_{cfg.run.controller}", fp, not args.no_plots, log)
    return 0


def cmd_dp(args, log):
    cfg, out = _setup(args)
    plant = cfg.plant()
    cycle = _cycle(args, cfg)
    policy = _solve_policy(cfg, plant, cycle, log)
    path = policy.save(out / f"{cycle.name}_policy.npz")
    log(f"wrote {path}")
    traj = dp.execute(policy, cycle, plant, state=_state(cfg, plant))
    _emit(traj, out, f"{cycle.name}_dp", policy.fingerprint, not args.no_plots, log)
    return 0


def cmd_mpc(args, log):
    args.controller, args.policy, args.rule_preset = "mpc", None, None
    return cmd_simulate(args, log)


def cmd_rules(args, log):
    cfg, out = _setup(args)
    plant = cfg.plant()
    cycle = _cycle(args, cfg)
    policy = dp.Policy.load(args.policy) if args.policy else _solve_policy(cfg, plant, cycle, log)
    traj = dp.execute(policy, cycle, plant, state=_state(cfg, plant))
    rules = extract_rules(traj, cfg.dp.t_target, plant.btms.p_comp_min)
    fp = _fingerprint(cfg, cycle.name, cycle.repeat, "rules")
    _write_json(out / f"{cycle.name}_rules.json", {"fingerprint": fp, "cycle": cycle.name, **rules})
    fast, slow = rules["fast_end"], rules["slow_end"]
    stages = ["fast" if k < fast else "slow" if k < slow else "maintain" for k in range(len(traj))]
    with (out / f"{cycle.name}_rule_points.csv").open("w") as f:
        f.write(f"# fingerprint: {fp}\n")
        f.write("t,p_d,p_comp,t_bat,stage\n")
        for k in range(len(traj)):
            f.write(f"{traj['t'][k]!r},{traj['p_d'][k]!r},{traj['p_comp'][k]!r},{traj['t_bat'][k]!r},{stages[k]}\n")
    log(f"wrote {out / f'{cycle.name}_rules.json'}")
    if not args.no_plots:
        from .plotting import plot_rule_scatter

        log(f"wrote {plot_rule_scatter(traj, stages, out / f'{cycle.name}_rules.png', fp)}")
    print(json.dumps(rules, indent=2))
    return 0


def cmd_calibrate(args, log):
    cfg, out = _setup(args)
    src = args.samples or cfg.resolve(cfg.run.calibration_samples)
    if not src:
        raise ConfigError("no calibration samples given (--samples or run.calibration_samples)")
    samples = read_samples(src)
    table = fit_lambda(samples)
    fp = _fingerprint(cfg, Path(src).read_bytes())
    path = table.to_csv(out / "lambda_table.csv", fp)
    within5, within10 = fit_quality(table, samples)
    _write_json(out / "fit_quality.json", {"fingerprint": fp, "samples": len(samples),
                                           "within_5pct": within5, "within_10pct": within10})
    log(f"wrote {path}")
    log(f"fit quality: {100 * within5:.1f}% of samples within 5%, {100 * within10:.1f}% within 10%")
    return 0


def _economy_outputs(report, out, stem, fp, plots, log):
    for p in (report.runs_csv(out / f"{stem}_runs.csv", fp),
              report.reductions_csv(out / f"{stem}_reductions.csv", fp)):
        log(f"wrote {p}")
    report.to_json(out / f"{stem}.json", fp)
    log(f"wrote {out / f'{stem}.json'}")
    if plots:
        from .plotting import plot_economy

        log(f"wrote {plot_economy(report, out / f'{stem}.png', fp)}")
    for r in report.failures():
        log(f"run failed: {r.case} {r.cycle} {r.trip} {r.strategy}: {r.error}")


def cmd_economy(args, log):
    cfg, out = _setup(args)
    spec = cfg.matrix_spec()
    name = args.cycle or cfg.run.cycle
    strategies = tuple(args.strategies.split(",")) if args.strategies else spec.strategies
    trips = tuple(args.trips.split(",")) if args.trips else spec.trips
    repeats = dict(spec.repeats)
    if args.repeat:
        repeats[name] = args.repeat
    bad = set(strategies) - {"off", "dp", "rule", "mpc"} | set(trips) - {"short", "long"}
    if bad:
        raise ConfigError(f"unknown strategy/trip entries: {sorted(bad)}")
    spec = replace(spec, strategies=strategies, trips=trips, cases=spec.cases[:1], cycles=(name,), repeats=repeats)
    report = run_matrix(spec, cfg.plant())
    fp = _fingerprint(cfg, "economy", name, strategies, trips, args.repeat)
    _economy_outputs(report, out, f"economy_{name}", fp, not args.no_plots, log)
    for c in report.comparisons:
        print(f"{c.cycle:5s} {c.trip:5s} {c.strategy:5s} degradation -{c.degradation_reduction:6.2f}%  "
              f"cost -{c.cost_reduction_per_100km:.4f} USD/100km  life +{c.life_extension:.2f}%")
    return 0


def cmd_sweep(args, log):
    cfg, out = _setup(args)
    spec: MatrixSpec = cfg.matrix_spec()
    report = run_matrix(spec, cfg.plant(), workers=args.workers or cfg.economy.workers)
    fp = _fingerprint(cfg, "sweep")
    _economy_outputs(report, out, "sweep", fp, not args.no_plots, log)
    return 0


def cmd_validate(args, log):
    cfg = load_config(args.config)
    print(f"ok {cfg.source} fingerprint {cfg.fingerprint()}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate, "dp": cmd_dp, "mpc": cmd_mpc, "rules": cmd_rules,
    "calibrate": cmd_calibrate, "economy": cmd_economy, "sweep": cmd_sweep,
    "validate-config": cmd_validate,
}


def run(argv=None):
    args = build_parser().parse_args(argv)

    def log(msg):
        print(msg, file=sys.stderr)

    try:
        return COMMANDS[args.command](args, log)
    except ConfigError as exc:
        log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except DataError as exc:
        log(f"data error: {exc}")
        return EXIT_DATA
    except InfeasibilityError as exc:
        log(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except BattcoolError as exc:
        log(f"error: {exc}")
        return EXIT_DATA


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
