"""Command-line entry point: ``python -m quietwind <command> [options]``.

Exit status is 0 on success, 1 when validation fails (bad configuration,
failed invariant checks) and 2 on runtime errors such as missing files.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import simulation as sim
from .environment import EnvState, SteadyWind, WindCsvError
from . import agent, energy_stats as es

log = logging.getLogger("quietwind")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file overriding the bundled defaults")
    common.add_argument("--seed", type=int, help="overrides [run] seed")
    common.add_argument("--out", help="output directory (default [run] out)")
    common.add_argument("--agent", default="quiet", choices=("quiet", "power", "classic", "all"))
    common.add_argument("--profile", choices=("paper", "desk"), help="training budget (default [train] profile)")
    common.add_argument("--weights", help="weight file (default <out>/<agent>_ddqn.qw)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="quietwind", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train the quiet or power agent")
    s = sub.add_parser("simulate", parents=[common], help="run controllers over a wind record")
    s.add_argument("--wind", help="wind CSV (default [simulate] wind_csv)")
    s.add_argument("--duration", type=float, help="minutes to simulate (default: whole record)")
    pa = sub.add_parser("pareto", parents=[common], help="Pareto cloud and greedy trajectories")
    pa.add_argument("--wind-speed", type=float)
    e = sub.add_parser("epc", parents=[common], help="effective power curve and GP fit")
    e.add_argument("--wind", help="wind CSV (default [epc] wind_csv)")
    a = sub.add_parser("annual", parents=[common], help="expected annual energy per controller")
    a.add_argument("--wind", help="wind CSV for the EPC simulations (default [epc] wind_csv)")
    a.add_argument("--mean", type=float, help="annual mean wind speed (with --std)")
    a.add_argument("--std", type=float, help="annual wind speed standard deviation")
    sub.add_parser("validate", parents=[common], help="run the invariant checks")
    return p


def _agents(name: str, allow_classic: bool = True):
    if name == "all":
        return list(sim.AGENTS) if allow_classic else ["quiet", "power"]
    return [name]


# --- commands -------------------------------------------------------------------------

def cmd_train(args, cfg) -> int:
    if args.agent == "classic":
        raise sim.ConfigError("the classic controller is tuned, not trained; use --agent quiet or power")
    for name in _agents(args.agent, allow_classic=False):
        t0 = time.perf_counter()
        res, env = sim.run_training(cfg, name, args.profile)
        wp = sim.save_training(res, cfg.out, name)
        first, last = res.mean_q_trend()
        sim.report_json(cfg.out / f"{name}_train_summary.json", {
            "agent": name, "profile": args.profile or cfg.get("train", "profile"),
            "env_steps": res.log[-1].env_steps if res.log else 0, "iterations": len(res.log),
            "mean_q_first_10pct": first, "mean_q_last_10pct": last,
            "acoustic_calls": env.acoustic_calls, "unconverged_segments": env.unconverged_segments,
        }, cfg)
        print(f"{name}: weights -> {wp}; mean Q {first:.3f} -> {last:.3f}; "
              f"acoustic calls {env.acoustic_calls}; {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def _wind(path: Path, duration_min=None):
    w = sim.load_wind(path)
    if duration_min is not None:
        n = max(2, int(duration_min) + 1)
        w = type(w)(w.speeds[:n], dt=w.dt, timestamps=None if w.timestamps is None else w.timestamps[:n])
    return w


def cmd_simulate(args, cfg) -> int:
    wind_path = Path(args.wind) if args.wind else sim.wind_source(cfg, "simulate", "wind_8h_below_rated.csv")
    wind = _wind(wind_path, args.duration)
    runner = sim.Simulator(cfg)
    names = _agents(args.agent)
    weights = {n: sim.load_agent_weights(cfg.out, n, args.weights if len(names) == 1 else None)
               for n in names if n != "classic"}
    for name in names:
        res = runner.run(name, wind, weights.get(name))
        sim.write_sim(cfg.out / f"simulate_{name}.csv", res, cfg)
        finite = res.oaspl[np.isfinite(res.oaspl)]
        print(f"{name}: {res.energy_wh / 1e6:.3f} MWh over {res.t.size} min; "
              f"max OASPL {finite.max() if finite.size else float('nan'):.2f} dB A; "
              f"{int(np.sum(finite > runner.env.reward_cfg.spl_threshold + runner.env.reward_cfg.delta_db))} "
              f"minutes above {runner.env.reward_cfg.spl_threshold + runner.env.reward_cfg.delta_db:g} dB A")
    if wind.n_clipped:
        print(f"{wind.n_clipped} wind bins clipped to [4, 16] m/s")
    return EXIT_OK


def cmd_pareto(args, cfg) -> int:
    name = "quiet" if args.agent in ("all", "classic") else args.agent
    weights = sim.load_agent_weights(cfg.out, name, args.weights)
    runner = sim.Simulator(cfg)
    env = runner.env
    u = args.wind_speed if args.wind_speed is not None else cfg.number("pareto", "wind_speed")
    n = cfg.number("pareto", "n_cloud", int)
    steps = cfg.number("pareto", "steps", int)
    starts = sim.parse_initial_states(cfg.get("pareto", "initial_states", ""))
    rng = np.random.default_rng(cfg.seed)
    cloud = sim.pareto_cloud(env, u, n, rng)
    sim.write_table(cfg.out / "pareto_cloud.csv", ("rotor_speed", "pitch", "cp", "oaspl"), cloud, cfg,
                    note=f"wind_speed={u}")
    summary = []
    for i, (rpm0, th0) in enumerate(starts, start=1):
        s0 = EnvState(u, rpm0, th0)
        traj = agent.greedy_rollout(weights, env, steps, s0, SteadyWind(u))
        cp0, _, o0, _ = env.evaluate(s0)
        rows = [(0, rpm0, th0, -1, cp0, o0, float("nan"))]
        rows += [(k + 1, o.next_state.rotor_speed, o.next_state.pitch, o.action, o.cp, o.oaspl, o.reward)
                 for k, o in enumerate(traj)]
        sim.write_table(cfg.out / f"pareto_traj_case{i}.csv",
                        ("step", "rotor_speed", "pitch", "action", "cp", "oaspl", "reward"), rows, cfg,
                        note=f"agent={name} wind_speed={u}")
        end = traj[-1] if traj else None
        opt = sim.constrained_optimum(env, u, start=(rpm0, th0))
        summary.append((i, rpm0, th0, end.next_state.rotor_speed if end else rpm0,
                        end.next_state.pitch if end else th0, end.cp if end else cp0,
                        end.oaspl if end else o0, opt[0] if opt else float("nan")))
        print(f"case {i}: ({rpm0}, {th0}) -> ({summary[-1][3]:.2f} rpm, {summary[-1][4]:.2f} deg), "
              f"Cp {summary[-1][5]:.4f}, OASPL {summary[-1][6]:.2f} dB A (oracle Cp {summary[-1][7]:.4f})")
    sim.write_table(cfg.out / "pareto_summary.csv",
                    ("case", "rpm_0", "pitch_0", "rpm_f", "pitch_f", "cp_f", "oaspl_f", "oracle_cp"),
                    summary, cfg, note=f"agent={name} wind_speed={u}")
    return EXIT_OK


def cmd_epc(args, cfg) -> int:
    wind_path = Path(args.wind) if args.wind else sim.wind_source(cfg, "epc", "wind_100h.csv")
    wind = _wind(wind_path)
    runner = sim.Simulator(cfg)
    names = _agents(args.agent)
    weights = {n: sim.load_agent_weights(cfg.out, n, args.weights if len(names) == 1 else None)
               for n in names if n != "classic"}
    bw = cfg.number("epc", "bin_width")
    u_range = (runner.regions.cut_in, runner.regions.cut_off)
    for name in names:
        res = runner.run(name, wind, weights.get(name))
        sim.write_sim(cfg.out / f"epc_sim_{name}.csv", res, cfg)
        table = sim.epc_from_sim(res, bw, u_range)
        sim.write_table(cfg.out / f"epc_{name}.csv", sim.EPC_COLUMNS, sim.epc_rows(table), cfg,
                        note=f"controller={name}")
        gp = sim.gp_from_sim(res, cfg.seed)
        sim.write_table(cfg.out / f"gp_{name}.csv", ("wind_speed", "cp_mean", "cp_std"),
                        sim.gp_curve_rows(gp, u_range), cfg,
                        note=f"controller={name} length_scale={gp.hyper.length_scale:.6g} "
                             f"signal_var={gp.hyper.signal_var:.6g} noise_var={gp.hyper.noise_var:.6g}")
        populated = table.counts > 0
        print(f"{name}: {int(populated.sum())} populated bins; max bin-mean rotor speed "
              f"{np.nanmax(table.mean['rotor_speed']):.2f} rpm")
    return EXIT_OK


def cmd_annual(args, cfg) -> int:
    if (args.mean is None) != (args.std is None):
        raise sim.ConfigError("--mean and --std must be given together")
    wind_path = Path(args.wind) if args.wind else sim.wind_source(cfg, "epc", "wind_100h.csv")
    wind = _wind(wind_path)
    runner = sim.Simulator(cfg)
    names = _agents(args.agent)
    weights = {n: sim.load_agent_weights(cfg.out, n, args.weights if len(names) == 1 else None)
               for n in names if n != "classic"}
    sims = {n: runner.run(n, wind, weights.get(n)) for n in names}
    if args.mean is not None:
        weib_override = es.fit_weibull(args.mean, args.std)
        cfg.parser.set("annual", "weibull_k", repr(float(weib_override.k)))
        cfg.parser.set("annual", "weibull_c", repr(float(weib_override.c)))
    rows, weib = sim.annual_rows(cfg, sims, runner.geom, runner.regions)
    sim.write_table(cfg.out / "annual.csv", ("controller", "energy_mwh", "sigma_cp"),
                    [(r.controller, r.energy_mwh, r.sigma_cp) for r in rows], cfg,
                    note=f"weibull_k={weib.k:.6g} weibull_c={weib.c:.6g}")
    sim.report_json(cfg.out / "annual_report.json", {
        "weibull": {"k": weib.k, "c": weib.c},
        "u_range": [runner.regions.cut_in, runner.regions.cut_off],
        "rated_power_w": runner.regions.rated_power,
        "controllers": {r.controller: {"energy_mwh": r.energy_mwh, "sigma_cp": r.sigma_cp} for r in rows},
    }, cfg)
    print(f"Weibull k = {weib.k:.4f}, c = {weib.c:.4f} m/s")
    for r in rows:
        print(f"{r.controller:8s} {r.energy_mwh:10.1f} MWh   sigma_Cp {r.sigma_cp:.4f}")
    return EXIT_OK


def cmd_validate(args, cfg) -> int:
    from .validation import run_checks
    results = run_checks(seed=cfg.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:{width}s}  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


COMMANDS = {"train": cmd_train, "simulate": cmd_simulate, "pareto": cmd_pareto, "epc": cmd_epc,
            "annual": cmd_annual, "validate": cmd_validate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = sim.load_config(args.config, seed=args.seed, out=args.out)
        if args.profile:
            cfg.parser.set("train", "profile", args.profile)
        return COMMANDS[args.command](args, cfg)
    except (sim.ConfigError, WindCsvError, es.DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, agent.TrainingDiverged, es.QuadratureFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
