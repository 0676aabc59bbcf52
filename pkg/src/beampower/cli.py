"""``beampower`` command line: demand generation, training, evaluation, GA."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ga as ga_mod
from . import ppo
from .bench import format_rows, run_benchmark
from .demand import generate_synthetic, load_csv, save_csv
from .env import BeamPowerEnv, Scenario, load_scenario
from .policy import load_checkpoint
from .report import build_report, evaluate, load_report, policy_actor, write_timestep_csv

log = logging.getLogger("beampower")


class CliError(Exception):
    pass


def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("iteration counts must be positive")
    return values


def _scenario(args) -> Scenario:
    if args.config:
        if not Path(args.config).is_file():
            raise CliError(f"scenario file not found: {args.config}")
        return load_scenario(args.config)
    return Scenario()


def _demand(args, scenario, sat):
    if getattr(args, "demand", None):
        if not Path(args.demand).is_file():
            raise CliError(f"demand file not found: {args.demand}")
        demand = load_csv(args.demand, scenario.step_minutes)
    else:
        demand = generate_synthetic(scenario.n_beams, scenario.n_steps, scenario.step_minutes,
                                   scenario.demand_seed, scenario.peak_demand(sat))
    if demand.n_beams != sat.n_beams:
        raise CliError(f"demand has {demand.n_beams} beams, scenario has {sat.n_beams}")
    return demand


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def cmd_gen_demand(args):
    scenario = _scenario(args)
    if args.beams:
        scenario = replace(scenario, n_beams=args.beams)
    if args.steps:
        scenario = replace(scenario, n_steps=args.steps)
    if args.seed is not None:
        scenario = replace(scenario, demand_seed=args.seed)
    sat = scenario.satellite()
    peak = args.peak if args.peak is not None else scenario.peak_demand(sat)
    series = generate_synthetic(scenario.n_beams, scenario.n_steps, scenario.step_minutes,
                                scenario.demand_seed, peak)
    out = _out_dir(args)
    save_csv(series, out / "demand.csv")
    scenario.save(out / "scenario.txt")
    print(f"wrote {out / 'demand.csv'} ({series.n_steps} x {series.n_beams})")


PPO_FLAGS = {
    "total_timesteps": int, "learning_rate": float, "gamma": float, "lam": float,
    "clip_range": float, "n_steps": int, "n_envs": int, "n_epochs": int,
    "n_minibatches": int, "max_grad_norm": float, "value_coef": float,
    "entropy_coef": float, "checkpoint_every": int,
}


def cmd_train(args):
    scenario = _scenario(args)
    sat = scenario.satellite()
    demand = _demand(args, scenario, sat)
    reward_cfg = scenario.reward_config(sat)
    overrides = {k: getattr(args, k) for k in PPO_FLAGS if getattr(args, k) is not None}
    base = ppo.PpoConfig(alpha=reward_cfg.alpha, seed=args.seed or 0, **overrides)
    print(base.to_text(), end="")
    out = _out_dir(args)
    scenario.save(out / "scenario.txt")
    for i in range(args.runs):
        cfg = replace(base, seed=base.seed + i)
        run_dir = out / f"run_{i:02d}"
        t0 = time.perf_counter()
        _, curve = ppo.train(sat, demand, reward_cfg, cfg, scenario.split("train"), run_dir=run_dir)
        k = max(1, len(curve) // 10)
        first = np.mean([r[2] for r in curve[:k]])
        last = np.mean([r[2] for r in curve[-k:]])
        print(f"{run_dir}: seed {cfg.seed}, {len(curve)} updates, reward {first:.4f} -> {last:.4f}"
              f" ({time.perf_counter() - t0:.1f} s)")


def _checkpoints(paths):
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            hits = sorted(p.glob("run_*/checkpoint_final.npz")) or sorted(p.glob("checkpoint_final.npz"))
            if not hits:
                raise CliError(f"no checkpoint_final.npz under {p}")
            found.extend(hits)
        elif p.is_file():
            found.append(p)
        else:
            raise CliError(f"checkpoint not found: {p}")
    return found


def cmd_eval(args):
    scenario = _scenario(args)
    sat = scenario.satellite()
    demand = _demand(args, scenario, sat)
    env = BeamPowerEnv(sat, demand, scenario.split(args.split), scenario.reward_config(sat))
    out = _out_dir(args)
    runs = []
    for i, path in enumerate(_checkpoints(args.checkpoint)):
        params = load_checkpoint(path)
        if params.n_beams != sat.n_beams:
            raise CliError(f"{path}: checkpoint has {params.n_beams} beams, scenario has {sat.n_beams}")
        metrics = evaluate(policy_actor(params), env)
        write_timestep_csv(metrics, out / f"eval_run_{i:02d}.csv")
        runs.append(metrics)
    report = build_report(runs)
    report.save(out / "eval_report.txt")
    print(report.to_text(), end="")


def cmd_ga(args):
    scenario = _scenario(args)
    sat = scenario.satellite()
    demand = _demand(args, scenario, sat)
    reward_cfg = scenario.reward_config(sat)
    out = _out_dir(args)
    rows = []
    for iters in args.iterations:
        cfg = ga_mod.GaConfig(population=args.population, iterations=iters,
                              seed=args.seed or 0, n_workers=args.workers)
        t0 = time.perf_counter()
        results = ga_mod.run_ga_series(demand, args.stride, sat, cfg, reward_cfg, scenario.split(args.split))
        total_s = time.perf_counter() - t0
        ga_mod.write_series_csv(results, out / f"ga_{iters}.csv")
        usd = np.array([r.usd for r in results])
        energy = np.array([r.energy_ratio for r in results])
        ms = float(np.mean([r.wall_ms for r in results]))
        rows.append([iters, float(usd.mean()), float(usd.max()), float(energy.mean()), total_s, ms])
        print(f"iterations {iters}: avg usd {usd.mean():.6f}, energy ratio {energy.mean():.4f}, "
              f"{total_s:.2f} s total, {ms:.2f} ms per timestep")
    with open(out / "ga_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iterations", "avg_usd", "max_usd", "energy_ratio", "exec_time_s", "ms_per_timestep"])
        for r in rows:
            w.writerow([r[0]] + [repr(v) for v in r[1:]])


def read_ga_summary(path) -> dict[int, dict[str, float]]:
    path = Path(path)
    if not path.is_file():
        raise CliError(f"GA summary not found: {path}")
    with path.open(newline="") as fh:
        try:
            return {int(r["iterations"]): {k: float(v) for k, v in r.items() if k != "iterations"}
                    for r in csv.DictReader(fh)}
        except (KeyError, ValueError, TypeError):
            raise CliError(f"{path}: malformed GA summary") from None


def speedup(ga_ms_per_timestep: float, policy_ms_per_timestep: float) -> float:
    if not policy_ms_per_timestep > 0:
        raise ValueError("policy evaluation time must be positive")
    return ga_ms_per_timestep / policy_ms_per_timestep


def cmd_compare(args):
    if not Path(args.eval_report).is_file():
        raise CliError(f"eval report not found: {args.eval_report}")
    report = load_report(args.eval_report)
    ga_rows = read_ga_summary(args.ga_summary)
    if args.ga_iterations not in ga_rows:
        raise CliError(f"GA summary has no row for {args.ga_iterations} iterations")
    ga_ms = ga_rows[args.ga_iterations]["ms_per_timestep"]
    policy_ms = report["avg_eval_time_ms"]
    ratio = speedup(ga_ms, policy_ms)
    print(f"GA ({args.ga_iterations} iterations): {ga_ms:.3f} ms per timestep")
    print(f"policy: {policy_ms:.4f} ms per timestep")
    print(f"speedup = {ratio:.1f}")


def cmd_bench_kernels(args):
    rows = run_benchmark(args.beams or 8, args.rows, args.repeat, args.seed or 0)
    text = format_rows(rows)
    print(text)
    if args.out != ".":
        (_out_dir(args) / "bench_kernels.txt").write_text(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--config", help="scenario file (key = value lines)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="beampower", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demand", parents=[common], help="write a synthetic demand CSV")
    p.add_argument("--beams", type=positive_int)
    p.add_argument("--steps", type=positive_int)
    p.add_argument("--peak", type=float, help="peak demand in bps (default: from scenario)")
    p.set_defaults(func=cmd_gen_demand)

    p = sub.add_parser("train", parents=[common], help="train PPO policies")
    p.add_argument("--demand", help="demand CSV (default: synthetic from scenario)")
    p.add_argument("--runs", type=positive_int, default=1)
    for name, kind in PPO_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate trained policies")
    p.add_argument("--checkpoint", nargs="+", required=True,
                   help="checkpoint files or training output directories")
    p.add_argument("--demand")
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ga", parents=[common], help="run the GA baseline")
    p.add_argument("--demand")
    p.add_argument("--iterations", type=int_list, default=[125, 250, 375, 500])
    p.add_argument("--stride", type=positive_int, default=10)
    p.add_argument("--population", type=positive_int, default=200)
    p.add_argument("--workers", type=positive_int, default=8)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.set_defaults(func=cmd_ga)

    p = sub.add_parser("compare", parents=[common], help="GA time over policy time")
    p.add_argument("--eval-report", required=True)
    p.add_argument("--ga-summary", required=True)
    p.add_argument("--ga-iterations", type=positive_int, default=125)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench-kernels", parents=[common], help="time numba against numpy kernels")
    p.add_argument("--beams", type=positive_int)
    p.add_argument("--rows", type=positive_int, default=200)
    p.add_argument("--repeat", type=positive_int, default=20)
    p.set_defaults(func=cmd_bench_kernels)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, OSError, ppo.UpdateAborted) as exc:
        print(f"beampower {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
