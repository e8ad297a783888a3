"""Command line front end.

Exit codes: 0 success, 2 invalid input or config, 3 numerical failure,
4 file I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import harness
from .diffusion import load_params, sample_trajectory
from .env import load_edge_list, save_edge_list, total_reward
from .errors import ArtifactIOError, UavTopoError
from .game import select_combination
from .trainer import _rng, greedy_topology, random_topology


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI config file; missing keys take defaults")
    p.add_argument("--seed", type=int, help="seed for both scenario draw and training")
    p.add_argument("--out-dir", default="runs/latest")
    p.add_argument("--iters", type=int, help="training iterations N")
    p.add_argument("--trajectories", type=int, help="chains per iteration K")
    p.add_argument("--uavs", type=int, help="number of UAVs J")
    p.add_argument("--gus", type=int, help="number of ground users I")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavtopo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("gen-scenario", help="draw a scenario and write scenario.json"))
    _common(sub.add_parser("solve-game", help="Stackelberg solve and budgeted UAV selection"))
    _common(sub.add_parser("train", help="train the diffusion policy and write run artifacts"))

    p = sub.add_parser("eval", help="score a topology file or a graph sampled from a checkpoint")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--topology", help="edge-list JSON")
    src.add_argument("--checkpoint", help="policy checkpoint")

    p = sub.add_parser("sweep-uavs", help="best utility per exact UAV subset size")
    _common(p)
    p.add_argument("--sizes", default=None, help='e.g. "1-9" or "1,3,5" (default 1..J)')

    p = sub.add_parser("baseline", help="greedy, random or REINFORCE-trained topology")
    _common(p)
    p.add_argument("kind", choices=("greedy", "random", "reinforce"))
    p.add_argument("--edge-prob", type=float, default=0.25, help="edge probability for random")
    return parser


def _run_config(args) -> harness.RunConfig:
    run = harness.load_config(args.config) if args.config else harness.RunConfig()
    sc_over, tr_over = {}, {}
    if args.seed is not None:
        sc_over["seed"] = tr_over["seed"] = args.seed
    if args.uavs is not None:
        sc_over["n_uavs"] = args.uavs
    if args.gus is not None:
        sc_over["n_gus"] = args.gus
    if args.iters is not None:
        tr_over["n_iters"] = args.iters
    if args.trajectories is not None:
        tr_over["n_trajectories"] = args.trajectories
    return harness.RunConfig(
        scenario=dataclasses.replace(run.scenario, **sc_over),
        channel=run.channel,
        train=dataclasses.replace(run.train, **tr_over),
    )


def _dump(obj, path):
    harness._write_text(path, json.dumps(obj, indent=2) + "\n")


def _score(graph, sc, run, out, name):
    breakdown = dataclasses.asdict(total_reward(graph, sc, run.train.weights, run.train.zeta))
    save_edge_list(graph, out / f"{name}.json")
    _dump(breakdown, out / f"{name}_reward.json")
    print(json.dumps({"edges": graph.edges(), "reward": breakdown}))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _run_config(args)
        out = harness.ensure_dir(args.out_dir)
        cmd = args.command

        if cmd == "train":
            art = harness.run_experiment(run, out)
            hist = art.history
            print(f"trained {len(hist)} iterations; final mean reward {hist.mean_reward[-1]:.4f}")
            print(f"artifacts in {out}")
            return 0

        if cmd == "baseline" and args.kind == "reinforce":
            run.train = dataclasses.replace(run.train, estimator="reinforce")
            art = harness.run_experiment(run, out)
            print(f"REINFORCE baseline: final mean reward {art.history.mean_reward[-1]:.4f}")
            return 0

        sc = run.make_scenario()
        if cmd == "gen-scenario":
            _dump(sc.to_dict(), out / "scenario.json")
            print(f"scenario with {sc.n_uavs} UAVs, {sc.n_gus} GUs -> {out / 'scenario.json'}")
        elif cmd == "solve-game":
            eq = select_combination(sc.uav_game, sc.alice, run.train.zeta)
            _dump(eq.to_dict(), out / "equilibrium.json")
            print(
                f"combination {list(eq.combination)} value {eq.combination_value:.6f} "
                f"payment {eq.total_payment:.6f} / budget {sc.alice.budget}"
            )
        elif cmd == "sweep-uavs":
            sizes = harness.parse_sizes(args.sizes) if args.sizes else range(1, sc.n_uavs + 1)
            rows = harness.sweep_uav_count(sc, sizes, zeta=run.train.zeta)
            harness.emit_csv(rows, out / "sweep.csv", harness.SWEEP_COLUMNS)
            for size, utility, feasible in rows:
                print(f"{size:3d}  {utility: .6f}  {'ok' if feasible else 'infeasible'}")
        elif cmd == "eval":
            if args.topology:
                graph = load_edge_list(args.topology)
            else:
                params = load_params(args.checkpoint)
                rng = _rng(run.train.seed, 2)
                graph = sample_trajectory(params, sc, run.train.schedule, rng).final
            _score(graph, sc, run, out, "eval")
        elif cmd == "baseline":
            if args.kind == "greedy":
                graph = greedy_topology(sc, run.train.weights, zeta=run.train.zeta)
            else:
                graph = random_topology(sc, args.edge_prob, np.random.default_rng(run.train.seed))
            _score(graph, sc, run, out, args.kind)
        return 0
    except UavTopoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ArtifactIOError.exit_code


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
