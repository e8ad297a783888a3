"""Mean reward per iteration for the diffusion policy (EPG), the REINFORCE
estimator, and flat greedy / random-graph reference levels.

Writes one CSV with columns: estimator, seed, iter, mean_reward, connected_frac.
"""

import argparse
from pathlib import Path

import numpy as np

from uavtopo.env import RewardWeights, total_reward
from uavtopo.harness import emit_csv, ensure_dir
from uavtopo.scenario import generate_scenario
from uavtopo.trainer import TrainConfig, greedy_topology, random_topology, train_gdpo


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--uavs", type=int, default=9)
    ap.add_argument("--gus", type=int, default=20)
    ap.add_argument("--random-draws", type=int, default=200)
    ap.add_argument("--out", default="runs/convergence.csv")
    args = ap.parse_args()

    rows = []
    w = RewardWeights()
    for seed in range(args.seeds):
        sc = generate_scenario(seed, n_uavs=args.uavs, n_gus=args.gus)
        for est in ("epg", "reinforce"):
            cfg = TrainConfig(n_iters=args.iters, seed=seed, estimator=est)
            hist = train_gdpo(cfg, sc)
            for it, (m, c) in enumerate(zip(hist.mean_reward, hist.connected_frac)):
                rows.append((est, seed, it, m, c))
            print(f"seed {seed} {est:9s} first {hist.mean_reward[0]:9.3f} last {hist.mean_reward[-1]:9.3f}")
        greedy = total_reward(greedy_topology(sc, w), sc, w).total
        rng = np.random.default_rng(seed)
        rand = np.mean([total_reward(random_topology(sc, 0.25, rng), sc, w).total for _ in range(args.random_draws)])
        for it in range(args.iters):
            rows.append(("greedy", seed, it, greedy, float("nan")))
            rows.append(("random", seed, it, float(rand), float("nan")))
        print(f"seed {seed} greedy {greedy:9.3f} random(p=0.25) {rand:9.3f}")

    out = Path(args.out)
    ensure_dir(out.parent)
    emit_csv(rows, out, ("estimator", "seed", "iter", "mean_reward", "connected_frac"))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
