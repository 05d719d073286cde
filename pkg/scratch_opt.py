import time

import numpy as np

from meltpath.dqn import RewardConfig, TrainConfig, greedy_rollout, GridWorldEnv, train
from meltpath.reward import EMPTY_METRICS, MovementMetrics, RewardTable, enumerate_movements
from meltpath.scanpath import ACTIONS, GridSpec


def random_table(grid, rng):
    entries = {}
    for m in enumerate_movements(grid):
        if m.in_bounds:
            entries[m] = MovementMetrics(float(rng.uniform(1.0, 4.0)),
                                         float(rng.uniform(0.5, 3.0)), 10, True)
        else:
            entries[m] = EMPTY_METRICS
    return RewardTable(grid=grid, entries=entries)


def optimal_return(grid, table, rc):
    n2 = grid.n * grid.n
    best = [-np.inf]

    def dfs(pos, visited, total):
        if len(visited) == n2:
            best[0] = max(best[0], total)
            return
        for action in ACTIONS:
            nxt = grid.neighbor(pos, action)
            if nxt is not None and nxt not in visited:
                r1 = rc.new_point_reward(table.metrics_for(pos, action))
                dfs(nxt, visited | {nxt}, total + r1)
        n_unvisited = n2 - len(visited)
        best[0] = max(best[0], total + rc.r_collision + rc.r_unvisited_per_point * n_unvisited)

    dfs(0, {0}, 0.0)
    return best[0]


for n in (2, 3):
    hits = 0
    t0 = time.time()
    episodes_used = []
    for trial in range(20):
        grid = GridSpec(n=n, hatch_mm=0.15, origin_mm=(0.2, 0.2), z_mm=0.2)
        table = random_table(grid, np.random.default_rng(1000 + trial))
        rc = RewardConfig(case=1, gv_scale_um3=1.0)
        opt = optimal_return(grid, table, rc)
        cfg = TrainConfig(max_episodes=5000, target_sync_every=100,
                          greedy_stop_return=opt, greedy_eval_every=25,
                          seed_net=trial * 7 + 1, seed_action=trial * 7 + 2,
                          seed_sampling=trial * 7 + 3)
        res = train(grid, table, rc, cfg)
        env = GridWorldEnv(grid, table, rc)
        got = greedy_rollout(res.params, env)["cumulative_reward"]
        ok = abs(got - opt) < 1e-9
        hits += ok
        episodes_used.append(len(res.episodes))
        if not ok:
            print(f"  n={n} trial={trial}: got {got:.4f} vs opt {opt:.4f}", flush=True)
    print(f"n={n}: {hits}/20 in {time.time()-t0:.0f}s, "
          f"episodes mean {np.mean(episodes_used):.0f} max {max(episodes_used)}", flush=True)
