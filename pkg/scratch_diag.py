import numpy as np

from meltpath.dqn import (GridWorldEnv, ReplayBuffer, RewardConfig, TrainConfig, epsilon_decay,
                          greedy_rollout, init_network, mlp_forward, select_action, td_update)
from meltpath.reward import EMPTY_METRICS, MovementMetrics, RewardTable, enumerate_movements
from meltpath.scanpath import GridSpec

grid = GridSpec(n=5, hatch_mm=0.15, origin_mm=(0.2, 0.2), z_mm=0.2)
entries = {}
for m in enumerate_movements(grid):
    entries[m] = MovementMetrics(1.0, 1.0, 1, True) if m.in_bounds else EMPTY_METRICS
table = RewardTable(grid=grid, entries=entries)
rc = RewardConfig(case=1, gv_scale_um3=1.0)
cfg = TrainConfig(max_episodes=6000)

env = GridWorldEnv(grid, table, rc)
rng_net = np.random.default_rng(11)
rng_action = np.random.default_rng(12)
rng_sampling = np.random.default_rng(13)
params = init_network(25, 64, rng_net)
target = params.clone()
buffer = ReplayBuffer(10000, 25)
eps = cfg.eps
gstep = 0
best = -1e9
for ep in range(cfg.max_episodes):
    state = env.reset()
    cum = 0.0
    while not state.done:
        a = select_action(params, state, eps, rng_action)
        nxt, r, done = env.step(state, a)
        # TD reward without the episode-end unvisited penalty.
        r_td = r
        if done and not nxt.success:
            n_unvisited = 25 - nxt.visited_count
            r_td = r - rc.r_unvisited_per_point * n_unvisited
        buffer.push(state.agent_index, a, r_td, nxt.agent_index, done)
        if len(buffer) >= 64:
            td_update(params, target, buffer.sample(64, rng_sampling), cfg, 25)
        gstep += 1
        if gstep % cfg.target_sync_every == 0:
            target = params.clone()
        cum += r
        state = nxt
    best = max(best, cum)
    eps = epsilon_decay(eps, cfg)
    if ep % 500 == 0 or ep == cfg.max_episodes - 1:
        rep = greedy_rollout(params, env)
        enc = np.eye(25)
        q = mlp_forward(params, enc)
        print(f"ep {ep}: eps={eps:.3f} best={best:.0f} greedy_cov={rep['visited_count']} "
              f"greedy_end={rep['terminated_by']} Qrange=[{q.min():.1f},{q.max():.1f}]",
              flush=True)
