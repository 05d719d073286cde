import sys
import time

import numpy as np

from meltpath.dqn import RewardConfig, TrainConfig, train
from meltpath.reward import EMPTY_METRICS, MovementMetrics, RewardTable, enumerate_movements
from meltpath.scanpath import GridSpec

grid = GridSpec(n=5, hatch_mm=0.15, origin_mm=(0.2, 0.2), z_mm=0.2)
entries = {}
for m in enumerate_movements(grid):
    entries[m] = MovementMetrics(1.0, 1.0, 1, True) if m.in_bounds else EMPTY_METRICS
table = RewardTable(grid=grid, entries=entries)
rc = RewardConfig(case=1, gv_scale_um3=1.0)

variants = {
    "opt20": dict(init_q_bias=20.0),
    "opt20_sync2000": dict(init_q_bias=20.0, target_sync_every=2000),
    "sync2000": dict(target_sync_every=2000),
    "opt5": dict(init_q_bias=5.0),
    "opt20_sync100": dict(init_q_bias=20.0, target_sync_every=100),
}
which = sys.argv[1:] or list(variants)

for name in which:
    kw = variants[name]
    hits = 0
    detail = []
    t0 = time.time()
    for seed in range(3):
        cfg = TrainConfig(max_episodes=15000, stop_at_reward=24.0,
                          seed_net=seed * 10 + 1, seed_action=seed * 10 + 2,
                          seed_sampling=seed * 10 + 3, **kw)
        res = train(grid, table, rc, cfg)
        if res.stopped_early_at is not None:
            hits += 1
            detail.append(res.stopped_early_at)
        else:
            detail.append(-max(e.cumulative_reward for e in res.episodes))
    print(f"{name}: hits={hits}/3 detail={detail} time={time.time()-t0:.0f}s", flush=True)
