import sys
import time

from meltpath.dqn import RewardConfig, TrainConfig, train
from meltpath.reward import EMPTY_METRICS, MovementMetrics, RewardTable, enumerate_movements
from meltpath.scanpath import GridSpec

grid = GridSpec(n=5, hatch_mm=0.15, origin_mm=(0.2, 0.2), z_mm=0.2)
entries = {}
for m in enumerate_movements(grid):
    entries[m] = MovementMetrics(1.0, 1.0, 1, True) if m.in_bounds else EMPTY_METRICS
table = RewardTable(grid=grid, entries=entries)
rc = RewardConfig(case=1, gv_scale_um3=1.0)

name = sys.argv[1]
seeds = [int(s) for s in sys.argv[2:]] or list(range(5))
variants = {
    "base": {},
    "reboot100": dict(target_sync_every=100),
    "reboot500": dict(),
    "sync100_noreboot": dict(target_sync_every=100, stall_patience=None),
    "sync500_noreboot": dict(stall_patience=None),
}
kw = variants[name]
hits = 0
for seed in seeds:
    cfg = TrainConfig(max_episodes=15000, stop_at_reward=24.0,
                      seed_net=seed * 10 + 1, seed_action=seed * 10 + 2,
                      seed_sampling=seed * 10 + 3, **kw)
    t0 = time.time()
    res = train(grid, table, rc, cfg)
    ok = res.stopped_early_at is not None
    hits += ok
    best = max(e.cumulative_reward for e in res.episodes)
    print(f"{name} seed {seed}: reached24={ok} at={res.stopped_early_at} best={best:.0f} "
          f"time={time.time()-t0:.0f}s", flush=True)
print(f"{name} hits: {hits}/{len(seeds)}")
