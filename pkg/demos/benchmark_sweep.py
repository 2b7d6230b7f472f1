"""Head-to-head feature comparison under sensor miscalibration.

Runs the bundled two-obstacle benchmark at a reduced trial count: every
feature (value, fixed_hit, adaptive_hit, rank) against every sensor condition
(calibrated, and two uncalibrated factory presets), paired so each trial index
reuses the same source/robot layout across all twelve conditions.

The full-size sweep lives in scenarios/bench_two_obstacle.yaml and is what
the acceptance tests score. Expect a few minutes of field solving on the
first run; fields are cached in the output directory.

Run:  python3 demos/benchmark_sweep.py
"""

import json
from pathlib import Path

from gasloc.harness import BenchmarkConfig, read_log, run_benchmark

out_dir = Path("bench_demo_out")
repo = Path(__file__).resolve().parent.parent
config = BenchmarkConfig(scenario=str(repo / "scenarios" / "two_obstacle.yaml"),
                         trials=5, seed=2024)

log_path = run_benchmark(config, out_dir)
records = read_log(log_path)
summary = json.loads((out_dir / "summary.json").read_text())

stats = {(c["feature"], c["sensor"]): c for c in summary["conditions"]}

print(f"{len(records)} trials -> {log_path}\n")
print(f"{'feature':>13} | " + " | ".join(f"{s:^18}" for s in config.sensors))
print(f"{'':>13} | " + " | ".join(f"{'med err (m) / it':^18}" for _ in config.sensors))
print("-" * 78)
for feature in config.features:
    cells = []
    for sensor in config.sensors:
        s = stats[feature, sensor]
        cells.append(f"{s['error_median_m']:6.2f} / {s['iterations_median']:4.1f}")
    print(f"{feature:>13} | " + " | ".join(f"{c:^18}" for c in cells))

print("""
Reading the table: with a calibrated sensor every feature finds the source
(the value feature needs the fewest iterations — raw magnitudes carry the
most information when they can be trusted). Swap in an uncalibrated unit and
the value and fixed-threshold features are off by meters, while rank is
unaffected: it only ever consumed the ordering of the readings, which any
working sensor preserves.""")
