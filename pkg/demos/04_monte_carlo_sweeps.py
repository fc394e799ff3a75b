"""Walkthrough: the Monte Carlo evaluation harness.

Runs scaled-down versions of the two headline sweeps and writes the report
CSVs.  The full-size runs (R = 20, all algorithms, the complete grids) are
what `rssdetect sweep-locations` / `sweep-features` execute by default.
"""

from dataclasses import replace

from rssdetect import evaluation as ev
from rssdetect.neural import TrainConfig

# a lighter configuration so the demo finishes in about a minute
cfg = ev.ExperimentConfig(
    location_grid=(10, 45),
    feature_subsets=((0, 1), (0, 4)),
    algorithms=("dnnc", "dbc2"),
    iterations=2,
    master_seed=1,
    train=TrainConfig(max_epochs=15, patience=5),
)

print("accuracy vs number of locations available for training")
report = ev.sweep_locations(cfg)
for row in report.rows:
    print(f"  {row.algorithm:5s} L={row.sweep_value:>2s}: "
          f"{row.mean_accuracy:.3f} +/- {row.std_error:.3f}")
ev.emit_report(report, "sweep_locations_demo.csv",
               raw_path="sweep_locations_demo.raw.csv")

print("\naccuracy vs feature subset (same receiver 0+1 vs different receivers 0+4)")
feat = ev.sweep_features(replace(cfg, locations_used_features=40))
for row in feat.rows:
    print(f"  {row.algorithm:5s} channels {row.sweep_value}: "
          f"{row.mean_accuracy:.3f} +/- {row.std_error:.3f}")
ev.emit_report(feat, "sweep_features_demo.csv")

print("\nwrote sweep_locations_demo.csv / .raw.csv and sweep_features_demo.csv")
