"""Generate a synthetic parking dataset and inspect its planted structure.

The generator stands in for a real city feed: lots scattered over a
square kilometer-scale area with a high-capacity central cluster, and
occupancy series following type-specific tidal profiles (commercial
lots peak on weekend afternoons, office lots during weekday working
hours, residential lots overnight).
"""

import numpy as np

from parkcoarse.synth import STEPS_PER_DAY, SynthConfig, generate, planted_structure_report

config = SynthConfig(n_lots=30, days=7, seed=42, noise_sigma=0.03)
dataset = generate(config, out_dir="out/demo_data")
report = planted_structure_report(dataset)

print(f"{dataset.n_lots} lots x {dataset.n_steps} steps (15-minute cadence)")
print(f"type counts: {report['type_counts']}")
print(f"planted high-capacity cluster: lots {report['high_pr_lots']}")
print(f"  mean ParkingRank inside cluster: {report['mean_rank_high_pr']:.4f}")
print(f"  mean ParkingRank elsewhere:     {report['mean_rank_rest']:.4f}")

q = dataset.occupancy_rates()
hours = (np.arange(dataset.n_steps) % STEPS_PER_DAY) / 4.0
types = dataset.synth_meta["lot_types"]
for lot_type in ("commercial", "office", "residential"):
    cols = [j for j, lot in enumerate(dataset.lots) if types[str(lot.lot_id)] == lot_type]
    if not cols:
        continue
    by_hour = [q[hours == h][:, cols].mean() for h in (3.0, 9.0, 15.0, 21.0)]
    print(f"{lot_type:12s} mean occupancy at 03/09/15/21h: "
          + "  ".join(f"{v:.2f}" for v in by_hour))

print("\nfiles written to out/demo_data/ (lots.csv, occupancy.csv, synth_meta.json)")
