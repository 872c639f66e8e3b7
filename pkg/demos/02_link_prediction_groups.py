"""
Link prediction calibrated on pairs of groups
=============================================

Nodes of a growing graph carry two categorical attributes (3 levels each).
The pair-groups kernel makes forecasts calibrated on every (group of i,
group of j, prediction bin) cell at once.
"""

import math

from anykernel import AnyKernelPredictor
from anykernel.evaluate import distance_to_multicalibration_bound, multicalibration_table
from anykernel.graphs import build_pair_groups_kernel
from anykernel.nature import GraphEvolution, simulate

T = 4000
nature = GraphEvolution(levels=(3, 3), seed=3)
groups = nature.groups()
kernel = build_pair_groups_kernel(groups, n_bins=10)
transcript = simulate(nature, AnyKernelPredictor(kernel, seed=4), T)
print(f"graph now has {nature.history.n_nodes} nodes and {len(nature.history.edges)} edges")

rows = multicalibration_table(transcript, groups, 10)
worst = max(rows, key=lambda row: abs(row.error))
print(f"worst cell: groups ({worst.group}, {worst.group2}), bin {worst.bin}, "
      f"error {worst.error:.2f} over {worst.count:.0f} rounds")
print(f"reference sqrt(mT + 1) with m = {len(groups)}: {math.sqrt(len(groups) * T + 1):.1f}")

summary = distance_to_multicalibration_bound(transcript, groups, 10)
print(f"kernel calibration error under Laplace x groups: {summary.kce:.1f}")
