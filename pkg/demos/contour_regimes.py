"""
Where does 2SLS win?
====================

Sweep instrument strength against the size of the exclusion violation and
record which estimator has the smallest inconsistency in each cell. Strong
instruments tolerate larger violations before OLS becomes preferable.

Run with ``python3 demos/contour_regimes.py [OUTDIR]``.
"""

import sys
from pathlib import Path

import numpy as np

from causal_tradeoff import ScenarioSpec
from causal_tradeoff.plots import ESTIMATOR_LABELS, contour_grid, contour_svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(parents=True, exist_ok=True)

spec = ScenarioSpec("er", False, {"c0": 0.3, "c1": 0.7, "c2": 0.7})
grid = contour_grid(spec, step=0.05)

symbols = {-1: " ", 0: "a", 1: "b", 2: "c"}
print("rows: c3 (instrument strength), columns: c_er (violation)")
print("a = " + ESTIMATOR_LABELS[0] + ", b = " + ESTIMATOR_LABELS[1] + ", c = " + ESTIMATOR_LABELS[2])
for strength, row in zip(grid.strength, grid.winner):
    print(f"{strength:4.2f} " + "".join(symbols[int(w)] for w in row))

# The largest violation 2SLS still survives, per instrument strength.
for i, strength in enumerate(grid.strength):
    wins = np.flatnonzero(grid.winner[i] == 2)
    if wins.size:
        print(f"c3 = {strength:.2f}: 2SLS best up to c_er = {grid.violation[wins.max()]:.2f}")

(out / "contour_er.svg").write_text(contour_svg(grid))
