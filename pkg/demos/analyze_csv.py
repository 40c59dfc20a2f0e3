"""
From a CSV file to a report
===========================

Writes a simulated dataset to CSV (dropping the confounder column from the
analysis roles) and runs the command-line ``analyze`` step on it, exactly as
one would for real data.

Run with ``python3 demos/analyze_csv.py [OUTDIR]``.
"""

import sys
from pathlib import Path

from causal_tradeoff import ScenarioSpec, generate, write_csv
from causal_tradeoff.cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(parents=True, exist_ok=True)

spec = ScenarioSpec(
    "er", True, {"c0": 0.3, "c1": 0.4, "c2": 0.4, "c3": 0.3, "c_er": 0.09, "c5": 0.4, "c6": 0.4}, n_covariates=3
)
sample = generate(spec, 4_000, seed=21)
csv_path = out / "observational.csv"
write_csv(csv_path, {k: sample[k] for k in ("Y", "X", "Z", "W1", "W2", "W3")})

status = main([
    "analyze",
    "--data", str(csv_path),
    "--roles", "y=Y,x=X,z=Z,w=W1+W2+W3",
    "--kinds", "er",
    "--out", str(out / "analysis"),
])
print(f"exit status {status}; report at {out / 'analysis' / 'report.json'}")
