"""Regenerate coconut_like.csv: a synthetic fiber-strength sample (n=225).

Usage: python3 data/make_fixture.py path/to/ewps
"""
import csv
import pathlib
import subprocess
import sys
import tempfile

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
BETA = "0.0982,-0.0109,-0.5876"
ALPHA = "5.052"
THETA = "0.9455"

rng = np.random.default_rng(2010)
lengths = rng.choice([5.0, 10.0, 15.0, 20.0, 25.0, 35.0], size=225)
log_diameter = np.log(rng.lognormal(mean=np.log(0.25), sigma=0.2, size=225))

with tempfile.TemporaryDirectory() as tmp:
    design = pathlib.Path(tmp) / "design.csv"
    with design.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["length", "log_diameter"])
        for a, b in zip(lengths, log_diameter):
            w.writerow([f"{a:.1f}", f"{b:.6f}"])
    subprocess.run(
        [sys.argv[1], "simulate", "--family", "geometric", "--alpha", ALPHA, "--theta", THETA,
         "--input", str(design), "--beta", BETA, "--response", "strength", "--seed", "225",
         "--output", str(HERE / "coconut_like.csv")],
        check=True,
    )
