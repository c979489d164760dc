"""The peakscope command line, driven from Python.

The same calls work from a shell, for instance
    peakscope --out run solve --config well.cfg --at 0,0,0
"""
import json
import tempfile
from pathlib import Path

from peakscope.cli import main

CONFIG = """\
# a potential well in three dimensions
n = 3
p = 2
q = 4
theta = 4
alpha = "1"
V = "1 + (x1-0.3)^2 + (x2+0.2)^2 + (x3-0.1)^2"
K = "1"
box = "-1:1"        # one range is reused on every axis
grid_n = 4
seed = 7
"""

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "well.cfg"
    cfg.write_text(CONFIG)
    out = tmp / "run"

    code = main(["--out", str(out), "solve", "--config", str(cfg), "--at", "0,0,0"])
    print(f"solve -> exit {code}; energy.json:")
    print((out / "energy.json").read_text())

    code = main(["--out", str(out), "check", "--config", str(cfg), "--profile", str(out / "profile.csv")])
    print(f"check -> exit {code}: {json.loads((out / 'check.json').read_text())['verdict']}")

    code = main(["--jobs", "2", "--out", str(out), "scan-sigma", "--config", str(cfg)])
    rows = (out / "sigma_scan.csv").read_text().splitlines()
    print(f"scan-sigma -> exit {code}, {len(rows) - 1} rows; first row:\n  {rows[1]}")

    code = main(["--jobs", "2", "--out", str(out), "locate", "--config", str(cfg)])
    for line in (out / "candidates.jsonl").read_text().splitlines():
        rec = json.loads(line)
        print(f"locate -> exit {code}: candidate {rec['z']}, all checks pass: "
              f"{rec['certification']['all_pass']}")

    bad = tmp / "bad.cfg"
    bad.write_text(CONFIG.replace('"1 + (x1-0.3)^2', '"1 + (x1-0.3)**2'))
    print("a malformed expression:")
    code = main(["solve", "--config", str(bad), "--at", "0,0,0"])
    print(f"  exit {code}")
