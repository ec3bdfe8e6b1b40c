"""Run every bundled scenario and print a one-line verdict summary per scenario.

    python3 scripts/run_bundled_scenarios.py --out /tmp/tailbound-reports
"""
import argparse
from collections import Counter
from pathlib import Path

import tailbound
from tailbound.cli import emit_curve, run_scenario

SCENARIOS = Path(tailbound.__file__).parent / "scenarios"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="reports")
    ap.add_argument("--samples", type=int, default=None, help="override the sample count")
    args = ap.parse_args()
    out = Path(args.out)
    for cfg in sorted(SCENARIOS.glob("*.json")):
        if cfg.stem.endswith("_curve"):
            print(f"{cfg.stem:24s} curve -> {emit_curve(cfg, out_dir=out)}")
            continue
        path, rep = run_scenario(cfg, out_dir=out, samples=args.samples)
        counts = Counter(r.verdict for r in rep.records)
        summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        print(f"{cfg.stem:24s} exit={rep.exit_code}  {summary}  -> {path}")


if __name__ == "__main__":
    main()
