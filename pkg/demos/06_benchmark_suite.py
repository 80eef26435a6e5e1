#!/usr/bin/env python3
"""Desk-scale benchmark: a few scenarios per family at N=3, report to CSV.

This is a fast taste of the evaluation protocol; the full desk-scale run is
the acceptance suite (pytest tests/test_acceptance.py) or the CLI:
heatplan bench --robots 3 --n 30.
"""

from pathlib import Path

import heatplan as hp

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

spec = hp.SuiteSpec(robot_counts=(3,), scenarios_per_config=6, map_variants=2, base_seed=1)
scenarios = hp.generate_suite(spec)
print(f"running {len(scenarios)} scenarios across {len(spec.families)} families...")
report = hp.run_suite(scenarios)

csv_text = hp.write_report(report, "csv")
(OUT / "report.csv").write_text(csv_text)
(OUT / "records.jsonl").write_text(hp.write_records(report.records))
print(csv_text)
print("wrote report.csv and records.jsonl")
