"""Desk-scale trend benchmark: 1- and 2-stage MS-UNet1D, three seeds each.

2,000 training and 200 test examples at SNR in [-10, +10] dB, base 16,
W=4096, batch 8, 10 epochs (5,000 Adam steps per model). On one CPU core a
step takes about 0.8 s for one stage and 1.45 s for two, so the six runs
need roughly 10 hours; data generation and evaluation add a few minutes.

    python benchmarks/desk_scale.py --out /tmp/desk

Reuses splits already present under --out. Writes report.txt, report.csv
and report.svg there and prints the two trend checks.
"""

import argparse
import json
import logging
from pathlib import Path

from radseg.probes import DESK_SEEDS, desk_scale
from radseg.report import Run, render_svg, report_csv, report_table


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=list(DESK_SEEDS))
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    result = desk_scale(args.out, seeds=tuple(args.seeds))
    runs = [Run(f"MS-UNet1D seed {seed}", st, rep) for (st, seed), rep in sorted(result.reports.items())]
    for (st, seed), rep in sorted(result.reports.items()):
        (args.out / f"report-s{st}-seed{seed}.json").write_text(rep.to_json())
    snrs = (-10.0, -5.0, 0.0, 5.0, 10.0)
    (args.out / "report.txt").write_text(report_table(runs, snrs))
    (args.out / "report.csv").write_text(report_csv(runs))
    (args.out / "report.svg").write_text(render_svg(runs))

    trend = {f"{st}/{seed}": result.improves_with_snr(st, seed) for st, seed in result.reports}
    medians = {st: result.median_iou(st, -10.0) for st in (1, 2)}
    print(report_table(runs, snrs))
    print(json.dumps({"iou_up_with_snr": trend, "median_iou_-10dB": medians,
                      "two_stage_not_worse": medians[2] >= medians[1]}, indent=1))
    return 0 if all(trend.values()) else 1


if __name__ == "__main__":
    raise SystemExit(main())
