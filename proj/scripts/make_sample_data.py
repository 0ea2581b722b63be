#!/usr/bin/env python3
"""Generate a small synthetic market for the command-line walkthrough.

Writes raw vendor-style quote files (newest row first; the exchange rate
uses day/month/year dates) plus a copy of the sample experiment config.
The planted structure mirrors the integration fixtures: the exchange
rate's three-day return carries tomorrow's index direction, and the
constituents co-move in two blocks, so the learners have something real
to find while the persistence baseline stays near chance.
"""

import argparse
import math
import random
import shutil
from datetime import date, timedelta
from pathlib import Path

FIRST_DAY = date(2003, 6, 2)
LAST_DAY = date(2009, 1, 31)
CONSTITUENTS = 8
BLOCK_SPLIT = 4


def daily_calendar(first, last):
    days = []
    day = first
    while day <= last:
        days.append(day)
        day += timedelta(days=1)
    return days


def balanced_yearly_signs(calendar, rng):
    signs = []
    start = 0
    while start < len(calendar):
        stop = start
        while stop < len(calendar) and calendar[stop].year == calendar[start].year:
            stop += 1
        count = stop - start
        year = [1] * ((count + 1) // 2) + [-1] * (count // 2)
        rng.shuffle(year)
        signs.extend(year)
        start = stop
    return signs


def build_series(calendar, rng):
    rows = len(calendar)
    signs = balanced_yearly_signs(calendar, rng)
    series = {}

    closes = [1000.0]
    for j in range(rows - 1):
        pct = 0.2 + 0.1 * abs(rng.gauss(0.0, 1.0))
        closes.append(closes[-1] * (1.0 + signs[j] * pct / 100.0))
    series["INDEX"] = closes

    closes = [1100.0]
    for _ in range(rows - 1):
        closes.append(closes[-1] * math.exp(0.008 * rng.gauss(0.0, 1.0)))
    series["SP500"] = closes

    exr_log = []
    for j in range(rows):
        if j < 3:
            exr_log.append(math.log(1200.0) + 0.001 * j)
        else:
            exr_log.append(exr_log[j - 3] + signs[j] * rng.uniform(0.020, 0.035))
    series["EXR"] = [math.exp(v) for v in exr_log]

    betas = [rng.uniform(0.8, 1.2) for _ in range(CONSTITUENTS)]
    closes = [[50.0 + c] for c in range(CONSTITUENTS)]
    for _ in range(rows - 1):
        factor_a = 0.012 * rng.gauss(0.0, 1.0)
        factor_b = 0.012 * rng.gauss(0.0, 1.0)
        for c in range(CONSTITUENTS):
            shared = factor_a if c < BLOCK_SPLIT else factor_b
            step = betas[c] * shared + 0.004 * rng.gauss(0.0, 1.0)
            closes[c].append(closes[c][-1] * math.exp(step))
    for c in range(CONSTITUENTS):
        series[f"C{c + 1:02d}"] = closes[c]

    return series


def write_raw(path, calendar, closes, day_first, skip):
    lines = ["date,close"]
    for day, close in zip(calendar, closes):
        if day in skip:
            continue
        stamp = day.strftime("%d/%m/%Y" if day_first else "%Y-%m-%d")
        lines.append(f"{stamp},{close:.6f}")
    lines[1:] = reversed(lines[1:])
    path.write_text("\n".join(lines) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="sample-data",
                        help="destination directory (default: sample-data)")
    parser.add_argument("--seed", type=int, default=7,
                        help="generator seed (default: 7)")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    raw_dir = out_dir / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)

    rng = random.Random(args.seed)
    calendar = daily_calendar(FIRST_DAY, LAST_DAY)
    series = build_series(calendar, rng)

    gaps = {day for day in rng.sample(calendar[10:-10], 3)}
    for name, closes in series.items():
        write_raw(raw_dir / f"{name}.csv", calendar, closes,
                  day_first=(name == "EXR"), skip=gaps if name == "SP500" else set())

    config = Path(__file__).resolve().parent / "sample-config.json"
    shutil.copy(config, out_dir / "config.json")

    names = " ".join(sorted(series))
    print(f"wrote {len(series)} raw quote files under {raw_dir}")
    print("next steps (with the dircast binary on PATH):")
    print(f"  cd {out_dir}")
    for name in sorted(series):
        fmt = " --date-format %d/%m/%Y" if name == "EXR" else ""
        print(f"  dircast ingest --in raw/{name}.csv --id {name}"
              f" --out {name}.csv{fmt}")
    print(f"  dircast align {names.replace(' ', '.csv ')}.csv"
          " --reference INDEX --out sample-panel.csv")
    print("  dircast backtest --config config.json --out report.json")
    print("  dircast render --report report.json --csv hit-ratios.csv"
          " --table hit-ratios.txt")


if __name__ == "__main__":
    main()
