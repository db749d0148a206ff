"""Brute-force aggregates over the station fixture, written to JSON."""
import csv
import json
import math
import sys
from collections import defaultdict


def median(v):
    n = len(v)
    return v[n // 2] if n % 2 else (v[n // 2 - 1] + v[n // 2]) / 2


def five(values):
    v = sorted(values)
    n = len(v)
    h = (n + 1) // 2
    return [v[0], median(v[:h]), median(v), median(v[n - h:]), v[-1]]


def aggs(values):
    return {
        "mean": math.fsum(values) / len(values),
        "min": min(values),
        "max": max(values),
        "sum": math.fsum(values),
    }


def main(path, out):
    stations = {}
    by_station = defaultdict(list)
    by_island = defaultdict(list)
    by_month = defaultdict(list)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            sid, attr, value = row["station_id"], row["attribute"], float(row["value"])
            stations[sid] = row["island"]
            by_station[(sid, attr)].append(value)
            by_island[(row["island"], attr)].append(value)
            by_month[(row["date"][:7], attr)].append(value)
    counts = defaultdict(int)
    for island in stations.values():
        counts[island] += 1
    doc = {
        "stations": len(stations),
        "island_counts": dict(sorted(counts.items())),
        "station": {f"{s}|{a}": {**aggs(v), "five": five(v)} for (s, a), v in sorted(by_station.items())},
        "island": {f"{i}|{a}": aggs(v) for (i, a), v in sorted(by_island.items())},
        "month": {f"{m}|{a}": aggs(v) for (m, a), v in sorted(by_month.items())},
    }
    with open(out, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
