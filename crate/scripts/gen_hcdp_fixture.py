#!/usr/bin/env python3
"""Regenerate crates/core/fixtures/hcdp_subset.csv.

Station placements and values are synthetic. Only the per-island station
counts (Kauai 3, Oahu 3, Molokai 1, Maui 10, Hawaii 16) and the attribute
set match the source dataset. Output is deterministic for the fixed seed.
"""
import csv
import datetime as dt
import math
import random
import sys

SEED = 20240101

# (name, island, lat, lon, wetness, elevation_m)
STATIONS = [
    ("Lihue Airport", "Kauai", 21.984, -159.341, 1.0, 30),
    ("Waimea Canyon", "Kauai", 22.070, -159.660, 0.6, 900),
    ("Hanalei Valley", "Kauai", 22.200, -159.500, 1.6, 20),
    ("Manoa Lyon Arboretum", "Oahu", 21.333, -157.801, 2.4, 150),
    ("Honolulu Harbor", "Oahu", 21.307, -157.866, 0.5, 5),
    ("Kaneohe Bay", "Oahu", 21.450, -157.790, 1.1, 10),
    ("Molokai Airport", "Molokai", 21.152, -157.096, 0.5, 135),
    ("Kahului Airport", "Maui", 20.899, -156.429, 0.4, 15),
    ("Haleakala Summit", "Maui", 20.710, -156.253, 0.7, 3050),
    ("Hana Coast", "Maui", 20.758, -155.990, 2.1, 40),
    ("Kula Uplands", "Maui", 20.790, -156.326, 0.6, 900),
    ("Lahaina Town", "Maui", 20.878, -156.682, 0.3, 10),
    ("Kihei Shore", "Maui", 20.764, -156.445, 0.2, 5),
    ("Puu Kukui", "Maui", 20.890, -156.590, 2.8, 1700),
    ("Makawao Ranch", "Maui", 20.856, -156.313, 0.9, 500),
    ("Wailuku Heights", "Maui", 20.891, -156.505, 0.7, 120),
    ("Kipahulu", "Maui", 20.660, -156.070, 1.9, 60),
    ("Hilo Airport", "Hawaii", 19.719, -155.048, 2.0, 10),
    ("Kona International", "Hawaii", 19.739, -156.046, 0.3, 15),
    ("Waimea Plateau", "Hawaii", 20.020, -155.670, 0.8, 810),
    ("Mauna Loa Slope", "Hawaii", 19.536, -155.576, 0.4, 3400),
    ("Volcano Village", "Hawaii", 19.430, -155.240, 1.8, 1200),
    ("Pahoa", "Hawaii", 19.497, -154.950, 1.9, 200),
    ("Naalehu", "Hawaii", 19.060, -155.590, 0.6, 250),
    ("Honokaa", "Hawaii", 20.080, -155.470, 1.3, 330),
    ("Kohala Ridge", "Hawaii", 20.150, -155.780, 1.0, 1000),
    ("Captain Cook", "Hawaii", 19.497, -155.920, 0.9, 400),
    ("Waikoloa", "Hawaii", 19.940, -155.790, 0.2, 150),
    ("Laupahoehoe", "Hawaii", 19.990, -155.240, 2.2, 150),
    ("Ocean View", "Hawaii", 19.110, -155.770, 0.4, 900),
    ("Saddle Road", "Hawaii", 19.690, -155.480, 0.7, 2000),
    ("Keaau", "Hawaii", 19.620, -155.040, 1.7, 100),
    ("Holualoa", "Hawaii", 19.620, -155.950, 0.9, 420),
]

ATTRIBUTES = ["rainfall", "temperature", "soil_moisture", "solar", "wind_speed"]


def main(out_path):
    rng = random.Random(SEED)
    start = dt.date(2024, 1, 1)
    end = dt.date(2024, 6, 30)
    days = [start + dt.timedelta(d) for d in range((end - start).days + 1)]
    rows = []
    for idx, (name, island, lat, lon, wet, elev) in enumerate(STATIONS, start=1):
        sid = str(idx)
        base_temp = 26.0 - 0.0065 * elev
        wind_base = 2.5 + 4.0 * rng.random()
        soil = 0.15 + 0.1 * wet
        for day_no, day in enumerate(days):
            season = math.sin(2 * math.pi * (day_no / 365.0))
            # Station 4 keeps every day except 2024-03-15; others lose ~2% of days.
            if sid == "4":
                if day == dt.date(2024, 3, 15):
                    continue
            elif rng.random() < 0.02:
                continue
            rain = 0.0
            if rng.random() < 0.25 + 0.2 * min(wet, 2.0):
                rain = rng.expovariate(1.0) * 6.0 * wet
            soil = min(0.55, max(0.02, soil * 0.93 + 0.004 * rain + 0.01 * wet * 0.1))
            values = {
                "rainfall": round(rain, 1),
                "temperature": round(base_temp + 1.5 * season + rng.gauss(0, 0.8), 1),
                "soil_moisture": round(soil, 3),
                "solar": round(max(40.0, 230 - 35 * wet + 30 * season + rng.gauss(0, 25)), 1),
                "wind_speed": round(max(0.1, wind_base + rng.gauss(0, 1.2)), 2),
            }
            for attr in ATTRIBUTES:
                rows.append([sid, name, island, f"{lat:.3f}", f"{lon:.3f}", day.isoformat(), attr, values[attr]])
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "station_name", "island", "latitude", "longitude", "date", "attribute", "value"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/fixtures/hcdp_subset.csv")
