"""
Root locus against the inverter count
=====================================

Track the rightmost closed-loop poles as inverters are added at a 75 us
delay, and watch the dominant branch cross into the right half plane.
"""

import csv
import io

from pvhosting import TABLE_I, TABLE_V_GRID, PlantGroup, compose, locus_trace, split_winding_leakage
from pvhosting.report import LOCUS_HEADER, csv_text

m = compose([PlantGroup(TABLE_I.with_delay(75e-6), split_winding_leakage(), 1, "pv")], TABLE_V_GRID)
counts = [2, 50, 100, 200, 260, 272, 273, 300, 600]
rows = locus_trace(m, "pv", counts, top_k=2)

# The same rows the CLI writes to locus.csv.
table = list(csv.DictReader(io.StringIO(csv_text(LOCUS_HEADER, rows))))
for n in counts:
    pts = [r for r in table if int(r["count"]) == n and float(r["im_rad_s"]) > 0]
    lead = max(pts, key=lambda r: float(r["re_rad_s"]))
    re, im = float(lead["re_rad_s"]), float(lead["im_rad_s"])
    print(f"count {n:4d}: dominant pole {re:9.3f} + j{im:8.1f}  ({im / 6.283185307179586:6.1f} Hz)")
