"""
Sensitivity to the grid inductance
==================================

The first unstable count depends strongly on the grid inductance.  Scan a
scale factor on the derived Lg and see where the 75 us boundary lands.
"""

from pvhosting import TABLE_I, TABLE_V_GRID, split_winding_leakage
from pvhosting.tables import delay_table

LT = split_winding_leakage()
for scale in (0.5, 0.75, 1.0, 1.25, 1.5, 3.0, 10.0):
    [(_, r)] = delay_table(TABLE_I, LT, TABLE_V_GRID.scaled(scale), (75.0,), n_max=1000)
    span = r.unstable_span
    print(f"Lg x {scale:5.2f}: unstable counts {span if span else 'none within 1..1000'}")
