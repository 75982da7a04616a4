"""
Hosting ranges of a plant of identical inverters
================================================

For each loop delay, which inverter counts keep the plant stable on the
derived 110 kV grid?
"""

from pvhosting import TABLE_I, TABLE_V_GRID, grid_impedance, split_winding_leakage
from pvhosting.tables import delay_table

LT = split_winding_leakage()
z = grid_impedance(TABLE_V_GRID)
print(f"grid referred to 270 V: Rg = {z.Rg:.3e} ohm, Lg = {z.Lg * 1e6:.3f} uH")

# Every row sweeps the count of one identical group over 1..n_max.
for n_max in (1000, 4000):
    print(f"\ncounts 1..{n_max}")
    for td, r in delay_table(TABLE_I, LT, TABLE_V_GRID, (0.0, 67.5, 75.0, 82.5), n_max=n_max):
        bounds = ", ".join(f"({b.last_stable} stable, {b.first_unstable} unstable)" for b in r.boundaries) or "none"
        print(f"  Td = {td:5.1f} us: stable {list(r.stable_set)}  boundaries {bounds}")
