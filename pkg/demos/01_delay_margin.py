"""
Delay margin of a single inverter
=================================

How much loop delay can one LCL inverter with capacitor-current damping
tolerate before its current loop goes unstable?
"""

import numpy as np

from pvhosting import TABLE_I, build_channel_model, delay_margin, poly_roots, split_winding_leakage

# The shipped parameter set: 500 kW unit, 20 kHz sampling, 1.5 Ts delay.
p = TABLE_I
print(f"k_pwm = {p.k_pwm:.1f}, omega_r = {p.omega_r:.0f} rad/s, omega_res = {p.omega_res:.0f} rad/s")

# Sweep the total delay and bracket the first unstable value.
dm = delay_margin(p)
print(f"delay margin (stiff grid): {dm.value * 1e6:.2f} us +- {dm.tolerance * 1e6:.2f} us")

# The transformer leakage adds grid inductance and moves the margin out.
LT = split_winding_leakage()
print(f"delay margin with {LT * 1e6:.1f} uH leakage: {delay_margin(p, LT=LT).value * 1e6:.2f} us")

# The rightmost oscillatory pole walks toward the imaginary axis as Td grows.
for td_us in (0.0, 50.0, 75.0, 85.0, 90.0):
    v = poly_roots(build_channel_model(p.with_delay(td_us * 1e-6)).G.den).values
    osc = v[np.abs(v.imag) > 100]
    z = osc[np.argmax(osc.real)]
    print(f"  Td = {td_us:5.1f} us: dominant pair {z.real:9.1f} +- j{abs(z.imag):8.1f}")
