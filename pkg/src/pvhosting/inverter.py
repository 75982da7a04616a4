"""
Single-inverter current loop with capacitor-current active damping.

The loop is an LCL filter (``L1``, ``Cf``, ``L2``) whose grid-side current is
regulated by a proportional-resonant controller.  The modulator gain
``k_pwm = Vdc / 2`` and the digital delay (Padé model) form the actuator
``Gs(s)``::

    u_inv = Gs * (Gc * (i_ref - i2) - kd * iC)

Eliminating the filter states with the PCC voltage as an input gives the
Norton pair ``i2 = G * i_ref - Yeq * u_pcc``.  Both share the denominator::

    D = L1 s^3 + kd Gs s^2 + L1 w_res^2 s + Gs Gc w_r^2

with ``w_r^2 = 1 / (L2 Cf)`` and ``w_res^2 = (L1 + L2) / (L1 L2 Cf)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InputError
from .tf import S, Polynomial, RationalFunction, pade_delay, poly_roots

__all__ = [
    "InverterParams",
    "InverterChannelModel",
    "NortonModel",
    "DelayMargin",
    "TABLE_I",
    "build_controller",
    "build_delay_chain",
    "build_channel_model",
    "build_norton",
    "split_winding_leakage",
    "delay_margin",
]


@dataclass(frozen=True)
class InverterParams:
    """Physical and control parameters of one inverter.

    ``Td`` is the total loop delay in seconds.  When left as ``None`` it is
    derived from the computation-delay coefficient and the ZOH,
    ``(lam + 0.5) * Ts``.  ``fsw`` is carried as metadata only.
    """

    kp: float
    kr: float
    kd: float
    omega0: float
    omega_i: float
    Vdc: float
    L1: float
    L2: float
    Cf: float
    Ts: float
    Td: Optional[float] = None
    lam: float = 1.0
    fsw: float = 10e3

    def __post_init__(self):
        bad = [
            name
            for name in ("kp", "kr", "kd", "omega0", "omega_i", "Vdc", "L1", "L2", "Cf", "Ts")
            if not (math.isfinite(getattr(self, name)) and getattr(self, name) > 0)
        ]
        if bad:
            raise InputError(f"parameters must be finite and strictly positive: {', '.join(bad)}")
        if self.Td is not None and not (math.isfinite(self.Td) and self.Td >= 0):
            raise InputError(f"Td must be non-negative, got {self.Td}")
        if not (0 < self.lam <= 1):
            raise InputError(f"lam must lie in (0, 1], got {self.lam}")

    @property
    def k_pwm(self) -> float:
        return self.Vdc / 2

    @property
    def omega_r(self) -> float:
        return 1.0 / math.sqrt(self.L2 * self.Cf)

    @property
    def omega_res(self) -> float:
        return math.sqrt((self.L1 + self.L2) / (self.L1 * self.L2 * self.Cf))

    @property
    def total_delay(self) -> float:
        if self.Td is not None:
            return self.Td
        return (self.lam + 0.5) * self.Ts

    def with_delay(self, Td: Optional[float]) -> "InverterParams":
        return replace(self, Td=Td)


# 500 kW unit.  The source table labels two rows "k_d"; the 0.001 row is the
# proportional gain.
TABLE_I = InverterParams(
    kp=0.001,
    kr=1.0,
    kd=0.0017,
    omega0=100 * math.pi,
    omega_i=math.pi,
    Vdc=553.0,
    L1=90e-6,
    L2=18e-6,
    Cf=182e-6,
    Ts=1 / 20e3,
    lam=1.0,
    fsw=10e3,
)


@dataclass(frozen=True, eq=False)
class InverterChannelModel:
    """Reference-to-current channel ``G`` and output admittance ``Yeq``."""

    params: InverterParams
    G: RationalFunction
    Yeq: RationalFunction


@dataclass(frozen=True, eq=False)
class NortonModel:
    """Norton source seen at the PCC through the transformer leakage ``LT``.

    ``ipv_gain`` and ``Ypv`` are stored exactly as assembled (no cancellation).
    """

    channel: InverterChannelModel
    ipv_gain: RationalFunction
    Ypv: RationalFunction
    LT: float

    def deflated(self) -> tuple:
        """``(ipv_gain, Ypv)`` with the shared channel denominator divided out.

        Both are assembled as ``X / (Yeq LT s + 1)`` where ``X`` and ``Yeq``
        share the denominator ``D``, so ``D`` cancels exactly and the common
        denominator becomes ``num(Yeq) LT s + D``.
        """
        ch = self.channel
        den = ch.Yeq.num * (self.LT * S) + ch.Yeq.den
        return RationalFunction(ch.G.num, den), RationalFunction(ch.Yeq.num, den)


def build_controller(p: InverterParams) -> RationalFunction:
    """PR controller ``kp + 2 kr wi s / (s^2 + 2 wi s + w0^2)``."""
    den = Polynomial((p.omega0**2, 2 * p.omega_i, 1.0))
    num = p.kp * den + Polynomial((0.0, 2 * p.kr * p.omega_i))
    return RationalFunction(num, den)


def build_delay_chain(p: InverterParams) -> RationalFunction:
    """Padé model of the total computation + ZOH delay."""
    return pade_delay(p.total_delay)


def build_channel_model(p: InverterParams) -> InverterChannelModel:
    """Closed current loop as a Norton pair with a shared, cleared denominator.

    ``G`` and ``Yeq`` are multiplied through by ``den(Gd) * den(Gc)`` so that
    both are ratios of polynomials over the same denominator polynomial.
    """
    gc = build_controller(p)
    gd = build_delay_chain(p)
    kpwm, wr2, wres2 = p.k_pwm, p.omega_r**2, p.omega_res**2
    clear = gd.den * gc.den

    den = (
        p.L1 * S * S * S * clear
        + p.kd * kpwm * S * S * gd.num * gc.den
        + p.L1 * wres2 * S * clear
        + kpwm * wr2 * gd.num * gc.num
    )
    g_num = kpwm * wr2 * gd.num * gc.num
    y_num = (p.L1 / p.L2 * S * S + wr2) * clear + p.kd * kpwm / p.L2 * S * gd.num * gc.den
    return InverterChannelModel(p, RationalFunction(g_num, den), RationalFunction(y_num, den))


def build_norton(m: InverterChannelModel, LT: float) -> NortonModel:
    """Refer the inverter through a series leakage inductance ``LT``."""
    if not (math.isfinite(LT) and LT > 0):
        raise InputError(f"LT must be a positive inductance, got {LT}")
    bracket = m.Yeq * RationalFunction(LT * S) + 1.0
    return NortonModel(m, m.G / bracket, m.Yeq / bracket, LT)


def split_winding_leakage(
    Uz: float = 0.045,
    U_lv: float = 270.0,
    S_winding: float = 500e3,
    omega0: float = 100 * math.pi,
) -> float:
    """Leakage inductance of one low-voltage winding from its impedance voltage.

    ``LT = Uz * U_lv^2 / S_winding / omega0``.  The default ratings give about
    20.9 uH.
    """
    if min(Uz, U_lv, S_winding, omega0) <= 0:
        raise InputError("transformer ratings must be positive")
    return Uz * U_lv**2 / S_winding / omega0


@dataclass(frozen=True)
class DelayMargin:
    """Smallest unstable total delay, or ``None`` if the range is stable throughout."""

    value: Optional[float]
    tolerance: float
    Td_range: tuple

    @property
    def stable_throughout(self) -> bool:
        return self.value is None


def _standalone_max_real(p: InverterParams, LT: float) -> float:
    ch = build_channel_model(p)
    if LT > 0:
        tf = build_norton(ch, LT).deflated()[0]
    else:
        tf = ch.G
    return poly_roots(tf.den).max_real


def delay_margin(
    p: InverterParams,
    Td_range: tuple = (0.0, None),
    step: float = 0.5e-6,
    LT: float = 0.0,
    tol: float = 0.01e-6,
) -> DelayMargin:
    """Smallest total delay at which the stand-alone inverter loses stability.

    The inverter sees a stiff source either directly (``LT == 0``, poles of
    ``G``) or through the transformer leakage (``LT > 0``, poles of
    ``ipv_gain`` after cancelling its structural common factor).  ``Td`` is
    swept on a grid of ``step`` and the first crossing is bisected to ``tol``.

    Parameters
    ----------
    Td_range : (float, float or None)
        Sweep interval in seconds; the upper end defaults to ``5 * Ts`` and
        may not exceed it.
    """
    lo, hi = Td_range
    hi = 5 * p.Ts if hi is None else hi
    if step <= 0:
        raise InputError("step must be positive")
    if not (0 <= lo < hi <= 5 * p.Ts * (1 + 1e-12)):
        raise InputError(f"Td_range must lie within [0, 5 Ts], got ({lo}, {hi})")
    if LT < 0:
        raise InputError("LT must be non-negative")

    def unstable(td):
        return _standalone_max_real(p.with_delay(td), LT) >= 0

    grid = np.arange(lo, hi + step / 2, step)
    prev = None
    for td in grid:
        if unstable(td):
            if prev is None:
                return DelayMargin(float(td), tol, (lo, hi))
            a, b = prev, float(td)
            while b - a > tol:
                mid = 0.5 * (a + b)
                if unstable(mid):
                    b = mid
                else:
                    a = mid
            return DelayMargin(b, tol, (lo, hi))
        prev = float(td)
    return DelayMargin(None, tol, (lo, hi))
