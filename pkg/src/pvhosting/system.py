"""
Multi-inverter plant: groups of identical inverters sharing one grid impedance.

Inverters with the same parameters draw identical currents, so a group of
``N_k`` units enters the PCC node equation as ``N_k * Ypv_k``.  With the
grid admittance ``Yg`` the shared bracket is::

    Delta(s) = sum_k N_k Ypv_k(s) + Yg(s)

and every closed-loop channel has ``Delta`` in its denominator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Optional, Sequence

import numpy as np

from .errors import DiagnosticError, DomainError, InputError
from .inverter import InverterParams, NortonModel, build_channel_model, build_norton
from .tf import Polynomial, RationalFunction

__all__ = [
    "GridParams",
    "GridImpedance",
    "PlantGroup",
    "SystemModel",
    "TABLE_V_GRID",
    "grid_impedance",
    "grid_admittance",
    "compose",
    "channel_tf",
    "characteristic_polynomial",
    "state_dimension",
]

DEFLATION_TOL = 1e-7


@dataclass(frozen=True)
class GridParams:
    """Grid seen from the PCC, either given directly or derived from ratings.

    Ratings mode refers a step-up transformer (percent short-circuit voltage
    on ``S_stepup``) and a transmission line on its high-voltage side down
    to ``base_voltage``.  ``lg_scale`` multiplies the resulting inductance
    (used for calibration studies).
    """

    mode: Literal["direct", "ratings"] = "ratings"
    Rg: float = 0.0
    Lg: float = 0.0
    S_stepup: float = 6.3e6
    Us_pct: float = 10.5
    U_H: float = 110e3
    U_L: float = 10e3
    r_line: float = 0.21
    x_line: float = 0.34
    length: float = 20.0
    base_voltage: float = 270.0
    omega0: float = 100 * math.pi
    lg_scale: float = 1.0

    @classmethod
    def direct(cls, Rg: float, Lg: float) -> "GridParams":
        return cls(mode="direct", Rg=Rg, Lg=Lg)

    def scaled(self, factor: float) -> "GridParams":
        return replace(self, lg_scale=self.lg_scale * factor)


TABLE_V_GRID = GridParams()


@dataclass(frozen=True)
class GridImpedance:
    Rg: float
    Lg: float
    trace: dict = field(default_factory=dict, compare=False)


def grid_impedance(g: GridParams) -> GridImpedance:
    """Series ``Rg + s Lg`` of the grid, with the referral steps recorded in ``trace``."""
    if g.mode == "direct":
        Rg, Lg = g.Rg, g.Lg * g.lg_scale
        trace = {"mode": "direct"}
    elif g.mode == "ratings":
        pos = ("S_stepup", "U_H", "U_L", "base_voltage", "omega0")
        bad = [n for n in pos if not getattr(g, n) > 0]
        bad += [n for n in ("Us_pct", "r_line", "x_line", "length") if getattr(g, n) < 0]
        if bad:
            raise InputError(f"invalid grid ratings: {', '.join(bad)}")
        x_tr = g.Us_pct / 100 * g.U_L**2 / g.S_stepup
        hv_to_lv = (g.U_L / g.U_H) ** 2
        r_line = g.r_line * g.length * hv_to_lv
        x_line = g.x_line * g.length * hv_to_lv
        to_base = (g.base_voltage / g.U_L) ** 2
        Rg = r_line * to_base
        Xg = (x_tr + x_line) * to_base
        Lg = Xg / g.omega0 * g.lg_scale
        trace = {
            "mode": "ratings",
            "X_transformer_ohm_at_U_L": x_tr,
            "R_line_ohm_at_U_H": g.r_line * g.length,
            "X_line_ohm_at_U_H": g.x_line * g.length,
            "R_line_ohm_at_U_L": r_line,
            "X_line_ohm_at_U_L": x_line,
            "ratio_U_L_to_base": to_base,
            "Xg_ohm_at_base": Xg,
            "lg_scale": g.lg_scale,
        }
    else:
        raise InputError(f"unknown grid mode {g.mode!r}")
    if not (math.isfinite(Rg) and math.isfinite(Lg)) or Rg < 0 or Lg < 0:
        raise InputError(f"grid impedance must be finite and non-negative (Rg={Rg}, Lg={Lg})")
    if Lg == 0:
        raise DomainError("grid inductance is zero: the grid admittance is unbounded")
    return GridImpedance(Rg, Lg, trace)


def grid_admittance(g: GridParams) -> RationalFunction:
    """``Yg(s) = 1 / (Rg + Lg s)``."""
    z = grid_impedance(g)
    return RationalFunction(Polynomial((1.0,)), Polynomial((z.Rg, z.Lg)))


@dataclass(frozen=True)
class PlantGroup:
    """``count`` identical inverters behind their own leakage inductance ``LT``."""

    params: InverterParams
    LT: float
    count: int
    label: str

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise InputError(f"group {self.label!r}: count must be a positive integer, got {self.count}")
        if not self.LT > 0:
            raise InputError(f"group {self.label!r}: LT must be positive")


@dataclass(frozen=True, eq=False)
class _Branch:
    """Cached per-(params, LT) data shared by every group using it."""

    norton: NortonModel
    ipv: RationalFunction
    ypv: RationalFunction
    dim: int


def state_dimension(p: InverterParams) -> int:
    """Plant (3) + PR controller (2) + Padé delay (2 when the delay is nonzero)."""
    return 5 + (2 if p.total_delay > 0 else 0)


def _build_branch(params: InverterParams, LT: float) -> _Branch:
    norton = build_norton(build_channel_model(params), LT)
    ipv, ypv = norton.deflated()
    # The deflated pair must agree with the assembled one away from the poles.
    probe = params.omega_res * np.exp(1j * np.array([0.3, 1.1, 2.0]))
    for full, red in ((norton.ipv_gain, ipv), (norton.Ypv, ypv)):
        a, b = full.num(probe) / full.den(probe), red.num(probe) / red.den(probe)
        if np.max(np.abs(a - b) / np.abs(b)) > DEFLATION_TOL:
            raise DiagnosticError("structural deflation of the Norton model failed")
    dim = state_dimension(params)
    if ypv.den.degree != dim:
        raise DiagnosticError(f"deflated Norton denominator has degree {ypv.den.degree}, expected {dim}")
    return _Branch(norton, ipv, ypv, dim)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Inverter groups plus grid; immutable once composed.

    Attributes
    ----------
    branches : dict
        One cached Norton model per distinct ``(params, LT)`` pair.
    delta : RationalFunction
        ``sum_k N_k Ypv_k + Yg`` over a common denominator.
    """

    groups: tuple
    grid: GridParams
    Yg: RationalFunction
    branches: Mapping
    delta: RationalFunction
    _basis: tuple = field(repr=False)

    def group(self, label: str) -> PlantGroup:
        for g in self.groups:
            if g.label == label:
                return g
        raise InputError(f"no group labelled {label!r}")

    def branch(self, label: str) -> _Branch:
        g = self.group(label)
        return self.branches[(g.params, g.LT)]

    @property
    def total_count(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def counts(self) -> dict:
        return {g.label: g.count for g in self.groups}

    def with_counts(self, counts: Mapping[str, int]) -> "SystemModel":
        """Same plant with some group counts changed; branch caches are reused."""
        unknown = set(counts) - {g.label for g in self.groups}
        if unknown:
            raise InputError(f"unknown group labels {sorted(unknown)}")
        groups = [replace(g, count=counts.get(g.label, g.count)) for g in self.groups]
        return compose(groups, self.grid, _branches=self.branches)


def _aggregate(groups: Sequence[PlantGroup]) -> list:
    """Distinct ``(params, LT)`` keys in first-seen order with summed counts."""
    agg: dict = {}
    for g in groups:
        key = (g.params, g.LT)
        agg[key] = agg.get(key, 0) + g.count
    return list(agg.items())


def compose(
    groups: Sequence[PlantGroup],
    grid: GridParams,
    _branches: Optional[Mapping] = None,
) -> SystemModel:
    """Build the multi-inverter model and its shared bracket ``Delta``."""
    groups = tuple(groups)
    if not groups:
        raise InputError("at least one inverter group is required")
    labels = [g.label for g in groups]
    dup = sorted({l for l in labels if labels.count(l) > 1})
    if dup:
        raise InputError(f"duplicate group labels: {dup}")
    Yg = grid_admittance(grid)

    branches = dict(_branches or {})
    for g in groups:
        key = (g.params, g.LT)
        if key not in branches:
            branches[key] = _build_branch(g.params, g.LT)

    agg = _aggregate(groups)
    delta = Yg
    for key, n in agg:
        delta = float(n) * branches[key].ypv + delta

    # Characteristic numerator basis: base + sum_k N_k * term_k.
    z = Yg.den
    dens = [branches[key].ypv.den for key, _ in agg]
    base = Polynomial((1.0,))
    for d in dens:
        base = base * d
    terms = []
    for i, (key, _) in enumerate(agg):
        t = branches[key].ypv.num * z
        for j, d in enumerate(dens):
            if j != i:
                t = t * d
        terms.append(t)
    basis = (tuple(key for key, _ in agg), base, tuple(terms))
    return SystemModel(groups, grid, Yg, branches, delta, basis)


def _drive_parts(m: SystemModel, target: str):
    b = m.branch(target)
    return b, m.group(target)


def channel_tf(
    m: SystemModel,
    target_group: str,
    drive: str,
    source_group: Optional[str] = None,
) -> RationalFunction:
    """One term of the grid-side current of an inverter in ``target_group``.

    ``drive`` selects the input:

    * ``"own_ref"``: ``(1 - N_i Ypv_i / Delta) * ipv_i`` per unit of the
      group's own reference (all same-group references are identical).
    * ``"grid_voltage"``: ``-Ypv_i Yg / Delta`` per unit of grid voltage.
    * ``"cross_ref"``: ``-(N_p Ypv_i / Delta) * ipv_p`` per unit of the
      reference of ``source_group`` ``p``.
    """
    bi, gi = _drive_parts(m, target_group)
    if drive == "own_ref":
        ni = sum(g.count for g in m.groups if (g.params, g.LT) == (gi.params, gi.LT))
        return (1.0 - float(ni) * bi.ypv / m.delta) * bi.ipv
    if drive == "grid_voltage":
        return -(bi.ypv * m.Yg / m.delta)
    if drive == "cross_ref":
        if source_group is None:
            raise InputError("cross_ref needs a source group")
        if source_group == target_group:
            raise InputError(
                "cross_ref with the target's own label: same-group coupling is part of own_ref"
            )
        bp, gp = _drive_parts(m, source_group)
        return -(float(gp.count) * bi.ypv / m.delta) * bp.ipv
    raise InputError(f"unknown drive {drive!r}")


def characteristic_polynomial(m: SystemModel) -> Polynomial:
    """Monic closed-loop characteristic polynomial of the grouped plant.

    This is the numerator of ``Delta`` over the product of the deflated
    per-branch denominators and the grid impedance.  Its degree must equal
    the state dimension of the group-reduced realization; a mismatch means
    the structural deflation failed.
    """
    keys, base, terms = m._basis
    counts = dict((k, n) for k, n in _aggregate(m.groups))
    p = base
    for key, t in zip(keys, terms):
        p = p + float(counts[key]) * t
    expected = sum(m.branches[k].dim for k in keys)
    if p.degree != expected:
        raise DiagnosticError(
            f"characteristic polynomial has degree {p.degree}, expected {expected} "
            f"(counts {m.counts})"
        )
    return p.monic()
