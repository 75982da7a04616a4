"""
Run configuration: a strict TOML schema with units in every physical key.

The shipped default profile (``profiles/default.toml``) holds the 500 kW
inverter and the 110 kV / 10 kV / 270 V grid.  Keys carry their unit as a
suffix (``Td_us``, ``L1_uH``, ``S_stepup_MVA``); the loaders convert to SI.
"""
from __future__ import annotations

import hashlib
import math
import sys
from importlib import resources
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InputError
from .inverter import InverterParams, split_winding_leakage
from .system import GridParams, PlantGroup
from .timesim import SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "load_config",
    "default_profile_text",
    "apply_overrides",
    "config_digest",
]


class ConfigError(InputError):
    """Invalid configuration.  ``errors`` lists every problem found."""

    def __init__(self, errors: list):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Pos = Field(gt=0, allow_inf_nan=False)


class InverterSection(_Strict):
    kp: float = Pos
    kr: float = Pos
    kd: float = Pos
    omega0_rad_s: float = Pos
    omega_i_rad_s: float = Pos
    Vdc_V: float = Pos
    L1_uH: float = Pos
    L2_uH: float = Pos
    Cf_uF: float = Pos
    Ts_us: float = Pos
    lam: float = Field(1.0, gt=0, le=1)
    fsw_Hz: float = Field(10e3, gt=0)


class TransformerSection(_Strict):
    """Leakage of one low-voltage winding, given directly or from its ratings."""

    LT_uH: Optional[float] = Field(None, gt=0, allow_inf_nan=False)
    Uz_pct: float = Field(4.5, gt=0)
    U_lv_V: float = Field(270.0, gt=0)
    S_winding_kVA: float = Field(500.0, gt=0)


class GroupSection(_Strict):
    label: str = Field(min_length=1)
    Td_us: Optional[float] = Field(None, ge=0, allow_inf_nan=False)
    count: int = Field(ge=1, le=10_000)
    LT_uH: Optional[float] = Field(None, gt=0, allow_inf_nan=False)


class GridSection(_Strict):
    mode: Literal["ratings", "direct"] = "ratings"
    Rg_ohm: Optional[float] = Field(None, ge=0, allow_inf_nan=False)
    Lg_uH: Optional[float] = Field(None, gt=0, allow_inf_nan=False)
    S_stepup_MVA: float = Field(6.3, gt=0)
    Us_pct: float = Field(10.5, ge=0)
    U_H_kV: float = Field(110.0, gt=0)
    U_L_kV: float = Field(10.0, gt=0)
    r_line_ohm_per_km: float = Field(0.21, ge=0)
    x_line_ohm_per_km: float = Field(0.34, ge=0)
    length_km: float = Field(20.0, ge=0)
    base_voltage_V: float = Field(270.0, gt=0)
    lg_scale: float = Field(1.0, gt=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _direct_fields(self):
        if self.mode == "direct" and (self.Rg_ohm is None or self.Lg_uH is None):
            raise ValueError("direct grid mode needs both Rg_ohm and Lg_uH")
        return self


class AnalysisSection(_Strict):
    n_max: int = Field(1000, ge=1, le=10_000)
    margin_tol_rad_s: float = Field(1e-3 * 100 * math.pi, ge=0)
    swept_label: Optional[str] = None
    Td_sweep_us: list[float] = Field(default_factory=lambda: [0.0, 67.5, 75.0, 82.5])
    locus_counts: tuple[int, int] = (2, 100)
    top_k: int = Field(4, ge=1)
    margin_step_us: float = Field(0.5, gt=0)
    margin_include_LT: bool = False
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _ranges(self):
        lo, hi = self.locus_counts
        if not 1 <= lo <= hi <= 10_000:
            raise ValueError("locus_counts must satisfy 1 <= first <= last <= 10000")
        if any(not (math.isfinite(t) and t >= 0) for t in self.Td_sweep_us):
            raise ValueError("Td_sweep_us entries must be finite and non-negative")
        return self


class SimSection(_Strict):
    mode: Literal["pade_linear", "sampled_data"] = "pade_linear"
    duration_s: float = Field(0.5, gt=0)
    substeps_per_Ts: int = Field(4, ge=4)
    reference_amplitude_A: float = 1.0
    grid_rms_V: float = Field(156.0, ge=0)
    divergence_window_s: float = Field(0.2, gt=0)
    divergence_factor: float = Field(1.005, gt=1)

    @model_validator(mode="after")
    def _window(self):
        if self.duration_s < 2 * self.divergence_window_s:
            raise ValueError("duration_s must be at least twice divergence_window_s")
        return self


class OutputSection(_Strict):
    directory: str = "out"
    formats: list[Literal["json", "csv"]] = Field(default_factory=lambda: ["json", "csv"])


class RunConfig(_Strict):
    inverter: InverterSection
    transformer: TransformerSection = TransformerSection()
    groups: list[GroupSection] = Field(min_length=1)
    grid: GridSection = GridSection()
    analysis: AnalysisSection = AnalysisSection()
    sim: SimSection = SimSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _labels(self):
        labels = [g.label for g in self.groups]
        dup = sorted({l for l in labels if labels.count(l) > 1})
        if dup:
            raise ValueError(f"duplicate group labels {dup}")
        if self.analysis.swept_label is not None and self.analysis.swept_label not in labels:
            raise ValueError(f"analysis.swept_label {self.analysis.swept_label!r} is not a group label")
        return self

    # -- conversion to engine objects (SI units) --

    def inverter_params(self, Td_us: Optional[float] = None) -> InverterParams:
        i = self.inverter
        return InverterParams(
            kp=i.kp,
            kr=i.kr,
            kd=i.kd,
            omega0=i.omega0_rad_s,
            omega_i=i.omega_i_rad_s,
            Vdc=i.Vdc_V,
            L1=i.L1_uH / 1e6,
            L2=i.L2_uH / 1e6,
            Cf=i.Cf_uF / 1e6,
            Ts=i.Ts_us / 1e6,
            Td=None if Td_us is None else Td_us / 1e6,
            lam=i.lam,
            fsw=i.fsw_Hz,
        )

    def leakage(self) -> float:
        t = self.transformer
        if t.LT_uH is not None:
            return t.LT_uH / 1e6
        return split_winding_leakage(t.Uz_pct / 100, t.U_lv_V, t.S_winding_kVA * 1e3, self.inverter.omega0_rad_s)

    def plant_groups(self) -> list:
        out = []
        for g in self.groups:
            LT = g.LT_uH / 1e6 if g.LT_uH is not None else self.leakage()
            out.append(PlantGroup(self.inverter_params(g.Td_us), LT, g.count, g.label))
        return out

    def grid_params(self) -> GridParams:
        g = self.grid
        if g.mode == "direct":
            return GridParams(mode="direct", Rg=g.Rg_ohm, Lg=g.Lg_uH / 1e6, lg_scale=g.lg_scale)
        return GridParams(
            mode="ratings",
            S_stepup=g.S_stepup_MVA * 1e6,
            Us_pct=g.Us_pct,
            U_H=g.U_H_kV * 1e3,
            U_L=g.U_L_kV * 1e3,
            r_line=g.r_line_ohm_per_km,
            x_line=g.x_line_ohm_per_km,
            length=g.length_km,
            base_voltage=g.base_voltage_V,
            omega0=self.inverter.omega0_rad_s,
            lg_scale=g.lg_scale,
        )

    def sim_config(self) -> SimConfig:
        s = self.sim
        return SimConfig(
            mode=s.mode,
            duration=s.duration_s,
            substeps_per_Ts=s.substeps_per_Ts,
            reference_amplitude=s.reference_amplitude_A,
            grid_rms=s.grid_rms_V,
            divergence_window=s.divergence_window_s,
            divergence_factor=s.divergence_factor,
        )

    @property
    def swept(self) -> str:
        return self.analysis.swept_label or self.groups[-1].label


def _format_errors(exc: ValidationError) -> list:
    out = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{loc}: {e['msg']}")
    return out


def _validate(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides: list) -> dict:
    """Apply ``key.path=value`` strings to a raw config mapping.

    Values are read as TOML literals (``1.5``, ``true``, ``[1, 2]``) and fall
    back to plain strings.  Integer path parts index into lists, e.g.
    ``groups.0.count=10``.
    """
    errors = []
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            errors.append(f"override {item!r}: expected key=value")
            continue
        parts = key.strip().split(".")
        node = data
        try:
            for p in parts[:-1]:
                node = node[int(p)] if isinstance(node, list) else node.setdefault(p, {})
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)] = _parse_value(raw.strip())
            else:
                node[last] = _parse_value(raw.strip())
        except (IndexError, ValueError, TypeError, AttributeError):
            errors.append(f"override {item!r}: no such path")
    if errors:
        raise ConfigError(errors)
    return data


def parse_config(text: str, overrides: Optional[list] = None) -> RunConfig:
    """Validate TOML text.  Raises :class:`ConfigError` listing every problem."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from None
    if overrides:
        data = apply_overrides(data, overrides)
    return _validate(data)


def default_profile_text() -> str:
    return resources.files("pvhosting").joinpath("profiles/default.toml").read_text("utf-8")


def load_config(path: Optional[str] = None, overrides: Optional[list] = None) -> tuple:
    """Read and validate a config file (the shipped profile when ``path`` is None).

    Returns ``(RunConfig, text)``; ``text`` feeds the provenance hash.
    """
    if path is None:
        text = default_profile_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, overrides), text


def config_digest(text: str, overrides: Optional[list] = None) -> str:
    h = hashlib.sha256(text.encode("utf-8"))
    for item in overrides or ():
        h.update(b"\0" + item.encode("utf-8"))
    return h.hexdigest()
