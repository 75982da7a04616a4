"""
Hosting-capacity tables: a delay sweep of one identical group and the
mixed-delay plant cases.

Mixed-delay cases start from an existing plant of one or two delay classes
and sweep the count of an added class while the originals stay fixed.
Delay classes are labelled ``N1`` to ``N5``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .inverter import InverterParams
from .stability import DEFAULT_MARGIN_TOL, StabilityRange, delay_sweep, find_ranges
from .system import GridParams, PlantGroup, compose

__all__ = ["DELAY_CLASSES_US", "CASES", "CaseRow", "delay_table", "case_table", "range_record"]

DELAY_CLASSES_US = {"N1": 67.5, "N2": 72.0, "N3": 75.0, "N4": 79.5, "N5": 82.5}

# case -> list of (original counts, added classes)
CASES = {
    "I": [({"N1": 8}, ("N3", "N5")), ({"N1": 32}, ("N3", "N5"))],
    "II": [({"N5": 2}, ("N1", "N3")), ({"N5": 8}, ("N1", "N3"))],
    "III": [({"N1": 2, "N3": 6}, ("N4", "N5")), ({"N1": 6, "N3": 2}, ("N4", "N5"))],
    "IV": [({"N1": 2, "N5": 6}, ("N3", "N4")), ({"N1": 6, "N5": 2}, ("N3", "N4"))],
    "V": [({"N3": 2, "N5": 6}, ("N1", "N2")), ({"N3": 6, "N5": 2}, ("N1", "N2"))],
}


@dataclass(frozen=True)
class CaseRow:
    case: str
    originals: dict
    added: str
    result: StabilityRange


def _group(base: InverterParams, LT: float, label: str, count: int) -> PlantGroup:
    return PlantGroup(base.with_delay(DELAY_CLASSES_US[label] / 1e6), LT, count, label)


def delay_table(
    base: InverterParams,
    LT: float,
    grid: GridParams,
    Td_values_us=(0.0, 67.5, 75.0, 82.5),
    n_max: int = 1000,
    margin_tol: float = DEFAULT_MARGIN_TOL,
    workers: int = 1,
) -> list:
    """``[(Td_us, StabilityRange), ...]`` for one identical group."""
    m = compose([PlantGroup(base, LT, 1, "pv")], grid)
    rows = delay_sweep(m, "pv", [td / 1e6 for td in Td_values_us], n_max, margin_tol, workers)
    return [(td, r) for td, (_, r) in zip(Td_values_us, rows)]


def case_table(
    base: InverterParams,
    LT: float,
    grid: GridParams,
    cases=None,
    n_max: int = 1000,
    margin_tol: float = DEFAULT_MARGIN_TOL,
    workers: int = 1,
) -> list:
    """Sweep every added class of every case row; returns ``CaseRow`` records."""
    table = CASES if cases is None else cases
    out = []
    for name in sorted(table):
        for originals, added in table[name]:
            fixed = [_group(base, LT, lab, n) for lab, n in originals.items()]
            for lab in added:
                m = compose(fixed + [_group(base, LT, lab, 1)], grid)
                out.append(CaseRow(name, dict(originals), lab, find_ranges(m, lab, n_max, margin_tol, workers)))
    return out


def range_record(r: StabilityRange) -> dict:
    """Plain mapping of a :class:`StabilityRange` for reports."""
    span = r.unstable_span
    return {
        "swept_label": r.swept_label,
        "fixed_counts": dict(r.fixed_counts),
        "n_max": r.n_max,
        "stable_intervals": [list(iv) for iv in r.stable_set],
        "boundaries": [
            {"last_stable": b.last_stable, "first_unstable": b.first_unstable, "verified": True}
            for b in r.boundaries
        ],
        "unstable_first": None if span is None else span[0],
        "unstable_last": None if span is None else span[1],
    }
