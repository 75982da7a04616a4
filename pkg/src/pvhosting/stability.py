"""
Pole classification and inverter-count sweeps.

Stability in the number of connected inverters is not monotone: poles cross
into the right half-plane as inverters are added and may return when even
more are added.  Ranges are therefore found by an exhaustive integer sweep.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DiagnosticError, InputError
from .system import SystemModel, characteristic_polynomial, compose
from .tf import PoleSet, poly_roots

__all__ = [
    "DEFAULT_MARGIN_TOL",
    "StabilityVerdict",
    "Boundary",
    "StabilityRange",
    "LocusRow",
    "classify",
    "system_poles",
    "sweep_counts",
    "find_ranges",
    "delay_sweep",
    "locus_trace",
]

DEFAULT_MARGIN_TOL = 1e-3 * 100 * math.pi
MAX_COUNT = 10_000


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of classifying one pole set.

    ``stable`` holds iff ``max_real < -margin_tol``; poles within
    ``margin_tol`` of the imaginary axis set ``marginal``.
    """

    max_real: float
    stable: bool
    dominant_pair: tuple
    margin_tol: float
    marginal: bool = False


class Boundary(NamedTuple):
    """Adjacent counts on either side of a stability transition."""

    last_stable: int
    first_unstable: int


@dataclass(frozen=True)
class StabilityRange:
    """Stable counts of one swept group with the other groups held fixed.

    ``stable_set`` is a list of inclusive ``(lo, hi)`` intervals within
    ``[1, n_max]``.
    """

    swept_label: str
    fixed_counts: dict
    n_max: int
    stable_set: tuple
    boundaries: tuple

    @property
    def unstable_span(self) -> Optional[tuple]:
        """``(first_unstable, last_unstable)`` for a low-stable/high-stable pattern.

        Matches the tabulated form "N < a, N > b" with ``a`` the first and
        ``b`` the last unstable count; ``b`` is ``None`` when instability
        persists to ``n_max``.
        """
        if not self.boundaries:
            return None
        first = min(b.first_unstable for b in self.boundaries)
        rising = [b for b in self.boundaries if b.last_stable > b.first_unstable]
        last = max(b.first_unstable for b in rising) if rising else None
        return first, last

    def is_stable(self, n: int) -> bool:
        return any(lo <= n <= hi for lo, hi in self.stable_set)


class LocusRow(NamedTuple):
    count: int
    branch_id: int
    re: float
    im: float


def classify(poles: PoleSet, margin_tol: float = DEFAULT_MARGIN_TOL) -> StabilityVerdict:
    """Stability verdict for a pole set."""
    v = np.asarray(poles.values if isinstance(poles, PoleSet) else poles, dtype=complex)
    if v.size == 0:
        raise InputError("cannot classify an empty pole set")
    max_real = float(v.real.max())
    dom = v[np.abs(v.real - max_real) <= 1e-9 * max(abs(max_real), 1.0)]
    dom = tuple(sorted((complex(x) for x in dom), key=lambda z: (z.imag, z.real)))
    return StabilityVerdict(
        max_real=max_real,
        stable=max_real < -margin_tol,
        dominant_pair=dom,
        margin_tol=margin_tol,
        marginal=abs(max_real) <= margin_tol,
    )


def system_poles(m: SystemModel) -> PoleSet:
    return poly_roots(characteristic_polynomial(m))


def _check_counts(counts: Sequence[int]):
    bad = [n for n in counts if not (1 <= n <= MAX_COUNT)]
    if bad:
        raise InputError(f"counts must lie within [1, {MAX_COUNT}], got {bad[:5]}")


def sweep_counts(
    m: SystemModel,
    swept: str,
    counts: Iterable[int],
    margin_tol: float = DEFAULT_MARGIN_TOL,
    workers: int = 1,
) -> list:
    """Classify the system for each count of the swept group.

    Returns ``[(count, verdict), ...]`` sorted by count.  ``workers > 1``
    evaluates counts concurrently; the result order does not depend on it.
    """
    counts = sorted(set(int(n) for n in counts))
    _check_counts(counts)
    m.group(swept)

    def one(n):
        try:
            return n, classify(system_poles(m.with_counts({swept: n})), margin_tol)
        except DiagnosticError as exc:
            raise DiagnosticError(f"{exc} [swept {swept!r} count {n}]") from exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, counts))
    else:
        out = [one(n) for n in counts]
    return sorted(out, key=lambda item: item[0])


def _intervals(flags: Sequence[bool]) -> list:
    out, start = [], None
    for i, ok in enumerate(flags, start=1):
        if ok and start is None:
            start = i
        if not ok and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(flags)))
    return out


def find_ranges(
    m: SystemModel,
    swept: str,
    n_max: int = 1000,
    margin_tol: float = DEFAULT_MARGIN_TOL,
    workers: int = 1,
) -> StabilityRange:
    """Stable counts ``1..n_max`` of the swept group.

    Each transition is re-checked by classifying both neighbours again from
    a freshly composed model.
    """
    if n_max < 1:
        raise InputError("n_max must be at least 1")
    verdicts = sweep_counts(m, swept, range(1, n_max + 1), margin_tol, workers)
    flags = [v.stable for _, v in verdicts]
    bounds = []
    for n in range(1, n_max):
        a, b = flags[n - 1], flags[n]
        if a != b:
            bounds.append(Boundary(n, n + 1) if a else Boundary(n + 1, n))
    for bd in bounds:
        fresh = sweep_counts(m, swept, [bd.last_stable, bd.first_unstable], margin_tol)
        ok = dict((n, v.stable) for n, v in fresh)
        if not ok[bd.last_stable] or ok[bd.first_unstable]:
            raise DiagnosticError(f"boundary {bd} of group {swept!r} failed re-evaluation")
    fixed = {g.label: g.count for g in m.groups if g.label != swept}
    return StabilityRange(swept, fixed, n_max, tuple(_intervals(flags)), tuple(bounds))


def delay_sweep(
    m: SystemModel,
    group: str,
    Td_values: Sequence[float],
    n_max: int = 1000,
    margin_tol: float = DEFAULT_MARGIN_TOL,
    workers: int = 1,
) -> list:
    """``find_ranges`` of ``group`` after setting its total delay to each value."""
    bad = [td for td in Td_values if not td >= 0]
    if bad:
        raise InputError(f"delays must be non-negative, got {bad}")
    m.group(group)
    out = []
    for td in Td_values:
        groups = [
            replace(g, params=g.params.with_delay(td)) if g.label == group else g
            for g in m.groups
        ]
        mt = compose(groups, m.grid, _branches=m.branches)
        out.append((td, find_ranges(mt, group, n_max, margin_tol, workers)))
    return out


def locus_trace(
    m: SystemModel,
    swept: str,
    counts: Iterable[int],
    top_k: int = 4,
    rel_tol: float = 1e-6,
) -> list:
    """Root-locus branches of the ``top_k`` rightmost poles as the count varies.

    Poles at consecutive counts are matched by minimum total distance, which
    keeps each ``branch_id`` on a continuous branch.  A conjugate pair is
    never split, so a count may report ``top_k + 1`` poles.  Two poles closer than
    ``rel_tol`` (relative) cannot be told apart; they share a branch id and a
    warning is issued.
    """
    if top_k < 1:
        raise InputError("top_k must be at least 1")
    counts = sorted(set(int(n) for n in counts))
    _check_counts(counts)
    rows: list = []
    prev: Optional[np.ndarray] = None
    prev_ids: list = []
    next_id = 0
    for n in counts:
        poles = system_poles(m.with_counts({swept: n})).values
        order = np.lexsort((poles.imag, -poles.real))
        k = top_k
        # Never split a conjugate pair at the cut.
        if k < len(order) and poles[order[k - 1]].imag != 0:
            tail = poles[order[k - 1]]
            if not any(np.isclose(poles[order[j]], np.conj(tail)) for j in range(k - 1)):
                k += 1
        cur = poles[order[:k]]
        if prev is None:
            ids = list(range(len(cur)))
            next_id = len(cur)
        else:
            cost = np.abs(cur[:, None] - prev[None, :])
            ri, ci = linear_sum_assignment(cost)
            ids = [-1] * len(cur)
            for r, c in zip(ri, ci):
                ids[r] = prev_ids[c]
            for r in range(len(cur)):
                if ids[r] < 0:
                    ids[r] = next_id
                    next_id += 1
        for i in range(len(cur)):
            for j in range(i + 1, len(cur)):
                scale = max(abs(cur[i]), abs(cur[j]), 1.0)
                if abs(cur[i] - cur[j]) < rel_tol * scale and ids[i] != ids[j]:
                    warnings.warn(
                        f"ambiguous locus branches at count {n}: {cur[i]:.6g} and {cur[j]:.6g}",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                    ids[j] = ids[i]
        for pole, bid in sorted(zip(cur, ids), key=lambda t: (t[1], t[0].imag)):
            rows.append(LocusRow(n, bid, float(pole.real), float(pole.imag)))
        prev, prev_ids = cur, ids
    return rows
