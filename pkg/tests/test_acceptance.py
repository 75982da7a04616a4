"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line with the measured quantities; the lines
are printed in the "acceptance criteria" section of the pytest summary.
"""
import time

import numpy as np
import sympy as sp
from scipy.optimize import linear_sum_assignment
from test_inverter import block_diagram_oracle

from pvhosting.config import default_profile_text, parse_config
from pvhosting.inverter import TABLE_I, build_channel_model, delay_margin, split_winding_leakage
from pvhosting.stability import sweep_counts
from pvhosting.system import TABLE_V_GRID, PlantGroup, characteristic_polynomial, compose
from pvhosting.tables import CASES, case_table, delay_table
from pvhosting.tf import poly_roots
from pvhosting.timesim import SimConfig, build_statespace, detect_stability, run_linear, run_sampled

LT = split_winding_leakage()
TD_ROWS = (0.0, 67.5, 75.0, 82.5)


def _lower(r):
    """First unstable count, +inf when the range has none."""
    span = r.unstable_span
    return span[0] if span else float("inf")


def _upper(r):
    span = r.unstable_span
    return span[1] if span and span[1] is not None else None


def _fmt(r):
    return "none" if r.unstable_span is None else f"{r.unstable_span[0]}..{r.unstable_span[1] or '>' + str(r.n_max)}"


# -- 1 ---------------------------------------------------------------------------------

def test_criterion_1_delay_margin(report):
    cfg = parse_config(default_profile_text())
    t0 = time.perf_counter()
    dm = delay_margin(cfg.inverter_params(), step=cfg.analysis.margin_step_us * 1e-6)
    dt = time.perf_counter() - t0
    ok = dm.value is not None and abs(dm.value * 1e6 - 85.5) <= 3.0 and dt < 5.0
    report(1, ok, f"margin {dm.value * 1e6:.2f} us (target 85.5 +- 3), {dt:.2f} s (< 5 s)")
    assert ok


# -- 2 ---------------------------------------------------------------------------------

def test_criterion_2_delay_table_ordering(report):
    rows = dict(delay_table(TABLE_I, LT, TABLE_V_GRID, TD_ROWS, n_max=1000))
    lows = [_lower(rows[td]) for td in TD_ROWS]
    ups = [_upper(rows[td]) for td in TD_ROWS]
    lower_ok = all(a > b for a, b in zip(lows, lows[1:])) and all(np.isfinite(lows))
    upper_ok = all(u is not None for u in ups) and all(a < b for a, b in zip(ups, ups[1:]))
    two_ok = all(len(rows[td].stable_set) == 2 for td in TD_ROWS if td > 0)
    ok = lower_ok and upper_ok and two_ok
    detail = ", ".join(f"Td {td}: {_fmt(rows[td])}" for td in TD_ROWS)
    report(2, ok, f"unstable spans within 1..1000: {detail}")
    assert ok


# -- 3 ---------------------------------------------------------------------------------

PUBLISHED_TABLE_II = {0.0: (520, 566), 67.5: (48, 613), 82.5: (9, 794), 75.0: (20, 708)}


def test_criterion_3_calibrated_magnitudes(report):
    scales = np.round(np.arange(0.5, 1.5001, 0.05), 2)
    fits = []
    for sc in scales:
        [(_, r)] = delay_table(TABLE_I, LT, TABLE_V_GRID.scaled(float(sc)), (75.0,), n_max=1000)
        fits.append((abs(_lower(r) - 20), float(sc), _lower(r)))
    _, best, anchor = min(fits)
    t0 = time.perf_counter()
    rows = dict(delay_table(TABLE_I, LT, TABLE_V_GRID.scaled(best), TD_ROWS, n_max=1000))
    dt = time.perf_counter() - t0
    got = {td: (_lower(rows[td]), _upper(rows[td])) for td in TD_ROWS}
    targets = [(0.0, 0), (0.0, 1), (67.5, 0), (67.5, 1), (82.5, 0), (82.5, 1), (75.0, 1)]
    errs = []
    for td, k in targets:
        want, have = PUBLISHED_TABLE_II[td][k], got[td][k]
        errs.append(float("inf") if have is None or not np.isfinite(have) else abs(have - want) / want)
    ok = anchor == 20 and max(errs) <= 0.15 and dt < 60.0
    report(
        3,
        ok,
        f"best lg_scale {best} gives Td 75 lower {anchor} (target 20); "
        f"worst of seven errors {max(errs):.0%} (<= 15%); regeneration {dt:.1f} s (< 60 s); "
        f"rows: " + ", ".join(f"Td {td}: {_fmt(rows[td])}" for td in TD_ROWS),
    )
    assert ok


# -- 4 ---------------------------------------------------------------------------------

def test_criterion_4_case_trends(report):
    t0 = time.perf_counter()
    rows = case_table(TABLE_I, LT, TABLE_V_GRID, n_max=1000)
    by_row = {}
    for c in rows:
        by_row.setdefault((c.case, tuple(sorted(c.originals.items()))), []).append(c)
    # (a) along each row, later added classes carry larger delays.
    a_ok = all(
        all(_lower(x.result) >= _lower(y.result) for x, y in zip(cs, cs[1:])) and _lower(cs[-1].result) < _lower(cs[0].result)
        for cs in by_row.values()
    )
    # (b) upper boundaries lie beyond 1000 on this grid; search further for them.
    far = case_table(TABLE_I, LT, TABLE_V_GRID, {"I": CASES["I"]}, n_max=5000)
    ups = {(tuple(c.originals.items()), c.added): _upper(c.result) for c in far}
    b_pairs = [(ups[((("N1", 32),), a)], ups[((("N1", 8),), a)]) for a in ("N3", "N5")]
    b_ok = all(x is not None and y is not None and x < y for x, y in b_pairs)
    # (c) Case II lower boundaries, N5 = 8 against N5 = 2.
    lows = {(c.originals["N5"], c.added): _lower(c.result) for c in rows if c.case == "II"}
    c_pairs = [(lows[(8, a)], lows[(2, a)]) for a in ("N1", "N3")]
    c_ok = all(x < y for x, y in c_pairs)
    dt = time.perf_counter() - t0
    summary = "; ".join(
        f"{k[0]} {dict(k[1])}: " + ", ".join(f"+{c.added} {_fmt(c.result)}" for c in cs) for k, cs in sorted(by_row.items())
    )
    report(
        4,
        a_ok and b_ok and c_ok,
        f"(a) {'ok' if a_ok else 'violated'}; (b) Case I uppers N1=32 vs N1=8 {b_pairs} "
        f"{'ok' if b_ok else 'violated'}; (c) Case II lowers N5=8 vs N5=2 {c_pairs} "
        f"{'ok' if c_ok else 'violated'}; {dt:.0f} s; rows: {summary}",
    )
    assert a_ok and b_ok and c_ok


# -- 5 ---------------------------------------------------------------------------------

def _match(a, b):
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    i, j = linear_sum_assignment(cost)
    return float(np.max(cost[i, j] / np.abs(np.asarray(b)[j])))


def test_criterion_5_eigen_oracle(report):
    rng = np.random.default_rng(20240501)
    worst, sizes = 0.0, []
    for _ in range(20):
        ng = int(rng.integers(1, 4))
        groups = [
            PlantGroup(TABLE_I.with_delay(rng.uniform(0.0, 100.0) * 1e-6), LT, int(rng.integers(2, 901)), f"g{k}")
            for k in range(ng)
        ]
        m = compose(groups, TABLE_V_GRID)
        ev = build_statespace(m).eigenvalues()
        roots = poly_roots(characteristic_polynomial(m)).values
        assert len(ev) == len(roots)
        sizes.append(len(ev))
        worst = max(worst, _match(ev, roots))
    ok = worst < 1e-6
    report(5, ok, f"worst relative eigenvalue/root gap {worst:.2e} over 20 systems of order {min(sizes)}..{max(sizes)} (< 1e-6)")
    assert ok


# -- 6 ---------------------------------------------------------------------------------

def test_criterion_6_block_diagram_oracle(report):
    worst = 0.0
    for td in TD_ROWS:
        p = TABLE_I.with_delay(td * 1e-6)
        s, G, Y = block_diagram_oracle(p)
        m = build_channel_model(p)
        for ours, ref in ((m.G, G), (m.Yeq, Y)):
            num, den = sp.fraction(ref)
            rn = [float(c) for c in reversed(sp.Poly(sp.expand(num), s).all_coeffs())]
            rd = [float(c) for c in reversed(sp.Poly(sp.expand(den), s).all_coeffs())]
            k = ours.den.leading / rd[-1]
            for a, b in ((ours.den.coeffs, rd), (ours.num.coeffs, rn)):
                a, b = np.array(a), np.array(b) * k
                worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    ok = worst < 1e-9
    report(6, ok, f"worst relative coefficient gap {worst:.1e} over Td {TD_ROWS} us (< 1e-9)")
    assert ok


# -- 7 ---------------------------------------------------------------------------------

# Engine boundaries on the default grid: first unstable count 273 at 75 us and
# 91 at 82.5 us.  Every count below sits at least 10% away from them.
CONCORDANCE = [(75.0, n) for n in (10, 100, 240, 500, 600, 900)] + [(82.5, n) for n in (10, 50, 80, 150, 300, 600)]


def test_criterion_7_simulation_concordance(report):
    cfg_l, cfg_s = SimConfig(), SimConfig(mode="sampled_data")
    lin_hits = smp_hits = 0
    slowest = 0.0
    misses = []
    for td, n in CONCORDANCE:
        m = compose([PlantGroup(TABLE_I.with_delay(td * 1e-6), LT, n, "pv")], TABLE_V_GRID)
        [(_, v)] = sweep_counts(m, "pv", [n])
        t0 = time.perf_counter()
        lin = detect_stability(run_linear(build_statespace(m), cfg_l), cfg_l)
        t1 = time.perf_counter()
        smp = detect_stability(run_sampled(m, cfg_s), cfg_s)
        t2 = time.perf_counter()
        slowest = max(slowest, t1 - t0, t2 - t1)
        lin_hits += lin == v.stable
        smp_hits += smp == v.stable
        if lin != v.stable or smp != v.stable:
            misses.append((td, n, v.stable, lin, smp))
    ok = lin_hits == 12 and smp_hits == 12 and slowest < 30.0
    report(7, ok, f"linear {lin_hits}/12, sampled {smp_hits}/12, slowest run {slowest:.1f} s (< 30 s); misses {misses}")
    assert ok


# -- 8 ---------------------------------------------------------------------------------

def test_criterion_8_symmetry_reduction(report):
    p = TABLE_I.with_delay(75e-6)
    one = compose([PlantGroup(p, LT, 4, "a")], TABLE_V_GRID)
    four = compose([PlantGroup(p, LT, 1, f"u{k}") for k in range(4)], TABLE_V_GRID)
    worst = 0.0
    for mode, run in (("pade_linear", lambda m, c: run_linear(build_statespace(m), c)), ("sampled_data", run_sampled)):
        cfg = SimConfig(mode=mode, duration=0.5)
        wa, wb = run(one, cfg), run(four, cfg)
        for k in range(4):
            worst = max(worst, float(np.max(np.abs(wb.currents[f"u{k}"] - wa.currents["a"]))))
        worst = max(worst, float(np.max(np.abs(wb.pcc_voltage - wa.pcc_voltage))))
    ok = worst <= 1e-9
    report(8, ok, f"largest absolute waveform gap {worst:.1e} over both modes, 0.5 s (<= 1e-9)")
    assert ok
