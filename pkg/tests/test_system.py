import math

import numpy as np
import pytest

from pvhosting.errors import DomainError, InputError
from pvhosting.inverter import TABLE_I, split_winding_leakage
from pvhosting.system import (
    TABLE_V_GRID,
    GridParams,
    PlantGroup,
    channel_tf,
    characteristic_polynomial,
    compose,
    grid_admittance,
    grid_impedance,
    state_dimension,
)
from pvhosting.tf import poly_roots, rf_eval

LT = split_winding_leakage()
P75 = TABLE_I.with_delay(75e-6)


def _group(td_us, n, label):
    return PlantGroup(TABLE_I.with_delay(td_us * 1e-6), LT, n, label)


def _eval(r, s):
    return r.num(s) / r.den(s)


# -- grid --------------------------------------------------------------------

def test_ratings_referral():
    # DERIVED: transformer 1.667 ohm at 10 kV, line 4.2 + j6.8 ohm at 110 kV, to 270 V.
    z = grid_impedance(TABLE_V_GRID)
    x_tr = 0.105 * 10e3**2 / 6.3e6
    k = (10e3 / 110e3) ** 2 * (270 / 10e3) ** 2
    assert z.trace["X_transformer_ohm_at_U_L"] == pytest.approx(1.6667, rel=1e-4)
    assert z.Rg == pytest.approx(4.2 * k, rel=1e-12) == pytest.approx(2.53e-5, rel=1e-3)
    assert z.Lg == pytest.approx((x_tr * (270 / 10e3) ** 2 + 6.8 * k) / (100 * math.pi), rel=1e-12)
    assert z.Lg == pytest.approx(4.0e-6, rel=1e-2)


def test_direct_mode_admittance():
    y = grid_admittance(GridParams.direct(0.0, 5e-6))
    assert y.num.coeffs == (1.0,) and y.den.coeffs == (0.0, 5e-6)


def test_degenerate_grid_rejected():
    with pytest.raises(DomainError):
        grid_impedance(GridParams(length=0.0, Us_pct=0.0))
    with pytest.raises(InputError):
        grid_impedance(GridParams.direct(-1.0, 1e-6))


def test_lg_scale():
    assert grid_impedance(TABLE_V_GRID.scaled(2.0)).Lg == pytest.approx(2 * grid_impedance(TABLE_V_GRID).Lg)


# -- compose -----------------------------------------------------------------

def test_single_group_bracket():
    m = compose([PlantGroup(P75, LT, 20, "a")], TABLE_V_GRID)
    ypv = m.branch("a").ypv
    want = 20.0 * ypv + m.Yg
    for s in (1j * 314.0, 1j * 2e4, -50 + 900j):
        assert _eval(m.delta, s) == pytest.approx(_eval(want, s), rel=1e-10)


def test_group_merge_invariance():
    a = compose([PlantGroup(P75, LT, 7, "a"), PlantGroup(P75, LT, 13, "b")], TABLE_V_GRID)
    b = compose([PlantGroup(P75, LT, 20, "c")], TABLE_V_GRID)
    pa, pb = characteristic_polynomial(a).array(), characteristic_polynomial(b).array()
    assert pa.shape == pb.shape
    assert np.max(np.abs(pa - pb) / np.abs(pb)) < 1e-9


def test_five_group_degree_bookkeeping():
    # DERIVED: degree of the bracket denominator sums per-group and grid degrees.
    gs = [_group(td, 3, f"g{k}") for k, td in enumerate((67.5, 72, 75, 79.5, 82.5))]
    m = compose(gs, TABLE_V_GRID)
    want = sum(m.branches[(g.params, g.LT)].ypv.den.degree for g in gs) + m.Yg.den.degree
    assert m.delta.den.degree == want
    assert characteristic_polynomial(m).degree == sum(state_dimension(g.params) for g in gs)


def test_duplicate_labels_and_empty():
    with pytest.raises(InputError):
        compose([_group(75, 1, "a"), _group(67.5, 1, "a")], TABLE_V_GRID)
    with pytest.raises(InputError):
        compose([], TABLE_V_GRID)
    with pytest.raises(InputError):
        PlantGroup(P75, LT, 0, "z")


def test_with_counts_reuses_branches():
    m = compose([_group(75, 1, "a"), _group(67.5, 4, "b")], TABLE_V_GRID)
    m2 = m.with_counts({"a": 30})
    assert m2.counts == {"a": 30, "b": 4}
    assert m2.branches[(m.group("a").params, LT)] is m.branches[(m.group("a").params, LT)]
    with pytest.raises(InputError):
        m.with_counts({"zz": 3})


# -- channels ----------------------------------------------------------------

def test_own_ref_near_unity_at_fundamental():
    m = compose([PlantGroup(TABLE_I, LT, 2, "a")], TABLE_V_GRID)
    g = abs(rf_eval(channel_tf(m, "a", "own_ref"), 1j * TABLE_I.omega0))
    assert 0 < g < 2


def test_single_group_channels_match_closed_form():
    # One group of N: i = (1 - N Ypv / D) ipv r - Ypv Yg / D ug with D = N Ypv + Yg.
    n = 40
    m = compose([PlantGroup(P75, LT, n, "a")], TABLE_V_GRID)
    b = m.branch("a")
    own, grid = channel_tf(m, "a", "own_ref"), channel_tf(m, "a", "grid_voltage")
    for s in (1j * 314.0, 1j * 3e3, -20 + 5e3j):
        ipv, ypv, yg = _eval(b.ipv, s), _eval(b.ypv, s), _eval(m.Yg, s)
        d = n * ypv + yg
        assert _eval(own, s) == pytest.approx((1 - n * ypv / d) * ipv, rel=1e-9)
        assert _eval(grid, s) == pytest.approx(-ypv * yg / d, rel=1e-9)


def test_cross_ref_scales_with_source_count():
    m = compose([PlantGroup(P75, LT, 6, "a"), PlantGroup(P75, LT, 3, "b")], TABLE_V_GRID)
    cab = channel_tf(m, "a", "cross_ref", "b")
    cba = channel_tf(m, "b", "cross_ref", "a")
    for s in (1j * 314.0, 1j * 4e3):
        assert _eval(cba, s) / _eval(cab, s) == pytest.approx(6 / 3, rel=1e-9)


def test_cross_ref_with_own_label_rejected():
    m = compose([_group(75, 2, "a"), _group(67.5, 2, "b")], TABLE_V_GRID)
    with pytest.raises(InputError):
        channel_tf(m, "a", "cross_ref", "a")
    with pytest.raises(InputError):
        channel_tf(m, "a", "bogus")


def test_within_group_coupling_equivalence():
    # (1 - N Ypv/D) ipv equals the own term minus (N - 1) identical cross terms,
    # with the self term -Ypv/D ipv: both sum the same N - 1 + 1 contributions.
    n = 9
    m = compose([PlantGroup(P75, LT, n, "a")], TABLE_V_GRID)
    b = m.branch("a")
    s = 1j * 2e3
    ipv, ypv, d = _eval(b.ipv, s), _eval(b.ypv, s), _eval(m.delta, s)
    per_unit_cross = -ypv / d * ipv
    assert _eval(channel_tf(m, "a", "own_ref"), s) == pytest.approx(ipv + n * per_unit_cross, rel=1e-12)


# -- characteristic polynomial --------------------------------------------------

def test_td0_count10_stable():
    m = compose([_group(0.0, 10, "a")], TABLE_V_GRID)
    assert poly_roots(characteristic_polynomial(m)).max_real < 0


def test_td75_count400_unstable():
    m = compose([_group(75, 400, "a")], TABLE_V_GRID)
    assert poly_roots(characteristic_polynomial(m)).max_real > 0


def test_grid_weakening_moves_dominant_pair_right():
    base = compose([_group(75, 50, "a")], TABLE_V_GRID)
    weak = compose([_group(75, 50, "a")], TABLE_V_GRID.scaled(10.0))
    a = poly_roots(characteristic_polynomial(base)).max_real
    b = poly_roots(characteristic_polynomial(weak)).max_real
    assert b > a


def test_characteristic_roots_are_delta_zeros():
    m = compose([_group(75, 25, "a"), _group(82.5, 5, "b")], TABLE_V_GRID)
    for z in poly_roots(characteristic_polynomial(m)).values:
        # Each root zeroes the numerator of Delta up to its conditioning.
        assert abs(m.delta.num(z)) <= 1e-6 * np.sum(np.abs(m.delta.num.array()) * np.abs(z) ** np.arange(m.delta.num.degree + 1))
