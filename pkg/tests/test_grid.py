import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from critwave.grid import (GridError, RadialField, RadialGrid, SpacetimeRecord, WaveState,
                           integrate_radial, make_grid)


def test_make_grid_examples():
    g = make_grid(1.0, 1 / 8)
    assert g.n_cells == 8
    assert g.r[0] == 1 / 16
    assert make_grid(60.0, 1 / 256).n_cells == 15360


@pytest.mark.parametrize("R, dr", [(1.0, 0.5), (0.0, 0.1), (1.0, -0.1), (float("inf"), 0.1),
                                   (1.0, float("nan"))])
def test_make_grid_rejects(R, dr):
    with pytest.raises(GridError):
        make_grid(R, dr)


def test_field_invariants():
    g = make_grid(1.0, 1 / 8)
    with pytest.raises(GridError):
        RadialField(g, np.zeros(7))
    with pytest.raises(GridError):
        RadialField(g, np.full(8, np.nan))
    f = RadialField(g, np.arange(8.0))
    assert not f.samples.flags.writeable
    with pytest.raises(GridError):
        f + RadialField(make_grid(2.0, 1 / 4), np.zeros(8))


def test_integrate_zero_and_disk():
    g = make_grid(3.0, 1 / 64)
    assert integrate_radial(g.zeros()) == 0.0
    one = g.sample(np.ones_like)
    assert integrate_radial(one) == pytest.approx(math.pi * 9.0, rel=1e-12)


def test_integrate_gaussian_order():
    errs = []
    for dr in (1 / 16, 1 / 32, 1 / 64):
        g = make_grid(8.0, dr)
        errs.append(abs(integrate_radial(g.sample(lambda r: np.exp(-r * r))) - math.pi))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders >= 1.8)


@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8),
       st.lists(st.floats(-5, 5), min_size=8, max_size=8),
       st.floats(-3, 3))
def test_integrate_linear_and_monotone(a, b, c):
    g = make_grid(1.0, 1 / 8)
    fa, fb = RadialField(g, a), RadialField(g, b)
    lhs = integrate_radial(fa * c + fb)
    rhs = c * integrate_radial(fa) + integrate_radial(fb)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))
    hi = RadialField(g, np.maximum(a, b))
    assert integrate_radial(hi) >= integrate_radial(fa) - 1e-12


def test_wavestate_and_record():
    g = make_grid(1.0, 1 / 8)
    s = WaveState.zero(g, 0.5)
    assert s.grid == g and s.t == 0.5
    with pytest.raises(GridError):
        WaveState(0.0, g.zeros(), make_grid(2.0, 1 / 4).zeros())
    rec = SpacetimeRecord(g, 0.5, [0.0, 0.5, 1.0], np.zeros((3, 8)), np.ones((3, 8)))
    assert rec.t_final == 1.0 and len(rec) == 3
    assert rec.index_near(0.49) == 1
    with pytest.raises(GridError):
        SpacetimeRecord(g, 0.5, [0.0, 0.5, 0.4], np.zeros((3, 8)), np.zeros((3, 8)))


def test_radial_grid_direct():
    with pytest.raises(GridError):
        RadialGrid(0.1, 4)
