import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qalleles.grid import (Field2D, GridSpec, argmax, marginals, quad2, read_field_csv,
                           write_field_csv)


def field(grid, fn):
    return Field2D.from_function(grid, fn)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        GridSpec(0.0, 1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        GridSpec(nx=2)
    g = GridSpec()
    assert g.hx == pytest.approx(0.04) and g.hy == pytest.approx(0.04)
    assert g.is_square
    assert g.xs[0] == -2.0 and g.xs[-1] == 2.0


def test_field_validation():
    g = GridSpec(nx=5, ny=6)
    with pytest.raises(ValueError):
        Field2D(g, np.zeros((6, 5)))
    bad = np.zeros((5, 6))
    bad[2, 3] = np.nan
    with pytest.raises(ValueError):
        Field2D(g, bad)


def test_quad2_examples():
    g = GridSpec()
    assert quad2(field(g, lambda x, y: np.ones_like(x))) == pytest.approx(16.0, abs=1e-12)
    assert abs(quad2(field(g, lambda x, y: x))) <= 1e-12
    assert quad2(field(g, lambda x, y: x**2 + y**2)) == pytest.approx(128 / 3, abs=1e-2)


def test_quad2_second_order():
    # int x^4 over [-2,2] is 64/5, int x^2 is 16/3
    exact = (64 / 5) * 4 + (16 / 3) ** 2
    errs = []
    for n in (11, 21, 41, 81):
        g = GridSpec(nx=n, ny=n)
        errs.append(abs(quad2(field(g, lambda x, y: x**4 + x**2 * y**2)) - exact))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios


def test_marginals_product_field():
    g = GridSpec(nx=41, ny=31)
    f = lambda x: np.exp(-(x - 0.3) ** 2)
    h = lambda y: 1 + y**2
    mg = marginals(field(g, lambda x, y: f(x) * h(y)))
    ratio_x = mg.rho_x / h(g.ys)
    ratio_y = mg.rho_y / f(g.xs)
    assert np.ptp(ratio_x) <= 1e-10 * ratio_x.max()
    assert np.ptp(ratio_y) <= 1e-10 * ratio_y.max()


def test_marginals_symmetric_field():
    g = GridSpec(nx=51, ny=51)
    mg = marginals(field(g, lambda x, y: np.exp(-(x - y) ** 2 - x * y) + x**2 * y**2))
    assert np.max(np.abs(mg.rho_x - mg.rho_y)) <= 1e-12


def test_grid_delta_has_unit_mass():
    g = GridSpec(nx=21, ny=17)
    v = np.zeros(g.shape)
    v[7, 5] = 1 / (g.hx * g.hy)
    assert marginals(Field2D(g, v)).rho == pytest.approx(1.0, abs=1e-12)


def test_marginal_consistency():
    g = GridSpec(nx=33, ny=45)
    n = field(g, lambda x, y: np.exp(-(x**2 + 2 * y**2)) * (2 + np.sin(3 * x * y)))
    mg = marginals(n)
    rho_from_x = float(np.dot(g.wy, mg.rho_x))
    rho_from_y = float(np.dot(g.wx, mg.rho_y))
    assert rho_from_x == pytest.approx(mg.rho, rel=1e-10)
    assert rho_from_y == pytest.approx(mg.rho, rel=1e-10)
    assert mg.rho == pytest.approx(quad2(n), rel=1e-14)
    assert mg.rho > 0


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_marginals_scale_linearly(c):
    g = GridSpec(nx=21, ny=21)
    n = field(g, lambda x, y: np.exp(-(x - 0.5) ** 2 - y**2))
    a, b = marginals(n), marginals(n * c)
    np.testing.assert_allclose(b.rho_x, c * a.rho_x, rtol=1e-14)
    np.testing.assert_allclose(b.rho_y, c * a.rho_y, rtol=1e-14)
    assert b.rho == pytest.approx(c * a.rho, rel=1e-14)


def test_argmax_examples():
    for n in (41, 81, 161):  # grids with nodes at +-0.5
        g = GridSpec(nx=n, ny=n)
        assert argmax(field(g, lambda x, y: -((x - 0.5) ** 2 + (y + 0.5) ** 2))) == \
            pytest.approx((0.5, -0.5), abs=1e-12)
    g = GridSpec()
    assert argmax(field(g, lambda x, y: np.ones_like(x))) == (-2.0, -2.0)
    gauss = field(g, lambda x, y: np.exp(-((x - 0.501) ** 2 + y**2) / 0.05))
    assert argmax(gauss) == pytest.approx((0.52, 0.0), abs=1e-12)


def test_argmax_tie_prefers_low_x_then_low_y():
    g = GridSpec(nx=5, ny=5)
    v = np.zeros(g.shape)
    v[3, 1] = v[1, 4] = v[1, 2] = 1.0
    assert argmax(Field2D(g, v)) == (g.xs[1], g.ys[2])


def test_refine_nests_nodes():
    g = GridSpec(nx=11, ny=7)
    r = g.refine()
    assert r.shape == (21, 13)
    np.testing.assert_array_equal(r.xs[::2], g.xs)


def test_csv_round_trip(tmp_path):
    g = GridSpec(-1.0, 2.0, -0.5, 0.5, 7, 5)
    n = field(g, lambda x, y: np.exp(x) * np.cos(3 * y) + 1e-300)
    path = tmp_path / "f.csv"
    write_field_csv(path, n)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 35
    # x-major: the second row varies y first
    assert lines[1].split(",")[0] == lines[2].split(",")[0]
    back = read_field_csv(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, n.values)
