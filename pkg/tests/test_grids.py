import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcflab.grids import (Field, Grid1D, Grid2D, GridError, INTERVAL, RADIAL,
                          SLAB2D, d1, d2, hessian, linterp, restrict, sample,
                          slab_grid)


def measured_order(errors):
    e1, e2 = errors
    return np.log2(e1 / e2)


class TestGrid1D:
    def test_node_reconstruction_exact(self):
        g = Grid1D(-1.3, 1.3, 64)
        x = g.nodes()
        for i in (0, 1, 17, 64):
            assert x[i] == g.node(i)
        assert g.node(0) == -1.3
        assert len(x) == g.n_nodes == 65

    def test_invalid_grids_rejected(self):
        with pytest.raises(GridError):
            Grid1D(1.0, 0.0, 16)
        with pytest.raises(GridError):
            Grid1D(0.0, 1.0, 7)
        with pytest.raises(GridError):
            Grid1D(0.0, np.inf, 16)
        with pytest.raises(GridError):
            Grid1D(0.0, 1.0, 16).node(17)

    def test_slab_grid_margins(self):
        g = slab_grid(L=2.0, b=1.8, delta=0.2, h=0.1)
        assert g.x2.lo == -1.6 and g.x2.hi == 1.6
        with pytest.raises(GridError):
            slab_grid(L=2.0, b=1.8, delta=0.0, h=0.1)
        with pytest.raises(GridError):
            slab_grid(L=2.0, b=0.1, delta=0.2, h=0.01)


class TestField:
    def test_shape_and_finite_validation(self):
        g = Grid1D(0.0, 1.0, 16)
        with pytest.raises(GridError):
            Field(g, np.zeros(5))
        with pytest.raises(GridError):
            Field(g, np.full(17, np.nan))
        with pytest.raises(GridError):
            Field(g, np.full(17, np.inf))

    def test_radial_requires_origin(self):
        with pytest.raises(GridError):
            Field(Grid1D(0.5, 2.0, 16), np.zeros(17), RADIAL)
        f = Field(Grid1D(0.0, 2.0, 16), np.zeros(17), RADIAL, n=2)
        assert f.n == 2

    def test_values_read_only(self):
        f = sample(Grid1D(0.0, 1.0, 16), lambda x: x)
        with pytest.raises(ValueError):
            f.values[0] = 1.0


class TestDerivatives:
    def test_affine_exact_every_geometry(self):
        g = Grid1D(-1.0, 2.0, 32)
        f = sample(g, lambda x: 3.0 * x + 2.0)
        assert np.allclose(d1(f).values, 3.0, atol=1e-13)
        assert np.allclose(d2(f).values, 0.0, atol=1e-11)

        fr = sample(Grid1D(0.0, 2.0, 32), lambda r: 3.0 * r + 2.0,
                    geometry=RADIAL, n=2)
        assert np.allclose(d1(fr).values, 3.0, atol=1e-13)

        g2 = Grid2D(Grid1D(-1.0, 1.0, 16), Grid1D(-1.0, 1.0, 16))
        f2 = sample(g2, lambda x, y: 2.0 * x - y + 0.5)
        assert np.allclose(d1(f2, 0).values, 2.0, atol=1e-13)
        assert np.allclose(d1(f2, 1).values, -1.0, atol=1e-13)

    def test_quadratic_exactness(self):
        g = Grid1D(0.0, 1.0, 10)  # h = 0.1
        f = sample(g, lambda x: x ** 2)
        i = 5  # node x = 0.5
        assert d1(f).values[i] == pytest.approx(1.0, abs=1e-13)
        assert np.allclose(d2(f).values, 2.0, atol=1e-10)

    def test_mixed_derivative_of_product(self):
        g2 = Grid2D(Grid1D(-1.0, 1.0, 16), Grid1D(-0.5, 1.5, 16))
        f2 = sample(g2, lambda x, y: x * y)
        d11, d12, d22 = hessian(f2)
        assert np.allclose(d12.values, 1.0, atol=1e-12)
        assert np.allclose(d11.values, 0.0, atol=1e-12)
        assert np.allclose(d22.values, 0.0, atol=1e-12)

    @pytest.mark.parametrize("op,exact", [
        (d1, np.cos), (d2, lambda x: -np.sin(x))])
    def test_second_order_convergence_on_sin(self, op, exact):
        errs = []
        for n in (64, 128):
            g = Grid1D(-1.0, 1.0, n)
            f = sample(g, np.sin)
            errs.append(np.max(np.abs(op(f).values - exact(g.nodes()))))
        assert 1.9 <= measured_order(errs) <= 2.1

    def test_axis_out_of_range(self):
        f = sample(Grid1D(0.0, 1.0, 16), lambda x: x)
        with pytest.raises(GridError):
            d1(f, 1)
        f2 = sample(Grid2D(Grid1D(0, 1, 8), Grid1D(0, 1, 8)), lambda x, y: x)
        with pytest.raises(GridError):
            d2(f2, 2)


class TestRestrictLinterp:
    def test_restrict_exact_at_shared_nodes(self):
        f = sample(Grid1D(0.0, 1.0, 32), lambda x: np.sin(3 * x))
        c = restrict(f)
        assert np.array_equal(c.values, f.values[::2])
        with pytest.raises(GridError):
            restrict(sample(Grid1D(0.0, 1.0, 9), lambda x: x))

    def test_linterp_node_exact(self):
        g = Grid1D(-1.0, 1.0, 16)
        f = sample(g, lambda x: np.cos(x))
        for i in (0, 3, 16):
            assert linterp(f, g.node(i)) == f.values[i]

    def test_linterp_midpoint_of_square(self):
        # f(x) = x^2 on h = 0.2: value at 0.1 is the mean of 0 and 0.04
        g = Grid1D(-0.2, 1.8, 10)  # h = 0.2 with a node at 0.0
        f = sample(g, lambda x: x ** 2)
        assert linterp(f, 0.1) == pytest.approx(0.02, abs=1e-15)

    def test_restrict_then_linterp_reproduces_affine(self):
        g = Grid1D(0.0, 1.0, 32)
        f = sample(g, lambda x: 2.5 * x - 1.0)
        c = restrict(f)
        for x in np.linspace(0.0, 1.0, 23):
            assert linterp(c, x) == pytest.approx(2.5 * x - 1.0, abs=1e-12)

    def test_out_of_bounds_query(self):
        f = sample(Grid1D(0.0, 1.0, 16), lambda x: x)
        with pytest.raises(GridError):
            linterp(f, 1.5)

    def test_bilinear_node_exact_2d(self):
        g2 = Grid2D(Grid1D(0, 1, 8), Grid1D(0, 2, 8))
        f2 = sample(g2, lambda x, y: np.sin(x) * np.cos(y))
        assert linterp(f2, (g2.x1.node(3), g2.x2.node(5))) == pytest.approx(
            f2.values[3, 5], abs=0)

    @given(st.floats(min_value=0.0, max_value=1.0),
           st.integers(min_value=8, max_value=40))
    @settings(max_examples=30, deadline=None)
    def test_linterp_bounded_by_bracketing_nodes(self, x, n):
        g = Grid1D(0.0, 1.0, n)
        f = sample(g, lambda xs: np.sin(5 * xs))
        v = linterp(f, x)
        assert np.min(f.values) - 1e-12 <= v <= np.max(f.values) + 1e-12

    @given(st.floats(min_value=-3, max_value=3),
           st.floats(min_value=-3, max_value=3),
           st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=30, deadline=None)
    def test_restrict_linterp_identity_on_coarse_nodes(self, a, b, x):
        f = sample(Grid1D(0.0, 1.0, 32), lambda xs: a * xs + b)
        c = restrict(f)
        for i in range(0, c.grid.n_nodes):
            assert linterp(f, c.grid.node(i)) == pytest.approx(
                c.values[i], abs=1e-12)
