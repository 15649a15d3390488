import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from crossdiff.errors import GridError, NonFiniteField
from crossdiff.grid_ops import build_grid, cross_diffusion, integrate_field, l1_norm, l2_norm, laplacian


def cosine_error(cells: int) -> float:
    g = build_grid(1, [cells], [1.0])
    x = g.centers(0)
    approx = laplacian(np.cos(np.pi * x), g)
    return float(np.max(np.abs(approx + np.pi ** 2 * np.cos(np.pi * x))))


class TestBuildGrid:
    def test_cell_centres(self):
        """A 4-cell unit grid has centres at odd multiples of 1/8"""
        g = build_grid(1, [4], [1.0])
        assert_array_equal(g.centers(0), [0.125, 0.375, 0.625, 0.875])
        assert g.spacing == (0.25,)
        assert g.cell_volume == 0.25

    def test_two_dimensional_shape(self):
        """Axis 0 is x, axis 1 is y"""
        g = build_grid(2, [4, 3], [2.0, 1.5])
        x, y = g.mesh()
        assert x.shape == (4, 3)
        assert_allclose(x[:, 0], [0.25, 0.75, 1.25, 1.75])
        assert_allclose(y[0, :], [0.25, 0.75, 1.25])
        assert g.volume == pytest.approx(3.0)

    @pytest.mark.parametrize("dim, cells, lengths", [
        (3, [4, 4, 4], [1.0, 1.0, 1.0]),
        (1, [2], [1.0]),
        (1, [8], [0.0]),
        (2, [8], [1.0]),
        (1, [8], [float("inf")]),
    ])
    def test_rejects_bad_grids(self, dim, cells, lengths):
        """Dimension, cell counts and lengths are validated"""
        with pytest.raises(GridError):
            build_grid(dim, cells, lengths)


class TestLaplacian:
    def test_constant_field_is_harmonic(self):
        """Mirror ghosts make constants exactly harmonic"""
        g = build_grid(2, [5, 7], [1.0, 2.0])
        assert_array_equal(laplacian(g.constant(3.5), g), np.zeros(g.shape))

    def test_discrete_mass_is_conserved(self):
        """Zero normal flux: the Laplacian integrates to zero"""
        rng = np.random.default_rng(7)
        g = build_grid(2, [16, 12], [1.0, 0.5])
        u = rng.uniform(0.0, 1.0, g.shape)
        assert abs(integrate_field(laplacian(u, g), g)) < 1e-9

    def test_known_one_dimensional_stencil(self):
        """[1, 2, 4] on unit spacing gives [1, 1, -2]"""
        g = build_grid(1, [3], [3.0])
        assert_allclose(laplacian(np.array([1.0, 2.0, 4.0]), g), [1.0, 1.0, -2.0])

    def test_second_order_on_cosine(self):
        """Error on cos(pi x) drops by four per halving of h"""
        errors = [cosine_error(n) for n in (32, 64, 128)]
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(np.abs(orders - 2.0) < 0.1)

    def test_two_dimensional_cosine(self):
        """Separable mode is an eigenfunction up to O(h^2)"""
        g = build_grid(2, [64, 64], [1.0, 1.0])
        x, y = g.mesh()
        u = np.cos(np.pi * x) * np.cos(2 * np.pi * y)
        exact = -5.0 * np.pi ** 2 * u
        assert np.max(np.abs(laplacian(u, g) - exact)) < 0.1

    def test_rejects_non_finite(self):
        """NaN in a field is refused"""
        g = build_grid(1, [4], [1.0])
        with pytest.raises(NonFiniteField):
            laplacian(np.array([1.0, np.nan, 1.0, 1.0]), g)

    def test_rejects_wrong_shape(self):
        """Field must match the grid"""
        g = build_grid(1, [4], [1.0])
        with pytest.raises(GridError):
            laplacian(np.ones(5), g)


class TestCrossDiffusion:
    def test_constant_coefficient_reduces_to_laplacian(self):
        """Delta(g u) with constant g is g Delta(u)"""
        g = build_grid(1, [16], [1.0])
        u = np.cos(np.pi * g.centers(0)) + 2.0
        assert_allclose(cross_diffusion(g.constant(0.3), u, g), 0.3 * laplacian(u, g), rtol=1e-12, atol=1e-12)

    def test_linear_profiles(self):
        """Delta((a x + 1)^2) = 2 a^2 away from the walls"""
        g = build_grid(1, [16], [1.0])
        slope = 3.0
        u = slope * g.centers(0) + 1.0
        assert_allclose(cross_diffusion(u, u, g)[1:-1], 2.0 * slope ** 2, rtol=1e-9)


class TestNorms:
    def test_integrals_of_constants(self):
        """Midpoint sums times cell volume"""
        g = build_grid(2, [4, 4], [2.0, 1.0])
        f = g.constant(-1.5)
        assert integrate_field(f, g) == pytest.approx(-3.0)
        assert l1_norm(f, g) == pytest.approx(3.0)
        assert l2_norm(f, g) == pytest.approx(1.5 * np.sqrt(2.0))
