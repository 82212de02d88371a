import numpy as np
import pytest

from src.errors import DimensionMismatchError, MeshError
from src.fem.assembly import (
    load_vector,
    local_matrices,
    m_inner,
    m_norm,
    mass_eigen_bounds,
    norm_equivalence_constants,
)
from src.fem.mesh import NodalFunction, build_mesh
from src.ingestion.sources import analytic_source


class TestBuildMesh:
    def test_smallest_grid(self):
        mesh = build_mesh(1.0, 1.0, 0.5)
        assert (mesh.n_nodes, mesh.triangles.shape[0], mesh.n_dofs) == (9, 8, 1)
        np.testing.assert_allclose(mesh.interior_coords, [[0.5, 0.5]])

    def test_unit_square_counts(self):
        mesh = build_mesh(1.0, 1.0, 1.0 / 32)
        assert mesh.n_nodes == 33 ** 2
        assert mesh.n_dofs == 31 ** 2

    def test_rectangle_counts(self):
        mesh = build_mesh(3.0, 1.0, 0.25)
        assert (mesh.nx, mesh.ny) == (12, 4)
        assert mesh.n_nodes == 65 * 2
        assert mesh.n_dofs == 33

    def test_triangles_are_counter_clockwise(self):
        mesh = build_mesh(1.0, 1.0, 0.125)
        np.testing.assert_allclose(mesh.signed_areas(), 0.5 * 0.125 ** 2)

    def test_diagonal_goes_lower_left_to_upper_right(self):
        mesh = build_mesh(1.0, 1.0, 0.5)
        first = mesh.node_coords[mesh.triangles[0]]
        np.testing.assert_allclose(first, [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5]])

    def test_interior_map(self):
        mesh = build_mesh(1.0, 1.0, 0.25)
        assert np.count_nonzero(mesh.interior_map >= 0) == mesh.n_dofs
        np.testing.assert_array_equal(mesh.interior_map[mesh.interior_nodes], np.arange(mesh.n_dofs))

    @pytest.mark.parametrize("lx, ly, h", [(1.0, 1.0, 0.3), (1.0, 1.0, 0.0), (-1.0, 1.0, 0.5), (1.0, 0.5, 0.4)])
    def test_invalid_mesh(self, lx, ly, h):
        with pytest.raises(MeshError):
            build_mesh(lx, ly, h)

    def test_grid_field_puts_top_row_first(self):
        mesh = build_mesh(1.0, 1.0, 0.25)
        values = mesh.interior_coords[:, 1]
        grid = mesh.grid_field(values)
        assert grid.shape == (5, 5)
        np.testing.assert_allclose(grid[1, 1:-1], 0.75)
        np.testing.assert_allclose(grid[3, 1:-1], 0.25)
        np.testing.assert_array_equal(grid[0], 0.0)

    def test_nodal_function_length_checked(self):
        with pytest.raises(DimensionMismatchError):
            NodalFunction(values=np.zeros(3), mesh=build_mesh(1.0, 1.0, 0.5))


class TestLocalMatrices:
    def test_mass_of_right_triangle(self):
        h = 0.25
        mass, _ = local_matrices([0.0, 0.0], [h, 0.0], [h, h])
        expected = h ** 2 / 24 * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
        np.testing.assert_allclose(mass[0], expected, rtol=1e-15)

    def test_stiffness_of_unit_right_triangle(self):
        _, stiffness = local_matrices([0.0, 0.0], [1.0, 0.0], [0.0, 1.0])
        expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        np.testing.assert_allclose(stiffness[0], expected, atol=1e-15)

    def test_stiffness_rows_sum_to_zero(self, rng):
        points = rng.uniform(size=(3, 2))
        e1, e2 = points[1] - points[0], points[2] - points[0]
        if e1[0] * e2[1] - e1[1] * e2[0] < 0:
            points = points[[0, 2, 1]]
        _, stiffness = local_matrices(*points)
        np.testing.assert_allclose(stiffness[0].sum(axis=1), 0.0, atol=1e-12)

    def test_clockwise_triangle_rejected(self):
        with pytest.raises(MeshError):
            local_matrices([0.0, 0.0], [0.0, 1.0], [1.0, 0.0])


class TestAssemble:
    def test_single_dof(self, make_system):
        sys = make_system(2)
        assert sys.n == 1
        assert sys.stiffness.value(0, 0) == pytest.approx(4.0, abs=1e-14)
        # шесть треугольников площади h²/2 вокруг узла, по 2·area/12 от каждого
        assert sys.mass.value(0, 0) == pytest.approx(0.5 ** 2 / 2, abs=1e-15)

    def test_matrices_exactly_symmetric(self, sys32):
        assert sys32.mass.is_structurally_symmetric()
        assert sys32.stiffness.is_structurally_symmetric()

    def test_stiffness_is_five_point_stencil(self, sys8):
        dense = sys8.stiffness.to_dense()
        center = 3 * 7 + 3
        row = dense[center]
        assert row[center] == pytest.approx(4.0)
        for neighbour in (center - 1, center + 1, center - 7, center + 7):
            assert row[neighbour] == pytest.approx(-1.0)
        assert np.count_nonzero(np.abs(row) > 1e-14) == 5

    def test_mass_positive_definite(self, sys8):
        assert np.linalg.eigvalsh(sys8.mass.to_dense()).min() > 0

    @pytest.mark.parametrize("n", [8, 32])
    def test_mass_energy_of_random_vectors(self, make_system, rng, n):
        sys = make_system(n)
        v = rng.standard_normal((sys.n, 1000))
        energies = np.sum(v * (sys.mass.csr @ v), axis=0)
        assert energies.min() > 0


class TestLoadVector:
    def test_zero_source(self, sys8):
        b = load_vector(sys8, NodalFunction(values=np.zeros(sys8.n), mesh=sys8.mesh))
        np.testing.assert_array_equal(b, np.zeros(sys8.n))

    def test_constant_source_row_sum(self, sys8):
        b = load_vector(sys8, NodalFunction(values=np.ones(sys8.n), mesh=sys8.mesh))
        center = 3 * 7 + 3
        assert b[center] == pytest.approx((1.0 / 8) ** 2, rel=1e-14)

    def test_matches_edge_midpoint_quadrature(self, sys8):
        mesh = sys8.mesh
        f = analytic_source("sin_pi_x_sin_pi_y", mesh)
        nodal = mesh.full_field(f.values)
        expected = np.zeros(mesh.n_nodes)
        # правило средних точек рёбер точно для квадратичного φ_i·f_h
        for triangle in mesh.triangles:
            area = 0.5 * mesh.h ** 2
            for local in range(3):
                i = triangle[local]
                for other in triangle:
                    if other != i:
                        expected[i] += area / 3 * 0.5 * 0.5 * (nodal[i] + nodal[other])
        b = load_vector(sys8, f)
        np.testing.assert_allclose(b, expected[mesh.interior_nodes], atol=1e-14)

    def test_other_mesh_rejected(self, sys8):
        other = build_mesh(1.0, 1.0, 0.25)
        with pytest.raises(MeshError):
            load_vector(sys8, NodalFunction(values=np.zeros(other.n_dofs), mesh=other))


class TestMassInnerProduct:
    def test_zero(self, sys8):
        assert m_norm(sys8, np.zeros(sys8.n)) == 0.0

    def test_symmetric(self, sys8, rng):
        for _ in range(5):
            x, y = rng.standard_normal((2, sys8.n))
            assert m_inner(sys8, x, y) == pytest.approx(m_inner(sys8, y, x), rel=1e-13)

    def test_norm_of_sine_mode(self, sys64):
        f = analytic_source("sin_pi_x_sin_pi_y", sys64.mesh)
        assert m_norm(sys64, f.values) ** 2 == pytest.approx(0.25, abs=1e-3)

    def test_shape_mismatch(self, sys8):
        with pytest.raises(DimensionMismatchError):
            m_inner(sys8, np.zeros(sys8.n), np.zeros(3))

    def test_mass_eigen_bounds_match_dense(self, sys8):
        lam_min, lam_max = mass_eigen_bounds(sys8)
        eigenvalues = np.linalg.eigvalsh(sys8.mass.to_dense())
        assert lam_min == pytest.approx(eigenvalues[0], rel=1e-2)
        assert lam_max == pytest.approx(eigenvalues[-1], rel=1e-2)

    def test_norm_equivalence(self, sys8, rng):
        c1, c2 = norm_equivalence_constants(sys8)
        for _ in range(100):
            v = rng.standard_normal(sys8.n)
            ratio = m_norm(sys8, v) / (np.linalg.norm(v) / np.sqrt(v.size))
            assert 0.99 * c1 <= ratio <= 1.01 * c2
