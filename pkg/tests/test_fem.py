import numpy as np
import pytest

from stodesign.fem import (
    CellVectorField,
    DensityField,
    GridSpec,
    NodalField,
    assemble_load,
    assemble_stiffness,
    cell_centers,
    cell_gradients,
    cell_grad_dot,
    integrate_cells,
    l2_error,
    sample_cells,
    sample_nodes,
    stiffness_energy,
)


def test_grid_counts():
    g = GridSpec(4, 3)
    assert g.n_cells == 12
    assert g.n_nodes == 20
    assert g.n_interior == 6
    assert g.hx == 0.25
    assert g.hy == pytest.approx(1.0 / 3.0)


def test_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        GridSpec(1, 4)
    with pytest.raises(ValueError):
        GridSpec(4, 4, x0=1.0, x1=0.5)


def test_stiffness_single_interior_node():
    # 2x2 unit-coefficient grid: one interior node, hand-assembled value 8/3
    g = GridSpec(2, 2)
    K = assemble_stiffness(DensityField.constant(g, 1.0))
    assert K.n == 1
    assert K.toarray()[0, 0] == pytest.approx(8.0 / 3.0, abs=1e-14)


def test_stiffness_constant_scaling():
    g = GridSpec(5, 4)
    K1 = assemble_stiffness(DensityField.constant(g, 1.0)).toarray()
    Kc = assemble_stiffness(DensityField.constant(g, 3.5)).toarray()
    assert np.allclose(Kc, 3.5 * K1, rtol=0, atol=1e-14)


def test_stiffness_checkerboard_mean():
    g = GridSpec(2, 2)
    a = DensityField(g, np.array([1.0, 2.0, 1.0, 2.0]))
    K = assemble_stiffness(a)
    # per-element additivity: diagonal is (2/3) * sum of the four coefficients
    assert K.toarray()[0, 0] == pytest.approx(4.0, abs=1e-14)


def test_stiffness_rejects_nonpositive():
    g = GridSpec(3, 3)
    a = DensityField.constant(g, 1.0)
    a.values[4] = 0.0
    with pytest.raises(ValueError):
        assemble_stiffness(a)


def test_stiffness_exact_symmetry():
    g = GridSpec(9, 7)
    rng = np.random.default_rng(11)
    a = DensityField(g, rng.uniform(0.5, 3.0, g.n_cells))
    K = assemble_stiffness(a).toarray()
    assert np.max(np.abs(K - K.T)) == 0.0


def test_stiffness_positive_definite():
    g = GridSpec(6, 5)
    rng = np.random.default_rng(7)
    a = DensityField(g, rng.uniform(0.2, 4.0, g.n_cells))
    K = assemble_stiffness(a)
    for _ in range(100):
        x = rng.standard_normal(K.n)
        assert x @ (K @ x) > 0.0


def test_stiffness_linear_in_coefficient():
    g = GridSpec(5, 6)
    rng = np.random.default_rng(13)
    a1 = DensityField(g, rng.uniform(0.5, 2.0, g.n_cells))
    a2 = DensityField(g, rng.uniform(0.5, 2.0, g.n_cells))
    a12 = DensityField(g, a1.values + a2.values)
    K = assemble_stiffness(a12).toarray()
    K_sum = assemble_stiffness(a1).toarray() + assemble_stiffness(a2).toarray()
    assert np.max(np.abs(K - K_sum)) < 1e-13


def test_load_zero():
    g = GridSpec(4, 4)
    assert np.all(assemble_load(g, np.zeros(g.n_cells)) == 0.0)


def test_load_unit_interior_entry():
    # partition of unity: an interior node surrounded by four cells gets hx*hy
    g = GridSpec(8, 8)
    b = assemble_load(g, np.ones(g.n_cells))
    assert np.allclose(b, g.hx * g.hy, rtol=0, atol=1e-16)


def test_load_indicator_support():
    g = GridSpec(8, 8)
    c = cell_centers(g)
    chi = (
        (c[:, 0] >= 0.25) & (c[:, 0] <= 0.75) & (c[:, 1] >= 0.25) & (c[:, 1] <= 0.75)
    ).astype(float)
    b = assemble_load(g, chi)
    from stodesign.fem import interior_node_ids

    full = np.zeros(g.n_nodes)
    full[interior_node_ids(g)] = b
    b_grid = full.reshape(g.ny + 1, g.nx + 1)
    # support is exactly the nodes touching the 4x4 center block of cells
    nz = np.argwhere(b_grid != 0.0)
    assert nz[:, 0].min() == 2 and nz[:, 0].max() == 6
    assert nz[:, 1].min() == 2 and nz[:, 1].max() == 6


def test_gradients_exact_for_linear():
    g = GridSpec(7, 5, x0=-1.0, y0=0.5, x1=2.0, y1=3.5)
    u = sample_nodes(g, lambda x, y: x)
    grads = cell_gradients(u).values
    assert np.allclose(grads[:, 0], 1.0, rtol=0, atol=1e-14)
    assert np.allclose(grads[:, 1], 0.0, rtol=0, atol=1e-14)


def test_gradients_constant_field():
    g = GridSpec(4, 4)
    u = NodalField(g, np.full(g.n_nodes, 2.5))
    assert np.all(cell_gradients(u).values == 0.0)


def test_gradients_bilinear_exact_at_centers():
    g = GridSpec(6, 9)
    u = sample_nodes(g, lambda x, y: x * y)
    grads = cell_gradients(u).values
    c = cell_centers(g)
    assert np.allclose(grads[:, 0], c[:, 1], rtol=0, atol=1e-14)
    assert np.allclose(grads[:, 1], c[:, 0], rtol=0, atol=1e-14)


def test_integrate_area_and_mass():
    g = GridSpec(16, 16)
    assert integrate_cells(g, np.ones(g.n_cells)) == pytest.approx(1.0, abs=1e-15)
    assert integrate_cells(g, np.full(g.n_cells, 1.5)) == pytest.approx(1.5, abs=1e-15)


def test_integrate_indicator_region():
    g = GridSpec(8, 8)
    c = cell_centers(g)
    chi = (
        (c[:, 0] >= 0.25) & (c[:, 0] <= 0.75) & (c[:, 1] >= 0.25) & (c[:, 1] <= 0.75)
    ).astype(float)
    assert integrate_cells(g, chi) == pytest.approx(0.25, abs=1e-15)


def test_cell_grad_dot_matches_stiffness_quadratic_form():
    # sum_c a_c * area * cell_grad_dot(u, u)_c must equal u^T K u
    g = GridSpec(6, 7)
    rng = np.random.default_rng(21)
    a = DensityField(g, rng.uniform(0.5, 2.5, g.n_cells))
    u = NodalField.from_interior(g, rng.standard_normal(g.n_interior))
    K = assemble_stiffness(a)
    direct = u.interior() @ (K @ u.interior())
    assert stiffness_energy(a, u) == pytest.approx(direct, rel=1e-13)


def test_field_size_validation():
    g = GridSpec(3, 3)
    with pytest.raises(ValueError):
        DensityField(g, np.ones(5))
    with pytest.raises(ValueError):
        NodalField(g, np.ones(g.n_cells))
    with pytest.raises(ValueError):
        CellVectorField(g, np.ones((g.n_cells, 3)))


def _manufactured_l2(n: int) -> float:
    from stodesign.scenarios import make_deterministic
    from stodesign.solve import solve_state

    g = GridSpec(n, n)
    f = sample_cells(g, lambda x, y: 2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y))
    sols = solve_state(DensityField.constant(g, 1.0), make_deterministic(g, f))
    return l2_error(sols[0].u, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))


def test_manufactured_solution_second_order():
    ratio = _manufactured_l2(16) / _manufactured_l2(32)
    assert 3.6 <= ratio <= 4.4
