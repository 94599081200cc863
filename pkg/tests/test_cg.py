import numpy as np
import pytest
from scipy import sparse

from stodesign.cg import SparseSpdMatrix, cg_solve
from stodesign.fem import DensityField, GridSpec, assemble_load, assemble_stiffness


def _identity(n):
    return SparseSpdMatrix(sparse.identity(n, format="csr"))


def test_identity_one_iteration():
    rng = np.random.default_rng(0)
    b = rng.standard_normal(12)
    x, report = cg_solve(_identity(12), b)
    assert report.converged
    assert report.iterations == 1
    assert np.allclose(x, b, rtol=0, atol=1e-14)


def test_diagonal_solve():
    n = 50
    K = SparseSpdMatrix(sparse.diags(np.arange(1.0, n + 1.0), format="csr"))
    x, report = cg_solve(K, np.ones(n))
    assert report.converged
    assert np.allclose(x, 1.0 / np.arange(1.0, n + 1.0), rtol=1e-10, atol=0)


def test_zero_rhs_short_circuits():
    x, report = cg_solve(_identity(8), np.zeros(8))
    assert report.converged
    assert report.iterations == 0
    assert np.all(x == 0.0)


def test_laplacian_matches_dense_oracle():
    g = GridSpec(16, 16)
    K = assemble_stiffness(DensityField.constant(g, 1.0))
    b = assemble_load(g, np.ones(g.n_cells))
    x, report = cg_solve(K, b, tol=1e-12)
    assert report.converged
    x_dense = np.linalg.solve(K.toarray(), b)
    assert np.max(np.abs(x - x_dense)) < 1e-8


def test_nonconvergence_reported_not_raised():
    g = GridSpec(16, 16)
    K = assemble_stiffness(DensityField.constant(g, 1.0))
    b = assemble_load(g, np.ones(g.n_cells))
    x, report = cg_solve(K, b, max_iter=2)
    assert not report.converged
    assert report.iterations == 2
    assert report.relative_residual > 0.0


def test_preconditioned_residual_monotone():
    g = GridSpec(16, 16)
    rng = np.random.default_rng(5)
    a = DensityField(g, rng.uniform(1.0, 2.0, g.n_cells))
    K = assemble_stiffness(a)
    b = assemble_load(g, np.ones(g.n_cells))
    _, report = cg_solve(K, b, collect_residuals=True)
    norms = np.array(report.preconditioned_norms)
    assert np.all(np.diff(norms) <= 1e-14)


def test_coefficient_scaling_inverse():
    # K(c*a) x = b has solution (1/c) * solution of K(a) x = b
    g = GridSpec(12, 12)
    b = assemble_load(g, np.ones(g.n_cells))
    K1 = assemble_stiffness(DensityField.constant(g, 1.0))
    K4 = assemble_stiffness(DensityField.constant(g, 4.0))
    x1, _ = cg_solve(K1, b, tol=1e-12)
    x4, _ = cg_solve(K4, b, tol=1e-12)
    assert np.max(np.abs(x4 - x1 / 4.0)) < 1e-10


def test_warm_start_deterministic_and_correct():
    g = GridSpec(12, 12)
    K = assemble_stiffness(DensityField.constant(g, 1.3))
    b = assemble_load(g, np.ones(g.n_cells))
    x_cold, _ = cg_solve(K, b, tol=1e-12)
    x_warm, rep = cg_solve(K, b, tol=1e-12, x0=x_cold * 0.99)
    assert rep.converged
    assert np.max(np.abs(x_warm - x_cold)) < 1e-9
    x_again, _ = cg_solve(K, b, tol=1e-12, x0=x_cold * 0.99)
    assert np.array_equal(x_warm, x_again)


def test_rejects_asymmetric_matrix():
    m = sparse.csr_matrix(np.array([[2.0, 1.0], [0.5, 2.0]]))
    with pytest.raises(ValueError):
        SparseSpdMatrix(m)


def test_rejects_bad_tol_and_shape():
    K = _identity(4)
    with pytest.raises(ValueError):
        cg_solve(K, np.ones(4), tol=0.0)
    with pytest.raises(ValueError):
        cg_solve(K, np.ones(5))
