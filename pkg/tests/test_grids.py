"""Grid and stencil layer: frozen stencil weights, exact eigenvalues,
convergence orders, and the formal adjoint."""

import numpy as np
import pytest

from delsarte import (DiffOp, DiscretizationError, Grid1D, GridError,
                      OperatorMatrix, ProductGrid, adjoint_defect, commutator,
                      compose, derivative_matrix, discretize, formal_adjoint,
                      inner, load_diffop, save_diffop)
from delsarte.grid_ops import fd_weights, stencil_half_width


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def test_dirichlet_grid_geometry():
    g = Grid1D.dirichlet(0.0, 1.0, 9)
    assert g.h == pytest.approx(0.1)
    # interior nodes only; endpoints are eliminated
    np.testing.assert_allclose(g.x, 0.1 * np.arange(1, 10))


def test_periodic_grid_geometry():
    g = Grid1D.periodic(0.0, 2.0, 8)
    assert g.h == pytest.approx(0.25)
    assert g.x[0] == 0.0 and g.x[-1] == pytest.approx(2.0 - 0.25)


def test_grid_rejects_bad_input():
    with pytest.raises(GridError):
        Grid1D.dirichlet(0.0, 1.0, 3)     # too few unknowns
    with pytest.raises(GridError):
        Grid1D.periodic(1.0, 1.0, 8)      # empty interval
    with pytest.raises(GridError):
        Grid1D(0.0, 1.0, 8, "neumann")


def test_product_grid_bookkeeping():
    pg = ProductGrid((Grid1D.periodic(0, 1, 6), Grid1D.dirichlet(0, 1, 5)), 2)
    assert pg.shape == (6, 5)
    assert pg.total_dim == 60
    assert pg.vol == pytest.approx((1 / 6) * (1 / 6))
    v = np.arange(60.0)
    np.testing.assert_array_equal(pg.flatten_field(pg.unflatten_field(v)), v)


# ---------------------------------------------------------------------------
# stencil weights (frozen Fornberg values)
# ---------------------------------------------------------------------------

def test_centered_first_derivative_weights():
    w = fd_weights(np.array([-1.0, 0.0, 1.0]), 0.0, 1)
    np.testing.assert_allclose(w, [-0.5, 0.0, 0.5], atol=1e-15)


def test_centered_second_derivative_weights_order4():
    w = fd_weights(np.arange(-2.0, 3.0), 0.0, 2)
    np.testing.assert_allclose(
        w, [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12], atol=1e-14)


def test_one_sided_first_derivative_weights():
    # forward 3-point: [-3/2, 2, -1/2]
    w = fd_weights(np.array([0.0, 1.0, 2.0]), 0.0, 1)
    np.testing.assert_allclose(w, [-1.5, 2.0, -0.5], atol=1e-15)


def test_stencil_half_width():
    assert stencil_half_width(1, 2) == 1
    assert stencil_half_width(2, 2) == 1
    assert stencil_half_width(2, 4) == 2
    assert stencil_half_width(4, 2) == 2


# ---------------------------------------------------------------------------
# derivative matrices
# ---------------------------------------------------------------------------

def test_dirichlet_laplacian_eigenvalues_exact():
    """-D2 on the Dirichlet grid has the classical closed-form spectrum."""
    n = 12
    g = Grid1D.dirichlet(0.0, 1.0, n)
    A = -derivative_matrix(g, 2)
    w = np.sort(np.linalg.eigvalsh(A))
    k = np.arange(1, n + 1)
    exact = (2.0 - 2.0 * np.cos(k * np.pi / (n + 1))) / g.h ** 2
    np.testing.assert_allclose(w, np.sort(exact), rtol=1e-13)


def test_periodic_first_derivative_is_circulant():
    g = Grid1D.periodic(0.0, 1.0, 7)
    D = derivative_matrix(g, 1)
    for k in range(1, 7):
        np.testing.assert_array_equal(D, np.roll(np.roll(D, k, 0), k, 1))
    np.testing.assert_allclose(D @ np.ones(7), 0.0, atol=1e-13)


def test_derivative_convergence_orders():
    for p in (2, 4):
        errs = []
        for n in (32, 64, 128):
            g = Grid1D.periodic(0.0, 2 * np.pi, n)
            D = derivative_matrix(g, 1, scheme_order=p)
            errs.append(np.abs(D @ np.sin(g.x) - np.cos(g.x)).max())
        slope = np.polyfit(np.log([32, 64, 128]), np.log(errs), 1)[0]
        assert -slope > p - 0.2, f"order-{p} stencil converged at {-slope:.2f}"


def test_one_sided_edges_exact_on_polynomials():
    g = Grid1D.dirichlet(0.0, 1.0, 10)
    D = derivative_matrix(g, 1, one_sided_edges=True)
    f = g.x ** 2
    np.testing.assert_allclose(D @ f, 2 * g.x, atol=1e-12)


def test_small_grid_rejected():
    # d^4 at order 4 needs a 7-point window; 5 nodes cannot host it
    g = Grid1D.periodic(0.0, 1.0, 5)
    with pytest.raises(DiscretizationError):
        derivative_matrix(g, 4, scheme_order=4)


# ---------------------------------------------------------------------------
# DiffOp assembly and the formal adjoint
# ---------------------------------------------------------------------------

def _line(n=40, kind="periodic", length=2 * np.pi):
    g = (Grid1D.periodic if kind == "periodic" else Grid1D.dirichlet)(0.0, length, n)
    return ProductGrid.line(g)


def test_discretize_constant_coefficient():
    pg = _line()
    op = DiffOp(pg, {(2,): -1.0})
    A = discretize(op)
    D2 = derivative_matrix(pg.axes[0], 2)
    np.testing.assert_allclose(A.A, -D2, atol=1e-15)


def test_first_derivative_formal_adjoint_is_negative():
    pg = _line()
    op = DiffOp(pg, {(1,): 1.0})
    A = discretize(op).A
    B = discretize(formal_adjoint(op)).A
    np.testing.assert_allclose(B, -A, atol=1e-14)


def test_adjoint_matches_leibniz_expansion():
    # (a d/dx)* = -a d/dx - a'
    pg = _line(64)
    x = pg.axes[0].x
    a = np.exp(np.sin(x))
    op = DiffOp(pg, {(1,): a.astype(complex)})
    adj = formal_adjoint(op)
    np.testing.assert_allclose(adj.terms[(1,)][..., 0, 0], -a, atol=1e-13)
    # zeroth coefficient is -a' up to the O(h^2) error of the coefficient rule
    aprime = np.cos(x) * a
    np.testing.assert_allclose(adj.terms[(0,)][..., 0, 0], -aprime, atol=1e-2)


def test_adjoint_involution_exact_for_polynomial_coeffs():
    # stencil derivatives of quadratics are exact, so ** is an involution here
    pg = _line(20, "dirichlet", 1.0)
    x = pg.axes[0].x
    op = DiffOp(pg, {(2,): (x ** 2 + 1.0).astype(complex), (0,): x.astype(complex)})
    back = formal_adjoint(formal_adjoint(op))
    for alpha in op.terms:
        np.testing.assert_allclose(back.terms[alpha], op.terms[alpha], atol=1e-10)


def test_self_adjoint_operator_has_zero_defect():
    pg = _line(50)
    x = pg.axes[0].x
    op = DiffOp(pg, {(2,): -1.0, (0,): np.cos(x).astype(complex)})
    assert adjoint_defect(op) < 1e-14


def test_adjoint_defect_converges_for_variable_leading_coeff():
    errs = []
    for n in (50, 100, 200):
        pg = _line(n)
        x = pg.axes[0].x
        op = DiffOp(pg, {(2,): np.exp(np.sin(x)).astype(complex)})
        errs.append(adjoint_defect(op))
    slope = np.polyfit(np.log([50, 100, 200]), np.log(errs), 1)[0]
    assert -slope > 1.8


def test_matrix_coefficient_discretization():
    pg = ProductGrid.line(Grid1D.periodic(0.0, 1.0, 8), fiber_dim=2)
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    op = DiffOp(pg, {(0,): C})
    A = discretize(op).A
    v = np.zeros(16)
    v[0] = 1.0  # first node, first fiber component
    out = A @ v
    assert out[1] == pytest.approx(1.0)
    assert out[0] == pytest.approx(0.0)


def test_bandwidth_metadata_and_composition():
    pg = _line(32)
    op = DiffOp(pg, {(2,): -1.0})
    A = discretize(op)
    assert A.axis_bandwidths == (1,)
    assert A.flat_bandwidth() == 1
    AA = compose(A, A)
    assert AA.axis_bandwidths == (2,)
    # off-band entries really vanish
    off = AA.A - np.triu(np.tril(AA.A, 2), -2)
    # wrap-around rows carry the periodic stencil; mask them out
    off[:2] = off[-2:] = 0.0
    assert np.abs(off).max() < 1e-14


def test_banded_round_trip():
    pg = _line(16)
    op = DiffOp(pg, {(2,): -1.0, (0,): 1.0})
    A = discretize(op)
    g = Grid1D.dirichlet(0.0, 1.0, 16)
    B = OperatorMatrix(-derivative_matrix(g, 2), ProductGrid.line(g), (1,), "dirichlet")
    ab = B.to_banded()
    np.testing.assert_array_equal(OperatorMatrix.from_banded(ab), B.A)
    del A


def test_commutator_with_position_is_neighbor_averaging():
    """[D1, x] under the centered stencil averages the two neighbors.

    Continuum heuristics would say identity; the discrete bracket is the
    exact neighbor mean, which the assertions freeze.
    """
    n = 30
    g = Grid1D.dirichlet(0.0, 1.0, n)
    pg = ProductGrid.line(g)
    D = discretize(DiffOp(pg, {(1,): 1.0}))
    X = discretize(DiffOp(pg, {(0,): g.x.astype(complex)}))
    C = commutator(D, X).A
    S = np.zeros((n, n))
    idx = np.arange(n - 1)
    S[idx, idx + 1] = 0.5
    S[idx + 1, idx] = 0.5
    np.testing.assert_allclose(C, S, atol=1e-13)


def test_inner_product_weights():
    g = Grid1D.periodic(0.0, 2 * np.pi, 64)
    pg = ProductGrid.line(g)
    f = np.sin(g.x)
    # ||sin||^2 over one period = pi
    assert inner(pg, f, f).real == pytest.approx(np.pi, rel=1e-12)


def test_diffop_save_load_round_trip(tmp_path):
    pg = _line(12, "dirichlet", 1.0)
    x = pg.axes[0].x
    op = DiffOp(pg, {(2,): -1.0, (1,): (0.3 + 0.1j) * np.ones_like(x),
                     (0,): np.cos(x).astype(complex)})
    manifest = save_diffop(op, tmp_path, "op")
    back = load_diffop(manifest)
    assert back.grid == op.grid
    assert set(back.terms) == set(op.terms)
    for alpha in op.terms:
        np.testing.assert_array_equal(back.terms[alpha], op.terms[alpha])


def test_diffop_rejects_nonsense():
    pg = _line(12)
    with pytest.raises(DiscretizationError):
        DiffOp(pg, {(1, 1): 1.0})          # wrong arity
    with pytest.raises(DiscretizationError):
        DiffOp(pg, {(1,): np.array([np.inf])})
