import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from bdvarmin.grid import (
    GridDomain,
    GridError,
    SymTensorField,
    VectorField,
    divergence,
    divergence_array,
    frob_norm,
    full_gradient,
    interior_dofs,
    strain_matrix_z,
    sym_gradient,
    sym_gradient_array,
    sym_inner,
    translate_diff,
)
from conftest import random_field

dims = st.tuples(st.integers(3, 9), st.integers(3, 9), st.floats(0.05, 2.0))
seeds = st.integers(0, 2**32 - 1)


def test_domain_validation():
    with pytest.raises(GridError):
        GridDomain(1, 5, 0.1)
    with pytest.raises(GridError):
        GridDomain(4, 4, 0.0)
    dom = GridDomain.unit_square(5)
    assert dom.h == 0.25 and dom.area == pytest.approx(1.0)
    assert dom.boundary_mask.sum() + dom.interior_mask.sum() == dom.n_nodes
    assert dom.boundary_mask.sum() == 16


@given(dims, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_rigid_fields_have_zero_strain(d, w, b1, b2):
    dom = GridDomain(*d)
    u = VectorField.from_function(dom, lambda x, y: (b1 - w * y, b2 + w * x))
    assert np.max(np.abs(sym_gradient(u).values)) <= 1e-12 * (1 + abs(w) + abs(b1) + abs(b2))


def test_affine_examples():
    dom = GridDomain(5, 4, 0.3)
    e = sym_gradient(VectorField.from_function(dom, lambda x, y: (x, 0 * y))).values
    np.testing.assert_allclose(e, np.broadcast_to([1.0, 0.0, 0.0], e.shape), atol=1e-14)
    shear = VectorField.from_function(dom, lambda x, y: (y, 0 * x))
    e = sym_gradient(shear).values
    np.testing.assert_allclose(e, np.broadcast_to([0.0, 0.5, 0.0], e.shape), atol=1e-14)
    D = full_gradient(shear).values
    np.testing.assert_allclose(D, np.broadcast_to([[0.0, 1.0], [0.0, 0.0]], D.shape), atol=1e-14)


def test_rigid_full_gradient_is_the_skew_matrix():
    dom = GridDomain(6, 6, 0.2)
    D = full_gradient(VectorField.from_function(dom, lambda x, y: (1 - 2 * y, 3 + 2 * x))).values
    np.testing.assert_allclose(D, np.broadcast_to([[0.0, -2.0], [2.0, 0.0]], D.shape), atol=1e-13)


@given(dims, seeds)
def test_sym_part_of_full_gradient(d, seed):
    dom = GridDomain(*d)
    u = random_field(dom, np.random.default_rng(seed))
    np.testing.assert_array_equal(full_gradient(u).sym().values, sym_gradient(u).values)


def test_constant_stress_is_divergence_free_inside():
    dom = GridDomain(7, 6, 0.1)
    div = divergence(SymTensorField.constant(dom, 1.3, -0.4, 2.0)).values
    assert np.max(np.abs(div[dom.interior_mask])) < 1e-12


@given(dims, seeds)
def test_summation_by_parts(d, seed):
    """sum <sigma, eps(phi)> h^2 = -sum <div sigma, phi> h^2, checked for arbitrary phi."""
    dom = GridDomain(*d)
    rng = np.random.default_rng(seed)
    sig = rng.standard_normal((*dom.cell_shape, 3))
    phi = rng.standard_normal((*dom.node_shape, 2))
    lhs = float(np.sum(sym_inner(sig, sym_gradient_array(phi, dom.h))))
    rhs = -float(np.sum(divergence_array(sig, dom.h) * phi))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.sum(np.abs(sig)) * np.sum(np.abs(phi)) / dom.h)


def test_strain_matrix_matches_array_operator(rng):
    dom = GridDomain(6, 5, 0.3)
    u = rng.standard_normal((*dom.node_shape, 2))
    z = (strain_matrix_z(dom) @ u.ravel()).reshape(*dom.cell_shape, 3)
    e = sym_gradient_array(u, dom.h)
    np.testing.assert_allclose(z, e * np.array([1.0, np.sqrt(2.0), 1.0]), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(z, axis=-1), frob_norm(e), atol=1e-12)


def _kernel_basis(dom):
    G = strain_matrix_z(dom).toarray()
    _, s, vt = np.linalg.svd(G)
    null = vt[np.sum(s > 1e-10 * s[0]):]
    return null


def test_full_grid_kernel_is_rigid_plus_three_checkerboards():
    """The averaged stencil cannot see (-1)^(i+j) patterns; the kernel is 6-dimensional."""
    dom = GridDomain(6, 5, 0.25)
    null = _kernel_basis(dom)
    assert null.shape[0] == 6
    X, Y = dom.coords()
    i, j = np.meshgrid(np.arange(dom.nx), np.arange(dom.ny), indexing="ij")
    s = (-1.0) ** (i + j)
    one, zero = np.ones_like(X), np.zeros_like(X)
    span = np.stack([np.stack(c, -1).ravel() for c in [
        (one, zero), (zero, one), (-Y, X), (s, zero), (zero, s), (s * X, -s * Y)]])
    # every kernel vector is a combination of the six listed modes
    coef, res, *_ = np.linalg.lstsq(span.T, null.T, rcond=None)
    assert np.max(np.abs(span.T @ coef - null.T)) < 1e-10
    # and every listed mode is in the kernel
    assert np.max(np.abs(strain_matrix_z(dom) @ span.T)) < 1e-12


def test_kernel_with_pinned_boundary_is_trivial():
    dom = GridDomain(7, 6, 0.2)
    Gi = strain_matrix_z(dom)[:, interior_dofs(dom)].toarray()
    assert np.linalg.matrix_rank(Gi) == Gi.shape[1]


def test_zero_strain_fields_with_no_checkerboard_component_are_rigid(rng):
    dom = GridDomain(6, 6, 0.2)
    null = _kernel_basis(dom)
    v = (rng.standard_normal(null.shape[0]) @ null).reshape(*dom.node_shape, 2)
    # remove the checkerboard content by averaging over each cell's four nodes
    avg = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    Xc, Yc = dom.cell_centers()
    A = np.stack([np.stack(c, -1).reshape(-1, 2) for c in [
        (np.ones_like(Xc), 0 * Xc), (0 * Xc, np.ones_like(Xc)), (-Yc, Xc)]], -1)
    A = A.reshape(-1, 3)
    coef, *_ = np.linalg.lstsq(A, avg.reshape(-1), rcond=None)
    assert np.max(np.abs(A @ coef - avg.reshape(-1))) < 1e-10


@given(dims, st.floats(-5, 5), st.integers(1, 2))
def test_translate_diff_of_linear_field(d, m, k):
    assume(k <= d[0] - 2)
    dom = GridDomain(*d)
    u = VectorField.from_function(dom, lambda x, y: (m * x, 0 * y))
    out = translate_diff(u, 0, k)
    np.testing.assert_allclose(out.values[..., 0], m * k * dom.h, atol=1e-11 * (1 + abs(m)))
    assert out.domain.nx == dom.nx - k
    dq = translate_diff(u, 0, k, delta=True)
    np.testing.assert_allclose(dq.values[..., 0], m, atol=1e-10 * (1 + abs(m)))
    back = translate_diff(u, 0, k, variant="backward")
    np.testing.assert_allclose(back.values[..., 0], -m * k * dom.h, atol=1e-11 * (1 + abs(m)))
    assert back.domain.origin[0] == pytest.approx(dom.origin[0] + k * dom.h)


def test_translate_diff_constant_and_errors():
    dom = GridDomain(5, 5, 0.5)
    u = VectorField.from_function(dom, lambda x, y: (0 * x + 2.0, 0 * y - 1.0))
    assert np.all(translate_diff(u, 1, 2).values == 0)
    with pytest.raises(GridError):
        translate_diff(u, 0, 5)
    with pytest.raises(GridError):
        translate_diff(u, 2, 1)
    with pytest.raises(GridError):
        translate_diff(u, 0, 1, variant="sideways")


@given(dims, seeds, st.integers(0, 1), st.integers(1, 2))
def test_translation_commutes_with_sym_gradient(d, seed, axis, k):
    assume(k <= d[axis] - 2)
    dom = GridDomain(*d)
    u = random_field(dom, np.random.default_rng(seed))
    a = sym_gradient(translate_diff(u, axis, k)).values
    b = translate_diff(sym_gradient(u), axis, k).values
    np.testing.assert_array_equal(a.shape, b.shape)
    np.testing.assert_allclose(a, b, atol=1e-11 * np.max(np.abs(b) + 1))


@given(dims, seeds, st.floats(-3, 3))
def test_operators_are_linear(d, seed, c):
    dom = GridDomain(*d)
    rng = np.random.default_rng(seed)
    u, v = random_field(dom, rng), random_field(dom, rng)
    lhs = sym_gradient(u * c + v).values
    rhs = c * sym_gradient(u).values + sym_gradient(v).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(c)) / dom.h)


def test_field_validation():
    dom = GridDomain(4, 4, 0.1)
    with pytest.raises(GridError):
        VectorField(dom, np.zeros((3, 4, 2)))
    bad = np.zeros((4, 4, 2))
    bad[1, 1, 0] = np.nan
    with pytest.raises(GridError):
        VectorField(dom, bad)
