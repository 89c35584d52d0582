import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import line, random_field, rect
from fhks import DomainError, DomainSpec, GridField, SpectralField, build_basis, gradient, inner_product, to_grid, to_spectral
from fhks.domain import weak_divergence


def test_domain_validation():
    with pytest.raises(DomainError):
        DomainSpec((1.0,), (1,))
    with pytest.raises(DomainError):
        DomainSpec((1.0, 1.0, 1.0), (4, 4, 4))
    with pytest.raises(DomainError):
        DomainSpec((1.0,), (4, 4))
    with pytest.raises(DomainError):
        DomainSpec((-1.0,), (4,))
    with pytest.raises(DomainError):
        DomainSpec((1.0,), (4,), "fourier")


def test_continuum_eigenvalues_unit_interval():
    b = build_basis(DomainSpec((1.0,), (4,), "continuum"))
    np.testing.assert_allclose(b.eigenvalues, [0, math.pi**2, 4 * math.pi**2, 9 * math.pi**2], rtol=1e-14)
    np.testing.assert_allclose(b.eigenvalues, [0, 9.8696, 39.478, 88.826], atol=5e-4)


def test_discrete_lambda1_matches_stencil_matrix():
    # independent oracle: eigenvalues of the 4x4 Neumann second-difference matrix with h = 1/4
    h = 0.25
    a = np.array([[1, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 1]]) / h**2
    w = np.sort(np.linalg.eigvalsh(a))
    b = build_basis(DomainSpec((1.0,), (4,)))
    assert b.eigenvalues[0] == 0.0
    assert b.lambda_1 == pytest.approx(w[1], rel=1e-13)
    np.testing.assert_allclose(np.sort(b.eigenvalues), w, atol=1e-12)


@pytest.mark.parametrize("d", [line(7), rect(), line(8, 2.5, "continuum")])
def test_zero_mode_is_constant(d):
    b = build_basis(d)
    assert b.eigenvalues.flat[0] == 0.0
    assert np.all(b.eigenvalues.flat[1:] > 0)
    assert b.modes[0] == (0,) * d.dimension
    np.testing.assert_allclose(b.eigenfunction((0,) * d.dimension), 1 / math.sqrt(d.volume), rtol=1e-14)


@pytest.mark.parametrize("d", [line(12), rect(6, 5)])
def test_discrete_orthonormality(d):
    b = build_basis(d)
    phis = np.array([b.eigenfunction(k).ravel() for k in b.modes])
    gram = phis @ phis.T * d.cell_volume
    assert np.max(np.abs(gram - np.eye(len(b.modes)))) <= 1e-12


def test_constant_field_lives_in_mode_zero():
    d = rect()
    F = to_spectral(GridField(np.full(d.shape, 0.37), d))
    assert F.mean_coefficient == pytest.approx(0.37 * math.sqrt(d.volume), rel=1e-14)
    rest = F.coeffs.copy()
    rest.flat[0] = 0
    assert np.max(np.abs(rest)) <= 1e-14


def test_phi1_has_unit_coefficient():
    d = line(16, 2.0)
    b = build_basis(d)
    F = to_spectral(GridField(b.eigenfunction((1,)), d))
    # direct quadrature against every mode is the oracle
    direct = np.array([inner_product(GridField(b.eigenfunction((1,)), d), GridField(b.eigenfunction(k), d)) for k in b.modes])
    np.testing.assert_allclose(F.coeffs, direct, atol=1e-12)
    assert F.coeffs[1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(np.delete(F.coeffs, 1))) <= 1e-12


def test_to_grid_basics():
    d = line(10, 3.0)
    b = build_basis(d)
    e0 = np.zeros(d.shape)
    e0[0] = 1.0
    np.testing.assert_allclose(to_grid(SpectralField(e0, b)).values, 1 / math.sqrt(3.0), rtol=1e-14)
    assert np.all(to_grid(SpectralField(np.zeros(d.shape), b)).values == 0)


@settings(max_examples=25, deadline=None)
@given(
    n0=st.integers(2, 24),
    n1=st.integers(2, 24),
    two_d=st.booleans(),
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    seed=st.integers(0, 2**31),
)
def test_round_trip_linearity_parseval(n0, n1, two_d, a, b, seed):
    d = DomainSpec((1.3, 0.7), (n0, n1)) if two_d else DomainSpec((1.3,), (n0,))
    rng = np.random.default_rng(seed)
    f, g = random_field(d, rng, -1, 1), random_field(d, rng, -1, 1)
    F, G = to_spectral(f), to_spectral(g)
    assert np.max(np.abs(to_grid(F).values - f.values)) <= 1e-12
    lin = to_grid(F * a + G * b).values
    assert np.max(np.abs(lin - (a * f.values + b * g.values))) <= 1e-12
    assert inner_product(f, f) == pytest.approx(np.sum(F.coeffs**2), rel=1e-10, abs=1e-10)
    assert inner_product(f, g) == inner_product(g, f)


def test_inner_product_examples():
    d = rect()
    one = GridField(np.ones(d.shape), d)
    assert inner_product(one, one) == pytest.approx(d.volume, rel=1e-14)
    b = build_basis(d)
    phi = GridField(b.eigenfunction((1, 0)), d)
    assert inner_product(phi, phi) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        inner_product(one, GridField(np.ones(4), line(4)))


def test_gradient_of_constant_is_zero():
    d = rect()
    grad = gradient(to_spectral(GridField(np.full(d.shape, 0.5), d)))
    assert all(np.max(np.abs(c)) <= 1e-13 for c in grad.components)


def test_gradient_of_phi1_continuum():
    d = DomainSpec((1.0,), (32,), "continuum")
    b = build_basis(d)
    e1 = np.zeros(32)
    e1[1] = 1.0
    (comp,) = gradient(SpectralField(e1, b)).components
    x = d.faces()
    np.testing.assert_allclose(comp, -math.sqrt(2) * math.pi * np.sin(math.pi * x), atol=1e-12)
    assert comp[0] == 0.0 and comp[-1] == 0.0


def test_discrete_gradient_equals_face_differences(rng):
    d = rect(9, 7)
    f = random_field(d, rng)
    grad = gradient(to_spectral(f))
    for a, comp in enumerate(grad.components):
        inner = np.take(comp, np.arange(1, d.cells[a]), axis=a)
        np.testing.assert_allclose(inner, np.diff(f.values, axis=a) / d.spacing[a], atol=1e-10)
        assert np.all(np.take(comp, [0, d.cells[a]], axis=a) == 0.0)


@pytest.mark.parametrize("mode", ["discrete", "continuum"])
def test_gradient_energy_equals_eigenvalue(mode):
    d = DomainSpec((1.0, 2.0), (8, 6), mode)
    b = build_basis(d)
    for k in [(1, 0), (0, 3), (2, 5)]:
        e = np.zeros(d.shape)
        e[k] = 1.0
        assert gradient(SpectralField(e, b)).norm_sq() == pytest.approx(b.eigenvalues[k], rel=1e-12)


def test_weak_divergence_is_adjoint_of_gradient(rng):
    # <w, grad phi_k> computed two ways
    d = line(16)
    b = build_basis(d)
    w = rng.normal(size=16)
    D = weak_divergence((w,), b)
    from fhks.domain import gradient_at_midpoints

    for k in range(16):
        e = np.zeros(16)
        e[k] = 1.0
        (gk,) = gradient_at_midpoints(SpectralField(e, b))
        assert D.coeffs[k] == pytest.approx(np.sum(w * gk) * d.cell_volume, abs=1e-12)


def test_fields_are_immutable():
    d = line(4)
    f = GridField(np.zeros(4), d)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(DomainError):
        GridField(np.array([0.0, np.nan, 0, 0]), d)
