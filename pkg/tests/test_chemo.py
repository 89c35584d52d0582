import math

import numpy as np
import pytest

from conftest import line, random_field, rect
from fhks import FracParams, GridField, build_basis, fractional_mean, mass_relation_residual, solve_chemo, solve_daper, to_grid, to_spectral, velocity_bound_check
from fhks.domain import DomainSpec


def test_constant_u_gives_constant_c_and_zero_velocity():
    d = rect()
    u = GridField(np.full(d.shape, 0.42), d)
    sol = solve_chemo(u, FracParams(0.3))
    np.testing.assert_allclose(sol.c.values, 0.42, atol=1e-14)
    assert max(sol.velocity.max_abs()) <= 1e-13


def test_phi1_eigen_solve():
    d = line(20, 1.4)
    b = build_basis(d)
    u = GridField(b.eigenfunction((1,)), d)
    s = 0.35
    sol = solve_chemo(u, FracParams(s))
    np.testing.assert_allclose(sol.c.values, u.values / (1 + b.lambda_1 ** (1 - s)), atol=1e-13)


@pytest.mark.parametrize("sigma", [0.0, 1.0])
def test_mass_relation_unit_factor(sigma, rng):
    d = rect()
    for _ in range(10):
        u = random_field(d, rng)
        sol = solve_chemo(u, FracParams(0.4, sigma))
        assert abs(sol.c.integral() - u.integral()) <= 1e-12
        assert mass_relation_residual(u, sol) <= 1e-12


def test_sigma_one_symbol(rng):
    d = line(16)
    b = build_basis(d)
    u = random_field(d, rng)
    sol = solve_chemo(u, FracParams(0.3, 1.0))
    np.testing.assert_allclose(sol.c_spec.coeffs, to_spectral(u).coeffs / (1 + b.eigenvalues) ** 0.7, atol=1e-14)


def test_mass_factor_half_half(rng):
    frac = FracParams(0.5, 0.5)
    assert frac.mass_factor == pytest.approx(0.5**0.5 + 0.5)
    assert frac.mass_factor == pytest.approx(1.2071, abs=1e-4)
    d = line(32)
    for _ in range(10):
        u = random_field(d, rng)
        sol = solve_chemo(u, frac)
        assert mass_relation_residual(u, sol) <= 1e-12
        assert abs(frac.mass_factor * sol.c.integral() - u.integral()) <= 1e-12


@pytest.mark.parametrize("sigma", [0.0, 0.25, 1.0])
def test_zero_mean_u_gives_zero_mean_c(sigma, rng):
    d = line(16)
    u = random_field(d, rng, -1, 1)
    u = u - GridField(np.full(d.shape, u.integral() / d.volume), d)
    assert abs(solve_chemo(u, FracParams(0.4, sigma)).c.integral()) <= 1e-14


def test_velocity_bound(rng):
    d = line(32, 1.3)
    b = build_basis(d)
    u = GridField(np.full(d.shape, 0.7), d)
    assert velocity_bound_check(u, solve_chemo(u, FracParams())) <= 1e-10
    # single mode, both sides in closed form
    s = 0.4
    phi = GridField(b.eigenfunction((1,)), d)
    sol = solve_chemo(phi, FracParams(s))
    lam = b.lambda_1
    assert sol.velocity.norm_sq() == pytest.approx(lam / (lam + lam**s) ** 2, rel=1e-12)
    rhs = d.volume * np.max(np.abs(phi.values)) ** 2 / lam
    assert velocity_bound_check(phi, sol) == pytest.approx(lam / (lam + lam**s) ** 2 - rhs, rel=1e-10)
    for _ in range(20):
        u = random_field(d, rng)
        assert velocity_bound_check(u, solve_chemo(u, FracParams(s))) <= 1e-10


def test_boundary_velocity_and_transform_consistency(rng):
    d = rect()
    sol = solve_chemo(random_field(d, rng), FracParams(0.2, 0.4))
    for a, comp in enumerate(sol.velocity.components):
        assert np.all(np.take(comp, [0, d.cells[a]], axis=a) == 0.0)
    assert np.max(np.abs(to_grid(sol.c_spec).values - sol.c.values)) <= 1e-12


def test_velocity_is_grad_ks_of_c(rng):
    # the composite symbol path must equal grad K_s applied to the stored c
    from fhks import apply, gradient, make_multiplier

    d = line(64)
    frac = FracParams(0.3)
    u = random_field(d, rng)
    sol = solve_chemo(u, frac)
    via_c = gradient(apply(make_multiplier("ks", build_basis(d), frac), sol.c_spec))
    np.testing.assert_allclose(via_c.components[0], sol.velocity.components[0], atol=1e-12)


def test_max_principle_transfer(rng):
    bad = []
    for i in range(500):
        d = line(int(rng.integers(8, 65))) if i % 2 else rect(int(rng.integers(4, 17)), int(rng.integers(4, 17)))
        u = random_field(d, rng)
        frac = FracParams(float(rng.uniform(0.05, 0.95)), float(rng.choice([0.0, 0.5, 1.0])))
        c = solve_chemo(u, frac).c.values
        if c.min() < -1e-8 or c.max() > 1 + 1e-8:
            bad.append((frac, u))
    assert not bad, f"c left [0, 1] for {len(bad)} samples, first params {bad[0][0]}"


def test_fractional_mean_vanishes(rng):
    u = random_field(rect(), rng)
    assert abs(fractional_mean(solve_chemo(u, FracParams(0.4)))) <= 1e-12


def test_linearity(rng):
    d = line(32)
    u, w = random_field(d, rng), random_field(d, rng)
    frac = FracParams(0.7)
    lhs = solve_chemo(u * 2.0 + w, frac)
    a, b = solve_chemo(u, frac), solve_chemo(w, frac)
    np.testing.assert_allclose(lhs.c.values, 2 * a.c.values + b.c.values, atol=1e-13)


def test_regularity_factor_bound():
    lam = np.logspace(-3, 6, 500)
    for s in (0.1, 0.5, 0.9):
        assert np.all(lam ** (2 * (1 - s)) / (1 + lam ** (1 - s)) ** 2 <= 1.0)


def test_daper_solve(rng):
    d = line(16)
    b = build_basis(d)
    phi = GridField(b.eigenfunction((2,)), d)
    sol = solve_daper(phi)
    np.testing.assert_allclose(sol.c.values, phi.values / (1 + b.eigenvalues[2]), atol=1e-13)
    assert sol.params is None
    u = random_field(d, rng)
    assert mass_relation_residual(u, solve_daper(u)) <= 1e-12
