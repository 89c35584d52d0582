"""Chemoattractant solve and the transport velocity grad K_s c."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import EigenBasis, FaceField, GridField, SpectralField, build_basis, gradient, to_grid, to_spectral
from .operators import FracParams, apply, make_multiplier


@dataclass(frozen=True, eq=False)
class ChemoSolution:
    c: GridField
    c_spec: SpectralField
    velocity: FaceField
    params: FracParams | None  # None for the s -> 0 reference model


def velocity_symbol(basis: EigenBasis, params: FracParams) -> np.ndarray:
    """Per-mode factor mapping u to K_s c.

    For sigma = 0 this is the composite symbol 1/(lambda + lambda^s). For the
    shifted family K_s = (-Delta + sigma)^(-s) and the factor becomes
    (lambda + sigma)^(-s) / ((lambda + sigma)^(1-s) + 1 - sigma). Mode 0 is
    dropped since its gradient vanishes.
    """
    if params.sigma == 0.0:
        return np.array(make_multiplier("composite_L", basis, params).factors)
    ev = np.array(basis.eigenvalues)
    shifted = ev + params.sigma
    out = shifted ** (-params.s) / (shifted ** (1.0 - params.s) + 1.0 - params.sigma)
    out.flat[0] = 0.0
    return out


def solve_chemo(u: GridField, params: FracParams, basis: EigenBasis | None = None) -> ChemoSolution:
    basis = basis if basis is not None else build_basis(u.domain)
    U = to_spectral(u, basis)
    c_spec = apply(make_multiplier("chemo_resolvent", basis, params), U)
    # velocity straight from u through the composite symbol, not from the stored c
    potential = SpectralField(velocity_symbol(basis, params) * U.coeffs, basis)
    return ChemoSolution(to_grid(c_spec), c_spec, gradient(potential), params)


def solve_daper(u: GridField, basis: EigenBasis | None = None) -> ChemoSolution:
    """Reference model: (-Delta) S + S = u with velocity grad S."""
    basis = basis if basis is not None else build_basis(u.domain)
    U = to_spectral(u, basis)
    S = SpectralField(U.coeffs / (1.0 + basis.eigenvalues), basis)
    return ChemoSolution(to_grid(S), S, gradient(S), None)


def mass_relation_residual(u: GridField, sol: ChemoSolution) -> float:
    """|(sigma^(1-s) + 1 - sigma) int c - int u|."""
    factor = sol.params.mass_factor if sol.params is not None else 1.0
    return abs(factor * sol.c.integral() - u.integral())


def velocity_bound_check(u: GridField, sol: ChemoSolution) -> float:
    """||grad L u||^2 - |Omega| ||u||_inf^2 / lambda_1; nonpositive when the bound holds."""
    basis = sol.c_spec.basis
    d = u.domain
    return sol.velocity.norm_sq() - d.volume * float(np.max(np.abs(u.values))) ** 2 / basis.lambda_1


def fractional_mean(sol: ChemoSolution) -> float:
    """Integral of (-Delta_N + sigma)^(1-s) c; zero when sigma = 0."""
    p = sol.params
    basis = sol.c_spec.basis
    ev = np.array(basis.eigenvalues) + (p.sigma if p is not None else 0.0)
    power = np.where(ev > 0, ev, 0.0) ** (1.0 - (p.s if p is not None else 0.0))
    lifted = to_grid(SpectralField(power * sol.c_spec.coeffs, basis))
    return lifted.integral()
