"""Fractional operators of the Neumann Laplacian as per-mode spectral multipliers.

Every operator here is diagonal in the cosine eigenbasis. Two independent
routes exist for cross-checking the spectral path: a dense matrix power of
the second-difference stencil, and the heat-semigroup integral formula
evaluated by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .domain import DomainError, DomainSpec, EigenBasis, GridField, SpectralField, build_basis, to_grid, to_spectral

KINDS = (
    "power_s",
    "ks",
    "hs",
    "resolvent",
    "composite_L",
    "restricted_inverse",
    "heat",
    "chemo_resolvent",
)

MEAN_ZERO_TOL = 1e-10
DENSE_CELL_CAP = 4096


class MeanNotZeroError(ValueError):
    """The restricted inverse was applied to a field with nonzero mean."""


@dataclass(frozen=True)
class FracParams:
    s: float = 0.4
    sigma: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"s must lie in the open interval (0, 1), got {self.s}")
        if not (0.0 <= self.sigma <= 1.0):
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")

    @property
    def mass_factor(self) -> float:
        """sigma^(1-s) + 1 - sigma, with 0^(1-s) = 0."""
        return (self.sigma ** (1.0 - self.s) if self.sigma > 0 else 0.0) + 1.0 - self.sigma


@dataclass(frozen=True, eq=False)
class SpectralMultiplier:
    kind: str
    factors: np.ndarray
    basis: EigenBasis
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def mean_zero_only(self) -> bool:
        return self.kind == "restricted_inverse"


def _positive_power(lam: np.ndarray, p: float) -> np.ndarray:
    """lam**p on the nonzero modes and 0 on mode 0."""
    out = np.zeros_like(lam)
    nz = lam > 0
    out[nz] = lam[nz] ** p
    return out


def make_multiplier(
    kind: str,
    basis: EigenBasis,
    frac: FracParams | None = None,
    *,
    lam: float | None = None,
    t: float | None = None,
    epsilon: float | None = None,
) -> SpectralMultiplier:
    if kind not in KINDS:
        raise ValueError(f"unknown multiplier kind {kind!r}; expected one of {KINDS}")
    ev = np.array(basis.eigenvalues)
    params: dict[str, Any] = {}
    if kind == "heat":
        if t is None or t < 0:
            raise ValueError(f"heat multiplier needs t >= 0, got {t}")
        if epsilon is None or epsilon <= 0:
            raise ValueError(f"heat multiplier needs epsilon > 0, got {epsilon}")
        factors = np.exp(-t * epsilon * ev)
        params.update(t=t, epsilon=epsilon)
    else:
        if frac is None:
            raise ValueError(f"multiplier {kind!r} needs FracParams")
        s = frac.s
        params.update(s=s)
        if kind == "power_s":
            factors = _positive_power(ev, s)
        elif kind in ("ks", "restricted_inverse"):
            factors = _positive_power(ev, -s)
        elif kind == "hs":
            factors = _positive_power(ev, -s / 2)
        elif kind == "resolvent":
            if lam is None or lam <= 0:
                raise ValueError(f"resolvent needs lam > 0, got {lam}")
            factors = 1.0 / (1.0 + lam * _positive_power(ev, s))
            params.update(lam=lam)
        elif kind == "composite_L":
            factors = np.zeros_like(ev)
            nz = ev > 0
            factors[nz] = 1.0 / (ev[nz] + ev[nz] ** s)
        else:  # chemo_resolvent
            sigma = frac.sigma
            shifted = ev + sigma
            factors = 1.0 / (_positive_power(shifted, 1.0 - s) + (1.0 - sigma))
            params.update(sigma=sigma)
    return SpectralMultiplier(kind, factors, basis, params)


def apply(m: SpectralMultiplier, F: SpectralField) -> SpectralField:
    if F.domain != m.basis.domain:
        raise DomainError("multiplier and field use different bases")
    if m.mean_zero_only and abs(F.mean_coefficient) > MEAN_ZERO_TOL:
        raise MeanNotZeroError(
            f"restricted inverse needs a mean-zero field; mode-0 coefficient is {F.mean_coefficient:.3e}"
        )
    return SpectralField(m.factors * F.coeffs, F.basis)


def neumann_second_difference(domain: DomainSpec) -> np.ndarray:
    """Dense matrix of the discrete Neumann -Laplacian on cell midpoints (row-major cell order)."""
    mats = []
    for L, n in zip(domain.lengths, domain.cells):
        h = L / n
        a = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        a[0, 0] = a[-1, -1] = 1.0
        mats.append(a / h**2)
    if len(mats) == 1:
        return mats[0]
    n0, n1 = domain.cells
    return np.kron(mats[0], np.eye(n1)) + np.kron(np.eye(n0), mats[1])


def dense_oracle_power(domain: DomainSpec, s: float) -> np.ndarray:
    """(-Delta_h)^s by eigendecomposition of the dense stencil matrix.

    ``s`` may be any positive exponent so that s = 1 can be checked against
    the stencil itself.
    """
    if domain.symbol_mode != "discrete":
        raise DomainError("the dense oracle reproduces the discrete symbol only")
    n = math.prod(domain.cells)
    if n > DENSE_CELL_CAP:
        raise DomainError(f"dense oracle limited to {DENSE_CELL_CAP} cells, got {n}")
    if s <= 0:
        raise ValueError(f"exponent must be positive, got {s}")
    a = neumann_second_difference(domain)
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    powered = np.where(w > 1e-9 * w.max(), w, 0.0) ** s
    out = (v * powered) @ v.T
    return 0.5 * (out + out.T)


def semigroup_fractional_oracle(
    f: GridField,
    s: float,
    *,
    t_min: float | None = None,
    t_max: float | None = None,
    nodes: int = 400,
    basis: EigenBasis | None = None,
) -> GridField:
    """(-Delta_N)^s f from the heat-semigroup integral.

    Substituting t = exp(tau) turns the integral into one over tau, integrated
    by the trapezoid rule on [log t_min, log t_max]. The integrand tends to the
    constant -(f - mean f) t^(-s) for large t, which the trapezoid rule only
    resolves to second order, so the scalar control variate
    (e^(-lambda_1 t) - 1)(f - mean f), whose integral is Gamma(-s) lambda_1^s
    (f - mean f), is subtracted first. The remainder decays at both ends and
    the truncated piece below t_min is added from the first-order expansion
    of the semigroup.
    """
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")
    basis = basis if basis is not None else build_basis(f.domain)
    lam1, lam_max = basis.lambda_1, basis.lambda_max
    t_min = 1e-8 / lam_max if t_min is None else t_min
    t_max = 50.0 / lam1 if t_max is None else t_max
    if not (0 < t_min < t_max) or nodes < 2:
        raise ValueError(f"divergent quadrature settings: t_min={t_min}, t_max={t_max}, nodes={nodes}")

    F = to_spectral(f, basis)
    ev = np.array(basis.eigenvalues)
    fluct = f.values - F.mean_coefficient / math.sqrt(f.domain.volume)
    taus = np.linspace(math.log(t_min), math.log(t_max), nodes)
    weights = np.full(nodes, taus[1] - taus[0])
    weights[[0, -1]] *= 0.5
    acc = np.zeros(f.domain.shape)
    for tau, w in zip(taus, weights):
        t = math.exp(tau)
        heated = to_grid(apply(make_multiplier("heat", basis, t=t, epsilon=1.0), F))
        control = math.expm1(-lam1 * t) * fluct
        acc += (w * t ** (-s)) * (heated.values - f.values - control)
    # (0, t_min): e^{t Delta} f - f - control ~ t (Delta f + lambda_1 fluct)
    lap_f = to_grid(SpectralField(-ev * F.coeffs, basis)).values
    acc += (lap_f + lam1 * fluct) * t_min ** (1.0 - s) / (1.0 - s)
    # (t_max, inf): both e^{t Delta} fluct and e^{-lambda_1 t} fluct are below e^{-t_max lambda_1}
    return GridField(acc / math.gamma(-s) + lam1**s * fluct, f.domain)
