"""Rectangle domains, the Neumann cosine eigenbasis and grid <-> spectral transforms.

Fields live at cell midpoints. With midpoint collocation the cosine modes
cos(k pi x / L), k = 0..N-1, are exactly orthogonal under the midpoint rule,
so the forward transform is an orthonormal DCT-II scaled by the square root
of the cell volume and ``to_grid`` is its exact inverse.

Gradients are evaluated at cell faces by differentiating the cosine series
term by term into a sine series. In ``discrete`` symbol mode the derivative
factor of mode k is sqrt(lambda_k) of the second-difference stencil, so the
face gradient coincides with the two-point finite difference of the grid
field and -div(grad) reproduces the discrete Neumann Laplacian exactly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft

SYMBOL_MODES = ("continuum", "discrete")


class DomainError(ValueError):
    """Invalid domain description or mismatched domains."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DomainSpec:
    lengths: tuple[float, ...] = (1.0,)
    cells: tuple[int, ...] = (128,)
    symbol_mode: str = "discrete"

    def __post_init__(self):
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)
        if len(lengths) != len(cells):
            raise DomainError(
                f"need one length per axis and one cell count per axis, got {len(lengths)} and {len(cells)}"
            )
        if len(lengths) not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {len(lengths)}")
        if any(not (math.isfinite(L) and L > 0) for L in lengths):
            raise DomainError(f"lengths must be positive, got {lengths}")
        if any(n < 2 for n in cells):
            raise DomainError(f"every axis needs at least 2 cells, got {cells}")
        if self.symbol_mode not in SYMBOL_MODES:
            raise DomainError(f"symbol_mode must be one of {SYMBOL_MODES}, got {self.symbol_mode!r}")

    @property
    def dimension(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    def midpoints(self, axis: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def faces(self, axis: int = 0) -> np.ndarray:
        return np.arange(self.cells[axis] + 1) * self.spacing[axis]

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Midpoint coordinates broadcast to the grid shape."""
        return tuple(np.meshgrid(*(self.midpoints(a) for a in range(self.dimension)), indexing="ij"))


def axis_eigenvalues(length: float, n: int, symbol_mode: str) -> np.ndarray:
    k = np.arange(n)
    if symbol_mode == "continuum":
        return (k * np.pi / length) ** 2
    h = length / n
    return (2.0 / h * np.sin(k * np.pi / (2 * n))) ** 2


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Tensor-product Neumann cosine modes of a rectangle.

    ``eigenvalues`` has the grid shape: entry ``[k0, k1]`` belongs to the
    multi-index (k0, k1). ``derivative_factors[a]`` holds sqrt of the 1D
    eigenvalue along axis ``a``; the derivative of the cosine mode along that
    axis is ``-derivative_factors[a][k_a]`` times the matching sine.
    """

    domain: DomainSpec
    eigenvalues: np.ndarray
    norm_constants: np.ndarray
    axis_eigenvalues: tuple[np.ndarray, ...]
    derivative_factors: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def modes(self) -> list[tuple[int, ...]]:
        return list(np.ndindex(*self.domain.shape))

    @property
    def lambda_1(self) -> float:
        """Smallest nonzero eigenvalue."""
        return float(np.min(self.eigenvalues.ravel()[1:]))

    @property
    def lambda_max(self) -> float:
        return float(np.max(self.eigenvalues))

    def eigenfunction(self, mode: Sequence[int]) -> np.ndarray:
        """Mode shape sampled at the cell midpoints."""
        mode = tuple(mode)
        d = self.domain
        out = np.ones(d.shape)
        for a, (k, x) in enumerate(zip(mode, d.mesh())):
            L = d.lengths[a]
            amp = 1.0 / math.sqrt(L) if k == 0 else math.sqrt(2.0 / L)
            out = out * amp * np.cos(k * np.pi * x / L)
        return out


@functools.lru_cache(maxsize=64)
def build_basis(domain: DomainSpec) -> EigenBasis:
    lam_axes = [axis_eigenvalues(L, n, domain.symbol_mode) for L, n in zip(domain.lengths, domain.cells)]
    lam = np.zeros(domain.shape)
    norms = np.ones(domain.shape)
    for a, (lam_a, L) in enumerate(zip(lam_axes, domain.lengths)):
        shape = [1] * domain.dimension
        shape[a] = -1
        lam = lam + lam_a.reshape(shape)
        amp = np.full(domain.cells[a], math.sqrt(2.0 / L))
        amp[0] = 1.0 / math.sqrt(L)
        norms = norms * amp.reshape(shape)
    lam.flat[0] = 0.0
    return EigenBasis(
        domain=domain,
        eigenvalues=_frozen(lam),
        norm_constants=_frozen(norms),
        axis_eigenvalues=tuple(_frozen(x) for x in lam_axes),
        derivative_factors=tuple(_frozen(np.sqrt(x)) for x in lam_axes),
    )


@dataclass(frozen=True, eq=False)
class GridField:
    values: np.ndarray
    domain: DomainSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != math.prod(self.domain.shape):
            raise DomainError(f"expected {math.prod(self.domain.shape)} values, got {v.size}")
        v = v.reshape(self.domain.shape)
        if not np.all(np.isfinite(v)):
            raise DomainError("grid field has non-finite entries")
        object.__setattr__(self, "values", _frozen(v))

    def _check(self, other: GridField) -> None:
        if other.domain != self.domain:
            raise DomainError("grid fields live on different domains")

    def __add__(self, other: GridField) -> GridField:
        self._check(other)
        return GridField(self.values + other.values, self.domain)

    def __sub__(self, other: GridField) -> GridField:
        self._check(other)
        return GridField(self.values - other.values, self.domain)

    def __mul__(self, a: float) -> GridField:
        return GridField(a * self.values, self.domain)

    __rmul__ = __mul__

    def __neg__(self) -> GridField:
        return GridField(-self.values, self.domain)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.domain.cell_volume)


@dataclass(frozen=True, eq=False)
class SpectralField:
    coeffs: np.ndarray
    basis: EigenBasis

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        shape = self.basis.domain.shape
        if c.size != math.prod(shape):
            raise DomainError(f"expected {math.prod(shape)} coefficients, got {c.size}")
        c = c.reshape(shape)
        if not np.all(np.isfinite(c)):
            raise DomainError("spectral field has non-finite coefficients")
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def domain(self) -> DomainSpec:
        return self.basis.domain

    def _check(self, other: SpectralField) -> None:
        if other.domain != self.domain:
            raise DomainError("spectral fields use different bases")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.coeffs - other.coeffs, self.basis)

    def __mul__(self, a: float) -> SpectralField:
        return SpectralField(a * self.coeffs, self.basis)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(-self.coeffs, self.basis)

    @property
    def mean_coefficient(self) -> float:
        return float(self.coeffs.flat[0])


@dataclass(frozen=True, eq=False)
class FaceField:
    """One staggered component per axis; component ``a`` has ``N_a + 1`` entries along axis ``a``."""

    components: tuple[np.ndarray, ...]
    domain: DomainSpec

    def __post_init__(self):
        comps = []
        for a, comp in enumerate(self.components):
            comp = np.asarray(comp, dtype=float)
            expected = list(self.domain.shape)
            expected[a] += 1
            if comp.shape != tuple(expected):
                raise DomainError(f"face component {a} has shape {comp.shape}, expected {tuple(expected)}")
            comps.append(_frozen(comp))
        if len(comps) != self.domain.dimension:
            raise DomainError("need one face component per axis")
        object.__setattr__(self, "components", tuple(comps))

    def norm_sq(self) -> float:
        """Squared L2 norm by face quadrature (each face carries one cell volume)."""
        return float(sum(np.sum(c * c) for c in self.components) * self.domain.cell_volume)

    def dot(self, other: FaceField) -> float:
        return float(sum(np.sum(a * b) for a, b in zip(self.components, other.components)) * self.domain.cell_volume)

    def max_abs(self) -> tuple[float, ...]:
        return tuple(float(np.max(np.abs(c))) for c in self.components)


def _check_domain(a: DomainSpec, b: DomainSpec) -> None:
    if a != b:
        raise DomainError(f"domain mismatch: {a} vs {b}")


def to_spectral(f: GridField, basis: EigenBasis | None = None) -> SpectralField:
    basis = basis if basis is not None else build_basis(f.domain)
    _check_domain(f.domain, basis.domain)
    coeffs = fft.dctn(f.values, type=2, norm="ortho") * math.sqrt(f.domain.cell_volume)
    return SpectralField(coeffs, basis)


def to_grid(F: SpectralField) -> GridField:
    d = F.domain
    values = fft.idctn(F.coeffs, type=2, norm="ortho") / math.sqrt(d.cell_volume)
    return GridField(values, d)


def inner_product(f: GridField, g: GridField) -> float:
    _check_domain(f.domain, g.domain)
    return float(np.sum(f.values * g.values) * f.domain.cell_volume)


def _cos_synth(a: np.ndarray, d: DomainSpec, axis: int) -> np.ndarray:
    return fft.idct(a, type=2, norm="ortho", axis=axis) / math.sqrt(d.spacing[axis])


def _cos_analysis(w: np.ndarray, d: DomainSpec, axis: int) -> np.ndarray:
    return fft.dct(w, type=2, norm="ortho", axis=axis) * math.sqrt(d.spacing[axis])


def _scaled_derivative(F: SpectralField, axis: int) -> np.ndarray:
    """Coefficients of d/dx_axis in the sine basis, indexed by the cosine multi-index."""
    mu = F.basis.derivative_factors[axis]
    shape = [1] * F.domain.dimension
    shape[axis] = -1
    return -F.coeffs * mu.reshape(shape)


def gradient(F: SpectralField) -> FaceField:
    """Exact derivative of the truncated cosine series at the cell faces.

    The normal component at boundary faces is identically zero because every
    sine factor vanishes there.
    """
    d = F.domain
    comps = []
    for a in range(d.dimension):
        L = d.lengths[a]
        b = _scaled_derivative(F, a)
        b = np.take(b, np.arange(1, d.cells[a]), axis=a)
        inner = fft.dst(b, type=1, axis=a) * (math.sqrt(2.0 / L) / 2.0)
        for o in range(d.dimension):
            if o != a:
                inner = _cos_synth(inner, d, o)
        pad = [(0, 0)] * d.dimension
        pad[a] = (1, 1)
        comps.append(np.pad(inner, pad))
    return FaceField(tuple(comps), d)


def gradient_at_midpoints(F: SpectralField) -> tuple[np.ndarray, ...]:
    """Derivative of the truncated series sampled at cell midpoints (one array per axis)."""
    d = F.domain
    out = []
    for a in range(d.dimension):
        L = d.lengths[a]
        b = _scaled_derivative(F, a)
        # sine modes 1..N-1 map to DST-III inputs 0..N-2; the last input (mode N) is unused
        b = np.roll(b, -1, axis=a)
        idx = [slice(None)] * d.dimension
        idx[a] = -1
        b[tuple(idx)] = 0.0
        w = fft.dst(b, type=3, axis=a) * (math.sqrt(2.0 / L) / 2.0)
        for o in range(d.dimension):
            if o != a:
                w = _cos_synth(w, d, o)
        out.append(w)
    return tuple(out)


def weak_divergence(components: Sequence[np.ndarray], basis: EigenBasis) -> SpectralField:
    """Spectral coefficients of -div(w) for a midpoint vector field w with w.n = 0 on the boundary.

    Uses <-div w, phi_k> = <w, grad phi_k>, evaluated by midpoint quadrature.
    """
    d = basis.domain
    total = np.zeros(d.shape)
    for a, w in enumerate(components):
        L = d.lengths[a]
        h = d.spacing[a]
        s = fft.dst(np.asarray(w, dtype=float), type=2, axis=a) * (h * math.sqrt(2.0 / L) / 2.0)
        # DST-II output j pairs with sine mode j+1; shift so index k holds mode k, drop mode N
        s = np.roll(s, 1, axis=a)
        idx = [slice(None)] * d.dimension
        idx[a] = 0
        s[tuple(idx)] = 0.0
        for o in range(d.dimension):
            if o != a:
                s = _cos_analysis(s, d, o)
        mu = basis.derivative_factors[a]
        shape = [1] * d.dimension
        shape[a] = -1
        total += -mu.reshape(shape) * s
    return SpectralField(total, basis)
