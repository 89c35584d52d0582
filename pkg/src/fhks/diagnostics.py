"""Per-step diagnostics, entropy residuals and kinetic quantities.

Velocity divergence enters several formulas through -div(grad K_s c), which
for the base model equals u - c exactly on the discrete grid. It is computed
from the stored face velocity so the same code serves the shifted operator
family and the s -> 0 reference model.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .domain import FaceField, GridField, SpectralField, build_basis, gradient, to_grid, to_spectral

if TYPE_CHECKING:
    from .evolution import SimConfig, SimState, Trajectory


def _g(u):
    return u * (1.0 - u)


def _gp(u):
    return 1.0 - 2.0 * u


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    u_min: float
    u_max: float
    c_min: float
    c_max: float
    viscous_energy_increment: float
    entropy_residuals: tuple[float, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.mass):
            raise ValueError("mass is not finite")


def velocity_source(velocity: FaceField) -> np.ndarray:
    """-div of the face velocity at cell centers."""
    h = velocity.domain.spacing
    return -sum(np.diff(v, axis=a) / h[a] for a, v in enumerate(velocity.components))


def grad_sq_cells(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """|grad u|^2 per cell from two-point face differences, face squares averaged onto cells."""
    out = np.zeros(values.shape)
    for a, h in enumerate(spacing):
        d = np.diff(values, axis=a) / h
        pad = [(0, 0)] * values.ndim
        pad[a] = (1, 1)
        sq = np.pad(d * d, pad)
        n = values.shape[a]
        out += 0.5 * (np.take(sq, np.arange(n), axis=a) + np.take(sq, np.arange(1, n + 1), axis=a))
    return out


def basic_diagnostics(
    state: SimState,
    epsilon: float,
    dt: float,
    *,
    levels: Sequence[float] = (),
    prev: SimState | None = None,
) -> DiagnosticsRecord:
    """Mass, bounds, viscous energy increment eps*dt*||grad u||^2 and, when the
    previous state is given, the global Kruzkov entropy production per level:
    d/dt int|u - k| - int sgn(u - k) g(k) (-div v), which is <= 0 for the exact flow.
    """
    u = state.u
    basis = state.chemo.c_spec.basis
    grad_sq = gradient(to_spectral(u, basis)).norm_sq()
    residuals: tuple[float, ...] = ()
    if prev is not None and levels:
        vol = u.domain.cell_volume
        src = velocity_source(prev.chemo.velocity)
        u0, u1 = prev.u.values, u.values
        residuals = tuple(
            float(
                (np.sum(np.abs(u1 - k)) - np.sum(np.abs(u0 - k))) * vol / dt
                - np.sum(np.sign(u0 - k) * _g(k) * src) * vol
            )
            for k in levels
        )
    c = state.chemo.c.values
    return DiagnosticsRecord(
        t=state.t,
        mass=u.integral(),
        u_min=float(u.values.min()),
        u_max=float(u.values.max()),
        c_min=float(c.min()),
        c_max=float(c.max()),
        viscous_energy_increment=epsilon * dt * grad_sq,
        entropy_residuals=residuals,
    )


# -- entropy pairs ---------------------------------------------------------


@dataclass(frozen=True)
class Entropy:
    """Convex entropy eta with flux q, q' = eta' g', q(0) = 0."""

    eta: Callable
    d_eta: Callable
    dd_eta: Callable
    q: Callable
    name: str = "custom"


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(1024)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def entropy_pair(eta: Callable, d_eta: Callable, dd_eta: Callable, name: str = "custom") -> Entropy:
    """Build an entropy pair with q from 1024-node Gauss quadrature of eta' g' on [0, u]."""
    probe = np.linspace(-0.5, 1.5, 401)
    if np.any(np.asarray(dd_eta(probe)) < -1e-12):
        raise ValueError(f"entropy {name!r} is not convex")

    def q(u):
        u = np.asarray(u, dtype=float)
        w = u[..., None] * _GL_NODES
        return u * np.sum(_GL_WEIGHTS * d_eta(w) * _gp(w), axis=-1)

    return Entropy(eta, d_eta, dd_eta, q, name)


def linear_entropy() -> Entropy:
    return Entropy(
        lambda u: np.asarray(u, dtype=float),
        lambda u: np.ones_like(np.asarray(u, dtype=float)),
        lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        _g,
        "linear",
    )


def quadratic_entropy() -> Entropy:
    # q' = u (1 - 2u)  =>  q = u^2/2 - 2u^3/3
    return Entropy(
        lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
        lambda u: np.asarray(u, dtype=float),
        lambda u: np.ones_like(np.asarray(u, dtype=float)),
        lambda u: 0.5 * np.asarray(u) ** 2 - 2.0 * np.asarray(u) ** 3 / 3.0,
        "quadratic",
    )


def kruzhkov_pair(v: float) -> tuple[Callable, Callable]:
    """(|u - v|, sgn(u - v)(g(u) - g(v)))."""
    return (lambda u: np.abs(u - v)), (lambda u: np.sign(u - v) * (_g(u) - _g(v)))


def _godunov_state(uL, uR, v):
    """Interface value of the Riemann solution for the flux v g(w)."""
    gl, gr = _g(uL), _g(uR)
    want_min = (uL <= uR) == (v >= 0)
    low_end = np.where(gl <= gr, uL, uR)
    high_end = np.where(gl >= gr, uL, uR)
    vertex = (np.minimum(uL, uR) <= 0.5) & (0.5 <= np.maximum(uL, uR))
    return np.where(want_min, low_end, np.where(vertex, 0.5, high_end))


def _entropy_face_flux(u: np.ndarray, velocity: FaceField, ent: Entropy, scheme: str) -> list[np.ndarray]:
    out = []
    for a, vel in enumerate(velocity.components):
        n = u.shape[a]
        uL = np.take(u, np.arange(n - 1), axis=a)
        uR = np.take(u, np.arange(1, n), axis=a)
        v = np.take(vel, np.arange(1, n), axis=a)
        if scheme == "godunov":
            Q = v * ent.q(_godunov_state(uL, uR, v))
        else:
            Q = 0.5 * v * (ent.q(uL) + ent.q(uR)) - 0.5 * np.abs(v) * (ent.eta(uR) - ent.eta(uL))
        pad = [(0, 0)] * u.ndim
        pad[a] = (1, 1)
        out.append(np.pad(Q, pad))
    return out


def entropy_balance_residual(
    pre: SimState,
    post: SimState,
    dt: float,
    eta: Entropy,
    *,
    epsilon: float,
    scheme: str = "godunov",
) -> GridField:
    """Cellwise residual of the viscous entropy balance over one Lie step.

    d_t eta(u) + div(q(u) v) + (-div v)[q - g eta'](u) + eps (-Lap) eta(u) + eps eta''|grad u|^2.

    The hyperbolic terms use the face velocity frozen at ``pre`` and the
    numerical entropy flux paired with ``scheme``. The viscous terms are taken
    at the transported intermediate state u* and the Laplacian carries the
    factor (1 - exp(-z))/z, z = dt eps lambda, of the exact heat step. With
    these choices the linear entropy reproduces the scheme to rounding.
    """
    d = pre.u.domain
    h = d.spacing
    u0, u1 = pre.u.values, post.u.values
    vel = pre.chemo.velocity
    mass_flux = _entropy_face_flux(u0, vel, linear_entropy(), scheme)
    u_star = u0 - dt * sum(np.diff(F, axis=a) / h[a] for a, F in enumerate(mass_flux))
    Q = _entropy_face_flux(u0, vel, eta, scheme)
    div_q = sum(np.diff(F, axis=a) / h[a] for a, F in enumerate(Q))
    zero_order = velocity_source(vel) * (eta.q(u0) - _g(u0) * eta.d_eta(u0))
    basis = pre.chemo.c_spec.basis
    z = dt * epsilon * basis.eigenvalues
    smoothing = np.where(z > 0, -np.expm1(-z) / np.where(z > 0, z, 1.0), 1.0)
    E = to_spectral(GridField(eta.eta(u_star), d), basis)
    neg_lap = to_grid(SpectralField(smoothing * basis.eigenvalues * E.coeffs, basis)).values
    viscous = epsilon * (neg_lap + eta.dd_eta(u_star) * grad_sq_cells(u_star, h))
    res = (eta.eta(u1) - eta.eta(u0)) / dt + div_q + zero_order + viscous
    return GridField(res, d)


def conservation_residual(pre: SimState, post: SimState, dt: float, *, epsilon: float, scheme: str = "godunov"):
    """Cellwise residual of u_t + div(g(u) v) - eps Lap u with the scheme's own flux."""
    return entropy_balance_residual(pre, post, dt, linear_entropy(), epsilon=epsilon, scheme=scheme)


def l1_norm(f: GridField) -> float:
    return float(np.sum(np.abs(f.values)) * f.domain.cell_volume)


# -- weak Kruzkov inequality -----------------------------------------------


def _bump(x: np.ndarray, center: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """cos^2 bump and its derivative."""
    z = (x - center) / radius
    inside = np.abs(z) < 1
    phase = 0.5 * np.pi * z
    val = np.where(inside, np.cos(phase) ** 2, 0.0)
    der = np.where(inside, -np.sin(2 * phase) * 0.5 * np.pi / radius, 0.0)
    return val, der


def _space_tests(domain, n_centers: int):
    """Tensor cos^2 bumps on a lattice; yields (values at cells, face-gradient components)."""
    dim = domain.dimension

    def along(vec, a):
        shape = [1] * dim
        shape[a] = -1
        return vec.reshape(shape)

    if n_centers == 0:
        grads = []
        for a in range(dim):
            shape = list(domain.shape)
            shape[a] += 1
            grads.append(np.zeros(shape))
        yield np.ones(domain.shape), tuple(grads)
        return
    lattice = []
    for a in range(dim):
        L = domain.lengths[a]
        lattice.append(((np.arange(n_centers) + 0.5) * L / n_centers, 1.5 * L / n_centers))
    for combo in np.ndindex(*(n_centers,) * dim):
        at_cells, at_faces, slopes = [], [], []
        for a, idx in enumerate(combo):
            centers, r = lattice[a]
            at_cells.append(along(_bump(domain.midpoints(a), centers[idx], r)[0], a))
            fv, fd = _bump(domain.faces(a), centers[idx], r)
            at_faces.append(along(fv, a))
            slopes.append(along(fd, a))
        psi = np.ones(domain.shape)
        for v in at_cells:
            psi = psi * v
        grads = []
        for a in range(dim):
            comp = slopes[a]
            for b in range(dim):
                if b != a:
                    comp = comp * at_cells[b]
            grads.append(comp)
        yield psi, tuple(grads)


def kruzhkov_residual(
    traj: Trajectory,
    v: float,
    *,
    epsilon: float = 0.0,
    space_centers: int = 8,
    time_centers: int = 4,
) -> float:
    """Most negative value of the discretized weak Kruzkov inequality over a test family.

    For each nonnegative test function phi(t, x) = theta(t) psi(x) this evaluates

        -sum_n theta(t_{n+1/2}) int (|u^{n+1} - v| - |u^n - v|) psi
        + int_t theta int [Q . grad psi + sgn(u - v) g(v) (-div w) psi - eps grad|u - v| . grad psi]

    which is the integrated-by-parts form of the inequality (initial and final
    time terms included); Q = sgn(u - v)(g(u) - g(v)) w with w = grad K_s c,
    and u at faces taken as the two-cell average. The eps term accounts for
    the viscosity of the regularized problem; pass 0 for the inviscid form.
    ``space_centers = 0`` uses the single spatially constant test function.
    Time integrals use the trapezoid rule over the snapshot times.
    """
    snaps = traj.snapshots
    if len(snaps) < 3:
        raise ValueError(f"need at least 3 snapshots, got {len(snaps)}")
    times = np.array([s.t for s in snaps])
    d = snaps[0].u.domain
    vol = d.cell_volume
    h = d.spacing
    t0, t1 = times[0], times[-1]

    tests = list(_space_tests(d, space_centers))
    # per snapshot: entropy density, and the spatial functional against every test psi
    A = np.empty((len(snaps), len(tests)))
    S = np.empty((len(snaps), len(tests)))
    for n, st in enumerate(snaps):
        u = st.u.values
        ent = np.abs(u - v)
        src = velocity_source(st.chemo.velocity)
        zero = np.sign(u - v) * _g(v) * src
        face_flux, face_visc = [], []
        for a, w in enumerate(st.chemo.velocity.components):
            m = u.shape[a]
            uf = 0.5 * (np.take(u, np.arange(m - 1), axis=a) + np.take(u, np.arange(1, m), axis=a))
            pad = [(0, 0)] * u.ndim
            pad[a] = (1, 1)
            Q = np.pad(np.sign(uf - v) * (_g(uf) - _g(v)), pad) * w
            face_flux.append(Q)
            face_visc.append(np.pad(np.diff(ent, axis=a) / h[a], pad))
        for j, (psi, grad_psi) in enumerate(tests):
            A[n, j] = np.sum(ent * psi) * vol
            flux_term = sum(np.sum(Q * gp) for Q, gp in zip(face_flux, grad_psi)) * vol
            visc_term = sum(np.sum(gv * gp) for gv, gp in zip(face_visc, grad_psi)) * vol
            S[n, j] = flux_term + np.sum(zero * psi) * vol - epsilon * visc_term

    span = t1 - t0
    if time_centers == 0:
        t_centers, t_radius = [0.5 * (t0 + t1)], np.inf
    else:
        t_centers = t0 + (np.arange(time_centers) + 0.5) * span / time_centers
        t_radius = 1.5 * span / time_centers
    mids = 0.5 * (times[1:] + times[:-1])
    dts = np.diff(times)
    worst = math.inf
    for tc in t_centers:
        th_nodes = np.ones_like(times) if np.isinf(t_radius) else _bump(times, tc, t_radius)[0]
        th_mids = np.ones_like(mids) if np.isinf(t_radius) else _bump(mids, tc, t_radius)[0]
        time_part = -np.einsum("n,nj->j", th_mids, np.diff(A, axis=0))
        weighted = th_nodes[:, None] * S
        space_part = np.einsum("n,nj->j", dts, 0.5 * (weighted[1:] + weighted[:-1]))
        worst = min(worst, float(np.min(time_part + space_part)))
    return worst


# -- kinetic formulation ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class KineticField:
    k_grid: np.ndarray
    f: np.ndarray  # shape (*cells, len(k_grid)), entries 0/1


def kinetic_f(u: GridField, k_grid: Sequence[float]) -> KineticField:
    """f = sgn+(u - k), with sgn+(0) = 0."""
    k = np.asarray(k_grid, dtype=float)
    if np.any(np.diff(k) < 0):
        raise ValueError("k_grid must be sorted")
    f = (u.values[..., None] > k).astype(float)
    return KineticField(k, f)


def layer_cake_residual(u: GridField, k_grid: Sequence[float]) -> float:
    """max over cells of |int_0^1 f dk - u| with the trapezoid rule in k."""
    kf = kinetic_f(u, k_grid)
    return float(np.max(np.abs(trapezoid(kf.f, kf.k_grid, axis=-1) - u.values)))


def _tail_integral(f: np.ndarray, k: np.ndarray) -> np.ndarray:
    """int_k^1 f dv by the trapezoid rule on the grid points of k."""
    pieces = 0.5 * (f[..., 1:] + f[..., :-1]) * np.diff(k)
    tail = np.cumsum(pieces[..., ::-1], axis=-1)[..., ::-1]
    return np.concatenate([tail, np.zeros(f.shape[:-1] + (1,))], axis=-1)


def rho_identity_residual(u: GridField, k_grid: Sequence[float]) -> float:
    """max |u f - (k f + int_k^1 f dv)| over cells and levels."""
    kf = kinetic_f(u, k_grid)
    k = kf.k_grid
    rho = k * kf.f + _tail_integral(kf.f, k)
    return float(np.max(np.abs(u.values[..., None] * kf.f - rho)))


def default_levels(n: int = 256) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass
class DefectSeries:
    epsilons: list[float]
    F_integral: list[float]
    notes: list[str] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.F_integral, self.F_integral[1:]))


def _block_mean(a: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
    """Average over non-overlapping blocks along the leading len(blocks) axes (remainders dropped)."""
    for ax, b in enumerate(blocks):
        n = (a.shape[ax] // b) * b
        a = np.take(a, np.arange(n), axis=ax)
        shape = a.shape[:ax] + (n // b, b) + a.shape[ax + 1 :]
        a = a.reshape(shape).mean(axis=ax + 1)
    return a


def coarse_defect(snapshots: np.ndarray, times: np.ndarray, domain, window: tuple[int, int], k_grid) -> float:
    """int int int fbar (1 - fbar) with fbar the window-averaged kinetic function.

    ``snapshots`` has shape (n_times, *cells) on a uniform time grid.
    """
    wx, wt = window
    k = np.asarray(k_grid, dtype=float)
    f = (snapshots[..., None] > k).astype(float)
    fbar = _block_mean(f, (wt,) + (wx,) * domain.dimension)
    dt = (times[-1] - times[0]) / (len(times) - 1) if len(times) > 1 else 1.0
    cell = wt * dt * domain.cell_volume * wx**domain.dimension
    dk = np.diff(k)
    integrand = fbar * (1.0 - fbar)
    per_level = 0.5 * (integrand[..., 1:] + integrand[..., :-1]) * dk
    return float(np.sum(per_level) * cell)


def defect_sweep(
    u0: GridField,
    base_config: SimConfig,
    epsilons: Sequence[float],
    window: tuple[int, int] = (4, 4),
    *,
    n_times: int = 64,
    k_grid: Sequence[float] | None = None,
    threads: int = 1,
) -> DefectSeries:
    """Coarse-grained kinetic defect for a decreasing sequence of viscosities.

    Each run is sampled on ``n_times`` uniform intervals of [0, t_end]; the
    window is (cells per axis, time samples).
    """
    from .evolution import run

    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    k = default_levels(64) if k_grid is None else np.asarray(k_grid)
    times = np.linspace(0.0, base_config.t_end, n_times + 1)

    def one(e: float) -> float:
        traj = run(u0, replace(base_config, epsilon=e), times, diagnostics=False)
        stack = np.stack([s.u.values for s in traj.snapshots])
        return coarse_defect(stack[1:], times[1:], u0.domain, window, k)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        values = list(pool.map(one, eps))
    series = DefectSeries(eps, values)
    if not series.monotone:
        series.notes.append("defect series is not monotone in epsilon")
    return series
