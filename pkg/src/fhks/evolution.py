"""Time integration of the viscous system u_t + div(g(u) grad K_s c) = eps Lap u.

One step is an IMEX splitting: the chemoattractant is solved once, the
conservative transport part is advanced with a monotone explicit flux, and
the diffusion is applied exactly through the heat multiplier. A second,
independent solver iterates the mild (Duhamel) formulation to a fixed point.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft

from .chemo import ChemoSolution, solve_chemo, solve_daper, velocity_symbol
from .diagnostics import DiagnosticsRecord, basic_diagnostics
from .domain import (
    EigenBasis,
    FaceField,
    GridField,
    SpectralField,
    build_basis,
    gradient_at_midpoints,
    to_grid,
    to_spectral,
    weak_divergence,
)
from .operators import FracParams, apply, make_multiplier

log = logging.getLogger(__name__)

SPLITTINGS = ("lie", "strang")
FLUXES = ("godunov", "lax_friedrichs")
MODELS = ("fhks", "daper")

MAX_HALVINGS = 40
REJECT_TOL = 1e-6
BOUND_TOL = 1e-8


class NumericalFailure(RuntimeError):
    """Unrecoverable step rejection or bound violation; carries the last good state."""

    def __init__(self, message: str, state: SimState | None = None):
        super().__init__(message)
        self.state = state


class NonContractionError(NumericalFailure):
    pass


def g(u):
    return u * (1.0 - u)


def g_prime(u):
    return 1.0 - 2.0 * u


@dataclass(frozen=True)
class SimConfig:
    frac: FracParams = field(default_factory=FracParams)
    epsilon: float = 1e-3
    t_end: float = 0.5
    cfl: float = 0.45
    splitting: str = "lie"
    flux: str = "godunov"
    diag_levels: tuple[float, ...] = (0.25, 0.5, 0.75)
    model: str = "fhks"

    def __post_init__(self):
        object.__setattr__(self, "diag_levels", tuple(float(k) for k in self.diag_levels))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be > 0, got {self.t_end}")
        if not (0 < self.cfl <= 1):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.splitting not in SPLITTINGS:
            raise ValueError(f"splitting must be one of {SPLITTINGS}, got {self.splitting!r}")
        if self.flux not in FLUXES:
            raise ValueError(f"flux must be one of {FLUXES}, got {self.flux!r}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        levels = self.diag_levels
        if list(levels) != sorted(levels) or any(not 0 <= k <= 1 for k in levels):
            raise ValueError(f"diag_levels must be sorted within [0, 1], got {levels}")


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    u: GridField
    chemo: ChemoSolution


@dataclass
class Trajectory:
    snapshots: list[SimState] = field(default_factory=list)
    diagnostics: list[DiagnosticsRecord] = field(default_factory=list)
    bound_violations: list[tuple[float, float, float]] = field(default_factory=list)
    rejections: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def final(self) -> SimState:
        return self.snapshots[-1]


def chemo_solver(config: SimConfig, basis: EigenBasis) -> Callable[[GridField], ChemoSolution]:
    if config.model == "daper":
        return lambda u: solve_daper(u, basis)
    return lambda u: solve_chemo(u, config.frac, basis)


def initial_state(u0: GridField, config: SimConfig, t: float = 0.0) -> SimState:
    basis = build_basis(u0.domain)
    return SimState(t, u0, chemo_solver(config, basis)(u0))


def numerical_flux(u_left, u_right, v_face, scheme: str = "godunov"):
    """Two-point flux for f(w) = v_face * g(w), g(w) = w (1 - w).

    Godunov takes the minimum of f over [u_left, u_right] when u_left <= u_right
    and the maximum over [u_right, u_left] otherwise; the extremum sits at an
    endpoint or at the vertex w = 1/2.
    """
    uL, uR, v = np.broadcast_arrays(
        np.asarray(u_left, dtype=float), np.asarray(u_right, dtype=float), np.asarray(v_face, dtype=float)
    )
    fL, fR = v * g(uL), v * g(uR)
    if scheme == "godunov":
        vertex = (np.minimum(uL, uR) <= 0.5) & (0.5 <= np.maximum(uL, uR))
        fv = 0.25 * v
        lo = np.where(vertex, np.minimum(np.minimum(fL, fR), fv), np.minimum(fL, fR))
        hi = np.where(vertex, np.maximum(np.maximum(fL, fR), fv), np.maximum(fL, fR))
        out = np.where(uL <= uR, lo, hi)
    elif scheme == "lax_friedrichs":
        # max |g'| = 1 on [0, 1]
        out = 0.5 * (fL + fR) - 0.5 * np.abs(v) * (uR - uL)
    else:
        raise ValueError(f"unknown flux scheme {scheme!r}")
    return float(out) if out.ndim == 0 else out


def face_fluxes(u: np.ndarray, velocity: FaceField, scheme: str) -> list[np.ndarray]:
    """Numerical flux on every face; boundary faces carry zero flux."""
    out = []
    for a, v in enumerate(velocity.components):
        n = u.shape[a]
        left = np.take(u, np.arange(n - 1), axis=a)
        right = np.take(u, np.arange(1, n), axis=a)
        inner = np.take(v, np.arange(1, n), axis=a)
        flux = numerical_flux(left, right, inner, scheme)
        pad = [(0, 0)] * u.ndim
        pad[a] = (1, 1)
        out.append(np.pad(flux, pad))
    return out


def flux_divergence(fluxes: Sequence[np.ndarray], spacing: Sequence[float]) -> np.ndarray:
    return sum(np.diff(F, axis=a) / h for a, (F, h) in enumerate(zip(fluxes, spacing)))


def transport_rate(velocity: FaceField) -> float:
    """Sum over axes of max|v| / h, the inverse of the monotone time-step limit."""
    h = velocity.domain.spacing
    return sum(m / hh for m, hh in zip(velocity.max_abs(), h))


def cfl_dt(state: SimState, config: SimConfig) -> float:
    remaining = config.t_end - state.t
    rate = transport_rate(state.chemo.velocity)
    if rate == 0.0:
        return remaining
    return min(config.cfl / (rate + 1e-300), remaining)


def diffuse(u: GridField, dt: float, epsilon: float, basis: EigenBasis) -> GridField:
    heat = make_multiplier("heat", basis, t=dt, epsilon=epsilon)
    return to_grid(apply(heat, to_spectral(u, basis)))


def transport(u: GridField, velocity: FaceField, dt: float, scheme: str) -> GridField:
    fluxes = face_fluxes(u.values, velocity, scheme)
    return GridField(u.values - dt * flux_divergence(fluxes, u.domain.spacing), u.domain)


def _advance(state: SimState, config: SimConfig, dt: float, solve) -> GridField | None:
    basis = state.chemo.c_spec.basis
    if config.splitting == "lie":
        u = transport(state.u, state.chemo.velocity, dt, config.flux)
        return diffuse(u, dt, config.epsilon, basis)
    u = diffuse(state.u, 0.5 * dt, config.epsilon, basis)
    chemo = solve(u)
    # the half-step velocity may exceed the one dt was sized for; keep the scheme monotone
    if dt * transport_rate(chemo.velocity) > max(config.cfl, 0.5):
        return None
    u = transport(u, chemo.velocity, dt, config.flux)
    return diffuse(u, 0.5 * dt, config.epsilon, basis)


def step(state: SimState, config: SimConfig, dt: float | None = None) -> SimState:
    """Advance one accepted step; dt is halved and retried while u leaves [-1e-6, 1 + 1e-6]."""
    return _step(state, config, dt)[0]


def _step(state: SimState, config: SimConfig, dt: float | None) -> tuple[SimState, int]:
    basis = state.chemo.c_spec.basis
    solve = chemo_solver(config, basis)
    dt = cfl_dt(state, config) if dt is None else dt
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    for halvings in range(MAX_HALVINGS + 1):
        u = _advance(state, config, dt, solve)
        if u is not None and u.values.min() >= -REJECT_TOL and u.values.max() <= 1 + REJECT_TOL:
            return SimState(state.t + dt, u, solve(u)), halvings
        log.debug("step rejected at t=%g with dt=%g", state.t, dt)
        dt *= 0.5
    raise NumericalFailure(f"step rejected {MAX_HALVINGS} times at t={state.t!r}", state)


def run(
    u0: GridField,
    config: SimConfig,
    output_times: Sequence[float] | None = None,
    *,
    diagnostics: bool = True,
) -> Trajectory:
    if u0.values.min() < -BOUND_TOL or u0.values.max() > 1 + BOUND_TOL:
        raise ValueError("initial data must lie in [0, 1]")
    times = [config.t_end] if output_times is None else [float(t) for t in output_times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("output times must be strictly increasing")
    if times and (times[0] < 0 or times[-1] > config.t_end + 1e-12):
        raise ValueError(f"output times must lie in [0, t_end={config.t_end}]")

    traj = Trajectory()
    state = initial_state(u0, config)
    pending = list(times)
    if pending and pending[0] == 0.0:
        traj.snapshots.append(state)
        pending.pop(0)
    while pending:
        target = pending[0]
        dt = min(cfl_dt(state, config), target - state.t)
        new, halvings = _step(state, config, dt)
        traj.rejections += halvings
        if abs(new.t - target) <= 1e-12 * max(1.0, target):
            new = dataclasses.replace(new, t=target)
        umin, umax = float(new.u.values.min()), float(new.u.values.max())
        if umin < -BOUND_TOL or umax > 1 + BOUND_TOL:
            traj.bound_violations.append((new.t, umin, umax))
        if diagnostics:
            traj.diagnostics.append(
                basic_diagnostics(new, config.epsilon, new.t - state.t, levels=config.diag_levels, prev=state)
            )
        state = new
        if state.t >= target:
            traj.snapshots.append(state)
            pending.pop(0)
    return traj


def daper_run(
    u0: GridField,
    config: SimConfig,
    output_times: Sequence[float] | None = None,
    *,
    diagnostics: bool = True,
) -> Trajectory:
    """Same scheme driven by the s -> 0 reference model (-Delta) S + S = u, velocity grad S."""
    return run(u0, dataclasses.replace(config, model="daper"), output_times, diagnostics=diagnostics)


def duhamel_picard(
    u0: GridField,
    config: SimConfig,
    t_horizon: float,
    *,
    nodes: int = 64,
    tol: float = 1e-10,
    max_iter: int = 100,
    full_output: bool = False,
):
    """Fixed point of the mild formulation on [0, t_horizon].

    In coefficient space u_k' = -eps lambda_k u_k + D_k(u), with
    D_k = <g(u) grad L u, grad phi_k> the weak form of -div(g(u) grad L u).
    Moving the divergence onto the heat kernel this way leaves only the
    bounded factor (1 - exp(-eps dtau lambda_k)) / (eps lambda_k) per
    sub-interval, so no (t - tau)^(-1/2) singularity has to be integrated.
    D is frozen at the midpoint state of each of the ``nodes`` sub-intervals.

    Returns the solution at t_horizon, plus an info dict with the sequence of
    successive-iterate L-infinity differences when ``full_output`` is set.
    """
    if not t_horizon > 0:
        raise ValueError(f"t_horizon must be positive, got {t_horizon}")
    basis = build_basis(u0.domain)
    d = u0.domain
    axes = tuple(range(1, d.dimension + 1))
    ev = np.array(basis.eigenvalues)
    eps = config.epsilon
    dtau = t_horizon / nodes
    decay = np.exp(-eps * dtau * ev)
    weight = np.full_like(ev, dtau)
    nz = ev > 0
    weight[nz] = -np.expm1(-eps * dtau * ev[nz]) / (eps * ev[nz])
    symbol = velocity_symbol(basis, config.frac)

    def forcing(coeffs: np.ndarray) -> np.ndarray:
        field_ = SpectralField(coeffs, basis)
        u = to_grid(field_).values
        vel = gradient_at_midpoints(SpectralField(symbol * coeffs, basis))
        return weak_divergence([g(u) * v for v in vel], basis).coeffs

    U0 = np.array(to_spectral(u0, basis).coeffs)
    old = np.empty((nodes + 1,) + d.shape)
    old[0] = U0
    for m in range(nodes):
        old[m + 1] = decay * old[m]

    diffs: list[float] = []
    growth = 0
    for it in range(1, max_iter + 1):
        new = np.empty_like(old)
        new[0] = U0
        for m in range(nodes):
            new[m + 1] = decay * new[m] + weight * forcing(0.5 * (old[m] + old[m + 1]))
        stack = (new - old) / math.sqrt(d.cell_volume)
        diff = float(np.max(np.abs(fft.idctn(stack, type=2, norm="ortho", axes=axes))))
        diffs.append(diff)
        old = new
        if diff <= tol:
            break
        growth = growth + 1 if len(diffs) > 1 and diff > diffs[-2] else 0
        if growth >= 5:
            raise NonContractionError(
                f"Picard iteration does not contract on horizon {t_horizon!r}: differences {diffs[-6:]}"
            )
    u_final = to_grid(SpectralField(old[-1], basis))
    if full_output:
        return u_final, {"iterations": len(diffs), "diffs": diffs, "converged": diffs[-1] <= tol}
    return u_final
