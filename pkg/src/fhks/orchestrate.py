"""Run orchestration: single manifest runs, parameter sweeps and the invariant check suite."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .chemo import mass_relation_residual, solve_chemo
from .config import RunManifest, manifest_initial_data, render_config
from .diagnostics import (
    coarse_defect,
    conservation_residual,
    default_levels,
    l1_norm,
    layer_cake_residual,
    rho_identity_residual,
)
from .domain import GridField, build_basis, to_grid, to_spectral
from .evolution import NumericalFailure, SimConfig, Trajectory, initial_state, run, step
from .io import write_series, write_snapshot, write_table
from .operators import DENSE_CELL_CAP, apply, dense_oracle_power, make_multiplier

log = logging.getLogger(__name__)

SWEEP_HEADER = ("value", "mass", "l1_to_reference", "mass_relation_residual", "mass_factor", "defect", "status")
DEFECT_SAMPLES = 64


def _checked_run(u0: GridField, config: SimConfig, times=None, *, diagnostics: bool = True) -> Trajectory:
    traj = run(u0, config, times, diagnostics=diagnostics)
    if traj.bound_violations:
        t, lo, hi = traj.bound_violations[0]
        raise NumericalFailure(f"bound violation at t={t:.6g}: u in [{lo:.3e}, {hi:.3e}]", traj.final)
    return traj


def run_manifest(m: RunManifest, out_dir=None) -> Trajectory:
    """Run the manifest once and write the requested artifacts in a fixed order."""
    out = Path(out_dir if out_dir is not None else m.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = _checked_run(manifest_initial_data(m), m.config, m.output_times)
    (out / "manifest.cfg").write_text(render_config(m), encoding="utf-8")
    if "series" in m.outputs:
        write_series(traj, out / "series.csv", m.config.diag_levels)
    if "snapshots" in m.outputs:
        for i, state in enumerate(traj.snapshots):
            write_snapshot(state, out / f"snapshot_{i:04d}.fhks")
    return traj


@dataclass(frozen=True)
class SweepRow:
    value: float
    mass: float = math.nan
    l1_to_reference: float = math.nan
    mass_relation_residual: float = math.nan
    mass_factor: float = math.nan
    defect: float = math.nan
    status: str = "ok"

    def cells(self) -> tuple:
        return dataclasses.astuple(self)


def _with_axis(config: SimConfig, axis: str, value: float) -> SimConfig:
    if axis == "epsilon":
        return dataclasses.replace(config, epsilon=value)
    frac = dataclasses.replace(config.frac, **{axis: value})
    return dataclasses.replace(config, frac=frac)


def sweep(m: RunManifest, *, threads: int = 1) -> list[SweepRow]:
    """One row per axis value, computed in parallel and returned in axis order.

    The L1 reference is the s -> 0 model for the s-axis and the smallest
    epsilon for the epsilon-axis; the sigma-axis has none.
    """
    axis, values = m.sweep_axis, tuple(float(v) for v in m.sweep_values)
    if axis is None:
        raise ValueError("manifest has no sweep axis")
    if len(values) < 2:
        raise ValueError(f"a sweep needs at least 2 values, got {len(values)}")
    u0 = manifest_initial_data(m)
    times = np.linspace(0.0, m.config.t_end, DEFECT_SAMPLES + 1) if m.sweep_defect else None

    def one(config: SimConfig) -> Trajectory:
        return _checked_run(u0, config, times, diagnostics=False)

    def reference() -> Trajectory | None:
        if axis == "s":
            return one(dataclasses.replace(m.config, model="daper"))
        if axis == "epsilon":
            return one(_with_axis(m.config, axis, min(values)))
        return None

    def row(value: float, ref_future) -> SweepRow:
        try:
            config = _with_axis(m.config, axis, value)
            traj = one(config)
        except (NumericalFailure, ValueError) as exc:
            return SweepRow(value, status=f"failed: {exc}".replace(",", ";"))
        final = traj.final
        l1 = math.nan
        if ref_future is not None and ref_future.exception() is None:
            ref = ref_future.result()
            l1 = l1_norm(GridField(final.u.values - ref.final.u.values, u0.domain))
        defect = math.nan
        if m.sweep_defect:
            stack = np.stack([s.u.values for s in traj.snapshots])
            defect = coarse_defect(stack[1:], times[1:], u0.domain, m.defect_window, default_levels(64))
        return SweepRow(
            value,
            final.u.integral(),
            l1,
            mass_relation_residual(final.u, final.chemo),
            config.frac.mass_factor,
            defect,
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        # submitted first, so with one worker it finishes before any row waits on it
        ref_future = pool.submit(reference) if axis in ("s", "epsilon") else None
        rows = list(pool.map(lambda v: row(v, ref_future), values))
    if ref_future is not None and ref_future.exception() is not None:
        log.warning("reference run failed: %s", ref_future.exception())
    return rows


def write_sweep(rows: list[SweepRow], path) -> None:
    write_table(SWEEP_HEADER, [r.cells() for r in rows], path)


# -- invariant suite -------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def check_suite(m: RunManifest, *, seed: int | None = None) -> list[CheckResult]:
    """Quick invariant battery on the manifest's domain and parameters."""
    rng = np.random.default_rng(m.seed if seed is None else seed)
    d = m.domain
    basis = build_basis(d)
    frac = m.config.frac
    results: list[CheckResult] = []

    def record(name: str, tol: float, fn: Callable[[], float]) -> None:
        results.append(CheckResult(name, float(fn()), tol))

    fields = [GridField(rng.uniform(0.0, 1.0, d.shape), d) for _ in range(8)]

    if d.symbol_mode == "discrete" and math.prod(d.cells) <= DENSE_CELL_CAP:
        A = dense_oracle_power(d, frac.s)
        P = make_multiplier("power_s", basis, frac)

        def oracle_gap():
            errs = []
            for f in fields:
                spec = to_grid(apply(P, to_spectral(f, basis))).values.ravel()
                dense = A @ f.values.ravel()
                errs.append(np.linalg.norm(spec - dense) / np.linalg.norm(dense))
            return max(errs)

        record("fractional power vs dense oracle (relative L2)", 1e-10, oracle_gap)

    record(
        "mean relation of the chemoattractant",
        1e-12,
        lambda: max(mass_relation_residual(f, solve_chemo(f, frac, basis)) for f in fields),
    )
    k = default_levels(256)
    record("layer-cake identity", 1.0 / 256, lambda: max(layer_cake_residual(f, k) for f in fields))
    record("rho identity", 1.0 / 256, lambda: max(rho_identity_residual(f, k) for f in fields))

    u0 = manifest_initial_data(m)
    state = initial_state(u0, m.config)
    post = step(state, m.config)
    dt = post.t - state.t
    if m.config.splitting == "lie":
        # the residual mirrors the Lie step exactly
        record(
            "one-step conservation residual (L1)",
            1e-10,
            lambda: l1_norm(conservation_residual(state, post, dt, epsilon=m.config.epsilon, scheme=m.config.flux)),
        )
    record("one-step mass drift", 1e-12, lambda: abs(post.u.integral() - u0.integral()))
    record(
        "one-step bound excess",
        1e-8,
        lambda: max(0.0, -post.u.values.min(), post.u.values.max() - 1.0),
    )
    return results

