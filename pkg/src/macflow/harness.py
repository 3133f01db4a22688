"""Verification suites, convergence studies and single runs."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import io as mio
from .fields import (VelocityField, h1_norm, l2_norm, random_divergence_free,
                     random_velocity)
from .interpolation import cell_mean, dual_cell_mean, fortin_interpolate
from .macgrid import MacGrid, graded_coords, grid_text, random_coords, read_grid_file, uniform_grid
from .problems import get_problem, problem_names
from .solver import (SolverConfig, solve_steady_ns, solve_steady_stokes, run_unsteady,
                     solve_unsteady_stokes)
from . import verification as ver


# ------------------------------------------------------------------ catalog
CATALOG: dict[str, str] = {
    "grid-partition": "dual cells and (i,j) partitions tile the domain",
    "div-grad-duality": "discrete divergence/gradient duality",
    "laplacian-adjointness": "Laplacian paired with v equals the H1 inner product",
    "gradient-h1-identity": "integral of grad u : grad v equals the H1 inner product",
    "divergence-partials": "div_M u equals the sum of the discrete partials",
    "diffusion-conservativity": "diffusion flux is conservative across dual faces",
    "assembly-crosscheck": "assembled matrices equal matrix-free operators",
    "dual-mass-balance": "dual-cell mass balance for divergence-free u",
    "b-centred-skew": "centred trilinear form is skew-symmetric",
    "b-upwind-nonneg": "upwind trilinear form is nonnegative",
    "b-reformulation": "flux form of b equals reconstruction form",
    "reconstruction-stability": "L2 stability of reconstructions",
    "integration-by-parts": "discrete integration by parts with volume weights",
    "fortin-divergence": "Fortin interpolation preserves the divergence",
    "poincare": "discrete Poincare inequality",
    "steady-stability": "steady stability estimate",
    "energy-estimate": "unsteady energy estimate",
    "stokes-strong-estimate": "unsteady Stokes time-derivative estimate",
}

TOL_IDENTITY = 1e-12


@dataclass
class CheckRecord:
    name: str
    anchor: str
    grids: int
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)


@dataclass
class VerifySuiteResult:
    seed: int
    records: list[CheckRecord] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.missing and all(r.passed for r in self.records)

    def rows(self) -> list[dict]:
        return [{"check": r.name, "anchor": r.anchor, "grids": r.grids,
                 "max_violation": r.max_violation, "tolerance": r.tolerance,
                 "status": "pass" if r.passed else "fail"}
                for r in sorted(self.records, key=lambda r: r.name)]

    def to_csv(self) -> str:
        return mio.rows_csv(self.rows(), ["check", "anchor", "grids", "max_violation",
                                          "tolerance", "status"])


# A check takes (grid, rng) and returns {name: violation}; tolerances per name.
_REGISTRY: dict[str, tuple[Callable, dict[str, float], int]] = {}


def register(tolerances: dict[str, float], max_cells_3d: int = 16):
    def deco(fn):
        for name in tolerances:
            _REGISTRY[name] = (fn, tolerances, max_cells_3d)
        return fn
    return deco


def registered_checks() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


@register({"grid-partition": TOL_IDENTITY})
def _check_partition(grid, rng):
    return {"grid-partition": ver.partition_defect(grid)}


@register({"div-grad-duality": TOL_IDENTITY, "laplacian-adjointness": TOL_IDENTITY,
           "gradient-h1-identity": TOL_IDENTITY, "divergence-partials": 1e-13,
           "diffusion-conservativity": 0.0, "assembly-crosscheck": TOL_IDENTITY})
def _check_linear(grid, rng):
    return {"div-grad-duality": ver.duality_defect(grid, rng),
            "laplacian-adjointness": ver.laplacian_adjoint_defect(grid, rng),
            "gradient-h1-identity": ver.gradient_identity_defect(grid, rng),
            "divergence-partials": ver.divergence_partials_defect(grid, rng),
            "diffusion-conservativity": ver.diffusion_conservativity_defect(grid, rng),
            "assembly-crosscheck": ver.assembly_defect(grid, rng)}


@register({"dual-mass-balance": 1e-13, "b-centred-skew": 1e-11, "b-upwind-nonneg": 1e-12,
           "b-reformulation": TOL_IDENTITY})
def _check_convection(grid, rng):
    sk = ver.skew_defects(grid, rng)
    return {"dual-mass-balance": ver.mass_balance_defect(grid, rng),
            "b-centred-skew": max(sk["centred_vanish"], sk["centred_skew"]),
            "b-upwind-nonneg": max(sk["upwind_nonneg"], sk["upwind_dissipation"]),
            "b-reformulation": max(ver.reformulation_defect(grid, rng, "centred"),
                                   ver.reformulation_defect(grid, rng, "upwind"))}


@register({"reconstruction-stability": 0.0, "integration-by-parts": TOL_IDENTITY,
           "poincare": 0.0})
def _check_reconstruction(grid, rng):
    return {"reconstruction-stability": ver.reconstruction_stability_excess(grid, rng),
            "integration-by-parts": ver.integration_by_parts_defect(grid, rng),
            "poincare": ver.poincare_excess(grid, rng)}


@register({"fortin-divergence": TOL_IDENTITY})
def _check_fortin(grid, rng):
    return {"fortin-divergence": max(ver.fortin_divergence_defect(phi, grid)
                                     for phi in ver.polynomial_fields(grid.dim))}


@register({"steady-stability": 1e-10, "energy-estimate": 1e-10,
           "stokes-strong-estimate": 1e-10}, max_cells_3d=6)
def _check_solvers(grid, rng):
    f = random_velocity(grid, rng)
    u, _, _ = solve_steady_stokes(grid, f)
    stab = ver.excess(h1_norm(u), grid.diameter * l2_norm(f))
    cfg = SolverConfig(dt=0.05, final_time=0.15, convection="upwind")
    u0 = random_divergence_free(grid, rng)
    _, rep = run_unsteady(grid, u0, None, cfg)
    e = np.asarray(rep.energy_history)
    mono = float(np.max(np.diff(e) / e[:-1], initial=0.0)) if e[0] > 0 else 0.0
    energy = max(mono, 0.0, ver.excess(rep.estimates["summed_energy_lhs"],
                                       rep.estimates["summed_energy_rhs"]))
    _, srep = solve_unsteady_stokes(grid, u0, random_velocity(grid, rng),
                                    SolverConfig(dt=0.05, final_time=0.15))
    strong = ver.excess(srep.estimates["strong_lhs"], srep.estimates["strong_rhs_discrete"])
    return {"steady-stability": stab, "energy-estimate": energy,
            "stokes-strong-estimate": strong}


def _random_grid_of_size(rng, dim: int, size: int) -> MacGrid:
    coords = []
    for _ in range(dim):
        length = float(rng.uniform(0.5, 2.0))
        coords.append(random_coords(rng, size, 4.0, 0.0, length))
    return MacGrid(coords)


def run_verify(seed: int = 42, sizes=(4, 8, 16), dims=(2,), samples: int = 2,
               checks: list[str] | None = None) -> VerifySuiteResult:
    """Run the verification catalog on seeded random non-uniform grids.

    For every dimension and size ``samples`` grids are drawn; each check
    reports the worst violation over its grids.
    """
    t0 = time.perf_counter()
    result = VerifySuiteResult(seed=seed)
    result.missing = [name for name in CATALOG if name not in _REGISTRY]
    sizes = [int(s) for s in sizes]
    if any(s < 2 for s in sizes):
        raise ValueError("sizes must be >= 2 cells per axis")
    for d in dims:
        if d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {d}")
    if not sizes or not dims:
        result.wall_time = time.perf_counter() - t0
        return result
    wanted = set(checks) if checks else set(CATALOG)
    funcs = []
    for name in sorted(_REGISTRY):
        fn, tols, cap = _REGISTRY[name]
        if any(n in wanted for n in tols) and (fn, cap) not in [(f, c) for f, _, c in funcs]:
            funcs.append((fn, tols, cap))
    worst: dict[str, list] = {}
    for fn, tols, cap in funcs:
        # one independent stream per check function keeps results order-independent
        stream = np.random.default_rng([seed, zlib_crc(fn.__name__)])
        for d in dims:
            for size in sizes:
                n = min(size, cap) if d == 3 else size
                for _ in range(samples):
                    grid = _random_grid_of_size(stream, d, n)
                    for name, value in fn(grid, stream).items():
                        if name not in wanted:
                            continue
                        rec = worst.setdefault(name, [0, 0.0])
                        rec[0] += 1
                        rec[1] = max(rec[1], float(value))
    for name, (count, value) in worst.items():
        tol = _REGISTRY[name][1][name]
        result.records.append(CheckRecord(name, CATALOG[name], count, value, tol))
    result.records.sort(key=lambda r: r.name)
    result.wall_time = time.perf_counter() - t0
    return result


def zlib_crc(text: str) -> int:
    import zlib
    return zlib.crc32(text.encode())


# -------------------------------------------------------------- convergence
@dataclass
class ConvergenceRow:
    h: float
    dt: float | None
    cells: int
    error_l2: float
    error_h1: float
    error_p: float
    order_l2: float | None = None
    order_h1: float | None = None
    order_p: float | None = None

    @property
    def combined(self) -> float:
        return self.error_l2 + self.error_h1 + self.error_p


@dataclass
class ConvergenceTable:
    problem: str
    scheme: str
    equations: str
    grading: float
    rows: list[ConvergenceRow] = field(default_factory=list)
    complete: bool = True
    message: str = ""

    def add(self, row: ConvergenceRow) -> None:
        if self.rows:
            prev = self.rows[-1]
            if not row.h < prev.h:
                raise ValueError("mesh size must decrease down the table")
            r = math.log(prev.h / row.h)
            row.order_l2 = observed_order(prev.error_l2, row.error_l2, r)
            row.order_h1 = observed_order(prev.error_h1, row.error_h1, r)
            row.order_p = observed_order(prev.error_p, row.error_p, r)
        self.rows.append(row)

    def orders(self, column: str) -> list[float]:
        return [getattr(r, f"order_{column}") for r in self.rows[1:]]

    def to_csv(self) -> str:
        unsteady = any(r.dt is not None for r in self.rows)
        cols = ["h", *(["dt"] if unsteady else []), "cells", "error_l2", "error_h1", "error_p"]
        if len(self.rows) > 1:
            cols += ["order_l2", "order_h1", "order_p"]
        rows = []
        for r in self.rows:
            d = {"h": r.h, "dt": r.dt, "cells": r.cells, "error_l2": r.error_l2,
                 "error_h1": r.error_h1, "error_p": r.error_p,
                 "order_l2": "" if r.order_l2 is None else r.order_l2,
                 "order_h1": "" if r.order_h1 is None else r.order_h1,
                 "order_p": "" if r.order_p is None else r.order_p}
            rows.append(d)
        return mio.rows_csv(rows, cols)


def observed_order(e_coarse: float, e_fine: float, log_ratio: float) -> float:
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    return math.log(e_coarse / e_fine) / log_ratio


def study_grid(n: int, grading: float = 1.0, base: int = 8) -> MacGrid:
    """Unit-square grid with ``n`` cells per axis; geometric grading ``grading`` if not 1."""
    if grading == 1.0:
        return uniform_grid((n, n))
    c = graded_coords(n, grading, base=min(base, n))
    return MacGrid([c, c])


def steady_errors(problem, grid, u, p):
    ue = fortin_interpolate(problem.velocity, grid)
    pe = cell_mean(problem.pressure, grid).projected()
    return l2_norm(u - ue), h1_norm(u - ue), l2_norm(p - pe)


def run_convergence(problem: str, scheme: str = "centred", levels: int = 4,
                    unsteady: bool | None = None, dt_factor: float = 0.25,
                    grading: float = 1.0, base: int = 8, equations: str = "navier-stokes",
                    amplitude: float = 1.0) -> ConvergenceTable:
    """Solve on ``levels`` grids of ``base * 2^k`` cells per axis and tabulate errors.

    Steady errors compare with the face means (velocity) and zero-mean cell
    means (pressure) of the exact solution.  Unsteady errors are discrete
    L2-in-time norms over the time levels with ``dt = dt_factor * h``
    adjusted down so that the final time is hit exactly.
    """
    if equations not in ("stokes", "navier-stokes"):
        raise ValueError(f"unknown equations {equations!r}")
    prob = get_problem(problem, amplitude)
    unsteady = prob.unsteady if unsteady is None else unsteady
    convection = equations == "navier-stokes"
    table = ConvergenceTable(problem, scheme, equations, grading)
    for k in range(levels):
        n = base * 2 ** k
        grid = study_grid(n, grading, base)
        try:
            if not unsteady:
                f = dual_cell_mean(prob.forcing(convection), grid)
                cfg = SolverConfig(convection=scheme)
                if convection:
                    u, p, _ = solve_steady_ns(grid, f, cfg)
                else:
                    u, p, _ = solve_steady_stokes(grid, f, cfg)
                el2, eh1, ep = steady_errors(prob, grid, u, p)
                table.add(ConvergenceRow(grid.h_mesh, None, grid.num_cells, el2, eh1, ep))
            else:
                T = prob.final_time
                steps = max(1, math.ceil(T / (dt_factor * grid.h_mesh)))
                dt = T / steps
                cfg = SolverConfig(convection=scheme, dt=dt, final_time=T)
                runner = run_unsteady if convection else (
                    lambda g, a, b, c, convection=False: solve_unsteady_stokes(g, a, b, c))
                series, _ = runner(grid, prob.velocity, prob.forcing(convection), cfg)
                el2 = eh1 = ep = 0.0
                for m in range(1, len(series)):
                    t = m * dt
                    ue = fortin_interpolate(prob.velocity, grid, t=t)
                    pe = cell_mean(prob.pressure, grid, t=t).projected()
                    e = series.velocities[m] - ue
                    el2 += dt * l2_norm(e) ** 2
                    eh1 += dt * h1_norm(e) ** 2
                    ep += dt * l2_norm(series.pressures[m] - pe) ** 2
                table.add(ConvergenceRow(grid.h_mesh, dt, grid.num_cells, math.sqrt(el2),
                                         math.sqrt(eh1), math.sqrt(ep)))
        except Exception as exc:  # a failed level ends the study with a partial table
            table.complete = False
            table.message = f"level {k} ({n} cells per axis) failed: {exc}"
            break
    return table


# ----------------------------------------------------------------- single run
@dataclass
class RunResult:
    grid: MacGrid
    velocity: VelocityField
    pressure: object
    report: object
    files: list[Path] = field(default_factory=list)


def run_single(problem: str | None = None, grid_file=None, scheme: str = "centred",
               out_dir=None, equations: str = "navier-stokes", cells: int = 32,
               amplitude: float = 1.0, dt: float | None = None,
               final_time: float | None = None) -> RunResult:
    """One solve on a catalog problem and/or a grid file; optional CSV dumps.

    With only a grid file the forcing is zero.  Unsteady problems march to
    their final time and dump the last time level plus the energy history.
    """
    if problem is None and grid_file is None:
        raise ValueError("need a problem or a grid file")
    grid = read_grid_file(grid_file) if grid_file is not None else uniform_grid((cells, cells))
    prob = get_problem(problem, amplitude) if problem is not None else None
    convection = equations == "navier-stokes"
    cfg_kw = {"convection": scheme}
    if prob is not None and prob.dim != grid.dim:
        raise ValueError(f"problem {problem} is {prob.dim}D but the grid is {grid.dim}D")
    if prob is not None and prob.unsteady:
        T = prob.final_time if final_time is None else final_time
        step = dt if dt is not None else min(T, 0.25 * grid.h_mesh) if T > 0 else 0.01
        steps = max(1, math.ceil(T / step)) if T > 0 else 0
        cfg = SolverConfig(dt=(T / steps if steps else step), final_time=T, **cfg_kw)
        if convection:
            series, report = run_unsteady(grid, prob.velocity, prob.ns_forcing, cfg)
        else:
            series, report = solve_unsteady_stokes(grid, prob.velocity, prob.stokes_forcing, cfg)
        u = series.velocities[-1]
        p = series.pressures[-1] if series.pressures[-1] is not None else None
        if p is None:
            from .fields import PressureField
            p = PressureField.zeros(grid)
    else:
        if prob is not None:
            f = dual_cell_mean(prob.forcing(convection), grid)
        else:
            f = VelocityField.zeros(grid)
        cfg = SolverConfig(**cfg_kw)
        solve = solve_steady_ns if convection else solve_steady_stokes
        u, p, report = solve(grid, f, cfg)
    result = RunResult(grid, u, p, report)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "grid.txt").write_text(grid_text(grid), encoding="utf-8", newline="\n")
        result.files = [out / "grid.txt",
                        mio.write_field_csv(u, out / "velocity.csv"),
                        mio.write_field_csv(p, out / "pressure.csv"),
                        mio.write_report(report, out / "report.txt")]
        (out / "residuals.csv").write_text(mio.residual_history_csv(report), encoding="utf-8",
                                           newline="\n")
        result.files.append(out / "residuals.csv")
        if report.energy_history:
            (out / "energy.csv").write_text(mio.energy_history_csv(report, cfg.dt),
                                            encoding="utf-8", newline="\n")
            result.files.append(out / "energy.csv")
    return result


__all__ = ["CATALOG", "CheckRecord", "VerifySuiteResult", "ConvergenceRow", "ConvergenceTable",
           "RunResult", "run_verify", "run_convergence", "run_single", "registered_checks",
           "problem_names", "study_grid", "observed_order"]
