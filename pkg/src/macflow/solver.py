"""Saddle-point assembly and the steady/unsteady Stokes and Navier-Stokes solvers.

Unknowns are the interior face velocities, then the cell pressures, then one
Lagrange multiplier enforcing the volume-weighted zero-mean pressure gauge.
Momentum rows are multiplied by the dual-cell measures so that the gradient
block is exactly the negative transpose of the measure-weighted divergence.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .convection import ConvectionScheme, assemble_convection, convection_apply, trilinear_b
from .fields import (PressureField, TimeSeriesField, VelocityField, check_grid, h1_norm,
                     l2_norm)
from .interpolation import (AnalyticField, analytic_h1_squared, analytic_l2_squared,
                            dual_cell_mean, fortin_interpolate)
from .macgrid import MacGrid
from .spatial_ops import (assemble_divergence, assemble_stiffness, divergence, laplacian,
                          pressure_gradient, relative_divergence)


class SolverError(RuntimeError):
    pass


class PicardDivergenceError(SolverError):
    def __init__(self, message, velocity=None, pressure=None, report=None):
        super().__init__(message)
        self.velocity, self.pressure, self.report = velocity, pressure, report


@dataclass(frozen=True)
class SolverConfig:
    linear_solver: str = "direct"         # direct | iterative
    linear_tol: float = 1e-12              # iterative path only
    picard_tol: float = 1e-10
    picard_max_iter: int = 100
    convection: str = "centred"
    dt: float = 0.01
    final_time: float = 0.1
    gauge: str = "mean-multiplier"
    seed: int | None = None
    dual_norm_estimate: bool = False
    raise_on_divergence: bool = True

    def __post_init__(self):
        if self.linear_solver not in ("direct", "iterative"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        if self.linear_tol <= 0 or self.picard_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")
        if self.dt <= 0 or self.final_time < 0:
            raise ValueError("dt must be positive and final_time non-negative")
        if self.gauge != "mean-multiplier":
            raise ValueError(f"unsupported pressure gauge {self.gauge!r}")
        ConvectionScheme.parse(self.convection)

    @property
    def scheme(self) -> ConvectionScheme:
        return ConvectionScheme.parse(self.convection)

    @property
    def num_steps(self) -> int:
        return int(round(self.final_time / self.dt))


@dataclass
class SolveReport:
    kind: str = ""
    converged: bool = True
    picard_iterations: list[int] = field(default_factory=list)
    linear_solves: int = 0
    residual_history: list[dict] = field(default_factory=list)
    momentum_residual: float = 0.0
    divergence_residual: float = 0.0
    nonlinear_residual: float = 0.0
    pressure_mean: float = 0.0
    velocity_h1: float = 0.0
    velocity_l2: float = 0.0
    pressure_l2: float = 0.0
    energy_history: list[float] = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    seed: int | None = None
    wall_time: float = 0.0
    message: str = ""

    def scalars(self) -> dict:
        out = {
            "kind": self.kind, "converged": self.converged,
            "picard_iterations": sum(self.picard_iterations) if self.picard_iterations else 0,
            "linear_solves": self.linear_solves,
            "momentum_residual": self.momentum_residual,
            "divergence_residual": self.divergence_residual,
            "nonlinear_residual": self.nonlinear_residual,
            "pressure_mean": self.pressure_mean, "velocity_h1": self.velocity_h1,
            "velocity_l2": self.velocity_l2, "pressure_l2": self.pressure_l2,
            "steps": max(len(self.energy_history) - 1, 0),
            "seed": "none" if self.seed is None else self.seed,
            "wall_time": self.wall_time, "message": self.message,
        }
        for k, v in sorted(self.estimates.items()):
            out[f"estimate.{k}"] = v
        return out


# ------------------------------------------------------------------ assembly
@dataclass
class SaddleSystem:
    """Sparse blocks restricted to interior velocities (``A`` excludes convection)."""

    grid: MacGrid
    stiffness: sp.csr_matrix
    mass: sp.dia_matrix
    div_weighted: sp.csr_matrix       # B = M_p div_M
    mean_row: np.ndarray
    interior: np.ndarray
    factorizations: dict = field(default_factory=dict, repr=False)

    @classmethod
    def assemble(cls, grid: MacGrid) -> "SaddleSystem":
        I = grid.interior_velocity
        K = assemble_stiffness(grid)[I][:, I].tocsr()
        M = sp.diags(np.concatenate([grid.dual_volume(i).ravel()
                                     for i in range(grid.dim)])[I])
        D = assemble_divergence(grid)[:, I]
        B = (sp.diags(grid.cell_volume.ravel()) @ D).tocsr()
        return cls(grid, K, M, B, grid.cell_volume.ravel().copy(), I)

    @property
    def gradient_weighted(self) -> sp.csr_matrix:
        """M_v grad_E on interior faces, which equals -B^T."""
        return (-self.div_weighted.T).tocsr()

    def matrix(self, velocity_block) -> sp.csc_matrix:
        B = self.div_weighted
        m = sp.csr_matrix(self.mean_row.reshape(-1, 1))
        return sp.bmat([[velocity_block, -B.T, None],
                        [-B, None, m],
                        [None, m.T, None]], format="csc")

    def split(self, x: np.ndarray):
        nu = self.interior.size
        u = VelocityField.from_interior(self.grid, x[:nu])
        p = PressureField(self.grid, x[nu:nu + self.grid.num_cells].reshape(self.grid.cell_shape),
                          zero_mean=True)
        return u, p

    def rhs(self, momentum: np.ndarray) -> np.ndarray:
        return np.concatenate([momentum, np.zeros(self.grid.num_cells + 1)])


class _SaddleFactorization:
    """Direct solver for the bordered saddle system.

    The zero-mean row is dense and ruins the sparsity of a direct
    factorization, so the core system is factorized with one pressure cell
    regularised instead.  Because the right-hand side has no component along
    the constant-pressure kernel, the regularised solution satisfies the
    core equations with that cell at zero; removing the volume-weighted mean
    then gives exactly the bordered solution (with multiplier 0).
    """

    def __init__(self, system: "SaddleSystem", velocity_block):
        self.system = system
        B = system.div_weighted
        nc = system.grid.num_cells
        self.core = sp.bmat([[velocity_block, -B.T], [-B, None]], format="csc")
        pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(nc, nc))
        shift = sp.bmat([[sp.csr_matrix((velocity_block.shape[0],) * 2), None],
                         [None, pin]], format="csc")
        self._lu = spla.splu((self.core + shift).tocsc(), permc_spec="COLAMD")

    def solve(self, rhs: np.ndarray, refinements: int = 2) -> np.ndarray:
        b = rhs[:-1]
        y = self._lu.solve(b)
        for _ in range(refinements):
            y = y + self._lu.solve(b - self.core @ y)
        nu = self.system.interior.size
        p = y[nu:]
        m = self.system.mean_row
        y[nu:] = p - np.dot(m, p) / m.sum()
        return np.concatenate([y, [0.0]])


def _linear_solve(system: "SaddleSystem", velocity_block, rhs: np.ndarray,
                  config: SolverConfig) -> np.ndarray:
    if config.linear_solver == "direct":
        x = _SaddleFactorization(system, velocity_block).solve(rhs)
    else:
        matrix = system.matrix(velocity_block)
        ilu = spla.spilu(matrix, drop_tol=1e-6, fill_factor=20)
        prec = spla.LinearOperator(matrix.shape, ilu.solve)
        x, info = spla.gmres(matrix, rhs, M=prec, rtol=config.linear_tol, atol=0.0,
                             restart=200, maxiter=50)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solver breakdown: non-finite solution")
    return x


class StokesOperator:
    """Factorized steady Stokes system of one grid, reused for many right-hand sides."""

    _cache: dict = {}

    def __init__(self, grid: MacGrid):
        self.grid = grid
        self.system = SaddleSystem.assemble(grid)
        self._fact = _SaddleFactorization(self.system, self.system.stiffness)

    @classmethod
    def for_grid(cls, grid: MacGrid) -> "StokesOperator":
        key = grid.hash()
        if key not in cls._cache:
            if len(cls._cache) > 8:
                cls._cache.clear()
            cls._cache[key] = cls(grid)
        return cls._cache[key]

    def solve(self, f: VelocityField):
        s = self.system
        return s.split(self._fact.solve(s.rhs(s.mass @ f.flat()[s.interior])))


# ----------------------------------------------------------------- residuals
def _residuals(u, p, f, conv: VelocityField | None, mass_term: VelocityField | None):
    r = laplacian(u) + pressure_gradient(p) - f
    if conv is not None:
        r = r + conv
    if mass_term is not None:
        r = r + mass_term
    mom = max(float(np.abs(c[~u.grid.face_exterior(i)]).max(initial=0.0))
              for i, c in enumerate(r.components))
    div = float(np.abs(divergence(u).values).max())
    return mom, div


def _finish(report: SolveReport, u: VelocityField, p: PressureField) -> None:
    report.velocity_h1 = h1_norm(u)
    report.velocity_l2 = l2_norm(u)
    report.pressure_l2 = l2_norm(p)
    report.pressure_mean = p.mean()


# -------------------------------------------------------------------- steady
def solve_steady_stokes(grid: MacGrid, f: VelocityField, config: SolverConfig | None = None):
    config = config or SolverConfig()
    check_grid(grid, f)
    t0 = time.perf_counter()
    s = SaddleSystem.assemble(grid)
    rhs = s.rhs(s.mass @ f.flat()[s.interior])
    x = _linear_solve(s, s.stiffness, rhs, config)
    u, p = s.split(x)
    report = SolveReport(kind="steady-stokes", linear_solves=1, seed=config.seed)
    report.momentum_residual, report.divergence_residual = _residuals(u, p, f, None, None)
    _finish(report, u, p)
    report.estimates = _steady_estimate(grid, u, f)
    report.wall_time = time.perf_counter() - t0
    return u, p, report


def _steady_estimate(grid: MacGrid, u: VelocityField, f: VelocityField) -> dict:
    lhs = h1_norm(u)
    rhs = grid.diameter * l2_norm(f)
    return {"stability_lhs": lhs, "stability_rhs": rhs,
            "stability_holds": bool(lhs <= rhs * (1 + 1e-10))}


def _picard(grid, s: SaddleSystem, base_block, base_rhs, u_start, config, report, extra=None):
    """Oseen iterations u^{k+1} = solve(A + C(u^k)); returns the last iterate and a flag."""
    I = s.interior
    u_k = u_start
    p_k = PressureField.zeros(grid)
    for it in range(1, config.picard_max_iter + 1):
        C = assemble_convection(u_k, config.scheme)[I][:, I]
        x = _linear_solve(s, (base_block + C).tocsr(), base_rhs, config)
        report.linear_solves += 1
        u_new, p_k = s.split(x)
        incr = h1_norm(u_new - u_k)
        size = h1_norm(u_new)
        rel = incr / size if size > 0 else incr
        report.residual_history.append({"stage": extra or 0, "iteration": it,
                                        "h1_increment": incr, "relative_increment": rel})
        u_k = u_new
        if rel <= config.picard_tol or size == 0.0:
            return u_k, p_k, it, True
    return u_k, p_k, config.picard_max_iter, False


def solve_steady_ns(grid: MacGrid, f: VelocityField, config: SolverConfig | None = None):
    config = config or SolverConfig()
    t0 = time.perf_counter()
    s = SaddleSystem.assemble(grid)
    rhs = s.rhs(s.mass @ f.flat()[s.interior])
    u0 = VelocityField.zeros(grid)
    report = SolveReport(kind="steady-ns", seed=config.seed)
    u, p, its, ok = _picard(grid, s, s.stiffness, rhs, u0, config, report)
    report.picard_iterations.append(its)
    report.converged = ok
    conv = convection_apply(u, u, config.scheme)
    report.momentum_residual, report.divergence_residual = _residuals(u, p, f, conv, None)
    report.nonlinear_residual = report.momentum_residual
    _finish(report, u, p)
    report.estimates = _steady_estimate(grid, u, f)
    report.wall_time = time.perf_counter() - t0
    if not ok:
        report.message = f"Picard did not converge in {its} iterations"
        if config.raise_on_divergence:
            raise PicardDivergenceError(report.message, u, p, report)
    return u, p, report


# ------------------------------------------------------------------ unsteady
def step_unsteady(grid: MacGrid, u_n: VelocityField, f_slab: VelocityField,
                  config: SolverConfig | None = None, convection: bool = True,
                  system: SaddleSystem | None = None, report: SolveReport | None = None):
    """One implicit Euler step; Picard on the convecting velocity when ``convection``."""
    config = config or SolverConfig()
    s = system or SaddleSystem.assemble(grid)
    report = report if report is not None else SolveReport(kind="step")
    I = s.interior
    dt = config.dt
    A = (s.stiffness + s.mass / dt).tocsr()
    rhs = s.rhs(s.mass @ (f_slab.flat()[I] + u_n.flat()[I] / dt))
    if not convection:
        if config.linear_solver == "direct":
            key = ("unsteady-stokes", dt)
            if key not in s.factorizations:
                s.factorizations[key] = _SaddleFactorization(s, A)
            x = s.factorizations[key].solve(rhs)
        else:
            x = _linear_solve(s, A, rhs, config)
        report.linear_solves += 1
        u, p = s.split(x)
        report.picard_iterations.append(0)
        return u, p
    u, p, its, ok = _picard(grid, s, A, rhs, u_n, config, report,
                            extra=len(report.picard_iterations) + 1)
    report.picard_iterations.append(its)
    if not ok:
        report.converged = False
        report.message = f"Picard did not converge at step {len(report.picard_iterations)}"
        if config.raise_on_divergence:
            raise PicardDivergenceError(report.message, u, p, report)
    return u, p


def _initial_and_forcing(grid, u0, f, config):
    if isinstance(u0, AnalyticField):
        u_init = fortin_interpolate(u0, grid, t=0.0)
    else:
        u_init = u0 if u0 is not None else VelocityField.zeros(grid)
    dt = config.dt

    def forcing(n):  # f^{n+1} on the slab (t_n, t_{n+1})
        if f is None:
            return VelocityField.zeros(grid)
        if isinstance(f, AnalyticField):
            return dual_cell_mean(f, grid, (n * dt, (n + 1) * dt))
        return f(n) if callable(f) else f

    return u_init, forcing


def run_unsteady(grid: MacGrid, u0, f, config: SolverConfig | None = None,
                 convection: bool = True):
    """March ``config.num_steps`` implicit Euler steps from ``u^0 = fortin(u0)``.

    ``u0`` and ``f`` may be analytic fields (interpolated here) or discrete
    fields; ``f=None`` means no forcing.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    s = SaddleSystem.assemble(grid)
    u, forcing = _initial_and_forcing(grid, u0, f, config)
    series = TimeSeriesField(config.dt, [u], [None])
    kind = "unsteady-ns" if convection else "unsteady-stokes"
    report = SolveReport(kind=kind, seed=config.seed)
    report.energy_history.append(0.5 * l2_norm(u) ** 2)
    dt = config.dt
    cp2 = grid.diameter ** 2
    energy_ok = True
    sum_h1 = sum_f = 0.0
    dual_terms = []
    max_div = float(np.abs(divergence(u).values).max())
    fs = []
    for n in range(config.num_steps):
        fn = forcing(n)
        fs.append(fn)
        u_new, p = step_unsteady(grid, u, fn, config, convection, s, report)
        lhs = l2_norm(u_new) ** 2 + dt * h1_norm(u_new) ** 2
        rhs = l2_norm(u) ** 2 + dt * cp2 * l2_norm(fn) ** 2
        energy_ok &= bool(lhs <= rhs * (1 + 1e-10) + 1e-300)
        sum_h1 += dt * h1_norm(u_new) ** 2
        sum_f += dt * l2_norm(fn) ** 2
        if config.dual_norm_estimate:
            from .fields import dual_norm
            dual_terms.append(dual_norm((u_new - u) * (1.0 / dt)))
        max_div = max(max_div, float(np.abs(divergence(u_new).values).max()))
        u = u_new
        series.velocities.append(u)
        series.pressures.append(p)
        report.energy_history.append(0.5 * l2_norm(u) ** 2)
    if series.pressures[1:]:
        last_p = series.pressures[-1]
        conv = convection_apply(u, u, config.scheme) if convection else None
        mass = (u - series.velocities[-2]) * (1.0 / dt)
        report.momentum_residual, report.divergence_residual = _residuals(
            u, last_p, fs[-1], conv, mass)
        _finish(report, u, last_p)
    est = {
        "energy_step_inequality_holds": energy_ok,
        "summed_energy_lhs": l2_norm(u) ** 2 + sum_h1,
        "summed_energy_rhs": l2_norm(series.velocities[0]) ** 2 + cp2 * sum_f,
        "max_divergence": max_div,
        "pressure_l2l2": float(np.sqrt(sum(dt * l2_norm(q) ** 2 for q in series.pressures[1:]))),
    }
    est["forcing_l2l2_squared"] = sum_f
    if dual_terms:
        est["dual_norm_l43"] = float(sum(dt * d ** (4.0 / 3.0) for d in dual_terms) ** 0.75)
    report.estimates = est
    report.wall_time = time.perf_counter() - t0
    return series, report


def solve_unsteady_stokes(grid: MacGrid, u0, f, config: SolverConfig | None = None):
    """Unsteady Stokes run with the strong (time-derivative) estimate evaluated.

    The estimate compares ``sum dt ||d_t u||^2 + ||u^{M+1}||_1^2`` with
    ``||f||^2_{L2L2} + ||u0||^2_{H1}``; when ``u0`` and ``f`` are analytic the
    right-hand side uses their continuous norms, and the sharper discrete
    version (slab means, discrete norm of ``u^0``) is reported alongside.
    """
    config = config or SolverConfig()
    series, report = run_unsteady(grid, u0, f, config, convection=False)
    dt = config.dt
    vel = series.velocities
    incr = [(b - a) * (1.0 / dt) for a, b in zip(vel[:-1], vel[1:])]
    dtu = sum(dt * l2_norm(d) ** 2 for d in incr)
    lhs = dtu + h1_norm(vel[-1]) ** 2
    T_end = dt * (len(vel) - 1)
    f_disc = report.estimates["forcing_l2l2_squared"]
    rhs_discrete = f_disc + h1_norm(vel[0]) ** 2
    if isinstance(f, AnalyticField) and T_end > 0:
        f_cont = analytic_l2_squared(f, grid, (0.0, T_end))
    else:
        f_cont = f_disc
    if isinstance(u0, AnalyticField) and u0.gradient is not None:
        u0_h1 = analytic_h1_squared(u0, grid)
    else:
        u0_h1 = h1_norm(vel[0]) ** 2 + l2_norm(vel[0]) ** 2
    report.estimates.update({
        "strong_lhs": lhs,
        "strong_rhs": f_cont + u0_h1,
        "strong_holds": bool(lhs <= (f_cont + u0_h1) * (1 + 1e-10)),
        "strong_rhs_discrete": rhs_discrete,
        "strong_discrete_holds": bool(lhs <= rhs_discrete * (1 + 1e-10)),
        "max_increment_divergence": max((float(np.abs(divergence(d).values).max())
                                         for d in incr), default=0.0),
        "max_increment_divergence_relative": max((relative_divergence(d) for d in incr),
                                                 default=0.0),
    })
    return series, report
