"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``[criterion N] PASS|FAIL`` line; the lines are also
repeated in the pytest terminal summary.  Run standalone with
``python tests/test_acceptance.py`` to get just the summary.
"""
import math
import time

import numpy as np
import pytest

from macflow.convection import (dual_cell_mass_balance, dual_mass_flux, trilinear_b,
                                trilinear_b_reconstructed)
from macflow.fields import (VelocityField, h1_inner, h1_norm, l2_inner, l2_norm,
                            random_divergence_free, random_pressure, random_velocity)
from macflow.harness import run_convergence
from macflow.interpolation import dual_cell_mean
from macflow.macgrid import MacGrid, random_coords, random_grid, uniform_grid
from macflow.problems import get_problem
from macflow.solver import SolverConfig, run_unsteady, solve_steady_ns, solve_steady_stokes, \
    solve_unsteady_stokes
from macflow.spatial_ops import divergence, laplacian, pressure_gradient
from macflow.verification import (fortin_divergence_defect, integration_by_parts_defect,
                                  polynomial_fields, trilinear_scale)

RESULTS: list[str] = []
SEED = 20240611


def report(number, passed, detail):
    line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


def _random_pairs(count=100):
    """Seeded random grids alternating 2D/3D (up to 16 cells/axis in 2D, 8 in 3D)."""
    rng = np.random.default_rng(SEED)
    for k in range(count):
        dim = 2 if k % 2 == 0 else 3
        yield random_grid(rng, dim, max_cells=16 if dim == 2 else 8), rng


def test_criterion_01_duality():
    t0 = time.perf_counter()
    worst = 0.0
    for g, rng in _random_pairs():
        q, v = random_pressure(g, rng), random_velocity(g, rng)
        dv, gq = divergence(v), pressure_gradient(q)
        scale = l2_norm(q) * l2_norm(dv) + l2_norm(gq) * l2_norm(v)
        worst = max(worst, abs(l2_inner(q, dv) + l2_inner(gq, v)) / scale)
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-12 and elapsed < 10.0,
           f"max relative duality defect {worst:.2e} (tol 1e-12), 100 pairs in {elapsed:.2f}s")


def test_criterion_02_laplacian_adjointness():
    worst = 0.0
    for g, rng in _random_pairs():
        u, v = random_velocity(g, rng), random_velocity(g, rng)
        lhs, rhs = l2_inner(laplacian(u), v), h1_inner(u, v)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    report(2, worst <= 1e-12, f"max relative error {worst:.2e} (tol 1e-12)")


def test_criterion_03_dual_mass_balance():
    worst = 0.0
    for g, rng in _random_pairs():
        u = random_divergence_free(g, rng)
        scale = max(float(np.abs(dual_mass_flux(u, i, j)).max())
                    for i in range(g.dim) for j in range(g.dim))
        for i, s in enumerate(dual_cell_mass_balance(u)):
            worst = max(worst, float(np.abs(s[~g.face_exterior(i)]).max()) / scale)
    report(3, worst <= 1e-13, f"max per-dual-cell flux sum / max flux {worst:.2e} (tol 1e-13)")


def test_criterion_04_trilinear_structure():
    vanish = skew = upwind_neg = reform = 0.0
    for g, rng in _random_pairs():
        u = random_divergence_free(g, rng)
        v, w = random_velocity(g, rng), random_velocity(g, rng)
        svv = trilinear_scale(u, v, v)
        svw = trilinear_scale(u, v, w) + trilinear_scale(u, w, v)
        vanish = max(vanish, abs(trilinear_b(u, v, v)) / svv)
        skew = max(skew, abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) / svw)
        upwind_neg = max(upwind_neg, max(0.0, -trilinear_b(u, v, v, "upwind")) / svv)
        for scheme in ("centred", "upwind"):
            d = trilinear_b(u, v, w, scheme) - trilinear_b_reconstructed(u, v, w, scheme)
            reform = max(reform, abs(d) / trilinear_scale(u, v, w))
    ok = vanish <= 1e-11 and skew <= 1e-11 and upwind_neg <= 1e-12 and reform <= 1e-12
    report(4, ok, f"centred |b(u,v,v)| {vanish:.1e}, skew {skew:.1e} (tol 1e-11); "
                  f"upwind negativity {upwind_neg:.1e}, reformulation {reform:.1e} (tol 1e-12)")


def test_criterion_05_integration_by_parts():
    worst = 0.0
    for g, rng in _random_pairs():
        worst = max(worst, integration_by_parts_defect(g, rng, boundary_weight=0.0))
    report(5, worst <= 1e-12, f"max relative defect {worst:.2e} (tol 1e-12), volume weights")


def test_criterion_06_fortin_divergence():
    rng = np.random.default_rng(SEED)
    poly = 0.0
    for k in range(20):
        dim = 2 if k % 2 == 0 else 3
        g = MacGrid([random_coords(rng, int(rng.integers(2, 9)), 4.0) for _ in range(dim)])
        for phi in polynomial_fields(dim):
            poly = max(poly, fortin_divergence_defect(phi, g))
    trig = 0.0
    for name in ("stokes-ms", "taylor-green"):
        phi = get_problem(name).velocity
        for n in (4, 8, 16):
            for _ in range(3):
                g = MacGrid([random_coords(rng, n, 4.0), random_coords(rng, n, 4.0)])
                trig = max(trig, fortin_divergence_defect(phi, g, order=5))
    report(6, poly <= 1e-12 and trig <= 1e-8,
           f"polynomial {poly:.1e} (tol 1e-12); trigonometric, Gauss order 5, "
           f"4-16 cells/axis {trig:.1e} (tol 1e-8)")


def test_criterion_07_stability_bound():
    rng = np.random.default_rng(SEED)
    worst = -np.inf
    solves = 0
    for k in range(20):
        dim = 2 if k % 4 else 3
        g = random_grid(rng, dim, max_cells=12 if dim == 2 else 5)
        f = random_velocity(g, rng)
        for solve in (solve_steady_stokes, solve_steady_ns):
            cfg = SolverConfig(convection="upwind" if k % 2 else "centred")
            u, _, rep = solve(g, f, cfg)
            if rep.converged:
                solves += 1
                worst = max(worst, h1_norm(u) / (g.diameter * l2_norm(f)))
    for name in ("poly-cavity", "stokes-ms"):
        prob = get_problem(name)
        g = uniform_grid((24, 24))
        for solve, conv in ((solve_steady_stokes, False), (solve_steady_ns, True)):
            f = dual_cell_mean(prob.forcing(conv), g)
            u, _, rep = solve(g, f)
            solves += 1
            worst = max(worst, h1_norm(u) / (g.diameter * l2_norm(f)))
    report(7, worst <= 1 + 1e-10,
           f"max ||u||_1 / (diam ||f||) = {worst:.4f} over {solves} converged solves "
           "(bound 1 + 1e-10)")


@pytest.mark.parametrize("scheme", ["centred", "upwind"])
def test_criterion_08_energy_dissipation(scheme):
    g = uniform_grid((32, 32))
    u0 = get_problem("taylor-green", 2.0).velocity
    cfg = SolverConfig(dt=0.002, final_time=0.1, convection=scheme)
    assert cfg.num_steps == 50
    series, rep = run_unsteady(g, u0, None, cfg)
    norms = np.array([l2_norm(v) for v in series.velocities])
    monotone = bool(np.all(np.diff(norms) <= 0.0))
    lhs = l2_norm(series.velocities[-1]) ** 2 + sum(cfg.dt * h1_norm(v) ** 2
                                                    for v in series.velocities[1:])
    rhs = l2_norm(series.velocities[0]) ** 2
    report(8, monotone and lhs <= rhs,
           f"{scheme}: ||u^n|| non-increasing over 50 steps on 32x32 = {monotone}; "
           f"summed {lhs:.6f} <= ||u0||^2 {rhs:.6f}")


def test_criterion_09_unsteady_stokes_estimates():
    prob = get_problem("taylor-green")
    pressures, details, holds = [], [], True
    for n in (16, 32):
        g = uniform_grid((n, n))
        cfg = SolverConfig(dt=0.25 / n, final_time=0.1)
        cfg = SolverConfig(dt=0.1 / math.ceil(0.1 / cfg.dt), final_time=0.1)
        _, rep = solve_unsteady_stokes(g, prob.velocity, prob.stokes_forcing, cfg)
        est = rep.estimates
        holds &= bool(est["strong_holds"])
        pressures.append(est["pressure_l2l2"])
        details.append(f"n={n}: {est['strong_lhs']:.3f} <= {est['strong_rhs']:.3f}")
    drift = abs(pressures[1] - pressures[0]) / pressures[0]
    ok = holds and all(map(math.isfinite, pressures)) and drift <= 0.05
    report(9, ok, f"strong estimate {'; '.join(details)}; ||p||_L2L2 "
                  f"{pressures[0]:.4f} -> {pressures[1]:.4f} (change {drift:.1%}, tol 5%)")


def _orders(table, column):
    return [o for o in table.orders(column)]


def test_criterion_10_convergence_rates():
    t0 = time.perf_counter()
    lines, ok = [], True
    for equations in ("stokes", "navier-stokes"):
        uni = run_convergence("stokes-ms", "centred", levels=4, equations=equations)
        gr = run_convergence("stokes-ms", "centred", levels=4, equations=equations,
                             grading=1.2)
        l2 = _orders(uni, "l2")
        h1 = _orders(gr, "h1")
        good = uni.complete and gr.complete and all(1.7 <= o <= 2.3 for o in l2) \
            and all(o >= 0.9 for o in h1)
        ok &= good
        lines.append(f"{equations}: uniform L2 orders {', '.join(f'{o:.2f}' for o in l2)}; "
                     f"graded H1 orders {', '.join(f'{o:.2f}' for o in h1)}")
    uns = run_convergence("taylor-green", "centred", levels=3, unsteady=True, dt_factor=0.25)
    combined = [r.combined for r in uns.rows]
    dec = uns.complete and all(b < a for a, b in zip(combined, combined[1:]))
    ok &= dec
    lines.append("unsteady NS combined error " + " > ".join(f"{c:.4f}" for c in combined))
    report(10, ok, "; ".join(lines) + f" [{time.perf_counter() - t0:.0f}s]")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
