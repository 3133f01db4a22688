"""Measurable forms of the discrete identities and estimates.

Every function returns a dimensionless number: for identities the defect
divided by a natural scale (usually the sum of absolute values of the terms
or the Cauchy-Schwarz bound), for inequalities the relative excess
``max(0, lhs - rhs) / rhs``.  A check passes when this number is at most
its tolerance.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .convection import (dual_cell_mass_balance, dual_mass_flux, trilinear_b,
                         trilinear_b_reconstructed, upwind_dissipation)
from .fields import (VelocityField, _jumps, gradient_inner, h1_inner, h1_norm, l2_inner,
                     l2_norm, random_divergence_free, random_pressure, random_velocity,
                     velocity_gradient)
from .interpolation import AnalyticField, cell_mean, fortin_interpolate
from .macgrid import MacGrid
from .spatial_ops import (ReconstructionWeights, assemble_divergence, assemble_gradient,
                          assemble_stiffness, assemble_velocity_mass, derivative_times_field,
                          divergence, divergence_scale, laplacian, pressure_gradient,
                          reconstruct, reconstruction_stability_constant)


def _ratio(defect: float, scale: float) -> float:
    defect = abs(defect)
    if scale == 0.0:
        return 0.0 if defect == 0.0 else np.inf
    return defect / scale


def excess(lhs: float, rhs: float) -> float:
    if lhs <= rhs:
        return 0.0
    return (lhs - rhs) / rhs if rhs > 0 else np.inf


# ---------------------------------------------------------------- geometry
def partition_defect(grid: MacGrid) -> float:
    worst = 0.0
    for i in range(grid.dim):
        worst = max(worst, _ratio(grid.dual_volume(i).sum() - grid.volume, grid.volume))
        for j in range(grid.dim):
            worst = max(worst, _ratio(grid.partition_volume(i, j).sum() - grid.volume,
                                      grid.volume))
    return worst


# ----------------------------------------------------------- linear operators
def duality_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    q = random_pressure(grid, rng)
    v = random_velocity(grid, rng)
    div, grad = divergence(v), pressure_gradient(q)
    scale = l2_norm(q) * l2_norm(div) + l2_norm(grad) * l2_norm(v)
    return _ratio(l2_inner(q, div) + l2_inner(grad, v), scale)


def laplacian_adjoint_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    u, v = random_velocity(grid, rng), random_velocity(grid, rng)
    lhs = l2_inner(laplacian(u), v)
    return _ratio(lhs - h1_inner(u, v), h1_norm(u) * h1_norm(v))


def gradient_identity_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    u, v = random_velocity(grid, rng), random_velocity(grid, rng)
    return _ratio(gradient_inner(u, v) - h1_inner(u, v), h1_norm(u) * h1_norm(v))


def divergence_partials_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    u = random_velocity(grid, rng)
    g = velocity_gradient(u)
    total = sum(g[i][i] for i in range(grid.dim))
    scale = float(divergence_scale(u).max())
    return _ratio(float(np.abs(total - divergence(u).values).max()), scale)


def diffusion_conservativity_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    """Fluxes phi_{sigma,eps} and phi_{sigma',eps} computed per dual face from each side."""
    u = random_velocity(grid, rng)
    worst = 0.0
    for i in range(grid.dim):
        df = grid.dual_faces(i)
        c = u.components[i].ravel()
        ok = (df.lower >= 0) & (df.upper >= 0)
        w = df.measure[ok] / df.distance[ok]
        a, b = c[df.lower[ok]], c[df.upper[ok]]
        from_lower = w * (a - b)
        from_upper = w * (b - a)
        scale = float(np.max(w * (np.abs(a) + np.abs(b)), initial=0.0))
        worst = max(worst, _ratio(float(np.max(np.abs(from_lower + from_upper), initial=0.0)),
                                  scale))
    return worst


def assembly_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    u = random_velocity(grid, rng)
    q = random_pressure(grid, rng)
    I = grid.interior_velocity
    M = assemble_velocity_mass(grid)
    a = (assemble_stiffness(grid) @ u.flat())[I]
    b = (M @ laplacian(u).flat())[I]
    d1 = _ratio(float(np.abs(a - b).max()), float(np.abs(a).max()))
    a = assemble_divergence(grid) @ u.flat()
    b = divergence(u).values.ravel()
    d2 = _ratio(float(np.abs(a - b).max()), float(divergence_scale(u).max()))
    a = assemble_gradient(grid) @ q.values.ravel()
    b = pressure_gradient(q).flat()
    d3 = _ratio(float(np.abs(a - b).max()), float(np.abs(b).max()))
    # measure-weighted transposition: M_v G = -(M_p D)^T on interior faces
    G = (M @ assemble_gradient(grid)).tocsr()[I]
    D = (sp.diags(grid.cell_volume.ravel()) @ assemble_divergence(grid)).tocsc()[:, I]
    d4 = _ratio(float(abs(G + D.T).max()), float(abs(G).max()))
    return max(d1, d2, d3, d4)


# ----------------------------------------------------------------- convection
def mass_balance_defect(grid: MacGrid, rng: np.random.Generator) -> float:
    u = random_divergence_free(grid, rng)
    worst = 0.0
    sums = dual_cell_mass_balance(u)
    for i in range(grid.dim):
        scale = np.zeros(grid.face_shape(i))
        for j in range(grid.dim):
            a = np.abs(dual_mass_flux(u, i, j))
            if i == j:
                pad = [(0, 0)] * grid.dim
                pad[j] = (1, 1)
                a = np.pad(a, pad)
            scale += np.take(a, np.arange(a.shape[j] - 1), axis=j) + np.take(
                a, np.arange(1, a.shape[j]), axis=j)
        worst = max(worst, _ratio(float(np.abs(sums[i]).max()), float(scale.max())))
    return worst


def trilinear_scale(u: VelocityField, v: VelocityField, w: VelocityField) -> float:
    """Sum over dual faces of |G| (|v_s| + |v_s'|) (|w_s| + |w_s'|), bounding every b(u, v, w)."""
    g = u.grid
    total = 0.0
    for i in range(g.dim):
        for j in range(g.dim):
            G = np.abs(dual_mass_flux(u, i, j))
            vs = _abs_pair(v.components[i], g, i, j)
            ws = _abs_pair(w.components[i], g, i, j)
            total += float(np.sum(G * vs * ws))
    return total


def _abs_pair(c: np.ndarray, g: MacGrid, i: int, j: int) -> np.ndarray:
    a = np.abs(c)
    if i == j:
        return np.take(a, np.arange(g.n[j]), axis=j) + np.take(a, np.arange(1, g.n[j] + 1), axis=j)
    pad = [(0, 0)] * g.dim
    pad[j] = (1, 1)
    a = np.pad(a, pad)
    return np.take(a, np.arange(g.n[j] + 1), axis=j) + np.take(a, np.arange(1, g.n[j] + 2), axis=j)


def skew_defects(grid: MacGrid, rng: np.random.Generator) -> dict:
    u = random_divergence_free(grid, rng)
    v, w = random_velocity(grid, rng), random_velocity(grid, rng)
    vv = trilinear_scale(u, v, v)
    vw = trilinear_scale(u, v, w) + trilinear_scale(u, w, v)
    up = trilinear_b(u, v, v, "upwind")
    return {
        "centred_vanish": _ratio(trilinear_b(u, v, v, "centred"), vv),
        "centred_skew": _ratio(trilinear_b(u, v, w) + trilinear_b(u, w, v), vw),
        "upwind_nonneg": max(0.0, -up) / vv if vv > 0 else 0.0,
        "upwind_dissipation": _ratio(up - upwind_dissipation(u, v), vv),
    }


def reformulation_defect(grid: MacGrid, rng: np.random.Generator, scheme: str) -> float:
    u = random_divergence_free(grid, rng)
    v, w = random_velocity(grid, rng), random_velocity(grid, rng)
    a = trilinear_b(u, v, w, scheme)
    b = trilinear_b_reconstructed(u, v, w, scheme)
    return _ratio(a - b, trilinear_scale(u, v, w))


# ----------------------------------------------------------- reconstructions
def integration_by_parts_defect(grid: MacGrid, rng: np.random.Generator,
                                boundary_weight: float = 0.0) -> float:
    """int d_j u v + int R u d_j v over every (i, j), relative to the absolute terms."""
    u, v = random_velocity(grid, rng), random_velocity(grid, rng)
    worst = 0.0
    for i in range(grid.dim):
        for j in range(grid.dim):
            weights = ReconstructionWeights.volume_weighted(grid, i, j, boundary_weight)
            lhs = derivative_times_field(u.components[i], v.components[i], grid, i, j)
            ru = reconstruct(u.components[i], weights, grid)
            dv = _jumps(v.components[i], j, i == j) / grid.dual_face_distance(i, j)
            rhs = float(np.sum(grid.partition_volume(i, j) * ru * dv))
            scale = float(np.sum(grid.partition_volume(i, j) * np.abs(ru * dv)))
            scale += _jump_abs_integral(u.components[i], v.components[i], grid, i, j)
            worst = max(worst, _ratio(lhs + rhs, scale))
    return worst


def _jump_abs_integral(u, v, grid, i, j) -> float:
    du = np.abs(_jumps(u, j, i == j)) / grid.dual_face_distance(i, j)
    return _abs_overlap_integral(du, np.abs(v), grid, i, j)


def _abs_overlap_integral(du_abs, v_abs, grid, i, j) -> float:
    if i == j:
        lo = np.take(v_abs, np.arange(grid.n[j]), axis=j)
        hi = np.take(v_abs, np.arange(1, grid.n[j] + 1), axis=j)
        return float(np.sum(du_abs * grid.cell_volume / 2.0 * (lo + hi)))
    pad = [(0, 0)] * grid.dim
    pad[j] = (1, 1)
    vp = np.pad(v_abs * grid.dual_volume(i) / 2.0, pad)
    lo = np.take(vp, np.arange(grid.n[j] + 1), axis=j)
    hi = np.take(vp, np.arange(1, grid.n[j] + 2), axis=j)
    return float(np.sum(du_abs * (lo + hi)))


def reconstruction_stability_excess(grid: MacGrid, rng: np.random.Generator) -> float:
    """||R v||_2 <= 2^{1/2} C_V ||v||_2 for random convex weights, every (i, j)."""
    worst = 0.0
    for i in range(grid.dim):
        v = rng.standard_normal(grid.face_shape(i))
        v[grid.face_exterior(i)] = 0.0
        norm_v = float(np.sqrt(np.sum(grid.dual_volume(i) * v * v)))
        for j in range(grid.dim):
            w = ReconstructionWeights(i, j, rng.uniform(0.0, 1.0, grid.partition_shape(i, j)))
            rv = reconstruct(v, w, grid)
            lhs = float(np.sqrt(np.sum(grid.partition_volume(i, j) * rv * rv)))
            cv = reconstruction_stability_constant(grid, i, j)
            worst = max(worst, excess(lhs, np.sqrt(2.0) * cv * norm_v))
    return worst


# ----------------------------------------------------------- interpolation
def polynomial_fields(dim: int):
    """Polynomial vector fields of degree <= 4 per variable (exact at Gauss order 3+)."""
    if dim == 2:
        div_free = AnalyticField(
            lambda x, t: (x[0] ** 2 * (1 - x[0]) ** 2 * (2 * x[1] - 6 * x[1] ** 2 + 4 * x[1] ** 3),
                          -(2 * x[0] - 6 * x[0] ** 2 + 4 * x[0] ** 3) * x[1] ** 2 * (1 - x[1]) ** 2),
            2, divergence=lambda x, t: np.zeros_like(x[0]), name="poly-curl")
        general = AnalyticField(
            lambda x, t: (x[1] * (1 - x[1]) * x[0] * (1 - x[0]), x[0] ** 3 - x[1] ** 2 * x[0]),
            2, divergence=lambda x, t: x[1] * (1 - x[1]) * (1 - 2 * x[0]) - 2 * x[1] * x[0],
            name="poly-general")
        return [div_free, general]
    general = AnalyticField(
        lambda x, t: (x[0] ** 2 * x[1] - x[2] ** 3, x[1] * x[2] ** 2 + x[0], x[0] * x[1] * x[2]),
        3, divergence=lambda x, t: 2 * x[0] * x[1] + x[2] ** 2 + x[0] * x[1],
        name="poly-general-3d")
    rot = AnalyticField(
        lambda x, t: (x[1] * x[2] ** 2, x[2] * x[0] ** 2, x[0] * x[1] ** 2),
        3, divergence=lambda x, t: np.zeros_like(x[0]), name="poly-div-free-3d")
    return [general, rot]


def fortin_divergence_defect(phi: AnalyticField, grid: MacGrid, order: int | None = None) -> float:
    """max |div_M P phi - P_M div phi| relative to max(1, flux scale); raw face means kept."""
    u = fortin_interpolate(phi, grid, order=order, homogeneous=False)
    d = AnalyticField(phi.divergence, phi.dim, vector=False, order=phi.order)
    pm = cell_mean(d, grid, order=order)
    # divergence of the raw interpolant including boundary fluxes
    div = np.zeros(grid.cell_shape)
    for i, c in enumerate(u.components):
        div += np.diff(grid.face_measure(i) * c, axis=i)
    div /= grid.cell_volume
    scale = max(1.0, float(divergence_scale(u).max()))
    return float(np.abs(div - pm.values).max()) / scale


# ------------------------------------------------------------------- norms
def poincare_excess(grid: MacGrid, rng: np.random.Generator) -> float:
    u = random_velocity(grid, rng)
    return excess(l2_norm(u), grid.diameter * h1_norm(u))
