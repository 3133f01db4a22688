"""Dual-face mass fluxes, the convection operator and the trilinear form."""
from __future__ import annotations

from enum import Enum

import numpy as np
import scipy.sparse as sp

from .fields import VelocityField, _jumps, _same_grid
from .macgrid import MacGrid
from .spatial_ops import ReconstructionWeights, reconstruct


class ConvectionScheme(str, Enum):
    CENTRED = "centred"
    UPWIND = "upwind"

    @classmethod
    def parse(cls, value) -> "ConvectionScheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key == "centered":
            key = "centred"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown convection scheme {value!r} (centred|upwind)") from None


def _pad_along(a: np.ndarray, axis: int, before: int = 1, after: int = 1) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[axis] = (before, after)
    return np.pad(a, pad)


def _neighbours(a: np.ndarray, axis: int, count: int):
    """Consecutive pairs along ``axis``: ``(a[:count], a[1:count+1])``."""
    return np.take(a, np.arange(count), axis=axis), np.take(a, np.arange(1, count + 1), axis=axis)


def dual_mass_flux(u: VelocityField, i: int, j: int) -> np.ndarray:
    """|eps| u_{sigma,eps} over the (i, j) partition, oriented in the +e_j direction.

    Seen from the upper dual cell the flux is the exact negation.  Boundary
    dual faces normal to a wall carry zero flux since the normal velocity
    vanishes there.
    """
    g = u.grid
    if not (0 <= i < g.dim and 0 <= j < g.dim):
        raise IndexError(f"no (i, j) = ({i}, {j}) partition in dimension {g.dim}")
    a = g.face_measure(j) * u.components[j]
    if i == j:
        lo, hi = _neighbours(a, j, g.n[j])
        return 0.5 * (lo + hi)
    lo, hi = _neighbours(_pad_along(a, i), i, g.n[i] + 1)
    return 0.5 * (lo + hi)


def mass_flux_weights(grid: MacGrid, i: int, j: int) -> ReconstructionWeights:
    """Weights of the convex combination of u_j that gives u_{sigma,eps} on the (i, j) partition.

    The returned weights act on component ``j`` over its ``(j, i)`` partition,
    which is the same set of volumes.
    """
    if i == j:
        return ReconstructionWeights.constant(grid, j, i, 0.5, variant="mass-flux")
    hi_ = grid.h[i]
    lower_w = np.concatenate(([0.0], hi_)) / (2.0 * grid.dual_h[i])
    shape = [1] * grid.dim
    shape[i] = -1
    alpha = np.broadcast_to(lower_w.reshape(shape), grid.partition_shape(j, i)).copy()
    ext = grid.partition_exterior(j, i)
    alpha[ext] = 1.0  # a boundary element sees a single adjacent face of u_j
    return ReconstructionWeights(j, i, np.clip(alpha, 0.0, 1.0), "mass-flux")


def convected_values(v: np.ndarray, flux: np.ndarray, grid: MacGrid, i: int, j: int,
                     scheme: ConvectionScheme) -> np.ndarray:
    """v*_eps over the (i, j) partition."""
    if scheme is ConvectionScheme.CENTRED:
        w = ReconstructionWeights.centred(grid, i, j)
    else:
        w = ReconstructionWeights.upwind(grid, i, j, flux)
    return reconstruct(v, w, grid)


def _flux_divergence(flux: np.ndarray, grid: MacGrid, i: int, j: int) -> np.ndarray:
    """Sum of outgoing fluxes of every dual cell of E^(i) across its faces normal to e_j."""
    if i == j:
        flux = _pad_along(flux, j)
    return np.diff(flux, axis=j)


def convection_apply(u: VelocityField, v: VelocityField, scheme="centred") -> VelocityField:
    """C_E(u) v on every dual cell; exterior faces are set to zero."""
    g = _same_grid(u, v)
    scheme = ConvectionScheme.parse(scheme)
    out = []
    for i in range(g.dim):
        acc = np.zeros(g.face_shape(i))
        for j in range(g.dim):
            G = dual_mass_flux(u, i, j)
            vs = convected_values(v.components[i], G, g, i, j, scheme)
            acc += _flux_divergence(G * vs, g, i, j)
        acc /= g.dual_volume(i)
        acc[g.face_exterior(i)] = 0.0
        out.append(acc)
    return VelocityField(g, tuple(out))


def trilinear_b(u: VelocityField, v: VelocityField, w: VelocityField, scheme="centred") -> float:
    g = _same_grid(u, v, w)
    c = convection_apply(u, v, scheme)
    return float(sum(np.sum(g.dual_volume(i) * c.components[i] * w.components[i])
                     for i in range(g.dim)))


def trilinear_b_reconstructed(u: VelocityField, v: VelocityField, w: VelocityField,
                              scheme="centred") -> float:
    """-sum_ij int R(v_i) R(u_j) d_j w_i, the reconstruction/gradient form of b."""
    g = _same_grid(u, v, w)
    scheme = ConvectionScheme.parse(scheme)
    total = 0.0
    for i in range(g.dim):
        for j in range(g.dim):
            uj = reconstruct(u.components[j], mass_flux_weights(g, i, j), g)
            flux = g.dual_face_measure(i, j) * uj
            vs = convected_values(v.components[i], flux, g, i, j, scheme)
            dw = _jumps(w.components[i], j, i == j) / g.dual_face_distance(i, j)
            total -= float(np.sum(g.partition_volume(i, j) * vs * uj * dw))
    return total


def upwind_dissipation(u: VelocityField, v: VelocityField) -> float:
    """1/2 sum over interior dual faces of |eps| |u_{sigma,eps}| (v_sigma - v_sigma')^2."""
    g = _same_grid(u, v)
    total = 0.0
    for i in range(g.dim):
        for j in range(g.dim):
            G = dual_mass_flux(u, i, j)
            jump = _jumps(v.components[i], j, i == j)
            interior = ~g.partition_exterior(i, j)
            total += 0.5 * float(np.sum((np.abs(G) * jump * jump)[interior]))
    return total


def dual_cell_mass_balance(u: VelocityField) -> list[np.ndarray]:
    """Net outgoing mass flux of every dual cell (zero when div_M u = 0)."""
    g = u.grid
    out = []
    for i in range(g.dim):
        acc = np.zeros(g.face_shape(i))
        for j in range(g.dim):
            acc += _flux_divergence(dual_mass_flux(u, i, j), g, i, j)
        out.append(acc)
    return out


def assemble_convection(u: VelocityField, scheme="centred") -> sp.csr_matrix:
    """Matrix of v -> |D_sigma| C_E(u) v over the full velocity layout (rows scaled by |D_sigma|).

    Built from the enumerated dual faces: each interior dual face sigma|sigma'
    with flux G contributes G v* to row sigma and -G v* to row sigma'.
    """
    g = u.grid
    scheme = ConvectionScheme.parse(scheme)
    rows, cols, vals = [], [], []
    for i in range(g.dim):
        df = g.dual_faces(i)
        off = g.face_offsets[i]
        G = np.concatenate([dual_mass_flux(u, i, j).ravel() for j in range(g.dim)])
        ok = (df.lower >= 0) & (df.upper >= 0)
        lo, up, G = df.lower[ok] + off, df.upper[ok] + off, G[ok]
        if scheme is ConvectionScheme.CENTRED:
            a = np.full(G.shape, 0.5)
        else:
            a = np.where(G >= 0.0, 1.0, 0.0)
        for row, sgn in ((lo, 1.0), (up, -1.0)):
            rows += [row, row]
            cols += [lo, up]
            vals += [sgn * G * a, sgn * G * (1.0 - a)]
    n = g.num_velocity
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    # rows of exterior faces are not equations
    keep = np.zeros(n)
    keep[g.interior_velocity] = 1.0
    return sp.diags(keep) @ m
