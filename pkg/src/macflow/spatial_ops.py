"""Linear MAC operators: Laplacian, divergence, pressure gradient, reconstructions.

Each operator has a matrix-free form acting on field arrays.  The ``assemble_*``
functions build the same operators as sparse matrices from the enumerated
dual-face lists of :class:`~macflow.macgrid.MacGrid`, an independent route used
by the solver and cross-checked in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import PressureField, VelocityField, _jumps, _same_grid, velocity_gradient
from .macgrid import MacGrid


# ----------------------------------------------------------------- diffusion
def diffusion_fluxes(u: VelocityField, i: int, j: int) -> np.ndarray:
    """|eps|/d_eps (u_sigma - u_sigma') on the (i, j) partition, oriented lower->upper.

    The flux seen from the upper dual cell is the exact negation.
    """
    g = u.grid
    return -(g.dual_face_measure(i, j) / g.dual_face_distance(i, j)) * _jumps(
        u.components[i], j, i == j)


def laplacian(u: VelocityField) -> VelocityField:
    """-Delta_E u (note the sign: this is the positive operator)."""
    g = u.grid
    out = []
    for i in range(g.dim):
        acc = np.zeros(g.face_shape(i))
        for j in range(g.dim):
            flux = diffusion_fluxes(u, i, j)
            if i == j:
                pad = [(0, 0)] * g.dim
                pad[j] = (1, 1)
                flux = np.pad(flux, pad)
            # flux leaving through the upper dual face plus the one leaving through the lower
            acc += np.diff(flux, axis=j)
        acc /= g.dual_volume(i)
        acc[g.face_exterior(i)] = 0.0
        out.append(acc)
    return VelocityField(g, tuple(out))


def divergence(u: VelocityField) -> PressureField:
    g = u.grid
    div = np.zeros(g.cell_shape)
    for i, c in enumerate(u.components):
        div += np.diff(g.face_measure(i) * c, axis=i)
    return PressureField(g, div / g.cell_volume)


def divergence_scale(u: VelocityField) -> np.ndarray:
    """(1/|K|) sum over the faces of K of |sigma| |u_sigma|: the size of the terms in div_M u."""
    g = u.grid
    acc = np.zeros(g.cell_shape)
    for i, c in enumerate(u.components):
        a = g.face_measure(i) * np.abs(c)
        acc += np.take(a, np.arange(g.n[i]), axis=i) + np.take(a, np.arange(1, g.n[i] + 1), axis=i)
    return acc / g.cell_volume


def relative_divergence(u: VelocityField) -> float:
    """max |div_M u| divided by the largest flux scale (0 for u = 0)."""
    scale = float(divergence_scale(u).max())
    return float(np.abs(divergence(u).values).max()) / scale if scale > 0 else 0.0


def pressure_gradient(p: PressureField) -> VelocityField:
    g = p.grid
    comps = []
    for i in range(g.dim):
        c = np.zeros(g.face_shape(i))
        inner = [slice(None)] * g.dim
        inner[i] = slice(1, -1)
        inner = tuple(inner)
        c[inner] = (g.face_measure(i)[inner] / g.dual_volume(i)[inner]) * np.diff(p.values, axis=i)
        comps.append(c)
    return VelocityField(g, tuple(comps))


# ------------------------------------------------------------ reconstructions
RECONSTRUCTION_VARIANTS = ("centred", "upwind", "volume-weighted-ii", "volume-weighted-ij",
                           "half-boundary", "mass-flux", "custom")


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class ReconstructionWeights:
    """Convex weights on the (i, j) partition of component ``i``.

    On an interior element, ``alpha`` multiplies the lower value (sigma) and
    ``1 - alpha`` the upper value (sigma').  On a boundary element ``alpha``
    multiplies the single adjacent value.
    """

    i: int
    j: int
    alpha: np.ndarray
    variant: str = "custom"

    def __post_init__(self):
        if self.variant not in RECONSTRUCTION_VARIANTS:
            raise WeightError(f"unknown variant {self.variant!r}")
        a = np.asarray(self.alpha, dtype=np.float64)
        if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
            raise WeightError("reconstruction weights must lie in [0, 1]")

    @classmethod
    def constant(cls, grid: MacGrid, i: int, j: int, value: float, boundary: float | None = None,
                 variant: str = "custom") -> "ReconstructionWeights":
        a = np.full(grid.partition_shape(i, j), float(value))
        if boundary is not None:
            a[grid.partition_exterior(i, j)] = boundary
        return cls(i, j, a, variant)

    @classmethod
    def centred(cls, grid: MacGrid, i: int, j: int) -> "ReconstructionWeights":
        return cls.constant(grid, i, j, 0.5, variant="centred")

    @classmethod
    def upwind(cls, grid: MacGrid, i: int, j: int, flux: np.ndarray) -> "ReconstructionWeights":
        """Lower value where the lower->upper flux is >= 0, upper value otherwise."""
        a = np.where(flux >= 0.0, 1.0, 0.0)
        ext = grid.partition_exterior(i, j)
        a[ext] = 1.0
        return cls(i, j, a, "upwind")

    @classmethod
    def volume_weighted(cls, grid: MacGrid, i: int, j: int,
                        boundary: float = 0.0) -> "ReconstructionWeights":
        """Weights that turn the partial derivative into an exact summation by parts.

        ``i == j``: alpha = |D_{K,sigma'}| / |K| (one half).
        ``i != j``: alpha = |D_sigma'| / (2 |D_eps|) inside, ``boundary`` on
        boundary elements.  ``boundary=0`` makes the identity exact;
        ``boundary=0.5`` is the ``half-boundary`` variant.
        """
        if i == j:
            return cls.constant(grid, i, j, 0.5, variant="volume-weighted-ii")
        dv = grid.dual_volume(i)
        pad = [(0, 0)] * grid.dim
        pad[j] = (0, 1)
        upper_vol = np.pad(dv, pad)  # |D_sigma'| for element m is dv[m]
        a = upper_vol / (2.0 * grid.partition_volume(i, j))
        ext = grid.partition_exterior(i, j)
        a[ext] = boundary
        variant = "volume-weighted-ij" if boundary == 0.0 else "half-boundary"
        if boundary not in (0.0, 0.5):
            variant = "custom"
        return cls(i, j, np.clip(a, 0.0, 1.0), variant)


def reconstruct(v: np.ndarray, weights: ReconstructionWeights, grid: MacGrid) -> np.ndarray:
    """Piecewise-constant reconstruction of component ``weights.i`` on its (i, j) partition."""
    i, j = weights.i, weights.j
    if v.shape != grid.face_shape(i):
        raise ValueError(f"component {i} array has shape {v.shape}")
    a = np.asarray(weights.alpha)
    if a.shape != grid.partition_shape(i, j):
        raise WeightError(f"weights shape {a.shape} != {grid.partition_shape(i, j)}")
    if i == j:
        lo = np.take(v, np.arange(grid.n[j]), axis=j)
        hi = np.take(v, np.arange(1, grid.n[j] + 1), axis=j)
        return a * lo + (1.0 - a) * hi
    pad = [(0, 0)] * grid.dim
    pad[j] = (1, 1)
    vp = np.pad(v, pad)
    lo = np.take(vp, np.arange(grid.n[j] + 1), axis=j)
    hi = np.take(vp, np.arange(1, grid.n[j] + 2), axis=j)
    ext = grid.partition_exterior(i, j)
    w_lo = np.where(ext, a, a)
    w_hi = np.where(ext, a, 1.0 - a)
    # on boundary elements exactly one of lo/hi is a padding zero
    return w_lo * lo + w_hi * hi


def partition_integral(grid: MacGrid, i: int, j: int, values: np.ndarray) -> float:
    return float(np.sum(grid.partition_volume(i, j) * values))


def derivative_times_field(u: np.ndarray, v: np.ndarray, grid: MacGrid, i: int, j: int) -> float:
    """int (d_j u) v where v is piecewise constant on the dual cells of ``E^(i)``.

    Each element of the (i, j) partition overlaps the dual cells of its two
    faces; the overlaps are computed explicitly.
    """
    du = _jumps(u, j, i == j) / grid.dual_face_distance(i, j)
    dv_ = grid.dual_volume(i)
    if i == j:
        # D_eps = K: half of K belongs to each of its two faces
        half = grid.cell_volume / 2.0
        lo = np.take(v, np.arange(grid.n[j]), axis=j)
        hi = np.take(v, np.arange(1, grid.n[j] + 1), axis=j)
        return float(np.sum(du * half * (lo + hi)))
    pad = [(0, 0)] * grid.dim
    pad[j] = (1, 1)
    vp = np.pad(v * dv_ / 2.0, pad)
    lo = np.take(vp, np.arange(grid.n[j] + 1), axis=j)
    hi = np.take(vp, np.arange(1, grid.n[j] + 2), axis=j)
    return float(np.sum(du * (lo + hi)))


def reconstruction_stability_constant(grid: MacGrid, i: int, j: int) -> float:
    """C_V = max_sigma |V_sigma| / |D_sigma| with V_sigma the two elements touching D_sigma."""
    vol = grid.partition_volume(i, j)
    if i == j:
        pad = [(0, 0)] * grid.dim
        pad[j] = (1, 1)
        vp = np.pad(vol, pad)
    else:
        vp = vol
    v_sigma = np.take(vp, np.arange(vp.shape[j] - 1), axis=j) + np.take(
        vp, np.arange(1, vp.shape[j]), axis=j)
    ratio = v_sigma / grid.dual_volume(i)
    return float(ratio[~grid.face_exterior(i)].max())


# ------------------------------------------------------------------ assembly
def _component_slices(grid: MacGrid):
    off = grid.face_offsets
    return [slice(off[i], off[i + 1]) for i in range(grid.dim)]


def assemble_stiffness(grid: MacGrid) -> sp.csr_matrix:
    """Matrix of [u, v]_{1,E,0} over the full (all-faces) velocity layout."""
    rows, cols, vals = [], [], []
    for i in range(grid.dim):
        df = grid.dual_faces(i)
        off = grid.face_offsets[i]
        w = df.measure / df.distance
        for a, b in ((df.lower, df.upper), (df.upper, df.lower)):
            ok = a >= 0
            rows.append(a[ok] + off)
            cols.append(a[ok] + off)
            vals.append(w[ok])
            both = ok & (b >= 0)
            rows.append(a[both] + off)
            cols.append(b[both] + off)
            vals.append(-w[both])
    n = grid.num_velocity
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def assemble_velocity_mass(grid: MacGrid) -> sp.dia_matrix:
    return sp.diags(np.concatenate([grid.dual_volume(i).ravel() for i in range(grid.dim)]))


def assemble_divergence(grid: MacGrid) -> sp.csr_matrix:
    """Matrix of div_M: cells x all faces."""
    rows, cols, vals = [], [], []
    cell_ids = np.arange(grid.num_cells).reshape(grid.cell_shape)
    vol = grid.cell_volume.ravel()
    for i in range(grid.dim):
        off = grid.face_offsets[i]
        for idx, lo, up, meas in grid.faces(i):
            f = off + int(np.ravel_multi_index(idx, grid.face_shape(i)))
            if lo is not None:
                k = int(cell_ids[lo])
                rows.append(k); cols.append(f); vals.append(meas / vol[k])
            if up is not None:
                k = int(cell_ids[up])
                rows.append(k); cols.append(f); vals.append(-meas / vol[k])
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.num_cells, grid.num_velocity))


def assemble_gradient(grid: MacGrid) -> sp.csr_matrix:
    """Matrix of grad_E: all faces x cells (zero rows on boundary faces)."""
    rows, cols, vals = [], [], []
    cell_ids = np.arange(grid.num_cells).reshape(grid.cell_shape)
    for i in range(grid.dim):
        off = grid.face_offsets[i]
        dvol = grid.dual_volume(i)
        for idx, lo, up, meas in grid.faces(i):
            if lo is None or up is None:
                continue
            f = off + int(np.ravel_multi_index(idx, grid.face_shape(i)))
            c = meas / float(dvol[idx])
            rows += [f, f]; cols += [int(cell_ids[up]), int(cell_ids[lo])]; vals += [c, -c]
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.num_velocity, grid.num_cells))


def export_coo(matrix, path) -> None:
    """Write ``row col value`` lines (17 significant digits)."""
    m = sp.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# shape {m.shape[0]} {m.shape[1]} nnz {m.nnz}\n")
        order = np.lexsort((m.col, m.row))
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_coo(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        shape = (int(header[2]), int(header[3]))
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape)
