"""Discrete pressure and velocity spaces, their norms and test-field generators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .macgrid import MacGrid


class GridMismatchError(ValueError):
    pass


def check_grid(grid: MacGrid, *fields) -> None:
    for f in fields:
        if f.grid is not grid and f.grid.hash() != grid.hash():
            raise GridMismatchError("field does not live on this grid")


def _same_grid(*fields) -> MacGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid is not grid and f.grid.hash() != grid.hash():
            raise GridMismatchError("fields live on different grids")
    return grid


@dataclass
class PressureField:
    grid: MacGrid
    values: np.ndarray
    zero_mean: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.cell_shape:
            raise ValueError(f"pressure shape {self.values.shape} != {self.grid.cell_shape}")

    @classmethod
    def zeros(cls, grid: MacGrid) -> "PressureField":
        return cls(grid, np.zeros(grid.cell_shape))

    def mean(self) -> float:
        return float(np.sum(self.grid.cell_volume * self.values) / self.grid.volume)

    def projected(self) -> "PressureField":
        """Copy with the volume-weighted mean removed (an element of L_M,0)."""
        return PressureField(self.grid, self.values - self.mean(), zero_mean=True)

    def __add__(self, other):
        _same_grid(self, other)
        return PressureField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return PressureField(self.grid, self.values - other.values)

    def __mul__(self, s: float):
        return PressureField(self.grid, self.values * s, self.zero_mean)

    __rmul__ = __mul__


@dataclass
class VelocityField:
    """One face-indexed array per component; exterior faces hold exact zeros."""

    grid: MacGrid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=np.float64) for c in self.components)
        for i, c in enumerate(comps):
            if c.shape != self.grid.face_shape(i):
                raise ValueError(f"component {i} shape {c.shape} != {self.grid.face_shape(i)}")
        self.components = comps

    @classmethod
    def zeros(cls, grid: MacGrid) -> "VelocityField":
        return cls(grid, tuple(np.zeros(grid.face_shape(i)) for i in range(grid.dim)))

    @classmethod
    def from_flat(cls, grid: MacGrid, vec: np.ndarray) -> "VelocityField":
        off = grid.face_offsets
        return cls(grid, tuple(np.array(vec[off[i]:off[i + 1]]).reshape(grid.face_shape(i))
                               for i in range(grid.dim)))

    @classmethod
    def from_interior(cls, grid: MacGrid, vec: np.ndarray) -> "VelocityField":
        full = np.zeros(grid.num_velocity)
        full[grid.interior_velocity] = vec
        return cls.from_flat(grid, full)

    def flat(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.components])

    def interior(self) -> np.ndarray:
        return self.flat()[self.grid.interior_velocity]

    def with_boundary_zero(self) -> "VelocityField":
        comps = []
        for i, c in enumerate(self.components):
            c = c.copy()
            c[self.grid.face_exterior(i)] = 0.0
            comps.append(c)
        return VelocityField(self.grid, tuple(comps))

    def is_homogeneous(self) -> bool:
        return all(not np.any(c[self.grid.face_exterior(i)]) for i, c in enumerate(self.components))

    def __add__(self, other):
        _same_grid(self, other)
        return VelocityField(self.grid, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        _same_grid(self, other)
        return VelocityField(self.grid, tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, s: float):
        return VelocityField(self.grid, tuple(s * c for c in self.components))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass
class TimeSeriesField:
    dt: float
    velocities: list[VelocityField] = field(default_factory=list)
    pressures: list[PressureField | None] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.velocities))

    def __len__(self) -> int:
        return len(self.velocities)


# ---------------------------------------------------------------- inner products
def _jumps(c: np.ndarray, j: int, same_axis: bool) -> np.ndarray:
    """u_{sigma'} - u_sigma over the (i, j) partition (zero outside the box)."""
    if same_axis:
        return np.diff(c, axis=j)
    pad = [(0, 0)] * c.ndim
    pad[j] = (1, 1)
    return np.diff(np.pad(c, pad), axis=j)


def h1_inner(u: VelocityField, v: VelocityField) -> float:
    """Discrete H^1_0 inner product: sum of |eps|/d_eps times the jumps across dual faces."""
    grid = _same_grid(u, v)
    total = 0.0
    for i in range(grid.dim):
        for j in range(grid.dim):
            w = grid.dual_face_measure(i, j) / grid.dual_face_distance(i, j)
            total += float(np.sum(w * _jumps(u.components[i], j, i == j)
                                  * _jumps(v.components[i], j, i == j)))
    return total


def h1_norm(u: VelocityField) -> float:
    return float(np.sqrt(max(h1_inner(u, u), 0.0)))


def lp_norm(f, p: float = 2.0) -> float:
    """L^p norm of a piecewise-constant field (dual cells for velocity, cells for pressure)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if isinstance(f, PressureField):
        return float(np.sum(f.grid.cell_volume * np.abs(f.values) ** p) ** (1.0 / p))
    grid = f.grid
    acc = 0.0
    if p == 2.0:
        for i, c in enumerate(f.components):
            acc += float(np.sum(grid.dual_volume(i) * c * c))
        return float(np.sqrt(acc))
    # vector L^p uses the Euclidean modulus pointwise; the components live on
    # different partitions, so integrate |u|^p = (sum u_i^2)^{p/2} exactly on
    # the common refinement (cells split into 2^d sub-boxes).
    return float(_vector_lp(f, p))


def l2_norm(f) -> float:
    return lp_norm(f, 2.0)


def l2_inner(u, v) -> float:
    grid = _same_grid(u, v)
    if isinstance(u, PressureField):
        return float(np.sum(grid.cell_volume * u.values * v.values))
    return float(sum(np.sum(grid.dual_volume(i) * a * b)
                     for i, (a, b) in enumerate(zip(u.components, v.components))))


def _subcell_values(grid: MacGrid, c: np.ndarray, i: int) -> np.ndarray:
    """Values of component i on the 2^d sub-boxes of every cell (half-cells split)."""
    # along i: sub-box 0 of cell k belongs to face k, sub-box 1 to face k+1
    lo = np.take(c, np.arange(grid.n[i]), axis=i)
    hi = np.take(c, np.arange(1, grid.n[i] + 1), axis=i)
    out = np.stack([lo, hi], axis=i + 1)
    shape = list(out.shape)
    shape[i] *= 2
    del shape[i + 1]
    out = out.reshape(shape)
    for a in range(grid.dim):
        if a != i:
            out = np.repeat(out, 2, axis=a)
    return out


def _subcell_volume(grid: MacGrid) -> np.ndarray:
    vol = np.ones([1] * grid.dim)
    for a, h in enumerate(grid.h):
        shape = [1] * grid.dim
        shape[a] = 2 * h.size
        vol = vol * np.repeat(h / 2, 2).reshape(shape)
    return vol


def _vector_lp(u: VelocityField, p: float) -> float:
    grid = u.grid
    sq = sum(_subcell_values(grid, c, i) ** 2 for i, c in enumerate(u.components))
    return float(np.sum(_subcell_volume(grid) * sq ** (p / 2)) ** (1.0 / p))


def component_lp_norm(grid: MacGrid, c: np.ndarray, i: int, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(np.sum(grid.dual_volume(i) * np.abs(c) ** p) ** (1.0 / p))


# ----------------------------------------------------------------- gradients
def velocity_gradient(u: VelocityField) -> list[list[np.ndarray]]:
    """``grad[i][j]``: values of the discrete derivative d_j u_i on the (i, j) partition.

    On a boundary dual face the missing neighbour is read as zero, which gives
    ``-u_sigma / d_eps`` times the sign of the outward direction.
    """
    grid = u.grid
    return [[_jumps(u.components[i], j, i == j) / grid.dual_face_distance(i, j)
             for j in range(grid.dim)] for i in range(grid.dim)]


def gradient_inner(u: VelocityField, v: VelocityField) -> float:
    """int grad u : grad v over the (i, j) partitions."""
    grid = _same_grid(u, v)
    gu, gv = velocity_gradient(u), velocity_gradient(v)
    return float(sum(np.sum(grid.partition_volume(i, j) * gu[i][j] * gv[i][j])
                     for i in range(grid.dim) for j in range(grid.dim)))


# ------------------------------------------------------------ test fields
def make_stream_function_field(grid: MacGrid, psi: np.ndarray) -> VelocityField:
    """Discretely divergence-free 2D field from vertex values of a stream function.

    ``psi`` has shape ``(n_x + 1, n_y + 1)`` and must vanish on the boundary.
    """
    if grid.dim != 2:
        raise ValueError("stream functions need a 2D grid; use make_vector_potential_field")
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != (grid.n[0] + 1, grid.n[1] + 1):
        raise ValueError(f"psi must have vertex shape {(grid.n[0] + 1, grid.n[1] + 1)}")
    border = np.concatenate([psi[0], psi[-1], psi[:, 0], psi[:, -1]])
    if np.any(border != 0.0):
        raise ValueError("psi must vanish on boundary vertices")
    u1 = np.diff(psi, axis=1) / grid.face_measure(0)
    u2 = -np.diff(psi, axis=0) / grid.face_measure(1)
    return VelocityField(grid, (u1, u2))


def make_vector_potential_field(grid: MacGrid, potential) -> VelocityField:
    """3D analogue of the stream function: face fluxes are edge circulations.

    ``potential[k]`` holds the tangential component on edges parallel to axis
    ``k`` (shape: ``n_k`` along ``k``, ``n_a + 1`` along the others) and must
    vanish on boundary edges.
    """
    if grid.dim != 3:
        raise ValueError("vector potentials are for 3D grids")
    circ = []
    for k in range(3):
        a = np.asarray(potential[k], dtype=np.float64)
        shape = tuple(n if ax == k else n + 1 for ax, n in enumerate(grid.n))
        if a.shape != shape:
            raise ValueError(f"potential[{k}] must have shape {shape}")
        length = grid.h[k].reshape([-1 if ax == k else 1 for ax in range(3)])
        circ.append(a * length)
    comps = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        flux = np.diff(circ[k], axis=j) - np.diff(circ[j], axis=k)
        comps.append(flux / grid.face_measure(i))
    u = VelocityField(grid, tuple(comps))
    if not u.is_homogeneous():
        raise ValueError("potential must vanish on boundary edges")
    return u


def random_divergence_free(grid: MacGrid, rng: np.random.Generator) -> VelocityField:
    if grid.dim == 2:
        psi = np.zeros((grid.n[0] + 1, grid.n[1] + 1))
        psi[1:-1, 1:-1] = rng.standard_normal((grid.n[0] - 1, grid.n[1] - 1))
        return make_stream_function_field(grid, psi)
    pot = []
    for k in range(3):
        shape = tuple(n if ax == k else n + 1 for ax, n in enumerate(grid.n))
        a = np.zeros(shape)
        inner = tuple(slice(None) if ax == k else slice(1, -1) for ax in range(3))
        a[inner] = rng.standard_normal(a[inner].shape)
        pot.append(a)
    return make_vector_potential_field(grid, pot)


def random_velocity(grid: MacGrid, rng: np.random.Generator) -> VelocityField:
    comps = []
    for i in range(grid.dim):
        c = rng.standard_normal(grid.face_shape(i))
        c[grid.face_exterior(i)] = 0.0
        comps.append(c)
    return VelocityField(grid, tuple(comps))


def random_pressure(grid: MacGrid, rng: np.random.Generator) -> PressureField:
    return PressureField(grid, rng.standard_normal(grid.cell_shape))


# ------------------------------------------------------------------ dual norm
def dual_norm(v: VelocityField) -> float:
    """sup of |int v.phi| over discretely divergence-free phi with unit H^1_0 norm.

    The maximiser is the Riesz representative w in E_E of phi -> int v.phi,
    which is the velocity of the discrete Stokes problem forced by v.
    """
    from .solver import StokesOperator

    grid = v.grid
    if not any(np.any(c) for c in v.components):
        return 0.0
    op = StokesOperator.for_grid(grid)
    w, _ = op.solve(v)
    return h1_norm(w)
