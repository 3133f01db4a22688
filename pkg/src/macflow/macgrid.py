"""Geometry of a MAC discretization on a non-uniform tensor-product box.

Storage convention
------------------
Pressure lives on cells, an array of shape ``(n_1, ..., n_d)``.
Velocity component ``i`` lives on the faces normal to axis ``i``, an array of
shape ``face_shape(i)`` which has ``n_i + 1`` entries along axis ``i`` (the
grid nodes, first and last being on the boundary) and ``n_j`` entries along
every other axis ``j`` (the cell centres).

The dual faces of component ``i`` that are normal to axis ``j`` form the
``(i, j)`` partition.  For ``j == i`` there is one dual face per primal cell
(shape ``cell_shape``); for ``j != i`` the dual faces sit on the grid lines of
axis ``j``, ``n_j + 1`` of them along ``j``, the first and last one lying on
the boundary.  Element ``m`` along ``j`` separates the face with index
``m - 1`` (lower, "sigma") from the face with index ``m`` (upper, "sigma'").
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np


class GridError(ValueError):
    """Malformed grid specification."""


class UnsupportedDimensionError(GridError):
    pass


@dataclass(frozen=True)
class GridSpec:
    coords: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.coords)

    @classmethod
    def uniform(cls, shape, box=None) -> "GridSpec":
        shape = tuple(int(n) for n in shape)
        if box is None:
            box = [(0.0, 1.0)] * len(shape)
        elif np.ndim(box) == 1:  # flat x0, x1, y0, y1, ...
            box = list(zip(box[::2], box[1::2]))
        return cls(tuple(np.linspace(a, b, n + 1) for n, (a, b) in zip(shape, box)))


def _check_coords(coords) -> tuple[np.ndarray, ...]:
    out = []
    if len(coords) not in (2, 3):
        raise UnsupportedDimensionError(f"dimension must be 2 or 3, got {len(coords)}")
    for axis, c in enumerate(coords):
        c = np.array(c, dtype=np.float64)
        if c.ndim != 1 or c.size < 2:
            raise GridError(f"axis {axis}: need at least two coordinates")
        if not np.all(np.isfinite(c)):
            raise GridError(f"axis {axis}: non-finite coordinate")
        if np.any(np.diff(c) <= 0.0):
            raise GridError(f"axis {axis}: coordinates must be strictly increasing")
        c.setflags(write=False)
        out.append(c)
    return tuple(out)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _along(vec: np.ndarray, axis: int, dim: int) -> np.ndarray:
    shape = [1] * dim
    shape[axis] = vec.size
    return vec.reshape(shape)


@dataclass(frozen=True)
class DualFaces:
    """Flat enumeration of the dual faces of one velocity component.

    Every array has one entry per dual face.  ``lower``/``upper`` hold flat
    indices into the component array (``-1`` when the face is on the
    boundary and that side does not exist).  ``part_index`` is the flat
    index of the face inside its ``(i, j)`` partition array.
    """

    component: int
    normal: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    measure: np.ndarray
    distance: np.ndarray
    exterior: np.ndarray
    part_index: np.ndarray
    center: np.ndarray
    projection: np.ndarray  # x_{sigma,eps} for boundary faces, nan otherwise

    def __len__(self) -> int:
        return self.normal.size


class MacGrid:
    """Immutable MAC grid built from per-axis coordinate arrays."""

    def __init__(self, coords):
        if isinstance(coords, GridSpec):
            coords = coords.coords
        self.coords = _check_coords(coords)
        self.dim = len(self.coords)
        self.h = tuple(_frozen(np.diff(c)) for c in self.coords)
        self.centers = tuple(_frozen(0.5 * (c[1:] + c[:-1])) for c in self.coords)
        self.n = tuple(h.size for h in self.h)
        # dual widths along an axis, for quantities living on the nodes
        self.dual_h = tuple(
            _frozen(np.concatenate(([h[0] / 2], 0.5 * (h[1:] + h[:-1]), [h[-1] / 2])))
            for h in self.h
        )

    # ------------------------------------------------------------------ sizes
    @property
    def cell_shape(self) -> tuple[int, ...]:
        return self.n

    def face_shape(self, i: int) -> tuple[int, ...]:
        return tuple(n + 1 if a == i else n for a, n in enumerate(self.n))

    def partition_shape(self, i: int, j: int) -> tuple[int, ...]:
        if i == j:
            return self.cell_shape
        return tuple(n + 1 if a in (i, j) else n for a, n in enumerate(self.n))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.n))

    def num_faces(self, i: int) -> int:
        return int(np.prod(self.face_shape(i)))

    @cached_property
    def face_offsets(self) -> tuple[int, ...]:
        """Start of each component in the concatenated velocity vector."""
        offs = [0]
        for i in range(self.dim):
            offs.append(offs[-1] + self.num_faces(i))
        return tuple(offs)

    @property
    def num_velocity(self) -> int:
        return self.face_offsets[-1]

    # -------------------------------------------------------------- measures
    def _product(self, factors) -> np.ndarray:
        out = np.ones([1] * self.dim)
        for axis, vec in enumerate(factors):
            out = out * _along(vec, axis, self.dim)
        return out

    @cached_property
    def cell_volume(self) -> np.ndarray:
        return _frozen(self._product(self.h))

    @cached_property
    def cell_center(self) -> tuple[np.ndarray, ...]:
        return tuple(_frozen(np.broadcast_to(_along(c, a, self.dim), self.n).copy())
                     for a, c in enumerate(self.centers))

    def face_measure(self, i: int) -> np.ndarray:
        """(d-1)-measure of each face of ``E^(i)``, shape ``face_shape(i)``."""
        f = [np.ones(1) if a == i else self.h[a] for a in range(self.dim)]
        return np.broadcast_to(self._product(f), self.face_shape(i))

    def face_positions(self, i: int) -> tuple[np.ndarray, ...]:
        """Per-axis 1D positions of the faces of ``E^(i)`` (nodes along i)."""
        return tuple(self.coords[a] if a == i else self.centers[a] for a in range(self.dim))

    def face_center(self, i: int) -> tuple[np.ndarray, ...]:
        pos = self.face_positions(i)
        shape = self.face_shape(i)
        return tuple(np.broadcast_to(_along(p, a, self.dim), shape) for a, p in enumerate(pos))

    def face_exterior(self, i: int) -> np.ndarray:
        mask = np.zeros(self.face_shape(i), dtype=bool)
        idx = [slice(None)] * self.dim
        idx[i] = 0
        mask[tuple(idx)] = True
        idx[i] = -1
        mask[tuple(idx)] = True
        return mask

    def dual_volume(self, i: int) -> np.ndarray:
        """|D_sigma| for every face of ``E^(i)`` (half cells on the boundary)."""
        f = [self.dual_h[a] if a == i else self.h[a] for a in range(self.dim)]
        return np.broadcast_to(self._product(f), self.face_shape(i))

    def dual_face_measure(self, i: int, j: int) -> np.ndarray:
        """|eps| over the (i, j) partition."""
        f = []
        for a in range(self.dim):
            if a == j:
                f.append(np.ones(1))
            elif a == i:
                f.append(self.dual_h[a])
            else:
                f.append(self.h[a])
        return np.broadcast_to(self._product(f), self.partition_shape(i, j))

    def dual_face_distance(self, i: int, j: int) -> np.ndarray:
        """d_eps over the (i, j) partition (broadcast along axis j)."""
        dist = self.h[j] if i == j else self.dual_h[j]
        return np.broadcast_to(_along(dist, j, self.dim), self.partition_shape(i, j))

    def partition_volume(self, i: int, j: int) -> np.ndarray:
        """|D_eps| = |eps| d_eps over the (i, j) partition."""
        return self.dual_face_measure(i, j) * self.dual_face_distance(i, j)

    def partition_exterior(self, i: int, j: int) -> np.ndarray:
        mask = np.zeros(self.partition_shape(i, j), dtype=bool)
        if i != j:
            idx = [slice(None)] * self.dim
            idx[j] = 0
            mask[tuple(idx)] = True
            idx[j] = -1
            mask[tuple(idx)] = True
        return mask

    # ---------------------------------------------------------- mesh metrics
    @cached_property
    def volume(self) -> float:
        return float(np.prod([c[-1] - c[0] for c in self.coords]))

    @cached_property
    def diameter(self) -> float:
        return float(np.sqrt(sum((c[-1] - c[0]) ** 2 for c in self.coords)))

    @cached_property
    def h_mesh(self) -> float:
        """max over cells of diam(K)."""
        sq = self._product([h ** 2 for h in self.h]) * 0.0
        for a, h in enumerate(self.h):
            sq = sq + _along(h ** 2, a, self.dim)
        return float(np.sqrt(sq.max()))

    @cached_property
    def eta(self) -> float:
        """max |sigma|/|sigma'| over faces of different orientations."""
        big = [float(self.face_measure(i).max()) for i in range(self.dim)]
        small = [float(self.face_measure(i).min()) for i in range(self.dim)]
        return max(big[i] / small[j] for i in range(self.dim) for j in range(self.dim) if i != j)

    def hash(self) -> str:
        m = hashlib.sha256()
        for c in self.coords:
            m.update(np.ascontiguousarray(c, dtype="<f8").tobytes())
            m.update(b"|")
        return m.hexdigest()[:16]

    # ------------------------------------------------------------ unknowns
    @cached_property
    def interior_velocity(self) -> np.ndarray:
        """Flat indices of the interior faces in the concatenated layout."""
        parts = [np.flatnonzero(~self.face_exterior(i).ravel()) + self.face_offsets[i]
                 for i in range(self.dim)]
        return _frozen(np.concatenate(parts))

    # ------------------------------------------------------- enumerations
    def cells(self):
        """Yield ``(multi_index, center, volume)`` for every primal cell."""
        for idx in product(*(range(n) for n in self.n)):
            yield idx, tuple(self.centers[a][k] for a, k in enumerate(idx)), float(
                self.cell_volume[idx])

    def faces(self, i: int):
        """Yield ``(multi_index, lower_cell, upper_cell, measure)`` for ``E^(i)``.

        ``lower_cell``/``upper_cell`` are ``K`` and ``L`` with ``sigma = K->L``;
        either is ``None`` for a boundary face.
        """
        meas = self.face_measure(i)
        for idx in product(*(range(n) for n in self.face_shape(i))):
            k = idx[i]
            lo = idx[:i] + (k - 1,) + idx[i + 1:] if k > 0 else None
            up = idx if k < self.n[i] else None
            yield idx, lo, up, float(meas[idx])

    def dual_faces(self, i: int) -> DualFaces:
        return self._dual_faces[i]

    @cached_property
    def _dual_faces(self) -> tuple[DualFaces, ...]:
        return tuple(self._enumerate_dual_faces(i) for i in range(self.dim))

    def _enumerate_dual_faces(self, i: int) -> DualFaces:
        fshape = self.face_shape(i)
        chunks = []
        for j in range(self.dim):
            pshape = self.partition_shape(i, j)
            grid_idx = np.indices(pshape).reshape(self.dim, -1)
            m = grid_idx[j]
            lo_idx = grid_idx.copy()
            if i == j:
                # eps inside cell m, between faces m and m+1
                up_idx = grid_idx.copy()
                up_idx[j] = m + 1
                lo_valid = np.ones(m.size, dtype=bool)
                up_valid = np.ones(m.size, dtype=bool)
            else:
                lo_idx[j] = m - 1
                up_idx = grid_idx.copy()
                lo_valid = m > 0
                up_valid = m < self.n[j]
            lo_flat = np.where(lo_valid, np.ravel_multi_index(
                np.where(lo_valid, lo_idx, 0), fshape), -1)
            up_flat = np.where(up_valid, np.ravel_multi_index(
                np.where(up_valid, up_idx, 0), fshape), -1)
            meas = self.dual_face_measure(i, j).ravel()
            dist = self.dual_face_distance(i, j).ravel()
            # dual face centre: node/centre positions of the partition
            pos = []
            for a in range(self.dim):
                if a == j:
                    p = self.centers[a] if i == j else self.coords[a]
                elif a == i:
                    p = self.coords[a]
                else:
                    p = self.centers[a]
                pos.append(p[grid_idx[a]])
            center = np.stack(pos, axis=1)
            exterior = ~(lo_valid & up_valid)
            projection = np.full_like(center, np.nan)
            projection[exterior] = center[exterior]
            chunks.append(dict(normal=np.full(m.size, j), lower=lo_flat, upper=up_flat,
                               measure=meas, distance=dist, exterior=exterior,
                               part_index=np.arange(m.size), center=center,
                               projection=projection))
        cat = {k: _frozen(np.concatenate([c[k] for c in chunks])) for k in chunks[0]}
        return DualFaces(component=i, **cat)

    def __repr__(self) -> str:
        return f"MacGrid(dim={self.dim}, n={self.n}, h={self.h_mesh:.4g}, eta={self.eta:.4g})"


def build_grid(spec) -> MacGrid:
    """Build a :class:`MacGrid` from a :class:`GridSpec` or a list of coordinates."""
    return MacGrid(spec)


def uniform_grid(shape, box=None) -> MacGrid:
    return MacGrid(GridSpec.uniform(shape, box))


def graded_coords(n: int, ratio: float, base: int | None = None, a: float = 0.0,
                  b: float = 1.0) -> np.ndarray:
    """Geometrically graded coordinates.

    With ``base`` given, ``base`` cells with consecutive width ratio ``ratio``
    are built and each is split uniformly into ``n // base`` sub-cells, so a
    sequence of levels keeps the same grading pattern (bounded regularity).
    """
    base = n if base is None else base
    if n % base:
        raise GridError(f"{n} cells is not a refinement of {base}")
    w = ratio ** np.arange(base)
    w = np.repeat(w / w.sum(), n // base) / (n // base)
    x = a + (b - a) * np.concatenate(([0.0], np.cumsum(w)))
    x[-1] = b
    return x


def random_coords(rng: np.random.Generator, n: int, ratio: float = 4.0, a: float = 0.0,
                  b: float = 1.0) -> np.ndarray:
    """Widths drawn log-uniform in ``[1, ratio]`` then normalised to ``[a, b]``."""
    w = np.exp(rng.uniform(0.0, np.log(ratio), size=n))
    x = a + (b - a) * np.concatenate(([0.0], np.cumsum(w) / w.sum()))
    x[-1] = b
    return x


def random_grid(rng: np.random.Generator, dim: int, max_cells: int = 16, min_cells: int = 2,
                ratio: float = 4.0) -> MacGrid:
    coords = []
    for _ in range(dim):
        n = int(rng.integers(min_cells, max_cells + 1))
        length = float(rng.uniform(0.5, 2.0))
        coords.append(random_coords(rng, n, ratio, 0.0, length))
    return MacGrid(coords)


# ------------------------------------------------------------------ grid files
_AXES = ("x", "y", "z")


def _floats(text: str, lineno: int, key: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise GridError(f"line {lineno}: bad number list for '{key}': {exc}") from None


def parse_grid_text(text: str) -> MacGrid:
    """Parse the ``key: value`` grid format.

    Keys: ``dim``, ``coords_x``, ``coords_y``, ``coords_z`` (comma separated),
    or the shorthand ``uniform: nx,ny[,nz]`` with ``box: x0,x1,y0,y1[,z0,z1]``.
    ``=`` is accepted in place of ``:``; ``#`` starts a comment.
    """
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = min((p for p in (line.find(":"), line.find("=")) if p >= 0), default=-1)
        if sep < 0:
            raise GridError(f"line {lineno}: expected 'key: value', got {raw.strip()!r}")
        key, value = line[:sep].strip().lower(), line[sep + 1:].strip()
        if key not in ("dim", "uniform", "box") and key not in {f"coords_{a}" for a in _AXES}:
            raise GridError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise GridError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)

    dim = None
    if "dim" in entries:
        value, lineno = entries["dim"]
        try:
            dim = int(value)
        except ValueError:
            raise GridError(f"line {lineno}: dim must be an integer") from None
        if dim not in (2, 3):
            raise UnsupportedDimensionError(f"line {lineno}: dimension must be 2 or 3, got {dim}")

    if "uniform" in entries:
        value, lineno = entries["uniform"]
        try:
            shape = [int(t) for t in value.split(",") if t.strip()]
        except ValueError:
            raise GridError(f"line {lineno}: bad cell counts {value!r}") from None
        if dim is not None and len(shape) != dim:
            raise GridError(f"line {lineno}: {len(shape)} cell counts for dim {dim}")
        if len(shape) not in (2, 3):
            raise UnsupportedDimensionError(f"line {lineno}: dimension must be 2 or 3")
        if any(n < 1 for n in shape):
            raise GridError(f"line {lineno}: cell counts must be positive")
        box = [(0.0, 1.0)] * len(shape)
        if "box" in entries:
            bval, blineno = entries["box"]
            b = _floats(bval, blineno, "box")
            if len(b) != 2 * len(shape):
                raise GridError(f"line {blineno}: box needs {2 * len(shape)} numbers")
            box = list(zip(b[::2], b[1::2]))
            if any(hi <= lo for lo, hi in box):
                raise GridError(f"line {blineno}: empty box interval")
        return uniform_grid(shape, box)

    coords = []
    for a in _AXES:
        key = f"coords_{a}"
        if key in entries:
            value, lineno = entries[key]
            c = _floats(value, lineno, key)
            try:
                _check_coords([c, [0.0, 1.0]])
            except GridError as exc:
                raise GridError(f"line {lineno}: {key}: {str(exc).split(': ', 1)[-1]}") from None
            coords.append(c)
        else:
            break
    if not coords:
        raise GridError("line 1: no coordinates given (need coords_x/coords_y or uniform)")
    if dim is not None and len(coords) != dim:
        raise GridError(f"line {entries['dim'][1]}: dim {dim} but {len(coords)} coordinate axes")
    return MacGrid(coords)


def read_grid_file(path) -> MacGrid:
    with open(path, encoding="utf-8") as fh:
        return parse_grid_text(fh.read())


def grid_text(grid: MacGrid) -> str:
    lines = [f"dim: {grid.dim}"]
    for a, c in zip(_AXES, grid.coords):
        lines.append(f"coords_{a}: " + ",".join(f"{v:.17g}" for v in c))
    return "\n".join(lines) + "\n"
