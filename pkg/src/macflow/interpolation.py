"""Maps from analytic fields to discrete ones: face means, cell means, dual-cell means, point values."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields import PressureField, VelocityField
from .macgrid import MacGrid

DEFAULT_ORDER = 5


@dataclass(frozen=True)
class AnalyticField:
    """A scalar or vector function of position and time.

    ``func(x, t)`` receives a tuple of coordinate arrays (all of one shape)
    and a time, and returns an array (scalar field) or a tuple of ``dim``
    arrays (vector field).  ``gradient`` returns, for a vector field, a
    nested tuple ``g[i][j] = d_j phi_i``; for a scalar field a tuple of
    partial derivatives.  ``divergence`` is only meaningful for vectors.
    """

    func: Callable
    dim: int
    vector: bool = True
    gradient: Callable | None = None
    divergence: Callable | None = None
    order: int = DEFAULT_ORDER
    name: str = ""
    parts: tuple | None = None  # optional per-component evaluators

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"quadrature order must be >= 1, got {self.order}")

    def __call__(self, x: Sequence[np.ndarray], t: float = 0.0):
        x = tuple(np.asarray(c, dtype=np.float64) for c in x)
        out = self.func(x, t)
        shape = np.broadcast_shapes(*(c.shape for c in x))
        if self.vector:
            return tuple(np.broadcast_to(np.asarray(c, dtype=np.float64), shape) for c in out)
        return np.broadcast_to(np.asarray(out, dtype=np.float64), shape)

    def with_order(self, order: int) -> "AnalyticField":
        return AnalyticField(self.func, self.dim, self.vector, self.gradient, self.divergence,
                             order, self.name, self.parts)

    def component_values(self, x, t: float, i: int) -> np.ndarray:
        """Component ``i`` only, without evaluating the others when possible."""
        if self.parts is not None:
            x = tuple(np.asarray(c, dtype=np.float64) for c in x)
            shape = np.broadcast_shapes(*(c.shape for c in x))
            return np.broadcast_to(np.asarray(self.parts[i](x, t), dtype=np.float64), shape)
        return self(x, t)[i]

    def component(self, i: int) -> "AnalyticField":
        if not self.vector:
            raise ValueError("not a vector field")
        grad = None
        if self.gradient is not None:
            grad = (lambda x, t, _g=self.gradient: _g(x, t)[i])
        return AnalyticField(lambda x, t: self.component_values(x, t, i), self.dim, False, grad,
                             None,
                             self.order, f"{self.name}[{i}]")

    @classmethod
    def constant(cls, values, dim: int | None = None) -> "AnalyticField":
        if np.ndim(values) == 0:
            if dim is None:
                raise ValueError("dim is required for a scalar constant")
            v = float(values)
            zero = lambda x, t: tuple(np.zeros_like(x[0]) for _ in range(dim))
            return cls(lambda x, t: np.full_like(x[0], v), dim, False, gradient=zero)
        vals = tuple(float(v) for v in values)
        d = len(vals)
        return cls(lambda x, t: tuple(np.full_like(x[0], v) for v in vals), d, True,
                   gradient=lambda x, t: tuple(tuple(np.zeros_like(x[0]) for _ in range(d))
                                              for _ in range(d)),
                   divergence=lambda x, t: np.zeros_like(x[0]))

    @classmethod
    def zero(cls, dim: int, vector: bool = True) -> "AnalyticField":
        return cls.constant((0.0,) * dim) if vector else cls.constant(0.0, dim)


# ------------------------------------------------------------------ quadrature
def _gauss(order: int):
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    pts, wts = np.polynomial.legendre.leggauss(order)
    return 0.5 * (pts + 1.0), 0.5 * wts  # on [0, 1], weights sum to 1


def _axis_rule(lo: np.ndarray, hi: np.ndarray | None, order: int):
    """Quadrature along one axis: ``hi is None`` means point evaluation at ``lo``."""
    if hi is None:
        return lo[:, None], np.ones((lo.size, 1))
    s, w = _gauss(order)
    return lo[:, None] + (hi - lo)[:, None] * s[None, :], np.broadcast_to(w, (lo.size, s.size))


def _tensor_mean(func, rules, t_rule=None):
    """Mean of ``func`` over a tensor product of per-axis rules.

    Each rule is ``(points (m_a, q_a), weights (m_a, q_a))``; the result has
    shape ``(m_0, ..., m_{d-1})``.  ``t_rule`` is an optional ``(times, weights)``.
    """
    d = len(rules)
    coords, weight = [], 1.0
    for a, (p, w) in enumerate(rules):
        shape = [1] * (2 * d)
        shape[a] = p.shape[0]
        shape[d + a] = p.shape[1]
        coords.append(p.reshape(shape))
        weight = weight * w.reshape(shape)
    full = np.broadcast_shapes(*(c.shape for c in coords))
    coords = tuple(np.broadcast_to(c, full) for c in coords)
    axes = tuple(range(d, 2 * d))
    times = [(0.0, 1.0)] if t_rule is None else list(zip(*t_rule))
    acc = None
    for t, wt in times:
        vals = func(coords, t)
        if isinstance(vals, tuple):
            part = tuple(wt * np.sum(v * weight, axis=axes) for v in vals)
            acc = part if acc is None else tuple(a + b for a, b in zip(acc, part))
        else:
            part = wt * np.sum(vals * weight, axis=axes)
            acc = part if acc is None else acc + part
    return acc


def _time_rule(t0: float, t1: float, order: int):
    s, w = _gauss(order)
    return t0 + (t1 - t0) * s, w


def _face_rules(grid: MacGrid, i: int, order: int):
    rules = []
    for a in range(grid.dim):
        c = grid.coords[a]
        if a == i:
            rules.append(_axis_rule(c, None, order))
        else:
            rules.append(_axis_rule(c[:-1], c[1:], order))
    return rules


def _cell_rules(grid: MacGrid, order: int):
    return [_axis_rule(c[:-1], c[1:], order) for c in grid.coords]


def _dual_rules(grid: MacGrid, i: int, order: int):
    rules = []
    for a in range(grid.dim):
        c = grid.coords[a]
        if a == i:
            edges = np.concatenate(([c[0]], grid.centers[a], [c[-1]]))
            rules.append(_axis_rule(edges[:-1], edges[1:], order))
        else:
            rules.append(_axis_rule(c[:-1], c[1:], order))
    return rules


# ------------------------------------------------------------------ operators
def fortin_interpolate(phi: AnalyticField, grid: MacGrid, t: float = 0.0,
                       order: int | None = None, homogeneous: bool = True) -> VelocityField:
    """Face means of ``phi_i`` over the faces of E^(i).

    With ``homogeneous`` the exterior values are then set to exact zeros.
    """
    order = phi.order if order is None else order
    _check(phi, grid, vector=True)
    comps = []
    for i in range(grid.dim):
        c = _tensor_mean(lambda x, tt: phi.component_values(x, tt, i),
                         _face_rules(grid, i, order), [(t,), (1.0,)])
        if homogeneous:
            c = np.where(grid.face_exterior(i), 0.0, c)
        comps.append(c)
    return VelocityField(grid, tuple(comps))


def cell_mean(q: AnalyticField, grid: MacGrid, t: float = 0.0,
              order: int | None = None) -> PressureField:
    order = q.order if order is None else order
    _check(q, grid, vector=False)
    return PressureField(grid, _tensor_mean(q, _cell_rules(grid, order), [(t,), (1.0,)]))


def dual_cell_mean(f: AnalyticField, grid: MacGrid, t: float | tuple[float, float] = 0.0,
                   order: int | None = None) -> VelocityField:
    """Means of ``f_i`` over the dual cells of E^(i); exterior faces are 0.

    ``t`` may be a ``(t0, t1)`` slab, in which case the mean is also taken in time.
    """
    order = f.order if order is None else order
    _check(f, grid, vector=True)
    t_rule = _time_rule(*t, order) if isinstance(t, tuple) else [(t,), (1.0,)]
    comps = []
    for i in range(grid.dim):
        c = _tensor_mean(lambda x, tt: f.component_values(x, tt, i), _dual_rules(grid, i, order), t_rule)
        comps.append(np.where(grid.face_exterior(i), 0.0, c))
    return VelocityField(grid, tuple(comps))


def point_interpolate(phi: AnalyticField, grid: MacGrid, t: float = 0.0,
                      homogeneous: bool = True):
    """Face-centre values (vector field) or cell-centre values (scalar field)."""
    if phi.vector:
        _check(phi, grid, vector=True)
        comps = []
        for i in range(grid.dim):
            c = phi.component_values(grid.face_center(i), t, i)
            if homogeneous:
                c = np.where(grid.face_exterior(i), 0.0, c)
            comps.append(np.array(c))
        return VelocityField(grid, tuple(comps))
    _check(phi, grid, vector=False)
    return PressureField(grid, np.array(phi(grid.cell_center, t)))


def _check(phi: AnalyticField, grid: MacGrid, vector: bool) -> None:
    if phi.dim != grid.dim:
        raise ValueError(f"field is {phi.dim}D but grid is {grid.dim}D")
    if phi.vector != vector:
        raise ValueError("expected a vector field" if vector else "expected a scalar field")


# ------------------------------------------------------------ continuous norms
def integrate(func, grid: MacGrid, order: int = DEFAULT_ORDER, t=0.0) -> float:
    """int_Omega func(x, t) dx by Gauss quadrature on the cells of ``grid``."""
    t_rule = _time_rule(*t, order) if isinstance(t, tuple) else [(t,), (1.0,)]
    means = _tensor_mean(func, _cell_rules(grid, order), t_rule)
    scale = (t[1] - t[0]) if isinstance(t, tuple) else 1.0
    return float(np.sum(grid.cell_volume * means) * scale)


def analytic_l2_squared(phi: AnalyticField, grid: MacGrid, t=0.0, order: int = DEFAULT_ORDER) -> float:
    """||phi||^2_{L^2} (or the space-time integral over a ``(t0, t1)`` slab)."""
    if phi.vector:
        return integrate(lambda x, tt: sum(c * c for c in phi(x, tt)), grid, order, t)
    return integrate(lambda x, tt: phi(x, tt) ** 2, grid, order, t)


def analytic_h1_squared(phi: AnalyticField, grid: MacGrid, t: float = 0.0,
                        order: int = DEFAULT_ORDER, seminorm: bool = False) -> float:
    if phi.gradient is None:
        raise ValueError("field has no analytic gradient")

    def grad_sq(x, tt):
        g = phi.gradient(x, tt)
        rows = g if phi.vector else (g,)
        return sum(np.asarray(gij) ** 2 for row in rows for gij in row)

    semi = integrate(grad_sq, grid, order, t)
    return semi if seminorm else semi + analytic_l2_squared(phi, grid, t, order)
