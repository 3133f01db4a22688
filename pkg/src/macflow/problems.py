"""Built-in manufactured problems on the unit square.

Each problem is defined by a stream function and a pressure; velocity,
forcing and derivatives are derived symbolically once and compiled to numpy.
Viscosity is 1 throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .interpolation import AnalyticField

X, Y, T = sp.symbols("x y t", real=True)


@dataclass(frozen=True)
class Problem:
    name: str
    dim: int
    velocity: AnalyticField
    pressure: AnalyticField
    stokes_forcing: AnalyticField
    ns_forcing: AnalyticField
    unsteady: bool
    final_time: float
    description: str

    def forcing(self, convection: bool) -> AnalyticField:
        return self.ns_forcing if convection else self.stokes_forcing


def _compile(expr):
    f = sp.lambdify((X, Y, T), expr, modules="numpy", cse=True)
    return lambda x, t: np.asarray(f(x[0], x[1], t), dtype=np.float64) + 0.0 * x[0]


def _vector(exprs, name, with_derivs=True) -> AnalyticField:
    comps = [_compile(e) for e in exprs]
    grad = div = None
    if with_derivs:
        g = [[_compile(sp.diff(e, s)) for s in (X, Y)] for e in exprs]
        grad = lambda x, t: tuple(tuple(gij(x, t) for gij in row) for row in g)
        d = _compile(sp.simplify(sp.diff(exprs[0], X) + sp.diff(exprs[1], Y)))
        div = d
    return AnalyticField(lambda x, t: tuple(c(x, t) for c in comps), 2, True, grad, div,
                         name=name, parts=tuple(comps))


def _scalar(expr, name) -> AnalyticField:
    f = _compile(expr)
    g = [_compile(sp.diff(expr, s)) for s in (X, Y)]
    return AnalyticField(f, 2, False, lambda x, t: tuple(gi(x, t) for gi in g), name=name)


def _build(name, psi, p, unsteady, final_time, description, amplitude=1.0) -> Problem:
    psi = amplitude * psi
    p = amplitude * p
    u = [sp.diff(psi, Y), -sp.diff(psi, X)]
    lap = [sp.diff(c, X, 2) + sp.diff(c, Y, 2) for c in u]
    grad_p = [sp.diff(p, X), sp.diff(p, Y)]
    dudt = [sp.diff(c, T) for c in u]
    adv = [u[0] * sp.diff(c, X) + u[1] * sp.diff(c, Y) for c in u]
    f_stokes = [dudt[k] - lap[k] + grad_p[k] for k in range(2)]
    f_ns = [f_stokes[k] + adv[k] for k in range(2)]
    return Problem(
        name=name, dim=2,
        velocity=_vector(u, f"{name}:u"),
        pressure=_scalar(p, f"{name}:p"),
        stokes_forcing=_vector(f_stokes, f"{name}:f_stokes", with_derivs=False),
        ns_forcing=_vector(f_ns, f"{name}:f_ns", with_derivs=False),
        unsteady=unsteady, final_time=final_time, description=description)


def _poly_cavity(amplitude):
    psi = X**2 * (1 - X) ** 2 * Y**2 * (1 - Y) ** 2
    p = (X - sp.Rational(1, 2)) * (Y - sp.Rational(1, 2))
    return _build("poly-cavity", psi, p, False, 0.0,
                  "polynomial no-slip cavity flow, bilinear zero-mean pressure", amplitude)


def _stokes_ms(amplitude):
    psi = sp.sin(sp.pi * X) ** 2 * sp.sin(sp.pi * Y) ** 2 / sp.pi
    p = sp.cos(sp.pi * X) * sp.cos(sp.pi * Y)
    return _build("stokes-ms", psi, p, False, 0.0,
                  "trigonometric no-slip flow with nonzero forcing", amplitude)


def _taylor_green(amplitude):
    decay = sp.exp(-2 * sp.pi**2 * T)
    psi = decay * sp.sin(sp.pi * X) ** 2 * sp.sin(sp.pi * Y) ** 2 / sp.pi
    p = decay * sp.cos(sp.pi * X) * sp.cos(sp.pi * Y)
    return _build("taylor-green", psi, p, True, 0.1,
                  "decaying vortex with no-slip walls (bounded-box Taylor-Green analogue)",
                  amplitude)


_CATALOG = {"poly-cavity": _poly_cavity, "stokes-ms": _stokes_ms, "taylor-green": _taylor_green}


def problem_names() -> tuple[str, ...]:
    return tuple(_CATALOG)


@lru_cache(maxsize=None)
def get_problem(name: str, amplitude: float = 1.0) -> Problem:
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(_CATALOG)}") from None
    return factory(amplitude)
