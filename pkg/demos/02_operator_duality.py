"""Discrete divergence, gradient and Laplacian on a random grid.

The divergence is minus the adjoint of the gradient and the Laplacian is
the operator of the discrete H1 product, both to round-off.
"""
import numpy as np

from macflow.fields import h1_inner, l2_inner, random_pressure, random_velocity
from macflow.macgrid import random_grid
from macflow.spatial_ops import divergence, laplacian, pressure_gradient

rng = np.random.default_rng(7)
for dim in (2, 3):
    grid = random_grid(rng, dim, max_cells=10)
    q, v, w = random_pressure(grid, rng), random_velocity(grid, rng), random_velocity(grid, rng)

    duality = l2_inner(q, divergence(v)) + l2_inner(pressure_gradient(q), v)
    adjoint = l2_inner(laplacian(v), w) - h1_inner(v, w)
    print(f"{dim}D grid {grid.n}:")
    print(f"  (q, div v) + (grad q, v) = {duality:+.2e}")
    print(f"  (-lap v, w) - [v, w]     = {adjoint:+.2e}")
