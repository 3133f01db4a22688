"""Face-mean interpolation of smooth fields.

Face means of a divergence-free field give a discretely divergence-free
velocity, up to quadrature error for non-polynomial fields.
"""
import numpy as np

from macflow.fields import l2_norm
from macflow.interpolation import fortin_interpolate
from macflow.macgrid import MacGrid, random_coords
from macflow.problems import get_problem
from macflow.spatial_ops import divergence

rng = np.random.default_rng(11)
phi = get_problem("stokes-ms").velocity
for n in (4, 8, 16, 32):
    grid = MacGrid([random_coords(rng, n, 4.0), random_coords(rng, n, 4.0)])
    u = fortin_interpolate(phi, grid, order=5)
    print(f"{n:3d} cells/axis  ||div u|| = {l2_norm(divergence(u)):.2e}   ||u|| = {l2_norm(u):.4f}")
