"""Centred and upwind convection on a divergence-free velocity.

The centred form is skew-symmetric; upwinding adds a non-negative
dissipation.  Both agree with their reconstructed counterparts.
"""
import numpy as np

from macflow.convection import trilinear_b, trilinear_b_reconstructed, upwind_dissipation
from macflow.fields import random_divergence_free, random_velocity
from macflow.macgrid import random_grid

rng = np.random.default_rng(3)
grid = random_grid(rng, 2, max_cells=12)
u = random_divergence_free(grid, rng)
v, w = random_velocity(grid, rng), random_velocity(grid, rng)

print("centred b(u,v,v)           ", f"{trilinear_b(u, v, v):+.2e}")
print("centred b(u,v,w)+b(u,w,v)  ", f"{trilinear_b(u, v, w) + trilinear_b(u, w, v):+.2e}")
print("upwind  b(u,v,v)           ", f"{trilinear_b(u, v, v, 'upwind'):+.4e}")
print("upwind dissipation         ", f"{upwind_dissipation(u, v):+.4e}")
for scheme in ("centred", "upwind"):
    gap = trilinear_b(u, v, w, scheme) - trilinear_b_reconstructed(u, v, w, scheme)
    print(f"{scheme:8s} reformulation gap  {gap:+.2e}")
