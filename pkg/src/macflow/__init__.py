"""MAC discretization of incompressible flow on non-uniform tensor-product grids."""
