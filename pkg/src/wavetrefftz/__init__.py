"""Space-time interior-penalty dG solver for the scalar wave equation.

The discrete spaces are piecewise space-time polynomials on time slabs,
either the full total-degree space or its Trefftz subspace of local
solutions of the homogeneous wave equation.  Submodules:

- ``polynomials``: exact sparse polynomial algebra (values, derivatives,
  wave operator, affine composition).
- ``basis``: element-local Trefftz and full polynomial bases.
- ``meshing``: 1D interval / 2D triangle meshes, time partitions and
  exact quadrature rules.
- ``spaces``: per-slab discrete spaces with element frames and DOF maps.
- ``forms``: penalty parameters, slab bilinear forms, discrete energy
  and the mesh-dependent norms.
- ``solver``: slab-by-slab time marching and solution evaluation.
- ``analysis``: exact reference solutions, error functionals,
  the 1D characteristic projection and convergence orders.
- ``cli``: experiment runner with CSV/JSON output.
"""

from . import polynomials, basis, meshing, spaces, forms, solver, analysis

__all__ = ["polynomials", "basis", "meshing", "spaces", "forms", "solver", "analysis"]
__version__ = "0.1.0"
