"""Standing wave on the unit square: 2D solve and final-time error.

Discretises the first standing mode with the wave-solution basis on a
structured triangulation and reports the energy-norm error at the final
time for two resolutions, demonstrating the O(h^p) behaviour of that
error measure.
"""

import time

from wavetrefftz.analysis import error_final_energy, exact_2d_mode
from wavetrefftz.cli import BENCHMARK_C_SIGMA0
from wavetrefftz.forms import PenaltyConfig
from wavetrefftz.meshing import build_mesh_2d_unit_square, build_time_partition
from wavetrefftz.solver import time_march
import numpy as np

exact = exact_2d_mode()
cfg = PenaltyConfig(c_sigma0=BENCHMARK_C_SIGMA0)
T = 1.0
p = 2

prev = None
for n in (4, 8, 16):
    start = time.perf_counter()
    mesh = build_mesh_2d_unit_square(n)
    partition = build_time_partition(T, n)
    sol, report = time_march(mesh, partition, "trefftz", p, cfg,
                             exact.u0, exact.grad_u0, exact.v0)
    err = error_final_energy(sol, exact)
    line = (f"n={n:2d}  {mesh.n_elems:4d} triangles  "
            f"{sol.space.n_dof:6d} dofs/slab  error={err:.4e}")
    if prev is not None:
        line += f"  order={np.log2(prev / err):.2f}"
    prev = err
    print(line + f"  ({time.perf_counter()-start:.1f}s)")

print("\npoint check at the domain centre, t = 0.5:")
val = sol.eval(np.array([0.5, 0.5]), 0.5)
pts = np.array([[0.5, 0.5, 0.5]])
print(f"  u_h = {val:.6f}   u = {float(exact.u(pts)[0]):.6f}")
