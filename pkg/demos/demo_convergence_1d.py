"""Convergence of the space-time dG method for the 1D Gaussian pulse.

Solves the reflecting-pulse benchmark on a ladder of space-time meshes
(square cells, tau = h = T/N) and prints dG-norm errors with observed
orders: close to p - 1/2 for the wave-solution basis.  Desk scale: runs
in a few seconds.
"""

import time

from wavetrefftz.analysis import convergence_orders, error_dg, exact_1d_gaussian
from wavetrefftz.cli import BENCHMARK_C_SIGMA0
from wavetrefftz.forms import PenaltyConfig
from wavetrefftz.meshing import build_mesh_1d, build_time_partition
from wavetrefftz.solver import time_march

T = 0.25
DELTA = 7.5e-2

exact = exact_1d_gaussian(DELTA)
cfg = PenaltyConfig(c_sigma0=BENCHMARK_C_SIGMA0)

for kind in ("trefftz", "full"):
    print(f"\n{kind} space, p = 3")
    rows = []
    for n_slabs in (5, 10, 20, 40):
        start = time.perf_counter()
        mesh = build_mesh_1d(round(n_slabs / T))
        partition = build_time_partition(T, n_slabs)
        sol, report = time_march(mesh, partition, kind, 3, cfg,
                                 exact.u0, exact.grad_u0, exact.v0)
        err = error_dg(sol, exact)
        rows.append((T / n_slabs, err))
        print(f"  N={n_slabs:3d}  h={T/n_slabs:.5f}  dofs/slab={sol.space.n_dof:5d}  "
              f"error={err:.4e}  ({time.perf_counter()-start:.2f}s)")
    orders = convergence_orders(rows)
    print("  observed orders:", ", ".join(f"{o:.2f}" for o in orders),
          " (expected around 2.5)")
