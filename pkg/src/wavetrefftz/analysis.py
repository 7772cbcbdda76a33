"""Reference solutions, error functionals and convergence utilities.

Exact solutions are bundles of vectorised evaluators over space-time
points (rows (x_1..x_d, t)).  The 1D benchmark is a Gaussian pulse on
(0, 1) with reflecting ends, realised by d'Alembert's formula applied to
the odd 2-periodic image extension of the initial profile, so the
boundary values vanish identically and no series truncation matters at
double precision.  The 2D benchmark is the first standing mode of the
unit square.

The error in the mesh-dependent dG norm is accumulated slab by slab from
its energy expansion.  For an error field u - u_h with u smooth, the
interior temporal-jump and interior face-jump contributions of u cancel
exactly (the evaluators are single-valued), so those terms are computed
from the discrete part alone; u enters through the two end energies and
the boundary faces.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, pi, sqrt
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .forms import PenaltyConfig, SlabAssembler
from .meshing import SpatialMesh, TimePartition
from .polynomials import Polynomial, monomial_exponents
from .solver import DiscreteSolution
from .spaces import SlabSpace

GAUSSIAN_CENTER = 0.625
DELTA_MAX = 7.5e-2


@dataclass
class ExactSolution:
    """Evaluators for a smooth solution of the wave equation.

    All callables take an (n, d+1) array of space-time points; ``grad``
    and ``grad_t`` return (n, d).  ``grad_t`` (the mixed derivative) is
    optional and only needed by the continuity-side norm.
    """

    d: int
    u: Callable[[np.ndarray], np.ndarray]
    ut: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    tag: str
    grad_t: Optional[Callable[[np.ndarray], np.ndarray]] = None
    meta: dict = None

    def at_time(self, x: np.ndarray, t: float) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.column_stack([x, np.full(x.shape[0], t)])

    def u0(self, x: np.ndarray) -> np.ndarray:
        return self.u(self.at_time(x, 0.0))

    def v0(self, x: np.ndarray) -> np.ndarray:
        return self.ut(self.at_time(x, 0.0))

    def grad_u0(self, x: np.ndarray) -> np.ndarray:
        return self.grad(self.at_time(x, 0.0))


def exact_1d_gaussian(delta: float, horizon: float = 8.0) -> ExactSolution:
    """Reflecting Gaussian pulse on (0, 1), unit wave speed.

    ``horizon`` bounds the evaluation times; the image count grows with
    it.  The pulse must be narrow enough that its tails at the boundary
    stay below round-off, which restricts delta to at most 7.5e-2.
    """
    if not 0 < delta <= DELTA_MAX:
        raise ValueError(f"delta must lie in (0, {DELTA_MAX}], got {delta}")
    n_images = int(ceil(horizon)) + 2
    shifts = 2.0 * np.arange(-n_images, n_images + 1)
    inv_d2 = 1.0 / delta**2

    def profile(y, order):
        # order-th derivative of the odd periodised Gaussian
        arg_p = y[..., None] - shifts - GAUSSIAN_CENTER
        arg_m = -y[..., None] - shifts - GAUSSIAN_CENTER
        g_p = np.exp(-(arg_p**2) * inv_d2)
        g_m = np.exp(-(arg_m**2) * inv_d2)
        if order == 0:
            return (g_p - g_m).sum(axis=-1)
        if order == 1:
            # chain rule through the reflected argument
            return (-2.0 * inv_d2) * (arg_p * g_p + arg_m * g_m).sum(axis=-1)
        if order == 2:
            h_p = (-2.0 * inv_d2 + 4.0 * inv_d2**2 * arg_p**2) * g_p
            h_m = (-2.0 * inv_d2 + 4.0 * inv_d2**2 * arg_m**2) * g_m
            return (h_p - h_m).sum(axis=-1)
        raise ValueError(order)

    def u(pts):
        pts = np.asarray(pts, dtype=float)
        return 0.5 * (profile(pts[:, 0] + pts[:, 1], 0) + profile(pts[:, 0] - pts[:, 1], 0))

    def ut(pts):
        pts = np.asarray(pts, dtype=float)
        return 0.5 * (profile(pts[:, 0] + pts[:, 1], 1) - profile(pts[:, 0] - pts[:, 1], 1))

    def grad(pts):
        pts = np.asarray(pts, dtype=float)
        gx = 0.5 * (profile(pts[:, 0] + pts[:, 1], 1) + profile(pts[:, 0] - pts[:, 1], 1))
        return gx[:, None]

    def grad_t(pts):
        pts = np.asarray(pts, dtype=float)
        gxt = 0.5 * (profile(pts[:, 0] + pts[:, 1], 2) - profile(pts[:, 0] - pts[:, 1], 2))
        return gxt[:, None]

    return ExactSolution(d=1, u=u, ut=ut, grad=grad, grad_t=grad_t,
                         tag=f"gaussian-1d(delta={delta:g})",
                         meta={"delta": delta, "images_per_side": n_images})


def exact_energy_gaussian(delta: float) -> float:
    """Conserved energy of the Gaussian pulse: (1/delta) sqrt(pi)/(2 sqrt(2))."""
    if not 0 < delta <= DELTA_MAX:
        raise ValueError(f"delta must lie in (0, {DELTA_MAX}], got {delta}")
    return sqrt(pi) / (2.0 * sqrt(2.0) * delta)


def exact_2d_mode() -> ExactSolution:
    """First standing mode of the unit square, unit wave speed."""
    w = sqrt(2.0) * pi

    def u(pts):
        pts = np.asarray(pts, dtype=float)
        return np.cos(w * pts[:, 2]) * np.sin(pi * pts[:, 0]) * np.sin(pi * pts[:, 1])

    def ut(pts):
        pts = np.asarray(pts, dtype=float)
        return -w * np.sin(w * pts[:, 2]) * np.sin(pi * pts[:, 0]) * np.sin(pi * pts[:, 1])

    def grad(pts):
        pts = np.asarray(pts, dtype=float)
        c = np.cos(w * pts[:, 2])
        return np.column_stack([
            pi * c * np.cos(pi * pts[:, 0]) * np.sin(pi * pts[:, 1]),
            pi * c * np.sin(pi * pts[:, 0]) * np.cos(pi * pts[:, 1]),
        ])

    def grad_t(pts):
        pts = np.asarray(pts, dtype=float)
        s = -w * np.sin(w * pts[:, 2])
        return np.column_stack([
            pi * s * np.cos(pi * pts[:, 0]) * np.sin(pi * pts[:, 1]),
            pi * s * np.sin(pi * pts[:, 0]) * np.cos(pi * pts[:, 1]),
        ])

    return ExactSolution(d=2, u=u, ut=ut, grad=grad, grad_t=grad_t, tag="mode-2d")


# -- norms and error functionals -------------------------------------------


def _error_knot_state(sol: DiscreteSolution, exact: ExactSolution, knot: int,
                      side: str, degree: int):
    asm = sol.assembler
    t = float(sol.partition.knots[knot])
    return asm.knot_state_exact(exact, t, degree) - sol.knot_state(knot, side, degree)


def dg_norm_sq_discrete(sol: DiscreteSolution) -> float:
    """Square of the dG norm of a discrete solution, from the energy
    expansion: end energies, temporal-jump energies, face-time penalties."""
    asm = sol.assembler
    n = sol.n_slabs
    total = asm.energy(sol.knot_state(0, "right")) + asm.energy(sol.knot_state(n, "left"))
    for k in range(1, n):
        jump = sol.knot_state(k, "right") - sol.knot_state(k, "left")
        total += asm.energy(jump)
    for m in range(n):
        s1, s2 = asm.sigma_face_terms(asm.face_time_state_discrete(sol.coeffs[m]))
        total += s1 + s2
    return total


def dg_norm_sq_exact(exact: ExactSolution, mesh: SpatialMesh, partition: TimePartition,
                     p: int, kind: str = "trefftz", cfg: PenaltyConfig | None = None) -> float:
    """Square of the dG norm of a globally smooth function (temporal jumps
    vanish; spatial jumps survive only on the boundary)."""
    cfg = cfg or PenaltyConfig()
    tau = float(partition.tau[0])
    asm = SlabAssembler(SlabSpace(mesh, p, kind, tau), cfg)
    deg = cfg.data_degree(p)
    total = asm.energy(asm.knot_state_exact(exact, float(partition.knots[0]), deg))
    total += asm.energy(asm.knot_state_exact(exact, float(partition.knots[-1]), deg))
    for m in range(partition.n_slabs):
        t0, t1 = partition.slab(m)
        state = asm.face_time_state_exact(exact, 0.5 * (t0 + t1), deg)
        s1, s2 = asm.sigma_face_terms(state)
        total += s1 + s2
    return total


def dg_norm_sq_error(sol: DiscreteSolution, exact: ExactSolution) -> float:
    """Square of the dG norm of exact - discrete.

    Interior temporal jumps and interior spatial jumps of the smooth part
    cancel exactly, leaving the discrete jumps; the smooth part enters the
    two end energies and the boundary face terms.
    """
    asm = sol.assembler
    cfg = asm.cfg
    deg = cfg.data_degree(sol.space.p)
    n = sol.n_slabs
    total = asm.energy(_error_knot_state(sol, exact, 0, "right", deg))
    total += asm.energy(_error_knot_state(sol, exact, n, "left", deg))
    for k in range(1, n):
        jump = sol.knot_state(k, "left") - sol.knot_state(k, "right")
        total += asm.energy(jump)
    for m in range(n):
        t0, t1 = sol.partition.slab(m)
        state = asm.face_time_state_exact(exact, 0.5 * (t0 + t1), deg) \
            - asm.face_time_state_discrete(sol.coeffs[m], deg)
        s1, s2 = asm.sigma_face_terms(state)
        total += s1 + s2
    return total


def error_dg(sol: DiscreteSolution, exact: ExactSolution) -> float:
    return sqrt(dg_norm_sq_error(sol, exact))


def dgstar_norm_sq_error(sol: DiscreteSolution, exact: ExactSolution) -> float:
    """Square of the continuity-side norm of exact - discrete."""
    asm = sol.assembler
    deg = asm.cfg.data_degree(sol.space.p)
    n = sol.n_slabs
    total = 0.0
    for k in range(1, n + 1):
        state = _error_knot_state(sol, exact, k, "left", deg)
        total += asm.dgstar_knot_terms(state)
    for m in range(n):
        t0, t1 = sol.partition.slab(m)
        state = asm.face_time_state_exact(exact, 0.5 * (t0 + t1), deg, extended=True) \
            - asm.face_time_state_discrete(sol.coeffs[m], deg, extended=True)
        total += asm.dgstar_face_terms(state)
    return total


def dgstar_norm_sq_exact(exact: ExactSolution, mesh: SpatialMesh, partition: TimePartition,
                         p: int, kind: str = "trefftz", cfg: PenaltyConfig | None = None) -> float:
    """Square of the continuity-side norm of a globally smooth function.

    Jump-driven terms vanish on interior faces; the knot traces, the
    face-time averages and the boundary contributions survive.
    """
    cfg = cfg or PenaltyConfig()
    tau = float(partition.tau[0])
    asm = SlabAssembler(SlabSpace(mesh, p, kind, tau), cfg)
    deg = cfg.data_degree(p)
    total = 0.0
    for k in range(1, partition.n_slabs + 1):
        state = asm.knot_state_exact(exact, float(partition.knots[k]), deg)
        total += asm.dgstar_knot_terms(state)
    for m in range(partition.n_slabs):
        t0, t1 = partition.slab(m)
        state = asm.face_time_state_exact(exact, 0.5 * (t0 + t1), deg, extended=True)
        total += asm.dgstar_face_terms(state)
    return total


def dgstar_norm_sq_discrete(sol: DiscreteSolution) -> float:
    asm = sol.assembler
    n = sol.n_slabs
    total = 0.0
    for k in range(1, n + 1):
        total += asm.dgstar_knot_terms(sol.knot_state(k, "left"))
    for m in range(n):
        state = asm.face_time_state_discrete(sol.coeffs[m], extended=True)
        total += asm.dgstar_face_terms(state)
    return total


def error_final_energy(sol: DiscreteSolution, exact: ExactSolution) -> float:
    """Energy norm of the error at the final time (left trace):
    sqrt(1/2 ||u_t - u_ht||^2 + 1/2 ||grad u - grad u_h||^2)."""
    deg = sol.assembler.cfg.data_degree(sol.space.p)
    state = _error_knot_state(sol, exact, sol.n_slabs, "left", deg)
    total = 0.0
    for eg in state.elems:
        total += 0.5 * float(np.sum(eg["w"] * eg["ut"] ** 2))
        total += 0.5 * float(np.einsum("q,fqd->", eg["w"], eg["grad"] ** 2))
    return sqrt(total)


def error_delta(sol: DiscreteSolution, exact: ExactSolution, delta: float) -> float:
    """Final-time energy error scaled by sqrt(delta), the natural relative
    measure for the pulse of width delta."""
    return sqrt(delta) * error_final_energy(sol, exact)


def physical_energy_trace(sol: DiscreteSolution) -> np.ndarray:
    """Rows (t_n, E(t_n)) of the physical energy 1/2||u_t||^2+1/2||grad u||^2;
    left traces at every knot, the initial trace at t_0."""
    asm = sol.assembler
    rows = [(float(sol.partition.knots[0]),
             _physical_energy(sol.knot_state(0, "right")))]
    for k in range(1, sol.n_slabs + 1):
        rows.append((float(sol.partition.knots[k]),
                     _physical_energy(sol.knot_state(k, "left"))))
    return np.array(rows)


def _physical_energy(state) -> float:
    total = 0.0
    for eg in state.elems:
        total += 0.5 * float(np.sum(eg["w"] * eg["ut"] ** 2))
        total += 0.5 * float(np.einsum("q,fqd->", eg["w"], eg["grad"] ** 2))
    return total


def discrete_energy(sol: DiscreteSolution, t: float, side: str = "left") -> float:
    """Penalised energy of the discrete solution at any time in [0, T].

    ``side`` picks the slab when t is a partition knot; inside a slab both
    sides agree.
    """
    knots = sol.partition.knots
    if not knots[0] - 1e-12 <= t <= knots[-1] + 1e-12:
        raise ValueError(f"time {t} outside [{knots[0]}, {knots[-1]}]")
    n = sol._slab_of(float(t), side)
    t0, t1 = sol.partition.slab(n)
    t_loc = float(np.clip(2.0 * (t - t0) / (t1 - t0) - 1.0, -1.0, 1.0))
    state = sol.assembler.knot_state_discrete(sol.coeffs[n], t_loc)
    return sol.assembler.energy(state)


def discrete_energy_trace(sol: DiscreteSolution) -> np.ndarray:
    """Rows (t_n, E_h(t_n)) of the penalised energy, left traces (initial
    trace at t_0); this is the quantity that decreases slab by slab."""
    asm = sol.assembler
    rows = [(float(sol.partition.knots[0]), asm.energy(sol.knot_state(0, "right")))]
    for k in range(1, sol.n_slabs + 1):
        rows.append((float(sol.partition.knots[k]), asm.energy(sol.knot_state(k, "left"))))
    return np.array(rows)


# -- characteristic (1D) projection ----------------------------------------


def _legendre_tools(p: int, n_quad: int):
    """Quadrature nodes plus the matrices of the interval projector."""
    from numpy.polynomial import legendre as L

    x, w = np.polynomial.legendre.leggauss(n_quad)
    vander = L.legvander(x, p)                       # P_k at nodes
    dmat = np.zeros((p, n_quad))                     # P_k' at nodes, k < p
    for k in range(p):
        ck = np.zeros(k + 1)
        ck[k] = 1.0
        dmat[k] = L.legval(x, L.legder(ck)) if k > 0 else 0.0
    pk_one = np.ones(p)                              # P_k(1)
    pk_minus = np.array([(-1.0) ** k for k in range(p)])
    integ = np.zeros((p, p + 1))                     # Legendre coeffs of int P_k
    integ[0, 0] = 1.0
    integ[0, 1] = 1.0
    for k in range(1, p):
        integ[k, k + 1] = 1.0 / (2 * k + 1)
        integ[k, k - 1] = -1.0 / (2 * k + 1)
    leg2mono = np.zeros((p + 1, p + 1))
    for k in range(p + 1):
        ck = np.zeros(k + 1)
        ck[k] = 1.0
        leg2mono[: k + 1, k] = L.leg2poly(ck)
    return x, w, vander, dmat, pk_one, pk_minus, integ, leg2mono


def _interval_projection_coeffs(vals_nodes: np.ndarray, vals_ends: np.ndarray,
                                tools) -> np.ndarray:
    """Monomial coefficients (reference variable) of the projector that
    matches the left endpoint and least-squares-fits the derivative.

    vals_nodes: (E, m) function values at the Gauss nodes;
    vals_ends: (E, 2) values at -1 and +1.
    """
    x, w, vander, dmat, pk_one, pk_minus, integ, leg2mono = tools
    p = integ.shape[0]
    # L2 coefficients of the derivative via integration by parts:
    # (2k+1)/2 * (f(1) P_k(1) - f(-1) P_k(-1) - int f P_k')
    moments = vals_nodes @ (w[:, None] * dmat.T)         # (E, p)
    bk = (vals_ends[:, 1][:, None] * pk_one[None, :]
          - vals_ends[:, 0][:, None] * pk_minus[None, :] - moments)
    bk *= (2.0 * np.arange(p) + 1.0)[None, :] / 2.0
    leg = bk @ integ                                      # (E, p+1)
    leg[:, 0] += vals_ends[:, 0]
    return leg @ leg2mono.T


def trefftz_projection_1d(exact: ExactSolution, mesh: SpatialMesh,
                          partition: TimePartition, p: int,
                          cfg: PenaltyConfig | None = None) -> DiscreteSolution:
    """Element-wise characteristic projection onto the 1D Trefftz space.

    Splits the solution on each space-time element into left- and
    right-moving profiles (recovered from value, slope and velocity data
    by quadrature), projects each profile with the endpoint-anchored
    interval projector, and recombines into a local space-time polynomial,
    which is a wave solution by construction.

    Stores the per-element distance of that polynomial from the basis span
    in ``projection_residual`` on the returned solution (coefficient
    2-norm, relative).
    """
    if mesh.dim != 1:
        raise ValueError("the characteristic projection is one-dimensional")
    if p < 1:
        raise ValueError("projection needs degree p >= 1")
    if not np.allclose(mesh.a, mesh.a[0]):
        raise ValueError("projection expects a constant coefficient")
    widths = mesh.measures
    if not np.allclose(widths, widths[0], rtol=1e-12):
        raise ValueError("projection expects a uniform mesh")
    tau = partition.tau
    if not np.allclose(tau, tau[0], rtol=1e-12):
        raise ValueError("projection expects a uniform partition")

    cfg = cfg or PenaltyConfig()
    space = SlabSpace(mesh, p, "trefftz", float(tau[0]))
    asm = SlabAssembler(space, cfg)

    c = sqrt(float(mesh.a[0]))
    s_x = float(space.s_x[0])
    s_t = space.s_t
    half = s_x / c + s_t                      # characteristic half-width
    n_quad = cfg.data_degree(p) // 2 + 1
    tools = _legendre_tools(p, n_quad)
    nodes = np.concatenate([tools[0], [-1.0, 1.0]])

    # Shared expansion of the two characteristic variables in local
    # coordinates: xi_hat = alpha x_hat +/- beta t_hat.
    alpha = s_x / (c * half)
    beta = s_t / half
    exps = monomial_exponents(2, p)
    basis_c = asm.tables[0].val
    xforms = []
    for sgn in (1.0, -1.0):
        z = Polynomial(1, {(1, 0): alpha, (0, 1): sgn * beta})
        rows = [Polynomial.constant(1, 1.0)]
        for _ in range(p):
            rows.append(rows[-1] * z)
        xforms.append(np.array([
            [poly.terms.get(tuple(e), 0.0) for e in exps] for poly in rows
        ]))

    centers = space.centers[:, 0]
    x_lo = centers - s_x
    gl01, w01 = np.polynomial.legendre.leggauss(n_quad)
    gl01 = 0.5 * (gl01 + 1.0)
    w01 = 0.5 * w01

    n_elems = mesh.n_elems
    coeffs_all = np.zeros((partition.n_slabs, space.n_dof))
    worst_resid = 0.0
    for n in range(partition.n_slabs):
        t0, t1 = partition.slab(n)
        t_mid = 0.5 * (t0 + t1)
        mono = np.zeros((n_elems, exps.shape[0]))
        for fam in (0, 1):
            # points on the characteristic line through each sample node,
            # clamped into the element
            if fam == 0:
                dx = np.clip(c * (s_t + half * nodes), -s_x, s_x)
                t_star = t_mid + half * nodes - dx / c
            else:
                dx = np.clip(c * (half * nodes - s_t), -s_x, s_x)
                t_star = t_mid - half * nodes + dx / c
            xs = centers[:, None] + dx[None, :]        # (E, m)
            # v = c * int_t0^t u_x(x, s) ds + (1/c) int_x0^x u_t(x', t0) dx'
            vvals = np.zeros_like(xs)
            for i, ti in enumerate(t_star):
                span = ti - t0
                if abs(span) > 1e-15:
                    s_nodes = t0 + span * gl01
                    pts = np.column_stack([
                        np.repeat(xs[:, i], n_quad),
                        np.tile(s_nodes, n_elems),
                    ])
                    gx = exact.grad(pts)[:, 0].reshape(n_elems, n_quad)
                    vvals[:, i] += c * span * (gx @ w01)
                xspan = xs[:, i] - x_lo                # (E,)
                x_nodes = x_lo[:, None] + xspan[:, None] * gl01[None, :]
                pts = np.column_stack([
                    x_nodes.ravel(),
                    np.full(n_elems * n_quad, t0),
                ])
                utv = exact.ut(pts).reshape(n_elems, n_quad)
                vvals[:, i] += (utv @ w01) * xspan / c
            pts = np.column_stack([xs.ravel(), np.repeat(t_star[None, :], n_elems, axis=0).ravel()])
            uvals = exact.u(pts).reshape(n_elems, -1)
            fvals = 0.5 * (uvals + vvals) if fam == 0 else 0.5 * (uvals - vvals)
            q = _interval_projection_coeffs(fvals[:, :n_quad], fvals[:, n_quad:], tools)
            mono += q @ xforms[fam]
        proj = mono @ basis_c                          # (E, nf)
        back = proj @ basis_c.T
        norms = np.linalg.norm(mono, axis=1)
        resid = np.linalg.norm(mono - back, axis=1) / np.maximum(norms, 1e-300)
        worst_resid = max(worst_resid, float(resid.max()))
        coeffs_all[n] = proj.ravel()
    sol = DiscreteSolution(mesh, partition, space, asm, coeffs_all)
    sol.projection_residual = worst_resid
    return sol


# -- convergence bookkeeping ------------------------------------------------


@dataclass
class ConvergenceRow:
    N: int
    h: float
    dofs: int
    error: float
    order: Optional[float] = None


def convergence_orders(rows: Sequence[Tuple[float, float]]) -> List[float]:
    """Observed orders between consecutive (h, error) rows."""
    orders = []
    for (h0, e0), (h1, e1) in zip(rows[:-1], rows[1:]):
        if e0 <= 0 or e1 <= 0:
            raise ValueError("errors must be positive to compute orders")
        orders.append(float(np.log(e0 / e1) / np.log(h0 / h1)))
    return orders


def attach_orders(rows: List[ConvergenceRow]) -> List[ConvergenceRow]:
    for prev, cur in zip(rows[:-1], rows[1:]):
        cur.order = float(np.log(prev.error / cur.error) / np.log(prev.h / cur.h))
    return rows
