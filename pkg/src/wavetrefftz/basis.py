"""Element-local discrete bases: Trefftz and full polynomial spaces.

Bases live in element-local coordinates.  A frame maps the physical
space-time element onto a unit-sized local domain via
``local = (physical - center) / scale`` with separate spatial and
temporal half-width scales.  A local function f then represents the
physical function u(X) = f((X - center) / scale), and u solves the wave
equation with coefficient a exactly when f solves it with the
frame-adjusted coefficient a * s_t^2 / s_x^2.

The Trefftz basis spans the kernel of the wave operator restricted to
polynomials of total degree p; it is extracted as the SVD null space of
the operator matrix in graded-lex monomial coordinates, which also makes
the basis coefficient vectors orthonormal.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import List, Tuple

import numpy as np

from .polynomials import (
    Polynomial,
    diff_matrix,
    from_coeff_vector,
    monomial_exponents,
)

KIND_TREFFTZ = "trefftz"
KIND_FULL = "full"

# Relative singular-value threshold for kernel extraction.
_KERNEL_RTOL = 1e-10


@dataclass(frozen=True)
class ElementFrame:
    """Affine frame of one space-time element.

    center: space-time centroid (x_1, ..., x_d, t_mid).
    scale:  positive half-widths (h_K/2 in each spatial direction, tau_n/2
            in time).  Spatial scales are isotropic for the bases built here.
    """

    center: Tuple[float, ...]
    scale: Tuple[float, ...]

    def __post_init__(self):
        if len(self.center) != len(self.scale):
            raise ValueError("center and scale must have equal length")
        if any(s <= 0 for s in self.scale):
            raise ValueError(f"frame scales must be positive, got {self.scale}")

    @property
    def dim(self) -> int:
        return len(self.center) - 1

    @property
    def s_x(self) -> float:
        return self.scale[0]

    @property
    def s_t(self) -> float:
        return self.scale[-1]

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - np.array(self.center)) / np.array(self.scale)

    def to_physical(self, local: np.ndarray) -> np.ndarray:
        return np.asarray(local, dtype=float) * np.array(self.scale) + np.array(self.center)


def identity_frame(d: int) -> ElementFrame:
    return ElementFrame(center=(0.0,) * (d + 1), scale=(1.0,) * (d + 1))


def trefftz_dim(p: int, d: int) -> int:
    """Dimension of the local degree-p Trefftz space in d space dimensions."""
    if p < 0:
        raise ValueError(f"degree must be nonnegative, got {p}")
    if d == 1:
        return 2 * p + 1
    if d == 2:
        return (p + 1) ** 2
    if d == 3:
        return (p + 1) * (p + 2) * (2 * p + 3) // 6
    raise ValueError(f"spatial dimension must be 1, 2 or 3, got {d}")


def full_dim(p: int, d: int) -> int:
    """Dimension of the space of total degree <= p in d+1 variables."""
    if p < 0:
        raise ValueError(f"degree must be nonnegative, got {p}")
    return comb(p + d + 1, d + 1)


class LocalBasis:
    """Ordered basis of one element's local discrete space.

    Functions are stored both as sparse Polynomials (local coordinates)
    and as a dense coefficient matrix over the graded-lex monomial table,
    which downstream assembly uses for vectorised evaluation.
    """

    def __init__(self, kind: str, degree: int, coefficient: float, frame: ElementFrame,
                 exps: np.ndarray, coeff_matrix: np.ndarray):
        self.kind = kind
        self.degree = degree
        self.coefficient = coefficient  # physical wave-speed coefficient a_K
        self.frame = frame
        self.exps = exps                # (n_monomials, d+1) graded-lex
        self.coeff_matrix = coeff_matrix  # (n_monomials, n_funcs)
        self.dim = frame.dim
        d = self.dim
        self.funcs: List[Polynomial] = [
            from_coeff_vector(d, exps, coeff_matrix[:, j]) for j in range(coeff_matrix.shape[1])
        ]

    @property
    def n_funcs(self) -> int:
        return self.coeff_matrix.shape[1]

    @property
    def adjusted_coefficient(self) -> float:
        """Wave-speed coefficient seen in local coordinates."""
        return self.coefficient * self.frame.s_t ** 2 / self.frame.s_x ** 2


def _wave_operator_matrix(p: int, d: int, a_adj: float) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix of v -> v_tt - a_adj * laplace(v) from P_p to P_{p-2} coefficients."""
    exps = monomial_exponents(d + 1, p)
    out_exps = monomial_exponents(d + 1, p - 2)
    d_t = diff_matrix(exps, d)
    op = d_t @ d_t
    for j in range(d):
        d_j = diff_matrix(exps, j)
        op = op - a_adj * (d_j @ d_j)
    # Restrict rows to the degree <= p-2 block (graded-lex prefix).
    op = op[: out_exps.shape[0], :]
    return exps, op


def build_trefftz_basis(p: int, d: int, a: float, frame: ElementFrame | None = None) -> LocalBasis:
    """Orthonormal basis of local polynomial wave solutions of degree <= p.

    The span equals the kernel of v -> v_tt - a_adj * laplace(v) on total
    degree <= p in local coordinates, a_adj being the frame-adjusted
    coefficient.  Raises if the numerical kernel rank disagrees with the
    known dimension.
    """
    if a <= 0:
        raise ValueError(f"coefficient must be positive, got {a}")
    if frame is None:
        frame = identity_frame(d)
    expected = trefftz_dim(p, d)
    a_adj = a * frame.s_t ** 2 / frame.s_x ** 2
    exps, op = _wave_operator_matrix(p, d, a_adj)
    n = exps.shape[0]
    if op.shape[0] == 0:
        kernel = np.eye(n)
    else:
        _, svals, vt = np.linalg.svd(op)
        tol = _KERNEL_RTOL * svals[0] if svals.size else 0.0
        rank = int(np.sum(svals > tol))
        kernel = vt[rank:, :].T  # columns orthonormal
    if kernel.shape[1] != expected:
        raise RuntimeError(
            f"kernel extraction found {kernel.shape[1]} functions, expected {expected} "
            f"(p={p}, d={d}, adjusted coefficient {a_adj:.3g})"
        )
    return LocalBasis(KIND_TREFFTZ, p, a, frame, exps, kernel)


def build_full_basis(p: int, d: int, frame: ElementFrame | None = None, a: float = 1.0) -> LocalBasis:
    """All monomials of total degree <= p in local coordinates."""
    if frame is None:
        frame = identity_frame(d)
    exps = monomial_exponents(d + 1, p)
    return LocalBasis(KIND_FULL, p, a, frame, exps, np.eye(exps.shape[0]))


def build_basis(kind: str, p: int, d: int, a: float, frame: ElementFrame | None = None) -> LocalBasis:
    if kind == KIND_TREFFTZ:
        return build_trefftz_basis(p, d, a, frame)
    if kind == KIND_FULL:
        return build_full_basis(p, d, frame, a)
    raise ValueError(f"unknown basis kind {kind!r}")


def verify_trefftz(basis: LocalBasis) -> float:
    """Max relative wave-operator residual of the basis functions.

    For each function, the coefficient max-norm of the adjusted wave
    operator applied to it, relative to the function's own max-norm.
    """
    if basis.kind != KIND_TREFFTZ:
        raise ValueError("verify_trefftz requires a Trefftz basis")
    from .polynomials import wave_operator

    a_adj = basis.adjusted_coefficient
    worst = 0.0
    for f in basis.funcs:
        denom = f.coeff_max_norm()
        if denom == 0.0:
            continue
        worst = max(worst, wave_operator(f, a_adj).coeff_max_norm() / denom)
    return worst


def projection_residual(basis: LocalBasis, poly: Polynomial) -> float:
    """Relative distance of ``poly`` (local coordinates) from span(basis).

    Uses the orthonormality of the basis coefficient vectors; the residual
    is measured in the monomial coefficient 2-norm relative to ``poly``.
    """
    from .polynomials import coeff_vector

    vec = coeff_vector(poly, basis.exps)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return 0.0
    c = basis.coeff_matrix
    resid = vec - c @ (c.T @ vec)
    return float(np.linalg.norm(resid) / norm)
