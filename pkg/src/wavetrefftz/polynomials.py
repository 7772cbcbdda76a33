"""Exact sparse polynomial algebra in d spatial variables plus time.

A polynomial is a dictionary mapping multi-index exponent tuples to float
coefficients.  The variable order is fixed as (x_1, ..., x_d, t), time last.
Zero coefficients are never stored, so the empty dictionary is the zero
polynomial and identity of sparse representations is meaningful.

Multi-indices are enumerated everywhere in graded lexicographic order
(total degree first, then lexicographic on the exponent tuple); this fixes
a deterministic layout for coefficient vectors, operator matrices and
degree-of-freedom numbering downstream.
"""

from __future__ import annotations

from typing import Dict, Sequence, Tuple

import numpy as np

MultiIndex = Tuple[int, ...]

_VAR_NAMES = ("x", "y", "z")


class Polynomial:
    """Sparse multivariate polynomial in ``dim`` spatial variables and time.

    Attributes
    ----------
    dim : int
        Spatial dimension d; the polynomial lives in d+1 variables.
    terms : dict
        Map from exponent tuple (length d+1, time last) to coefficient.
        Canonical form: no zero coefficients stored.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Dict[MultiIndex, float] | None = None):
        if dim < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {dim}")
        self.dim = dim
        self.terms: Dict[MultiIndex, float] = {}
        if terms:
            nvars = dim + 1
            for exps, coeff in terms.items():
                exps = tuple(int(e) for e in exps)
                if len(exps) != nvars:
                    raise ValueError(
                        f"exponent tuple {exps} has length {len(exps)}, expected {nvars}"
                    )
                if any(e < 0 for e in exps):
                    raise ValueError(f"negative exponent in {exps}")
                if coeff != 0.0:
                    self.terms[exps] = self.terms.get(exps, 0.0) + float(coeff)
            self.terms = {e: c for e, c in self.terms.items() if c != 0.0}

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, value: float) -> "Polynomial":
        return cls(dim, {(0,) * (dim + 1): value})

    @classmethod
    def variable(cls, dim: int, var: int) -> "Polynomial":
        """The coordinate polynomial for variable ``var`` (d = time)."""
        exps = [0] * (dim + 1)
        exps[var] = 1
        return cls(dim, {tuple(exps): 1.0})

    @classmethod
    def monomial(cls, dim: int, exps: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls(dim, {tuple(exps): coeff})

    # -- basic queries -------------------------------------------------

    @property
    def nvars(self) -> int:
        return self.dim + 1

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def coeff_max_norm(self) -> float:
        if not self.terms:
            return 0.0
        return max(abs(c) for c in self.terms.values())

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_compatible(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.dim, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        self._check_compatible(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) - c
        return Polynomial(self.dim, out)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.dim, {e: -c for e, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            self._check_compatible(other)
            out: Dict[MultiIndex, float] = {}
            for ea, ca in self.terms.items():
                for eb, cb in other.terms.items():
                    e = tuple(i + j for i, j in zip(ea, eb))
                    out[e] = out.get(e, 0.0) + ca * cb
            return Polynomial(self.dim, out)
        return Polynomial(self.dim, {e: c * float(other) for e, c in self.terms.items()})

    __rmul__ = __mul__

    def _check_compatible(self, other: "Polynomial"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.dim == other.dim and self.terms == other.terms

    def allclose(self, other: "Polynomial", rel: float = 1e-12) -> bool:
        """Coefficient-wise comparison relative to the larger max-norm."""
        self._check_compatible(other)
        scale = max(self.coeff_max_norm(), other.coeff_max_norm())
        if scale == 0.0:
            return True
        diff = self - other
        return diff.coeff_max_norm() <= rel * scale

    # -- calculus ------------------------------------------------------

    def diff(self, var: int) -> "Polynomial":
        """Exact partial derivative with respect to variable ``var``."""
        if not 0 <= var <= self.dim:
            raise ValueError(f"variable index {var} out of range for dim {self.dim}")
        out: Dict[MultiIndex, float] = {}
        for e, c in self.terms.items():
            k = e[var]
            if k == 0:
                continue
            de = list(e)
            de[var] = k - 1
            out[tuple(de)] = out.get(tuple(de), 0.0) + k * c
        return Polynomial(self.dim, out)

    def eval(self, point: Sequence[float]) -> float:
        """Evaluate at a single space-time point (x_1, ..., x_d, t)."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.nvars,):
            raise ValueError(f"point has shape {point.shape}, expected ({self.nvars},)")
        total = 0.0
        for e, c in self.terms.items():
            term = c
            for xi, ei in zip(point, e):
                if ei:
                    term *= xi ** ei
            total += term
        return total

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (n, d+1) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.nvars:
            raise ValueError(f"points must have shape (n, {self.nvars})")
        out = np.zeros(points.shape[0])
        for e, c in self.terms.items():
            term = np.full(points.shape[0], c)
            for j, ej in enumerate(e):
                if ej:
                    term *= points[:, j] ** ej
            out += term
        return out

    def compose_affine(self, scale: Sequence[float], shift: Sequence[float]) -> "Polynomial":
        """Return Q with Q(y) = P(scale * y + shift), expanded exactly.

        ``scale`` acts diagonally (one factor per variable); each univariate
        power (s_j y_j + c_j)^e is expanded by the binomial theorem.
        """
        scale = [float(s) for s in scale]
        shift = [float(s) for s in shift]
        if len(scale) != self.nvars or len(shift) != self.nvars:
            raise ValueError("scale/shift must have one entry per variable")
        if any(s == 0.0 for s in scale):
            raise ValueError("zero scale factor")
        # Expansion tables per variable: (s y + c)^e -> coefficients of y^k.
        max_e = [0] * self.nvars
        for e in self.terms:
            for j, ej in enumerate(e):
                max_e[j] = max(max_e[j], ej)
        tables = []
        for j in range(self.nvars):
            # tab[e, k] = coefficient of y^k in (s y + c)^e
            tab = np.zeros((max_e[j] + 1, max_e[j] + 1))
            tab[0, 0] = 1.0
            for e in range(1, max_e[j] + 1):
                tab[e, 1 : e + 1] = scale[j] * tab[e - 1, 0:e]
                tab[e, 0:e] += shift[j] * tab[e - 1, 0:e]
            tables.append(tab)
        out: Dict[MultiIndex, float] = {}
        for e, c in self.terms.items():
            partial: Dict[MultiIndex, float] = {(0,) * self.nvars: c}
            for j, ej in enumerate(e):
                if ej == 0:
                    continue
                row = tables[j][ej]
                nxt: Dict[MultiIndex, float] = {}
                for pe, pc in partial.items():
                    for k in range(ej + 1):
                        if row[k] == 0.0:
                            continue
                        ne = list(pe)
                        ne[j] += k
                        ne = tuple(ne)
                        nxt[ne] = nxt.get(ne, 0.0) + pc * row[k]
                partial = nxt
            for pe, pc in partial.items():
                out[pe] = out.get(pe, 0.0) + pc
        return Polynomial(self.dim, out)

    # -- formatting ----------------------------------------------------

    def dump(self) -> str:
        """Human-readable form "c * x^i y^j t^k + ..." in graded-lex order."""
        if not self.terms:
            return "0"
        names = list(_VAR_NAMES[: self.dim]) + ["t"]
        pieces = []
        for e in sorted(self.terms, key=lambda m: (sum(m), m)):
            c = self.terms[e]
            factors = [f"{c:.12g}"]
            for name, ei in zip(names, e):
                if ei == 1:
                    factors.append(name)
                elif ei > 1:
                    factors.append(f"{name}^{ei}")
            pieces.append(" * ".join(factors))
        return " + ".join(pieces)

    def __repr__(self) -> str:
        return f"Polynomial(dim={self.dim}, {self.dump()})"


# -- module-level operation wrappers ------------------------------------


def poly_eval(p: Polynomial, point: Sequence[float]) -> float:
    return p.eval(point)


def poly_diff(p: Polynomial, var: int) -> Polynomial:
    return p.diff(var)


def poly_compose_affine(p: Polynomial, scale, shift) -> Polynomial:
    return p.compose_affine(scale, shift)


def wave_operator(p: Polynomial, a: float) -> Polynomial:
    """Apply v -> v_tt - a * (v_x1x1 + ... + v_xdxd) with constant a > 0."""
    if a <= 0:
        raise ValueError(f"coefficient must be positive, got {a}")
    t = p.dim
    out = p.diff(t).diff(t)
    for j in range(p.dim):
        out = out - a * p.diff(j).diff(j)
    return out


# -- graded-lex monomial machinery ---------------------------------------


def monomial_exponents(nvars: int, degree: int) -> np.ndarray:
    """All exponent tuples of total degree <= degree, graded-lex ordered.

    Returns an integer array of shape (n_monomials, nvars).
    """
    if degree < 0:
        return np.zeros((0, nvars), dtype=int)

    def compositions(total, slots):
        if slots == 1:
            yield (total,)
            return
        for k in range(total + 1):
            for rest in compositions(total - k, slots - 1):
                yield (k,) + rest

    all_exps = []
    for total in range(degree + 1):
        all_exps.extend(compositions(total, nvars))
    return np.array(all_exps, dtype=int)


def exponent_index(exps: np.ndarray) -> Dict[MultiIndex, int]:
    return {tuple(int(v) for v in row): i for i, row in enumerate(exps)}


def diff_matrix(exps: np.ndarray, var: int) -> np.ndarray:
    """Matrix D with (D c) = coefficients of d/dy_var of the polynomial c.

    Both input and output coefficients are indexed by the same graded-lex
    exponent table ``exps`` (differentiation lowers the degree, so the
    image stays inside the table).
    """
    n = exps.shape[0]
    index = exponent_index(exps)
    d = np.zeros((n, n))
    for i, row in enumerate(exps):
        k = int(row[var])
        if k == 0:
            continue
        target = list(row)
        target[var] = k - 1
        j = index[tuple(target)]
        d[j, i] = k
    return d


def vandermonde(exps: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Monomial matrix V[q, m] = prod_j points[q, j] ** exps[m, j]."""
    points = np.asarray(points, dtype=float)
    npts, nvars = points.shape
    max_deg = int(exps.max()) if exps.size else 0
    # powers[j][k] = points[:, j] ** k
    powers = np.empty((nvars, max_deg + 1, npts))
    powers[:, 0, :] = 1.0
    for k in range(1, max_deg + 1):
        powers[:, k, :] = powers[:, k - 1, :] * points.T
    v = np.ones((npts, exps.shape[0]))
    for j in range(nvars):
        v *= powers[j, exps[:, j], :].T
    return v


def coeff_vector(p: Polynomial, exps: np.ndarray) -> np.ndarray:
    """Dense coefficient vector of ``p`` over the monomial table ``exps``."""
    index = exponent_index(exps)
    vec = np.zeros(exps.shape[0])
    for e, c in p.terms.items():
        if e not in index:
            raise ValueError(f"monomial {e} outside the coefficient table")
        vec[index[e]] = c
    return vec


def from_coeff_vector(dim: int, exps: np.ndarray, vec: np.ndarray) -> Polynomial:
    terms = {}
    for row, c in zip(exps, vec):
        if c != 0.0:
            terms[tuple(int(v) for v in row)] = float(c)
    return Polynomial(dim, terms)
