"""Lie point symmetry machinery: prolongation, symmetry verification,
determining-equation solving under a polynomial ansatz, commutators and
structure constants.

The determining equations are assembled symbolically and reduced by exact
rational Gauss-Jordan elimination, so symmetry dimensions and structure
constants are exact statements about the polynomial ansatz space, never
floating-point ranks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING

import sympy as sp

from . import ComplinError
from . import expr
from .expr import x, f1, f2, f1p, f2p, normalize, differentiate

if TYPE_CHECKING:
    from .parser import OdeSystem


class SymmetryError(ComplinError):
    pass


class AnsatzOverflow(SymmetryError):
    """The determining linear system exceeds the configured size bound."""


class NotClosed(SymmetryError):
    """A commutator of basis fields lies outside their span."""


@dataclass(frozen=True)
class VectorField:
    """Point symmetry generator xi*d/dx + eta1*d/df1 + eta2*d/df2.

    Components are expressions in (x, f1, f2) only.
    """

    xi: expr.Expression
    eta1: expr.Expression
    eta2: expr.Expression

    def __post_init__(self):
        for comp in (self.xi, self.eta1, self.eta2):
            bad = {f1p, f2p} & sp.sympify(comp).free_symbols
            if bad:
                raise SymmetryError(
                    "point symmetry components must not involve %s"
                    % sorted(s.name for s in bad))

    def components(self) -> tuple:
        return (self.xi, self.eta1, self.eta2)

    def apply(self, e: expr.Expression) -> expr.Expression:
        """First-order action X(e) on a function of (x, f1, f2, f1', f2')."""
        return normalize(self.xi * sp.diff(e, x) + self.eta1 * sp.diff(e, f1)
                         + self.eta2 * sp.diff(e, f2))

    def is_zero(self) -> bool:
        return all(normalize(c) == 0 for c in self.components())

    def scaled(self, factor) -> "VectorField":
        return VectorField(*(normalize(factor * c) for c in self.components()))

    def __str__(self) -> str:
        from .parser import format_vector_field

        return format_vector_field(self)


@dataclass(frozen=True)
class SymmetryCheck:
    ok: bool
    residuals: tuple

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class SymmetryBasis:
    """Linearly independent generators found at a given ansatz degree cap.

    dimension is the exact rational nullspace dimension of the determining
    system, which is a lower bound for the full symmetry algebra dimension.
    """

    fields: tuple
    degree_cap: int
    dimension: int

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def __getitem__(self, i):
        return self.fields[i]


def total_derivative(e: expr.Expression, sys: "OdeSystem") -> expr.Expression:
    """Total x-derivative on the second-order jet, with f_i'' replaced
    on-shell by omega_i."""
    return normalize(sp.diff(e, x) + f1p * sp.diff(e, f1) + f2p * sp.diff(e, f2)
                     + sys.omega1 * sp.diff(e, f1p) + sys.omega2 * sp.diff(e, f2p))


def first_prolongation(X: VectorField, sys: "OdeSystem") -> tuple:
    """Coefficients of d/df1', d/df2' in the prolonged field."""
    dxi = total_derivative(X.xi, sys)
    return tuple(normalize(total_derivative(eta, sys) - fp * dxi)
                 for eta, fp in ((X.eta1, f1p), (X.eta2, f2p)))


def prolong_coefficients(X: VectorField, sys: "OdeSystem") -> tuple:
    """Second-prolongation coefficients, on-shell."""
    dxi = total_derivative(X.xi, sys)
    eta1_1, eta2_1 = first_prolongation(X, sys)
    return tuple(normalize(total_derivative(eta1, sys) - omega * dxi)
                 for eta1, omega in ((eta1_1, sys.omega1), (eta2_1, sys.omega2)))


def symmetry_residuals(X: VectorField, sys: "OdeSystem") -> tuple:
    eta1_1, eta2_1 = first_prolongation(X, sys)
    eta1_2, eta2_2 = prolong_coefficients(X, sys)
    out = []
    for eta2, omega in ((eta1_2, sys.omega1), (eta2_2, sys.omega2)):
        res = (eta2 - X.apply(omega)
               - eta1_1 * differentiate(omega, f1p)
               - eta2_1 * differentiate(omega, f2p))
        out.append(normalize(res))
    return tuple(out)


def is_symmetry(X: VectorField, sys: "OdeSystem") -> SymmetryCheck:
    """Check the determining equations exactly; residuals are returned."""
    res = symmetry_residuals(X, sys)
    return SymmetryCheck(ok=all(r == 0 for r in res), residuals=res)


# polynomial ansatz solver ---------------------------------------------------

def _monomial_exponents(degree_cap: int) -> list:
    out = []
    for d in range(degree_cap + 1):
        level = [(i, j, d - i - j)
                 for i in range(d, -1, -1)
                 for j in range(d - i, -1, -1)]
        out.extend(sorted(level, reverse=True))
    return out


def _monomials(degree_cap: int) -> list:
    return [x ** i * f1 ** j * f2 ** k
            for (i, j, k) in _monomial_exponents(degree_cap)]


def _layout(degree_cap: int) -> list:
    """Column order of ansatz coefficients: by monomial degree, then
    component block (xi, eta1, eta2), then monomial."""
    expos = _monomial_exponents(degree_cap)
    order = []
    for d in range(degree_cap + 1):
        idxs = [m for m, e in enumerate(expos) if sum(e) == d]
        for block in range(3):
            for m in idxs:
                order.append((block, m))
    return order


def find_symmetries(sys: "OdeSystem", degree_cap: int = 2,
                    max_entries: int = 2_000_000) -> SymmetryBasis:
    """Solve the determining equations over a polynomial ansatz.

    xi, eta1, eta2 are polynomials in (x, f1, f2) of total degree at most
    degree_cap with unknown rational coefficients.  The residuals are
    expanded, monomial coefficients collected into an exact linear system,
    and the returned fields span its nullspace (integer-normalized,
    deterministically ordered).
    """
    if degree_cap < 1:
        raise SymmetryError("degree_cap must be at least 1")
    if sys.parameters:
        raise SymmetryError(
            "bind free parameters (%s) to exact values before the symmetry "
            "search" % ", ".join(s.name for s in sys.parameters))

    monos = _monomials(degree_cap)
    nmono = len(monos)
    cs = [[sp.Dummy("c_%d_%d" % (b, m)) for m in range(nmono)] for b in range(3)]
    comps = [sum(cs[b][m] * monos[m] for m in range(nmono)) for b in range(3)]
    ansatz = VectorField(*comps)

    rows = []
    flat = [cs[b][m] for b in range(3) for m in range(nmono)]
    for res in symmetry_residuals(ansatz, sys):
        num, den = sp.fraction(sp.cancel(sp.together(res)))
        if set(den.free_symbols) & set(flat):
            raise SymmetryError("unexpected unknowns in residual denominator")
        try:
            poly = sp.Poly(sp.expand(num), x, f1, f2, f1p, f2p)
        except sp.PolynomialError as exc:
            raise SymmetryError(
                "the right-hand sides must be polynomial or rational in the "
                "jet variables for the ansatz search: %s" % exc) from None
        rows.extend(poly.coeffs())
    if len(rows) * len(flat) > max_entries:
        raise AnsatzOverflow(
            "determining system has %d x %d entries (bound %d)"
            % (len(rows), len(flat), max_entries))

    amat, _ = sp.linear_eq_to_matrix(rows, flat)

    layout = _layout(degree_cap)
    col_of = {(b, m): j for j, (b, m) in enumerate(layout)}
    # amat columns follow `flat` order (block-major); reorder to the layout
    frac_rows = []
    for r in range(amat.rows):
        row = [Fraction(0)] * len(layout)
        for b in range(3):
            for m in range(nmono):
                val = amat[r, b * nmono + m]
                if val != 0:
                    q = sp.Rational(val)
                    row[col_of[(b, m)]] = Fraction(q.p, q.q)
        frac_rows.append(row)

    null_vectors = rational_nullspace(frac_rows, len(layout))

    expos = _monomial_exponents(degree_cap)
    fields = []
    for vec in null_vectors:
        vec = _integer_normalized(vec)
        comps = [sp.Integer(0)] * 3
        maxdeg = 0
        for j, (b, m) in enumerate(layout):
            if vec[j]:
                comps[b] += sp.Rational(vec[j].numerator, vec[j].denominator) * monos[m]
                maxdeg = max(maxdeg, sum(expos[m]))
        fields.append(((maxdeg, [-c for c in vec]),
                       VectorField(*(normalize(c) for c in comps))))

    # low-degree generators first; within a degree class, lexicographically
    # by coefficient vector (translations before scalings, xi before eta)
    fields.sort(key=lambda pair: pair[0])
    out = []
    for vec, field in fields:
        check = is_symmetry(field, sys)
        if not check.ok:
            raise SymmetryError("internal error: nullspace field fails the "
                                "determining equations")
        out.append(field)
    return SymmetryBasis(fields=tuple(out), degree_cap=degree_cap,
                         dimension=len(out))


def _integer_normalized(vec: list) -> list:
    """Scale to primitive integer entries with positive leading coefficient."""
    from math import gcd

    nz = [f for f in vec if f != 0]
    if not nz:
        return vec
    denom_lcm = 1
    for f in nz:
        denom_lcm = denom_lcm * f.denominator // gcd(denom_lcm, f.denominator)
    ints = [f * denom_lcm for f in vec]
    g = 0
    for f in ints:
        g = gcd(g, int(f))
    if g:
        ints = [f / g for f in ints]
    lead = next(f for f in ints if f != 0)
    if lead < 0:
        ints = [-f for f in ints]
    return [Fraction(f) for f in ints]


# exact rational linear algebra ----------------------------------------------

def rational_rref(rows: list, ncols: int) -> tuple:
    """Gauss-Jordan elimination over Fractions.

    Rows are modified copies; returns (rref_rows, pivot_columns).  The pivot
    within a column is the candidate of smallest numerator-times-denominator
    bit size (ties broken by row order), which keeps entry growth small and
    the reduction deterministic.
    """
    mat = [list(r) for r in rows]
    pivots = []
    prow = 0
    for col in range(ncols):
        best = None
        for r in range(prow, len(mat)):
            val = mat[r][col]
            if val != 0:
                size = val.numerator.bit_length() + val.denominator.bit_length()
                if best is None or size < best[0]:
                    best = (size, r)
        if best is None:
            continue
        r = best[1]
        mat[prow], mat[r] = mat[r], mat[prow]
        inv = 1 / mat[prow][col]
        mat[prow] = [v * inv for v in mat[prow]]
        for rr in range(len(mat)):
            if rr != prow and mat[rr][col] != 0:
                factor = mat[rr][col]
                mat[rr] = [a - factor * b for a, b in zip(mat[rr], mat[prow])]
        pivots.append(col)
        prow += 1
        if prow == len(mat):
            break
    return mat[:prow], pivots


def rational_nullspace(rows: list, ncols: int) -> list:
    """Canonical nullspace basis (one vector per free column)."""
    rref, pivots = rational_rref(rows, ncols)
    pivot_set = set(pivots)
    free_cols = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            vec[pc] = -rref[r][fc]
        basis.append(vec)
    return basis


def rational_solve(columns: list, target: list):
    """Solve sum_k a_k * columns[k] = target exactly; None if inconsistent."""
    n = len(target)
    k = len(columns)
    rows = [[columns[j][i] for j in range(k)] + [target[i]] for i in range(n)]
    rref, pivots = rational_rref(rows, k + 1)
    if k in pivots:
        return None
    sol = [Fraction(0)] * k
    for r, pc in enumerate(pivots):
        sol[pc] = rref[r][k]
    return sol


# algebra operations ----------------------------------------------------------

def commutator(X: VectorField, Y: VectorField) -> VectorField:
    """Lie bracket [X, Y], componentwise X(Y) - Y(X)."""
    return VectorField(*(normalize(X.apply(cy) - Y.apply(cx))
                         for cx, cy in zip(X.components(), Y.components())))


def _field_coefficient_vectors(fields: list) -> tuple:
    """Represent polynomial fields as exact coefficient vectors over the
    union of monomials occurring in any component."""
    polys = []
    for fld in fields:
        comps = []
        for c in fld.components():
            comps.append(sp.Poly(sp.expand(c), x, f1, f2))
        polys.append(comps)
    mono_set = set()
    for comps in polys:
        for b, p in enumerate(comps):
            for mono in p.monoms():
                mono_set.add((b, mono))
    monos = sorted(mono_set)
    index = {m: i for i, m in enumerate(monos)}
    vectors = []
    for comps in polys:
        vec = [Fraction(0)] * len(monos)
        for b, p in enumerate(comps):
            for mono, coeff in zip(p.monoms(), p.coeffs()):
                q = sp.Rational(coeff)
                vec[index[(b, mono)]] = Fraction(q.p, q.q)
        vectors.append(vec)
    return vectors, index


def structure_constants(basis: SymmetryBasis) -> list:
    """Constants gamma[a][b][k] with [X_a, X_b] = sum_k gamma[a][b][k] X_k.

    Exact rational linear solves; antisymmetric in (a, b) by construction.
    Raises NotClosed when a bracket escapes the span.
    """
    fields = list(basis.fields)
    n = len(fields)
    if n == 0:
        raise SymmetryError("empty basis")
    gamma = [[[Fraction(0)] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            bracket = commutator(fields[a], fields[b])
            vectors, index = _field_coefficient_vectors(fields + [bracket])
            cols = vectors[:-1]
            target = vectors[-1]
            sol = rational_solve(cols, target)
            if sol is None:
                raise NotClosed("[X_%d, X_%d] is outside the basis span"
                                % (a + 1, b + 1))
            for k in range(n):
                gamma[a][b][k] = sol[k]
                gamma[b][a][k] = -sol[k]
    return gamma
