"""Cubic-semilinear recognition, the four linearizability constraint
equations, geodesic-form detection, and the three-way classification of
two-dimensional systems.

The constraint equations are transcribed once into a table of signed terms
(TERM_TABLE) and evaluated mechanically with differentiate/normalize; the
transcription is exercised by known-zero and known-nonzero cases in the test
suite, since hand-coding twenty-plus terms per constraint is the dominant
error risk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import sympy as sp

from . import ComplinError
from . import expr
from .analyticity import CrReport, cr_check, complexify
from .expr import x, f1, f2, f1p, f2p, normalize, differentiate

if TYPE_CHECKING:
    from .parser import OdeSystem
    from .symmetry import SymmetryBasis


class NotCubicSemilinear(ComplinError):
    """The right-hand sides do not fit the cubic-semilinear template."""


COEFF_NAMES = ("A1", "A2", "B1", "B2", "C1", "C2", "D1", "D2")


@dataclass(frozen=True)
class CubicCoefficients:
    """The eight coefficient functions of the cubic-semilinear template;
    each is an expression in (x, f1, f2) and declared parameters."""

    A1: expr.Expression
    A2: expr.Expression
    B1: expr.Expression
    B2: expr.Expression
    C1: expr.Expression
    C2: expr.Expression
    D1: expr.Expression
    D2: expr.Expression

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in COEFF_NAMES}

    def rebuild_rhs(self) -> tuple:
        """Substitute back into the template; used as the extraction check."""
        A1, A2, B1, B2, C1, C2, D1, D2 = (getattr(self, n) for n in COEFF_NAMES)
        w1 = (A1 * f1p**3 - 3 * A2 * f1p**2 * f2p - 3 * A1 * f1p * f2p**2
              + A2 * f2p**3 + B1 * f1p**2 - 2 * B2 * f1p * f2p - B1 * f2p**2
              + C1 * f1p - C2 * f2p + D1)
        w2 = (A2 * f1p**3 + 3 * A1 * f1p**2 * f2p - 3 * A2 * f1p * f2p**2
              - A1 * f2p**3 + B2 * f1p**2 + 2 * B1 * f1p * f2p - B2 * f2p**2
              + C2 * f1p + C1 * f2p + D2)
        return (normalize(w1), normalize(w2))


@dataclass(frozen=True)
class ConstraintResiduals:
    """The four linearizability constraint residuals with their verdict."""

    residuals: tuple
    verdict: bool

    def __bool__(self):
        return self.verdict


# The four constraint equations as data: (integer coefficient, factors),
# each factor being (coefficient name, partial-derivative word) where the
# word is a string over {x, 1, 2} read as successive derivatives by
# x, f1, f2.  Empty word = the undifferentiated coefficient.
TERM_TABLE = (
    (   # constraint 1
        (12, (("A1", "xx"),)),
        (12, (("C1", ""), ("A1", "x"))),
        (-12, (("C2", ""), ("A2", "x"))),
        (-6, (("D1", ""), ("A1", "1"))),
        (-6, (("D1", ""), ("A2", "2"))),
        (6, (("D2", ""), ("A2", "1"))),
        (-6, (("D2", ""), ("A1", "2"))),
        (12, (("A1", ""), ("C1", "x"))),
        (-12, (("A2", ""), ("C2", "x"))),
        (1, (("C1", "11"),)),
        (-1, (("C1", "22"),)),
        (2, (("C2", "12"),)),
        (-12, (("A1", ""), ("D1", "1"))),
        (-12, (("A1", ""), ("D2", "2"))),
        (12, (("A2", ""), ("D2", "1"))),
        (-12, (("A2", ""), ("D1", "2"))),
        (2, (("B1", ""), ("C1", "1"))),
        (2, (("B1", ""), ("C2", "2"))),
        (-2, (("B2", ""), ("C2", "1"))),
        (2, (("B2", ""), ("C1", "2"))),
        (-8, (("B1", ""), ("B1", "x"))),
        (8, (("B2", ""), ("B2", "x"))),
        (-4, (("B1", "x1"),)),
        (-4, (("B2", "x2"),)),
    ),
    (   # constraint 2
        (12, (("A2", "xx"),)),
        (12, (("C2", ""), ("A1", "x"))),
        (12, (("C1", ""), ("A2", "x"))),
        (-6, (("D2", ""), ("A1", "1"))),
        (-6, (("D2", ""), ("A2", "2"))),
        (-6, (("D1", ""), ("A2", "1"))),
        (6, (("D1", ""), ("A1", "2"))),
        (12, (("A2", ""), ("C1", "x"))),
        (12, (("A1", ""), ("C2", "x"))),
        (1, (("C2", "11"),)),
        (-1, (("C2", "22"),)),
        (-2, (("C1", "12"),)),
        (-12, (("A2", ""), ("D1", "1"))),
        (-12, (("A2", ""), ("D2", "2"))),
        (-12, (("A1", ""), ("D2", "1"))),
        (12, (("A1", ""), ("D1", "2"))),
        (2, (("B2", ""), ("C1", "1"))),
        (2, (("B2", ""), ("C2", "2"))),
        (2, (("B1", ""), ("C2", "1"))),
        (-2, (("B1", ""), ("C1", "2"))),
        (-8, (("B2", ""), ("B1", "x"))),
        (-8, (("B1", ""), ("B2", "x"))),
        (-4, (("B2", "x1"),)),
        (4, (("B1", "x2"),)),
    ),
    (   # constraint 3
        (24, (("D1", ""), ("A1", "x"))),
        (-24, (("D2", ""), ("A2", "x"))),
        (-6, (("D1", ""), ("B1", "1"))),
        (-6, (("D1", ""), ("B2", "2"))),
        (6, (("D2", ""), ("B2", "1"))),
        (-6, (("D2", ""), ("B1", "2"))),
        (12, (("A1", ""), ("D1", "x"))),
        (-12, (("A2", ""), ("D2", "x"))),
        (4, (("B1", "xx"),)),
        (-4, (("C1", "x1"),)),
        (-4, (("C2", "x2"),)),
        (-6, (("B1", ""), ("D1", "1"))),
        (-6, (("B1", ""), ("D2", "2"))),
        (6, (("B2", ""), ("D2", "1"))),
        (-6, (("B2", ""), ("D1", "2"))),
        (3, (("D1", "11"),)),
        (-3, (("D1", "22"),)),
        (6, (("D2", "12"),)),
        (4, (("C1", ""), ("C1", "1"))),
        (4, (("C1", ""), ("C2", "2"))),
        (-4, (("C2", ""), ("C2", "1"))),
        (4, (("C2", ""), ("C1", "2"))),
        (-4, (("C1", ""), ("B1", "x"))),
        (4, (("C2", ""), ("B2", "x"))),
    ),
    (   # constraint 4
        (24, (("D2", ""), ("A1", "x"))),
        (24, (("D1", ""), ("A2", "x"))),
        (-6, (("D2", ""), ("B1", "1"))),
        (-6, (("D2", ""), ("B2", "2"))),
        (-6, (("D1", ""), ("B2", "1"))),
        (6, (("D1", ""), ("B1", "2"))),
        (12, (("A2", ""), ("D1", "x"))),
        (12, (("A1", ""), ("D2", "x"))),
        (4, (("B2", "xx"),)),
        (-4, (("C2", "x1"),)),
        (4, (("C1", "x2"),)),
        (-6, (("B2", ""), ("D1", "1"))),
        (-6, (("B2", ""), ("D2", "2"))),
        (-6, (("B1", ""), ("D2", "1"))),
        (6, (("B1", ""), ("D1", "2"))),
        (3, (("D2", "11"),)),
        (-3, (("D2", "22"),)),
        (-6, (("D1", "12"),)),
        (4, (("C2", ""), ("C1", "1"))),
        # +4 is forced: constraints 3 and 4 are the real and imaginary
        # parts of one complex condition, and only this sign keeps
        # (3) + i*(4) analytic in C = C1 + i*C2
        (4, (("C2", ""), ("C2", "2"))),
        (4, (("C1", ""), ("C2", "1"))),
        (-4, (("C1", ""), ("C1", "2"))),
        (-4, (("C2", ""), ("B1", "x"))),
        (-4, (("C1", ""), ("B2", "x"))),
    ),
)

_DERIV_SYMBOL = {"x": x, "1": f1, "2": f2}


def _apply_word(e: expr.Expression, word: str) -> expr.Expression:
    for ch in word:
        e = differentiate(e, _DERIV_SYMBOL[ch])
    return e


def extract_cubic_coefficients(sys: "OdeSystem") -> CubicCoefficients:
    """Read off the eight coefficient functions.

    The right-hand sides must be polynomial of total degree at most 3 in
    (f1', f2') and fit the paired sign template exactly; the extraction is
    verified by resubstitution.
    """
    coeff = {}
    for idx, omega in ((1, sys.omega1), (2, sys.omega2)):
        try:
            poly = sp.Poly(omega, f1p, f2p)
        except sp.PolynomialError as exc:
            raise NotCubicSemilinear(
                "omega%d is not polynomial in the derivatives: %s"
                % (idx, exc)) from None
        if poly.total_degree() > 3:
            raise NotCubicSemilinear(
                "omega%d has degree %d > 3 in the derivatives"
                % (idx, poly.total_degree()))
        for mono, c in zip(poly.monoms(), poly.coeffs()):
            cn = normalize(c)
            if {f1p, f2p} & cn.free_symbols:
                raise NotCubicSemilinear(
                    "derivative-dependent coefficient in omega%d" % idx)
            coeff[(idx, mono)] = cn

    def get(idx, i, j):
        return coeff.get((idx, (i, j)), sp.Integer(0))

    c = CubicCoefficients(
        A1=get(1, 3, 0), A2=get(2, 3, 0),
        B1=get(1, 2, 0), B2=get(2, 2, 0),
        C1=get(1, 1, 0), C2=get(2, 1, 0),
        D1=get(1, 0, 0), D2=get(2, 0, 0),
    )
    w1, w2 = c.rebuild_rhs()
    if normalize(w1 - sys.omega1) != 0 or normalize(w2 - sys.omega2) != 0:
        raise NotCubicSemilinear(
            "right-hand sides violate the paired cubic template")
    return c


def check_linearizability(c: CubicCoefficients) -> ConstraintResiduals:
    """Evaluate the four constraint equations on the coefficient set."""
    values = c.as_dict()
    residuals = []
    for terms in TERM_TABLE:
        total = sp.Integer(0)
        for coeff, factors in terms:
            term = sp.Integer(coeff)
            for name, word in factors:
                term *= _apply_word(values[name], word)
            total += term
        residuals.append(normalize(total))
    residuals = tuple(residuals)
    return ConstraintResiduals(residuals=residuals,
                               verdict=all(r == 0 for r in residuals))


def detect_geodesic_form(sys: "OdeSystem") -> Optional[tuple]:
    """Match the inhomogeneous geodesic template
    omega1 = -f1'^2 + f2'^2 + Omega1, omega2 = -2 f1' f2' + Omega2
    with Omega linear in the derivatives and x-dependent coefficients.
    Returns (Omega1, Omega2) or None."""
    om1 = normalize(sys.omega1 + f1p**2 - f2p**2)
    om2 = normalize(sys.omega2 + 2 * f1p * f2p)
    for om in (om1, om2):
        try:
            poly = sp.Poly(om, f1p, f2p)
        except sp.PolynomialError:
            return None
        if poly.total_degree() > 1:
            return None
        for coeff in poly.coeffs():
            free = sp.sympify(coeff).free_symbols
            if {f1, f2} & free:
                return None
    return (om1, om2)


LABELS = ("Y1-solvable", "Y2", "Y3", "CR-fail", "CR-ok-unclassified")


@dataclass(frozen=True)
class ClassificationReport:
    """Class label with the supporting evidence that produced it."""

    label: str
    cr: CrReport
    cubic: Optional[CubicCoefficients] = None
    constraints: Optional[ConstraintResiduals] = None
    geodesic: Optional[tuple] = None
    symmetry_dimension: Optional[int] = None
    degree_cap: Optional[int] = None
    canonical_type: Optional[str] = None
    recipe: Optional[str] = None


def classify(sys: "OdeSystem", sym: "SymmetryBasis | None" = None,
             degree_cap: int = 2) -> ClassificationReport:
    """Place the system in one of the five report classes.

    Order of evidence: CR failure; geodesic template (Y2); satisfied cubic
    constraints with symmetry dimension <= 4 (Y3) or > 4 (Y2); a solvable
    reduction of the complex scalar equation (Y1-solvable); otherwise
    CR-ok-unclassified.  The symmetry dimension is the exact lower bound
    computed at the stated polynomial degree cap.
    """
    from . import solve as solve_mod
    from . import symmetry as symmetry_mod

    cr = cr_check(sys)
    if not cr.verdict:
        return ClassificationReport(label="CR-fail", cr=cr)

    geo = detect_geodesic_form(sys)
    cubic = None
    constraints = None
    try:
        cubic = extract_cubic_coefficients(sys)
        constraints = check_linearizability(cubic)
    except NotCubicSemilinear:
        pass

    if geo is not None:
        return ClassificationReport(label="Y2", cr=cr, cubic=cubic,
                                    constraints=constraints, geodesic=geo)

    ode = complexify(sys)
    ctype = solve_mod.match_canonical_type(ode)
    ctype_name = ctype.kind if ctype is not None else None

    if constraints is not None and constraints.verdict:
        if sym is None:
            sym = symmetry_mod.find_symmetries(sys, degree_cap=degree_cap)
        # Y3 is the cubic-nonlinearity class: quadratic derivative terms
        # (nonzero B) exclude it, and with few symmetries such systems are
        # left unclassified rather than force-fitted
        quadratic = cubic.B1 != 0 or cubic.B2 != 0
        if sym.dimension > 4:
            label = "Y2"
        elif not quadratic:
            label = "Y3"
        else:
            label = None
        if label is not None:
            return ClassificationReport(label=label, cr=cr, cubic=cubic,
                                        constraints=constraints,
                                        symmetry_dimension=sym.dimension,
                                        degree_cap=sym.degree_cap,
                                        canonical_type=ctype_name)

    # only recipes that certify a two-parameter reduction count as
    # solvability evidence; a bare hodograph/exponential pattern without
    # the constraints does not
    recipe = solve_mod.solvable_recipe_name(ode)
    if recipe not in ("h-family", "linear"):
        recipe = None
    label = "Y1-solvable" if (ctype_name is not None or recipe is not None) \
        else "CR-ok-unclassified"
    return ClassificationReport(label=label, cr=cr, cubic=cubic,
                                constraints=constraints,
                                symmetry_dimension=(sym.dimension
                                                    if sym is not None else None),
                                degree_cap=(sym.degree_cap
                                            if sym is not None else None),
                                canonical_type=ctype_name, recipe=recipe)
