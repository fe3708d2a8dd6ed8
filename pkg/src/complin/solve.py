"""Solution pipeline for the complex scalar reduction u'' = w(x, u, u'):
canonical-type detection, the transform recipes (modified Emden, hodograph,
exponential, first-integral family), closed-form and power-series solutions
of the linear target, and Newton inversion back to real trajectories.

Every transform step carries a machine-checkable certificate: the source
equation pushed through the forward maps must reproduce the declared target
with zero symbolic residual.  Solutions carry a master relation S(x, u) = 0
whose zero set is the solution locus; trajectories are points of that locus
with x real, found by complex Newton continuation.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Optional

import numpy as np
import sympy as sp

from . import ComplinError
from . import expr
from .analyticity import ComplexODE
from .expr import chi, normalize, u, up, Uv, x
from .verify import Trajectory

a_sym = expr.param("a")
b_sym = expr.param("b")
c_sym = expr.param("c")
m_sym = expr.param("m")


class SolveError(ComplinError):
    pass


class PatternMismatch(SolveError):
    """The equation does not match the recipe's pattern."""


class NotCubicFactorable(PatternMismatch):
    """w does not factor as g(x, u) * u'^3."""


class UnsupportedH(SolveError):
    """h(u) outside the closed-form quadrature library."""


class UnsupportedTarget(SolveError):
    """The transform certified, but its target is not a linear ODE the
    series/closed-form solver accepts."""


class OrderTooSmall(SolveError):
    pass


class NonPolynomialCoefficients(SolveError):
    pass


class NoRecipeMatches(SolveError):
    pass


class NewtonDiverged(SolveError):
    def __init__(self, message, grid_x=None, residual=None):
        super().__init__(message)
        self.grid_x = grid_x
        self.residual = residual


class BranchAmbiguity(SolveError):
    def __init__(self, message, grid_x=None):
        super().__init__(message)
        self.grid_x = grid_x


class CertificateError(SolveError):
    """A transform-chain certificate residual failed to vanish."""


# targets ---------------------------------------------------------------------

@dataclass(frozen=True)
class LinearODE:
    """Target equation U'' + P(chi) U' + Q(chi) U + R(chi) = 0."""

    P: expr.Expression = sp.Integer(0)
    Q: expr.Expression = sp.Integer(0)
    R: expr.Expression = sp.Integer(0)

    def describe(self) -> str:
        from .parser import format_expression

        parts = ["U''"]
        for coeff, var in ((self.P, "U'"), (self.Q, "U")):
            cn = normalize(coeff)
            if cn == 0:
                continue
            if cn == 1:
                parts.append(" + " + var)
            elif cn == -1:
                parts.append(" - " + var)
            else:
                s = format_expression(cn)
                if isinstance(cn, sp.Add) or s.startswith("-"):
                    parts.append(" + (%s)*%s" % (s, var))
                else:
                    parts.append(" + %s*%s" % (s, var))
        if self.R != 0:
            s = format_expression(normalize(self.R))
            parts.append(" - " + s[1:] if s.startswith("-") else " + " + s)
        return "".join(parts) + " = 0"

    def residual_of(self, U_expr: expr.Expression) -> expr.Expression:
        """U'' + P U' + Q U + R with U_expr a function of chi."""
        d1 = sp.diff(U_expr, chi)
        d2 = sp.diff(d1, chi)
        return normalize(d2 + self.P * d1 + self.Q * U_expr + self.R)

    def as_source_w(self) -> expr.Expression:
        """The target read as a new source equation u'' = w(x, u, u')."""
        subs = {chi: x}
        return normalize(-(self.P.subs(subs) * up + self.Q.subs(subs) * u
                           + self.R.subs(subs)))


# transform chains -------------------------------------------------------------

@dataclass(frozen=True)
class ChainStep:
    """One invertible transform (x, u) -> (chi, U) with a declared target.

    chi_expr and U_expr are expressions in (x, u); target is the equation
    the source is claimed to map to; inverse, when closed-form, maps back
    from (chi, U) expressions (principal branch where a root is involved).
    """

    name: str
    chi_expr: expr.Expression
    U_expr: expr.Expression
    target: LinearODE
    inverse: Optional[dict] = None
    note: str = ""

    def pushforward(self, w: expr.Expression) -> tuple:
        """(U', U'') along solutions, written in the source jet (x, u, u')."""
        cx = normalize(sp.diff(self.chi_expr, x) + up * sp.diff(self.chi_expr, u))
        Ux = normalize(sp.diff(self.U_expr, x) + up * sp.diff(self.U_expr, u))
        U1 = normalize(Ux / cx)
        dU1 = (sp.diff(U1, x) + up * sp.diff(U1, u) + w * sp.diff(U1, up))
        U2 = normalize(dU1 / cx)
        return U1, U2

    def certificate_residual(self, w: expr.Expression) -> expr.Expression:
        U1, U2 = self.pushforward(w)
        t = self.target
        res = (U2 + t.P.subs(chi, self.chi_expr) * U1
               + t.Q.subs(chi, self.chi_expr) * self.U_expr
               + t.R.subs(chi, self.chi_expr))
        return normalize(res)

    def certify(self, w: expr.Expression) -> None:
        res = self.certificate_residual(w)
        if not expr.is_zero(res, numeric_fallback=True):
            raise CertificateError(
                "step %r does not map the source onto %s (residual %s)"
                % (self.name, self.target.describe(), res))


@dataclass(frozen=True)
class TransformChain:
    """Ordered transform steps; each step's target, reread as a source
    equation, feeds the next step."""

    steps: tuple

    def certify(self, w: expr.Expression) -> None:
        current = normalize(w)
        for step in self.steps:
            step.certify(current)
            current = step.target.as_source_w()

    def composed_maps(self) -> tuple:
        """Total maps chi(x, u), U(x, u) across all steps."""
        cur_chi, cur_U = x, u
        for step in self.steps:
            subs = {x: cur_chi, u: cur_U}
            cur_chi = normalize(step.chi_expr.subs(subs, simultaneous=True))
            cur_U = normalize(step.U_expr.subs(subs, simultaneous=True))
        return cur_chi, cur_U

    @property
    def names(self) -> tuple:
        return tuple(s.name for s in self.steps)

    @property
    def target(self) -> LinearODE:
        return self.steps[-1].target


def hodograph_step(target: LinearODE) -> ChainStep:
    return ChainStep(name="hodograph", chi_expr=u, U_expr=x, target=target,
                     inverse={x: Uv, u: chi},
                     note="swap of dependent and independent variables")


def emden_step() -> ChainStep:
    return ChainStep(
        name="emden", chi_expr=x - 1 / u, U_expr=x**2 / 2 - x / u,
        target=LinearODE(),
        inverse={x: chi + sp.sqrt(chi**2 - 2 * Uv),
                 u: 1 / sp.sqrt(chi**2 - 2 * Uv)},
        note="principal-branch inverse; the other sheet negates the root")


def exponential_step(c: expr.Expression, reciprocal: bool = False) -> ChainStep:
    """U = e^u with chi = x, or the chi = 1/x variant; the certificate
    decides which variant fits a given source."""
    if reciprocal:
        # with chi = 1/x the damped form U'' + (2/chi + c/chi^2) U' = 0
        # arises; kept as a named alternative for geodesic-type sources
        target = LinearODE(P=normalize(2 / chi + c / chi**2))
        return ChainStep(name="reciprocal-exponential", chi_expr=1 / x,
                         U_expr=sp.exp(u), target=target,
                         inverse={x: 1 / chi, u: sp.log(Uv)})
    return ChainStep(name="exponential", chi_expr=x, U_expr=sp.exp(u),
                     target=LinearODE(P=normalize(-c)),
                     inverse={x: chi, u: sp.log(Uv)})


def affine_exp_step(c: expr.Expression) -> ChainStep:
    """Recorded second hop U'' = c U' -> free particle via
    chi~ = a + b e^{c chi}; parameters stay symbolic."""
    return ChainStep(name="affine-exponential",
                     chi_expr=a_sym + b_sym * sp.exp(c * x), U_expr=u,
                     target=LinearODE(),
                     note="recorded alternative onto the free particle")


def identity_step(target: LinearODE) -> ChainStep:
    return ChainStep(name="identity", chi_expr=x, U_expr=u, target=target,
                     inverse={x: chi, u: Uv})


# canonical types ---------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalType:
    """One of the four two-parameter-group normal forms."""

    kind: str
    shape: expr.Expression


def match_canonical_type(ode: ComplexODE) -> Optional[CanonicalType]:
    """Dependence analysis on normalized w: Type I w(u'); II w(x);
    III x u'' = w(u'); IV u'' = u' w(x)."""
    w = normalize(ode.w)
    free = w.free_symbols
    if not free & {x, u}:
        return CanonicalType(kind="I", shape=w)
    if not free & {u, up}:
        return CanonicalType(kind="II", shape=w)
    xw = normalize(x * w)
    if not xw.free_symbols & {x, u}:
        return CanonicalType(kind="III", shape=xw)
    try:
        g = normalize(w / up)
    except expr.ExprError:
        g = None
    if g is not None and not g.free_symbols & {u, up}:
        return CanonicalType(kind="IV", shape=g)
    return None


# recipes -----------------------------------------------------------------------

def emden_linearize(ode: ComplexODE) -> tuple:
    """Modified Emden pattern w = -3 u u' - u^3 onto the free particle."""
    w = normalize(ode.w)
    if normalize(w + 3 * u * up + u**3) != 0:
        raise PatternMismatch("w is not the modified-Emden right-hand side")
    step = emden_step()
    step.certify(w)
    return step.target, TransformChain(steps=(step,))


def hodograph_linearize(ode: ComplexODE) -> tuple:
    """Cubic factor pattern w = g(x, u) u'^3 onto U'' + g(U, chi) = 0."""
    w = normalize(ode.w)
    g = normalize(w / up**3) if w != 0 else sp.Integer(0)
    if g == 0 or g.free_symbols & {up} or normalize(w - g * up**3) != 0:
        raise NotCubicFactorable("w does not factor as g(x, u)*u'^3")
    g_sw = normalize(g.subs({x: Uv, u: chi}, simultaneous=True))
    try:
        poly = sp.Poly(g_sw, Uv)
    except sp.PolynomialError:
        raise UnsupportedTarget("swapped g is not polynomial in U") from None
    if poly.degree() > 1:
        raise UnsupportedTarget("hodograph target is nonlinear in U")
    target = LinearODE(Q=normalize(poly.coeff_monomial((1,))),
                       R=normalize(poly.coeff_monomial((0,))))
    step = hodograph_step(target)
    step.certify(w)
    return target, TransformChain(steps=(step,))


def hodograph_pushforward(w: expr.Expression) -> expr.Expression:
    """Right-hand side of the swapped equation for arbitrary u'' = w:
    U'' = -U'^3 w(U, chi, 1/U'), written again in (x, u, u')."""
    swapped = w.subs({x: u, u: x, up: 1 / up}, simultaneous=True)
    return normalize(-up**3 * swapped)


def exponential_linearize(ode: ComplexODE) -> tuple:
    """Geodesic-source pattern w = -u'^2 + c u' onto U'' = c U'.

    Returns (target, chain, solution) where the solution is the closed form
    a + b e^{c chi}; the recorded affine hop to the free particle is
    appended to the chain metadata by solve_ode.
    """
    w = normalize(ode.w)
    try:
        poly = sp.Poly(w, up)
    except sp.PolynomialError:
        raise PatternMismatch("w is not polynomial in u'") from None
    if poly.degree() != 2 or normalize(poly.coeff_monomial((2,)) + 1) != 0:
        raise PatternMismatch("w lacks the -u'^2 geodesic term")
    if normalize(poly.coeff_monomial((0,))) != 0:
        raise PatternMismatch("constant term must vanish")
    c = normalize(poly.coeff_monomial((1,)))
    if c.free_symbols & {x, u, up}:
        raise PatternMismatch("the u' coefficient must be constant")
    step = exponential_step(c)
    step.certify(w)
    target = step.target
    solution = a_sym + b_sym * sp.exp(c * chi)
    return target, TransformChain(steps=(step,)), solution


def _match_power_law(h: expr.Expression) -> tuple:
    """h = alpha * u^p with integer p; returns (alpha, p) or raises."""
    if h == 0:
        return sp.Integer(0), 0
    for p in range(-4, 5):
        alpha = normalize(h / u**p)
        if not alpha.free_symbols & {u, up, x}:
            return alpha, p
    raise UnsupportedH("h = %s is not a power law in u" % h)


def reduce_h_family(ode: ComplexODE) -> "ComplexSolution":
    """First-integral family w = h(u) u' with h = alpha u^p.

    u' = H(u) + C with H the antiderivative of h, then the quadrature
    x = int du/(H + C) in closed form; the result is an implicit relation
    G(x, u; c, m) = 0 with first-integral constant c and quadrature
    constant m.
    """
    w = normalize(ode.w)
    h = normalize(w / up) if w != 0 else sp.Integer(0)
    if h.free_symbols & {up, x} or (w != 0 and normalize(w - h * up) != 0):
        raise PatternMismatch("w does not factor as h(u) * u'")
    alpha, p = _match_power_law(h)
    C, m = c_sym, m_sym

    if alpha == 0:
        H = sp.Integer(0)
        relation = u - C * x - m
    elif p == -1:
        raise UnsupportedH("the quadrature for h ~ 1/u is not elementary")
    elif p == -2:
        H = -alpha / u
        relation = u / C + (alpha / C**2) * sp.log(C * u - alpha) + m - x
    elif p == 0:
        H = alpha * u
        relation = sp.log(alpha * u + C) / alpha + m - x
    elif p == 1:
        H = alpha * u**2 / 2
        relation = (sp.sqrt(2 / (alpha * C))
                    * sp.atan(u * sp.sqrt(alpha / (2 * C))) + m - x)
    elif p == 2:
        raise UnsupportedH("p = 2 needs cube-root atoms; bind numeric "
                           "constants and integrate numerically instead")
    else:
        raise UnsupportedH("p = %d is outside the quadrature library" % p)

    first_integral = normalize(H + C)
    # dH/du = h by construction; checked to catch transcription slips
    if normalize(sp.diff(H, u) - h) != 0:
        raise SolveError("internal error: antiderivative mismatch")
    sol = ComplexSolution(
        recipe="h-family",
        chain=TransformChain(steps=(identity_step(LinearODE()),)),
        target=None,
        kind="implicit",
        target_solution=None,
        relation=normalize(relation),
        params=(C, m),
        first_integral=first_integral,
    )
    _certify_implicit(sol, w)
    return sol


def _certify_implicit(sol: "ComplexSolution", w: expr.Expression) -> None:
    """dG identity: G_x + G_u * (H + C) must vanish on the relation."""
    G = sol.relation
    fi = sol.first_integral
    res = normalize(sp.diff(G, x) + sp.diff(G, u) * fi)
    if not expr.is_zero(res, numeric_fallback=True):
        raise CertificateError("quadrature relation fails its derivative "
                               "identity: %s" % res)
    # the first integral itself must solve u'' = w at u' = H + C
    res2 = normalize(fi * sp.diff(fi, u) - w.subs(up, fi))
    if not expr.is_zero(res2, numeric_fallback=True):
        raise CertificateError("first integral does not solve the equation")


# linear solver -----------------------------------------------------------------

@dataclass(frozen=True)
class LinearSolution:
    """General solution particular + a*y1 + b*y2 of a LinearODE.

    y1, y2 are the fundamental pair normalized at the center:
    y1(chi0) = 1, y1'(chi0) = 0, y2(chi0) = 0, y2'(chi0) = 1.
    """

    particular: expr.Expression
    y1: expr.Expression
    y2: expr.Expression
    kind: str                  # "closed-form" or "series"
    order: Optional[int] = None
    center: expr.Expression = sp.Integer(0)
    coefficients: Optional[dict] = None

    def general(self) -> expr.Expression:
        return self.particular + a_sym * self.y1 + b_sym * self.y2


def _poly_coeffs(e: expr.Expression, var, what: str) -> list:
    e = normalize(e)
    try:
        poly = sp.Poly(e, var)
    except sp.PolynomialError:
        raise NonPolynomialCoefficients("%s must be polynomial in chi" % what) \
            from None
    coeffs = [sp.Integer(0)] * (poly.degree() + 1 if e != 0 else 1)
    for mono, cf in zip(poly.monoms(), poly.coeffs()):
        if sp.sympify(cf).free_symbols:
            raise NonPolynomialCoefficients(
                "%s has non-constant coefficient %s" % (what, cf))
        coeffs[mono[0]] = sp.sympify(cf)
    return coeffs


def solve_linear_complex(target: LinearODE, center=0, order: Optional[int] = None,
                         disc_radius: float = 2.0,
                         tail_tol: float = 1e-12) -> LinearSolution:
    """Solve U'' + P U' + Q U + R = 0 with polynomial P, Q, R.

    Closed forms cover P = 0 with constant Q (characteristic pair,
    trigonometric for positive rational Q) and polynomial R when Q = 0;
    otherwise a truncated Taylor series at the (ordinary) center with exact
    complex-rational coefficients, order chosen so the coefficient tail
    bound is below tail_tol on the working disc.
    """
    center = sp.sympify(center)
    P, Q, R = (normalize(t) for t in (target.P, target.Q, target.R))

    if P == 0 and not Q.free_symbols:
        if Q == 0:
            if R.free_symbols - {chi} or not R.is_polynomial(chi):
                raise NonPolynomialCoefficients("R must be polynomial in chi")
            part = normalize(-sp.integrate(sp.integrate(R, chi), chi))
            return LinearSolution(particular=part, y1=sp.Integer(1),
                                  y2=chi - center, kind="closed-form",
                                  center=center)
        if not R.free_symbols:
            part = normalize(-R / Q)
            if Q.is_positive and Q.is_rational:
                root = sp.sqrt(Q)
                y1 = sp.cos(root * (chi - center))
                y2 = sp.sin(root * (chi - center)) / root
            else:
                rho = sp.sqrt(-Q)
                e1 = sp.exp(rho * (chi - center))
                e2 = sp.exp(-rho * (chi - center))
                y1 = (e1 + e2) / 2
                y2 = (e1 - e2) / (2 * rho)
            return LinearSolution(particular=part, y1=y1, y2=y2,
                                  kind="closed-form", center=center)

    # series branch
    shifted = {chi: chi + center}
    p_c = _poly_coeffs(P.subs(shifted), chi, "P")
    q_c = _poly_coeffs(Q.subs(shifted), chi, "Q")
    r_c = _poly_coeffs(R.subs(shifted), chi, "R")
    auto = order is None
    n_order = 16 if auto else order
    if n_order < 4:
        raise OrderTooSmall("series order must be at least 4")
    while True:
        y1c = _series_coeffs(p_c, q_c, [sp.Integer(0)], n_order,
                             sp.Integer(1), sp.Integer(0))
        y2c = _series_coeffs(p_c, q_c, [sp.Integer(0)], n_order,
                             sp.Integer(0), sp.Integer(1))
        ppc = _series_coeffs(p_c, q_c, r_c, n_order,
                             sp.Integer(0), sp.Integer(0))
        tail = max(_tail_estimate(c, disc_radius) for c in (y1c, y2c, ppc))
        if tail < tail_tol or not auto:
            break
        if n_order >= 400:
            raise SolveError("series tail bound %g not reached by order %d "
                             "on |chi - chi0| <= %g" % (tail, n_order, disc_radius))
        n_order += 8
    t = chi - center

    def as_poly(cs):
        return normalize(sum(c * t**k for k, c in enumerate(cs)))

    return LinearSolution(particular=as_poly(ppc), y1=as_poly(y1c),
                          y2=as_poly(y2c), kind="series", order=n_order,
                          center=center,
                          coefficients={"y1": tuple(y1c), "y2": tuple(y2c),
                                        "particular": tuple(ppc)})


def _series_coeffs(p_c, q_c, r_c, order, a0, a1) -> list:
    """Taylor recurrence for U'' + P U' + Q U + R = 0 about 0:
    (n+1)(n+2) a_{n+2} = -(sum_j p_j (n-j+1) a_{n-j+1}
                          + sum_j q_j a_{n-j} + r_n)."""
    coeffs = [sp.sympify(a0), sp.sympify(a1)]
    for n in range(order - 1):
        acc = sp.Integer(0)
        for j, pj in enumerate(p_c):
            k = n - j + 1
            if pj != 0 and 0 <= k < len(coeffs):
                acc += pj * k * coeffs[k]
        for j, qj in enumerate(q_c):
            k = n - j
            if qj != 0 and 0 <= k < len(coeffs):
                acc += qj * coeffs[k]
        if n < len(r_c):
            acc += r_c[n]
        coeffs.append(sp.sympify(-acc) / ((n + 1) * (n + 2)))
    return coeffs


def _tail_estimate(coeffs, radius: float) -> float:
    tail = 0.0
    for k in range(max(0, len(coeffs) - 3), len(coeffs)):
        tail = max(tail, abs(complex(coeffs[k])) * radius ** k)
    return tail


# assembled solutions ------------------------------------------------------------

@dataclass(frozen=True)
class ComplexSolution:
    """A solved reduction: transform chain, target solution, and the master
    relation S(x, u; params) = 0 defining the solution locus."""

    recipe: str
    chain: TransformChain
    target: Optional[LinearODE]
    kind: str
    target_solution: Optional[expr.Expression]
    relation: expr.Expression
    params: tuple
    series_order: Optional[int] = None
    center: Optional[expr.Expression] = None
    first_integral: Optional[expr.Expression] = None
    series_coefficients: Optional[dict] = None
    extra_steps: tuple = ()

    def bound_relation(self, bindings: dict) -> expr.Expression:
        subs = {}
        for key, val in bindings.items():
            sym = expr.param(key) if isinstance(key, str) else key
            subs[sym] = _to_sympy_number(val)
        missing = [p for p in self.params if p not in subs]
        if missing:
            raise SolveError("unbound solution parameters: %s"
                             % ", ".join(s.name for s in missing))
        rel = self.relation.subs(subs, simultaneous=True)
        leftover = expr.free_parameters(rel)
        if leftover:
            raise SolveError("parameters %s remain unbound"
                             % ", ".join(s.name for s in leftover))
        return rel

    def verify_target_solution(self) -> None:
        """Residual of the target solution in the target equation: exact
        zero for closed forms, O(chi^(N-1)) for series."""
        if self.target is None or self.target_solution is None:
            return
        res = self.target.residual_of(self.target_solution)
        if self.kind == "series":
            poly = sp.Poly(sp.expand(res), chi)
            low = min((sum(m) for m in poly.monoms()), default=None)
            if low is not None and low < self.series_order - 1:
                raise CertificateError(
                    "series residual has order %s < N-1 = %d"
                    % (low, self.series_order - 1))
        else:
            if not expr.is_zero(res, numeric_fallback=True):
                raise CertificateError("closed-form solution leaves residual %s"
                                       % res)


def _to_sympy_number(val):
    if isinstance(val, sp.Basic):
        return val
    if isinstance(val, complex):
        re_p = sp.nsimplify(val.real, rational=True) if val.real == int(val.real) \
            else sp.Float(val.real)
        im_p = sp.nsimplify(val.imag, rational=True) if val.imag == int(val.imag) \
            else sp.Float(val.imag)
        return re_p + sp.I * im_p
    if isinstance(val, int):
        return sp.Integer(val)
    if isinstance(val, float):
        return sp.Integer(int(val)) if val == int(val) else sp.Float(val)
    return sp.sympify(val)


def solve_ode(ode: ComplexODE, series_order: Optional[int] = None,
              center=0, disc_radius: float = 2.0) -> ComplexSolution:
    """Dispatch the recipes in their canonical order and assemble the
    certified solution: emden, hodograph, exponential, h-family, direct
    linear; first match wins."""
    w = normalize(ode.w)

    try:
        target, chain = emden_linearize(ode)
        lin = solve_linear_complex(target, center=center, order=series_order,
                                   disc_radius=disc_radius)
        return _assemble(ode, "emden", chain, target, lin)
    except PatternMismatch:
        pass

    try:
        target, chain = hodograph_linearize(ode)
        lin = solve_linear_complex(target, center=center, order=series_order,
                                   disc_radius=disc_radius)
        return _assemble(ode, "hodograph", chain, target, lin)
    except PatternMismatch:
        pass

    try:
        target, chain, solution = exponential_linearize(ode)
        chain.certify(w)
        sol_chi, sol_U = chain.composed_maps()
        relation = normalize(solution.subs(chi, sol_chi) - sol_U)
        c = normalize(-target.P)
        extra = (affine_exp_step(c),)
        sol = ComplexSolution(recipe="exponential", chain=chain, target=target,
                              kind="closed-form", target_solution=solution,
                              relation=relation, params=(a_sym, b_sym),
                              extra_steps=extra)
        sol.verify_target_solution()
        return sol
    except PatternMismatch:
        pass

    try:
        return reduce_h_family(ode)
    except PatternMismatch:
        pass

    lin_target = _as_direct_linear(w)
    if lin_target is not None:
        step = identity_step(lin_target)
        chain = TransformChain(steps=(step,))
        lin = solve_linear_complex(lin_target, center=center,
                                   order=series_order, disc_radius=disc_radius)
        return _assemble(ode, "linear", chain, lin_target, lin)

    raise NoRecipeMatches("no recipe matches u'' = %s" % w)


def _assemble(ode: ComplexODE, recipe: str, chain: TransformChain,
              target: LinearODE, lin: LinearSolution) -> ComplexSolution:
    chain.certify(ode.w)
    sol_chi, sol_U = chain.composed_maps()
    general = lin.general()
    relation = normalize(general.subs(chi, sol_chi) - sol_U)
    sol = ComplexSolution(recipe=recipe, chain=chain, target=target,
                          kind=lin.kind, target_solution=general,
                          relation=relation, params=(a_sym, b_sym),
                          series_order=lin.order, center=lin.center,
                          series_coefficients=lin.coefficients)
    sol.verify_target_solution()
    return sol


def _as_direct_linear(w: expr.Expression) -> Optional[LinearODE]:
    """w = -(P(x) u' + Q(x) u + R(x)) with polynomial x-only coefficients."""
    try:
        poly = sp.Poly(w, u, up)
    except sp.PolynomialError:
        return None
    if poly.total_degree() > 1:
        return None
    P = -poly.coeff_monomial((0, 1))
    Q = -poly.coeff_monomial((1, 0))
    R = -poly.coeff_monomial((0, 0))
    subs = {x: chi}
    out = []
    for coeff in (P, Q, R):
        coeff = sp.sympify(coeff)
        if coeff.free_symbols & {u, up}:
            return None
        if not coeff.subs(subs).is_polynomial(chi):
            return None
        out.append(normalize(coeff.subs(subs)))
    return LinearODE(P=out[0], Q=out[1], R=out[2])


def solvable_recipe_name(ode: ComplexODE) -> Optional[str]:
    """Which recipe would fire, without solving; None when none matches."""
    w = normalize(ode.w)
    if normalize(w + 3 * u * up + u**3) == 0:
        return "emden"
    g = normalize(w / up**3) if w != 0 else sp.Integer(0)
    if g != 0 and not g.free_symbols & {up} and normalize(w - g * up**3) == 0:
        return "hodograph"
    try:
        poly = sp.Poly(w, up)
        if (poly.degree() == 2 and normalize(poly.coeff_monomial((2,)) + 1) == 0
                and normalize(poly.coeff_monomial((0,))) == 0
                and not normalize(poly.coeff_monomial((1,))).free_symbols & {x, u, up}):
            return "exponential"
    except sp.PolynomialError:
        pass
    h = normalize(w / up) if w != 0 else sp.Integer(0)
    if not h.free_symbols & {up, x} and (w == 0 or normalize(w - h * up) == 0):
        try:
            _match_power_law(h)
            return "h-family"
        except UnsupportedH:
            pass
    if _as_direct_linear(w) is not None:
        return "linear"
    return None


# trajectory inversion ------------------------------------------------------------

def invert_to_trajectory(sol: ComplexSolution, grid, anchor: complex,
                         bindings: dict, tol: float = 1e-12,
                         max_iter: int = 50,
                         jacobian_tol: float = 1e-10) -> Trajectory:
    """Solve S(x, f1 + i f2) = 0 for each real grid x by complex Newton
    iteration with continuation (the previous point seeds the next; the
    anchor seeds the first).

    The relation is analytic in u, so the 2-real-dimensional Newton system
    is the complex iteration u <- u - S/S_u; |S_u| below jacobian_tol is a
    branch point and aborts rather than risking a sheet switch.
    """
    rel = sol.bound_relation(bindings)
    rel_u = normalize(sp.diff(rel, u))
    rel_x = normalize(sp.diff(rel, x))
    S = expr.compile_numeric(rel, (x, u))
    Su = expr.compile_numeric(rel_u, (x, u))
    Sx = expr.compile_numeric(rel_x, (x, u))

    xs = np.asarray(grid, dtype=float)
    n = len(xs)
    f1v = np.empty(n)
    f2v = np.empty(n)
    f1pv = np.empty(n)
    f2pv = np.empty(n)
    resv = np.empty(n)
    current = complex(anchor)
    for i, xv in enumerate(xs):
        current, res = _newton_point(S, Su, float(xv), current, tol,
                                     max_iter, jacobian_tol)
        du = -_eval_or_raise(Sx, xv, current) / _eval_or_raise(Su, xv, current)
        f1v[i] = current.real
        f2v[i] = current.imag
        f1pv[i] = du.real
        f2pv[i] = du.imag
        resv[i] = res
    return Trajectory(xs=xs, f1s=f1v, f2s=f2v, f1ps=f1pv, f2ps=f2pv,
                      residuals=resv,
                      diagnostics={"newton_tol": tol,
                                   "max_residual": float(resv.max())})


def _eval_or_raise(fn, xv, uv):
    try:
        z = complex(fn(xv, uv))
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise NewtonDiverged("relation evaluation failed at x=%g: %s"
                             % (xv, exc), grid_x=xv) from None
    if not cmath.isfinite(z):
        raise NewtonDiverged("non-finite relation value at x=%g" % xv,
                             grid_x=xv)
    return z


def _newton_point(S, Su, xv: float, guess: complex, tol: float,
                  max_iter: int, jacobian_tol: float) -> tuple:
    current = guess
    for _ in range(max_iter):
        s_val = _eval_or_raise(S, xv, current)
        j_val = _eval_or_raise(Su, xv, current)
        if abs(j_val) < jacobian_tol:
            raise BranchAmbiguity(
                "singular Jacobian |S_u| = %g at x = %g (branch point)"
                % (abs(j_val), xv), grid_x=xv)
        step = s_val / j_val
        current = current - step
        if abs(step) <= tol * (1 + abs(current)):
            final = abs(_eval_or_raise(S, xv, current))
            return current, final
    raise NewtonDiverged("no convergence at x = %g (last |S| = %g)"
                         % (xv, abs(s_val)), grid_x=xv, residual=abs(s_val))
