"""Exact symbolic expression layer.

Expressions are sympy trees restricted to a small dialect: exact rational
constants, the formal imaginary unit i (with i**2 -> -1 rewriting), symbols,
sums, products, integer powers plus the sqrt atom, and the closed elementary
function set {exp, log, sin, cos, arctan, sqrt}.  Elementary functions are
opaque atoms under normalization: no transcendental identities are applied,
equality of such expressions is decided syntactically after their arguments
are normalized, with a numeric sample check as a last resort.

All values are immutable and every operation here is a pure function, so the
module is safe for concurrent use.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from . import ComplinError

Expression = sp.Expr

#: formal imaginary unit
IM = sp.I

#: admitted elementary functions, keyed by their surface-syntax name.
#: sqrt is constructor-only: it builds a half-integer power, not a Function.
FUNCTIONS = {
    "exp": sp.exp,
    "log": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "arctan": sp.atan,
    "sqrt": sp.sqrt,
}
_FUNCTION_CLASSES = (sp.exp, sp.log, sp.sin, sp.cos, sp.atan)
FUNCTION_NAMES = {sp.exp: "exp", sp.log: "log", sp.sin: "sin",
                  sp.cos: "cos", sp.atan: "arctan"}

# Canonical symbols.  Real-system symbols carry the real assumption so that
# splitting complex expressions into real and imaginary parts is exact.
x = sp.Symbol("x", real=True)
f1 = sp.Symbol("f1", real=True)
f2 = sp.Symbol("f2", real=True)
f1p = sp.Symbol("f1'", real=True)
f2p = sp.Symbol("f2'", real=True)

# Complex-side symbols: dependent variable u of the scalar complex ODE, its
# formal conjugate v, the transformed variables (chi, U).
u = sp.Symbol("u")
up = sp.Symbol("u'")
upp = sp.Symbol("u''")
v = sp.Symbol("v")
vp = sp.Symbol("v'")
chi = sp.Symbol("chi")
Uv = sp.Symbol("U")
Uvp = sp.Symbol("U'")
Uvpp = sp.Symbol("U''")

# Realified plane coordinates used by the plane-geometry operation.
chi1 = sp.Symbol("chi1", real=True)
chi2 = sp.Symbol("chi2", real=True)
F1v = sp.Symbol("F1", real=True)
F2v = sp.Symbol("F2", real=True)

_CANONICAL = {
    s.name: s
    for s in (x, f1, f2, f1p, f2p, u, up, upp, v, vp, chi, Uv, Uvp, Uvpp,
              chi1, chi2, F1v, F2v)
}

_param_cache: dict[str, sp.Symbol] = {}


class ExprError(ComplinError):
    """Malformed expression or unsupported construct."""


class ZeroDenominator(ExprError):
    """Division by an expression that normalizes to zero."""


class PoleError(ExprError):
    """Numeric evaluation hit a pole (division by ~0)."""


class BranchPointError(ExprError):
    """Numeric evaluation hit a branch point of log or sqrt."""


def param(name: str) -> sp.Symbol:
    """Return the free real parameter symbol of the given name (cached)."""
    if name in _CANONICAL:
        return _CANONICAL[name]
    sym = _param_cache.get(name)
    if sym is None:
        sym = sp.Symbol(name, real=True)
        _param_cache[name] = sym
    return sym


def symbol(name: str) -> sp.Symbol:
    """Resolve a name to its canonical symbol, or to a parameter symbol."""
    return _CANONICAL.get(name) or param(name)


@dataclass(frozen=True)
class SymbolTable:
    """Declared symbols of a document with their roles.

    Derivative symbols are linked positionally to their base dependent
    variable: derivatives[k] is the first derivative of dependents[k].
    """

    independent: sp.Symbol = x
    dependents: tuple = (f1, f2)
    derivatives: tuple = (f1p, f2p)
    parameters: tuple = ()

    def __post_init__(self):
        names = [s.name for s in self.all_symbols()]
        if len(names) != len(set(names)):
            raise ExprError("duplicate symbol names in table: %s" % names)
        if len(self.derivatives) != len(self.dependents):
            raise ExprError("each dependent variable needs one derivative symbol")

    def all_symbols(self) -> tuple:
        return (self.independent, *self.dependents, *self.derivatives,
                *self.parameters)

    def with_parameters(self, names) -> "SymbolTable":
        return SymbolTable(self.independent, self.dependents, self.derivatives,
                           tuple(param(n) for n in names))

    def lookup(self, name: str):
        for s in self.all_symbols():
            if s.name == name:
                return s
        return None


#: table for real systems without free parameters
REAL_TABLE = SymbolTable()


def _normalize_args(e: Expression) -> Expression:
    if e.args and isinstance(e, _FUNCTION_CLASSES):
        return e.func(normalize(e.args[0]))
    if e.args:
        return e.func(*[_normalize_args(a) for a in e.args])
    return e


def _check_finite(e: Expression, context: str) -> Expression:
    if e.has(sp.zoo) or e.has(sp.nan) or e.has(sp.oo):
        raise ZeroDenominator("division by zero expression while %s" % context)
    return e


def normalize(e: Expression) -> Expression:
    """Canonical form: a ratio of expanded coprime polynomials over the
    symbols and opaque function atoms.

    Two expressions that are equal as rational functions of the polynomial
    symbols normalize to structurally identical trees, so equality checks
    reduce to ``normalize(a - b) == 0``.
    """
    e = sp.sympify(e)
    _check_finite(e, "normalizing")
    if e.args:
        e = _normalize_args(e)
    e = sp.cancel(sp.together(e))
    num, den = sp.fraction(e)
    num = sp.expand(num)
    if den == 1:
        return _check_finite(num, "normalizing")
    return _check_finite(num / sp.expand(den), "normalizing")


def differentiate(e: Expression, s: sp.Symbol) -> Expression:
    """Exact partial derivative with respect to s, normalized.

    Derivative symbols such as f1' are ordinary independent symbols here,
    so this is partial differentiation on the jet coordinates.
    """
    return normalize(sp.diff(sp.sympify(e), s))


def substitute(e: Expression, bindings: dict) -> Expression:
    """Simultaneous substitution followed by normalization."""
    result = sp.sympify(e).subs(bindings, simultaneous=True)
    return normalize(result)


def is_zero(e: Expression, numeric_fallback: bool = False, seed: int = 7) -> bool:
    """Whether e normalizes to the zero constant.

    With numeric_fallback, an inconclusive symbolic result (nonzero tree
    containing function atoms) is certified by evaluation at random sample
    points; purely rational expressions are never sampled.
    """
    n = normalize(e)
    if n == 0:
        return True
    transcendental = bool(n.atoms(sp.Function)) or any(
        isinstance(p.exp, sp.Rational) and p.exp.q != 1
        for p in n.atoms(sp.Pow))
    if not numeric_fallback or not transcendental:
        return False
    import random

    rng = random.Random(seed)
    syms = sorted(n.free_symbols, key=lambda s: s.name)
    for _ in range(8):
        vals = {s: complex(rng.uniform(0.3, 1.4), rng.uniform(0.1, 0.9))
                for s in syms}
        try:
            z = eval_complex(n, vals)
        except ExprError:
            continue
        if abs(z) > 1e-9:
            return False
    return True


_POLE_TOL = 1e-300


def _eval(e: Expression, values: dict) -> complex:
    if isinstance(e, sp.Symbol):
        return complex(values[e])
    if e is sp.I:
        return 1j
    if isinstance(e, (sp.Integer, sp.Rational)):
        return complex(Fraction(e.p, e.q))
    if isinstance(e, sp.Float):
        return complex(float(e))
    if isinstance(e, sp.Add):
        return sum((_eval(a, values) for a in e.args), 0j)
    if isinstance(e, sp.Mul):
        out = 1 + 0j
        for a in e.args:
            out *= _eval(a, values)
        return out
    if isinstance(e, sp.Pow):
        base = _eval(e.base, values)
        ex = e.exp
        if isinstance(ex, sp.Integer):
            n = int(ex)
            if n < 0 and abs(base) < _POLE_TOL:
                raise PoleError("pole: |base| < %g raised to %d" % (_POLE_TOL, n))
            try:
                return base ** n
            except ZeroDivisionError:
                raise PoleError("pole: zero base raised to %d" % n) from None
        if isinstance(ex, sp.Rational) and abs(ex.q) == 2:
            if base == 0 and ex.p < 0:
                raise BranchPointError("sqrt branch point at 0 with negative power")
            r = cmath.sqrt(base)
            n = int(ex.p)
            if n < 0 and abs(r) < _POLE_TOL:
                raise PoleError("pole in half-integer power")
            return r ** n
        raise ExprError("unsupported exponent %s" % ex)
    if isinstance(e, _FUNCTION_CLASSES):
        arg = _eval(e.args[0], values)
        if isinstance(e, sp.log) and arg == 0:
            raise BranchPointError("log branch point at 0")
        fn = {sp.exp: cmath.exp, sp.log: cmath.log, sp.sin: cmath.sin,
              sp.cos: cmath.cos, sp.atan: cmath.atan}[type(e)]
        try:
            return fn(arg)
        except ValueError as exc:
            raise BranchPointError(str(exc)) from None
        except OverflowError as exc:
            raise PoleError("overflow: %s" % exc) from None
    if e is sp.pi:
        return complex(cmath.pi)
    if e is sp.E:
        return complex(cmath.e)
    raise ExprError("cannot evaluate node %r" % e)


def eval_complex(e: Expression, values: dict) -> complex:
    """Evaluate to a double-precision complex number.

    All free symbols must be bound (keys may be symbols or names); log and
    sqrt use the principal branch; the evaluation order is the deterministic
    tree order of the normalized expression.
    """
    e = sp.sympify(e)
    bound = {}
    for k, val in values.items():
        bound[symbol(k) if isinstance(k, str) else k] = val
    missing = e.free_symbols - set(bound)
    if missing:
        raise ExprError("unbound symbols: %s" % sorted(s.name for s in missing))
    try:
        z = _eval(e, bound)
    except ZeroDivisionError:
        raise PoleError("division by zero") from None
    except OverflowError:
        raise PoleError("overflow") from None
    if not (cmath.isfinite(z)):
        raise PoleError("non-finite result")
    return z


def compile_numeric(e: Expression, symbols_order):
    """Fast numeric callable for hot loops (lambdified once).

    Semantics match eval_complex on nonsingular inputs; error reporting at
    singular points is weaker, so callers must check the output is finite.
    """
    e = sp.sympify(e)
    cmods = {"exp": cmath.exp, "log": cmath.log, "sin": cmath.sin,
             "cos": cmath.cos, "atan": cmath.atan, "sqrt": cmath.sqrt,
             "pi": cmath.pi}
    return sp.lambdify(tuple(symbols_order), e, modules=[cmods, "math"])


def free_parameters(e: Expression) -> tuple:
    """Free symbols of e that are neither canonical variables nor i."""
    return tuple(sorted((s for s in sp.sympify(e).free_symbols
                         if s.name not in _CANONICAL), key=lambda s: s.name))
