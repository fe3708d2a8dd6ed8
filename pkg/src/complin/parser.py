"""Textual DSL for ODE systems, vector fields, and expressions.

This is the single ingestion path for the CLI and the bundled corpus.  The
grammar (documented in docs/dsl.md) is a small infix language: `+ - * / ^`
with mandatory `*`, integer exponents, primes for derivatives, `#` comments,
and the keywords `system`, `vars`, `params`, `eq1`, `eq2`, `vf`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from . import ComplinError
from . import expr
from .expr import SymbolTable, REAL_TABLE
from .symmetry import VectorField

KEYWORDS = {"system", "vars", "params", "eq1", "eq2", "vf"}
VF_FIELDS = ("xi", "eta1", "eta2")


class ParseError(ComplinError):
    """Syntax or validation error with source position."""

    def __init__(self, message, line, col, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected))
        loc = "%d:%d: %s" % (line, col, message)
        if self.expected:
            loc += " (expected %s)" % ", ".join(self.expected)
        super().__init__(loc)


@dataclass(frozen=True)
class Token:
    kind: str          # NAME, NUMBER, OP, EOF
    text: str
    primes: int
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<comment>#[^\n]*)"
    r"|(?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)(?P<primes>'{0,3})"
    r"|(?P<op>[-+*/^()=;:,])"
)


def tokenize(text: str) -> list:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError("unexpected character %r" % text[pos], line, col)
        lexeme = m.group(0)
        if m.lastgroup not in ("ws", "comment") and not m.group("ws"):
            if m.group("number"):
                tokens.append(Token("NUMBER", m.group("number"), 0, line, col))
            elif m.group("name"):
                primes = len(m.group("primes") or "")
                if primes > 2:
                    raise ParseError("at most two primes are allowed", line, col)
                tokens.append(Token("NAME", m.group("name"), primes, line, col))
            elif m.group("op"):
                tokens.append(Token("OP", m.group("op"), 0, line, col))
        for ch in lexeme:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = m.end()
    tokens.append(Token("EOF", "", 0, line, col))
    return tokens


class _Resolver:
    """Maps names to symbols, enforcing declarations and realness rules."""

    def __init__(self, table=None, complex_mode=False):
        self.table = table
        self.complex_mode = complex_mode

    def resolve(self, tok: Token):
        name = tok.text
        if name == "i":
            if not self.complex_mode:
                raise ParseError(
                    "imaginary unit is not allowed in a real document",
                    tok.line, tok.col)
            if tok.primes:
                raise ParseError("the imaginary unit takes no primes",
                                 tok.line, tok.col)
            return sp.I
        target = name + "'" * tok.primes
        if tok.primes == 2:
            raise ParseError("second derivatives may appear only as the "
                             "left side of eq1/eq2", tok.line, tok.col)
        if self.table is not None:
            sym = self.table.lookup(target)
            if sym is None:
                raise ParseError("undeclared symbol '%s'" % target,
                                 tok.line, tok.col)
            return sym
        if tok.primes and target not in expr._CANONICAL:
            raise ParseError("unknown derivative symbol '%s'" % target,
                             tok.line, tok.col)
        return expr.symbol(target)


class _Parser:
    def __init__(self, tokens, resolver):
        self.tokens = tokens
        self.pos = 0
        self.resolver = resolver

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def error(self, message, expected=()):
        t = self.tok
        found = repr(t.text) if t.kind != "EOF" else "end of input"
        raise ParseError("%s, found %s" % (message, found), t.line, t.col,
                         expected)

    def expect_op(self, ch):
        if self.tok.kind == "OP" and self.tok.text == ch:
            return self.advance()
        self.error("expected '%s'" % ch, expected=(ch,))

    def at_op(self, *chars) -> bool:
        return self.tok.kind == "OP" and self.tok.text in chars

    def at_keyword(self, *names) -> bool:
        return (self.tok.kind == "NAME" and self.tok.primes == 0
                and self.tok.text in names)

    # expression grammar -------------------------------------------------
    def parse_expr(self):
        node = self.parse_term()
        while self.at_op("+", "-"):
            op = self.advance().text
            rhs = self.parse_term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            rhs = self.parse_unary()
            if op == "*":
                node = node * rhs
            else:
                if rhs == 0:
                    t = self.tokens[self.pos - 1]
                    raise ParseError("division by zero", t.line, t.col)
                node = node / rhs
        return node

    def parse_unary(self):
        if self.at_op("-"):
            self.advance()
            return -self.parse_unary()
        if self.at_op("+"):
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.at_op("^"):
            self.advance()
            n = self.parse_exponent()
            if n < 0 and base == 0:
                t = self.tok
                raise ParseError("zero raised to a negative power", t.line, t.col)
            base = base ** n
        return base

    def parse_exponent(self) -> int:
        paren = False
        if self.at_op("("):
            self.advance()
            paren = True
        sign = 1
        if self.at_op("-"):
            self.advance()
            sign = -1
        t = self.tok
        if t.kind != "NUMBER" or not t.text.isdigit():
            self.error("expected integer exponent", expected=("integer",))
        self.advance()
        if paren:
            self.expect_op(")")
        return sign * int(t.text)

    def parse_atom(self):
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            if "." in t.text or "e" in t.text or "E" in t.text:
                return sp.Rational(t.text)
            return sp.Integer(int(t.text))
        if t.kind == "NAME":
            if (t.primes == 0 and t.text in expr.FUNCTIONS
                    and self._peek_is_open_paren()):
                self.advance()
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return expr.FUNCTIONS[t.text](arg)
            if t.text in KEYWORDS and t.primes == 0:
                self.error("expected expression", expected=("expression",))
            self.advance()
            return self.resolver.resolve(t)
        if self.at_op("("):
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        self.error("expected expression", expected=("expression",))

    def _peek_is_open_paren(self) -> bool:
        nxt = self.tokens[self.pos + 1]
        return nxt.kind == "OP" and nxt.text == "("


@dataclass(frozen=True)
class OdeSystem:
    """A parsed system f1'' = omega1, f2'' = omega2 with metadata.

    vector_fields holds generators declared in the source, keyed by name in
    declaration order.  pole_locus, when set, is the common denominator of a
    rational right-hand side (the locus where the system is singular).
    """

    name: str
    omega1: expr.Expression
    omega2: expr.Expression
    table: SymbolTable = REAL_TABLE
    vector_fields: dict = field(default_factory=dict)
    pole_locus: expr.Expression | None = None

    @property
    def parameters(self) -> tuple:
        return self.table.parameters

    def rhs(self) -> tuple:
        return (self.omega1, self.omega2)


SystemDocument = OdeSystem


def parse_expression(text: str, table=None, complex_mode: bool = False):
    """Parse a standalone expression.

    Without a table, canonical names (x, f1, f2, u, chi, U, ...) resolve to
    their canonical symbols and anything else becomes a free real parameter;
    with a table, undeclared names are errors.
    """
    tokens = tokenize(text)
    p = _Parser(tokens, _Resolver(table, complex_mode))
    node = p.parse_expr()
    if p.tok.kind != "EOF":
        p.error("trailing input after expression")
    return expr.normalize(node)


def parse_vector_field(text: str, table=None) -> VectorField:
    """Parse generator components given as ``xi = ...; eta1 = ...; eta2 = ...``."""
    tokens = tokenize(text)
    p = _Parser(tokens, _Resolver(table, complex_mode=False))
    comps = _parse_vf_body(p)
    if p.tok.kind != "EOF":
        p.error("trailing input after vector field")
    return comps


def _parse_vf_body(p: _Parser) -> VectorField:
    comps = {}
    for i, fld in enumerate(VF_FIELDS):
        if not p.at_keyword(fld):
            p.error("expected component '%s'" % fld, expected=(fld,))
        p.advance()
        p.expect_op("=")
        e = p.parse_expr()
        bad = {expr.f1p, expr.f2p} & e.free_symbols
        if bad:
            t = p.tok
            raise ParseError("vector field components must not involve "
                             "derivatives", t.line, t.col)
        comps[fld] = expr.normalize(e)
        if i < len(VF_FIELDS) - 1:
            p.expect_op(";")
    return VectorField(comps["xi"], comps["eta1"], comps["eta2"])


def parse_system(text: str) -> OdeSystem:
    """Parse a full ``.odesys`` document and validate it."""
    tokens = tokenize(text)
    p = _Parser(tokens, _Resolver(None))

    if not p.at_keyword("system"):
        p.error("expected 'system'", expected=("system",))
    p.advance()
    if p.tok.kind != "NAME":
        p.error("expected system name", expected=("name",))
    name = p.advance().text

    table = REAL_TABLE
    declared_vars = None
    params: list[str] = []
    equations: dict[int, expr.Expression] = {}
    vfs: dict[str, VectorField] = {}

    while p.tok.kind != "EOF":
        if p.at_keyword("vars"):
            p.advance()
            declared_vars = []
            while p.tok.kind == "NAME" and p.tok.text not in KEYWORDS:
                declared_vars.append(p.advance().text)
            if declared_vars != ["x", "f1", "f2"]:
                t = p.tok
                raise ParseError("vars must declare exactly 'x f1 f2'",
                                 t.line, t.col)
        elif p.at_keyword("params"):
            p.advance()
            while p.tok.kind == "NAME" and p.tok.text not in KEYWORDS:
                params.append(p.advance().text)
            table = REAL_TABLE.with_parameters(params)
        elif p.at_keyword("eq1", "eq2"):
            idx = 1 if p.tok.text == "eq1" else 2
            kw = p.advance()
            p.expect_op(":")
            lhs = p.tok
            want = "f%d" % idx
            if not (lhs.kind == "NAME" and lhs.text == want and lhs.primes == 2):
                p.error("left side of %s must be %s''" % (kw.text, want),
                        expected=(want + "''",))
            p.advance()
            p.expect_op("=")
            p.resolver = _Resolver(table)
            equations[idx] = expr.normalize(p.parse_expr())
        elif p.at_keyword("vf"):
            p.advance()
            if p.tok.kind != "NAME":
                p.error("expected vector field name", expected=("name",))
            vf_name = p.advance().text
            p.expect_op(":")
            p.resolver = _Resolver(table)
            vfs[vf_name] = _parse_vf_body(p)
        else:
            p.error("expected a clause (vars, params, eq1, eq2, vf)",
                    expected=tuple(KEYWORDS - {"system"}))

    if declared_vars is None:
        raise ParseError("missing vars declaration", 1, 1)
    for idx in (1, 2):
        if idx not in equations:
            raise ParseError("missing equation eq%d" % idx, 1, 1)

    pole = None
    dens = [sp.fraction(expr.normalize(equations[i]))[1] for i in (1, 2)]
    dens = [d for d in dens if d != 1]
    if dens:
        pole = expr.normalize(sp.lcm(*dens) if len(dens) > 1 else dens[0])

    return OdeSystem(name=name, omega1=equations[1], omega2=equations[2],
                     table=table, vector_fields=vfs, pole_locus=pole)


def bind_parameters(sys: OdeSystem, bindings: dict) -> OdeSystem:
    """Substitute exact rational values for declared parameters.

    Values may be int, Fraction, or numeric strings; they are converted
    exactly so that downstream symbolic checks stay exact.
    """
    subs = {}
    names = {s.name: s for s in sys.parameters}
    for key, val in bindings.items():
        name = key if isinstance(key, str) else key.name
        if name not in names:
            raise ComplinError("unknown parameter %r (declared: %s)"
                               % (name, ", ".join(sorted(names)) or "none"))
        subs[names[name]] = sp.Rational(str(val))
    remaining = tuple(s for s in sys.parameters if s not in subs)
    table = SymbolTable(sys.table.independent, sys.table.dependents,
                        sys.table.derivatives, remaining)
    vfs = {n: VectorField(*(expr.substitute(c, subs) for c in vf.components()))
           for n, vf in sys.vector_fields.items()}
    return OdeSystem(name=sys.name,
                     omega1=expr.substitute(sys.omega1, subs),
                     omega2=expr.substitute(sys.omega2, subs),
                     table=table, vector_fields=vfs,
                     pole_locus=(expr.substitute(sys.pole_locus, subs)
                                 if sys.pole_locus is not None else None))


# printing -----------------------------------------------------------------

def _print_atom(e, prec_ctx: int) -> str:
    s = format_expression(e)
    if prec_ctx > _precedence(e):
        return "(" + s + ")"
    return s


def _precedence(e) -> int:
    if isinstance(e, sp.Add):
        return 1
    if isinstance(e, sp.Mul):
        return 2
    if isinstance(e, sp.Pow):
        if (isinstance(e.exp, sp.Rational) and e.exp.q == 2):
            return 9  # printed as sqrt(...)
        return 3
    if isinstance(e, sp.Rational) and not isinstance(e, sp.Integer):
        return 2
    if isinstance(e, (sp.Integer, sp.Float)) and e < 0:
        return 1
    return 9


def format_expression(e) -> str:
    """Render an expression in the DSL grammar; parse round-trips it."""
    e = sp.sympify(e)
    if e is sp.I:
        return "i"
    if isinstance(e, sp.Integer):
        return str(int(e))
    if isinstance(e, sp.Rational):
        return "%d/%d" % (e.p, e.q)
    if isinstance(e, sp.Float):
        return repr(float(e))
    if isinstance(e, sp.Symbol):
        return e.name
    if isinstance(e, expr._FUNCTION_CLASSES):
        return "%s(%s)" % (expr.FUNCTION_NAMES[type(e)],
                           format_expression(e.args[0]))
    if isinstance(e, sp.Pow):
        if isinstance(e.exp, sp.Rational) and e.exp.q == 2:
            inner = "sqrt(%s)" % format_expression(e.base)
            n = e.exp.p
            if n == 1:
                return inner
            if n == -1:
                return "1/" + inner
            return "%s^%d" % (inner, n) if n > 0 else "1/%s^%d" % (inner, -n)
        if not isinstance(e.exp, sp.Integer):
            raise expr.ExprError("cannot print exponent %s" % e.exp)
        n = int(e.exp)
        if n < 0:
            return "1/" + _pow_str(e.base, -n)
        return _pow_str(e.base, n)
    if isinstance(e, sp.Mul):
        coeff, factors = e.as_coeff_mul()
        num_parts, den_parts = [], []
        if coeff != 1:
            if coeff == -1:
                pass
            elif isinstance(coeff, sp.Rational) and not isinstance(coeff, sp.Integer):
                if abs(coeff.p) != 1:
                    num_parts.append(str(abs(coeff.p)))
                den_parts.append(str(coeff.q))
            else:
                num_parts.append(format_expression(abs(coeff))
                                 if coeff.is_number and coeff.is_negative
                                 else format_expression(coeff))
        for f in sorted(factors, key=sp.default_sort_key):
            if (isinstance(f, sp.Pow) and isinstance(f.exp, sp.Integer)
                    and int(f.exp) < 0):
                den_parts.append(_pow_str(f.base, -int(f.exp)))
            elif (isinstance(f, sp.Pow) and isinstance(f.exp, sp.Rational)
                    and f.exp.q == 2 and f.exp.p < 0):
                s = "sqrt(%s)" % format_expression(f.base)
                den_parts.append(s if f.exp.p == -1
                                 else "%s^%d" % (s, -f.exp.p))
            else:
                num_parts.append(_print_atom(f, 2))
        if not num_parts:
            num_parts = ["1"]
        out = "*".join(num_parts)
        for d in den_parts:
            out += "/" + (d if _is_simple_factor(d) else "(" + d + ")")
        sign = ""
        if coeff.is_number and coeff.is_negative:
            sign = "-"
        return sign + out
    if isinstance(e, sp.Add):
        terms = e.as_ordered_terms()
        out = format_expression(terms[0])
        for t in terms[1:]:
            s = format_expression(t)
            if s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + s
        return out
    raise expr.ExprError("cannot print node %r" % e)


def _pow_str(base, n: int) -> str:
    b = _print_atom(base, 4)
    return b if n == 1 else "%s^%d" % (b, n)


def _is_simple_factor(s: str) -> bool:
    return re.fullmatch(r"[A-Za-z_0-9']+(\^\d+)?|[A-Za-z_]+\([^()]*\)", s) is not None


def format_vector_field(vf: VectorField) -> str:
    return "xi = %s; eta1 = %s; eta2 = %s" % (
        format_expression(vf.xi), format_expression(vf.eta1),
        format_expression(vf.eta2))


def format_system(doc: OdeSystem) -> str:
    lines = ["system %s" % doc.name, "vars x f1 f2"]
    if doc.parameters:
        lines.append("params %s" % " ".join(s.name for s in doc.parameters))
    lines.append("eq1: f1'' = %s" % format_expression(doc.omega1))
    lines.append("eq2: f2'' = %s" % format_expression(doc.omega2))
    for name, vf in doc.vector_fields.items():
        lines.append("vf %s: %s" % (name, format_vector_field(vf)))
    return "\n".join(lines) + "\n"
