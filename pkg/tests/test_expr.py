import random

import pytest
import sympy as sp

from complin import expr
from complin.expr import (BranchPointError, PoleError, ZeroDenominator,
                          differentiate, eval_complex, f1, f2, f1p, f2p,
                          normalize, substitute, u, up, v, x)
from conftest import random_polynomial


def test_normalize_binomial_identity():
    e = (f1 + f2) ** 2 - f1**2 - 2 * f1 * f2 - f2**2
    assert normalize(e) == 0


def test_normalize_cancellation():
    assert normalize(x / x) == 1
    assert normalize((x**2 - 1) / (x - 1)) == x + 1


def test_normalize_zero_division():
    with pytest.raises(ZeroDenominator):
        normalize(1 / (x - x))


def test_normalize_idempotent():
    rng = random.Random(3)
    for _ in range(20):
        p = random_polynomial(rng)
        q = random_polynomial(rng)
        if normalize(q) == 0:
            continue
        once = normalize(p / q + p)
        assert normalize(once) == once


def test_normalize_rational_constants_lowest_terms():
    e = normalize(sp.Rational(4, 6) * x)
    coeff = e.as_coeff_Mul()[0]
    assert coeff == sp.Rational(2, 3)
    assert coeff.q > 0


def test_differentiate_examples():
    assert differentiate(x**2 * f1, x) == 2 * x * f1
    # chain rule through arctan, against the hand-normalized form
    d = differentiate(sp.atan(f1 / f2), f1)
    expected = normalize((1 / f2) / (1 + (f1 / f2) ** 2))
    assert normalize(d - expected) == 0
    # derivative coordinates are independent symbols
    d2 = differentiate(f1p**3 - 3 * f1p * f2p**2, f1p)
    assert normalize(d2 - (3 * f1p**2 - 3 * f2p**2)) == 0


def test_differentiate_constant_is_zero():
    assert differentiate(sp.Rational(7, 3), x) == 0


def test_substitute_complexification_identity():
    # hand expansion: f1^2 - f2^2 at f1=(u+v)/2, f2=(u-v)/(2i) is (u^2+v^2)/2
    out = substitute(f1**2 - f2**2,
                     {f1: (u + v) / 2, f2: (u - v) / (2 * sp.I)})
    assert normalize(out - (u**2 + v**2) / 2) == 0


def test_substitute_simultaneous():
    assert substitute(x * f1 + f2, {x: sp.Integer(0)}) == f2
    # hodograph swap must not cascade
    out = substitute(x * u, {u: expr.chi, x: expr.Uv})
    assert out == expr.Uv * expr.chi


def test_substitute_div_zero():
    with pytest.raises(ZeroDenominator):
        substitute(1 / (x + f1), {f1: -x})


def test_eval_examples():
    assert eval_complex(x**2 + 1, {x: 2}) == 5
    assert eval_complex(sp.exp(f1) * sp.cos(f2), {"f1": 0, "f2": 0}) == 1
    assert eval_complex(f1p**3 - 3 * f1p * f2p**2,
                        {"f1'": 1, "f2'": 1}) == -2


def test_eval_errors():
    with pytest.raises(PoleError):
        eval_complex(1 / x, {x: 0})
    with pytest.raises(PoleError):
        eval_complex(1 / x, {x: 1e-320})
    with pytest.raises(BranchPointError):
        eval_complex(sp.log(x), {x: 0})
    with pytest.raises(expr.ExprError):
        eval_complex(x + f1, {x: 1})


def test_eval_principal_branches():
    z = eval_complex(sp.sqrt(x), {x: -4})
    assert abs(z - 2j) < 1e-15
    z = eval_complex(sp.log(x), {x: -1})
    assert abs(z.imag - 3.141592653589793) < 1e-15


def test_addition_commutes_and_multiplication_commutes():
    rng = random.Random(11)
    for _ in range(100):
        p = random_polynomial(rng)
        q = random_polynomial(rng)
        assert normalize(p + q) == normalize(q + p)
        assert normalize(p * q - q * p) == 0


def test_product_rule():
    rng = random.Random(12)
    for _ in range(100):
        p = random_polynomial(rng)
        q = random_polynomial(rng)
        s = rng.choice([x, f1, f2, f1p, f2p])
        lhs = differentiate(p * q, s)
        rhs = differentiate(p, s) * q + p * differentiate(q, s)
        assert normalize(lhs - rhs) == 0


def test_derivative_matches_finite_differences():
    rng = random.Random(13)
    syms = (x, f1, f2, f1p, f2p)
    checked = 0
    while checked < 20:
        p = random_polynomial(rng, max_degree=3)
        s = rng.choice(syms)
        d = differentiate(p, s)
        point = {t: complex(rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5))
                 for t in syms}
        h = 1e-5
        hi = dict(point)
        lo = dict(point)
        hi[s] = point[s] + h
        lo[s] = point[s] - h
        approx = (eval_complex(p, hi) - eval_complex(p, lo)) / (2 * h)
        exact = eval_complex(d, point)
        scale = max(1.0, abs(exact))
        assert abs(approx - exact) / scale <= 1e-6
        checked += 1


def test_compile_numeric_matches_eval():
    e = u**2 + sp.exp(u) * sp.cos(u) + 1 / (u + 2)
    f = expr.compile_numeric(e, (u,))
    for z in (0.3 + 0.4j, -1 + 2j, 1.5):
        assert abs(complex(f(z)) - eval_complex(e, {u: z})) < 1e-12


def test_symbol_table_roles():
    table = expr.REAL_TABLE.with_parameters(["c1", "c2"])
    assert table.lookup("c1") is expr.param("c1")
    assert table.lookup("f1'") is f1p
    assert table.lookup("nope") is None
    with pytest.raises(expr.ExprError):
        expr.SymbolTable(independent=x, dependents=(f1, x),
                         derivatives=(f1p, f2p))


def test_normalize_reaches_function_arguments():
    assert normalize(sp.exp(x / x)) == sp.E
    e = normalize(sp.sin((x**2 - 1) / (x - 1)))
    assert e == sp.sin(x + 1)
