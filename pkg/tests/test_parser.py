import pytest
import sympy as sp

from complin import expr, parser
from complin.expr import f1, f2, f1p, f2p, x
from complin.parser import (ParseError, format_expression, format_system,
                            parse_expression, parse_system, parse_vector_field)
from conftest import CORPUS_NAMES, corpus_path


def test_parse_cubic_expression():
    e = parse_expression("f1'^3 - 3*f1'*f2'^2")
    assert expr.normalize(e - (f1p**3 - 3 * f1p * f2p**2)) == 0
    assert len(e.as_ordered_terms()) == 2


def test_parse_reciprocal_shift():
    e = parse_expression("x - 1/u", complex_mode=True)
    assert expr.normalize(e - (x - 1 / expr.u)) == 0


def test_syntax_error_position():
    with pytest.raises(ParseError) as err:
        parse_expression("(")
    assert err.value.line == 1 and err.value.col == 2
    # deterministic: the same text errors identically
    with pytest.raises(ParseError) as err2:
        parse_expression("(")
    assert str(err2.value) == str(err.value)


def test_error_within_offending_token():
    with pytest.raises(ParseError) as err:
        parse_expression("f1 + * f2")
    assert err.value.line == 1 and err.value.col == 6


def test_mandatory_star():
    with pytest.raises(ParseError):
        parse_expression("2 f1")


def test_integer_exponents_only():
    with pytest.raises(ParseError):
        parse_expression("x^f1")
    assert parse_expression("x^(-2)") == x ** -2


def test_imaginary_unit_gating():
    with pytest.raises(ParseError):
        parse_expression("i*x")
    assert parse_expression("i*x", complex_mode=True) == sp.I * x


def test_functions_and_decimals():
    e = parse_expression("exp(f1)*cos(f2) + 0.5*sqrt(x) + arctan(f1/f2)")
    assert e.has(sp.exp) and e.has(sp.cos) and e.has(sp.atan)
    assert sp.Rational(1, 2) in e.as_ordered_terms()[0].as_coeff_Mul() \
        or e.coeff(sp.sqrt(x)) == sp.Rational(1, 2)
    with pytest.raises(ParseError):
        parse_expression("tan(x)")


def test_parse_system_sys3(corpus):
    doc = corpus["sys3"]
    assert expr.normalize(doc.omega1 - (f1p**3 - 3 * f1p * f2p**2)) == 0
    assert expr.normalize(doc.omega2 - (3 * f1p**2 * f2p - f2p**3)) == 0


def test_parse_system_sys7(corpus):
    doc = corpus["sys7"]
    w1 = -3 * f1 * f1p + 3 * f2 * f2p - f1**3 + 3 * f1 * f2**2
    w2 = -3 * f2 * f1p - 3 * f1 * f2p + f2**3 - 3 * f1**2 * f2
    assert expr.normalize(doc.omega1 - w1) == 0
    assert expr.normalize(doc.omega2 - w2) == 0


def test_missing_equation():
    with pytest.raises(ParseError, match="missing equation"):
        parse_system("system s\nvars x f1 f2\neq1: f1'' = 0")


def test_undeclared_symbol():
    with pytest.raises(ParseError, match="undeclared symbol 'q'"):
        parse_system("system s\nvars x f1 f2\neq1: f1'' = q\neq2: f2'' = 0")


def test_second_derivative_on_rhs_rejected():
    with pytest.raises(ParseError, match="second derivative"):
        parse_system("system s\nvars x f1 f2\n"
                     "eq1: f1'' = f2''\neq2: f2'' = 0")


def test_wrong_lhs():
    with pytest.raises(ParseError, match="left side"):
        parse_system("system s\nvars x f1 f2\neq1: f2'' = 0\neq2: f2'' = 0")


def test_params_declaration(corpus):
    doc = corpus["sys2"]
    names = [s.name for s in doc.parameters]
    assert names == ["c1", "c2"]


def test_vector_field_examples():
    vf = parse_vector_field("xi=1; eta1=0; eta2=0")
    assert (vf.xi, vf.eta1, vf.eta2) == (1, 0, 0)
    vf = parse_vector_field("xi=2*x; eta1=f1; eta2=f2")
    assert vf.xi == 2 * x and vf.eta1 == f1 and vf.eta2 == f2
    vf = parse_vector_field("xi=x^2; eta1=-2*x*f1; eta2=-2*x*f2")
    assert expr.normalize(vf.eta1 + 2 * x * f1) == 0


def test_vector_field_rejects_derivatives():
    with pytest.raises(ParseError, match="derivative"):
        parse_vector_field("xi=f1'; eta1=0; eta2=0")


def test_corpus_round_trip(corpus):
    for name in CORPUS_NAMES:
        doc = corpus[name]
        doc2 = parse_system(format_system(doc))
        assert expr.normalize(doc.omega1 - doc2.omega1) == 0, name
        assert expr.normalize(doc.omega2 - doc2.omega2) == 0, name
        assert list(doc.vector_fields) == list(doc2.vector_fields), name
        for key in doc.vector_fields:
            for c1, c2 in zip(doc.vector_fields[key].components(),
                              doc2.vector_fields[key].components()):
                assert expr.normalize(c1 - c2) == 0, (name, key)


def test_expression_print_parse_round_trip():
    samples = [
        f1p**3 - 3 * f1p * f2p**2,
        (f1**2 * f1p + 2 * f1 * f2 * f2p) / (f1**2 + f2**2) ** 2,
        sp.Rational(-3, 2) * x ** 2 + sp.sqrt(x) / 2,
        sp.exp(f1) * sp.cos(f2) - sp.atan(f1 / f2),
        -x - 1 / (x + 1),
        sp.I * x + 2,
    ]
    for e in samples:
        text = format_expression(expr.normalize(e))
        back = parse_expression(text, complex_mode=True)
        assert expr.normalize(back - e) == 0, (e, text)


def test_bind_parameters(corpus):
    doc = parser.bind_parameters(corpus["sys2"], {"c1": 1, "c2": "1/2"})
    assert not doc.parameters
    assert expr.param("c1") not in doc.omega1.free_symbols
    # omega1 carries -c2*f2' = -f2'/2 exactly
    assert expr.normalize(doc.omega1.coeff(f2p) + sp.Rational(1, 2)) == 0
    with pytest.raises(Exception):
        parser.bind_parameters(corpus["sys2"], {"zzz": 1})


def test_comments_ignored():
    doc = parse_system("# heading\nsystem s # trailing\nvars x f1 f2\n"
                       "eq1: f1'' = 0 # zero\neq2: f2'' = 0\n")
    assert doc.omega1 == 0
