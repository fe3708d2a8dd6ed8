import random
from pathlib import Path

import pytest
import sympy as sp

from complin import parser, symmetry
from complin.expr import x, f1, f2, f1p, f2p

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CORPUS_NAMES = ["sys1", "sys2", "sys3", "sys4", "sys5", "sys6", "sys7",
                "free", "noncr"]


def corpus_path(name: str) -> Path:
    return CORPUS / ("%s.odesys" % name)


@pytest.fixture(scope="session")
def corpus():
    return {name: parser.parse_system(corpus_path(name).read_text())
            for name in CORPUS_NAMES}


@pytest.fixture(scope="session")
def bases(corpus):
    """Degree-2 symmetry bases for the parameter-free corpus systems,
    computed once per session."""
    out = {}
    for name in ["sys1", "sys3", "sys4", "sys5", "sys6", "sys7", "free"]:
        out[name] = symmetry.find_symmetries(corpus[name], degree_cap=2)
    return out


def random_polynomial(rng: random.Random, symbols=(x, f1, f2, f1p, f2p),
                      max_degree: int = 4, terms: int = 6):
    """Random rational-coefficient polynomial in up to five symbols."""
    total = sp.Integer(0)
    for _ in range(rng.randint(1, terms)):
        coeff = sp.Rational(rng.randint(-9, 9), rng.randint(1, 5))
        mono = sp.Integer(1)
        degree = rng.randint(0, max_degree)
        for _ in range(degree):
            mono *= rng.choice(symbols)
        total += coeff * mono
    return total
