"""Cauchy-Riemann analysis: decide whether (omega1, omega2) are the real
and imaginary parts of an analytic function w of u = f1 + i*f2 and
u' = f1' + i*f2', and convert between the real pair and the scalar
complex ODE u'' = w(x, u, u').
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import sympy as sp

from . import ComplinError
from . import expr
from .expr import f1, f2, f1p, f2p, u, up, v, vp, normalize, differentiate

if TYPE_CHECKING:
    from .parser import OdeSystem


class ConjugateResidue(ComplinError):
    """The conjugate symbol survived complexification: the input is not
    analytic, or the CR check and normalization disagree."""


class NotRational(ComplinError):
    """realify needs a polynomial or rational right-hand side."""


#: labels for the four CR residuals, in report order
CR_PAIRS = (
    "d(omega1)/d(f1) - d(omega2)/d(f2)",
    "d(omega1)/d(f2) + d(omega2)/d(f1)",
    "d(omega1)/d(f1') - d(omega2)/d(f2')",
    "d(omega1)/d(f2') + d(omega2)/d(f1')",
)


@dataclass(frozen=True)
class CrReport:
    """Outcome of the Cauchy-Riemann check: four residuals, a verdict, and
    the labels of the violated pairs."""

    residuals: tuple
    verdict: bool
    violated: tuple

    def __bool__(self):
        return self.verdict


@dataclass(frozen=True)
class ComplexODE:
    """Scalar complex equation u'' = w(x, u, u').

    w never contains the conjugate symbols after construction; this is the
    analyticity certificate.
    """

    w: expr.Expression
    source: "OdeSystem | None" = None

    @property
    def parameters(self):
        return expr.free_parameters(self.w)


def cr_check(sys: "OdeSystem") -> CrReport:
    """Evaluate the four real Cauchy-Riemann identities on (omega1, omega2),
    in both (f1, f2) and (f1', f2')."""
    w1, w2 = sys.omega1, sys.omega2
    residuals = (
        normalize(differentiate(w1, f1) - differentiate(w2, f2)),
        normalize(differentiate(w1, f2) + differentiate(w2, f1)),
        normalize(differentiate(w1, f1p) - differentiate(w2, f2p)),
        normalize(differentiate(w1, f2p) + differentiate(w2, f1p)),
    )
    violated = tuple(CR_PAIRS[i] for i, r in enumerate(residuals) if r != 0)
    return CrReport(residuals=residuals, verdict=not violated,
                    violated=violated)


_COMPLEXIFY_SUBS = {
    f1: (u + v) / 2,
    f2: (u - v) / (2 * sp.I),
    f1p: (up + vp) / 2,
    f2p: (up - vp) / (2 * sp.I),
}


def complexify(sys: "OdeSystem") -> ComplexODE:
    """Build w = omega1 + i*omega2 in terms of u, u'.

    Requires a passing cr_check; if the formal conjugate symbols v, v'
    survive normalization a ConjugateResidue is raised.
    """
    w = expr.substitute(sys.omega1 + sp.I * sys.omega2, _COMPLEXIFY_SUBS)
    leftovers = {v, vp} & w.free_symbols
    if leftovers:
        raise ConjugateResidue(
            "conjugate symbols %s survive in %s; the system does not satisfy "
            "the Cauchy-Riemann equations"
            % (sorted(s.name for s in leftovers), sys.name))
    return ComplexODE(w=w, source=sys)


def realify(w: expr.Expression, name: str = "realified") -> "OdeSystem":
    """Split u'' = w(x, u, u') into the real pair (inverse of complexify).

    w must be polynomial or rational in u, u'; a rational w yields a system
    with the vanishing denominator recorded as pole_locus.
    """
    from .parser import OdeSystem

    w = normalize(sp.sympify(w))
    if w.atoms(sp.Function):
        raise NotRational("realify needs a polynomial or rational w, got %s" % w)
    ws = w.subs({u: f1 + sp.I * f2, up: f1p + sp.I * f2p}, simultaneous=True)
    re_part, im_part = ws.as_real_imag()
    omega1 = normalize(re_part)
    omega2 = normalize(im_part)
    pole = None
    dens = [sp.fraction(o)[1] for o in (omega1, omega2)]
    dens = [d for d in dens if d != 1]
    if dens:
        pole = normalize(sp.lcm(*dens) if len(dens) > 1 else dens[0])
    return OdeSystem(name=name, omega1=omega1, omega2=omega2,
                     pole_locus=pole)
