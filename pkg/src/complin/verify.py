"""Numeric ground truth: fixed-step RK4 integration of the real systems,
stencil residual checks, trajectory comparison, the plane-geometry identity,
and plot-data emission.

Fixed-step integration keeps grids deterministic so trajectory comparisons
are exact array operations; the error estimate comes from step halving, not
from adaptivity.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
import sympy as sp

from . import ComplinError
from . import expr
from .expr import x, f1, f2, f1p, f2p

if TYPE_CHECKING:
    from .parser import OdeSystem


class VerifyError(ComplinError):
    pass


class BlowUp(VerifyError):
    """State norm exceeded the blow-up limit during integration."""


class PoleEncountered(VerifyError):
    """Right-hand side evaluation failed along the path."""


class NonUniformGrid(VerifyError):
    pass


class GridMismatch(VerifyError):
    pass


class DegenerateNormal(VerifyError):
    pass


#: state norm limit before integration aborts
BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class Trajectory:
    """Sampled real solution curve.

    xs is strictly increasing; f1s/f2s are the dependent values; derivative
    samples and per-point diagnostic residuals are optional.  diagnostics
    carries integrator metadata such as the step-halving deviation.
    """

    xs: np.ndarray
    f1s: np.ndarray
    f2s: np.ndarray
    f1ps: Optional[np.ndarray] = None
    f2ps: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "f1s", np.asarray(self.f1s, dtype=float))
        object.__setattr__(self, "f2s", np.asarray(self.f2s, dtype=float))
        if len(xs) < 2:
            raise VerifyError("a trajectory needs at least two samples")
        if not np.all(np.diff(xs) > 0):
            raise VerifyError("x samples must be strictly increasing")
        for arr in (self.f1s, self.f2s, self.f1ps, self.f2ps):
            if arr is not None and not np.all(np.isfinite(np.asarray(arr))):
                raise VerifyError("non-finite trajectory values")

    def __len__(self):
        return len(self.xs)


def _compile_rhs(sys: "OdeSystem"):
    if sys.parameters:
        raise VerifyError("bind parameters (%s) before integrating"
                          % ", ".join(s.name for s in sys.parameters))
    syms = (x, f1, f2, f1p, f2p)
    w1 = sp.lambdify(syms, sys.omega1, modules=["math"])
    w2 = sp.lambdify(syms, sys.omega2, modules=["math"])
    return w1, w2


def make_grid(x0: float, x1: float, h: float) -> np.ndarray:
    """Uniform grid from x0 to x1 with step h (x1 adjusted to a whole
    number of steps)."""
    if h <= 0:
        raise VerifyError("step must be positive")
    n = max(1, round((x1 - x0) / h))
    return x0 + h * np.arange(n + 1)


def integrate_rk4(sys: "OdeSystem", ic, x0: float, x1: float, h: float,
                  halving_check: bool = True) -> Trajectory:
    """Classical fixed-step RK4 on the first-order reduction.

    ic is (f1, f2, f1', f2') at x0.  The trajectory's diagnostics carry
    'halving_deviation': the sup-norm change in (f1, f2) when the same
    window is integrated at h/2.
    """
    xs = make_grid(x0, x1, h)
    states = _rk4_states(sys, ic, xs)
    diag = {}
    if halving_check:
        xs2 = make_grid(x0, x1, h / 2)
        states2 = _rk4_states(sys, ic, xs2)
        dev = np.max(np.hypot(states[:, 0] - states2[::2, 0],
                              states[:, 1] - states2[::2, 1]))
        diag["halving_deviation"] = float(dev)
    return Trajectory(xs=xs, f1s=states[:, 0], f2s=states[:, 1],
                      f1ps=states[:, 2], f2ps=states[:, 3],
                      diagnostics=diag)


def _rk4_states(sys: "OdeSystem", ic, xs: np.ndarray) -> np.ndarray:
    w1, w2 = _compile_rhs(sys)

    def rhs(t, s):
        try:
            d1 = w1(t, s[0], s[1], s[2], s[3])
            d2 = w2(t, s[0], s[1], s[2], s[3])
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise PoleEncountered("right-hand side failed at x=%g: %s"
                                  % (t, exc)) from None
        if not (math.isfinite(d1) and math.isfinite(d2)):
            raise PoleEncountered("non-finite right-hand side at x=%g" % t)
        return np.array([s[2], s[3], d1, d2])

    out = np.empty((len(xs), 4))
    state = np.array([float(c) for c in ic])
    out[0] = state
    for i in range(1, len(xs)):
        t = xs[i - 1]
        h = xs[i] - t
        k1 = rhs(t, state)
        k2 = rhs(t + h / 2, state + h / 2 * k1)
        k3 = rhs(t + h / 2, state + h / 2 * k2)
        k4 = rhs(t + h, state + h * k3)
        state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.max(np.abs(state)) > BLOWUP_LIMIT:
            raise BlowUp("state norm exceeded %g at x=%g" % (BLOWUP_LIMIT, xs[i]))
        out[i] = state
    return out


def residual_check(sys: "OdeSystem", traj: Trajectory) -> float:
    """Max interior residual |f_i'' - omega_i| with derivatives from
    5-point central stencils; needs a uniform grid of at least 5 points."""
    xs = traj.xs
    if len(xs) < 5:
        raise VerifyError("need at least 5 points for the stencil")
    steps = np.diff(xs)
    h = steps[0]
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise NonUniformGrid("stencil needs uniform spacing")
    w1, w2 = _compile_rhs(sys)
    worst = 0.0
    fs = (traj.f1s, traj.f2s)
    for i in range(2, len(xs) - 2):
        vals = []
        ders = []
        for f in fs:
            d1 = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * h)
            d2 = (-f[i - 2] + 16 * f[i - 1] - 30 * f[i] + 16 * f[i + 1]
                  - f[i + 2]) / (12 * h * h)
            vals.append(d2)
            ders.append(d1)
        args = (xs[i], fs[0][i], fs[1][i], ders[0], ders[1])
        worst = max(worst, abs(vals[0] - w1(*args)), abs(vals[1] - w2(*args)))
    return worst


def compare_trajectories(a: Trajectory, b: Trajectory) -> float:
    """Sup-norm over the grid of Euclidean distance in (f1, f2)."""
    if len(a) != len(b) or np.max(np.abs(a.xs - b.xs)) > 1e-12:
        raise GridMismatch("trajectories sample different grids")
    return float(np.max(np.hypot(a.f1s - b.f1s, a.f2s - b.f2s)))


@dataclass(frozen=True)
class PlaneGeometry:
    """The two solution planes of the realified free-particle equation.

    Graph normals live in (chi1, chi2, F)-space; their in-plane parts are
    n1 = [c1, c2] and n2 = [c2, -c1], so the dot product vanishes
    identically and the planes meet at a right angle in a line.
    """

    constants: tuple
    n1: tuple
    n2: tuple
    dot: object
    line_point: tuple
    line_direction: tuple


def plane_geometry(c1, c2, c3, c4) -> PlaneGeometry:
    """Planes F1 = c1*chi1 + c2*chi2 + c3, F2 = -c2*chi1 + c1*chi2 + c4.

    Works for numbers and for symbolic constants; the dot product is the
    algebraic identity c1*c2 + c2*(-c1) = 0.
    """
    symbolic = any(isinstance(c, sp.Basic) and c.free_symbols
                   for c in (c1, c2, c3, c4))
    if not symbolic and c1 == 0 and c2 == 0:
        raise DegenerateNormal("(c1, c2) must not be (0, 0)")
    n1 = (c1, c2)
    n2 = (c2, -c1)
    dot = n1[0] * n2[0] + n1[1] * n2[1]
    if symbolic:
        dot = sp.expand(dot)
    # graph normals N1 = [-c1, -c2, 1], N2 = [c2, -c1, 1]; the line runs
    # along their cross product
    direction = (c1 - c2, c1 + c2, c1 * c1 + c2 * c2)
    # point with chi2 = 0 on both planes: (c1 + c2) chi1 = c4 - c3
    if symbolic:
        chi1_v = sp.simplify((c4 - c3) / (c1 + c2))
        point = (chi1_v, sp.Integer(0), sp.simplify(c1 * chi1_v + c3))
    else:
        if abs(c1 + c2) > 1e-300:
            chi1_v = (c4 - c3) / (c1 + c2)
            point = (chi1_v, 0.0, c1 * chi1_v + c3)
        else:
            # c2 = -c1 (nonzero); put chi1 = 0 instead
            chi2_v = (c4 - c3) / (c1 - c2)
            point = (0.0, chi2_v, c2 * chi2_v + c3)
    return PlaneGeometry(constants=(c1, c2, c3, c4), n1=n1, n2=n2, dot=dot,
                         line_point=point, line_direction=direction)


def emit_plot_data(obj, path) -> str:
    """Write plot data: CSV for trajectories (x, f1, f2, res1, res2),
    JSON for plane geometry.  Returns the path written."""
    path = str(path)
    if isinstance(obj, Trajectory):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "f1", "f2", "res1", "res2"])
            res = obj.residuals
            for i in range(len(obj)):
                r = float(res[i]) if res is not None else 0.0
                writer.writerow([repr(float(obj.xs[i])),
                                 repr(float(obj.f1s[i])),
                                 repr(float(obj.f2s[i])),
                                 repr(r), repr(r)])
        return path
    if isinstance(obj, PlaneGeometry):
        c1, c2, c3, c4 = (float(c) for c in obj.constants)
        patches = _plane_patches(c1, c2, c3, c4)
        doc = {
            "constants": [c1, c2, c3, c4],
            "n1": [float(v) for v in obj.n1],
            "n2": [float(v) for v in obj.n2],
            "dot": float(obj.dot),
            "line_point": [float(v) for v in obj.line_point],
            "line_direction": [float(v) for v in obj.line_direction],
            "plane_patches": patches,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        return path
    raise VerifyError("cannot emit plot data for %r" % type(obj).__name__)


def _plane_patches(c1, c2, c3, c4, extent: float = 1.0, n: int = 5) -> dict:
    ts = np.linspace(-extent, extent, n)
    g1, g2 = np.meshgrid(ts, ts)
    plane1 = c1 * g1 + c2 * g2 + c3
    plane2 = -c2 * g1 + c1 * g2 + c4
    return {
        "chi1": g1.tolist(),
        "chi2": g2.tolist(),
        "F1": plane1.tolist(),
        "F2": plane2.tolist(),
    }
