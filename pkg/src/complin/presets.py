"""Default solve runs for the bundled corpus.

Each entry fixes solution-parameter bindings, a grid, and a Newton anchor
chosen to stay clear of the system's singular loci and branch points (the
grid doubles as the exclusion-zone declaration).  The CLI falls back to
these when no explicit bindings are given, and the acceptance suite runs
them verbatim.

Solution parameters follow the package convention: the general solution of
a linear target is particular + a*y1 + b*y2 with y1, y2 the fundamental
pair normalized at the expansion center (y1 = 1 + ..., y2 = chi + ...);
first-integral families use c (integration constant) and m (quadrature
constant).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction


@dataclass(frozen=True)
class SolveRun:
    """One reproducible solve invocation for a corpus system."""

    system: str
    params: dict
    grid: tuple                    # (start, stop, step)
    anchor: complex
    series_order: int | None = None
    system_params: dict = field(default_factory=dict)
    note: str = ""


RUNS = {
    "sys1": SolveRun(
        system="sys1", params={"c": 1, "m": 0.2j}, grid=(2.0, 3.0, 1e-3),
        anchor=2.0 + 0.1j,
        note="keeps c*u - 1 off the log branch cut and u away from 0"),
    "sys2": SolveRun(
        system="sys2", params={"a": 1 + 0.5j, "b": 0.5},
        system_params={"c1": 1, "c2": 1},
        grid=(0.0, 1.0, 1e-3), anchor=0.4 + 0.2j),
    "sys3": SolveRun(
        system="sys3", params={"a": 0, "b": 1 + 0.25j},
        grid=(0.0, 0.4, 1e-3), anchor=2 + 0.5j,
        note="equals the printed closed form with constants 2U = -chi^2 + "
             "(2+0.5i)*chi; the branch point sits off the real axis"),
    "sys4": SolveRun(
        system="sys4", params={"a": 1, "b": 1 + 0.5j},
        grid=(0.2, 0.9, 1e-3), anchor=0.2 + 0.2j),
    "sys5": SolveRun(
        system="sys5", params={"a": 0.2 + 0.1j, "b": 1},
        grid=(0.0, 0.5, 1e-3), anchor=0j,
        note="the Jacobian zero at u = +-sqrt(2) stays off the path"),
    "sys6": SolveRun(
        system="sys6", params={"a": 0.3j, "b": 1},
        grid=(0.0, 0.8, 1e-3), anchor=0j, series_order=24,
        note="|u| stays inside the series working disc"),
    "sys7": SolveRun(
        system="sys7", params={"a": 1 + 1j, "b": 0},
        grid=(1.0, 2.0, 1e-3), anchor=-0.4 + 0.8j,
        note="matches the printed rational solution with its slope "
             "constant 0 and intercept 1+i"),
    "free": SolveRun(
        system="free", params={"c": 1, "m": 0}, grid=(0.0, 1.0, 1e-3),
        anchor=0j, note="identity run: f1 = x, f2 = 0"),
}
