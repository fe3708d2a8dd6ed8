import csv
import json
import random

import numpy as np
import pytest
import sympy as sp

from complin import analyticity as an
from complin import expr, parser, solve, verify
from complin.expr import chi1, chi2, f1, f2, f1p, f2p, normalize, x
from complin.verify import (BlowUp, DegenerateNormal, GridMismatch,
                            NonUniformGrid, PoleEncountered, Trajectory,
                            compare_trajectories, emit_plot_data,
                            integrate_rk4, make_grid, plane_geometry,
                            residual_check)


def test_trajectory_invariants():
    with pytest.raises(verify.VerifyError):
        Trajectory(xs=[0.0], f1s=[1.0], f2s=[0.0])
    with pytest.raises(verify.VerifyError):
        Trajectory(xs=[0.0, 0.0], f1s=[1.0, 1.0], f2s=[0.0, 0.0])
    with pytest.raises(verify.VerifyError):
        Trajectory(xs=[0.0, 1.0], f1s=[1.0, float("nan")], f2s=[0.0, 0.0])


def test_rk4_free_particle_exact(corpus):
    traj = integrate_rk4(corpus["free"], (0, 0, 1, 0), 0.0, 1.0, 1e-3)
    assert abs(traj.f1s[-1] - 1.0) < 1e-14
    assert abs(traj.f2s[-1]) == 0.0
    assert traj.diagnostics["halving_deviation"] < 1e-14


def test_rk4_sys3_against_closed_form(corpus):
    ap = 2 + 0.5j
    u0 = (ap + np.sqrt(ap**2 + 0j)) / 2
    du0 = 2 / (ap - 2 * u0)
    ic = (u0.real, u0.imag, du0.real, du0.imag)
    traj = integrate_rk4(corpus["sys3"], ic, 0.0, 0.4, 1e-3)
    closed = (ap + np.sqrt((ap**2 - 8 * traj.xs).astype(complex))) / 2
    dev = np.max(np.hypot(traj.f1s - closed.real, traj.f2s - closed.imag))
    assert dev <= 1e-8


def test_rk4_halving_convergence_factor(corpus):
    """Global error drops by at least 12 when h is halved (fourth order)."""
    ap = 2 + 0.5j
    u0 = (ap + np.sqrt(ap**2 + 0j)) / 2
    du0 = 2 / (ap - 2 * u0)
    ic = (u0.real, u0.imag, du0.real, du0.imag)

    def deviation(h):
        traj = integrate_rk4(corpus["sys3"], ic, 0.0, 0.4, h,
                             halving_check=False)
        closed = (ap + np.sqrt((ap**2 - 8 * traj.xs).astype(complex))) / 2
        return np.max(np.hypot(traj.f1s - closed.real,
                               traj.f2s - closed.imag))

    d1 = deviation(4e-3)
    d2 = deviation(2e-3)
    assert d1 / d2 >= 12.0


def test_rk4_requires_bound_parameters(corpus):
    with pytest.raises(verify.VerifyError, match="bind"):
        integrate_rk4(corpus["sys2"], (0, 0, 0, 0), 0.0, 1.0, 1e-3)


def test_rk4_blowup():
    sys_ = parser.OdeSystem(name="explode", omega1=normalize(f1**3),
                            omega2=sp.Integer(0))
    with pytest.raises(BlowUp):
        integrate_rk4(sys_, (3.0, 0.0, 50.0, 0.0), 0.0, 2.0, 1e-3,
                      halving_check=False)


def test_rk4_pole(corpus):
    # f1 crosses zero, where the right-hand side stops being evaluable
    traj_sys = parser.OdeSystem(name="pole", omega1=sp.log(f1),
                                omega2=sp.Integer(0))
    with pytest.raises(PoleEncountered):
        integrate_rk4(traj_sys, (1.0, 0.0, -2.0, 0.0), 0.0, 2.0, 1e-3,
                      halving_check=False)


def test_residual_check_exact_line(corpus):
    xs = make_grid(0.0, 1.0, 1e-2)
    traj = Trajectory(xs=xs, f1s=xs.copy(), f2s=np.zeros_like(xs))
    assert residual_check(corpus["free"], traj) <= 1e-10


def test_residual_check_rk4_sys4(corpus):
    u0 = 0.3 + 0.2j
    ic = (u0.real, u0.imag, 1.0, 0.1)
    traj = integrate_rk4(corpus["sys4"], ic, 0.0, 0.5, 1e-3,
                         halving_check=False)
    assert residual_check(corpus["sys4"], traj) <= 1e-6


def test_residual_check_flags_corruption(corpus):
    xs = make_grid(0.0, 1.0, 1e-2)
    f1s = xs.copy()
    f1s[50] += 1e-3
    traj = Trajectory(xs=xs, f1s=f1s, f2s=np.zeros_like(xs))
    assert residual_check(corpus["free"], traj) >= 1e-2


def test_residual_check_nonuniform(corpus):
    xs = np.array([0.0, 0.1, 0.25, 0.3, 0.5])
    traj = Trajectory(xs=xs, f1s=xs, f2s=np.zeros_like(xs))
    with pytest.raises(NonUniformGrid):
        residual_check(corpus["free"], traj)


def test_compare_trajectories():
    xs = make_grid(0.0, 1.0, 0.1)
    t1 = Trajectory(xs=xs, f1s=xs, f2s=np.zeros_like(xs))
    t2 = Trajectory(xs=xs, f1s=xs, f2s=np.zeros_like(xs))
    assert compare_trajectories(t1, t2) == 0.0
    t3 = Trajectory(xs=xs + 0.5, f1s=xs, f2s=np.zeros_like(xs))
    with pytest.raises(GridMismatch):
        compare_trajectories(t1, t3)


def test_plane_geometry_examples():
    g = plane_geometry(1.0, 0.0, 0.0, 0.0)
    assert g.n1 == (1.0, 0.0) and g.n2 == (0.0, -1.0)
    assert g.dot == 0
    g2 = plane_geometry(3.0, 4.0, 1.0, 2.0)
    assert g2.dot == 0  # 3*4 + 4*(-3)


def test_plane_geometry_random_and_symbolic():
    rng = random.Random(5)
    for _ in range(1000):
        c = [rng.uniform(-10, 10) for _ in range(4)]
        if abs(c[0]) + abs(c[1]) < 1e-9:
            c[0] = 1.0
        assert plane_geometry(*c).dot == 0
    s1, s2, s3, s4 = sp.symbols("s1 s2 s3 s4")
    g = plane_geometry(s1, s2, s3, s4)
    assert sp.expand(g.dot) == 0


def test_plane_geometry_degenerate():
    with pytest.raises(DegenerateNormal):
        plane_geometry(0.0, 0.0, 1.0, 2.0)


def test_plane_solution_satisfies_wave_and_cr_identities():
    """F1 = c1 chi1 + c2 chi2 + c3, F2 = c1 chi2 - c2 chi1 + c4 solve the
    realified free-particle system and the CR coupling."""
    c1, c2, c3, c4 = (expr.param(n) for n in ("pc1", "pc2", "pc3", "pc4"))
    F1 = c1 * chi1 + c2 * chi2 + c3
    F2 = c1 * chi2 - c2 * chi1 + c4
    wave1 = sp.diff(F1, chi1, 2) - sp.diff(F1, chi2, 2) \
        + 2 * sp.diff(F2, chi1, chi2)
    wave2 = sp.diff(F2, chi1, 2) - sp.diff(F2, chi2, 2) \
        - 2 * sp.diff(F1, chi1, chi2)
    assert normalize(wave1) == 0 and normalize(wave2) == 0
    assert normalize(sp.diff(F1, chi1) - sp.diff(F2, chi2)) == 0
    assert normalize(sp.diff(F1, chi2) + sp.diff(F2, chi1)) == 0


def test_line_direction_orthogonal_to_graph_normals():
    g = plane_geometry(3.0, 4.0, 1.0, 2.0)
    n1 = (-3.0, -4.0, 1.0)
    n2 = (4.0, -3.0, 1.0)
    d = g.line_direction
    assert abs(sum(a * b for a, b in zip(n1, d))) < 1e-12
    assert abs(sum(a * b for a, b in zip(n2, d))) < 1e-12
    # the line point lies on both planes
    p = g.line_point
    assert abs(3.0 * p[0] + 4.0 * p[1] + 1.0 - p[2]) < 1e-12
    assert abs(-4.0 * p[0] + 3.0 * p[1] + 2.0 - p[2]) < 1e-12


def test_emit_trajectory_csv(tmp_path, corpus):
    traj = integrate_rk4(corpus["free"], (0, 0, 1, 0), 0.0, 0.1, 0.01)
    out = tmp_path / "traj.csv"
    emit_plot_data(traj, out)
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "f1", "f2", "res1", "res2"]
    assert len(rows) == len(traj) + 1
    assert float(rows[1][0]) == 0.0
    assert float(rows[-1][1]) == pytest.approx(0.1)


def test_emit_plane_json(tmp_path):
    g = plane_geometry(1.0, 0.0, 0.0, 0.0)
    out = tmp_path / "planes.json"
    emit_plot_data(g, out)
    doc = json.loads(out.read_text())
    assert doc["dot"] == 0
    assert doc["n1"] == [1.0, 0.0]
    assert "plane_patches" in doc and "chi1" in doc["plane_patches"]


def test_pipeline_deviation_sys4_and_sys6(corpus):
    """Inversion output against RK4 from the matched initial conditions."""
    for name, bindings, grid, anchor, order, tol in [
        ("sys4", {"a": 1, "b": 1 + 0.5j}, (0.2, 0.9, 1e-3), 0.2 + 0.2j,
         None, 1e-7),
        ("sys6", {"a": 0.3j, "b": 1}, (0.0, 0.8, 1e-3), 0j, 24, 1e-6),
    ]:
        sol = solve.solve_ode(an.complexify(corpus[name]), series_order=order)
        xs = make_grid(*grid)
        traj = solve.invert_to_trajectory(sol, xs, anchor, bindings)
        ic = (traj.f1s[0], traj.f2s[0], traj.f1ps[0], traj.f2ps[0])
        rk = integrate_rk4(corpus[name], ic, grid[0], grid[1], grid[2],
                           halving_check=False)
        assert compare_trajectories(traj, rk) <= tol, name


def test_rk4_stencil_residual_across_corpus(corpus):
    """RK4 output at h = 1e-3 leaves stencil residual <= 1e-5 on every
    preset corpus run."""
    from complin import analyticity as an
    from complin import presets, solve as solve_mod

    for name in ["sys1", "sys3", "sys4", "sys5", "sys6", "sys7", "free"]:
        run = presets.RUNS[name]
        sys_ = corpus[name]
        sol = solve_mod.solve_ode(an.complexify(sys_),
                                  series_order=run.series_order)
        xs = make_grid(*run.grid)
        traj = solve_mod.invert_to_trajectory(sol, xs, run.anchor, run.params)
        ic = (traj.f1s[0], traj.f2s[0], traj.f1ps[0], traj.f2ps[0])
        rk = integrate_rk4(sys_, ic, run.grid[0], run.grid[1], run.grid[2],
                           halving_check=False)
        assert residual_check(sys_, rk) <= 1e-5, name
