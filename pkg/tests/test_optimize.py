import json
import math

import numpy as np
import pytest

from chiralxy.lattice import discrete_boundary, triangle_set_in
from chiralxy.optimize import (SolverConfig, SweepRow, anisotropy_sweep, assemble_cell, convexity_violations,
                               energy_and_gradient, energy_localization, hessian_free, load_config, minimize,
                               problem_from_triangles, solve_cell, wall_profile)
from chiralxy.regions import square
from chiralxy.spin import GroundStateKind, energy_region, ground_angle

FAST = SolverConfig(restarts=2, basin_hops=4)


def small_problem(n_tris=20):
    tris = triangle_set_in(square((0, 1), 0.5), 1 / 8)
    return problem_from_triangles(tris.subset(np.arange(n_tris)), 1 / 8)


def test_assemble_cell_pins_discrete_boundary():
    p = assemble_cell((0, 1), 1.0, 1 / 8)
    keys = [tuple(map(int, s)) for s in p.sites]
    top = discrete_boundary((0, 1), 1.0, 1 / 8, 1)
    bottom = discrete_boundary((0, 1), 1.0, 1 / 8, -1)
    for k, pin, val in zip(keys, p.pinned, p.fixed):
        if k in top:
            assert pin == 1 and val == ground_angle(GroundStateKind.POS, k)
        elif k in bottom:
            assert pin == -1 and val == ground_angle(GroundStateKind.NEG, k)
        else:
            assert pin == 0
    assert p.n_free > 0


def test_assemble_cell_rejects_coarse_spacing():
    with pytest.raises(ValueError):
        assemble_cell((0, 1), 1.0, 0.2)


def test_gradient_matches_finite_differences():
    p = small_problem()
    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * math.pi, len(p.sites))
    _, g = energy_and_gradient(p, th)
    h = 1e-6
    fd = np.array([(energy_and_gradient(p, th + h * e)[0] - energy_and_gradient(p, th - h * e)[0]) / (2 * h)
                   for e in np.eye(len(th))])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-9)


def test_hessian_matches_finite_differences():
    p = small_problem(12)
    rng = np.random.default_rng(1)
    th = rng.uniform(0, 2 * math.pi, len(p.sites))
    hm = hessian_free(p, th).toarray()
    h = 1e-6
    fd = np.array([(energy_and_gradient(p, th + h * e)[1] - energy_and_gradient(p, th - h * e)[1]) / (2 * h)
                   for e in np.eye(len(th))])
    assert np.allclose(hm, fd.T, atol=1e-7)


def test_energy_matches_region_energy():
    p = assemble_cell((0, 1), 1.0, 1 / 8)
    th = p.ansatz()
    e, _ = energy_and_gradient(p, th)
    assert e == pytest.approx(energy_region(p.to_field(th), square((0, 1), 1.0)), rel=1e-12)


def test_all_free_problem_reaches_zero_energy():
    r = minimize(small_problem(), FAST)
    assert r.min_energy == pytest.approx(0.0, abs=1e-10)
    assert r.converged


def test_solution_respects_boundary_and_beats_ansatz():
    p = assemble_cell((0, 1), 1.0, 1 / 8)
    r = minimize(p, FAST)
    ansatz_energy, _ = energy_and_gradient(p, p.ansatz())
    assert 0 < r.min_energy <= ansatz_energy
    for s, pin, val in zip(p.sites, p.pinned, p.fixed):
        if pin:
            assert r.field.theta(tuple(s)) == val
    assert r.converged and r.grad_norm <= 1e-10 * p.eps * p.n_free
    assert len(r.restart_energies) == FAST.restarts + 1
    assert r.min_energy == min(r.restart_energies)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        SolverConfig(restarts=0).validate()
    with pytest.raises(ValueError):
        SolverConfig.from_dict({"grad_tolerance": -1.0})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"nu_angle_rad": 0.5, "rho": 1.0, "eps": 0.125, "solver": {"restarts": 3}}))
    d, cfg = load_config(path)
    assert d["eps"] == 0.125 and cfg.restarts == 3
    path.write_text(json.dumps({"rho": 1.0}))
    with pytest.raises(ValueError):
        load_config(path)


def test_wall_profile_and_localization():
    r = solve_cell((0, 1), 1.0, 1 / 8, FAST)
    prof = wall_profile(r, bins=8)
    assert sum(c for _, _, c in prof) == len(r.problem.tris)
    assert prof[0][1] < 0 < prof[-1][1]
    frac = energy_localization(r, 0.5)
    assert 0 < frac <= 1
    assert energy_localization(r, 1.0) == pytest.approx(1.0)


def test_convexity_checker():
    n = 16
    angles = np.arange(n) * 2 * math.pi / n
    good = [SweepRow(t, 0.1, 0, abs(math.cos(t)) + abs(math.sin(t)), 0, 0, 0, True) for t in angles]
    assert convexity_violations(good, 0.1) == []
    bad = [SweepRow(t, 0.1, 0, 1.0 if k % 2 else 0.2, 0, 0, 0, True) for k, t in enumerate(angles)]
    assert convexity_violations(bad, 0.1)


def test_sweep_rows():
    rows = anisotropy_sweep(2, [1 / 8], FAST)
    assert len(rows) == 2
    # opposite normals share the same cell minimum
    assert rows[0].min_energy == pytest.approx(rows[1].min_energy, rel=1e-6)
