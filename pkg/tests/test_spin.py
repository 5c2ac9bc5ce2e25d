import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralxy.lattice import Triangle, neighbors, triangles_in
from chiralxy.regions import square
from chiralxy.spin import (GroundStateKind, MissingSiteError, SpinField, chirality_field, chirality_triangle,
                           chirality_triangle_lift, energy_region, energy_triangle, energy_triangle_lift,
                           ground_state, interface_diagnostics, l1_chirality_distance, sign_threshold,
                           target_chirality)

UP = Triangle.from_anchor((0, 0), "up")
DOWN = Triangle.from_anchor((0, 0), "down")


def field_on(t, angles, eps=1.0):
    return SpinField(eps, dict(zip(t.vertices, angles)))


def test_aligned_spins_have_maximal_energy():
    u = field_on(UP, (0.3, 0.3, 0.3), eps=0.5)
    assert energy_triangle(u, UP) == pytest.approx(4.5)
    assert chirality_triangle(u, UP) == pytest.approx(0.0)


def test_equilateral_counterclockwise_is_positive():
    u = field_on(UP, (0.0, 2 * math.pi / 3, 4 * math.pi / 3))
    assert energy_triangle(u, UP) == pytest.approx(0.0, abs=1e-15)
    assert chirality_triangle(u, UP) == pytest.approx(1.0, abs=1e-15)


def test_missing_site_raises():
    u = SpinField(1.0, {(0, 0): 0.0, (1, 0): 1.0})
    with pytest.raises(MissingSiteError):
        energy_triangle(u, UP)


def test_nonpositive_eps_rejected():
    with pytest.raises(ValueError):
        SpinField(0.0, {})


@pytest.mark.parametrize("kind,sign", [(GroundStateKind.POS, 1), (GroundStateKind.NEG, -1)])
def test_ground_state_on_large_patch(kind, sign):
    sites = [(a, b) for a in range(-25, 25) for b in range(-25, 25)]
    u = ground_state(kind, 1 / 64, sites)
    tris = [Triangle.from_anchor((a, b), o) for a in range(-25, 23) for b in range(-24, 24)
            for o in ("up", "down")]
    tris = [t for t in tris if all(v in u for v in t.vertices)]
    assert len(tris) > 4000
    assert max(abs(energy_triangle(u, t)) for t in tris) <= 1e-12
    assert max(abs(chirality_triangle(u, t) - sign) for t in tris) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.integers(0, 1))
def test_lift_and_vector_forms_agree(angles, which):
    t = (UP, DOWN)[which]
    u = field_on(t, angles, eps=0.25)
    assert abs(energy_triangle(u, t) - energy_triangle_lift(u, t)) <= 1e-12
    assert abs(chirality_triangle(u, t) - chirality_triangle_lift(u, t)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(-10, 10),
       st.integers(-3, 3))
def test_invariance_under_rotation_and_lifting(angles, c, k):
    u = field_on(UP, angles)
    v = field_on(UP, [a + c + 2 * math.pi * k for a in angles])
    assert energy_triangle(v, UP) == pytest.approx(energy_triangle(u, UP), abs=1e-9)
    assert chirality_triangle(v, UP) == pytest.approx(chirality_triangle(u, UP), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_reflection_flips_chirality(angles):
    u = field_on(UP, angles)
    v = field_on(UP, [-a for a in angles])
    assert chirality_triangle(v, UP) == pytest.approx(-chirality_triangle(u, UP), abs=1e-12)
    assert energy_triangle(v, UP) == pytest.approx(energy_triangle(u, UP), abs=1e-12)
    assert abs(chirality_triangle(u, UP)) <= 1 + 1e-12


def test_sign_threshold_zero_maps_negative():
    assert sign_threshold(0.0) == -1
    assert sign_threshold(1e-300) == 1


def test_sharp_interface_region_quantities():
    eps = 1 / 16
    reg = square((0, 1), 1.0)
    sites = {v for t in triangles_in(reg, eps) for v in t.vertices}
    pos = ground_state(GroundStateKind.POS, eps, sites)
    neg = ground_state(GroundStateKind.NEG, eps, sites)
    from chiralxy.lattice import position
    u = SpinField(eps, {s: (pos.angles[s] if position(s, eps)[1] >= 0 else neg.angles[s]) for s in sites})
    assert energy_region(pos, reg) == 0.0
    chi = chirality_field(u, reg)
    # every triangle away from the cut line carries the target sign
    for t, c in chi.values.items():
        y = t.barycenter(eps)[1]
        if abs(y) > eps:
            assert c == pytest.approx(math.copysign(1, y), abs=1e-12)
    d = interface_diagnostics(u, reg)
    assert d.count > 0
    assert d.perimeter_bound == pytest.approx(3 * eps * d.count)
    assert d.pair_energy_min >= 5 * eps / 3 - 1e-12
    assert d.total_energy == pytest.approx(energy_region(u, reg))
    # L1 distance to the target is confined to a band of width about eps
    l1 = l1_chirality_distance(chi, target_chirality((0, 1)))
    assert 0 < l1 <= 2 * 3 * eps


def test_pair_energy_lower_bound_random():
    """Adjacent triangles of opposite chirality cost at least 5/3 eps together."""
    rng = np.random.default_rng(3)
    t, s = UP, neighbors(UP)[0]
    sites = sorted(set(t.vertices) | set(s.vertices))
    worst = math.inf
    for _ in range(20000):
        u = SpinField(1.0, dict(zip(sites, rng.uniform(0, 2 * math.pi, 4))))
        if chirality_triangle(u, t) * chirality_triangle(u, s) < 0:
            worst = min(worst, energy_triangle(u, t) + energy_triangle(u, s))
    assert worst >= 5 / 3 - 1e-9
