import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralxy.lattice import (DIRECTIONS, LatticeIndex, Triangle, admissible_directions,
                              between_triangles, build_chain, chain_predicates, discrete_boundary,
                              half_slice, half_slice_triangles, neighbors, position, read_triangles,
                              slice_index, sublattice_of, triangles_in, write_triangles)
from chiralxy.regions import Union, polygon, rectangle, square

S3 = math.sqrt(3)


def brute_triangles(contains_point, box, eps):
    """Independent enumeration: every unit triangle with all vertices strictly inside."""
    out = set()
    for a in range(-box, box + 1):
        for b in range(-box, box + 1):
            for offs in (((0, 0), (1, 0), (0, 1)), ((1, 0), (0, 1), (1, 1))):
                vs = [(a + o[0], b + o[1]) for o in offs]
                if all(contains_point(eps * (v[0] + v[1] / 2), eps * v[1] * S3 / 2) for v in vs):
                    out.add(frozenset(vs))
    return out


def test_sublattice_labels():
    assert [sublattice_of(v) for v in [(0, 0), (1, 0), (0, 1), (2, 1)]] == [1, 2, 3, 2]
    # the coarse sublattice is spanned by (1,1) and (-1,2)
    for a in range(-3, 4):
        for b in range(-3, 4):
            assert sublattice_of((a - b, a + 2 * b)) == 1


def test_up_triangle_is_counterclockwise():
    t = Triangle.from_vertices([(0, 0), (1, 0), (0, 1)])
    assert t.orientation == "up"
    p = [position(v, 1.0) for v in t.vertices]
    cross = (p[1] - p[0])[0] * (p[2] - p[1])[1] - (p[1] - p[0])[1] * (p[2] - p[1])[0]
    assert cross == pytest.approx(S3 / 2)
    assert Triangle.from_vertices([(0, 0), (1, 0), (1, -1)]).orientation == "down"


def test_triangle_validation():
    with pytest.raises(ValueError):
        Triangle(LatticeIndex(0, 0), LatticeIndex(1, 0), LatticeIndex(0, 1), "down")
    with pytest.raises(ValueError):
        Triangle.from_vertices([(0, 0), (2, 0), (0, 1)])


@pytest.mark.parametrize("orient", ["up", "down"])
def test_neighbors_match_brute_force(orient):
    t = Triangle.from_anchor((3, -2), orient)
    cands = set()
    for a in range(-1, 8):
        for b in range(-6, 3):
            for o in ("up", "down"):
                s = Triangle.from_anchor((a, b), o)
                if len(set(s.vertices) & set(t.vertices)) == 2:
                    cands.add(s)
    assert set(neighbors(t)) == cands
    assert all(n.orientation != orient for n in neighbors(t))


def test_neighbor_across_bottom_side():
    t = Triangle.from_vertices([(0, 0), (1, 0), (0, 1)])
    third = {v for n in neighbors(t) for v in n.vertices} - set(t.vertices)
    assert (1, -1) in third  # e1 - e2


def test_closed_triangle_region_has_one_triangle():
    reg = polygon([(0, 0), (1, 0), (0.5, S3 / 2)], closed=True)
    assert triangles_in(reg, 1.0) == [Triangle.from_anchor((0, 0), "up")]


def test_tiny_square_is_empty():
    assert triangles_in(square((0, 1), 1 / 16), 1 / 8) == []


@pytest.mark.parametrize("angle", [0.0, 0.3, 1.1, math.pi / 2, 2.5])
def test_square_enumeration_matches_brute_force(angle):
    nu = (math.cos(angle), math.sin(angle))
    perp = (-nu[1], nu[0])
    eps, rho = 1 / 8, 1.0

    def inside(x, y):
        return abs(x * perp[0] + y * perp[1]) < rho / 2 - 1e-12 and abs(x * nu[0] + y * nu[1]) < rho / 2 - 1e-12

    got = {frozenset(t.vertices) for t in triangles_in(square(nu, rho), eps)}
    assert got == brute_triangles(inside, 20, eps)


def test_enumeration_order_is_lexicographic():
    tris = triangles_in(square((0, 1), 1.0), 1 / 8)
    keys = [t.sort_key() for t in tris]
    assert keys == sorted(keys)


def test_union_containment_matches_sampling():
    """A triangle may lie in a union without lying in either member."""
    a = rectangle((0, 1), 0.5, 1.0)
    b = rectangle((0, 1), 1.0, 0.5)
    eps = 1 / 16
    got = {frozenset(t.vertices) for t in triangles_in(Union([a, b]), eps)}
    rng = np.random.default_rng(1)
    w = rng.dirichlet([1, 1, 1], size=400)
    w = np.vstack([w, np.eye(3), [[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]]])
    expected = set()
    for z1 in range(-20, 21):
        for z2 in range(-20, 21):
            for offs in (((0, 0), (1, 0), (0, 1)), ((1, 0), (0, 1), (1, 1))):
                vs = [(z1 + o[0], z2 + o[1]) for o in offs]
                p = np.array([position(v, eps) for v in vs])
                pts = w @ p
                ina = (np.abs(pts[:, 0]) < 0.25 - 1e-12) & (np.abs(pts[:, 1]) < 0.5 - 1e-12)
                inb = (np.abs(pts[:, 0]) < 0.5 - 1e-12) & (np.abs(pts[:, 1]) < 0.25 - 1e-12)
                if (ina | inb).all():
                    expected.add(frozenset(vs))
    assert got == expected


def test_discrete_boundary_brute_force():
    nu, rho, eps = (0.0, 1.0), 1.0, 1 / 8
    got = discrete_boundary(nu, rho, eps, 1)
    exp = set()
    for z1 in range(-30, 31):
        for z2 in range(-30, 31):
            x, y = eps * (z1 + z2 / 2), eps * z2 * S3 / 2
            if y < 3 * eps - 1e-12:
                continue
            ax, ay = abs(x), abs(y)
            if ax < 0.5 and ay < 0.5:
                d = 0.5 - max(ax, ay)
            else:
                d = math.hypot(max(ax - 0.5, 0), max(ay - 0.5, 0))
            if d <= 3 * eps + 1e-12:
                exp.add((z1, z2))
    assert got == exp
    assert got.isdisjoint(discrete_boundary(nu, rho, eps, -1))


def test_discrete_boundary_errors():
    with pytest.raises(ValueError):
        discrete_boundary((0, 1), 0.5, 0.1, 1)  # 6 eps >= rho
    with pytest.raises(ValueError):
        discrete_boundary((0, 1), 1.0, 0.1, 0)


def test_half_slice_first_step():
    t0 = Triangle.from_vertices([(0, 0), (1, 0), (0, 1)])
    seq = half_slice(t0, DIRECTIONS[1], 2)
    assert set(seq[1].vertices) == {(1, 1), (2, 1), (2, 0)}
    assert seq[1].orientation == "down"
    assert set(seq[2].vertices) == {(3, 0), (4, 0), (3, 1)}


@settings(max_examples=60, deadline=None)
@given(st.integers(-20, 20), st.integers(-20, 20), st.sampled_from(["up", "down"]),
       st.sampled_from([1, 2, 3]), st.sampled_from([1, -1]), st.integers(1, 12))
def test_half_slice_properties(a, b, orient, alpha, sgn, h):
    d = (sgn * DIRECTIONS[alpha][0], sgn * DIRECTIONS[alpha][1])
    t0 = Triangle.from_anchor((a, b), orient)
    seq = half_slice(t0, d, 2 * h)
    band = slice_index(t0, d)
    for t in seq:
        assert slice_index(t, d) == band
    # labels are kept and two steps translate by three lattice steps
    shifted = t0.translate((3 * h * d[0], 3 * h * d[1]))
    assert seq[2 * h] == shifted
    # between triangles use only vertices of the two neighbours
    for x, y in zip(seq[:-1], seq[1:]):
        mids = between_triangles(x, y)
        assert len(mids) == 2
        for m in mids:
            assert set(m.vertices) <= set(x.vertices) | set(y.vertices)


def test_half_slice_rejects_non_direction():
    with pytest.raises(ValueError):
        half_slice(Triangle.from_anchor((0, 0)), (1, 1), 2)


def test_half_slice_sites_are_triangle_vertices():
    t0 = Triangle.from_anchor((0, 0), "up")
    tris = half_slice_triangles(t0, DIRECTIONS[2], 6)
    seq_vertices = {v for t in half_slice(t0, DIRECTIONS[2], 6) for v in t.vertices}
    assert {v for t in tris for v in t.vertices} == seq_vertices
    assert len(tris) == 6 * 3 + 1


def test_chain_example():
    c = build_chain((0, 1), 0.0, 2, (-50, 49), 1 / 16)
    assert len(c) == 100
    assert all(chain_predicates(c).values())


def test_chain_rejects_inadmissible_direction():
    with pytest.raises(ValueError):
        build_chain((0, 1), 0.0, 1, (0, 10), 0.1)
    assert 1 not in admissible_directions((0, 1))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-2, 2), st.integers(-30, 30))
def test_chain_predicates_random(angle, offset, z0):
    nu = (math.cos(angle), math.sin(angle))
    for alpha in admissible_directions(nu):
        c = build_chain(nu, offset, alpha, (z0, z0 + 40), 1 / 32)
        assert all(chain_predicates(c).values())


def test_triangle_dump_round_trip():
    tris = triangles_in(square((0, 1), 0.5), 1 / 8)
    buf = io.StringIO()
    write_triangles(buf, tris)
    first = buf.getvalue().splitlines()[0].split()
    assert len(first) == 7 and first[6] in ("up", "down")
    buf.seek(0)
    assert read_triangles(buf) == tris
