"""Triangular lattice geometry: sites, sublattices, triangles, slices and chains.

Sites are stored as integer index pairs ``(z1, z2)`` for the point
``eps * (z1 * e1 + z2 * e2)`` with ``e1 = (1, 0)`` and ``e2 = (1/2, sqrt(3)/2)``.
All combinatorial predicates are evaluated on indices so they are exact.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .regions import Region, unit, perp, TOL

SQRT3 = math.sqrt(3.0)
BASIS = np.array([[1.0, 0.5], [0.0, SQRT3 / 2]])  # columns e1, e2
BASIS_INV = np.linalg.inv(BASIS)

# lattice directions e1, e2, e3 = e2 - e1 in index coordinates
DIRECTIONS = {1: (1, 0), 2: (0, 1), 3: (-1, 1)}


class LatticeIndex(NamedTuple):
    z1: int
    z2: int


def position(idx, eps: float) -> np.ndarray:
    return eps * (BASIS @ np.asarray(idx, dtype=float))


def positions(z: np.ndarray, eps: float) -> np.ndarray:
    """Positions of an integer array of shape (..., 2)."""
    z = np.asarray(z, dtype=float)
    return eps * (z @ BASIS.T)


def sublattice_of(idx) -> int:
    """Label in {1, 2, 3}; (0,0) -> 1, (1,0) -> 2, (0,1) -> 3."""
    return (int(idx[0]) - int(idx[1])) % 3 + 1


def sublattice_labels(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    return (z[..., 0] - z[..., 1]) % 3 + 1


def in_coarse_lattice(idx) -> bool:
    """Membership in the label-1 sublattice spanned by (1,1) and (-1,2)."""
    return sublattice_of(idx) == 1


def icross(a, b) -> int:
    """Cross product in index coordinates; the Euclidean value is this times sqrt(3)/2."""
    return int(a[0]) * int(b[1]) - int(a[1]) * int(b[0])


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1])


UP_OFFSETS = ((0, 0), (1, 0), (0, 1))
DOWN_OFFSETS = ((0, 0), (0, 1), (-1, 1))


@dataclass(frozen=True, order=True)
class Triangle:
    """Elementary triangle with vertices ordered by sublattice label 1, 2, 3."""

    i: LatticeIndex
    j: LatticeIndex
    k: LatticeIndex
    orientation: str  # "up" (counterclockwise i, j, k) or "down"

    def __post_init__(self):
        labels = tuple(sublattice_of(v) for v in (self.i, self.j, self.k))
        if labels != (1, 2, 3):
            raise ValueError(f"vertices not ordered by sublattice: {labels}")
        turn = icross(_sub(self.j, self.i), _sub(self.k, self.j))
        if abs(turn) != 1 or not _is_unit_triangle(self.i, self.j, self.k):
            raise ValueError("vertices do not form an elementary triangle")
        expected = "up" if turn > 0 else "down"
        if self.orientation != expected:
            raise ValueError(f"orientation {self.orientation!r} inconsistent with vertices")

    @classmethod
    def _unchecked(cls, i, j, k, orientation: str) -> "Triangle":
        """Construct from vertices already known to be valid (used for enumerated arrays)."""
        t = object.__new__(cls)
        object.__setattr__(t, "i", i)
        object.__setattr__(t, "j", j)
        object.__setattr__(t, "k", k)
        object.__setattr__(t, "orientation", orientation)
        return t

    @classmethod
    def from_vertices(cls, verts: Iterable) -> "Triangle":
        vs = sorted((LatticeIndex(int(v[0]), int(v[1])) for v in verts), key=sublattice_of)
        turn = icross(_sub(vs[1], vs[0]), _sub(vs[2], vs[1]))
        return cls(vs[0], vs[1], vs[2], "up" if turn > 0 else "down")

    @classmethod
    def from_anchor(cls, anchor, orientation: str = "up") -> "Triangle":
        offs = UP_OFFSETS if orientation == "up" else DOWN_OFFSETS
        return cls.from_vertices(_add(anchor, o) for o in offs)

    @property
    def vertices(self) -> tuple[LatticeIndex, LatticeIndex, LatticeIndex]:
        return (self.i, self.j, self.k)

    @property
    def anchor(self) -> LatticeIndex:
        """Lowest vertex (smallest z2, then smallest z1)."""
        return min(self.vertices, key=lambda v: (v[1], v[0]))

    @property
    def is_up(self) -> bool:
        return self.orientation == "up"

    def sort_key(self):
        a = self.anchor
        return (a[0], a[1], 0 if self.is_up else 1)

    def translate(self, shift) -> "Triangle":
        return Triangle.from_vertices(_add(v, shift) for v in self.vertices)

    def positions(self, eps: float) -> np.ndarray:
        return positions(np.array(self.vertices), eps)

    def barycenter(self, eps: float) -> np.ndarray:
        return self.positions(eps).mean(axis=0)


def _is_unit_triangle(a, b, c) -> bool:
    def norm2(v):
        return v[0] * v[0] + v[0] * v[1] + v[1] * v[1]
    return norm2(_sub(a, b)) == 1 and norm2(_sub(b, c)) == 1 and norm2(_sub(c, a)) == 1


# ---------------------------------------------------------------------------
# triangle enumeration


@dataclass
class TriangleSet:
    """Vectorized triangle list: ``ijk`` has shape (n, 3, 2), ``up`` shape (n,)."""

    ijk: np.ndarray
    up: np.ndarray

    def __len__(self):
        return len(self.up)

    def to_list(self) -> list[Triangle]:
        return [Triangle._unchecked(LatticeIndex(a, b), LatticeIndex(c, d), LatticeIndex(e, f),
                                    "up" if u else "down")
                for (a, b, c, d, e, f), u in zip(self.ijk.reshape(-1, 6).tolist(), self.up.tolist())]

    def subset(self, mask) -> "TriangleSet":
        return TriangleSet(self.ijk[mask], self.up[mask])

    def positions(self, eps: float) -> np.ndarray:
        return positions(self.ijk, eps)

    def barycenters(self, eps: float) -> np.ndarray:
        return self.positions(eps).mean(axis=1)

    def sites(self) -> np.ndarray:
        """Distinct vertex indices, sorted lexicographically."""
        if len(self) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        return np.unique(self.ijk.reshape(-1, 2), axis=0)

    @classmethod
    def from_triangles(cls, tris: Sequence[Triangle]) -> "TriangleSet":
        if not tris:
            return cls(np.zeros((0, 3, 2), dtype=np.int64), np.zeros(0, dtype=bool))
        ijk = np.array([t.vertices for t in tris], dtype=np.int64)
        return cls(ijk, np.array([t.is_up for t in tris]))


def _sort_by_sublattice(verts: np.ndarray) -> np.ndarray:
    labels = sublattice_labels(verts)
    order = np.argsort(labels, axis=1, kind="stable")
    return np.take_along_axis(verts, order[..., None], axis=1)


def index_box(bounds, eps: float, pad: int = 2) -> tuple[int, int, int, int]:
    xmin, xmax, ymin, ymax = bounds
    corners = np.array([[xmin, ymin], [xmin, ymax], [xmax, ymin], [xmax, ymax]]) / eps
    zc = corners @ BASIS_INV.T
    lo = np.floor(zc.min(axis=0)).astype(int) - pad
    hi = np.ceil(zc.max(axis=0)).astype(int) + pad
    return lo[0], hi[0], lo[1], hi[1]


def candidate_triangles(box: tuple[int, int, int, int]) -> TriangleSet:
    """All up and down triangles anchored in an index box, in enumeration order."""
    a1, b1, a2, b2 = box
    z1, z2 = np.meshgrid(np.arange(a1, b1 + 1), np.arange(a2, b2 + 1), indexing="ij")
    anchors = np.stack([z1.ravel(), z2.ravel()], axis=1).astype(np.int64)
    n = len(anchors)
    up = anchors[:, None, :] + np.array(UP_OFFSETS)[None]
    down = anchors[:, None, :] + np.array(DOWN_OFFSETS)[None]
    # interleave so that order is (anchor z1, anchor z2, up before down)
    verts = np.empty((2 * n, 3, 2), dtype=np.int64)
    verts[0::2], verts[1::2] = up, down
    flags = np.zeros(2 * n, dtype=bool)
    flags[0::2] = True
    return TriangleSet(_sort_by_sublattice(verts), flags)


def triangle_set_in(region: Region, eps: float) -> TriangleSet:
    b = region.bounds()
    if b is None:
        raise ValueError("cannot enumerate triangles of an unbounded region")
    cand = candidate_triangles(index_box(b, eps))
    mask = region.contains_triangles(cand.positions(eps))
    return cand.subset(mask)


def triangles_in(region: Region, eps: float) -> list[Triangle]:
    """Closed elementary triangles contained in ``region``, sorted by (anchor, orientation)."""
    return triangle_set_in(region, eps).to_list()


def neighbors(t: Triangle) -> list[Triangle]:
    """The three triangles sharing a side with ``t`` (opposite orientation)."""
    a = t.anchor
    if t.is_up:
        shifts, orient = ((1, -1), (1, 0), (0, 0)), "down"
    else:
        shifts, orient = ((-1, 1), (-1, 0), (0, 0)), "up"
    return [Triangle.from_anchor(_add(a, s), orient) for s in shifts]


def sites_in(region: Region, eps: float) -> np.ndarray:
    b = region.bounds()
    if b is None:
        raise ValueError("cannot enumerate sites of an unbounded region")
    a1, b1, a2, b2 = index_box(b, eps)
    z1, z2 = np.meshgrid(np.arange(a1, b1 + 1), np.arange(a2, b2 + 1), indexing="ij")
    z = np.stack([z1.ravel(), z2.ravel()], axis=1).astype(np.int64)
    return z[region.contains_points(positions(z, eps))]


class EmptyBoundaryError(ValueError):
    pass


def square_boundary_distance(pts: np.ndarray, nu, rho: float) -> np.ndarray:
    """Distance from points to the boundary of the centred square of side rho."""
    n = unit(nu)
    a = np.abs(pts @ perp(n))
    b = np.abs(pts @ n)
    s = rho / 2
    inside = (a < s) & (b < s)
    d_in = s - np.maximum(a, b)
    d_out = np.hypot(np.maximum(a - s, 0.0), np.maximum(b - s, 0.0))
    return np.where(inside, d_in, d_out)


def discrete_boundary(nu, rho: float, eps: float, sign: int) -> set[LatticeIndex]:
    """Sites within 3 eps of the square boundary on the ``sign`` side of the line <x,nu>=0.

    Precisely ``{x : sign*<nu,x> >= 3 eps and dist(x, boundary) <= 3 eps}``.
    """
    if not (eps > 0 and 6 * eps < rho):
        raise ValueError(f"need 0 < 6*eps < rho, got eps={eps}, rho={rho}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    n = unit(nu)
    half = rho / 2 + 3 * eps
    box = index_box((-half * SQRT3, half * SQRT3, -half * SQRT3, half * SQRT3), eps)
    a1, b1, a2, b2 = box
    z1, z2 = np.meshgrid(np.arange(a1, b1 + 1), np.arange(a2, b2 + 1), indexing="ij")
    z = np.stack([z1.ravel(), z2.ravel()], axis=1)
    x = positions(z, eps)
    tol = TOL * rho
    keep = (sign * (x @ n) >= 3 * eps - tol) & (square_boundary_distance(x, n, rho) <= 3 * eps + tol)
    out = {LatticeIndex(int(p[0]), int(p[1])) for p in z[keep]}
    if not out:
        raise EmptyBoundaryError(f"empty discrete boundary for rho={rho}, eps={eps}")
    return out


# ---------------------------------------------------------------------------
# slices and half-slices


def rotate60(d, turns: int = 1):
    """Rotate an index vector by ``turns`` * 60 degrees counterclockwise."""
    z1, z2 = d
    for _ in range(turns % 6):
        z1, z2 = -z2, z1 + z2
    return (z1, z2)


def slice_row(idx, d) -> int:
    """Row of a site across direction ``d``: <x, d_perp> in units of sqrt(3)/2 (eps=1)."""
    return icross(d, idx)


def direction_vector(alpha: int, sign: int = 1):
    d = DIRECTIONS[alpha]
    return (sign * d[0], sign * d[1])


def slice_index(t: Triangle, d) -> int:
    """Band index z with the triangle inside rows z..z+1 across direction ``d``."""
    rows = [slice_row(v, d) for v in t.vertices]
    lo, hi = min(rows), max(rows)
    if hi - lo != 1:
        raise ValueError("triangle is not aligned with a slice band")
    return lo


def half_slice(t0: Triangle, d, count: int) -> list[Triangle]:
    """Triangles T_0 .. T_count stepping along lattice direction ``d``.

    A vertex on the lower row of the band moves by ``d + R60 d``, one on the
    upper row by ``d + R-60 d``. Labels are preserved since both steps lie in
    the coarse sublattice.
    """
    if d not in [direction_vector(a, s) for a in (1, 2, 3) for s in (1, -1)]:
        raise ValueError(f"not a lattice direction: {d}")
    z = slice_index(t0, d)
    up_step = _add(d, rotate60(d, 1))
    down_step = _add(d, rotate60(d, -1))
    out = [t0]
    verts = list(t0.vertices)
    for _ in range(count):
        verts = [_add(v, up_step) if slice_row(v, d) == z else _add(v, down_step) for v in verts]
        out.append(Triangle.from_vertices(verts))
    return out


def between_triangles(ta: Triangle, tb: Triangle) -> list[Triangle]:
    """Elementary triangles spanned by vertices of two consecutive half-slice triangles."""
    pts = list(dict.fromkeys(ta.vertices + tb.vertices))
    out = []
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            for c in range(b + 1, len(pts)):
                if _is_unit_triangle(pts[a], pts[b], pts[c]):
                    t = Triangle.from_vertices((pts[a], pts[b], pts[c]))
                    if t != ta and t != tb:
                        out.append(t)
    return sorted(out, key=Triangle.sort_key)


def half_slice_triangles(t0: Triangle, d, count: int) -> list[Triangle]:
    """All triangles of the half-slice between T_0 and T_count (inclusive)."""
    return list(_half_slice_triangles(t0, tuple(int(c) for c in d), int(count)))


@functools.lru_cache(maxsize=512)
def _half_slice_triangles(t0: Triangle, d: tuple, count: int) -> tuple:
    seq = half_slice(t0, d, count)
    out = [seq[0]]
    for a, b in zip(seq[:-1], seq[1:]):
        out.extend(between_triangles(a, b))
        out.append(b)
    return tuple(out)


# ---------------------------------------------------------------------------
# chains along a line


@dataclass
class Chain:
    """Up triangles ``triangles[n]`` lying in band ``z_start + n`` across direction alpha."""

    nu: np.ndarray
    offset: float
    alpha: int
    eps: float
    z_start: int
    triangles: list[Triangle]

    @property
    def z_values(self) -> range:
        return range(self.z_start, self.z_start + len(self.triangles))

    def __getitem__(self, z: int) -> Triangle:
        return self.triangles[z - self.z_start]

    def __len__(self):
        return len(self.triangles)


def _line_offsets(t: Triangle, n, offset: float, eps: float) -> list[float]:
    # plain floats: this sits in the inner loop of chain construction
    a = eps * float(n[0])
    b = eps * (0.5 * float(n[0]) + SQRT3 / 2 * float(n[1]))
    return [v[0] * a + v[1] * b - offset for v in t.vertices]


def meets_line(t: Triangle, nu, offset: float, eps: float) -> bool:
    s = _line_offsets(t, unit(nu), offset, eps)
    tol = TOL * eps * 10
    return min(s) <= tol and max(s) >= -tol


def _locate_up(x: np.ndarray, eps: float) -> Optional[Triangle]:
    a = BASIS_INV @ (x / eps)
    p = np.floor(a)
    f = a - p
    if f.sum() <= 1.0:
        return Triangle.from_anchor((int(p[0]), int(p[1])), "up")
    return None


def build_chain(nu, offset: float, alpha: int, z_range: tuple[int, int], eps: float) -> Chain:
    """Up triangles T_z for z in [z_lo, z_hi], each meeting the line <x,nu> = offset.

    Consecutive triangles share a vertex. Requires |<e_alpha, nu_perp>| <= 1/2.
    """
    n = unit(nu)
    np_ = perp(n)
    d = DIRECTIONS[alpha]
    e_alpha = BASIS @ np.array(d, dtype=float)
    if abs(e_alpha @ np_) > 0.5 + 1e-12:
        raise ValueError(f"direction {alpha} is not admissible for normal {tuple(n)}")
    z_lo, z_hi = z_range
    if z_hi < z_lo:
        raise ValueError("empty z range")
    # deterministic seed: scan outward along the line from its foot point
    base = offset * n
    seed = None
    for step in range(200):
        for sgn in ((0,) if step == 0 else (1, -1)):
            cand = _locate_up(base + sgn * step * eps / 4 * np_, eps)
            if cand is not None and meets_line(cand, n, offset, eps):
                seed = cand
                break
        if seed is not None:
            break
    if seed is None:
        raise RuntimeError("failed to seed chain")
    # the other two directions, signed to move one band up
    others = [DIRECTIONS[b] for b in (1, 2, 3) if b != alpha]
    ups = []
    for o in others:
        s = slice_row(o, d)
        ups.append((s * o[0], s * o[1]))

    def pick(t: Triangle, sgn: int) -> Triangle:
        best, best_gap = None, math.inf
        for u in ups:
            c = t.translate((sgn * u[0], sgn * u[1]))
            s = _line_offsets(c, n, offset, eps)
            lo, hi = min(s), max(s)
            gap = 0.0 if lo <= 0 <= hi else min(abs(lo), abs(hi))
            if gap < best_gap:
                best, best_gap = c, gap
        return best

    z_seed = slice_index(seed, d)
    tris = {z_seed: seed}
    t = seed
    for z in range(z_seed + 1, z_hi + 1):
        t = pick(t, 1)
        tris[z] = t
    t = seed
    for z in range(z_seed - 1, z_lo - 1, -1):
        t = pick(t, -1)
        tris[z] = t
    return Chain(n, float(offset), alpha, eps, z_lo, [tris[z] for z in range(z_lo, z_hi + 1)])


def chain_predicates(chain: Chain) -> dict[str, bool]:
    """Checks up orientation, band membership, line contact and vertex sharing."""
    d = DIRECTIONS[chain.alpha]
    up = all(t.is_up for t in chain.triangles)
    band = all(slice_index(t, d) == z for z, t in zip(chain.z_values, chain.triangles))
    n = unit(chain.nu)
    line = all(meets_line(t, n, chain.offset, chain.eps) for t in chain.triangles)
    linked = all(set(a.vertices) & set(b.vertices)
                 for a, b in zip(chain.triangles[:-1], chain.triangles[1:]))
    return {"up": up, "in_band": band, "meets_line": line, "linked": bool(linked)}


def admissible_directions(nu) -> list[int]:
    np_ = perp(unit(nu))
    return [a for a in (1, 2, 3)
            if abs((BASIS @ np.array(DIRECTIONS[a], float)) @ np_) <= 0.5 + 1e-12]


def format_triangle(t: Triangle) -> str:
    return " ".join(str(c) for v in t.vertices for c in v) + " " + t.orientation


def write_triangles(stream, tris: Iterable[Triangle]) -> None:
    for t in tris:
        stream.write(format_triangle(t) + "\n")


def read_triangles(stream) -> list[Triangle]:
    out = []
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = line.split()
        v = [(int(p[0]), int(p[1])), (int(p[2]), int(p[3])), (int(p[4]), int(p[5]))]
        t = Triangle.from_vertices(v)
        if t.orientation != p[6]:
            raise ValueError(f"orientation mismatch in line: {line}")
        out.append(t)
    return out
