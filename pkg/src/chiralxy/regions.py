"""Planar regions used to select lattice triangles.

Regions are open sets unless stated otherwise. A closed triangle is inside a
region when the whole triangle (vertices, edges and interior) lies in it; for
convex regions this reduces to a vertex test. Boundary comparisons carry a
relative tolerance of ``TOL`` times the region scale so that lattice points
sitting exactly on a boundary are classified consistently despite roundoff.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

TOL = 1e-12


def unit(nu) -> np.ndarray:
    v = np.asarray(nu, dtype=float).reshape(2)
    n = math.hypot(v[0], v[1])
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"direction must be a nonzero finite vector, got {nu!r}")
    return v / n


def perp(nu) -> np.ndarray:
    """Counterclockwise quarter turn."""
    v = np.asarray(nu, dtype=float)
    return np.array([-v[1], v[0]])


def direction(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


class Region:
    """Base class. Subclasses implement the point and triangle predicates."""

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains_triangles(self, verts: np.ndarray) -> np.ndarray:
        """``verts`` has shape (n, 3, 2); returns a boolean mask of length n."""
        raise NotImplementedError

    def closure_meets_triangles(self, verts: np.ndarray) -> np.ndarray:
        """True where the closed triangle intersects the closure of the region."""
        raise NotImplementedError

    def bounds(self) -> Optional[tuple[float, float, float, float]]:
        return None

    def __sub__(self, other: "Region") -> "Region":
        return Difference(self, other)

    def __or__(self, other: "Region") -> "Region":
        return Union([self, other])

    def __and__(self, other: "Region") -> "Region":
        return intersect(self, other)


class ConvexRegion(Region):
    """Intersection of half-planes ``n . x < c`` (open) or ``n . x <= c`` (closed)."""

    def __init__(self, normals, offsets, closed=None, scale: float = 1.0, corners=None):
        self.normals = np.asarray(normals, dtype=float).reshape(-1, 2)
        self.offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if closed is None:
            closed = np.zeros(len(self.offsets), dtype=bool)
        self.closed = np.broadcast_to(np.asarray(closed, dtype=bool), self.offsets.shape).copy()
        self.scale = float(scale)
        self.corners = None if corners is None else np.asarray(corners, dtype=float)

    @property
    def tol(self) -> float:
        return TOL * max(self.scale, 1e-300)

    def _slack(self, pts: np.ndarray) -> np.ndarray:
        # positive slack means the constraint holds with margin
        return self.offsets - pts @ self.normals.T

    def contains_points(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        s = self._slack(pts.reshape(-1, 2))
        ok = np.where(self.closed, s >= -self.tol, s > self.tol)
        return ok.all(axis=1).reshape(pts.shape[:-1])

    def contains_triangles(self, verts) -> np.ndarray:
        verts = np.asarray(verts, dtype=float)
        inside = self.contains_points(verts)
        return inside.all(axis=-1)

    def closure_meets_triangles(self, verts) -> np.ndarray:
        verts = np.asarray(verts, dtype=float)
        n = verts.shape[0]
        s = self._slack(verts.reshape(-1, 2)).reshape(n, 3, -1)
        vertex_in = (s >= -self.tol).all(axis=2).any(axis=1)
        separated = (s < -self.tol).all(axis=1).any(axis=1)
        out = vertex_in.copy()
        for t in np.flatnonzero(~vertex_in & ~separated):
            out[t] = len(self.clip(verts[t], grow=True)) > 0
        return out

    def clip(self, poly: np.ndarray, grow: bool = False) -> np.ndarray:
        """Clip a convex polygon against the closure of this region."""
        pts = np.asarray(poly, dtype=float)
        slack = self.tol if grow else 0.0
        for nrm, c in zip(self.normals, self.offsets):
            pts = _clip_halfplane(pts, nrm, c + slack)
            if len(pts) == 0:
                break
        return pts

    def bounds(self):
        if self.corners is None:
            return None
        c = self.corners
        return (c[:, 0].min(), c[:, 0].max(), c[:, 1].min(), c[:, 1].max())


def _clip_halfplane(pts: np.ndarray, nrm: np.ndarray, c: float) -> np.ndarray:
    """Sutherland-Hodgman step keeping ``nrm . x <= c``."""
    if len(pts) == 0:
        return pts
    out = []
    d = pts @ nrm - c
    m = len(pts)
    for a in range(m):
        b = (a + 1) % m
        pa, pb, da, db = pts[a], pts[b], d[a], d[b]
        if da <= 0:
            out.append(pa)
        if (da < 0 < db) or (db < 0 < da):
            t = da / (da - db)
            out.append(pa + t * (pb - pa))
    if not out:
        return np.zeros((0, 2))
    return np.array(out)


def rectangle(nu, length: float, height: float, center=(0.0, 0.0)) -> ConvexRegion:
    """Open rectangle ``|<x-c, nu_perp>| < length/2, |<x-c, nu>| < height/2``.

    ``length`` may be ``inf`` for an infinite strip.
    """
    if not (length > 0 and height > 0):
        raise ValueError("rectangle sides must be positive")
    if not math.isfinite(height):
        raise ValueError("height must be finite")
    n = unit(nu)
    p = perp(n)
    c = np.asarray(center, dtype=float)
    normals, offsets = [n, -n], [n @ c + height / 2, -(n @ c) + height / 2]
    corners = None
    scale = height
    if math.isfinite(length):
        normals += [p, -p]
        offsets += [p @ c + length / 2, -(p @ c) + length / 2]
        corners = np.array([c + sa * length / 2 * p + sb * height / 2 * n
                            for sa in (-1, 1) for sb in (-1, 1)])
        scale = max(length, height)
    return ConvexRegion(normals, offsets, scale=scale, corners=corners)


def square(nu, rho: float, center=(0.0, 0.0)) -> ConvexRegion:
    return rectangle(nu, rho, rho, center)


def halfplane(nu, sign: int = 1, offset: float = 0.0) -> ConvexRegion:
    """``sign=+1``: closed ``<x,nu> >= offset``; ``sign=-1``: open ``<x,nu> < offset``."""
    n = unit(nu)
    if sign > 0:
        return ConvexRegion([-n], [-offset], closed=[True], scale=max(abs(offset), 1.0))
    return ConvexRegion([n], [offset], closed=[False], scale=max(abs(offset), 1.0))


def polygon(vertices, closed: bool = True) -> ConvexRegion:
    """Convex polygon given by its vertices in either orientation."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    area = sum(cross(v[a], v[(a + 1) % len(v)]) for a in range(len(v)))
    if area == 0:
        raise ValueError("degenerate polygon")
    if area < 0:
        v = v[::-1]
    normals, offsets = [], []
    for a in range(len(v)):
        e = v[(a + 1) % len(v)] - v[a]
        nrm = np.array([e[1], -e[0]]) / math.hypot(*e)
        normals.append(nrm)
        offsets.append(nrm @ v[a])
    scale = float(np.ptp(v, axis=0).max())
    return ConvexRegion(normals, offsets, closed=closed, scale=scale, corners=v)


class Difference(Region):
    """``a`` minus the closure of ``b``."""

    def __init__(self, a: Region, b: Region):
        self.a, self.b = a, b

    def contains_points(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self.a.contains_points(pts) & ~_closure_contains_points(self.b, pts)

    def contains_triangles(self, verts):
        verts = np.asarray(verts, dtype=float)
        ok = self.a.contains_triangles(verts)
        if ok.any():
            idx = np.flatnonzero(ok)
            ok[idx] = ~self.b.closure_meets_triangles(verts[idx])
        return ok

    def closure_meets_triangles(self, verts):
        raise NotImplementedError("closure of a difference is not supported")

    def bounds(self):
        return self.a.bounds()


def _closure_contains_points(r: Region, pts: np.ndarray) -> np.ndarray:
    if isinstance(r, ConvexRegion):
        s = r._slack(pts.reshape(-1, 2))
        return (s >= -r.tol).all(axis=1).reshape(pts.shape[:-1])
    if isinstance(r, Union):
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for m in r.members:
            out |= _closure_contains_points(m, pts)
        return out
    raise NotImplementedError(type(r).__name__)


class Union(Region):
    """Union of convex regions."""

    def __init__(self, members: Sequence[Region]):
        flat = []
        for m in members:
            flat.extend(m.members if isinstance(m, Union) else [m])
        for m in flat:
            if not isinstance(m, ConvexRegion):
                raise TypeError("union members must be convex regions")
        self.members = flat

    def contains_points(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for m in self.members:
            out |= m.contains_points(pts)
        return out

    def contains_triangles(self, verts):
        verts = np.asarray(verts, dtype=float)
        n = verts.shape[0]
        whole = np.zeros(n, dtype=bool)
        for m in self.members:
            whole |= m.contains_triangles(verts)
        covered = self.contains_points(verts).all(axis=1)
        out = whole.copy()
        for t in np.flatnonzero(covered & ~whole):
            out[t] = _polygon_in_union(verts[t], self.members)
        return out

    def closure_meets_triangles(self, verts):
        out = np.zeros(np.asarray(verts).shape[0], dtype=bool)
        for m in self.members:
            out |= m.closure_meets_triangles(verts)
        return out

    def bounds(self):
        bs = [m.bounds() for m in self.members]
        if any(b is None for b in bs):
            return None
        b = np.array(bs)
        return (b[:, 0].min(), b[:, 1].max(), b[:, 2].min(), b[:, 3].max())


def _polygon_in_union(poly: np.ndarray, members: list[ConvexRegion]) -> bool:
    if len(poly) == 0:
        return True
    if not members:
        return False
    first, rest = members[0], members[1:]
    if first.contains_points(poly).all():
        return True
    # poly minus the (open) first member is covered by these convex pieces
    for nrm, c in zip(first.normals, first.offsets):
        piece = _clip_halfplane(poly, -nrm, -c + first.tol)
        if len(piece) and not _polygon_in_union(piece, rest):
            return False
    return True


def intersect(a: Region, b: Region) -> Region:
    if isinstance(a, ConvexRegion) and isinstance(b, ConvexRegion):
        corners = a.corners if a.corners is not None else b.corners
        return ConvexRegion(np.vstack([a.normals, b.normals]),
                            np.concatenate([a.offsets, b.offsets]),
                            np.concatenate([a.closed, b.closed]),
                            scale=max(a.scale, b.scale), corners=corners)
    if isinstance(a, Difference):
        return Difference(intersect(a.a, b), a.b)
    if isinstance(b, Difference):
        return Difference(intersect(a, b.a), b.b)
    raise NotImplementedError("intersection needs convex operands")
