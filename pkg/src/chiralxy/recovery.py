"""Recovery constructions: paving a polygonal interface with cell solutions and
forcing a cell competitor to take the ground-state boundary values."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .analysis import (InterpolationPlan, LiftedTriple, StripChoice, chain_lifts,
                       interpolation_angles, select_strip)
from .lattice import (BASIS, BASIS_INV, DIRECTIONS, SQRT3, TriangleSet, build_chain,
                      direction_vector, discrete_boundary, half_slice, half_slice_triangles,
                      positions, sublattice_of, triangle_set_in)
from .regions import ConvexRegion, Difference, Union, perp, rectangle, square, unit
from .spin import (TWO_PI, GroundStateKind, MissingSiteError, SpinField, angle_distance,
                   energy_on, ground_angle, triangle_chiralities, triangle_energies)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# polygonal interfaces


@dataclass
class PolygonalInterface:
    """Polyline x_0 .. x_N inside a box domain.

    Segment n runs along its tangent t_n and carries the normal
    nu_n = (t_y, -t_x), so that x_{n+1} = x_n + l_n * perp(nu_n). The
    positive-chirality phase lies on the side nu_n points to.
    """

    vertices: np.ndarray
    domain: tuple  # (xmin, xmax, ymin, ymax)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or len(self.vertices) < 2:
            raise ValueError("interface needs at least two vertices")
        if np.any(self.lengths <= 0):
            raise ValueError("interface has a zero-length segment")
        xmin, xmax, ymin, ymax = self.domain
        if not (xmin < xmax and ymin < ymax):
            raise ValueError("empty domain")

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    @property
    def tangents(self) -> np.ndarray:
        return np.diff(self.vertices, axis=0) / self.lengths[:, None]

    @property
    def normals(self) -> np.ndarray:
        t = self.tangents
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def corner_angles(self) -> np.ndarray:
        """Angle in (0, pi] between the two segments meeting at each interior vertex."""
        t = self.tangents
        out = []
        for a, b in zip(t[:-1], t[1:]):
            c = float(np.clip(-a @ b, -1.0, 1.0))
            out.append(math.acos(c))
        return np.array(out)

    def domain_region(self) -> ConvexRegion:
        xmin, xmax, ymin, ymax = self.domain
        return rectangle((0.0, 1.0), xmax - xmin, ymax - ymin, ((xmin + xmax) / 2, (ymin + ymax) / 2))

    def target(self, pts: np.ndarray) -> np.ndarray:
        """+1 on the closed positive side, -1 elsewhere (nearest point on the extended polyline)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v, t, nrm, ell = self.vertices, self.tangents, self.normals, self.lengths
        nseg = len(ell)
        best_d = np.full(len(pts), np.inf)
        side = np.zeros(len(pts))
        for s in range(nseg):
            rel = pts - v[s]
            a = rel @ t[s]
            lo = -np.inf if s == 0 else 0.0
            hi = np.inf if s == nseg - 1 else ell[s]
            ac = np.clip(a, lo, hi)
            foot = v[s] + ac[:, None] * t[s]
            dist = np.linalg.norm(pts - foot, axis=1)
            at_vertex = (ac != a)
            sgn = rel @ nrm[s]
            if nseg > 1:
                # at a shared vertex use the averaged normal of both segments
                for end, other in ((0.0, s - 1), (ell[s], s + 1)):
                    if 0 <= other < nseg:
                        m = at_vertex & (ac == end)
                        corner = v[s] + end * t[s]
                        sgn = np.where(m, (pts - corner) @ (nrm[s] + nrm[other]), sgn)
            better = dist < best_d - 1e-15
            best_d = np.where(better, dist, best_d)
            side = np.where(better, sgn, side)
        return np.where(side >= 0, 1.0, -1.0)

    @classmethod
    def from_json(cls, path) -> "PolygonalInterface":
        with open(path) as fh:
            d = json.load(fh)
        verts = np.asarray(d["vertices"], dtype=float)
        signs = d.get("normal_signs", [1] * (len(verts) - 1))
        if len(signs) != len(verts) - 1:
            raise ValueError("need one normal sign per segment")
        if any(s not in (1, -1) for s in signs) or len(set(signs)) > 1:
            raise ValueError("normal signs must be all +1 or all -1")
        if signs and signs[0] == -1:
            verts = verts[::-1]
        if "domain" in d:
            dom = tuple(float(x) for x in d["domain"])
        else:
            lo, hi = verts.min(axis=0), verts.max(axis=0)
            dom = (lo[0], hi[0], lo[1], hi[1])
        return cls(verts, dom)


def corner_clearance(theta: float, rho: float = 1.0, eps: float = 0.0) -> float:
    """Distance (in units of rho) kept free of cubes on both sides of a corner of angle theta.

    The geometric value 1/2 + cot(theta/2)/2 makes neighbouring cubes touch;
    the extra 4 eps / (rho sin(theta/2)) absorbs the snapping of centres to the
    coarse sublattice. Rounded up to two decimals.
    """
    if not (0 < theta <= math.pi):
        raise ValueError("corner angle must lie in (0, pi]")
    c = 0.5 + 0.5 / math.tan(theta / 2) + 4 * eps / (rho * math.sin(theta / 2))
    return math.ceil(c * 100 - 1e-9) / 100


def nearest_coarse_site(y: np.ndarray, eps: float) -> tuple[int, int]:
    """Nearest point of eps times the label-1 sublattice; ties go to the smallest index."""
    a = BASIS_INV @ (np.asarray(y, float) / eps)
    base = np.floor(a).astype(int)
    best, best_key = None, None
    for d1 in range(-2, 4):
        for d2 in range(-2, 4):
            z = (int(base[0] + d1), int(base[1] + d2))
            if sublattice_of(z) != 1:
                continue
            dist = float(np.linalg.norm(positions(np.array(z), eps) - y))
            key = (round(dist, 12), z)
            if best_key is None or key < best_key:
                best, best_key = z, key
    return best


@dataclass
class Cube:
    segment: int
    index: int
    center: tuple  # lattice index of the centre
    nu: np.ndarray

    def region(self, rho: float, eps: float) -> ConvexRegion:
        return square(self.nu, rho, positions(np.array(self.center), eps))


@dataclass
class PavingPlan:
    rho: float
    eps: float
    clearances: list  # per interior vertex, in units of rho
    counts: list  # number of cubes per segment
    cubes: list


def _squares_overlap(c1: np.ndarray, n1: np.ndarray, c2: np.ndarray, n2: np.ndarray, rho: float) -> bool:
    """Separating-axis test for two open squares of side rho."""
    def corners(c, n):
        p = perp(n)
        return np.array([c + sa * rho / 2 * p + sb * rho / 2 * n for sa in (-1, 1) for sb in (-1, 1)])

    k1, k2 = corners(c1, n1), corners(c2, n2)
    for axis in (n1, perp(n1), n2, perp(n2)):
        a, b = k1 @ axis, k2 @ axis
        if a.max() <= b.min() + 1e-12 * rho or b.max() <= a.min() + 1e-12 * rho:
            return False
    return True


def plan_paving(interface: PolygonalInterface, rho: float, eps: float) -> PavingPlan:
    if not (eps > 0 and 6 * eps < rho):
        raise ValueError("need 0 < 6 eps < rho")
    ell, t, nrm = interface.lengths, interface.tangents, interface.normals
    clear = [corner_clearance(th, rho, eps) for th in interface.corner_angles()]
    nseg = len(ell)
    cubes, counts = [], []
    pitch = rho + 5 * eps
    for s in range(nseg):
        start = clear[s - 1] * rho if s > 0 else 0.0
        end = clear[s] * rho if s < nseg - 1 else 0.0
        avail = ell[s] - start - end
        if avail < 0:
            raise ValueError(f"segment {s} is too short for rho={rho}")
        count = int(math.floor(avail / pitch + 1e-12))
        counts.append(count)
        for m in range(count + 1):
            y = interface.vertices[s] + (start + m * pitch) * t[s]
            z = nearest_coarse_site(y, eps)
            if np.linalg.norm(positions(np.array(z), eps) - y) > 2 * eps + 1e-12:
                raise RuntimeError("no coarse site within 2 eps of a nominal centre")
            cubes.append(Cube(s, m, z, nrm[s]))
    pts = [positions(np.array(c.center), eps) for c in cubes]
    for a in range(len(cubes)):
        for b in range(a + 1, len(cubes)):
            if _squares_overlap(pts[a], cubes[a].nu, pts[b], cubes[b].nu, rho):
                raise ValueError(f"cubes {a} and {b} overlap; decrease rho")
    return PavingPlan(rho, eps, clear, counts, cubes)


def pave_interface(interface: PolygonalInterface, rho: float, eps: float,
                   cell_fields: Mapping[int, SpinField], plan: Optional[PavingPlan] = None) -> SpinField:
    """Cell minimizers pasted into the cubes, ground states elsewhere.

    ``cell_fields[n]`` is a cell solution for the normal of segment n,
    centred at the origin.
    """
    plan = plan or plan_paving(interface, rho, eps)
    tris = triangle_set_in(interface.domain_region(), eps)
    sites = tris.sites()
    x = positions(sites, eps)
    chi = interface.target(x)
    pos = np.array([ground_angle(GroundStateKind.POS, s) for s in sites])
    neg = np.array([ground_angle(GroundStateKind.NEG, s) for s in sites])
    angles = {(int(a), int(b)): float(v) for (a, b), v in zip(sites, np.where(chi > 0, pos, neg))}
    owner: dict = {}
    for n, cube in enumerate(plan.cubes):
        cell = cell_fields.get(cube.segment)
        if cell is None:
            raise ValueError(f"missing cell field for segment {cube.segment}")
        if abs(cell.eps - eps) > 1e-15:
            raise ValueError("cell field spacing differs from eps")
        cx, cy = cube.center
        for (a, b), th in cell.angles.items():
            key = (a + cx, b + cy)
            if key not in angles:
                continue
            if key in owner:
                raise RuntimeError(f"site {key} written by cubes {owner[key]} and {n}")
            owner[key] = n
            angles[key] = th
    return SpinField(eps, angles)


@dataclass
class PavingReport:
    total_energy: float
    cube_energies: list  # (segment, cube index, energy)
    leftover_energy: float
    l1_error: float
    energy_bound: float  # sum over segments of (floor(l/rho) + 1) * cell minimum
    energy_constant: float  # (total - bound) / rho, floored at 0
    l1_constant: float  # l1_error / (rho * total length)


def evaluate_paving(u: SpinField, interface: PolygonalInterface, rho: float, eps: float,
                    cell_minima: Mapping[int, float], cell_tris: Mapping[int, TriangleSet],
                    plan: Optional[PavingPlan] = None) -> PavingReport:
    """Split the energy into cube contributions and the remainder, and measure the chirality error."""
    plan = plan or plan_paving(interface, rho, eps)
    tris = triangle_set_in(interface.domain_region(), eps)
    theta = u.angle_array(tris.ijk)
    e = triangle_energies(theta, eps)
    chi = triangle_chiralities(theta)
    key_of = {(tuple(t[0]), tuple(t[1]), tuple(t[2])): n for n, t in enumerate(tris.ijk.tolist())}
    used = np.zeros(len(tris), dtype=bool)
    cube_e = []
    for cube in plan.cubes:
        shift = np.array(cube.center)
        rows = []
        for t in (cell_tris[cube.segment].ijk + shift).tolist():
            n = key_of.get((tuple(t[0]), tuple(t[1]), tuple(t[2])))
            if n is not None:
                rows.append(n)
        rows = np.array(rows, dtype=np.int64)
        used[rows] = True
        cube_e.append((cube.segment, cube.index, float(np.sum(e[rows])) if len(rows) else 0.0))
    total = float(np.sum(e))
    leftover = float(np.sum(e[~used]))
    target = interface.target(tris.barycenters(eps))
    l1 = float(np.sum(SQRT3 / 4 * eps ** 2 * np.abs(chi - target)))
    ell = interface.lengths
    bound = float(sum((math.floor(l / rho) + 1) * cell_minima[s] for s, l in enumerate(ell)))
    return PavingReport(total, cube_e, leftover, l1, bound, max(0.0, (total - bound) / rho),
                        l1 / (rho * float(ell.sum())))


# ---------------------------------------------------------------------------
# boundary enforcement on the unit cell


class EnforcementError(ValueError):
    pass


@dataclass
class ArmReport:
    name: str
    alpha: int
    direction: tuple
    z_values: list
    winding: int
    steps: int
    drift: float
    sites: int


@dataclass
class EnforceReport:
    strip: StripChoice
    arms: list
    overrides: int  # kept sites whose spin was replaced by an interpolated one
    energy_before: float
    energy_after: float


def _best_alpha(o: np.ndarray) -> tuple[int, tuple]:
    scores = []
    for a in (1, 2, 3):
        e = BASIS @ np.array(DIRECTIONS[a], dtype=float)
        scores.append((-abs(float(e @ o)), a, 1 if e @ o > 0 else -1))
    _, a, s = min(scores)
    return a, direction_vector(a, s)


def _arm(u: SpinField, name: str, o: np.ndarray, sign: int, s_arm, bar, r: float, delta: float,
         eps: float, slack: int) -> tuple[dict, ArmReport]:
    """Interpolate from the chain along <x,o> = r/2 + 3 eps out to the boundary ground state."""
    kind = GroundStateKind.POS if sign > 0 else GroundStateKind.NEG
    alpha, d = _best_alpha(o)
    offset = r / 2 + 3 * eps
    e_d = BASIS @ np.array(DIRECTIONS[alpha], dtype=float)
    # band indices across direction alpha met by the arm region
    bx = s_arm.bounds()
    corners = np.array([[bx[0], bx[2]], [bx[0], bx[3]], [bx[1], bx[2]], [bx[1], bx[3]]])
    rows = [cross(e_d, c) / (SQRT3 / 2 * eps) for c in corners]
    z_lo, z_hi = int(math.floor(min(rows))) - 2, int(math.ceil(max(rows))) + 2
    chain = build_chain(o, offset, alpha, (z_lo, z_hi), eps)
    ts = TriangleSet.from_triangles(chain.triangles)
    inside = s_arm.contains_triangles(ts.positions(eps))
    zs = [z for z, ok in zip(chain.z_values, inside) if ok]
    if not zs:
        raise EnforcementError(f"{name}: no chain triangle inside the arm region")
    z0, z1 = zs[0], zs[-1]
    lifts = chain_lifts(u, chain, range(z0, z1 + 1))
    drift = float(np.abs(lifts - lifts[0]).max())
    need = math.ceil((np.abs(lifts[:, 0]).max() + TWO_PI) / TWO_PI - 1e-12)
    m = max(math.ceil(drift / TWO_PI) + slack, need)
    # first even step whose triangle sits in the band (1 - 7 delta/4)/2 < <x,o> < (1 - 5 delta/4)/2
    # (falls back to the wider window up to (1 - delta)/2 when a double step jumps the band)
    lo = (1 - 7 * delta / 4) / 2
    n_steps = None
    probe = half_slice(chain[z0], d, int(2 / eps))
    for hi in ((1 - 5 * delta / 4) / 2, (1 - delta) / 2):
        for h in range(2, len(probe), 2):
            p = probe[h].positions(eps) @ o
            if (p > lo).all() and (p < hi).all():
                n_steps = h
                break
        if n_steps:
            break
    if not n_steps:
        raise EnforcementError(f"{name}: no admissible number of interpolation steps")
    extra = int(math.ceil(delta / eps)) + 4
    values: dict = {}
    zset = set(zs)
    for z in range(z0, z1 + 1, 2):
        if z not in zset:
            continue
        t0 = chain[z]
        lt = lifts[z - z0]
        plan = InterpolationPlan(t0, d, n_steps, m, LiftedTriple(*lt), sign)
        try:
            plan.validate()
        except ValueError as exc:
            raise EnforcementError(f"{name}, band {z}: {exc}") from None
        seq = half_slice(t0, d, n_steps + extra)
        site_val = {}
        for h, t in enumerate(seq):
            for v, a in zip(t.vertices, interpolation_angles(plan, h)):
                if h == 0:
                    a = u.theta(v)
                elif h >= n_steps:
                    a = ground_angle(kind, v)
                site_val[tuple(v)] = a
        tris = TriangleSet.from_triangles(half_slice_triangles(t0, d, n_steps + extra))
        ok = bar.contains_triangles(tris.positions(eps))
        for t in tris.ijk[ok].tolist():
            for v in t:
                values.setdefault(tuple(v), site_val[tuple(v)])
    rep = ArmReport(name, alpha, d, zs, m, n_steps, drift, len(values))
    return values, rep


def cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def enforce_boundary_report(u: SpinField, nu, delta: float, eps: float,
                            winding_slack: int = 8) -> tuple[SpinField, EnforceReport]:
    """Modify ``u`` near the boundary of the unit cell so that it meets the ground-state data.

    The field is kept on the cross-shaped set around the interface inside the
    selected strip, interpolated to the ground states along half-slices in
    the four arms of the cross, and set to ground states elsewhere.
    """
    if not (0 < delta < 1 / 8):
        raise ValueError("delta must lie in (0, 1/8)")
    if abs(u.eps - eps) > 1e-15:
        raise ValueError("field spacing differs from eps")
    n = unit(nu)
    p = perp(n)
    q_tris = triangle_set_in(square(n, 1.0), eps)
    sites = q_tris.sites()
    try:
        u.angle_array(sites)
    except MissingSiteError as exc:
        raise ValueError(f"field does not cover the unit cell: {exc}") from None
    strip = select_strip(u, n, delta, eps)
    r = strip.r

    vbar = rectangle(n, 1 - 5 * delta, 1.0)
    hgap = (1 - 8 * delta) / 2
    hbar_p = rectangle(n, 1.0, hgap, (1 - 2 * delta) / 4 * n)
    hbar_m = rectangle(n, 1.0, hgap, -(1 - 2 * delta) / 4 * n)
    cross_set = [vbar, hbar_p, hbar_m]

    arms = []
    band = rectangle(n, 1.0, delta)
    for name, o, sign, bar_base, lateral in (
            ("top", n, 1, vbar, False), ("bottom", -n, -1, vbar, False),
            ("right+", p, 1, hbar_p, True), ("left+", -p, 1, hbar_p, True),
            ("right-", p, -1, hbar_m, True), ("left-", -p, -1, hbar_m, True)):
        s_arm = rectangle(o, r, 6 * eps, (r / 2 + 3 * eps) * o)
        if lateral:
            side = rectangle(n, 1.0, 0.5, sign * 0.25 * n)
            s_arm = Difference(s_arm & side, band)
        bar = Difference(bar_base, square(n, r))
        arms.append((name, o, sign, s_arm, bar))

    values: dict = {}
    reports = []
    for name, o, sign, s_arm, bar in arms:
        vals, rep = _arm(u, name, o, sign, s_arm, bar, r, delta, eps, winding_slack)
        for k, v in vals.items():
            values.setdefault(k, v)
        reports.append(rep)

    def cross_sites(size):
        region = Union([c & square(n, size) for c in cross_set])
        return set(map(tuple, triangle_set_in(region, eps).sites().tolist()))

    untouched = cross_sites(r + 6 * eps)
    keep = cross_sites(r + 12 * eps)
    x = positions(sites, eps)
    out = {}
    overrides = 0
    for s, xx in zip(map(tuple, sites.tolist()), x):
        if s in values:
            out[s] = values[s]
            if s in untouched and angle_distance(values[s], u.theta(s)) > 1e-12:
                overrides += 1
        elif s in keep:
            out[s] = u.theta(s)
        else:
            out[s] = ground_angle(GroundStateKind.POS if xx @ n >= 0 else GroundStateKind.NEG, s)
    result = SpinField(eps, out)
    bad = boundary_violations(result, n, eps)
    if bad:
        raise EnforcementError(f"{len(bad)} boundary sites do not carry the ground state")
    before = energy_on(u, q_tris)
    after = energy_on(result, q_tris)
    return result, EnforceReport(strip, reports, overrides, before, after)


def enforce_boundary(u: SpinField, nu, delta: float, eps: float, winding_slack: int = 8) -> SpinField:
    return enforce_boundary_report(u, nu, delta, eps, winding_slack)[0]


def boundary_violations(u: SpinField, nu, eps: float, rho: float = 1.0) -> list:
    """Boundary sites of the field whose angle is not exactly the required ground-state angle."""
    bad = []
    for sign, kind in ((1, GroundStateKind.POS), (-1, GroundStateKind.NEG)):
        for s in discrete_boundary(nu, rho, eps, sign):
            if s in u and u.theta(s) != ground_angle(kind, s):
                bad.append(tuple(s))
    return bad
