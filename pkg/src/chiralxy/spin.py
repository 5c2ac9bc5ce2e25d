"""Spin fields on the lattice, triangle energy and chirality."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from .lattice import (LatticeIndex, Triangle, TriangleSet, neighbors, sublattice_labels,
                      sublattice_of, triangle_set_in)
from .regions import Region, unit

TWO_PI = 2 * math.pi
CHI_SCALE = 2.0 / (3.0 * math.sqrt(3.0))
TRIANGLE_AREA = math.sqrt(3.0) / 4


class GroundStateKind(Enum):
    POS = "pos"
    NEG = "neg"


GROUND_ANGLES = {
    GroundStateKind.POS: (0.0, TWO_PI / 3, 2 * TWO_PI / 3),
    GroundStateKind.NEG: (0.0, 2 * TWO_PI / 3, TWO_PI / 3),
}


class MissingSiteError(KeyError):
    pass


def ground_angle(kind: GroundStateKind, idx) -> float:
    return GROUND_ANGLES[GroundStateKind(kind)][sublattice_of(idx) - 1]


def ground_angles(kind: GroundStateKind, z: np.ndarray) -> np.ndarray:
    table = np.array(GROUND_ANGLES[GroundStateKind(kind)])
    return table[sublattice_labels(z) - 1]


@dataclass(frozen=True)
class SpinField:
    """Angles (unbounded lifts) on a finite set of sites. Treat as immutable."""

    eps: float
    angles: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def __contains__(self, idx) -> bool:
        return tuple(idx) in self.angles

    def __len__(self) -> int:
        return len(self.angles)

    @property
    def domain(self) -> list[LatticeIndex]:
        return [LatticeIndex(*k) for k in self.angles]

    def theta(self, idx) -> float:
        try:
            return self.angles[tuple(idx)]
        except KeyError:
            raise MissingSiteError(f"site {tuple(idx)} not in field domain") from None

    def vector(self, idx) -> np.ndarray:
        t = self.theta(idx)
        return np.array([math.cos(t), math.sin(t)])

    def angle_array(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        flat = z.reshape(-1, 2)
        get = self.angles.get
        vals = [get((a, b)) for a, b in flat.astype(np.int64).tolist()]
        if any(v is None for v in vals):
            missing = next(tuple(map(int, p)) for p, v in zip(flat, vals) if v is None)
            raise MissingSiteError(f"site {missing} not in field domain")
        return np.array(vals, dtype=float).reshape(z.shape[:-1])

    def updated(self, values: Mapping[tuple, float]) -> "SpinField":
        a = dict(self.angles)
        a.update({tuple(k): float(v) for k, v in values.items()})
        return SpinField(self.eps, a)

    def restricted(self, sites: Iterable) -> "SpinField":
        return SpinField(self.eps, {tuple(s): self.angles[tuple(s)] for s in sites})

    def rotated(self, c: float) -> "SpinField":
        return SpinField(self.eps, {k: v + c for k, v in self.angles.items()})

    def same_spins(self, other: "SpinField", tol: float = 1e-12) -> bool:
        if set(self.angles) != set(other.angles):
            return False
        return all(angle_distance(v, other.angles[k]) <= tol for k, v in self.angles.items())


def angle_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle."""
    d = (a - b) % TWO_PI
    return min(d, TWO_PI - d)


def ground_state(kind: GroundStateKind, eps: float, domain: Iterable) -> SpinField:
    kind = GroundStateKind(kind)
    return SpinField(eps, {tuple(map(int, s)): ground_angle(kind, s) for s in domain})


# ---------------------------------------------------------------------------
# per-triangle quantities


def energy_triangle(u: SpinField, t: Triangle) -> float:
    """eps * |u_i + u_j + u_k|^2 from the spin vectors."""
    s = u.vector(t.i) + u.vector(t.j) + u.vector(t.k)
    return u.eps * float(s @ s)


def energy_triangle_lift(u: SpinField, t: Triangle) -> float:
    """Same energy written through angle differences."""
    a, b, c = u.theta(t.i), u.theta(t.j), u.theta(t.k)
    return u.eps * (3 + 2 * math.cos(b - a) + 2 * math.cos(c - b) + 2 * math.cos(a - c))


def chirality_triangle(u: SpinField, t: Triangle) -> float:
    """Scaled sum of cross products u_i x u_j + u_j x u_k + u_k x u_i."""
    vi, vj, vk = u.vector(t.i), u.vector(t.j), u.vector(t.k)

    def cr(a, b):
        return a[0] * b[1] - a[1] * b[0]

    return CHI_SCALE * (cr(vi, vj) + cr(vj, vk) + cr(vk, vi))


def chirality_triangle_lift(u: SpinField, t: Triangle) -> float:
    a, b, c = u.theta(t.i), u.theta(t.j), u.theta(t.k)
    return CHI_SCALE * (math.sin(b - a) + math.sin(c - b) + math.sin(a - c))


def triangle_energies(theta: np.ndarray, eps: float) -> np.ndarray:
    """Vectorized energies for angles of shape (n, 3) ordered i, j, k."""
    a, b, c = theta[:, 0], theta[:, 1], theta[:, 2]
    return eps * (3 + 2 * (np.cos(b - a) + np.cos(c - b) + np.cos(a - c)))


def triangle_chiralities(theta: np.ndarray) -> np.ndarray:
    a, b, c = theta[:, 0], theta[:, 1], theta[:, 2]
    return CHI_SCALE * (np.sin(b - a) + np.sin(c - b) + np.sin(a - c))


# ---------------------------------------------------------------------------
# region quantities


def energy_on(u: SpinField, tris: TriangleSet) -> float:
    if len(tris) == 0:
        return 0.0
    return float(np.sum(triangle_energies(u.angle_array(tris.ijk), u.eps)))


def energy_region(u: SpinField, region: Region) -> float:
    """Total energy of triangles contained in ``region`` (pairwise summation)."""
    return energy_on(u, triangle_set_in(region, u.eps))


@dataclass
class ChiralityField:
    eps: float
    values: dict  # Triangle -> chirality

    def __len__(self):
        return len(self.values)


def chirality_field(u: SpinField, region: Region) -> ChiralityField:
    tris = triangle_set_in(region, u.eps)
    chi = triangle_chiralities(u.angle_array(tris.ijk)) if len(tris) else np.zeros(0)
    return ChiralityField(u.eps, dict(zip(tris.to_list(), chi.tolist())))


def sign_threshold(chi: float) -> int:
    """+1 for strictly positive chirality, -1 otherwise (zero maps to -1)."""
    return 1 if chi > 0 else -1


def target_chirality(nu) -> Callable[[np.ndarray], float]:
    """+1 on the closed half-plane <x,nu> >= 0, -1 elsewhere."""
    n = unit(nu)
    return lambda x: 1.0 if float(np.asarray(x) @ n) >= 0 else -1.0


def l1_chirality_distance(chi: ChiralityField, target: Callable[[np.ndarray], float],
                          region: Optional[Region] = None) -> float:
    """Sum over triangles of area * |chi - target(barycenter)|."""
    tris = list(chi.values)
    if not tris:
        return 0.0
    ts = TriangleSet.from_triangles(tris)
    bary = ts.barycenters(chi.eps)
    vals = np.array([chi.values[t] for t in tris])
    if region is not None:
        keep = region.contains_triangles(ts.positions(chi.eps))
        bary, vals = bary[keep], vals[keep]
    tgt = np.array([target(b) for b in bary])
    area = TRIANGLE_AREA * chi.eps ** 2
    return float(np.sum(area * np.abs(vals - tgt)))


@dataclass
class InterfaceDiagnostics:
    count: int  # positive triangles with a non-positive neighbour
    perimeter_bound: float  # 3 eps * count
    pair_energy_min: float  # min energy over adjacent opposite-sign pairs
    pair_energy_sum: float  # sum over such triangles of their opposite-pair energies
    total_energy: float


def interface_diagnostics(u: SpinField, region: Region) -> InterfaceDiagnostics:
    tris = triangle_set_in(region, u.eps)
    tl = tris.to_list()
    theta = u.angle_array(tris.ijk) if len(tris) else np.zeros((0, 3))
    chi = dict(zip(tl, triangle_chiralities(theta).tolist()))
    en = dict(zip(tl, triangle_energies(theta, u.eps).tolist()))
    count = 0
    pair_min = math.inf
    pair_sum = 0.0
    for t in tl:
        if chi[t] <= 0:
            continue
        opp = [s for s in neighbors(t) if s in chi and chi[s] <= 0]
        if opp:
            count += 1
            for s in opp:
                e = en[t] + en[s]
                pair_min = min(pair_min, e)
                pair_sum += e
    total = float(np.sum(list(en.values()))) if en else 0.0
    return InterfaceDiagnostics(count, 3 * u.eps * count, pair_min, pair_sum, total)
