"""Trigonometric bounds, one-dimensional interpolation, strip selection and winding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize as sopt

from .lattice import Chain, Triangle, TriangleSet, half_slice, half_slice_triangles, triangle_set_in
from .regions import Difference, Union, rectangle, square, unit
from .spin import TRIANGLE_AREA, TWO_PI, SpinField, energy_on, triangle_chiralities, triangle_energies

THREE_SQRT3_HALF = 3 * math.sqrt(3) / 2


def f_sum(t1, t2):
    """sin t1 + sin(t2 - t1) - sin t2."""
    return np.sin(t1) + np.sin(t2 - t1) - np.sin(t2)


def g_sum(t1, t2):
    """cos t1 + cos(t2 - t1) + cos t2."""
    return np.cos(t1) + np.cos(t2 - t1) + np.cos(t2)


def _grid(n: int) -> np.ndarray:
    return np.arange(n) * (TWO_PI / n)


def _refine(fun, x0, bounds=None):
    res = sopt.minimize(fun, np.asarray(x0, float), method="L-BFGS-B", bounds=bounds,
                        options={"ftol": 1e-15, "gtol": 1e-13, "maxiter": 1000})
    return res.x, float(res.fun)


@dataclass
class ExtremaReport:
    f_max: float
    f_max_at: tuple
    f_min: float
    f_min_at: tuple
    g_min: float
    g_min_at: tuple
    g_at_f_extrema: tuple  # g evaluated at the two f extremizers
    f_at_g_min: float
    sign_structure_ok: bool
    passed: bool


def verify_fg_extrema(grid_n: int = 720, tol: float = 1e-9) -> ExtremaReport:
    """Grid scan of the torus followed by local refinement of the extrema."""
    t = _grid(grid_n)
    a, b = np.meshgrid(t, t, indexing="ij")
    fv, gv = f_sum(a, b), g_sum(a, b)

    def start(flat_idx):
        i, j = np.unravel_index(flat_idx, fv.shape)
        return (t[i], t[j])

    xmax, vmax = _refine(lambda x: -f_sum(x[0], x[1]), start(np.argmax(fv)))
    xmin, vmin = _refine(lambda x: f_sum(x[0], x[1]), start(np.argmin(fv)))
    xg, vg = _refine(lambda x: g_sum(x[0], x[1]), start(np.argmin(gv)))
    fmax, fmin, gmin = -vmax, vmin, vg
    xmax, xmin, xg = (tuple(float(v) for v in np.mod(x, TWO_PI)) for x in (xmax, xmin, xg))
    g_at_f = (float(g_sum(*xmax)), float(g_sum(*xmin)))
    f_at_g = float(f_sum(*xg))
    # f(., t2) > 0 on (0, t2) and < 0 on (t2, 2 pi) for t2 in (0, 2 pi)
    sign_ok = True
    for t2 in np.linspace(0.1, TWO_PI - 0.1, 37):
        left = np.linspace(0, t2, 50)[1:-1]
        right = np.linspace(t2, TWO_PI, 50)[1:-1]
        sign_ok &= bool((f_sum(left, t2) > 0).all() and (f_sum(right, t2) < 0).all())
    passed = (abs(fmax - THREE_SQRT3_HALF) <= tol and abs(fmin + THREE_SQRT3_HALF) <= tol
              and abs(gmin + 1.5) <= tol and all(abs(v + 1.5) <= tol for v in g_at_f)
              and abs(abs(f_at_g) - THREE_SQRT3_HALF) <= tol and sign_ok)
    return ExtremaReport(fmax, xmax, fmin, xmin, gmin, xg, g_at_f, f_at_g, sign_ok, passed)


def opposite_pair_objective(t1, t2, t3):
    """Energy (eps = 1) of two adjacent triangles sharing the spins at angles 0 and t2."""
    return 6 + 2 * (g_sum(t1, t2) + g_sum(t3, t2))


@dataclass
class PairMinimum:
    value: float
    argmin: tuple  # (t1, t2, t3) on the reported branch
    other_branch: tuple
    other_value: float


def min_opposite_pair(grid_n: int = 1440) -> PairMinimum:
    """Minimum over 0 <= t1 <= t2 <= t3 < 2 pi.

    Two mirror-image minimizers exist; the one with t2 > pi is reported.
    For fixed t2 the problem splits into independent scans over t1 and t3.
    """
    t = np.arange(grid_n + 1) * (TWO_PI / grid_n)
    t2 = t[:-1]
    low = np.where(t[None, :] <= t2[:, None] + 1e-15, g_sum(t[None, :], t2[:, None]), np.inf)
    high = np.where((t[None, :] >= t2[:, None] - 1e-15) & (t[None, :] < TWO_PI),
                    g_sum(t[None, :], t2[:, None]), np.inf)
    best1 = low.min(axis=1)
    best3 = high.min(axis=1)
    total = 6 + 2 * (best1 + best3)
    branches = []
    for mask in (t2 > math.pi, t2 < math.pi):
        idx = np.flatnonzero(mask)
        n = idx[np.argmin(total[idx])]
        x0 = (t[np.argmin(low[n])] / max(t2[n], 1e-12), t2[n],
              (t[np.argmin(high[n])] - t2[n]) / max(TWO_PI - t2[n], 1e-12))

        # s in [0,1] places t1 in [0, t2]; w in [0,1] places t3 in [t2, 2 pi]
        def obj(x):
            s, b, w = x
            return float(opposite_pair_objective(s * b, b, b + w * (TWO_PI - b)))

        x, v = _refine(obj, np.clip(x0, 0, [1, TWO_PI, 1]), bounds=[(0, 1), (0, TWO_PI), (0, 1)])
        s, b, w = x
        branches.append(((s * b, b, b + w * (TWO_PI - b)), v))
    (arg_hi, v_hi), (arg_lo, v_lo) = branches
    if v_lo < v_hi - 1e-9:
        arg_hi, v_hi, arg_lo, v_lo = arg_lo, v_lo, arg_hi, v_hi
    return PairMinimum(v_hi, tuple(map(float, arg_hi)), tuple(map(float, arg_lo)), v_lo)


def estimate_c_delta(delta: float, grid_n: int = 600) -> float:
    """Least single-triangle energy (eps = 1) among states with |chirality| < 1 - delta."""
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    lim = 1 - delta
    t = _grid(grid_n)
    a, b = np.meshgrid(t, t, indexing="ij")
    theta = np.stack([np.zeros(a.size), a.ravel(), b.ravel()], axis=1)
    chi = triangle_chiralities(theta)
    en = triangle_energies(theta, 1.0)
    feasible = np.abs(chi) < lim - 1e-12
    if not feasible.any():
        raise ValueError("no feasible grid point; increase grid_n")
    n = np.flatnonzero(feasible)[np.argmin(en[feasible])]
    best = float(en[n])

    def e(x):
        return float(triangle_energies(np.array([[0.0, x[0], x[1]]]), 1.0)[0])

    def c(x):
        return float(triangle_chiralities(np.array([[0.0, x[0], x[1]]]))[0])

    res = sopt.minimize(e, theta[n, 1:], method="SLSQP",
                        constraints=[{"type": "ineq", "fun": lambda x: lim - c(x)},
                                     {"type": "ineq", "fun": lambda x: c(x) + lim}],
                        options={"ftol": 1e-15, "maxiter": 500})
    if abs(c(res.x)) <= lim + 1e-12:
        best = min(best, float(res.fun))
    return best


# ---------------------------------------------------------------------------
# one-dimensional interpolation along a half-slice


class InterpolationAssumptionError(ValueError):
    pass


def lift_into(raw: float, ref: float) -> float:
    """Representative of ``raw`` modulo 2 pi in [ref - pi, ref + pi)."""
    lo = ref - math.pi
    return lo + (raw - lo) % TWO_PI


@dataclass(frozen=True)
class LiftedTriple:
    theta_i: float
    theta_j: float
    theta_k: float

    @classmethod
    def from_field(cls, u: SpinField, t: Triangle, theta_i: Optional[float] = None) -> "LiftedTriple":
        ti = u.theta(t.i) % TWO_PI if theta_i is None else theta_i
        tj = lift_into(u.theta(t.j), ti)
        tk = lift_into(u.theta(t.k), tj)
        return cls(ti, tj, tk)

    def check_windows(self) -> None:
        if not (self.theta_i - math.pi <= self.theta_j < self.theta_i + math.pi):
            raise InterpolationAssumptionError("lift window violated: theta_j not in [theta_i - pi, theta_i + pi)")
        if not (self.theta_j - math.pi <= self.theta_k < self.theta_j + math.pi):
            raise InterpolationAssumptionError("lift window violated: theta_k not in [theta_j - pi, theta_j + pi)")


@dataclass(frozen=True)
class InterpolationPlan:
    t0: Triangle
    direction: tuple  # lattice direction of travel (index coordinates)
    n_steps: int
    winding: int  # m
    lift: LiftedTriple
    chirality: int = 1  # +1 interpolates to the positive ground state, -1 to the negative one

    def targets(self) -> tuple[float, float, float]:
        s = self.chirality
        base = TWO_PI * self.winding
        return (base, base + s * TWO_PI / 3, base + s * 2 * TWO_PI / 3)

    def validate(self) -> None:
        if self.n_steps < 1:
            raise InterpolationAssumptionError("need at least one interpolation step")
        if self.chirality not in (1, -1):
            raise ValueError("chirality must be +1 or -1")
        L = self.lift
        L.check_windows()
        step = self.chirality * TWO_PI / 3
        if abs(L.theta_j - L.theta_i - step) > 0.25:
            raise InterpolationAssumptionError(
                f"|theta_j - theta_i - {step:+.4f}| <= 1/4 violated ({L.theta_j - L.theta_i:.4f})")
        if abs(L.theta_k - L.theta_j - step) > 0.25:
            raise InterpolationAssumptionError(
                f"|theta_k - theta_j - {step:+.4f}| <= 1/4 violated ({L.theta_k - L.theta_j:.4f})")
        if TWO_PI * self.winding < abs(L.theta_i) + TWO_PI:
            raise InterpolationAssumptionError(
                f"2 pi m >= |theta_i| + 2 pi violated (m={self.winding}, theta_i={L.theta_i:.4f})")


def interpolation_angles(plan: InterpolationPlan, h: int) -> tuple[float, float, float]:
    """Angles on the vertices i_h, j_h, k_h; exact ground-state representatives once h >= N."""
    start = (plan.lift.theta_i, plan.lift.theta_j, plan.lift.theta_k)
    end = plan.targets()
    n = plan.n_steps
    if h >= n:
        return end
    w = h / n
    return tuple((1 - w) * a + w * b for a, b in zip(start, end))


def interpolate_1d(plan: InterpolationPlan, eps: float, extra: int = 2) -> SpinField:
    """Field on the vertices of T_0 .. T_{N+extra} of the half-slice."""
    plan.validate()
    tris = half_slice(plan.t0, plan.direction, plan.n_steps + extra)
    angles = {}
    for h, t in enumerate(tris):
        for v, a in zip(t.vertices, interpolation_angles(plan, h)):
            angles[tuple(v)] = a
    return SpinField(eps, angles)


def half_slice_energy(u: SpinField, t0: Triangle, direction, count: int) -> float:
    tris = TriangleSet.from_triangles(half_slice_triangles(t0, direction, count))
    return energy_on(u, tris)


def interpolation_energy(plan: InterpolationPlan, eps: float) -> float:
    u = interpolate_1d(plan, eps)
    return half_slice_energy(u, plan.t0, plan.direction, plan.n_steps + 1)


def start_energy(plan: InterpolationPlan, eps: float) -> float:
    L = plan.lift
    return float(triangle_energies(np.array([[L.theta_i, L.theta_j, L.theta_k]]), eps)[0])


@dataclass
class ConstantFit:
    constant: float
    ratios: list
    per_steps: dict  # N -> largest ratio at that N


def fit_interpolation_constant(plans: Sequence[InterpolationPlan], eps: float) -> ConstantFit:
    """Smallest C with F(interpolation) <= C (N F(T_0) + eps m^2 / N) on all plans."""
    ratios = []
    per = {}
    for p in plans:
        lhs = interpolation_energy(p, eps)
        rhs = p.n_steps * start_energy(p, eps) + eps * p.winding ** 2 / p.n_steps
        r = lhs / rhs
        ratios.append(r)
        per[p.n_steps] = max(per.get(p.n_steps, 0.0), r)
    if not ratios:
        raise ValueError("no plans given")
    return ConstantFit(max(ratios), ratios, per)


# ---------------------------------------------------------------------------
# strip selection


def strip_region(nu, r: float, eps: float, delta: float):
    """Square annulus of width 12 eps outside Q_r, minus the closed interface band."""
    hole = Union([square(nu, r), rectangle(nu, 1.0, delta)])
    return Difference(square(nu, r + 12 * eps), hole)


@dataclass
class StripChoice:
    index: int
    r: float
    g_value: float
    averaging_bound: float
    g_values: list


def _energy_and_mismatch(u: SpinField, region, nu) -> tuple[float, float]:
    """Energy of the triangles in ``region`` and their L1 chirality distance to the sharp target."""
    tris = triangle_set_in(region, u.eps)
    if len(tris) == 0:
        return 0.0, 0.0
    theta = u.angle_array(tris.ijk)
    side = np.where(tris.barycenters(u.eps) @ unit(nu) >= 0, 1.0, -1.0)
    mismatch = TRIANGLE_AREA * u.eps ** 2 * np.abs(triangle_chiralities(theta) - side)
    return float(np.sum(triangle_energies(theta, u.eps))), float(np.sum(mismatch))


def select_strip(u: SpinField, nu, delta: float, eps: float) -> StripChoice:
    """Strip with the least energy plus chirality mismatch among the admissible radii."""
    if not (0 < delta < 1 / 8):
        raise ValueError("delta must lie in (0, 1/8)")
    count = int(math.floor(delta / (12 * eps) + 1e-12))
    if count < 1:
        raise ValueError(f"no admissible strip: floor(delta/(12 eps)) = 0 for delta={delta}, eps={eps}")
    g = []
    radii = []
    for m in range(count):
        r = 1 - 3 * delta + 12 * m * eps
        g.append(sum(_energy_and_mismatch(u, strip_region(nu, r, eps, delta), nu)))
        radii.append(r)
    best = int(np.argmin(g))
    outer_energy, _ = _energy_and_mismatch(u, Difference(square(nu, 1.0), rectangle(nu, 1.0, delta)), nu)
    _, mismatch = _energy_and_mismatch(u, square(nu, 1.0), nu)
    bound = (outer_energy + mismatch) / count
    return StripChoice(best, radii[best], g[best], bound, g)


# ---------------------------------------------------------------------------
# winding along a chain


def chain_lifts(u: SpinField, chain: Chain, z_values: Optional[Sequence[int]] = None) -> np.ndarray:
    """Recursive lifts of (theta_i, theta_j, theta_k) along the chain; shape (n, 3)."""
    zs = list(chain.z_values if z_values is None else z_values)
    out = np.zeros((len(zs), 3))
    first = LiftedTriple.from_field(u, chain[zs[0]])
    out[0] = (first.theta_i, first.theta_j, first.theta_k)
    for n in range(1, len(zs)):
        t = chain[zs[n]]
        for c, v in enumerate(t.vertices):
            out[n, c] = lift_into(u.theta(v), out[n - 1, c])
    return out


def winding_drift(u: SpinField, chain: Chain, z_values: Optional[Sequence[int]] = None) -> float:
    """Largest excursion of any of the three lifted angle sequences from its start."""
    lifts = chain_lifts(u, chain, z_values)
    return float(np.abs(lifts - lifts[0]).max())
