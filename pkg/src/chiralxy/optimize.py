"""Cell problem: minimal energy of a square cell with chiral boundary data."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize as sopt

from .lattice import TriangleSet, discrete_boundary, positions, triangle_set_in, EmptyBoundaryError
from .regions import direction, rectangle, square, unit
from .spin import (TWO_PI, GroundStateKind, SpinField, angle_distance, ground_angles,
                   triangle_chiralities, triangle_energies)

log = logging.getLogger(__name__)


@dataclass
class CellProblem:
    nu: np.ndarray
    rho: float
    eps: float
    tris: TriangleSet  # triangles contained in the open square
    sites: np.ndarray  # (n, 2) integer indices, sorted
    tri_sites: np.ndarray  # (m, 3) positions into ``sites``
    pinned: np.ndarray  # (n,) +1 / -1 for the two boundary pieces, 0 for free sites
    fixed: np.ndarray  # (n,) boundary angles (zero at free sites)

    @property
    def free(self) -> np.ndarray:
        return self.pinned == 0

    @property
    def n_free(self) -> int:
        return int(self.free.sum())

    def full_angles(self, x_free: np.ndarray) -> np.ndarray:
        th = self.fixed.copy()
        th[self.free] = x_free
        return th

    def to_field(self, theta: np.ndarray) -> SpinField:
        return SpinField(self.eps, {(int(a), int(b)): float(t) for (a, b), t in zip(self.sites, theta)})

    def ansatz(self) -> np.ndarray:
        """Sharp interface: positive ground state on <x,nu> >= 0, negative below."""
        x = positions(self.sites, self.eps)
        pos = ground_angles(GroundStateKind.POS, self.sites)
        neg = ground_angles(GroundStateKind.NEG, self.sites)
        return np.where(x @ self.nu >= 0, pos, neg)


def assemble_cell(nu, rho: float, eps: float) -> CellProblem:
    """Triangles inside Q_rho with ground states pinned near the top and bottom boundary."""
    n = unit(nu)
    if not (eps > 0 and 6 * eps < rho):
        raise ValueError(f"need 0 < 6*eps < rho, got eps={eps}, rho={rho}")
    tris = triangle_set_in(square(n, rho), eps)
    if len(tris) == 0:
        raise ValueError("no triangles in the cell; decrease eps")
    try:
        top = discrete_boundary(n, rho, eps, 1)
        bottom = discrete_boundary(n, rho, eps, -1)
    except EmptyBoundaryError as exc:
        raise ValueError(f"{exc}; use a smaller eps") from None
    sites = tris.sites()
    lookup = {(int(a), int(b)): p for p, (a, b) in enumerate(sites)}
    tri_sites = np.array([[lookup[(int(a), int(b))] for a, b in t] for t in tris.ijk], dtype=np.int64)
    keys = [(int(a), int(b)) for a, b in sites]
    pinned = np.array([1 if k in top else (-1 if k in bottom else 0) for k in keys], dtype=np.int64)
    if not (pinned == 1).any() or not (pinned == -1).any():
        raise ValueError("boundary data does not reach the cell; use a smaller eps")
    pos = ground_angles(GroundStateKind.POS, sites)
    neg = ground_angles(GroundStateKind.NEG, sites)
    fixed = np.where(pinned == 1, pos, np.where(pinned == -1, neg, 0.0))
    return CellProblem(n, float(rho), float(eps), tris, sites, tri_sites, pinned, fixed)


def problem_from_triangles(tris: TriangleSet, eps: float, nu=(0.0, 1.0), rho: float = 1.0) -> CellProblem:
    """Problem on an arbitrary triangle set with every site free."""
    if len(tris) == 0:
        raise ValueError("empty triangle set")
    sites = tris.sites()
    lookup = {(int(a), int(b)): p for p, (a, b) in enumerate(sites)}
    tri_sites = np.array([[lookup[(int(a), int(b))] for a, b in t] for t in tris.ijk], dtype=np.int64)
    n = len(sites)
    return CellProblem(unit(nu), float(rho), float(eps), tris, sites, tri_sites,
                       np.zeros(n, dtype=np.int64), np.zeros(n))


def energy_and_gradient(problem: CellProblem, theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Energy and gradient with respect to all site angles."""
    eps = problem.eps
    t = theta[problem.tri_sites]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    energy = float(np.sum(eps * (3 + 2 * (np.cos(b - a) + np.cos(c - b) + np.cos(a - c)))))
    s_ij, s_jk, s_ki = np.sin(a - b), np.sin(b - c), np.sin(c - a)
    n = len(theta)
    g = (np.bincount(problem.tri_sites[:, 0], -2 * eps * (s_ij - s_ki), minlength=n)
         + np.bincount(problem.tri_sites[:, 1], -2 * eps * (s_jk - s_ij), minlength=n)
         + np.bincount(problem.tri_sites[:, 2], -2 * eps * (s_ki - s_jk), minlength=n))
    return energy, g


def hessian_free(problem: CellProblem, theta: np.ndarray) -> sp.csr_matrix:
    """Sparse Hessian restricted to the free sites."""
    free = problem.free
    index = -np.ones(len(theta), dtype=np.int64)
    index[free] = np.arange(int(free.sum()))
    ts = problem.tri_sites
    rows, cols, vals = [], [], []
    for p, q in ((0, 1), (1, 2), (2, 0)):
        sa, sb = ts[:, p], ts[:, q]
        w = 2 * problem.eps * np.cos(theta[sa] - theta[sb])
        fa, fb = index[sa], index[sb]
        for x, y in ((fa, fb), (fb, fa)):
            m = x >= 0
            rows.append(x[m]); cols.append(x[m]); vals.append(-w[m])
            m2 = m & (y >= 0)
            rows.append(x[m2]); cols.append(y[m2]); vals.append(w[m2])
    nf = int(free.sum())
    h = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nf, nf))
    return h.tocsr()


@dataclass
class SolverConfig:
    max_iterations: int = 200_000
    grad_tolerance: Optional[float] = None  # default 1e-10 * eps * (number of free sites)
    restarts: int = 8
    perturbation_sigma: float = 0.3
    rng_seed: int = 0
    workers: int = 1
    basin_hops: int = 40  # perturb-and-descend rounds applied to every restart
    hop_sigmas: tuple = (0.3, 0.6, 1.0)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {k: d[k] for k in ("max_iterations", "grad_tolerance", "restarts",
                                   "perturbation_sigma", "rng_seed", "workers", "basin_hops")
                 if k in d}
        cfg = cls(**known)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.max_iterations < 1 or self.restarts < 1 or self.workers < 1:
            raise ValueError("iterations, restarts and workers must be positive")
        if self.basin_hops < 0:
            raise ValueError("basin_hops must be non-negative")
        if self.grad_tolerance is not None and not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if self.perturbation_sigma < 0:
            raise ValueError("perturbation_sigma must be non-negative")


@dataclass
class RunResult:
    index: int
    energy: float
    theta: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool


@dataclass
class SolveResult:
    min_energy: float
    field: SpinField
    grad_norm: float
    iterations: int
    restart_index: int
    converged: bool
    restart_energies: list
    near_degenerate: list  # restarts with energy within 1e-6 of the best but a different state
    problem: CellProblem = field(repr=False)


def starting_point(problem: CellProblem, index: int, restarts: int, sigma: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Restart 0 is the sharp-interface ansatz, 1..restarts-1 perturb it, ``restarts`` is uniform."""
    x = problem.ansatz()[problem.free]
    if index == 0:
        return x
    if index >= restarts:
        return rng.uniform(0.0, TWO_PI, size=x.shape)
    return x + sigma * rng.standard_normal(x.shape)


def _newton_polish(problem: CellProblem, theta: np.ndarray, tol: float, max_steps: int = 30):
    free = problem.free
    e, g = energy_and_gradient(problem, theta)
    gn = float(np.linalg.norm(g[free]))
    steps = 0
    while gn > tol and steps < max_steps:
        h = hessian_free(problem, theta)
        try:
            d = spla.spsolve(h.tocsc(), -g[free])
        except Exception:
            break
        if not np.all(np.isfinite(d)) or d @ g[free] >= 0:
            break
        accepted = False
        step = 1.0
        for _ in range(30):
            trial = theta.copy()
            trial[free] += step * d
            e2, g2 = energy_and_gradient(problem, trial)
            gn2 = float(np.linalg.norm(g2[free]))
            if e2 <= e + 1e-4 * step * (d @ g[free]) or (gn2 < gn and e2 <= e + 1e-13 * max(1.0, abs(e))):
                accepted = True
                break
            step /= 2
        steps += 1
        if not accepted:
            break
        theta, e, g, gn = trial, e2, g2, gn2
    return theta, e, gn, steps


def _descend(problem: CellProblem, x0: np.ndarray, cfg: SolverConfig, gtol: float):
    free = problem.free
    base = problem.fixed.copy()

    def fun(x):
        base[free] = x
        e, g = energy_and_gradient(problem, base)
        return e, g[free]

    res = sopt.minimize(fun, x0, jac=True, method="L-BFGS-B",
                        options={"maxiter": cfg.max_iterations, "maxfun": 2 * cfg.max_iterations,
                                 "gtol": gtol, "ftol": 1e-16, "maxcor": 20})
    return res.x, float(res.fun), int(res.nit)


def _run(problem: CellProblem, cfg: SolverConfig, index: int, tol: float) -> RunResult:
    rng = np.random.default_rng([cfg.rng_seed, index])
    x0 = starting_point(problem, index, cfg.restarts, cfg.perturbation_sigma, rng)
    gtol = tol / max(1.0, math.sqrt(len(x0))) / 10
    x, e, nit = _descend(problem, x0, cfg, gtol)
    for hop in range(cfg.basin_hops):
        sigma = cfg.hop_sigmas[hop % len(cfg.hop_sigmas)]
        y, f, n = _descend(problem, x + sigma * rng.standard_normal(x.shape), cfg, gtol)
        nit += n
        if f < e - 1e-12 * max(1.0, abs(e)):
            x, e = y, f
    theta = problem.full_angles(x)
    theta, e, gn, steps = _newton_polish(problem, theta, tol / 10)
    return RunResult(index, e, theta, gn, nit + steps, gn <= tol)


def default_tolerance(problem: CellProblem, cfg: SolverConfig) -> float:
    if cfg.grad_tolerance is not None:
        return cfg.grad_tolerance
    return 1e-10 * problem.eps * max(problem.n_free, 1)


def minimize(problem: CellProblem, config: Optional[SolverConfig] = None) -> SolveResult:
    """Multistart quasi-Newton descent with basin hopping and a Newton polish.

    Every restart draws from its own generator seeded by (rng_seed, index), so
    the outcome does not depend on the number of worker threads.
    """
    cfg = config or SolverConfig()
    cfg.validate()
    tol = default_tolerance(problem, cfg)
    indices = list(range(cfg.restarts + 1))
    if problem.n_free == 0:
        indices = [0]
    if cfg.workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(lambda i: _run(problem, cfg, i, tol), indices))
    else:
        runs = [_run(problem, cfg, i, tol) for i in indices]
    energies = [r.energy for r in runs]
    best = runs[int(np.argmin(energies))]  # first index wins exact ties
    near = []
    for r in runs:
        if r is best or abs(r.energy - best.energy) > 1e-6:
            continue
        diff = max(angle_distance(a, b) for a, b in zip(r.theta, best.theta))
        if diff > 1e-4:
            near.append(r.index)
    if near:
        log.info("distinct minima within 1e-6 of the best energy at restarts %s", near)
    if not best.converged:
        log.warning("best restart %d stopped with gradient norm %.3g > %.3g", best.index, best.grad_norm, tol)
    return SolveResult(best.energy, problem.to_field(best.theta), best.grad_norm, best.iterations,
                       best.index, best.converged, energies, near, problem)


def solve_cell(nu, rho: float, eps: float, config: Optional[SolverConfig] = None) -> SolveResult:
    return minimize(assemble_cell(nu, rho, eps), config)


# ---------------------------------------------------------------------------
# anisotropy


@dataclass
class PhiEstimate:
    nu: np.ndarray
    entries: list  # (eps, min_energy / rho)
    extrapolated: float
    method: str
    results: list = field(default_factory=list, repr=False)


def phi_estimate(nu, eps_list: Sequence[float], config: Optional[SolverConfig] = None,
                 rho: float = 1.0) -> PhiEstimate:
    """Cell minima along a spacing ladder; the finest spacing is reported (no extrapolation)."""
    eps_sorted = sorted(eps_list, reverse=True)
    entries, results = [], []
    for eps in eps_sorted:
        r = solve_cell(nu, rho, eps, config)
        entries.append((eps, r.min_energy / rho))
        results.append(r)
    return PhiEstimate(unit(nu), entries, entries[-1][1], "finest", results)


SWEEP_HEADER = ("theta_rad", "eps", "min_energy", "phi_estimate", "grad_norm", "iterations",
                "restart_index", "converged")


@dataclass
class SweepRow:
    theta: float
    eps: float
    min_energy: float
    phi_estimate: float
    grad_norm: float
    iterations: int
    restart_index: int
    converged: bool

    def as_row(self) -> list:
        return [self.theta, self.eps, self.min_energy, self.phi_estimate, self.grad_norm,
                self.iterations, self.restart_index, int(self.converged)]


def sweep_angles(n_angles: int) -> np.ndarray:
    return np.arange(n_angles) * (TWO_PI / n_angles)


def anisotropy_sweep(n_angles: int, eps_list: Sequence[float], config: Optional[SolverConfig] = None,
                     rho: float = 1.0, angles: Optional[Sequence[float]] = None) -> list[SweepRow]:
    rows = []
    for th in (sweep_angles(n_angles) if angles is None else angles):
        for eps in sorted(eps_list, reverse=True):
            r = solve_cell(direction(th), rho, eps, config)
            rows.append(SweepRow(float(th), eps, r.min_energy, r.min_energy / rho, r.grad_norm,
                                 r.iterations, r.restart_index, r.converged))
    return rows


def convexity_violations(rows: Sequence[SweepRow], eps: float, rel_tol: float = 0.05) -> list:
    """Triples of equally spaced angles where the one-homogeneous extension fails to be convex.

    For directions at t - s, t, t + s the sum of the outer unit vectors is
    2 cos(s) times the middle one, so convexity asks
    2 cos(s) phi(t) <= phi(t - s) + phi(t + s).
    """
    table = sorted((r.theta, r.phi_estimate) for r in rows if r.eps == eps)
    n = len(table)
    bad = []
    for a in range(n):
        for s in range(1, n // 4 + 1):
            lo, mid, hi = table[(a - s) % n], table[a], table[(a + s) % n]
            step = TWO_PI * s / n
            lhs = 2 * math.cos(step) * mid[1]
            rhs = lo[1] + hi[1]
            if lhs > rhs * (1 + rel_tol):
                bad.append((mid[0], step, lhs, rhs))
    return bad


# ---------------------------------------------------------------------------
# post-processing


def _cell_arrays(result: SolveResult):
    p = result.problem
    theta = np.array([result.field.theta(s) for s in map(tuple, p.sites)])
    t = theta[p.tri_sites]
    return p, t


def wall_profile(result: SolveResult, bins: int = 20) -> list[tuple[float, float, int]]:
    """Mean chirality binned by signed distance of triangle barycentres to the interface line."""
    p, t = _cell_arrays(result)
    chi = triangle_chiralities(t)
    s = p.tris.barycenters(p.eps) @ p.nu
    edges = np.linspace(-p.rho / 2, p.rho / 2, bins + 1)
    which = np.clip(np.digitize(s, edges) - 1, 0, bins - 1)
    out = []
    for b in range(bins):
        m = which == b
        if m.any():
            out.append((float((edges[b] + edges[b + 1]) / 2), float(chi[m].mean()), int(m.sum())))
    return out


def energy_localization(result: SolveResult, delta: float) -> float:
    """Share of the cell energy carried by triangles inside the band of height delta * rho."""
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    p, t = _cell_arrays(result)
    e = triangle_energies(t, p.eps)
    total = float(np.sum(e))
    if total == 0:
        return 1.0
    band = rectangle(p.nu, p.rho, delta * p.rho)
    inside = band.contains_triangles(p.tris.positions(p.eps))
    return float(np.sum(e[inside])) / total


def load_config(path) -> tuple[dict, SolverConfig]:
    """Cell configuration JSON: nu_angle_rad, rho, eps and a ``solver`` block."""
    with open(path) as fh:
        d = json.load(fh)
    for key in ("nu_angle_rad", "rho", "eps"):
        if key not in d:
            raise ValueError(f"config missing '{key}'")
    cfg = SolverConfig.from_dict(d.get("solver", {}))
    return d, cfg
