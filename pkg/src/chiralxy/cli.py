"""Command line interface.

Exit status: 0 on success, 2 on input/validation errors, 3 when a solve does
not reach the gradient tolerance.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, files, lattice, optimize, recovery, spin
from .regions import direction, rectangle, square

EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3


class InputError(Exception):
    pass


def parse_region(text: str):
    """``square:cx,cy:side[:nu]`` or ``rect:cx,cy:length,height[:nu]``; nu is an angle in radians."""
    parts = text.split(":")
    try:
        shape = parts[0]
        cx, cy = (float(v) for v in parts[1].split(","))
        nu = direction(float(parts[3])) if len(parts) > 3 else (0.0, 1.0)
        if shape == "square" and len(parts) in (3, 4):
            return square(nu, float(parts[2]), (cx, cy))
        if shape == "rect" and len(parts) in (3, 4):
            length, height = (float(v) for v in parts[2].split(","))
            return rectangle(nu, length, height, (cx, cy))
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad region {text!r}: {exc}") from None
    raise InputError(f"bad region {text!r}; expected square:cx,cy:side[:nu] or rect:cx,cy:l,h[:nu]")


def _config(args) -> optimize.SolverConfig:
    cfg = optimize.SolverConfig()
    if getattr(args, "config", None):
        d, cfg = optimize.load_config(args.config)
        for key in ("nu_angle_rad", "rho", "eps"):
            if getattr(args, key.replace("_angle_rad", ""), None) is None:
                setattr(args, key.replace("_angle_rad", ""), d[key])
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if getattr(args, "restarts", None) is not None:
        cfg.restarts = args.restarts
    if getattr(args, "hops", None) is not None:
        cfg.basin_hops = args.hops
    cfg.workers = args.threads or os.cpu_count() or 1
    cfg.validate()
    return cfg


def _out(args, name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return files.output_dir() / name


def cmd_verify(args) -> int:
    fg = analysis.verify_fg_extrema()
    pair = analysis.min_opposite_pair()
    cd = [analysis.estimate_c_delta(d) for d in (0.05, 0.1, 0.2, 0.4)]
    mono = all(a <= b + 1e-12 for a, b in zip(cd, cd[1:])) and cd[0] > 0
    pair_ok = abs(pair.value - 5 / 3) <= 1e-6 and abs(pair.argmin[1] - 2 * math.acos(-1 / 6)) <= 1e-4
    print(f"f_max={files.fmt(fg.f_max)}")
    print(f"f_min={files.fmt(fg.f_min)}")
    print(f"g_min={files.fmt(fg.g_min)}")
    print(f"min_opposite_pair={files.fmt(pair.value)}")
    print(f"argmin_theta2={files.fmt(pair.argmin[1])}")
    for d, v in zip((0.05, 0.1, 0.2, 0.4), cd):
        print(f"c_delta[{d}]={files.fmt(v)}")
    ok = fg.passed and pair_ok and mono
    print(f"status={'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


def cmd_solve_cell(args) -> int:
    cfg = _config(args)
    if args.nu is None or args.eps is None:
        raise InputError("--nu and --eps are required (directly or through --config)")
    rho = args.rho if args.rho is not None else 1.0
    res = optimize.solve_cell(direction(args.nu), rho, args.eps, cfg)
    path = _out(args, f"cell_nu{args.nu:.6f}_eps{args.eps:.6g}.txt")
    files.save_field(res.field, path)
    print(f"min_energy={files.fmt(res.min_energy)}")
    print(f"phi_estimate={files.fmt(res.min_energy / rho)}")
    print(f"grad_norm={files.fmt(res.grad_norm)}")
    print(f"iterations={res.iterations}")
    print(f"restart_index={res.restart_index}")
    print(f"converged={int(res.converged)}")
    print(f"field={path}")
    return 0 if res.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    cfg = _config(args)
    eps_list = [float(v) for v in args.eps_list.split(",")]
    rows = optimize.anisotropy_sweep(args.angles, eps_list, cfg, rho=args.rho)
    path = _out(args, "sweep.csv")
    files.write_csv(path, optimize.SWEEP_HEADER, [r.as_row() for r in rows])
    print(f"rows={len(rows)}")
    print(f"csv={path}")
    return 0 if all(r.converged for r in rows) else EXIT_NOT_CONVERGED


def cmd_profile(args) -> int:
    cfg = _config(args)
    res = optimize.solve_cell(direction(args.nu), args.rho, args.eps, cfg)
    prof = optimize.wall_profile(res, args.bins)
    path = _out(args, "profile.csv")
    files.write_csv(path, ("signed_distance", "mean_chirality", "triangles"),
                    [(c, m, n) for c, m, n in prof])
    print(f"localization={files.fmt(optimize.energy_localization(res, args.delta))}")
    print(f"csv={path}")
    return 0 if res.converged else EXIT_NOT_CONVERGED


def cmd_pave(args) -> int:
    cfg = _config(args)
    iface = recovery.PolygonalInterface.from_json(args.interface)
    plan = recovery.plan_paving(iface, args.rho, args.eps)
    cells, mins, tris, converged = {}, {}, {}, True
    for s, nu in enumerate(iface.normals):
        r = optimize.solve_cell(nu, args.rho, args.eps, cfg)
        cells[s], mins[s], tris[s] = r.field, r.min_energy, r.problem.tris
        converged &= r.converged
    u = recovery.pave_interface(iface, args.rho, args.eps, cells, plan)
    rep = recovery.evaluate_paving(u, iface, args.rho, args.eps, mins, tris, plan)
    field_path = _out(args, "paved_field.txt")
    files.save_field(u, field_path)
    dec = Path(args.decomposition) if args.decomposition else files.output_dir() / "decomposition.csv"
    rows = [(s, i, e) for s, i, e in rep.cube_energies] + [("leftover", "", rep.leftover_energy)]
    files.write_csv(dec, ("segment", "cube_index", "energy"), rows)
    print(f"total_energy={files.fmt(rep.total_energy)}")
    print(f"leftover_energy={files.fmt(rep.leftover_energy)}")
    print(f"l1_error={files.fmt(rep.l1_error)}")
    print(f"energy_bound={files.fmt(rep.energy_bound)}")
    print(f"field={field_path}")
    print(f"decomposition={dec}")
    return 0 if converged else EXIT_NOT_CONVERGED


def cmd_enforce(args) -> int:
    u = files.load_field(args.field, args.eps)
    out, rep = recovery.enforce_boundary_report(u, direction(args.nu), args.delta, u.eps,
                                                winding_slack=args.winding_slack)
    path = _out(args, "enforced_field.txt")
    files.save_field(out, path)
    print(f"strip_radius={files.fmt(rep.strip.r)}")
    print(f"energy_before={files.fmt(rep.energy_before)}")
    print(f"energy_after={files.fmt(rep.energy_after)}")
    print(f"field={path}")
    return 0


def cmd_chirality(args) -> int:
    u = files.load_field(args.field, args.eps)
    chi = spin.chirality_field(u, parse_region(args.region))
    vals = np.array(list(chi.values.values())) if len(chi) else np.zeros(0)
    grid = _out(args, "chirality.txt")
    files.write_chirality_grid(chi, grid)
    if args.svg:
        files.write_chirality_svg(chi, args.svg)
    print(f"triangles={len(chi)}")
    if len(vals):
        print(f"min={files.fmt(float(vals.min()))}")
        print(f"max={files.fmt(float(vals.max()))}")
        print(f"positive_fraction={files.fmt(float((vals > 0).mean()))}")
    print(f"grid={grid}")
    return 0


def cmd_energy(args) -> int:
    u = files.load_field(args.field, args.eps)
    print(files.fmt(spin.energy_region(u, parse_region(args.region))))
    return 0


def cmd_dump_lattice(args) -> int:
    tris = lattice.triangles_in(parse_region(args.region), args.eps)
    if args.out:
        with open(args.out, "w") as fh:
            lattice.write_triangles(fh, tris)
    else:
        lattice.write_triangles(sys.stdout, tris)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiralxy", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="random seed for the solver")
    p.add_argument("--threads", type=int, default=None, help="worker threads for restarts (default: all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("verify", help="check the trigonometric bounds")

    s = sub.add_parser("solve-cell", help="minimize the cell problem")
    s.add_argument("--nu", type=float, help="normal angle in radians")
    s.add_argument("--eps", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--config", help="JSON configuration file")
    s.add_argument("--restarts", type=int)
    s.add_argument("--hops", type=int)
    s.add_argument("--out")

    s = sub.add_parser("sweep", help="cell minima over normal angles")
    s.add_argument("--angles", type=int, required=True)
    s.add_argument("--eps-list", required=True)
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--restarts", type=int)
    s.add_argument("--hops", type=int)
    s.add_argument("--out")

    s = sub.add_parser("profile", help="chirality profile across the wall")
    s.add_argument("--nu", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--delta", type=float, default=0.25)
    s.add_argument("--restarts", type=int)
    s.add_argument("--hops", type=int)
    s.add_argument("--out")

    s = sub.add_parser("pave", help="pave a polygonal interface with cell solutions")
    s.add_argument("--interface", required=True)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--restarts", type=int)
    s.add_argument("--hops", type=int)
    s.add_argument("--decomposition")
    s.add_argument("--out")

    s = sub.add_parser("enforce", help="impose ground-state boundary values on a cell field")
    s.add_argument("--field", required=True)
    s.add_argument("--nu", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--winding-slack", type=int, default=8)
    s.add_argument("--out")

    for name, helptext in (("chirality", "chirality raster of a field"), ("energy", "energy of a field")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--field", required=True)
        s.add_argument("--region", required=True)
        s.add_argument("--eps", type=float)
        if name == "chirality":
            s.add_argument("--svg")
            s.add_argument("--out")

    s = sub.add_parser("dump-lattice", help="list triangles of a region")
    s.add_argument("--region", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--out")
    return p


COMMANDS = {
    "verify": cmd_verify, "solve-cell": cmd_solve_cell, "sweep": cmd_sweep, "profile": cmd_profile,
    "pave": cmd_pave, "enforce": cmd_enforce, "chirality": cmd_chirality, "energy": cmd_energy,
    "dump-lattice": cmd_dump_lattice,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        status = COMMANDS[args.command](args)
        if status == EXIT_NOT_CONVERGED:
            print("warning: solver did not converge; written artifacts are partial", file=sys.stderr)
        return status
    except (InputError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
