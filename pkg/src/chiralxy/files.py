"""Plain-text file formats for spin fields, chirality rasters and CSV tables."""
from __future__ import annotations

import csv
import math
import os
from pathlib import Path

import numpy as np

from .lattice import BASIS_INV
from .spin import ChiralityField, SpinField

OUTDIR_ENV = "CHIRALXY_OUTDIR"


def output_dir(default: str | os.PathLike = ".") -> Path:
    """Output directory; the environment variable wins over ``default``."""
    p = Path(os.environ.get(OUTDIR_ENV, default))
    p.mkdir(parents=True, exist_ok=True)
    return p


def fmt(x: float) -> str:
    """Nine significant digits, always showing a decimal point for finite values."""
    s = f"{x:.9g}"
    if math.isfinite(x) and not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def save_field(u: SpinField, path) -> None:
    """One ``z1 z2 theta`` line per site; angles are written exactly (repr)."""
    with open(path, "w") as fh:
        fh.write(f"# eps {u.eps!r}\n")
        for (a, b) in sorted(u.angles):
            fh.write(f"{a} {b} {u.angles[(a, b)]!r}\n")


def load_field(path, eps: float | None = None) -> SpinField:
    angles = {}
    file_eps = None
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "eps":
                    file_eps = float(parts[1])
                continue
            p = line.split()
            if len(p) != 3:
                raise ValueError(f"{path}:{n}: expected 'z1 z2 theta'")
            key = (int(p[0]), int(p[1]))
            if key in angles:
                raise ValueError(f"{path}:{n}: duplicate site {key}")
            theta = float(p[2])
            if not math.isfinite(theta):
                raise ValueError(f"{path}:{n}: non-finite angle")
            angles[key] = theta
    e = eps if eps is not None else file_eps
    if e is None:
        raise ValueError(f"{path}: lattice spacing unknown (no '# eps' header and none given)")
    return SpinField(e, angles)


def chirality_raster(chi: ChiralityField, nx: int = 80, ny: int = 80, bounds=None) -> np.ndarray:
    """Sample chirality on a regular grid; NaN where no triangle of the field covers a point."""
    eps = chi.eps
    lookup = {}
    for t, v in chi.values.items():
        lookup[(tuple(t.anchor), t.is_up)] = v
    if bounds is None:
        pts = np.array([t.barycenter(eps) for t in chi.values]) if chi.values else np.zeros((1, 2))
        bounds = (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())
    xs = np.linspace(bounds[0], bounds[1], nx)
    ys = np.linspace(bounds[2], bounds[3], ny)
    grid = np.full((ny, nx), np.nan)
    for r, y in enumerate(ys[::-1]):
        for c, x in enumerate(xs):
            a = BASIS_INV @ (np.array([x, y]) / eps)
            p = np.floor(a)
            f = a - p
            if f.sum() <= 1:
                key = ((int(p[0]), int(p[1])), True)
            else:
                key = ((int(p[0]) + 1, int(p[1])), False)
            hit = lookup.get(key)
            if hit is not None:
                grid[r, c] = hit
    return grid


def write_chirality_grid(chi: ChiralityField, path, nx: int = 80, ny: int = 80, bounds=None) -> None:
    grid = chirality_raster(chi, nx, ny, bounds)
    with open(path, "w") as fh:
        for row in grid:
            fh.write(" ".join("nan" if np.isnan(v) else f"{v:.6f}" for v in row) + "\n")


def write_chirality_svg(chi: ChiralityField, path, size: int = 600) -> None:
    """Triangles coloured red (chirality +1) to blue (-1)."""
    eps = chi.eps
    tris = list(chi.values)
    if not tris:
        pts = np.zeros((1, 2))
    else:
        pts = np.concatenate([t.positions(eps) for t in tris])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(hi - lo) or 1.0
    s = size / span

    def xy(p):
        return f"{(p[0] - lo[0]) * s:.2f},{(hi[1] - p[1]) * s:.2f}"

    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">\n')
        for t in tris:
            v = max(-1.0, min(1.0, chi.values[t]))
            red = int(round(255 * (1 + v) / 2))
            pts_s = " ".join(xy(p) for p in t.positions(eps))
            fh.write(f'<polygon points="{pts_s}" fill="rgb({red},0,{255 - red})"/>\n')
        fh.write("</svg>\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in r])
