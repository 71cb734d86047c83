"""Synthetic Cauchy data on Sigma, generated on an over-refined mesh, and its CSV form."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .fem import normal_derivative, solve_state_dirichlet
from .mesh import Marker, Mesh, build_annulus_mesh, extract_boundary_trace

HEADER = ["theta", "x", "y", "f", "g"]


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Samples (theta, x, y, f, g) on Sigma with strictly increasing theta in [0, 2*pi)."""

    theta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float) for c in (self.theta, self.x, self.y, self.f, self.g)]
        if len({len(c) for c in cols}) != 1 or len(cols[0]) == 0:
            raise ValueError("measurement columns must be non-empty and of equal length")
        if np.any(np.diff(cols[0]) <= 0) or cols[0][0] < 0 or cols[0][-1] >= 2 * np.pi:
            raise ValueError("theta must be strictly increasing in [0, 2*pi)")
        for name, c in zip(("theta", "x", "y", "f", "g"), cols):
            object.__setattr__(self, name, c)

    def __len__(self):
        return len(self.theta)

    def __eq__(self, other):
        if not isinstance(other, MeasurementSet):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in HEADER)


def _evaluate(values, theta: np.ndarray) -> np.ndarray:
    if callable(values):
        return np.asarray(values(theta), dtype=float) * np.ones_like(theta)
    return np.broadcast_to(np.asarray(values, dtype=float), theta.shape).astype(float)


def generate_synthetic(true_gamma, f_sigma=1.0, refine_factor: int = 4, h_inversion: float = 0.04,
                       outer_radius: float = 1.0) -> MeasurementSet:
    """Solve the Dirichlet state around ``true_gamma`` on a mesh ``refine_factor`` times
    finer than the inversion mesh and record the recovered Sigma flux.

    ``f_sigma`` is a constant or a callable of the polar angle on Sigma.
    """
    if int(refine_factor) != refine_factor or refine_factor < 2:
        raise ValueError("refine_factor must be an integer >= 2")
    mesh = build_annulus_mesh(outer_radius, true_gamma, h_inversion / refine_factor)
    sigma = extract_boundary_trace(mesh, Marker.SIGMA)
    f = _evaluate(f_sigma, sigma.theta)
    u = solve_state_dirichlet(mesh, f)
    g = normal_derivative(mesh, u, sigma)
    order = np.argsort(sigma.theta)
    p = sigma.positions[order]
    return MeasurementSet(sigma.theta[order], p[:, 0], p[:, 1], f[order], g[order])


def resample_to_mesh(ms: MeasurementSet, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Periodic linear interpolation in theta onto the mesh's Sigma trace order."""
    theta = extract_boundary_trace(mesh, Marker.SIGMA).theta
    period = 2 * np.pi
    return (np.interp(theta, ms.theta, ms.f, period=period),
            np.interp(theta, ms.theta, ms.g, period=period))


def write_measurements(path, ms: MeasurementSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for row in zip(ms.theta, ms.x, ms.y, ms.f, ms.g):
            w.writerow([repr(float(v)) for v in row])


def read_measurements(path) -> MeasurementSet:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError("empty measurement file", 1)
    if [c.strip() for c in lines[0].split(",")] != HEADER:
        raise ParseError(f"expected header {','.join(HEADER)}", 1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} columns, got {len(parts)}", lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"malformed number ({exc})", lineno) from exc
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", lineno)
        if rows and vals[0] <= rows[-1][0]:
            raise ParseError("theta must be strictly increasing", lineno)
        rows.append(vals)
    if not rows:
        raise ParseError("measurement file has no samples", 2)
    a = np.array(rows)
    try:
        return MeasurementSet(*a.T)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
