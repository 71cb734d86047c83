"""Triangulated annular domains bounded by a fixed outer circle and a free inner curve.

Node ordering produced by :func:`build_annulus_mesh` is ring by ring, starting
with the inner boundary (Gamma) and ending with the outer circle (Sigma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
from shapely.geometry import LinearRing

from .errors import GeometryError, MeshingError, ParseError, ReversedTriangleError, TopologyError


class Marker(str, Enum):
    SIGMA = "sigma"
    GAMMA = "gamma"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangle mesh of an annulus.

    ``edges`` holds boundary edges only; ``edge_markers[i]`` tags ``edges[i]``.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_markers: tuple[Marker, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(np.asarray(self.nodes, dtype=float).reshape(-1, 2)))
        object.__setattr__(self, "triangles", _readonly(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)))
        object.__setattr__(self, "edges", _readonly(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)))
        object.__setattr__(self, "edge_markers", tuple(Marker(m) for m in self.edge_markers))
        if len(self.edge_markers) != len(self.edges):
            raise ValueError("edge_markers must match edges")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def connectivity_cache(self) -> dict:
        """Scratch space for data that depends on connectivity only; shared by deformed copies."""
        return {}

    @cached_property
    def loops(self) -> dict[Marker, np.ndarray]:
        """Ordered node ids of each boundary loop (connectivity only)."""
        return {m: _order_loop(self.edges[np.array([e == m for e in self.edge_markers], dtype=bool)], m)
                for m in Marker}

    def boundary_nodes(self, marker: Marker) -> np.ndarray:
        return self.loops[Marker(marker)]

    @cached_property
    def areas(self) -> np.ndarray:
        return signed_areas(self)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric functions per element, shape (M, 3, 2)."""
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        two_a = 2.0 * self.areas
        g = np.empty((len(self.triangles), 3, 2))
        g[:, 0, 0] = y[:, 1] - y[:, 2]
        g[:, 1, 0] = y[:, 2] - y[:, 0]
        g[:, 2, 0] = y[:, 0] - y[:, 1]
        g[:, 0, 1] = x[:, 2] - x[:, 1]
        g[:, 1, 1] = x[:, 0] - x[:, 2]
        g[:, 2, 1] = x[:, 1] - x[:, 0]
        return g / two_a[:, None, None]


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Closed polyline of one boundary loop, counter-clockwise.

    Normals point out of the enclosed polygon: out of the disk on Sigma and
    into the annulus (away from the inclusion) on Gamma.
    """

    node_ids: np.ndarray
    positions: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    marker: Marker

    def __len__(self):
        return len(self.node_ids)

    @property
    def perimeter(self) -> float:
        return float(np.sum(np.linalg.norm(np.roll(self.positions, -1, axis=0) - self.positions, axis=1)))

    @property
    def theta(self) -> np.ndarray:
        """Polar angles in [0, 2*pi)."""
        return np.mod(np.arctan2(self.positions[:, 1], self.positions[:, 0]), 2 * np.pi)


# ---------------------------------------------------------------- geometry helpers

def circle(radius: float, n: int, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def kite(n: int, scale: float = 0.3, center=(0.1, 0.0)) -> np.ndarray:
    """The classical kite curve (cos t + 0.65 cos 2t - 0.65, 1.5 sin t), scaled and shifted."""
    t = 2 * np.pi * np.arange(n) / n
    x = np.cos(t) + 0.65 * np.cos(2 * t) - 0.65
    y = 1.5 * np.sin(t)
    return np.column_stack([center[0] + scale * x, center[1] + scale * y])


def polygon_signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    a = 0.5 * np.sum(c)
    return np.array([np.sum((x + xn) * c), np.sum((y + yn) * c)]) / (6.0 * a)


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd ray casting; boundary points are unspecified."""
    px, py = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = polygon[:, 0][None], polygon[:, 1][None]
    x1, y1 = np.roll(polygon[:, 0], -1)[None], np.roll(polygon[:, 1], -1)[None]
    straddle = (y0 > py) != (y1 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    return np.count_nonzero(straddle & (px < xint), axis=1) % 2 == 1


def _closed_polyline(curve) -> np.ndarray:
    p = np.asarray(curve, dtype=float).reshape(-1, 2)
    if len(p) > 1 and np.array_equal(p[0], p[-1]):
        p = p[:-1]
    if len(p) < 3:
        raise GeometryError("a closed curve needs at least three vertices")
    return p


def _resample_closed(points: np.ndarray, n: int) -> np.ndarray:
    """n points equally spaced in arc length along a closed polyline, starting at points[0]."""
    closed = np.vstack([points, points[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = s[-1] * np.arange(n) / n
    return np.column_stack([np.interp(target, s, closed[:, 0]), np.interp(target, s, closed[:, 1])])


def _polar_angles(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    d = points - center
    return np.unwrap(np.arctan2(d[:, 1], d[:, 0]))


def _ray_polygon_radius(polygon: np.ndarray, poly_ang: np.ndarray, center: np.ndarray,
                        phi: np.ndarray) -> np.ndarray:
    """Distance from center to a star-shaped polygon along directions phi."""
    a0 = poly_ang[0]
    ext = np.concatenate([poly_ang, [a0 + 2 * np.pi]])
    q = a0 + np.mod(phi - a0, 2 * np.pi)
    idx = np.clip(np.searchsorted(ext, q, side="right") - 1, 0, len(polygon) - 1)
    p0 = polygon[idx]
    e = polygon[(idx + 1) % len(polygon)] - p0
    d = np.column_stack([np.cos(phi), np.sin(phi)])
    w = p0 - center
    num = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]
    den = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
    return num / den


def _ray_circle_radius(radius: float, center: np.ndarray, phi: np.ndarray) -> np.ndarray:
    d = np.column_stack([np.cos(phi), np.sin(phi)])
    b = d @ center
    return -b + np.sqrt(b * b - center @ center + radius * radius)


def _stitch(inner_ids, inner_ang, outer_ids, outer_ang) -> list[tuple[int, int, int]]:
    """Triangulate the band between two nested rings ordered by polar angle."""
    a0 = inner_ang[0]
    rel = np.mod(outer_ang - a0, 2 * np.pi)
    order = np.argsort(rel, kind="stable")
    ob = outer_ids[order]
    bang = a0 + rel[order]
    m, n = len(inner_ids), len(ob)
    a = np.concatenate([inner_ang, [inner_ang[0] + 2 * np.pi]])
    b = np.concatenate([bang, [bang[0] + 2 * np.pi]])
    tris = []
    i = j = 0
    while i < m or j < n:
        advance_inner = j == n or (i < m and a[i] + a[i + 1] < b[j] + b[j + 1])
        ai, bj = inner_ids[i % m], ob[j % n]
        if advance_inner:
            tris.append((ai, bj, inner_ids[(i + 1) % m]))
            i += 1
        else:
            tris.append((ai, bj, ob[(j + 1) % n]))
            j += 1
    return tris


def _check_inner_curve(p: np.ndarray, outer_radius: float) -> None:
    r = np.linalg.norm(p, axis=1)
    if np.any(r >= outer_radius):
        raise GeometryError(f"inner curve leaves the outer circle (max radius {r.max():.6g} >= {outer_radius})")
    if not LinearRing(p).is_simple:
        raise GeometryError("inner curve self-intersects")


def build_annulus_mesh(outer_radius: float, inner_curve, h_target: float,
                       n_layers: int | None = None) -> Mesh:
    """Structured ring mesh between ``inner_curve`` and the circle of radius ``outer_radius``.

    Rings are radial blends (about the centroid of the inner curve) of the two
    boundaries, each resampled to spacing ``h_target``; consecutive rings are
    stitched by polar angle. ``n_layers`` defaults to the mean gap over
    ``h_target``; passing more layers grades the radial spacing finer, which
    helps when Gamma is expected to travel far from its initial position.
    """
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    inner = _closed_polyline(inner_curve)
    _check_inner_curve(inner, outer_radius)
    if polygon_signed_area(inner) < 0:
        inner = inner[::-1]

    seg = np.linalg.norm(np.roll(inner, -1, axis=0) - inner, axis=1)
    if seg.min() < 0.5 * h_target or seg.max() > 2.0 * h_target:
        n_gamma = max(8, int(round(seg.sum() / h_target)))
        inner = _resample_closed(inner, n_gamma)

    center = polygon_centroid(inner)
    ang_in = _polar_angles(inner, center)
    if np.any(np.diff(ang_in) <= 0) or ang_in[-1] - ang_in[0] >= 2 * np.pi:
        raise MeshingError("inner curve is not star-shaped about its centroid")

    n_sigma = max(8, int(round(2 * np.pi * outer_radius / h_target)))
    sigma = circle(outer_radius, n_sigma)

    gaps = _ray_circle_radius(outer_radius, center, ang_in) - np.linalg.norm(inner - center, axis=1)
    if n_layers is None:
        n_layers = max(1, int(math.ceil(float(np.mean(gaps)) / h_target)))

    dense_phi = ang_in[0] + 2 * np.pi * np.arange(max(2048, 8 * n_sigma)) / max(2048, 8 * n_sigma)
    r_in = _ray_polygon_radius(inner, ang_in, center, dense_phi)
    r_out = _ray_circle_radius(outer_radius, center, dense_phi)
    dirs = np.column_stack([np.cos(dense_phi), np.sin(dense_phi)])

    rings = [inner]
    for j in range(1, n_layers):
        w = j / n_layers
        dense = center + ((1 - w) * r_in + w * r_out)[:, None] * dirs
        perim = np.sum(np.linalg.norm(np.roll(dense, -1, axis=0) - dense, axis=1))
        rings.append(_resample_closed(dense, max(8, int(round(perim / h_target)))))
    rings.append(sigma)

    offsets = np.cumsum([0] + [len(r) for r in rings])
    nodes = np.vstack(rings)
    tris: list[tuple[int, int, int]] = []
    for j in range(len(rings) - 1):
        ids_a = np.arange(offsets[j], offsets[j + 1])
        ids_b = np.arange(offsets[j + 1], offsets[j + 2])
        tris.extend(_stitch(ids_a, _polar_angles(rings[j], center),
                            ids_b, _polar_angles(rings[j + 1], center)))

    g_ids = np.arange(offsets[0], offsets[1])
    s_ids = np.arange(offsets[-2], offsets[-1])
    edges = np.vstack([np.column_stack([g_ids, np.roll(g_ids, -1)]),
                       np.column_stack([s_ids, np.roll(s_ids, -1)])])
    markers = [Marker.GAMMA] * len(g_ids) + [Marker.SIGMA] * len(s_ids)
    mesh = Mesh(nodes, np.array(tris), edges, markers)
    try:
        validate_mesh(mesh)
    except TopologyError as exc:
        raise MeshingError(f"generated mesh is invalid: {exc}") from exc
    return mesh


# ---------------------------------------------------------------- topology and validation

def _order_loop(edges: np.ndarray, marker: Marker) -> np.ndarray:
    if len(edges) < 3:
        raise TopologyError(f"{marker.value}: fewer than three boundary edges")
    nbrs: dict[int, list[int]] = {}
    for a, b in edges:
        nbrs.setdefault(int(a), []).append(int(b))
        nbrs.setdefault(int(b), []).append(int(a))
    if any(len(v) != 2 for v in nbrs.values()):
        raise TopologyError(f"{marker.value}: boundary edges do not form a simple loop")
    start = int(edges[0, 0])
    loop = [start, int(edges[0, 1])]
    while True:
        prev, cur = loop[-2], loop[-1]
        nxt = nbrs[cur][0] if nbrs[cur][0] != prev else nbrs[cur][1]
        if nxt == start:
            break
        loop.append(nxt)
        if len(loop) > len(nbrs):
            raise TopologyError(f"{marker.value}: boundary walk does not close")
    if len(loop) != len(nbrs):
        raise TopologyError(f"{marker.value}: boundary edges form more than one loop")
    return np.array(loop, dtype=np.int64)


def _ccw_loop(mesh: Mesh, marker: Marker) -> np.ndarray:
    loop = mesh.boundary_nodes(marker)
    if polygon_signed_area(mesh.nodes[loop]) < 0:
        loop = loop[::-1]
    return loop


def signed_areas(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def min_signed_area(mesh: Mesh) -> float:
    return float(np.min(signed_areas(mesh)))


def validate_mesh(mesh: Mesh) -> None:
    """Raise TopologyError unless every Mesh invariant holds."""
    if mesh.triangles.min() < 0 or mesh.triangles.max() >= mesh.n_nodes:
        raise TopologyError("triangle references a missing node")
    amin = min_signed_area(mesh)
    if amin <= 0:
        raise TopologyError(f"non-positive triangle area {amin:.3e}")
    loops = {m: mesh.boundary_nodes(m) for m in Marker}
    for m, loop in loops.items():
        if not LinearRing(mesh.nodes[loop]).is_simple:
            raise TopologyError(f"{m.value} loop is not simple")
    sigma_poly = mesh.nodes[loops[Marker.SIGMA]]
    if not np.all(points_in_polygon(mesh.nodes[loops[Marker.GAMMA]], sigma_poly)):
        raise TopologyError("gamma loop is not inside the sigma loop")
    t = np.sort(mesh.triangles, axis=1)
    tri_edges = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [0, 2]]])
    uniq, counts = np.unique(tri_edges, axis=0, return_counts=True)
    lookup = {tuple(e): c for e, c in zip(uniq.tolist(), counts.tolist())}
    for e in np.sort(mesh.edges, axis=1).tolist():
        if lookup.get(tuple(e), 0) != 1:
            raise TopologyError(f"boundary edge {tuple(e)} is not on exactly one triangle")


# ---------------------------------------------------------------- traces

def _trace(node_ids: np.ndarray, positions: np.ndarray, marker: Marker) -> BoundaryTrace:
    nxt = np.roll(positions, -1, axis=0)
    e = nxt - positions
    length = np.linalg.norm(e, axis=1)
    t = e / length[:, None]
    tn = t + np.roll(t, 1, axis=0)
    tn /= np.linalg.norm(tn, axis=1)[:, None]
    normals = np.column_stack([tn[:, 1], -tn[:, 0]])
    weights = 0.5 * (length + np.roll(length, 1))
    return BoundaryTrace(_readonly(node_ids), _readonly(positions), _readonly(normals), _readonly(weights),
                         Marker(marker))


def extract_boundary_trace(mesh: Mesh, marker: Marker) -> BoundaryTrace:
    loop = _ccw_loop(mesh, Marker(marker))
    return _trace(loop, mesh.nodes[loop].copy(), Marker(marker))


def trace_from_polyline(points, marker: Marker = Marker.GAMMA) -> BoundaryTrace:
    """Trace of a free-standing closed polyline (node ids are 0..n-1)."""
    p = _closed_polyline(points)
    ids = np.arange(len(p))
    if polygon_signed_area(p) < 0:
        p, ids = p[::-1], ids[::-1]
    return _trace(ids, p.copy(), Marker(marker))


# ---------------------------------------------------------------- deformation

def deform_mesh(mesh: Mesh, displacement, dt: float) -> Mesh:
    """Move every node by ``dt * displacement``; connectivity is kept.

    Raises ReversedTriangleError (carrying the minimum signed area) when the
    update inverts an element.
    """
    d = np.asarray(displacement, dtype=float).reshape(-1, 2)
    if d.shape != mesh.nodes.shape:
        raise ValueError("displacement must be defined on every node")
    if np.any(d[mesh.boundary_nodes(Marker.SIGMA)] != 0.0):
        raise ValueError("displacement must vanish on Sigma")
    moved = Mesh(mesh.nodes + dt * d, mesh.triangles, mesh.edges, mesh.edge_markers)
    moved.__dict__["loops"] = mesh.loops
    moved.__dict__["connectivity_cache"] = mesh.connectivity_cache
    amin = float(np.min(moved.areas))
    if not amin > 0:
        raise ReversedTriangleError(amin)
    return moved


# ---------------------------------------------------------------- Hausdorff distance

def _directed(points: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 512) -> float:
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ab2[ab2 == 0] = 1.0
    worst = 0.0
    for k in range(0, len(points), chunk):
        ap = points[k:k + chunk, None, :] - a[None]
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / ab2, 0.0, 1.0)
        d = np.linalg.norm(ap - t[..., None] * ab[None], axis=2).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


def _densify(p: np.ndarray, refine: int) -> np.ndarray:
    if refine <= 1:
        return p
    nxt = np.roll(p, -1, axis=0)
    s = np.arange(refine) / refine
    return (p[:, None, :] + s[None, :, None] * (nxt - p)[:, None, :]).reshape(-1, 2)


def hausdorff_distance(a: BoundaryTrace, b: BoundaryTrace, refine: int = 4) -> float:
    """Symmetric Hausdorff distance between two closed polylines.

    Each polyline is sampled at its vertices plus ``refine - 1`` points per
    edge and measured against the exact segments of the other; the result
    underestimates the continuous distance by at most half the longest
    sampling gap.
    """
    pa, pb = np.asarray(a.positions), np.asarray(b.positions)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("traces must be non-empty")
    if pa.shape == pb.shape and np.array_equal(pa, pb):
        return 0.0
    ab = _directed(_densify(pa, refine), pb, np.roll(pb, -1, axis=0))
    ba = _directed(_densify(pb, refine), pa, np.roll(pa, -1, axis=0))
    return max(ab, ba)


# ---------------------------------------------------------------- text format

def write_mesh(mesh: Mesh, path) -> None:
    lines = ["mesh 2d", f"nodes {mesh.n_nodes}"]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    lines.append(f"triangles {len(mesh.triangles)}")
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.triangles.tolist())]
    lines.append(f"edges {len(mesh.edges)}")
    lines += [f"{i} {a} {b} {m.value}" for i, ((a, b), m) in enumerate(zip(mesh.edges.tolist(), mesh.edge_markers))]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0].strip() != "mesh 2d":
        raise ParseError("expected header 'mesh 2d'", 1)
    pos = 1

    def section(word, n_fields, convert):
        nonlocal pos
        parts = rows[pos].split() if pos < len(rows) else []
        if len(parts) != 2 or parts[0] != word or not parts[1].isdigit():
            raise ParseError(f"expected '{word} <count>'", pos + 1)
        count = int(parts[1])
        pos += 1
        out = []
        for lineno in range(pos, pos + count):
            if lineno >= len(rows):
                raise ParseError(f"truncated {word} section", lineno + 1)
            raw = rows[lineno].split()
            if len(raw) != n_fields:
                raise ParseError(f"expected {n_fields} fields in {word} row", lineno + 1)
            try:
                out.append(convert(raw[1:]))
            except ValueError as exc:
                raise ParseError(f"malformed {word} row ({exc})", lineno + 1) from exc
        pos += count
        return out

    nodes = section("nodes", 3, lambda r: (float(r[0]), float(r[1])))
    tris = section("triangles", 4, lambda r: tuple(int(v) for v in r))
    edges = section("edges", 4, lambda r: (int(r[0]), int(r[1]), Marker(r[2].lower())))
    return Mesh(np.array(nodes), np.array(tris), np.array([e[:2] for e in edges]), [e[2] for e in edges])
