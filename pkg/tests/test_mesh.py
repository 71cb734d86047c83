import numpy as np
import pytest

from conftest import annulus
from qssts.errors import GeometryError, MeshingError, ParseError, ReversedTriangleError, TopologyError
from qssts.fem import harmonic_extension
from qssts.mesh import (
    Marker, Mesh, build_annulus_mesh, circle, deform_mesh, extract_boundary_trace, hausdorff_distance,
    kite, min_signed_area, read_mesh, signed_areas, trace_from_polyline, validate_mesh, write_mesh,
)


def test_annulus_invariants():
    mesh = build_annulus_mesh(1.0, circle(0.5, 64), 0.1)
    assert np.all(signed_areas(mesh) > 0)
    validate_mesh(mesh)
    assert len(mesh.boundary_nodes(Marker.SIGMA)) > 0
    assert len(mesh.boundary_nodes(Marker.GAMMA)) > 0


@pytest.mark.parametrize("h", [0.1, 0.05, 0.025])
def test_boundary_spacing_within_factor_two(h):
    mesh = annulus(0.5, h)
    for m in Marker:
        p = extract_boundary_trace(mesh, m).positions
        seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        assert 0.5 * h <= seg.min() and seg.max() <= 2 * h


def test_inner_curve_outside_rejected():
    with pytest.raises(GeometryError):
        build_annulus_mesh(1.0, circle(1.2, 64), 0.1)


def test_self_intersecting_curve_rejected():
    bowtie = np.array([[-0.3, -0.3], [0.3, 0.3], [0.3, -0.3], [-0.3, 0.3]])
    with pytest.raises(GeometryError):
        build_annulus_mesh(1.0, bowtie, 0.1)


def test_non_star_shaped_curve_rejected():
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    # a strongly curled spiral-like blob whose polar angle is not monotone
    r = 0.3 + 0.25 * np.sin(3 * t)
    x = r * np.cos(t + 1.2 * np.sin(3 * t))
    y = r * np.sin(t + 1.2 * np.sin(3 * t))
    pts = np.column_stack([x, y])
    with pytest.raises((MeshingError, GeometryError)):
        build_annulus_mesh(1.0, pts, 0.05)


def test_sigma_edges_double_when_h_halves():
    # the generator places round(2 pi R / h) nodes on Sigma: 126 at h=0.05, 251 at h=0.025
    n1 = len(annulus(0.5, 0.05).boundary_nodes(Marker.SIGMA))
    n2 = len(annulus(0.5, 0.025).boundary_nodes(Marker.SIGMA))
    assert (n1, n2) == (126, 251)
    assert abs(n2 / n1 - 2) <= 0.4


def test_sigma_normals_radial(mesh_05):
    tr = extract_boundary_trace(mesh_05, Marker.SIGMA)
    radial = tr.positions / np.linalg.norm(tr.positions, axis=1)[:, None]
    assert np.abs(tr.normals - radial).max() <= 1e-2


def test_gamma_normals_point_into_domain(mesh_05):
    tr = extract_boundary_trace(mesh_05, Marker.GAMMA)
    radial = tr.positions / np.linalg.norm(tr.positions, axis=1)[:, None]
    assert np.abs(tr.normals - radial).max() <= 1e-2
    # stepping along the normal leaves the inclusion
    assert np.all(np.linalg.norm(tr.positions + 1e-3 * tr.normals, axis=1) > 0.5)


def test_trace_normals_unit_and_weights_sum(mesh_05):
    for m in Marker:
        tr = extract_boundary_trace(mesh_05, m)
        assert np.abs(np.linalg.norm(tr.normals, axis=1) - 1).max() <= 1e-12
        assert abs(tr.weights.sum() - tr.perimeter) <= 1e-12


def test_sigma_weight_sum_matches_inscribed_polygon(mesh_05):
    # 126-gon inscribed in the unit circle
    n = 126
    polygon = 2 * n * np.sin(np.pi / n)
    w = extract_boundary_trace(mesh_05, Marker.SIGMA).weights.sum()
    assert w == pytest.approx(polygon, abs=1e-12)
    assert abs(w - 2 * np.pi) <= 2e-3


def test_trace_of_broken_loop_raises():
    mesh = annulus(0.5, 0.1)
    keep = [i for i, m in enumerate(mesh.edge_markers) if m is Marker.SIGMA][1:]
    keep += [i for i, m in enumerate(mesh.edge_markers) if m is Marker.GAMMA]
    broken = Mesh(mesh.nodes, mesh.triangles, mesh.edges[keep], [mesh.edge_markers[i] for i in keep])
    with pytest.raises(TopologyError):
        extract_boundary_trace(broken, Marker.SIGMA)


def test_deform_zero_is_identity(mesh_09):
    moved = deform_mesh(mesh_09, np.zeros((mesh_09.n_nodes, 2)), 3.7)
    assert np.array_equal(moved.nodes, mesh_09.nodes)
    assert np.array_equal(moved.triangles, mesh_09.triangles)


def test_deform_radial_gamma_displacement(mesh_09):
    tr = extract_boundary_trace(mesh_09, Marker.GAMMA)
    gamma = mesh_09.boundary_nodes(Marker.GAMMA)
    unit = mesh_09.nodes[gamma] / np.linalg.norm(mesh_09.nodes[gamma], axis=1)[:, None]
    v = harmonic_extension(mesh_09, -0.1 * unit)
    moved = deform_mesh(mesh_09, v, 1.0)
    radii = np.linalg.norm(moved.nodes[tr.node_ids], axis=1)
    assert np.abs(radii - 0.8).max() <= 1e-12


def test_deform_flip_raises(mesh_09):
    v = np.zeros((mesh_09.n_nodes, 2))
    g = mesh_09.boundary_nodes(Marker.GAMMA)[0]
    v[g] = 0.3 * mesh_09.nodes[g]  # pushed past the next ring
    with pytest.raises(ReversedTriangleError) as info:
        deform_mesh(mesh_09, v, 1.0)
    assert info.value.min_area < 0


def test_deform_rejects_sigma_motion(mesh_09):
    v = np.zeros((mesh_09.n_nodes, 2))
    v[mesh_09.boundary_nodes(Marker.SIGMA)[0]] = (0.01, 0.0)
    with pytest.raises(ValueError):
        deform_mesh(mesh_09, v, 1.0)


def test_min_signed_area_reference_triangle():
    m = Mesh(np.array([[0, 0], [1, 0], [0, 1.0]]), np.array([[0, 1, 2]]), np.zeros((0, 2)), [])
    assert min_signed_area(m) == 0.5


def test_min_signed_area_positive_then_negative_after_unguarded_flip(mesh_09):
    assert min_signed_area(mesh_09) > 0
    nodes = mesh_09.nodes.copy()
    g = mesh_09.boundary_nodes(Marker.GAMMA)[0]
    nodes[g] *= 1.3
    flipped = Mesh(nodes, mesh_09.triangles, mesh_09.edges, mesh_09.edge_markers)
    assert min_signed_area(flipped) < 0


def test_hausdorff_concentric():
    a = trace_from_polyline(circle(0.9, 400))
    b = trace_from_polyline(circle(0.5, 400))
    assert hausdorff_distance(a, b) == pytest.approx(0.4, abs=1e-3)


def test_hausdorff_identity():
    a = trace_from_polyline(kite(200))
    assert hausdorff_distance(a, a) == 0.0


def test_hausdorff_translated_unit_circle():
    a = trace_from_polyline(circle(1.0, 512))
    b = trace_from_polyline(circle(1.0, 512, center=(0.1, 0.0)))
    assert hausdorff_distance(a, b) == pytest.approx(0.1, abs=1e-3)


def test_mesh_file_round_trip(tmp_path, mesh_05):
    path = tmp_path / "m.txt"
    write_mesh(mesh_05, path)
    back = read_mesh(path)
    assert np.array_equal(back.nodes, mesh_05.nodes)
    assert np.array_equal(back.triangles, mesh_05.triangles)
    assert np.array_equal(back.edges, mesh_05.edges)
    assert back.edge_markers == mesh_05.edge_markers


def test_mesh_file_errors_carry_line(tmp_path, mesh_05):
    path = tmp_path / "m.txt"
    write_mesh(mesh_05, path)
    lines = path.read_text().splitlines()
    lines[5] = "4 0.1 oops"
    path.write_text("\n".join(lines))
    with pytest.raises(ParseError, match="line 6"):
        read_mesh(path)
    path.write_text("not a mesh\n")
    with pytest.raises(ParseError, match="line 1"):
        read_mesh(path)
