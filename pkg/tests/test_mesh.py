import numpy as np
import pytest

from boussinesq2d.mesh import (TriMesh, boundary_nodes,
                               build_periodic_map, build_rect_mesh,
                               edge_triangle_counts, element_geometry)

from conftest import tri_area


def test_smallest_mesh():
    m = build_rect_mesh(0, 1, 0, 1, 1, 1)
    assert m.n_nodes == 4
    assert len(m.triangles) == 2
    assert len(m.boundary_edges) == 4


def test_counting_formulas():
    m = build_rect_mesh(-40, 40, -40, 40, 160, 160)
    assert m.n_nodes == 161 * 161 == 25921
    assert len(m.triangles) == 2 * 160 * 160 == 51200


@pytest.mark.parametrize("nx,ny,ext", [(3, 5, (0, 2, -1, 1)),
                                       (7, 2, (-3, 4, 0, 10))])
def test_areas_partition_domain(nx, ny, ext):
    xmin, xmax, ymin, ymax = ext
    m = build_rect_mesh(xmin, xmax, ymin, ymax, nx, ny)
    total = sum(abs(tri_area(m.nodes[t])) for t in m.triangles)
    assert total == pytest.approx((xmax - xmin) * (ymax - ymin), abs=1e-12)


def test_triangles_counterclockwise():
    m = build_rect_mesh(0, 3, 0, 2, 3, 2)
    for t in m.triangles:
        assert tri_area(m.nodes[t]) > 0


def test_reference_triangle_geometry():
    m = TriMesh(nodes=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                triangles=np.array([[0, 1, 2]]), boundary_edges=[])
    g = element_geometry(m, 0)
    assert g.area == pytest.approx(0.5)
    np.testing.assert_allclose(g.grad_lambda,
                               [[-1, -1], [1, 0], [0, 1]], atol=1e-14)


def test_geometry_similarity_scaling():
    pts = np.array([[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]])
    for s in (2.0, 0.25):
        m1 = TriMesh(nodes=pts, triangles=np.array([[0, 1, 2]]),
                     boundary_edges=[])
        m2 = TriMesh(nodes=s * pts, triangles=np.array([[0, 1, 2]]),
                     boundary_edges=[])
        g1, g2 = element_geometry(m1, 0), element_geometry(m2, 0)
        assert g2.area == pytest.approx(s * s * g1.area)
        np.testing.assert_allclose(g2.grad_lambda, g1.grad_lambda / s,
                                   atol=1e-14)


def test_gradients_partition_of_unity():
    rng = np.random.default_rng(7)
    pts = rng.random((3, 2))
    if tri_area(pts) < 0:
        pts = pts[[0, 2, 1]]
    m = TriMesh(nodes=pts, triangles=np.array([[0, 1, 2]]), boundary_edges=[])
    g = element_geometry(m, 0)
    np.testing.assert_allclose(g.grad_lambda.sum(axis=0), 0.0, atol=1e-12)


def test_periodic_unit_cell_corners_identified():
    m = build_periodic_map(build_rect_mesh(0, 1, 0, 1, 1, 1))
    # all four corners collapse onto a single master
    masters = {m.periodic_map.get(i, i) for i in range(4)}
    assert len(masters) == 1
    assert len(m.periodic_map) == 3


@pytest.mark.parametrize("N", [2, 5, 8])
def test_periodic_effective_dofs(N):
    m = build_periodic_map(build_rect_mesh(0, 1, 0, 1, N, N))
    eff = m.n_nodes - len(m.periodic_map)
    assert eff == N * N


def test_periodic_x_only_leaves_top_bottom_unpaired():
    m = build_periodic_map(build_rect_mesh(0, 1, 0, 1, 4, 4),
                           directions="x")
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    for slave in m.periodic_map:
        assert x[slave] == pytest.approx(1.0)
    # interior top/bottom nodes stay independent
    top_interior = np.where((y == 1.0) & (x > 0) & (x < 1))[0]
    assert not any(i in m.periodic_map for i in top_interior)


def test_edge_triangle_counts_conforming():
    m = build_rect_mesh(0, 1, 0, 1, 5, 3)
    counts = edge_triangle_counts(m)
    assert set(counts.values()) <= {1, 2}
    boundary = {tuple(sorted((a, b))) for a, b, _ in m.boundary_edges}
    for edge, c in counts.items():
        assert c == (1 if edge in boundary else 2)


def test_boundary_nodes_by_label():
    m = build_rect_mesh(-1, 1, -1, 1, 4, 4)
    left = boundary_nodes(m, labels={"left"})
    assert np.all(m.nodes[left, 0] == -1)
    assert len(boundary_nodes(m)) == 16  # perimeter of a 4x4 grid


def test_degenerate_rect_rejected():
    with pytest.raises(ValueError):
        build_rect_mesh(0, 0, 0, 1, 2, 2)
    with pytest.raises(ValueError):
        build_rect_mesh(0, 1, 0, 1, 0, 2)
