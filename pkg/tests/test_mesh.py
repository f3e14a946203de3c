import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nondivdg.coefficients import CircularArc, DomainSpec, get_domain
from nondivdg.errors import ResolutionError, SnapError
from nondivdg.fe import boundary_face_quadrature
from nondivdg.mesh import (CurvedMesh, element_areas, generate_affine_mesh, map_eval,
                           mesh_sequence, read_mesh, refine, snap_boundary, validate,
                           write_mesh)
from nondivdg.analysis import eoc
from nondivdg.quadrature import edge_to_reference


def single_element(nodes, mids=None, domain=None):
    nodes = np.asarray(nodes, float)
    elems = np.array([[0, 1, 2]])
    if mids is None:
        mids = 0.5 * (nodes[[0, 1, 2]] + nodes[[1, 2, 0]])
    return CurvedMesh(domain or get_domain("square"), nodes, elems, mids[None],
                      np.zeros((0, 3), dtype=np.int64))


def boundary_node_radii(mesh):
    return np.linalg.norm(mesh.nodes[mesh.boundary_vertices()], axis=1)


def test_disk_boundary_vertices_on_circle():
    m = generate_affine_mesh(get_domain("disk"), 1.0)
    np.testing.assert_allclose(boundary_node_radii(m), 1.0, atol=1e-12)


@pytest.mark.parametrize("name", ["disk", "square", "keyhole"])
@pytest.mark.parametrize("h", [0.5, 0.3])
def test_h_within_factor_two(name, h):
    m = generate_affine_mesh(get_domain(name), h)
    assert 0.5 * h <= m.h <= 2.0 * h


def test_disk_boundary_count_doubles():
    d = get_domain("disk")
    n1 = len(generate_affine_mesh(d, 0.5).boundary_vertices())
    n2 = len(generate_affine_mesh(d, 0.25).boundary_vertices())
    assert abs(n2 - 2 * n1) <= 2


def test_square_is_affine():
    m = mesh_sequence(get_domain("square"), 0.3, 2)[-1]
    rep = validate(m)
    assert rep.max_C_K == 0.0 and rep.chart_mismatch < 1e-15
    assert not m.delta.any()


def test_resolution_error():
    with pytest.raises(ResolutionError):
        generate_affine_mesh(get_domain("disk"), 10.0)


def test_snap_chord_midpoint():
    arc = get_domain("disk").portion(1)
    np.testing.assert_allclose(arc.project(np.array([0.5, 0.5])), [1 / np.sqrt(2)] * 2,
                               atol=1e-15)


def test_snap_moves_only_boundary_midpoints(disk_meshes):
    m = disk_meshes[0]
    bf = m.boundary_faces
    X = m.nodes[m.elements]
    chord = 0.5 * (X[:, [0, 1, 2]] + X[:, [1, 2, 0]])
    on_bdry = np.zeros((m.n_elements, 3), dtype=bool)
    on_bdry[bf[:, 0], bf[:, 1]] = True
    np.testing.assert_allclose(m.midpoints[bf[:, 0], bf[:, 1]],
                               m.domain.portion(1).project(chord[bf[:, 0], bf[:, 1]]))
    np.testing.assert_array_equal(m.midpoints[~on_bdry], chord[~on_bdry])


def test_snap_keeps_flat_midpoints(keyhole_meshes):
    m = keyhole_meshes[0]
    bf = m.boundary_faces
    flat = bf[bf[:, 2] != 1]
    assert len(flat)
    assert not m.delta[flat[:, 0], flat[:, 1]].any()


def test_snap_failure_names_element():
    # a flat sliver under a 60 degree arc cannot carry the curved edge
    d = DomainSpec("arc", (CircularArc(1),))
    c = np.sqrt(3) / 2
    nodes = [[-0.5, -c], [0.5, -c], [0.0, -0.8]]
    mids = 0.5 * (np.array(nodes)[[0, 1, 2]] + np.array(nodes)[[1, 2, 0]])
    m = CurvedMesh(d, nodes, np.array([[0, 1, 2]]), mids[None], np.array([[0, 0, 1]]))
    with pytest.raises(SnapError) as exc:
        snap_boundary(m)
    assert exc.value.element == 0


def test_refine_counts_and_h(disk_meshes):
    for a, b in zip(disk_meshes[:-1], disk_meshes[1:]):
        assert b.n_elements == 4 * a.n_elements
        assert 1.8 <= a.h / b.h <= 2.5
        np.testing.assert_allclose(boundary_node_radii(b), 1.0, atol=1e-12)


def test_keyhole_portions_and_counts(keyhole_meshes):
    m0, m1 = keyhole_meshes
    assert set(np.unique(m0.boundary_faces[:, 2])) == {1, 2, 3, 4}
    assert m1.n_elements == 4 * m0.n_elements
    assert element_areas(m1).sum() == pytest.approx(
        np.pi * 0.75 + 0.5 + np.sqrt(2) * (3 - 1 / np.sqrt(2)), rel=1e-4)


def test_map_eval_identity_and_affine():
    m = single_element([[0, 0], [1, 0], [0, 1]])
    x, J, H = map_eval(m.element_map(0), np.array([0.3, 0.2]))
    np.testing.assert_allclose(x, [0.3, 0.2])
    np.testing.assert_allclose(J, np.eye(2))
    assert not H.any()


def test_map_jacobian_fd(disk_meshes):
    m = disk_meshes[0]
    k = int(np.argmax(m.C_K))
    emap = m.element_map(k)
    xh = np.array([0.2, 0.3])
    _, J, H = map_eval(emap, xh)
    eps = 1e-5
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        xp, Jp, _ = map_eval(emap, xh + e)
        xm, Jm, _ = map_eval(emap, xh - e)
        np.testing.assert_allclose((xp - xm) / (2 * eps), J[:, j], atol=1e-7)
        np.testing.assert_allclose((Jp - Jm) / (2 * eps), H[:, :, j], atol=1e-7)


def test_curved_mesh_invariants(disk_meshes):
    reports = [validate(m) for m in disk_meshes]
    for r in reports:
        assert r.max_C_K < 1 and r.min_det > 0 and r.neighbor_ratio <= 4
    ck = [r.max_C_K for r in reports]
    assert all(b <= a for a, b in zip(ck[:-1], ck[1:]))


def test_chart_mismatch_decay(disk_meshes):
    mm = [validate(m).chart_mismatch for m in disk_meshes]
    ratios = [a / b for a, b in zip(mm[:-1], mm[1:])]
    # at least the cubic (8x) rate; the measured rate is quartic (about 16x)
    assert min(ratios) >= 7.0


def test_area_converges_to_pi():
    ms = mesh_sequence(get_domain("disk"), 0.5, 4)
    errs = [(m.h, abs(element_areas(m).sum() - np.pi)) for m in ms]
    assert min(eoc(errs)) >= 2.8


@pytest.mark.parametrize("name", ["disk", "keyhole"])
def test_interior_faces_conform(name):
    m = mesh_sequence(get_domain(name), 0.5, 1)[0]
    f = m.interior_faces
    s = np.linspace(0, 1, 5)
    xa, _, _ = m.map(f[:, 0], edge_to_reference(f[:, 2, None], s[None]))
    xb, _, _ = m.map(f[:, 1], edge_to_reference(f[:, 3, None], 1 - s[None]))
    assert np.max(np.abs(xa - xb)) < 1e-12


def test_boundary_faces_lie_in_one_portion(keyhole_meshes):
    m = keyhole_meshes[1]
    q = boundary_face_quadrature(m, 6)
    for pid in (1, 2, 3, 4):
        sel = q.portion == pid
        d = m.domain.portion(pid).distance(q.points[sel])
        assert d.max() < 1e-3


@pytest.mark.parametrize("name", ["disk", "keyhole", "square"])
def test_mesh_roundtrip(tmp_path, name):
    m = mesh_sequence(get_domain(name), 0.5, 2)[-1]
    p1, p2 = tmp_path / "a.dgmesh", tmp_path / "b.dgmesh"
    write_mesh(m, p1)
    m2 = read_mesh(p1, m.domain)
    write_mesh(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(m.nodes, m2.nodes)
    np.testing.assert_array_equal(m.midpoints, m2.midpoints)
    np.testing.assert_array_equal(m.boundary_faces, m2.boundary_faces)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 0.8))
def test_generated_disk_meshes_valid(h):
    m = mesh_sequence(get_domain("disk"), h, 1)[0]
    r = validate(m)
    assert r.max_C_K < 1 and r.min_det > 0 and r.neighbor_ratio <= 4
    assert r.n_interior_faces * 2 + r.n_boundary_faces == 3 * r.n_elements


def test_refine_preserves_interior_straightness(disk_meshes):
    m = refine(disk_meshes[0])
    bf = set(map(tuple, m.boundary_faces[:, :2]))
    curved = {(k, e) for k, e in zip(*np.nonzero(np.abs(m.delta).sum(-1) > 0))}
    assert curved <= bf
