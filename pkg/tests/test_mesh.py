import numpy as np
import pytest

from ptcfem.fields import DiscreteField, nodal_interpolant, zero_field
from ptcfem.mesh import (MarkedSet, Mesh, MeshError, crisscross_mesh,
                         element_diameter, interpolate, mesh_to_text, refine,
                         unit_square_mesh)


def assert_conforming(mesh):
    counts = np.bincount(mesh.element_edges.ravel(),
                         minlength=mesh.edges.shape[0])
    assert counts.max() <= 2
    assert np.all(mesh.signed_areas > 0)


def test_unit_square_minimal_split():
    mesh = unit_square_mesh(1)
    assert mesh.n_elements == 2
    assert mesh.n_vertices == 4


def test_unit_square_n2_edge_sharing():
    mesh = unit_square_mesh(2)
    assert mesh.n_elements == 8
    assert mesh.n_vertices == 9
    counts = np.bincount(mesh.element_edges.ravel(),
                         minlength=mesh.edges.shape[0])
    # hand enumeration: 16 edges, 8 of them interior, each shared by exactly 2
    assert mesh.edges.shape[0] == 16
    assert np.sum(counts == 2) == 8
    assert np.sum(counts == 1) == 8


def test_crisscross_reproduces_144_element_start():
    mesh = crisscross_mesh(6)
    assert mesh.n_elements == 144
    assert mesh.n_vertices == 85


def test_boundary_flags_match_geometry():
    for mesh in (unit_square_mesh(3), crisscross_mesh(2)):
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        on_boundary = ((np.abs(x) < 1e-12) | (np.abs(x - 1) < 1e-12)
                       | (np.abs(y) < 1e-12) | (np.abs(y - 1) < 1e-12))
        assert np.array_equal(mesh.is_boundary_vertex, on_boundary)


def test_invalid_input_rejected():
    with pytest.raises(ValueError):
        unit_square_mesh(0)
    # clockwise element has negative area
    with pytest.raises(MeshError):
        Mesh(np.array([[0., 0.], [1., 0.], [0., 1.]]), np.array([[0, 2, 1]]))


def test_refine_empty_marked_is_identity():
    mesh = crisscross_mesh(2)
    fine, parentage = refine(mesh, [])
    assert fine is mesh
    assert parentage == {}


def test_refine_both_elements_of_two_triangle_square():
    mesh = unit_square_mesh(1)
    fine, parentage = refine(mesh, [0, 1])
    assert fine.n_elements == 4
    assert fine.n_vertices == 5
    assert_conforming(fine)
    # the one new vertex is the diagonal midpoint
    (vid, (a, b)), = parentage.items()
    assert np.allclose(fine.vertices[vid], [0.5, 0.5])
    assert np.allclose((mesh.vertices[a] + mesh.vertices[b]) / 2, [0.5, 0.5])
    assert np.all(fine.generation == 1)


def test_refine_single_element_stays_conforming():
    mesh = crisscross_mesh(2)
    fine, _ = refine(mesh, [3])
    assert_conforming(fine)
    assert fine.n_elements > mesh.n_elements


def test_marked_elements_always_bisected():
    mesh = crisscross_mesh(3)
    marked = [0, 5, 17]
    areas = mesh.signed_areas[marked]
    fine, _ = refine(mesh, marked)
    # no child has the full area of a marked parent
    assert fine.signed_areas.max() <= mesh.signed_areas.max()
    for t, area in zip(marked, areas):
        centroid = mesh.vertices[mesh.elements[t]].mean(axis=0)
        dists = np.linalg.norm(
            fine.vertices[fine.elements].mean(axis=1) - centroid, axis=1)
        child = np.argmin(dists)
        assert fine.signed_areas[child] < area - 1e-15


def test_generation_increments_by_one_per_bisection():
    mesh = unit_square_mesh(2)
    fine, _ = refine(mesh, range(mesh.n_elements))
    assert set(fine.generation) <= {1, 2}
    assert np.all(fine.generation >= 1)


def test_refinement_keeps_conformity_under_random_marking(rng):
    mesh = crisscross_mesh(2)
    max_ratio = []
    for _ in range(6):
        k = max(1, mesh.n_elements // 5)
        marked = rng.choice(mesh.n_elements, size=k, replace=False)
        mesh, _ = refine(mesh, marked)
        assert_conforming(mesh)
        max_ratio.append(float((mesh.diameters / mesh.inradii()).max()))
    # shape regularity: the worst aspect ratio settles after the first rounds
    assert max(max_ratio[2:]) <= max(max_ratio[:2]) + 1e-9


def test_element_diameter_values():
    mesh = unit_square_mesh(1)
    assert element_diameter(mesh, 0) == pytest.approx(np.sqrt(2.0))
    fine, _ = refine(mesh, [0, 1])
    for t in range(fine.n_elements):
        assert element_diameter(fine, t) == pytest.approx(1.0)
    with pytest.raises(MeshError):
        element_diameter(mesh, 7)


def test_interpolate_zero_and_midpoint():
    mesh = crisscross_mesh(3)
    fine, parentage = refine(mesh, [0])
    z = interpolate(mesh, fine, parentage, zero_field(mesh))
    assert np.all(z.values == 0)

    # the first cell's hypotenuse joins (0,0)-(1/3,0); find a refinement whose
    # split edge has two interior endpoints to check the midpoint average
    interior_edge_elems = []
    for t in range(mesh.n_elements):
        k = mesh.refinement_edge[t]
        a, b = (mesh.elements[t, (k + 1) % 3], mesh.elements[t, (k + 2) % 3])
        if not (mesh.is_boundary_vertex[a] or mesh.is_boundary_vertex[b]):
            interior_edge_elems.append((t, a, b))
    t, a, b = interior_edge_elems[0]
    values = np.zeros(mesh.n_vertices)
    values[a], values[b] = 2.0, 4.0
    field = DiscreteField(mesh, values)
    fine, parentage = refine(mesh, [t])
    lifted = interpolate(mesh, fine, parentage, field)
    new_vid = [v for v, pair in parentage.items() if set(pair) == {a, b}][0]
    assert lifted.values[new_vid] == pytest.approx(3.0)


def test_interpolate_reproduces_piecewise_linear(rng):
    mesh = crisscross_mesh(2)
    field = DiscreteField(mesh, rng.normal(size=mesh.n_vertices))
    fine, parentage = refine(mesh, rng.choice(mesh.n_elements, 4, replace=False))
    lifted = interpolate(mesh, fine, parentage, field)

    def eval_p1(m, vals, pts):
        out = np.empty(len(pts))
        verts = m.vertices[m.elements]
        for i, q in enumerate(pts):
            for t in range(m.n_elements):
                p0, p1, p2 = verts[t]
                mat = np.column_stack([p1 - p0, p2 - p0])
                lam = np.linalg.solve(mat, q - p0)
                if lam.min() >= -1e-12 and lam.sum() <= 1 + 1e-12:
                    v = vals[m.elements[t]]
                    out[i] = v[0] * (1 - lam.sum()) + v[1] * lam[0] + v[2] * lam[1]
                    break
        return out

    pts = rng.uniform(0.05, 0.95, size=(12, 2))
    coarse_vals = eval_p1(mesh, field.values, pts)
    fine_vals = eval_p1(fine, lifted.values, pts)
    assert np.allclose(coarse_vals, fine_vals, atol=1e-12)


def test_interpolate_rejects_wrong_length():
    mesh = crisscross_mesh(2)
    other = crisscross_mesh(3)
    fine, parentage = refine(mesh, [0])
    with pytest.raises(ValueError):
        interpolate(mesh, fine, parentage, zero_field(other))


def test_affine_interpolant_boundary_forced_to_zero():
    mesh = crisscross_mesh(2)
    field = nodal_interpolant(mesh, lambda x, y: x + y)
    assert np.all(field.values[mesh.is_boundary_vertex] == 0)


def test_mesh_dump_format():
    mesh = unit_square_mesh(1)
    text = mesh_to_text(mesh)
    lines = text.strip().split("\n")
    assert lines[0] == "vertices 4"
    assert lines[1] == "elements 2"
    assert len(lines) == 2 + 4 + 2
    x, y, flag = lines[2].split()
    assert flag in ("0", "1")
    assert len(lines[-1].split()) == 4  # v0 v1 v2 generation


def test_marked_set_deduplicates():
    ms = MarkedSet(np.array([3, 1, 3, 2]))
    assert np.array_equal(ms.elements, [1, 2, 3])
