"""Conforming 2D triangulations with newest-vertex bisection refinement.

A :class:`Mesh` stores a triangulation of a polygonal domain together with
per-element refinement bookkeeping: a generation counter (number of
bisections from the initial mesh) and the local index of the edge that is
split when the element is refined next.  Meshes are immutable once built;
:func:`refine` produces a new mesh and a parentage map for the vertices it
introduces.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class MeshError(Exception):
    """Invalid triangulation or refinement bookkeeping failure."""


@dataclass
class MarkedSet:
    """Element indices selected for refinement.

    ``nothing_to_mark`` is set when marking was requested with a positive
    fraction but every indicator was zero, so the set is legitimately empty.
    """

    elements: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    nothing_to_mark: bool = False

    def __post_init__(self):
        self.elements = np.unique(np.asarray(self.elements, dtype=np.int64))


class Mesh:
    """Conforming triangulation with positive-oriented elements.

    Parameters
    ----------
    vertices : (nv, 2) array of vertex coordinates.
    elements : (ne, 3) array of vertex indices, counterclockwise.
    generation : (ne,) int array, bisection depth per element (default 0).
    refinement_edge : (ne,) int array; local edge ``k`` is the edge opposite
        local vertex ``k``.  Defaults to the longest edge of each element
        (the hypotenuse for the structured generators), which keeps
        newest-vertex bisection shape regular with finite closure.
    """

    def __init__(self, vertices, elements, generation=None, refinement_edge=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if self.elements.ndim != 2 or self.elements.shape[1] != 3:
            raise MeshError("elements must be an (ne, 3) array")
        ne = self.elements.shape[0]
        if generation is None:
            generation = np.zeros(ne, dtype=np.int64)
        self.generation = np.ascontiguousarray(generation, dtype=np.int64)
        if refinement_edge is None:
            refinement_edge = self._longest_edge_index()
        self.refinement_edge = np.ascontiguousarray(refinement_edge, dtype=np.int64)
        self._build_edges()
        self._validate()
        for arr in (self.vertices, self.elements, self.generation,
                    self.refinement_edge, self.edges, self.element_edges,
                    self.edge_elements, self.is_boundary_vertex):
            arr.flags.writeable = False

    # -- construction helpers -------------------------------------------------

    def _longest_edge_index(self):
        p = self.vertices[self.elements]
        # edge k is opposite vertex k
        lengths = np.stack(
            [np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1)
             for k in range(3)], axis=1)
        return np.argmax(lengths, axis=1).astype(np.int64)

    def _build_edges(self):
        ne = self.n_elements
        local = self.elements[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
        pairs = np.sort(local, axis=1)
        self.edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.element_edges = inverse.reshape(ne, 3).astype(np.int64)
        n_edges = self.edges.shape[0]
        counts = np.bincount(self.element_edges.ravel(), minlength=n_edges)
        if counts.max(initial=0) > 2:
            raise MeshError("edge shared by more than two elements")
        flat = self.element_edges.ravel()
        order = np.argsort(flat, kind="stable")
        owners = order // 3
        edge_elements = np.full((n_edges, 2), -1, dtype=np.int64)
        first = np.searchsorted(flat[order], np.arange(n_edges), side="left")
        edge_elements[:, 0] = owners[first]
        two = counts == 2
        edge_elements[two, 1] = owners[first[two] + 1]
        self.edge_elements = edge_elements
        boundary_edges = counts == 1
        is_boundary = np.zeros(self.n_vertices, dtype=bool)
        is_boundary[self.edges[boundary_edges].ravel()] = True
        self.is_boundary_vertex = is_boundary

    def _validate(self):
        if self.n_elements == 0:
            raise MeshError("mesh has no elements")
        if self.elements.min() < 0 or self.elements.max() >= self.n_vertices:
            raise MeshError("element vertex index out of range")
        if self.generation.shape != (self.n_elements,):
            raise MeshError("generation array has wrong length")
        if self.refinement_edge.shape != (self.n_elements,):
            raise MeshError("refinement_edge array has wrong length")
        if self.refinement_edge.min() < 0 or self.refinement_edge.max() > 2:
            raise MeshError("refinement_edge entries must be local edge indices 0..2")
        areas = self.signed_areas
        if np.any(areas <= 0):
            bad = int(np.argmin(areas))
            raise MeshError(f"element {bad} has non-positive area {areas[bad]:g}")

    # -- basic queries ---------------------------------------------------------

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def hat_gradients(self):
        """(ne, 3, 2) gradients of the three nodal hat functions per element."""
        p = self.vertices[self.elements]
        grads = np.empty((self.n_elements, 3, 2))
        for i in range(3):
            d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            grads[:, i, 0] = -d[:, 1]
            grads[:, i, 1] = d[:, 0]
        grads /= (2.0 * self.signed_areas)[:, None, None]
        return grads

    @cached_property
    def diameters(self):
        """Longest edge length of each element."""
        p = self.vertices[self.elements]
        lengths = np.stack(
            [np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1)
             for k in range(3)], axis=1)
        return lengths.max(axis=1)

    @cached_property
    def element_neighbors(self):
        """(ne, 3) neighbor across local edge k, or -1 on the boundary."""
        both = self.edge_elements[self.element_edges]
        own = np.arange(self.n_elements)[:, None]
        return np.where(both[..., 0] == own, both[..., 1], both[..., 0])

    @cached_property
    def free_vertices(self):
        return np.flatnonzero(~self.is_boundary_vertex)

    @property
    def n_free(self):
        return self.free_vertices.size

    @cached_property
    def free_index(self):
        """(nv,) map vertex id -> free-vertex index, -1 for boundary vertices."""
        idx = np.full(self.n_vertices, -1, dtype=np.int64)
        idx[self.free_vertices] = np.arange(self.n_free)
        return idx

    @property
    def max_h(self):
        return float(self.diameters.max())

    def inradii(self):
        p = self.vertices[self.elements]
        a = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        return 2.0 * self.signed_areas / (a + b + c)


def element_diameter(mesh, t):
    """Longest edge length of element ``t``."""
    if mesh.n_elements == 0 or not 0 <= t < mesh.n_elements:
        raise MeshError(f"element index {t} out of range")
    return float(mesh.diameters[t])


def unit_square_mesh(n_per_side):
    """Uniform triangulation of [0,1]^2 into 2*n^2 right triangles.

    Every grid cell is cut along its lower-left to upper-right diagonal.
    """
    n = int(n_per_side)
    if n < 1:
        raise ValueError("n_per_side must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            elements.append((ll, lr, ur))
            elements.append((ll, ur, ul))
    return Mesh(vertices, np.array(elements, dtype=np.int64))


def crisscross_mesh(n_per_side):
    """Triangulation of [0,1]^2 into 4*n^2 triangles via cell centers.

    Each grid cell gets a center vertex joined to its four corners; n=6
    gives the 144-element starting mesh used by the batch driver defaults.
    """
    n = int(n_per_side)
    if n < 1:
        raise ValueError("n_per_side must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx, cy = np.meshgrid((xs[:-1] + xs[1:]) / 2.0, (xs[:-1] + xs[1:]) / 2.0,
                         indexing="xy")
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    vertices = np.vstack([grid, centers])

    def vid(i, j):
        return j * (n + 1) + i

    n_grid = (n + 1) ** 2
    elements = []
    for j in range(n):
        for i in range(n):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            ctr = n_grid + j * n + i
            elements.append((ll, lr, ctr))
            elements.append((lr, ur, ctr))
            elements.append((ur, ul, ctr))
            elements.append((ul, ll, ctr))
    return Mesh(vertices, np.array(elements, dtype=np.int64))


def refine(mesh, marked):
    """Bisect the marked elements and close the mesh to a conforming one.

    Each marked element is bisected across its refinement edge at least
    once; neighbors are bisected recursively until no hanging nodes remain.
    Returns ``(fine_mesh, parentage)`` where ``parentage`` maps every new
    vertex index to the pair of endpoint indices whose midpoint it is.
    """
    if isinstance(marked, MarkedSet):
        idx = marked.elements
    else:
        idx = np.unique(np.asarray(list(marked), dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= mesh.n_elements):
        raise MeshError("marked set contains element indices out of range")
    if idx.size == 0:
        return mesh, {}

    ne = mesh.n_elements
    n_edges = mesh.edges.shape[0]
    ar = np.arange(ne)
    ref_eid = mesh.element_edges[ar, mesh.refinement_edge]

    marked_edge = np.zeros(n_edges, dtype=bool)
    marked_edge[ref_eid[idx]] = True
    # closure: any element with a marked edge must have its refinement edge
    # marked too; the loop grows the marked set monotonically
    for _ in range(n_edges + 1):
        has_marked = marked_edge[mesh.element_edges].any(axis=1)
        need = has_marked & ~marked_edge[ref_eid]
        if not need.any():
            break
        marked_edge[ref_eid[need]] = True
    else:
        raise MeshError("refinement closure exceeded its depth bound; "
                        "refinement-edge assignment is malformed")

    split = np.flatnonzero(marked_edge)
    edge_mid = np.full(n_edges, -1, dtype=np.int64)
    edge_mid[split] = mesh.n_vertices + np.arange(split.size)
    midpoints = mesh.vertices[mesh.edges[split]].mean(axis=1)
    new_vertices = np.vstack([mesh.vertices, midpoints])
    parentage = {int(mesh.n_vertices + i): (int(a), int(b))
                 for i, (a, b) in enumerate(mesh.edges[split])}

    k = mesh.refinement_edge
    A = mesh.elements[ar, (k + 1) % 3]
    B = mesh.elements[ar, (k + 2) % 3]
    C = mesh.elements[ar, k]
    e_ca = mesh.element_edges[ar, (k + 2) % 3]
    e_bc = mesh.element_edges[ar, (k + 1) % 3]
    r_ab = marked_edge[ref_eid]
    r_ca = marked_edge[e_ca]
    r_bc = marked_edge[e_bc]
    if np.any((r_ca | r_bc) & ~r_ab):
        raise MeshError("closure invariant violated")
    M = edge_mid[ref_eid]
    M1 = edge_mid[e_ca]
    M2 = edge_mid[e_bc]
    gen = mesh.generation

    elems, gens, refs = [], [], []

    def emit(mask, children, child_gens):
        # children: list of (3,)-tuples of index arrays; interleave per parent
        if not mask.any():
            return
        tris = [np.stack([c[0][mask], c[1][mask], c[2][mask]], axis=1)
                for c in children]
        elems.append(np.stack(tris, axis=1).reshape(-1, 3))
        gens.append(np.stack([gen[mask] + d for d in child_gens],
                             axis=1).reshape(-1))
        refs.append(np.full(mask.sum() * len(children), 2, dtype=np.int64))

    keep = ~r_ab
    if keep.any():
        elems.append(mesh.elements[keep])
        gens.append(gen[keep])
        refs.append(mesh.refinement_edge[keep])

    # single bisection of edge (A,B) at M: children (C,A,M) and (B,C,M)
    emit(r_ab & ~r_ca & ~r_bc, [(C, A, M), (B, C, M)], [1, 1])
    # first child bisected again across (C,A) at M1
    emit(r_ab & r_ca & ~r_bc, [(M, C, M1), (A, M, M1), (B, C, M)], [2, 2, 1])
    # second child bisected again across (B,C) at M2
    emit(r_ab & ~r_ca & r_bc, [(C, A, M), (M, B, M2), (C, M, M2)], [1, 2, 2])
    # both remaining edges split
    emit(r_ab & r_ca & r_bc,
         [(M, C, M1), (A, M, M1), (M, B, M2), (C, M, M2)], [2, 2, 2, 2])

    fine = Mesh(new_vertices,
                np.concatenate(elems, axis=0),
                np.concatenate(gens),
                np.concatenate(refs))
    return fine, parentage


def interpolate(coarse, fine, parentage, field):
    """Carry a nodal field from ``coarse`` onto a refinement of it.

    New vertices take the average of their parent edge's endpoint values,
    which reproduces the coarse piecewise-linear function exactly; boundary
    vertices are forced to zero.
    """
    from .fields import DiscreteField

    values = np.asarray(field.values, dtype=float)
    if values.shape != (coarse.n_vertices,):
        raise ValueError(
            f"field has {values.shape[0]} values but the source mesh has "
            f"{coarse.n_vertices} vertices")
    out = np.zeros(fine.n_vertices)
    out[:coarse.n_vertices] = values
    if parentage:
        kids = np.fromiter(parentage.keys(), dtype=np.int64, count=len(parentage))
        pa = np.array([parentage[int(k)] for k in kids], dtype=np.int64)
        out[kids] = 0.5 * (out[pa[:, 0]] + out[pa[:, 1]])
    out[fine.is_boundary_vertex] = 0.0
    return DiscreteField(fine, out)


def mesh_to_text(mesh):
    """Plain-text mesh dump: header, one vertex per line, one element per line."""
    lines = [f"vertices {mesh.n_vertices}", f"elements {mesh.n_elements}"]
    flags = mesh.is_boundary_vertex.astype(int)
    for (x, y), b in zip(mesh.vertices, flags):
        lines.append(f"{x:.17g} {y:.17g} {b}")
    for (v0, v1, v2), g in zip(mesh.elements, mesh.generation):
        lines.append(f"{v0} {v1} {v2} {g}")
    return "\n".join(lines) + "\n"


def write_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(mesh_to_text(mesh))
