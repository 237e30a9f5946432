"""Nodal coefficient vectors of piecewise-linear functions."""

import numpy as np


class DiscreteField:
    """Vertex-indexed coefficients of a P1 function with zero boundary trace.

    The constructor copies the value array and forces entries at boundary
    vertices to exactly zero (homogeneous Dirichlet data is part of the
    representation, not a separate constraint).
    """

    __slots__ = ("mesh", "values")

    def __init__(self, mesh, values):
        values = np.array(values, dtype=np.float64)
        if values.shape != (mesh.n_vertices,):
            raise ValueError(
                f"expected {mesh.n_vertices} nodal values, got {values.shape}")
        values[mesh.is_boundary_vertex] = 0.0
        values.flags.writeable = False
        self.mesh = mesh
        self.values = values

    @property
    def free(self):
        """Values at free (interior) vertices."""
        return self.values[self.mesh.free_vertices]

    def __repr__(self):
        return f"DiscreteField(n={self.values.size})"


def zero_field(mesh):
    return DiscreteField(mesh, np.zeros(mesh.n_vertices))


def field_from_free_values(mesh, free_values):
    """Build a field from interior-vertex values, zero on the boundary."""
    free_values = np.asarray(free_values, dtype=float)
    if free_values.shape != (mesh.n_free,):
        raise ValueError(
            f"expected {mesh.n_free} free values, got {free_values.shape}")
    values = np.zeros(mesh.n_vertices)
    values[mesh.free_vertices] = free_values
    return DiscreteField(mesh, values)


def add_free(field, delta_free):
    """Return field + update, where the update lives on free vertices."""
    values = field.values.copy()
    values[field.mesh.free_vertices] += delta_free
    return DiscreteField(field.mesh, values)


def nodal_interpolant(mesh, func):
    """Field with values func(x, y) at the vertices (boundary forced to 0)."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return DiscreteField(mesh, np.asarray(func(x, y), dtype=float))


def field_to_text(field):
    return "\n".join(f"{v:.17g}" for v in field.values) + "\n"


def write_field(field, path):
    with open(path, "w") as fh:
        fh.write(field_to_text(field))
