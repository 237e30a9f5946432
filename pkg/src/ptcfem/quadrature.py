"""Quadrature rules on the reference triangle and on edges.

Weights are normalized to sum to one, so an integral over a physical
element is ``area(T) * sum(w_q * f(x_q))`` and over an edge
``length(e) * sum(w_q * f(x_q))``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # barycentric coordinates, one row per point
    weights: np.ndarray  # positive, sum to one
    order: int           # degree of polynomial exactness

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w / w.sum())


def _triangle_order4():
    # two symmetric 3-point orbits, degree-4 exactness
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = []
    wts = []
    for c, w in ((a, wa), (b, wb)):
        pts += [(1 - 2 * c, c, c), (c, 1 - 2 * c, c), (c, c, 1 - 2 * c)]
        wts += [w, w, w]
    return QuadratureRule(np.array(pts), np.array(wts), order=4)


def _edge_gauss3():
    s = np.sqrt(3.0 / 5.0) / 2.0
    nodes = np.array([0.5 - s, 0.5, 0.5 + s])
    weights = np.array([5.0, 8.0, 5.0]) / 18.0
    pts = np.column_stack([1.0 - nodes, nodes])
    return QuadratureRule(pts, weights, order=5)


TRIANGLE_RULE = _triangle_order4()
EDGE_RULE = _edge_gauss3()
