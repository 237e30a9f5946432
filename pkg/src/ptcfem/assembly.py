"""P1 Lagrange assembly of the nonlinear residual, its Jacobian, and
indicator ingredients.

The weak residual of ``-div(kappa(u) grad u) + b(u).grad u - f`` against the
interior hat functions is

    g_i(u) = (kappa(u) grad u, grad phi_i) + (b(u).grad u, phi_i) - (f, phi_i)

and its linearization at ``u`` in direction ``phi_j``

    J_ij = (kappa(u) grad phi_j, grad phi_i) + (kappa'(u) phi_j grad u, grad phi_i)
         + (b(u).grad phi_j, phi_i) + (b'(u).grad u phi_j, phi_i).

Nonlinear coefficients are evaluated at quadrature points through the
interpolated value of ``u`` there.  Dirichlet vertices are eliminated: all
assembled operators live on the free vertices.
"""

import numpy as np
import scipy.sparse as sp

from .fields import DiscreteField
from .quadrature import EDGE_RULE, TRIANGLE_RULE


class AssemblyError(Exception):
    """Non-finite coefficient data encountered during assembly."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


def _check_field(mesh, u):
    if u.mesh is not mesh and u.values.shape != (mesh.n_vertices,):
        raise ValueError("field does not conform to the mesh")


def _quad_data(mesh, u):
    """Per-element quadrature data: u values, physical points, grad u."""
    lam = TRIANGLE_RULE.points                    # (nq, 3)
    p = mesh.vertices[mesh.elements]              # (ne, 3, 2)
    ue = u.values[mesh.elements]                  # (ne, 3)
    uq = ue @ lam.T                               # (ne, nq)
    xq = np.einsum("qi,nid->nqd", lam, p)         # (ne, nq, 2)
    gu = np.einsum("ni,nid->nd", ue, mesh.hat_gradients)  # (ne, 2)
    return uq, xq, gu


def _raise_nonfinite(values, what):
    bad = ~np.isfinite(values)
    if bad.any():
        elem = int(np.flatnonzero(bad.reshape(values.shape[0], -1).any(axis=1))[0])
        raise AssemblyError(f"non-finite {what} on element {elem}", element=elem)


def assemble_residual(mesh, u, problem):
    """Residual vector over free vertices."""
    _check_field(mesh, u)
    lam, w = TRIANGLE_RULE.points, TRIANGLE_RULE.weights
    uq, xq, gu = _quad_data(mesh, u)
    kq = problem.kappa(uq)
    bq = problem.b(uq)
    fq = problem.f(xq[..., 0], xq[..., 1])
    conv = bq[0] * gu[:, None, 0] + bq[1] * gu[:, None, 1]

    diff = np.einsum("nd,nid->ni", gu, mesh.hat_gradients)       # gu . grad phi_i
    term_diff = (kq @ w)[:, None] * diff
    term_mass = np.einsum("nq,q,qi->ni", conv - fq, w, lam)
    local = mesh.signed_areas[:, None] * (term_diff + term_mass)
    _raise_nonfinite(local, "residual contribution")

    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.elements.ravel(), local.ravel())
    return out[mesh.free_vertices]


def assemble_jacobian(mesh, u, problem):
    """Jacobian of the residual at ``u``, CSR over free vertices."""
    _check_field(mesh, u)
    lam, w = TRIANGLE_RULE.points, TRIANGLE_RULE.weights
    uq, xq, gu = _quad_data(mesh, u)
    kq = problem.kappa(uq)
    kpq = problem.kappa_prime(uq)
    bq = problem.b(uq)
    bpq = problem.b_prime(uq)
    grads = mesh.hat_gradients

    G = np.einsum("nid,njd->nij", grads, grads)
    K = (kq @ w)[:, None, None] * G
    diff = np.einsum("nd,nid->ni", gu, grads)
    K += np.einsum("ni,nj->nij", diff, np.einsum("nq,q,qj->nj", kpq, w, lam))
    b_dot_grad = (bq[0][:, :, None] * grads[:, None, :, 0]
                  + bq[1][:, :, None] * grads[:, None, :, 1])  # (ne, nq, 3)
    K += np.einsum("nqj,q,qi->nij", b_dot_grad, w, lam)
    bp_dot_gu = bpq[0] * gu[:, None, 0] + bpq[1] * gu[:, None, 1]
    K += np.einsum("nq,q,qi,qj->nij", bp_dot_gu, w, lam, lam)
    K *= mesh.signed_areas[:, None, None]
    _raise_nonfinite(K, "Jacobian contribution")

    rows = np.broadcast_to(mesh.elements[:, :, None], K.shape).ravel()
    cols = np.broadcast_to(mesh.elements[:, None, :], K.shape).ravel()
    full = sp.coo_matrix((K.ravel(), (rows, cols)),
                         shape=(mesh.n_vertices, mesh.n_vertices)).tocsr()
    free = mesh.free_vertices
    out = full[free][:, free].tocsr()
    out.sort_indices()
    return out


def assemble_laplacian(mesh):
    """Stiffness matrix (grad phi_j, grad phi_i) over free vertices."""
    grads = mesh.hat_gradients
    K = np.einsum("nid,njd->nij", grads, grads) * mesh.signed_areas[:, None, None]
    rows = np.broadcast_to(mesh.elements[:, :, None], K.shape).ravel()
    cols = np.broadcast_to(mesh.elements[:, None, :], K.shape).ravel()
    full = sp.coo_matrix((K.ravel(), (rows, cols)),
                         shape=(mesh.n_vertices, mesh.n_vertices)).tocsr()
    free = mesh.free_vertices
    out = full[free][:, free].tocsr()
    out.sort_indices()
    return out


def h1_error(mesh, u, exact):
    """Full H1-norm distance between the field and an exact solution."""
    if exact is None:
        raise ValueError("no exact solution available for this problem")
    _check_field(mesh, u)
    w = TRIANGLE_RULE.weights
    uq, xq, gu = _quad_data(mesh, u)
    ue = exact.u(xq[..., 0], xq[..., 1])
    ge = exact.grad(xq[..., 0], xq[..., 1])
    val = (uq - ue) ** 2
    val += (gu[:, None, 0] - ge[0]) ** 2 + (gu[:, None, 1] - ge[1]) ** 2
    return float(np.sqrt(np.sum(mesh.signed_areas * (val @ w))))


def edge_jump_integrals(mesh, u, problem):
    """(ne, 3) squared edge integrals of the normal flux jump of kappa(u) grad u.

    Entry (t, k) is the integral over the element's local edge k; boundary
    edges contribute zero.  Each interior edge shows up in both of its
    incident elements.
    """
    _check_field(mesh, u)
    ue = u.values[mesh.elements]
    gu = np.einsum("ni,nid->nd", ue, mesh.hat_gradients)   # (ne, 2)
    nb = mesh.element_neighbors                            # (ne, 3)
    interior = nb >= 0
    safe_nb = np.where(interior, nb, 0)

    # local edge k is opposite vertex k; endpoints (k+1, k+2) mod 3
    out = np.zeros((mesh.n_elements, 3))
    snodes, sw = EDGE_RULE.points[:, 1], EDGE_RULE.weights
    for k in range(3):
        a = mesh.elements[:, (k + 1) % 3]
        b = mesh.elements[:, (k + 2) % 3]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        edge = pb - pa
        length = np.linalg.norm(edge, axis=1)
        normal = np.column_stack([edge[:, 1], -edge[:, 0]]) / length[:, None]
        dgrad = gu - gu[safe_nb[:, k]]
        jump_const = np.einsum("nd,nd->n", dgrad, normal)
        # kappa varies along the edge through the (continuous) value of u
        u_edge = (1.0 - snodes)[None, :] * u.values[a][:, None] \
            + snodes[None, :] * u.values[b][:, None]
        k_sq = problem.kappa(u_edge) ** 2 @ sw
        out[:, k] = np.where(interior[:, k],
                             length * jump_const ** 2 * k_sq, 0.0)
    _raise_nonfinite(out, "edge jump")
    return out


def edge_jump(mesh, u, problem, t):
    """Squared jump integrals on the three edges of element ``t``."""
    if not 0 <= t < mesh.n_elements:
        raise ValueError(f"element index {t} out of range")
    return edge_jump_integrals(mesh, u, problem)[t]


def element_residual_sq(mesh, u, problem):
    """(ne,) squared L2 norms of the strong-form residual per element.

    On P1 elements the divergence term reduces to -kappa'(u) |grad u|^2
    since second derivatives of u vanish element-wise.
    """
    _check_field(mesh, u)
    w = TRIANGLE_RULE.weights
    uq, xq, gu = _quad_data(mesh, u)
    kpq = problem.kappa_prime(uq)
    bq = problem.b(uq)
    fq = problem.f(xq[..., 0], xq[..., 1])
    gu_sq = (gu ** 2).sum(axis=1)
    conv = bq[0] * gu[:, None, 0] + bq[1] * gu[:, None, 1]
    strong = -kpq * gu_sq[:, None] + conv - fq
    vals = mesh.signed_areas * ((strong ** 2) @ w)
    _raise_nonfinite(vals[:, None], "strong residual")
    return vals


def galerkin_solve(mesh, problem):
    """Direct solve of the linear problem kappa*const coefficients.

    Convenience for linear problems (kappa constant, b constant in s): one
    Newton step from zero lands on the Galerkin solution.
    """
    from .fields import zero_field, add_free
    from .linalg import direct_solve

    u0 = zero_field(mesh)
    g = assemble_residual(mesh, u0, problem)
    J = assemble_jacobian(mesh, u0, problem)
    return add_free(u0, direct_solve(J, -g))
