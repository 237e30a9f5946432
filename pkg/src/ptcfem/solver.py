"""Pseudo-transient continuation iterations with targeted regularization.

The solver family damps Newton's method for g(x) = 0 by time-stepping
``d(Rx)/dt + g(x) = 0`` to steady state with a growing step ``1/alpha_n``.
Five time discretizations are provided:

``backward_euler``          (alpha R + J(x^n)) w = -g
``newmark``                 (alpha R + gamma J(x^n)) w = -g
``sigma_split_newmark``     (alpha R + gamma [(1-sigma) J(xbar) + sigma J(x^n)]) w = -g
``normal_equations_be``     (alpha R^T R + J^T J) w = -J^T g
``normal_equations_newmark``(alpha R^T R + gamma J^T J) w = -J^T g

with x^{n+1} = x^n + w.  The sigma-split variant freezes a small fraction
of the Jacobian at a fixed point with benign spectrum, which suppresses
the iterate-to-iterate fluctuation seen on coarse meshes; for gamma > 1 the
residual then contracts q-linearly at the asymptotic rate 1 - 1/gamma.

``R`` penalizes curvature only where the initial iterate looks rough: it is
the Laplacian stiffness restricted to vertices whose surrounding flux jumps
exceed a median-based threshold (see :func:`regularizer`).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .assembly import (AssemblyError, assemble_jacobian, assemble_residual,
                       edge_jump_integrals)
from .fields import DiscreteField, add_free, zero_field
from .linalg import (SingularMatrixError, add_scaled, direct_solve,
                     transpose_apply, transpose_product)

BACKWARD_EULER = "backward_euler"
NEWMARK = "newmark"
SIGMA_SPLIT_NEWMARK = "sigma_split_newmark"
NORMAL_EQUATIONS_BE = "normal_equations_be"
NORMAL_EQUATIONS_NEWMARK = "normal_equations_newmark"
VARIANTS = (BACKWARD_EULER, NEWMARK, SIGMA_SPLIT_NEWMARK,
            NORMAL_EQUATIONS_BE, NORMAL_EQUATIONS_NEWMARK)

CONVERGED = "converged"
STALLED_ACCEPT = "stalled_accept"
FAILED = "failed"


@dataclass(frozen=True)
class SolverConfig:
    variant: str = SIGMA_SPLIT_NEWMARK
    gamma: float = 10.0
    sigma0: float = 0.9
    K0: float = 2000.0
    tol: float = 1e-7
    rate_slack: float = 2.0       # M in the accepted rate 1 - 1/(M gamma)
    max_iterations: int = 50
    xbar_choice: str = "zero"     # or "previous_solution"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not 0 < self.sigma0 < 1:
            raise ValueError("sigma0 must lie in (0, 1)")
        if self.K0 <= 0 or self.tol <= 0:
            raise ValueError("K0 and tol must be positive")
        if self.rate_slack <= 1:
            raise ValueError("rate_slack must exceed 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.xbar_choice not in ("zero", "previous_solution"):
            raise ValueError(f"unknown xbar_choice {self.xbar_choice!r}")

    @property
    def accepted_rate(self):
        return 1.0 - 1.0 / (self.rate_slack * self.gamma)


@dataclass
class SolverState:
    alpha: float
    beta: float = 1.0
    sigma: float = 1.0
    residual_history: list = field(default_factory=list)
    previous_final_residual: Optional[float] = None

    @property
    def iteration(self):
        return len(self.residual_history) - 1


@dataclass
class SolveOutcome:
    exit_code: str
    iterate: DiscreteField
    residual_history: np.ndarray
    sigma_final: float
    gamma_used: float
    alphas: np.ndarray
    betas: np.ndarray
    sigmas: np.ndarray
    failure_mode: Optional[str] = None   # "singular" | "max_iterations" | "nonfinite"

    @property
    def final_residual(self):
        return float(self.residual_history[-1])

    @property
    def first_residual(self):
        return float(self.residual_history[0])

    @property
    def final_ratio(self):
        h = self.residual_history
        if len(h) < 2 or h[-2] == 0:
            return float("nan")
        return float(h[-1] / h[-2])

    @property
    def iterations(self):
        return len(self.residual_history) - 1


def regularizer(mesh, u0, problem, laplacian):
    """Localized Laplacian penalty D R_global D built from flux jumps.

    Per-element jump indicators ``zeta_T`` of the initial iterate select the
    vertices to regularize: with ``psi~ = sqrt(median zeta_T)`` and
    ``psi = psi~^(1/2) if psi~ > 1 else psi~``, a vertex stays unpenalized
    exactly when every element containing it satisfies ``zeta_T <= psi``.
    The result is positive semidefinite on the free vertices.
    """
    zeta = np.sqrt(mesh.diameters * edge_jump_integrals(mesh, u0, problem).sum(axis=1))
    psi_tilde = np.sqrt(np.median(zeta))
    psi = np.sqrt(psi_tilde) if psi_tilde > 1.0 else psi_tilde
    noisy = zeta > psi
    active = np.zeros(mesh.n_vertices, dtype=bool)
    active[mesh.elements[noisy].ravel()] = True
    d = active[mesh.free_vertices].astype(float)
    D = sp.diags(d)
    R = (D @ laplacian @ D).tocsr()
    R.sort_indices()
    return R


def step_system(variant, alpha, R, J_n, residual, *, gamma=1.0, sigma=1.0,
                J_bar=None):
    """Solve one continuation step for the update vector w."""
    if variant == BACKWARD_EULER:
        A = add_scaled(R, J_n, alpha, 1.0)
        rhs = -residual
    elif variant == NEWMARK:
        A = add_scaled(R, J_n, alpha, gamma)
        rhs = -residual
    elif variant == SIGMA_SPLIT_NEWMARK:
        if J_bar is None:
            raise ValueError("sigma_split_newmark requires J_bar")
        blend = add_scaled(J_bar, J_n, gamma * (1.0 - sigma), gamma * sigma)
        A = add_scaled(R, blend, alpha, 1.0)
        rhs = -residual
    elif variant == NORMAL_EQUATIONS_BE:
        A = add_scaled(transpose_product(R), transpose_product(J_n), alpha, 1.0)
        rhs = -transpose_apply(J_n, residual)
    elif variant == NORMAL_EQUATIONS_NEWMARK:
        A = add_scaled(transpose_product(R), transpose_product(J_n), alpha, gamma)
        rhs = -transpose_apply(J_n, residual)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return direct_solve(A, rhs)


def update_sigma(residual_norm, config):
    """sigma = max(sigma0, 1 - |g|/K0), sent toward one as the residual decays."""
    if residual_norm < 0:
        raise ValueError("residual norm must be nonnegative")
    return max(config.sigma0, 1.0 - residual_norm / config.K0)


def update_alpha(state, new_residual):
    """Next (alpha, beta): beta tracks the residual ratio with clamps.

    beta_n = r_n / r_{n-1}, corrected to beta_{n-1}/2 <= beta_n <= 1 when the
    residual decreased and beta_n <= 2 beta_{n-1} when it increased; then
    alpha_n = beta_n * r_n.  Keeps alpha_n <= r_n on decreasing histories.
    """
    if not state.residual_history:
        raise ValueError("residual history is empty")
    r_prev = state.residual_history[-1]
    raw = new_residual / r_prev if r_prev > 0 else 1.0
    if new_residual < r_prev:
        beta = min(max(raw, state.beta / 2.0), 1.0)
    elif new_residual > r_prev:
        beta = min(raw, 2.0 * state.beta)
    else:
        beta = raw
    return beta * new_residual, beta


def check_exit(state, config, initial_residual):
    """Evaluate the exit criteria after an iterate has been computed.

    Returns ``converged`` when the residual meets the tolerance;
    ``stalled_accept`` when the residual is decreasing, has dropped below
    both the initial residual here and the previous partition's final
    residual, contracts faster than the accepted rate 1 - 1/(M gamma), and
    the contraction is slowing down; ``failed`` past the iteration budget;
    otherwise None to continue.
    """
    h = state.residual_history
    if not h:
        return None
    r = h[-1]
    if r <= config.tol:
        return CONVERGED
    if len(h) >= 3:
        r_n, r_nm1 = h[-2], h[-3]
        bound = initial_residual
        if state.previous_final_residual is not None:
            bound = min(bound, state.previous_final_residual)
        if (r < r_n and r_n < bound
                and r / r_n < config.accepted_rate
                and r / r_n > r_n / r_nm1):
            return STALLED_ACCEPT
    if len(h) - 1 > config.max_iterations:
        return FAILED
    return None


def solve_on_partition(mesh, problem, x0, config, R, previous_final_residual=None):
    """Run the continuation iteration on one mesh until an exit criterion fires.

    The frozen Jacobian of the sigma-split variant is assembled once, at the
    zero field or at ``x0`` depending on ``config.xbar_choice``.  A singular
    or non-finite step is classified as a failed exit, and failed exits
    return the zero field so the caller restarts from scratch.
    """
    if x0.values.shape != (mesh.n_vertices,):
        raise ValueError("initial iterate does not conform to the mesh")
    J_bar = None
    if config.variant == SIGMA_SPLIT_NEWMARK:
        xbar = zero_field(mesh) if config.xbar_choice == "zero" else x0
        J_bar = assemble_jacobian(mesh, xbar, problem)

    x = x0
    g = assemble_residual(mesh, x, problem)
    r0 = float(np.linalg.norm(g))
    state = SolverState(alpha=r0, beta=1.0, sigma=update_sigma(r0, config),
                        residual_history=[r0],
                        previous_final_residual=previous_final_residual)
    alphas, betas, sigmas = [r0], [1.0], [state.sigma]
    exit_code, failure = None, None

    exit_code = check_exit(state, config, r0)
    while exit_code is None:
        try:
            J = assemble_jacobian(mesh, x, problem)
            w = step_system(config.variant, state.alpha, R, J, g,
                            gamma=config.gamma, sigma=state.sigma, J_bar=J_bar)
            x = add_free(x, w)
            g = assemble_residual(mesh, x, problem)
        except SingularMatrixError:
            exit_code, failure = FAILED, "singular"
            break
        except AssemblyError:
            exit_code, failure = FAILED, "nonfinite"
            break
        r = float(np.linalg.norm(g))
        if not np.isfinite(r):
            exit_code, failure = FAILED, "nonfinite"
            break
        state.alpha, state.beta = update_alpha(state, r)
        state.residual_history.append(r)
        state.sigma = update_sigma(r, config)
        alphas.append(state.alpha)
        betas.append(state.beta)
        sigmas.append(state.sigma)
        exit_code = check_exit(state, config, r0)
        if exit_code == FAILED:
            failure = "max_iterations"

    iterate = zero_field(mesh) if exit_code == FAILED else x
    return SolveOutcome(
        exit_code=exit_code,
        iterate=iterate,
        residual_history=np.array(state.residual_history),
        sigma_final=sigmas[-1],
        gamma_used=config.gamma,
        alphas=np.array(alphas),
        betas=np.array(betas),
        sigmas=np.array(sigmas),
        failure_mode=failure)
