"""A posteriori indicators, split Doerfler marking, and the adaptive loop.

Each mesh level runs the continuation solver, estimates local error, marks,
and refines.  The marked set has two parts: a fine set carrying the largest
indicators and, while the solver residual is still large, a coarse set made
of the lowest-generation elements with the largest indicators.  The blend
is controlled by ``theta_C = Phi(theta)`` which approaches ``theta`` for
large residuals and fades out as the residual drops below its threshold.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .assembly import (assemble_laplacian, edge_jump_integrals,
                       element_residual_sq, h1_error)
from .fields import zero_field
from .mesh import MarkedSet, interpolate, refine
from .solver import (CONVERGED, FAILED, STALLED_ACCEPT, SolveOutcome,
                     SolverConfig, regularizer, solve_on_partition)


@dataclass(frozen=True)
class IndicatorField:
    """Per-element indicators: eta includes the volume residual, zeta is the
    flux-jump part alone (eta_T >= zeta_T entrywise)."""

    eta: np.ndarray
    zeta: np.ndarray

    @property
    def eta_total(self):
        return float(np.sqrt(np.sum(self.eta ** 2)))

    @property
    def zeta_total(self):
        return float(np.sqrt(np.sum(self.zeta ** 2)))


@dataclass(frozen=True)
class AdaptiveRunConfig:
    solver: SolverConfig
    gamma0: float = 10.0
    theta: float = 0.6
    max_levels: int = 40
    coarse_split_scale: float = 100.0   # residual threshold inside Phi
    rate_tolerance: float = 0.05
    max_elements: Optional[int] = None  # desk-scale safety budget

    def __post_init__(self):
        if self.gamma0 < 1:
            raise ValueError("gamma0 must be >= 1")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.max_levels < 1:
            raise ValueError("max_levels must be positive")
        if self.coarse_split_scale <= 0:
            raise ValueError("coarse_split_scale must be positive")


@dataclass
class LevelReport:
    level: int
    n_elements: int
    max_h: float
    exit_code: str
    iterations: int
    first_residual: float
    final_residual: float
    final_ratio: float
    gamma: float
    sigma_final: float
    eta_total: float
    zeta_total: float
    h1_error: Optional[float]
    at_predicted_rate: bool
    outcome: SolveOutcome


def compute_indicators(mesh, u, problem):
    """Residual indicators eta_T^2 = h_T^2 |g(u)|_T^2 + zeta_T^2 with the
    jump part zeta_T^2 = h_T |[kappa(u) grad u . n]|^2 over the element edges."""
    h = mesh.diameters
    zeta_sq = h * edge_jump_integrals(mesh, u, problem).sum(axis=1)
    eta_sq = h ** 2 * element_residual_sq(mesh, u, problem) + zeta_sq
    return IndicatorField(eta=np.sqrt(eta_sq), zeta=np.sqrt(zeta_sq))


def phi_split(theta, final_residual, scale=100.0):
    """Split theta into (theta_C, theta_F) from the final solver residual.

    theta_C = theta * (1/2 + arctan(r/scale - pi/2) / pi), clamped to
    [0, theta]; it tends to theta for large residuals and to a small
    fraction as the residual vanishes.
    """
    if final_residual < 0:
        raise ValueError("residual must be nonnegative")
    raw = theta * (0.5 + np.arctan(final_residual / scale - np.pi / 2) / np.pi)
    theta_c = float(min(max(raw, 0.0), theta))
    return theta_c, theta - theta_c


def _greedy_prefix(order, eta_sq, target):
    """Shortest prefix of ``order`` whose eta^2 sum reaches ``target``."""
    csum = np.cumsum(eta_sq[order])
    stop = int(np.searchsorted(csum, target * (1.0 - 1e-12), side="left"))
    return order[:stop + 1]


def mark(mesh, indicators, theta_F, theta_C=0.0):
    """Split Doerfler marking.

    The fine set is the least-cardinality set carrying a theta_F fraction of
    the total squared indicator (largest indicators first).  The coarse set
    achieves the theta_C fraction scanning elements by ascending generation
    and descending indicator, so the coarsest elements with the largest
    local indicators are taken.  With theta_C > 0 the union always contains
    the global maximum-indicator element and the maximum-indicator element
    of the lowest generation.
    """
    if theta_F < 0 or theta_C < 0 or theta_F + theta_C > 1 + 1e-12:
        raise ValueError("marking fractions must be nonnegative with sum <= 1")
    eta_sq = np.asarray(indicators.eta, dtype=float) ** 2
    total = eta_sq.sum()
    if total <= 0.0:
        return MarkedSet(np.zeros(0, dtype=np.int64),
                         nothing_to_mark=theta_F + theta_C > 0)
    parts = []
    if theta_F > 0:
        order_f = np.argsort(-eta_sq, kind="stable")
        parts.append(_greedy_prefix(order_f, eta_sq, theta_F * total))
    if theta_C > 0:
        order_c = np.lexsort((-eta_sq, mesh.generation))
        parts.append(_greedy_prefix(order_c, eta_sq, theta_C * total))
        coarsest = mesh.generation == mesh.generation.min()
        best_coarse = np.flatnonzero(coarsest)[np.argmax(eta_sq[coarsest])]
        parts.append(np.array([np.argmax(eta_sq), best_coarse]))
    if not parts:
        return MarkedSet(np.zeros(0, dtype=np.int64))
    return MarkedSet(np.concatenate(parts))


def _at_predicted_rate(ratio, gamma, rate_tolerance):
    predicted = 1.0 - 1.0 / gamma
    return bool(np.isfinite(ratio) and predicted <= ratio <= predicted + rate_tolerance)


def update_gamma(gamma, outcome, rate_tolerance=0.05, rate_slack=2.0):
    """Newmark parameter update between mesh levels.

    Accepted exits at the predicted rate 1 - 1/gamma drop gamma by two;
    exits converging faster than predicted drop it by one; accepted exits
    converging slower keep it.  Failures raise gamma by one, or by two when
    the iteration budget ran out while still contracting below the accepted
    rate.  The result never falls below one.
    """
    ratio = outcome.final_ratio
    if outcome.exit_code == CONVERGED:
        if gamma > 1:
            step = -2.0 if _at_predicted_rate(ratio, gamma, rate_tolerance) else -1.0
            return max(1.0, gamma + step)
        return gamma
    if outcome.exit_code == STALLED_ACCEPT:
        predicted = 1.0 - 1.0 / gamma
        if _at_predicted_rate(ratio, gamma, rate_tolerance):
            return max(1.0, gamma - 2.0)
        if np.isfinite(ratio) and ratio < predicted:
            return max(1.0, gamma - 1.0)
        return gamma
    # failed
    q_acc = 1.0 - 1.0 / (rate_slack * gamma)
    if (outcome.failure_mode == "max_iterations"
            and np.isfinite(ratio) and ratio < q_acc):
        return gamma + 2.0
    return gamma + 1.0


def adaptive_solve(config, problem, mesh, level_callback=None):
    """Drive the solver across refinements; returns one report per level.

    Per level: build the targeted regularizer from the interpolated initial
    iterate, solve, estimate, then refine.  Converged exits mark with the
    full theta on the fine set; accepted-but-stalled exits use the Phi
    split; failed exits refine every lowest-generation element and restart
    the next level from zero.
    """
    reports = []
    x = zero_field(mesh)
    gamma = config.gamma0
    previous_final = None

    for level in range(config.max_levels):
        laplacian = assemble_laplacian(mesh)
        R = regularizer(mesh, x, problem, laplacian)
        solver_config = replace(config.solver, gamma=gamma)
        outcome = solve_on_partition(mesh, problem, x, solver_config, R,
                                     previous_final)
        u = outcome.iterate
        indicators = compute_indicators(mesh, u, problem)
        err = h1_error(mesh, u, problem.exact) if problem.exact else None
        report = LevelReport(
            level=level,
            n_elements=mesh.n_elements,
            max_h=mesh.max_h,
            exit_code=outcome.exit_code,
            iterations=outcome.iterations,
            first_residual=outcome.first_residual,
            final_residual=outcome.final_residual,
            final_ratio=outcome.final_ratio,
            gamma=gamma,
            sigma_final=outcome.sigma_final,
            eta_total=indicators.eta_total,
            zeta_total=indicators.zeta_total,
            h1_error=err,
            at_predicted_rate=(outcome.exit_code == STALLED_ACCEPT
                               and _at_predicted_rate(outcome.final_ratio, gamma,
                                                      config.rate_tolerance)),
            outcome=outcome)
        reports.append(report)
        if level_callback is not None:
            level_callback(level=level, mesh=mesh, x0=x, outcome=outcome,
                           report=report)
        if level == config.max_levels - 1:
            break

        if outcome.exit_code == FAILED:
            marked = MarkedSet(
                np.flatnonzero(mesh.generation == mesh.generation.min()))
            x = zero_field(mesh)
            previous_final = None
        else:
            if outcome.exit_code == CONVERGED:
                marked = mark(mesh, indicators, theta_F=config.theta)
            else:
                theta_c, theta_f = phi_split(config.theta,
                                             outcome.final_residual,
                                             config.coarse_split_scale)
                marked = mark(mesh, indicators, theta_F=theta_f, theta_C=theta_c)
            x = u
            previous_final = outcome.final_residual
        if marked.elements.size == 0:
            break
        fine, parentage = refine(mesh, marked)
        x = interpolate(mesh, fine, parentage, x)
        mesh = fine
        gamma = update_gamma(gamma, outcome, config.rate_tolerance,
                             config.solver.rate_slack)
        if config.max_elements is not None and mesh.n_elements > config.max_elements:
            break
    return reports
