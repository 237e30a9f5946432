"""Concrete problem definitions: coefficient callbacks and manufactured loads.

All problems have the form

    -div(kappa(u) grad u) + b(u) . grad u = f   in (0,1)^2,   u = 0 on the boundary,

with solution-dependent scalar diffusion ``kappa`` and vector convection
``b``.  Loads are built in closed form from a prescribed exact solution by
expanding the divergence:

    f = -kappa'(u*) |grad u*|^2 - kappa(u*) lap(u*) + b(u*) . grad u*.

All callbacks are vectorized over numpy arrays.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

#: Layer-sharpness values exercised in the reference computations.
DEFAULT_EPSILONS = (2e-4, 6e-4, 8e-5)


@dataclass(frozen=True)
class ExactSolution:
    u: Callable
    grad: Callable        # grad(x, y) -> array of shape (2,) + x.shape
    laplacian: Callable


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    kappa: Callable
    kappa_prime: Callable
    b: Callable           # b(s) -> array of shape (2,) + s.shape
    b_prime: Callable
    f: Callable           # f(x, y)
    exact: Optional[ExactSolution] = None
    params: dict = field(default_factory=dict)


def _sinusoid(frequency):
    w = frequency * np.pi

    def u(x, y):
        return np.sin(w * x) * np.sin(w * y)

    def grad(x, y):
        return np.stack([w * np.cos(w * x) * np.sin(w * y),
                         w * np.sin(w * x) * np.cos(w * y)])

    def laplacian(x, y):
        return -2.0 * w * w * u(x, y)

    return ExactSolution(u, grad, laplacian)


def _manufactured_load(kappa, kappa_prime, b, exact):
    def f(x, y):
        s = exact.u(x, y)
        g = exact.grad(x, y)
        return (-kappa_prime(s) * (g[0] ** 2 + g[1] ** 2)
                - kappa(s) * exact.laplacian(x, y)
                + b(s)[0] * g[0] + b(s)[1] * g[1])

    return f


def _check_positive_kappa(kappa):
    s = np.linspace(-3.0, 3.0, 2001)
    vals = kappa(s)
    if np.min(vals) <= 0:
        raise ValueError("kappa must be positive (bounded away from zero)")


def manufactured(kappa, kappa_prime, b, b_prime, exact, name="manufactured",
                 params=None):
    """Problem with the load derived from the prescribed exact solution."""
    _check_positive_kappa(kappa)
    return ProblemSpec(name=name, kappa=kappa, kappa_prime=kappa_prime,
                       b=b, b_prime=b_prime,
                       f=_manufactured_load(kappa, kappa_prime, b, exact),
                       exact=exact, params=dict(params or {}))


def _zero_vector(s):
    s = np.asarray(s, dtype=float)
    return np.zeros((2,) + s.shape)


def linear_poisson():
    """kappa = 1, b = 0, exact solution sin(pi x) sin(pi y)."""
    exact = _sinusoid(1)
    return manufactured(
        kappa=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        kappa_prime=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        b=_zero_vector, b_prime=_zero_vector,
        exact=exact, name="linear_poisson")


def _bump_kappa(epsilon, centers, floor):
    centers = tuple(centers)

    def kappa(s):
        s = np.asarray(s, dtype=float)
        out = np.full_like(s, float(floor))
        for c in centers:
            out += 1.0 / (epsilon + (s - c) ** 2)
        return out

    def kappa_prime(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c in centers:
            t = s - c
            out += -2.0 * t / (epsilon + t * t) ** 2
        return out

    return kappa, kappa_prime


def _convection_example(epsilon, frequency, name, a=0.5, k=1.0):
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    kappa, kappa_prime = _bump_kappa(epsilon, (a,), k)

    def b(s):
        t = np.asarray(s, dtype=float) - a
        return np.stack([t, t * t])

    def b_prime(s):
        t = np.asarray(s, dtype=float) - a
        return np.stack([np.ones_like(t), 2.0 * t])

    exact = _sinusoid(frequency)
    return ProblemSpec(
        name=name, kappa=kappa, kappa_prime=kappa_prime, b=b, b_prime=b_prime,
        f=_manufactured_load(kappa, kappa_prime, b, exact), exact=exact,
        params={"epsilon": epsilon, "a": a, "k": k})


def example_1(epsilon):
    """Convection diffusion with a rational diffusion bump at s = 0.5.

    kappa(s) = 1 + 1/(eps + (s - 0.5)^2), b(s) = (s - 0.5, (s - 0.5)^2),
    exact solution sin(pi x) sin(pi y).
    """
    return _convection_example(epsilon, 1, "example_1")


def example_2(epsilon):
    """Same operator as example_1 with the higher-frequency exact solution
    sin(2 pi x) sin(2 pi y), giving two disjoint internal layers."""
    return _convection_example(epsilon, 2, "example_2")


def example_3(epsilon, a=0.5, c=0.8, k=1.0):
    """Pure diffusion with two concentric internal layers.

    kappa(s) = 1 + 1/(eps + (s - 0.5)^2) + 1/(eps + (s - 0.8)^2), b = 0,
    exact solution sin(pi x) sin(pi y).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    kappa, kappa_prime = _bump_kappa(epsilon, (a, c), k)
    exact = _sinusoid(1)
    return ProblemSpec(
        name="example_3", kappa=kappa, kappa_prime=kappa_prime,
        b=_zero_vector, b_prime=_zero_vector,
        f=_manufactured_load(kappa, kappa_prime, _zero_vector, exact),
        exact=exact, params={"epsilon": epsilon, "a": a, "c": c, "k": k})
