import numpy as np
import pytest

import ptcfem as p
from ptcfem.problems import ExactSolution, manufactured


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def constant_kappa_problem(c=1.0):
    """kappa = c, b = 0, zero load; handy for stiffness-action checks."""
    zero2 = lambda s: np.zeros((2,) + np.shape(np.asarray(s, dtype=float)))
    exact = ExactSolution(u=lambda x, y: 0.0 * x,
                          grad=lambda x, y: np.zeros((2,) + np.shape(x)),
                          laplacian=lambda x, y: 0.0 * x)
    return manufactured(
        kappa=lambda s: np.full_like(np.asarray(s, dtype=float), c),
        kappa_prime=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        b=zero2, b_prime=zero2, exact=exact, name=f"const_kappa_{c}")


@pytest.fixture(scope="session")
def unit_kappa_problem():
    return constant_kappa_problem(1.0)


@pytest.fixture(scope="session")
def poisson():
    return p.linear_poisson()
