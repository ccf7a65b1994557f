"""Reference models used by the tests, scripts and CLI examples."""

import numpy as np

from .model import PopulationModel


def homogeneous(r0=2.0, gamma=1.0):
    """One group; ``R_0 = r0``."""
    return PopulationModel([1.0], [gamma], [[r0 * gamma]], name="homogeneous")


def bipartite(beta=4.0):
    """Two equal groups infecting only each other; ``R_0 = beta / 2``."""
    return PopulationModel([0.5, 0.5], [1.0, 1.0], [[0.0, beta], [beta, 0.0]], name="bipartite")


def monatomic():
    """Group 0 sustains itself and infects group 1, which infects nobody."""
    return PopulationModel([0.5, 0.5], [1.0, 1.0], [[2.0, 0.0], [1.0, 0.0]], name="monatomic")


def two_blocks(a=3.0, b=2.0):
    """Two isolated, internally positive blocks of two groups each."""
    k = np.zeros((4, 4))
    k[:2, :2] = a
    k[2:, 2:] = b
    return PopulationModel(np.full(4, 0.25), np.ones(4), k, name="two_blocks")


def positive3():
    """Strictly positive three-group kernel (irreducible, supercritical)."""
    k = np.array([[3.0, 1.0, 2.0], [1.0, 2.0, 1.5], [0.5, 1.0, 4.0]])
    return PopulationModel([0.2, 0.3, 0.5], [1.0, 1.5, 2.0], k, name="positive3")


def multipartite(groups=6, r0=2.0):
    """Groups of sizes proportional to ``2**-i``, no intra-group transmission.

    The inter-group rate is constant and chosen so that ``R_0 = r0``.
    """
    w = 2.0 ** -np.arange(1, groups + 1)
    w = w / w.sum()
    k = 1.0 - np.eye(groups)
    base = PopulationModel(w, np.ones(groups), k)
    from .spectral import r0 as _r0

    return PopulationModel(w, np.ones(groups), k * (r0 / _r0(base)), name=f"multipartite{groups}")


def random_model(rng, n, scale=3.0, density=1.0, with_cost=False):
    """Random model; ``density`` is the probability that a kernel entry is non-zero."""
    w = rng.random(n) + 0.1
    w /= w.sum()
    gamma = rng.random(n) + 0.5
    k = rng.random((n, n)) * scale
    if density < 1.0:
        k *= rng.random((n, n)) < density
    d = rng.random(n) + 0.2 if with_cost else None
    return PopulationModel(w, gamma, k, d)
