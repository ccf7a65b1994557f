"""Next-generation matrices, reproduction numbers and their gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateEigenvalue, NoConvergence
from .model import PopulationModel, as_strategy

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class EigenPair:
    """Perron root with right/left eigenvectors.

    ``right`` is normalized by ``sum(weights * right) == 1`` and ``left`` by
    ``sum(weights * left * right) == 1``.  Both are ``None`` when not
    requested or not attainable; ``vectors_converged`` tells whether the
    vectors met the residual tolerance (they may not when the Perron root
    is multiple).
    """

    rho: float
    right: Optional[np.ndarray]
    left: Optional[np.ndarray]
    converged: bool
    iterations: int
    residual: float
    vectors_converged: bool = True


def next_gen_matrix(model: PopulationModel, eta) -> np.ndarray:
    """``M[i, j] = kernel[i, j] * eta[j] * weights[j] / gamma[j]``."""
    e = as_strategy(eta, model.n)
    return model.kernel * (e * model.weights / model.gamma)[np.newaxis, :]


_NODA_MAX_N = 64


def _perron_irreducible(a, tol, max_iter):
    """Perron root and positive vector of an irreducible non-negative matrix.

    Each step bounds the root by the Collatz-Wielandt ratios
    ``lo = min (a x)_i / x_i <= rho <= hi = max (a x)_i / x_i`` and stops
    once ``hi - lo <= tol * max(rho, 1)``.  For small matrices the vector is
    updated by inverse iteration shifted to ``hi`` (Noda's iteration):
    ``hi I - a`` is a non-singular M-matrix, so the iterate stays positive,
    and the bracket shrinks quadratically.  Otherwise, or when a solve
    loses positivity, it takes a power step on ``a + hi I``; any positive
    shift makes the matrix primitive, so periodic matrices converge too.
    """
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0]), np.ones(1), 0, 0.0
    inverse = n <= _NODA_MAX_N
    eye = np.eye(n)
    x = np.ones(n)
    lo = hi = 0.0
    for it in range(1, max_iter + 1):
        ax = a @ x
        ratio = ax / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= tol * max(hi, 1.0):
            return float(0.5 * (lo + hi)), x / x.max(), it, float(hi - lo)
        y = None
        if inverse:
            try:
                y = np.linalg.solve(hi * eye - a, x)
            except np.linalg.LinAlgError:
                y = None
            if y is not None and not (np.all(np.isfinite(y)) and y.min() > 0):
                y = None
        x = ax + hi * x if y is None else y
        x /= x.max()
    raise NoConvergence(
        f"power iteration did not converge in {max_iter} iterations",
        estimate=0.5 * (lo + hi),
        residual=hi - lo,
        iterations=max_iter,
    )


def _null_vector(a, rho):
    """Non-negative eigenvector for ``rho`` from the SVD of ``a - rho I``.

    Returns the vector and whether it is trustworthy: the null space must be
    one-dimensional and the vector of one sign.
    """
    n = a.shape[0]
    shifted = a - rho * np.eye(n)
    _, sing, vt = np.linalg.svd(shifted)
    x = vt[-1]
    x = x if x.sum() >= 0 else -x
    scale = max(rho, 1.0)
    simple = n == 1 or sing[-2] > 1e-8 * scale
    one_sign = x.min() >= -1e-9 * np.abs(x).max()
    x = np.clip(x, 0.0, None)
    res = float(np.abs(a @ x - rho * x).max() / max(x.max(), 1e-300))
    return x, res, bool(simple and one_sign and x.max() > 0)


def strong_components(support) -> np.ndarray:
    """Strongly connected component label of each node of a boolean digraph.

    ``support[i, j]`` true means an edge ``j -> i`` (the same component
    structure as ``i -> j``).
    """
    _, labels = connected_components(np.asarray(support, dtype=bool), directed=True, connection="strong")
    return labels


def block_radii(m, labels, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Spectral radius of each diagonal block ``m[S, S]`` for component labels."""
    radii = {}
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        block = m[np.ix_(idx, idx)]
        if idx.size == 1 or not block.any():
            radii[int(lab)] = float(block.max()) if idx.size == 1 else 0.0
        else:
            radii[int(lab)] = _perron_irreducible(block, tol, max_iter)[0]
    return radii


def spectral_radius(m, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    weights=None, vectors: bool = True) -> EigenPair:
    """Perron root of a non-negative matrix.

    Irreducible matrices go straight to power iteration.  Otherwise the
    radius is the largest radius of the diagonal blocks of the strongly
    connected components, and the eigenvectors (if requested) span the null
    space of ``m - rho I``; ``vectors_converged`` is false when that space
    is not spanned by a single non-negative vector (multiple root).
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if not m.any():
        z = np.zeros(n) if vectors else None
        return EigenPair(0.0, z, z, True, 0, 0.0, vectors)

    support = m > 0
    irreducible = bool(support.all())
    labels = None
    if not irreducible:
        labels = strong_components(support)
        irreducible = labels.max() == 0

    if irreducible:
        rho, right, iters, res = _perron_irreducible(m, tol, max_iter)
        if not vectors:
            return EigenPair(rho, None, None, True, iters, res)
        left, it2, res2 = _perron_irreducible(m.T, tol, max_iter)[1:]
        iters += it2
        res = max(res, res2)
        vec_ok = True
    else:
        radii = block_radii(m, labels, tol, max_iter)
        rho = max(radii.values())
        iters, res = 0, 0.0
        if rho == 0.0:
            z = np.zeros(n) if vectors else None
            return EigenPair(0.0, z, z, True, 0, 0.0, vectors)
        if not vectors:
            return EigenPair(rho, None, None, True, 0, 0.0)
        right, r1, ok1 = _null_vector(m, rho)
        left, r2, ok2 = _null_vector(m.T, rho)
        res, vec_ok = max(r1, r2), ok1 and ok2

    right = right / np.dot(w, right)
    overlap = np.dot(w, left * right)
    left = left / overlap if overlap > 0 else left
    return EigenPair(float(rho), right, left, True, iters, float(res), vec_ok)


def r_e(model: PopulationModel, eta, tol: float = DEFAULT_TOL) -> float:
    """Effective reproduction number: Perron root of the vaccinated matrix."""
    return spectral_radius(next_gen_matrix(model, eta), tol=tol, vectors=False).rho


def r0(model: PopulationModel) -> float:
    return r_e(model, np.ones(model.n))


def r_e_gradient(model: PopulationModel, eta, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Gradient of ``r_e`` from the Perron pair.

    With ``v``, ``w`` the left and right Perron vectors of ``M(eta)``,
    ``d r_e / d eta_j = (v^T K)_j * weights_j / gamma_j * w_j / (v^T w)``.
    Raises ``DegenerateEigenvalue`` when the root vanishes or looks multiple.
    """
    e = as_strategy(eta, model.n)
    pair = spectral_radius(next_gen_matrix(model, e), tol=tol)
    if pair.rho <= 0.0:
        raise DegenerateEigenvalue("r_e is zero; gradient undefined")
    if not pair.vectors_converged:
        raise DegenerateEigenvalue("Perron vectors did not converge (multiple root)")
    v, w = pair.left, pair.right
    overlap = float(v @ w)
    if overlap < 1e-10 * np.linalg.norm(v) * np.linalg.norm(w):
        raise DegenerateEigenvalue(f"left/right Perron overlap {overlap:.3g} is degenerate")
    return (v @ model.kernel) * (model.weights / model.gamma) * w / overlap


def finite_difference_gradient(fn, eta, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``fn`` on [0, 1]^n, one-sided at the faces."""
    e = np.asarray(eta, dtype=float)
    grad = np.empty_like(e)
    for j in range(e.size):
        up, down = e.copy(), e.copy()
        up[j] = min(e[j] + h, 1.0)
        down[j] = max(e[j] - h, 0.0)
        grad[j] = (fn(up) - fn(down)) / (up[j] - down[j])
    return grad


def r_e_gradient_fd(model: PopulationModel, eta, h: float = 1e-6) -> np.ndarray:
    return finite_difference_gradient(lambda x: r_e(model, x), eta, h)
