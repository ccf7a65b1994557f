"""Maximal endemic equilibrium of the vaccinated SIS dynamics.

The vaccinated vector field is

    F(g)_i = (1 - g_i) * sum_j kernel[i, j] * eta[j] * weights[j] * g[j] - gamma[i] * g[i]

(no division by ``gamma``, unlike the next-generation matrix).  Its maximal
zero is reached by the monotone iteration ``g <- T(g) / (gamma + T(g))``
started from the all-infected state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoConvergence, StepSizeError, ValidationError
from .model import PopulationModel, as_strategy
from .spectral import r_e

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1_000_000
SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class EquilibriumResult:
    g: np.ndarray
    infected_fraction: float
    iterations: int
    residual: float
    monotone: bool = True


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def transmission_matrix(model: PopulationModel, eta) -> np.ndarray:
    """Unscaled operator ``kernel[i, j] * eta[j] * weights[j]``."""
    e = as_strategy(eta, model.n)
    return model.kernel * (e * model.weights)[np.newaxis, :]


def vector_field(model: PopulationModel, eta, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return (1.0 - g) * (transmission_matrix(model, eta) @ g) - model.gamma * g


def maximal_equilibrium(model: PopulationModel, eta, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> EquilibriumResult:
    """Monotone fixed-point iteration from ``g = 1``.

    The iterates decrease to the maximal equilibrium.  Iteration stops when
    the a-posteriori error bound ``step * q / (1 - q)``, with ``q`` the
    observed contraction ratio of successive steps, falls below ``tol``; a
    plain step criterion would stop far too early near criticality, where
    the convergence is slow.  When ``r_e(eta) <= 1 + tol`` the maximal
    equilibrium is the disease-free state and is returned directly (at
    criticality the iteration converges only like ``1 / m``).
    """
    e = as_strategy(eta, model.n)
    if _subcritical(model, e, tol):
        return EquilibriumResult(np.zeros(model.n), 0.0, 0, 0.0)
    return _iterate(model, e, tol, max_iter)


def _iterate(model, e, tol, max_iter):
    a = transmission_matrix(model, e)
    gamma = model.gamma
    g = np.ones(model.n)
    prev_step = np.inf
    monotone = True
    for it in range(1, max_iter + 1):
        t = a @ g
        new = t / (gamma + t)
        diff = g - new
        if diff.min() < -1e-15:
            monotone = False
        step = np.abs(diff).max()
        g = new
        if step == 0.0:
            break
        q = step / prev_step if np.isfinite(prev_step) else 1.0
        prev_step = step
        if q < 1.0 and step * q / (1.0 - q) <= tol:
            break
    else:
        res = float(np.abs(vector_field(model, e, g)).max())
        raise NoConvergence(
            f"equilibrium iteration did not converge in {max_iter} iterations",
            estimate=g, residual=res, iterations=max_iter,
        )
    res = float(np.abs(vector_field(model, e, g)).max())
    return EquilibriumResult(g, float(np.dot(model.weights, g * e)), it, res, monotone)


def _subcritical(model, e, tol):
    try:
        return r_e(model, e) <= 1.0 + tol
    except NoConvergence as exc:
        return exc.estimate + exc.residual <= 1.0 + tol


def _newton_polish(model, e, g, rtol=1e-13, floor=1e-7, max_steps=100):
    """Newton from a super-solution; the iterates decrease to the maximal zero.

    The Jacobian is nearly singular close to criticality, so convergence is
    judged on the relative step size rather than on the residual.  Rounding
    bounds the attainable step there; once steps stop shrinking the iterate
    is accepted if the last step is below ``floor`` relative to ``g``.
    """
    a = transmission_matrix(model, e)
    prev = np.inf
    for _ in range(max_steps):
        t = a @ g
        f = (1.0 - g) * t - model.gamma * g
        jac = (1.0 - g)[:, np.newaxis] * a - np.diag(t + model.gamma)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        g = np.clip(g + step, 0.0, 1.0)
        size = np.abs(step).max() / max(g.max(), 1e-300)
        if size <= rtol:
            return g
        if size <= floor and size >= 0.5 * prev:
            return g
        prev = size
    return None


def fast_equilibrium(model: PopulationModel, eta, tol: float = DEFAULT_TOL) -> EquilibriumResult:
    """Maximal equilibrium for repeated loss evaluations.

    Returns the disease-free state directly when subcritical, and otherwise
    polishes a partially converged monotone iterate with Newton
    steps.  The Newton limit is accepted only if it stays below the
    monotone iterate it started from (so it is still the maximal zero);
    otherwise the plain iteration is run to completion.
    """
    e = as_strategy(eta, model.n)
    if _subcritical(model, e, tol):
        return EquilibriumResult(np.zeros(model.n), 0.0, 0, 0.0)
    try:
        rough = _iterate(model, e, 1e-4, 200)
    except NoConvergence as exc:
        rough = None
        start = exc.estimate
    else:
        start = rough.g
    polished = _newton_polish(model, e, np.array(start))
    if polished is not None and np.all(polished <= start + 1e-9) and polished.max() > 0:
        res = float(np.abs(vector_field(model, e, polished)).max())
        return EquilibriumResult(polished, float(np.dot(model.weights, polished * e)),
                                 0 if rough is None else rough.iterations, res)
    return maximal_equilibrium(model, e, tol=tol)


def infected_fraction(model: PopulationModel, eta, tol: float = DEFAULT_TOL) -> float:
    return maximal_equilibrium(model, eta, tol=tol).infected_fraction


def infected_fraction_gradient(model: PopulationModel, eta, g=None) -> np.ndarray:
    """Gradient of the endemic infected fraction by implicit differentiation.

    ``g`` is the maximal equilibrium at ``eta`` (computed if omitted).  The
    disease-free state has zero gradient; otherwise the equilibrium
    equation ``F(g, eta) = 0`` is differentiated, which requires a
    non-singular Jacobian (it fails exactly at criticality).
    """
    e = as_strategy(eta, model.n)
    if g is None:
        g = fast_equilibrium(model, e).g
    g = np.asarray(g, dtype=float)
    if g.max() <= 0.0:
        return np.zeros(model.n)
    a = transmission_matrix(model, e)
    t = a @ g
    jac = (1.0 - g)[:, np.newaxis] * a - np.diag(t + model.gamma)
    d_eta = (1.0 - g)[:, np.newaxis] * model.kernel * (model.weights * g)[np.newaxis, :]
    if np.linalg.cond(jac) > 1e12:
        raise np.linalg.LinAlgError("singular equilibrium Jacobian")
    dg = np.linalg.solve(jac, -d_eta)
    return model.weights * g + (model.weights * e) @ dg


def equilibrium_support(model: PopulationModel, eta, tol: float = SUPPORT_TOL) -> frozenset:
    """Groups infected at the maximal equilibrium."""
    g = maximal_equilibrium(model, eta).g
    return frozenset(int(i) for i in np.flatnonzero(g > tol))


def max_stable_dt(model: PopulationModel) -> float:
    return 0.1 / float(np.max(model.gamma + model.kernel @ model.weights))


def integrate_sis(model: PopulationModel, eta, u0, t_max: float, dt: float) -> Trajectory:
    """Fixed-step RK4 for ``du/dt = F(u)``, every step recorded."""
    e = as_strategy(eta, model.n)
    u = as_strategy(u0, model.n)
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    if dt > max_stable_dt(model) * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds the stability bound {max_stable_dt(model):.6g}")
    if t_max < 0:
        raise ValidationError("t_max must be non-negative")
    a = transmission_matrix(model, e)
    gamma = model.gamma

    def f(x):
        return (1.0 - x) * (a @ x) - gamma * x

    steps = int(np.ceil(t_max / dt - 1e-9))
    times = np.empty(steps + 1)
    states = np.empty((steps + 1, model.n))
    times[0], states[0] = 0.0, u
    for s in range(1, steps + 1):
        h = min(dt, t_max - times[s - 1])
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = np.clip(u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0, 1.0)
        times[s] = times[s - 1] + h
        states[s] = u
    return Trajectory(times, states)


def write_trajectory_csv(traj: Trajectory, target) -> None:
    """Header ``t,g1,...,gn``; ``target`` is a path or a text stream."""
    n = traj.states.shape[1]
    fh = target if hasattr(target, "write") else Path(target).open("w", newline="")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"g{i + 1}" for i in range(n)])
        for t, row in zip(traj.times, traj.states):
            writer.writerow([f"{t:.12g}"] + [f"{x:.12g}" for x in row])
    finally:
        if fh is not target:
            fh.close()
