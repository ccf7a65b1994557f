"""Value functions, Pareto and anti-Pareto frontiers.

For a cost ``C`` and a loss ``L`` (``R_e`` or the endemic infected fraction),
the four value functions are

* ``lossinf(c)``  = min L over strategies with C <= c   (best loss at budget c)
* ``losssup(c)``  = max L over strategies with C >= c   (worst loss at spend c)
* ``costinf(l)``  = min C over strategies with L <= l
* ``costsup(l)``  = max C over strategies with L >= l

The first two are computed by multi-start projected gradient descent and
the last two by bracketing on the first two, which are non-increasing.
``grid_oracle`` enumerates a lattice of strategies for small models and is
the independent reference the solvers are checked against.
"""

from __future__ import annotations

import csv
import itertools
import logging
import os
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .connectivity import atom_indicator_strategy, classify
from .equilibrium import SUPPORT_TOL, fast_equilibrium, infected_fraction_gradient
from .errors import (DegenerateEigenvalue, InfeasibleCost, InfeasibleLoss, NoConvergence,
                     NotMonatomic, TooLarge, ValidationError)
from .model import UNIFORM, ConstraintSet, CostFunction, PopulationModel, as_strategy
from .spectral import finite_difference_gradient, r_e, r_e_gradient

log = logging.getLogger(__name__)

LOSS_RE = "re"
LOSS_I = "i"

CONVERGED = "Converged"
ORACLE_VERIFIED = "OracleVerified"
BEST_EFFORT = "BestEffort"

PARETO = "Pareto"
ANTI_PARETO = "AntiPareto"

MAX_ORACLE_CELLS = 10**7


@dataclass(frozen=True)
class SolverOptions:
    n_random: int = 8
    max_iter: int = 400
    loss_tol: float = 1e-6
    oracle_tol: float = 1e-4
    cost_xtol: float = 1e-9
    verify: bool = True
    verify_cells: int = 20_000
    seed: int = 0
    workers: Optional[int] = None

    def replace(self, **kw) -> "SolverOptions":
        return replace(self, **kw)


@dataclass(frozen=True)
class Outcome:
    cost: float
    loss: float


@dataclass(frozen=True)
class FrontierPoint:
    cost: float
    loss: float
    eta: np.ndarray
    solver_status: str = CONVERGED


@dataclass
class FrontierCurve:
    direction: str
    points: List[FrontierPoint]
    c0: Optional[float] = None
    c0_bracket: Optional[tuple] = None

    @property
    def costs(self) -> np.ndarray:
        return np.array([p.cost for p in self.points])

    @property
    def losses(self) -> np.ndarray:
        return np.array([p.loss for p in self.points])


@dataclass(frozen=True, eq=False)
class Problem:
    """Bi-objective problem: a model, a loss, a cost and admissible strategies."""

    model: PopulationModel
    loss_kind: str = LOSS_RE
    cost_fn: CostFunction = UNIFORM
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.loss_kind not in (LOSS_RE, LOSS_I):
            raise ValidationError(f"unknown loss {self.loss_kind!r}")
        self.cost_fn.density(self.model)  # fails early for affine without density
        r0 = r_e(self.model, np.ones(self.model.n))
        if self.loss_kind == LOSS_RE and not r0 > 0:
            raise ValidationError("loss R_e needs R_0 > 0")
        if self.loss_kind == LOSS_I and not r0 > 1:
            raise ValidationError("loss I needs R_0 > 1")

    @property
    def n(self) -> int:
        return self.model.n

    @cached_property
    def weights(self) -> np.ndarray:
        return np.asarray(self.model.weights)

    @cached_property
    def density(self) -> np.ndarray:
        return self.cost_fn.density(self.model)

    @cached_property
    def cost_weights(self) -> np.ndarray:
        return self.weights * self.density

    @cached_property
    def ell_max(self) -> float:
        return self.loss(np.ones(self.n))

    def cost(self, eta) -> float:
        return float(np.dot(self.cost_weights, 1.0 - np.asarray(eta, dtype=float)))

    def loss(self, eta) -> float:
        if self.loss_kind == LOSS_RE:
            try:
                return r_e(self.model, eta)
            except NoConvergence:
                # nearly reducible matrices: fall back to a dense eigensolve
                return float(_batched_re(self.model, np.asarray(eta, dtype=float)[np.newaxis])[0])
        return fast_equilibrium(self.model, eta).infected_fraction

    def loss_gradient(self, eta) -> np.ndarray:
        if self.loss_kind == LOSS_RE:
            try:
                return r_e_gradient(self.model, eta)
            except (DegenerateEigenvalue, NoConvergence):
                return finite_difference_gradient(self.loss, eta)
        try:
            return infected_fraction_gradient(self.model, eta)
        except (np.linalg.LinAlgError, NoConvergence):
            return finite_difference_gradient(self.loss, eta)

    def outcome(self, eta) -> Outcome:
        return Outcome(self.cost(eta), self.loss(eta))

    def other_loss(self, kind) -> "Problem":
        return Problem(self.model, kind, self.cost_fn, self.constraints)


def loss(problem: Problem, eta) -> float:
    return problem.loss(as_strategy(eta, problem.n))


# --------------------------------------------------------------------------
# single-objective solvers


def _budget_projector(problem, c, sense):
    # capped cost C <= c  <=>  sum(w d eta) >= 1 - c
    level = 1.0 - c
    cs, w, d = problem.constraints, problem.weights, problem.density
    direction = "ge" if sense == "min" else "le"
    return lambda x: cs.project_budget(x, w, d, level, direction)


def _greedy(problem, c, ratio, most_sensitive_first):
    """Vaccinate groups one after the other until cost ``c`` is reached."""
    order = np.argsort(-ratio if most_sensitive_first else ratio, kind="stable")
    eta = np.ones(problem.n)
    left = c
    for j in order:
        full = problem.cost_weights[j]
        if left >= full:
            eta[j] = 0.0
            left -= full
        else:
            eta[j] = 1.0 - left / full
            break
    return eta


def _seeds(problem, c, sense, opts, rng, extra):
    n = problem.n
    seeds = [np.full(n, 1.0 - c)]
    key = ("grad_at_one",)
    if key not in problem._cache:
        problem._cache[key] = problem.loss_gradient(np.ones(n))
    for grad in (problem._cache[key], None):
        if grad is None:
            base = np.full(n, 1.0 - c)
            if problem.loss(base) <= 0:
                continue
            grad = problem.loss_gradient(base)
        ratio = grad / problem.cost_weights
        seeds.append(_greedy(problem, c, ratio, sense == "min"))
    if sense == "max":
        for s in _anti_seeds(problem):
            seeds.append(_scale_to_cost(problem, s, c))
    seeds.extend(np.asarray(s, dtype=float) for s in extra)
    seeds.extend(rng.random(n) for _ in range(opts.n_random))
    return seeds


def _anti_seeds(problem):
    key = ("anti_seeds",)
    if key not in problem._cache:
        out = []
        report = classify(problem.model)
        if report.is_monatomic:
            out.append(atom_indicator_strategy(report, problem.n))
        if problem.loss_kind == LOSS_I:
            g = fast_equilibrium(problem.model, np.ones(problem.n)).g
            out.append((g > SUPPORT_TOL).astype(float))
        problem._cache[key] = out
    return problem._cache[key]


def _scale_to_cost(problem, eta, c):
    """Shrink ``eta`` towards zero until its cost reaches ``c``."""
    eta = np.asarray(eta, dtype=float)
    cur = problem.cost(eta)
    if cur >= c or cur >= 1.0:
        return eta
    return eta * (1.0 - c) / (1.0 - cur)


def _descend(f, grad, proj, x0, w, max_iter, target=None):
    """Projected gradient descent with Armijo backtracking.

    The gradient is taken in the ``w``-weighted metric that the projection
    uses.  Returns ``(x, f(x), converged)``.
    """
    x = proj(x0)
    fx = f(x)
    alpha = 1.0
    for _ in range(max_iter):
        if target is not None and fx <= target:
            return x, fx, True
        g = grad(x)
        gw = g / w
        scale = np.abs(gw).max()
        if not np.isfinite(scale) or scale == 0.0:
            return x, fx, True
        alpha = min(alpha * 4.0, 1e3 / scale)
        accepted = False
        for _ in range(50):
            y = proj(x - alpha * gw)
            dec = float(np.dot(g, x - y))
            if np.abs(y - x).max() <= 1e-14:
                break
            fy = f(y)
            if fy <= fx - 1e-4 * dec:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return x, fx, True
        step = np.abs(y - x).max()
        gain = fx - fy
        x, fx = y, fy
        if step <= 1e-10 or gain <= 1e-15 * max(1.0, abs(fx)):
            return x, fx, True
    return x, fx, False


def _rng(opts, sense, c):
    return np.random.default_rng([opts.seed, 0 if sense == "min" else 1, int(round(c * 1e9))])


def _optimize(problem, c, sense, opts, extra=(), target=None):
    if not (0.0 <= c <= 1.0):
        raise InfeasibleCost(f"cost level {c} outside [0, 1]")
    proj = _budget_projector(problem, c, sense)
    sign = 1.0 if sense == "min" else -1.0
    f = lambda x: sign * problem.loss(x)
    grad = lambda x: sign * problem.loss_gradient(x)
    seeds = _seeds(problem, c, sense, opts, _rng(opts, sense, c), extra)
    if problem.loss_kind == LOSS_I and opts.n_random >= 0:
        # optima for R_e are natural starting points for I (same critical optima)
        helper = problem.other_loss(LOSS_RE)
        sub = _optimize(helper, c, sense, opts.replace(n_random=min(opts.n_random, 2)))
        seeds.insert(0, sub[0])
    ftarget = None if target is None else sign * target
    best = None
    for s in seeds:
        x, fx, ok = _descend(f, grad, proj, s, problem.weights, opts.max_iter, ftarget)
        cand = (fx, problem.cost(x), tuple(np.round(x, 12)), x, ok)
        if best is None or _better(cand, best):
            best = cand
        if ftarget is not None and fx <= ftarget:
            break
        if sense == "min" and fx <= 0.0:
            break
        if sense == "max" and -fx >= problem.ell_max * (1 - 1e-15):
            break
    done = (ftarget is not None and best[0] <= ftarget) or (sense == "min" and best[0] <= 0.0)
    if problem.loss_kind == LOSS_RE and not done and not np.all(problem.model.kernel > 0):
        x, fx, ok = _smoothed_descent(problem, sign, proj, best[3], opts)
        cand = (fx, problem.cost(x), tuple(np.round(x, 12)), x, ok)
        if _better(cand, best):
            best = cand
    fx, cost, _, x, ok = best
    return x, sign * fx, cost, ok


def _dense_perron(m):
    """Perron root and vectors of a positive matrix by dense eigensolves.

    Power iteration is slow here: the surrogates have nearly equal leading
    eigenvalues by construction.
    """
    vals, vecs = np.linalg.eig(m)
    k = int(np.argmax(vals.real))
    vals_t, vecs_t = np.linalg.eig(m.T)
    kt = int(np.argmax(vals_t.real))
    r, v = np.abs(vecs[:, k].real), np.abs(vecs_t[:, kt].real)
    return float(vals[k].real), v, r


_SMOOTHING = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)


def _smoothed_descent(problem, sign, proj, x0, opts):
    """Descent through a homotopy of smooth surrogates for ``R_e``.

    With zeros in the kernel, ``R_e`` can be a maximum of several block
    radii and projected gradient steps stall at its kinks.  Adding
    ``eps * R_0 / n`` to every entry of the next-generation matrix makes it
    positive, with a simple and smooth Perron root; the minimizer is
    tracked while ``eps`` shrinks and then polished on the exact loss.
    """
    model = problem.model
    n = model.n
    scale = model.weights / model.gamma
    r0 = problem.ell_max
    x = x0
    for eps in _SMOOTHING:
        shift = eps * r0 / n

        def surrogate(eta, want_grad=False):
            m = model.kernel * (eta * scale)[np.newaxis, :] + shift
            rho, v, r = _dense_perron(m)
            if not want_grad:
                return sign * rho
            return sign * (v @ model.kernel) * scale * r / float(v @ r)

        x, _, _ = _descend(surrogate, lambda e: surrogate(e, True), proj, x, problem.weights, opts.max_iter)
    f = lambda e: sign * problem.loss(e)
    return _descend(f, lambda e: sign * problem.loss_gradient(e), proj, x, problem.weights, opts.max_iter)


def _better(a, b):
    # lower objective, then lower cost, then lexicographically smaller eta
    if a[0] < b[0] - 1e-12:
        return True
    if a[0] > b[0] + 1e-12:
        return False
    if a[1] < b[1] - 1e-12:
        return True
    if a[1] > b[1] + 1e-12:
        return False
    return a[2] < b[2]


def _point(problem, x, ok, status=None):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return FrontierPoint(problem.cost(x), problem.loss(x), x, status or (CONVERGED if ok else BEST_EFFORT))


def _verify(problem, point, sense, opts):
    if not opts.verify or point.solver_status != CONVERGED:
        return point
    steps = _verify_steps(problem, opts)
    if steps is None:
        return point
    oracle = _cached_oracle(problem, steps)
    h = oracle.cost_step
    tol = opts.oracle_tol
    if sense == "min":
        ok = oracle.lossinf(point.cost + h) - tol <= point.loss <= oracle.lossinf(point.cost) + tol
    else:
        ok = oracle.losssup(point.cost) - tol <= point.loss <= oracle.losssup(point.cost - h) + tol
    return replace(point, solver_status=ORACLE_VERIFIED) if ok else point


def _verify_steps(problem, opts):
    if problem.n > 3:
        return None
    cells = opts.verify_cells if problem.loss_kind == LOSS_RE else opts.verify_cells // 10
    steps = int(np.floor(cells ** (1.0 / problem.n))) - 1
    return steps if steps >= 4 else None


def min_loss_at_cost(problem: Problem, c: float, opts: SolverOptions = SolverOptions(),
                     seeds: Sequence = (), target: Optional[float] = None) -> FrontierPoint:
    """Best loss reachable with cost at most ``c``.

    With ``target`` the search stops at the first strategy whose loss is at
    most ``target`` (used when only feasibility matters).
    """
    x, _, _, ok = _optimize(problem, c, "min", opts, seeds, target)
    return _oracle_repair(problem, c, "min", opts, _verify(problem, _point(problem, x, ok), "min", opts))


def max_loss_at_cost(problem: Problem, c: float, opts: SolverOptions = SolverOptions(),
                     seeds: Sequence = (), target: Optional[float] = None) -> FrontierPoint:
    """Worst loss reachable with cost at least ``c``, stopping early at ``target``."""
    x, _, _, ok = _optimize(problem, c, "max", opts, seeds, target)
    return _oracle_repair(problem, c, "max", opts, _verify(problem, _point(problem, x, ok), "max", opts))


def _oracle_repair(problem, c, sense, opts, point):
    """Restart from the best lattice strategy when verification found a better one."""
    if not opts.verify or point.solver_status != CONVERGED:
        return point
    steps = _verify_steps(problem, opts)
    if steps is None:
        return point
    start = _cached_oracle(problem, steps).best_strategy(c, sense)
    if start is None:
        return point
    sign = 1.0 if sense == "min" else -1.0
    x, fx, ok = _descend(lambda y: sign * problem.loss(y), lambda y: sign * problem.loss_gradient(y),
                         _budget_projector(problem, c, sense), start, problem.weights, opts.max_iter)
    if sign * fx < sign * point.loss:
        point = _point(problem, x, ok)
    point = _verify(problem, point, sense, opts)
    return point if point.solver_status == ORACLE_VERIFIED else replace(point, solver_status=BEST_EFFORT)


def _bracket(pred, lo, hi, lo_val, hi_val, xtol, max_iter=200):
    """Shrink ``[lo, hi]`` with ``pred(lo)`` false and ``pred(hi)`` true.

    ``pred(c)`` returns ``(flag, payload)``; payloads at the returned ends
    are kept.  Plain bisection: the predicates come from noisy solvers, so
    no interpolation is attempted.
    """
    for _ in range(max_iter):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        flag, val = pred(mid)
        if flag:
            hi, hi_val = mid, val
        else:
            lo, lo_val = mid, val
    return lo, hi, lo_val, hi_val


def min_cost_at_loss(problem: Problem, ell: float, opts: SolverOptions = SolverOptions()) -> FrontierPoint:
    """Cheapest strategy with loss at most ``ell`` (up to ``opts.loss_tol``)."""
    ell_max = problem.ell_max
    if ell < 0 or ell > ell_max * (1 + 1e-12) + 1e-15:
        raise InfeasibleLoss(f"loss level {ell} outside [0, {ell_max}]")
    limit = ell + opts.loss_tol
    if ell_max <= limit:
        return _point(problem, np.ones(problem.n), True)
    if ell == 0.0 and problem.loss_kind == LOSS_I:
        # the infected fraction vanishes exactly where R_e <= 1
        re = problem.other_loss(LOSS_RE)
        x = min_cost_at_loss(re, min(1.0, re.ell_max), opts).eta
        x = x / max(1.0, re.loss(x))  # R_e is homogeneous: land on the threshold, not above it
        return _verify(problem, _point(problem, x, True), "min", opts)
    if ell == 0.0:
        exact = _acyclic_endpoint(problem)
        if exact is not None:
            return _verify(problem, exact, "min", opts)
    return _min_cost_by_bisection(problem, ell, opts)


def _min_cost_by_bisection(problem, ell, opts):
    limit = ell + opts.loss_tol

    def pred(c):
        p = min_loss_at_cost(problem, c, replace(opts, verify=False), target=limit)
        return p.loss <= limit, p

    top = pred(1.0)[1]
    _, _, _, best = _bracket(pred, 0.0, 1.0, None, top, opts.cost_xtol)
    if ell == 0.0:
        best = _snap_zero_loss(problem, best)
    return _verify(problem, best, "min", opts)


_ACYCLIC_MAX_N = 16


def _is_acyclic(adj):
    """Whether the directed graph with boolean adjacency ``adj`` has no cycle."""
    alive = np.ones(adj.shape[0], dtype=bool)
    while alive.any():
        # peel off groups that infect no remaining group
        sinks = ~adj[np.ix_(alive, alive)].any(axis=0)
        free = np.flatnonzero(alive)[sinks]
        if free.size == 0:
            return False
        alive[free] = False
    return True


def _acyclic_endpoint(problem):
    """Exact cheapest zero-R_e strategy on the box, or ``None`` if out of reach.

    ``R_e`` is zero exactly when the transmission graph restricted to the
    groups with ``eta > 0`` has no cycle, so the cheapest such strategy keeps
    ``eta = 1`` on a heaviest acyclic set of groups and ``0`` elsewhere.
    """
    n = problem.n
    if problem.loss_kind != LOSS_RE or problem.constraints.kind != "box" or n > _ACYCLIC_MAX_N:
        return None
    adj = np.asarray(problem.model.kernel) > 0
    masks = np.arange(1 << n)
    bits = (masks[:, None] >> np.arange(n)) & 1
    kept = bits @ problem.cost_weights
    best = None
    for m in np.argsort(-kept, kind="stable"):
        if best is not None and kept[m] < kept[best] - 1e-12:
            break
        members = bits[m].astype(bool)
        if _is_acyclic(adj[np.ix_(members, members)]):
            if best is None or tuple(bits[m]) < tuple(bits[best]):
                best = m
    return _point(problem, bits[best].astype(float), True)


def _snap_zero_loss(problem, point, small=1e-3, max_extra=1e-5):
    """Round tiny coordinates to zero when that makes the loss exactly zero.

    The bisection only reaches loss ``<= loss_tol``; on kernels whose
    zero-loss set is a single face this recovers the exact endpoint.
    """
    x = np.where(point.eta < small, 0.0, point.eta)
    if np.array_equal(x, point.eta) or problem.loss(x) != 0.0:
        return point
    if problem.cost(x) - point.cost > max_extra:
        return point
    return _point(problem, x, True)


def max_cost_at_loss(problem: Problem, ell: float, opts: SolverOptions = SolverOptions()) -> FrontierPoint:
    """Most expensive strategy with loss at least ``ell`` (up to ``opts.loss_tol``)."""
    ell_max = problem.ell_max
    if ell < 0 or ell > ell_max * (1 + 1e-12) + 1e-15:
        raise InfeasibleLoss(f"loss level {ell} outside [0, {ell_max}]")
    limit = ell - opts.loss_tol
    if limit <= 0.0:
        return _point(problem, np.zeros(problem.n), True)
    sub = replace(opts, verify=False)

    # the predicate is "infeasible"; bracket from the feasible side at 0
    def pred(c):
        p = max_loss_at_cost(problem, c, sub, target=limit)
        return p.loss < limit, p

    lo = 0.0
    lo_val = _point(problem, np.ones(problem.n), True)
    for s in _anti_seeds(problem):
        if problem.loss(s) >= limit and problem.cost(s) > lo:
            lo, lo_val = problem.cost(s), _point(problem, s, True)
    _, _, best, _ = _bracket(pred, lo, 1.0, lo_val, None, opts.cost_xtol)
    return _verify(problem, best, "max", opts)


# --------------------------------------------------------------------------
# frontiers


def _workers(opts):
    if opts.workers is not None:
        return max(1, opts.workers)
    try:
        return max(1, int(os.environ.get("PAREPI_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items, opts):
    items = list(items)
    workers = min(_workers(opts), len(items)) if items else 1
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _repair(problem, points, solve, slack=1e-8):
    """Re-solve grid points that break monotonicity, seeded by neighbours."""
    out = list(points)
    for i in range(1, len(out)):
        if out[i].loss > out[i - 1].loss + slack:
            neighbours = [out[i - 1].eta] + ([out[i + 1].eta] if i + 1 < len(out) else [])
            p = solve(out[i].cost, neighbours)
            if p.loss > out[i - 1].loss + slack:
                p = replace(p, solver_status=BEST_EFFORT)
            out[i] = p
    return out


def pareto_frontier(problem: Problem, grid: int, opts: SolverOptions = SolverOptions()) -> FrontierCurve:
    """Sample ``(c, lossinf(c))`` on a uniform grid of ``[0, costinf(0)]``."""
    if grid < 2:
        raise ValidationError("grid must be at least 2")
    end = min_cost_at_loss(problem, 0.0, opts)
    costs = np.linspace(0.0, end.cost, grid)[:-1]
    solve = lambda c, seeds=(): min_loss_at_cost(problem, float(c), opts, seeds)
    points = _map(solve, costs, opts) + [end]
    points = _repair(problem, points, solve)
    return FrontierCurve(PARETO, points)


def anti_pareto_frontier(problem: Problem, grid: int, opts: SolverOptions = SolverOptions()) -> FrontierCurve:
    """Sample ``(c, losssup(c))`` from ``costsup(ell_max)`` on.

    For the loss ``R_e`` the grid covers ``[costsup(ell_max), 1]``.  For the
    infected fraction the worst loss drops to zero at ``c0 < 1``; the grid
    stops at the lower end of a bracket on ``c0`` and the isolated outcome
    ``(1, 0)`` of vaccinating everybody is appended.
    """
    if grid < 2:
        raise ValidationError("grid must be at least 2")
    report = classify(problem.model)
    if not report.is_monatomic:
        raise NotMonatomic(f"anti-Pareto frontier needs a monatomic kernel, got {report.classification}")
    start = max_cost_at_loss(problem, problem.ell_max, opts.replace(loss_tol=1e-10 * problem.ell_max))
    solve = lambda c, seeds=(): max_loss_at_cost(problem, float(c), opts, seeds)
    if problem.loss_kind == LOSS_RE:
        costs = np.linspace(start.cost, 1.0, grid)[1:]
        points = [start] + _map(solve, costs, opts)
        return FrontierCurve(ANTI_PARETO, _repair(problem, points, solve))

    c_lo, c_hi, lo_pt = estimate_c0(problem, opts, start)
    costs = np.linspace(start.cost, c_lo, grid)[1:-1]
    points = [start] + _map(solve, costs, opts) + [lo_pt]
    points = _repair(problem, points, solve)
    c0 = 0.5 * (c_lo + c_hi)
    if c0 < 1.0:
        points.append(_point(problem, np.zeros(problem.n), True))
    return FrontierCurve(ANTI_PARETO, points, c0=c0, c0_bracket=(c_lo, c_hi))


def estimate_c0(problem: Problem, opts: SolverOptions = SolverOptions(), start: Optional[FrontierPoint] = None):
    """Bracket ``c0``, the cost beyond which every strategy has zero loss.

    Returns ``(lo, hi, point_at_lo)`` with ``losssup(lo) > loss_tol`` and
    ``losssup(hi) <= loss_tol``.
    """
    sub = opts.replace(verify=False)
    if start is None:
        start = max_cost_at_loss(problem, problem.ell_max, opts)

    def pred(c):
        p = max_loss_at_cost(problem, c, sub, target=2.0 * opts.loss_tol)
        return p.loss <= opts.loss_tol, p

    lo, hi, lo_pt, _ = _bracket(pred, start.cost, 1.0, start, None, max(opts.cost_xtol, 1e-7))
    return lo, hi, lo_pt


def critical_cost_consistency(model: PopulationModel, cost_fn: CostFunction = UNIFORM,
                              opts: SolverOptions = SolverOptions(),
                              constraints: ConstraintSet = ConstraintSet()):
    """Minimal costs to reach ``R_e <= 1`` and to reach zero infected fraction."""
    if r_e(model, np.ones(model.n)) <= 1.0:
        return 0.0, 0.0
    p_re = Problem(model, LOSS_RE, cost_fn, constraints)
    p_i = Problem(model, LOSS_I, cost_fn, constraints)
    # solved directly on I, not through the R_e <= 1 shortcut, so the two agree only if the theory does
    return min_cost_at_loss(p_re, 1.0, opts).cost, _min_cost_by_bisection(p_i, 0.0, opts).cost


# --------------------------------------------------------------------------
# brute-force oracle and sampling


@dataclass
class OracleResult:
    """Outcomes on the lattice ``{0, 1/steps, ..., 1}^n`` and their envelopes."""

    costs: np.ndarray
    losses: np.ndarray
    etas: np.ndarray
    steps: int

    def __post_init__(self):
        order = np.lexsort((self.losses, self.costs))
        self.costs, self.losses, self.etas = self.costs[order], self.losses[order], self.etas[order]
        self._cum_min = np.minimum.accumulate(self.losses)
        self._rev_max = np.maximum.accumulate(self.losses[::-1])[::-1]
        by_loss = np.argsort(self.losses, kind="stable")
        self._loss_sorted = self.losses[by_loss]
        self._cost_min_by_loss = np.minimum.accumulate(self.costs[by_loss])
        self._cost_max_by_loss = np.maximum.accumulate(self.costs[by_loss][::-1])[::-1]

    def best_strategy(self, c, sense="min"):
        """Lattice strategy attaining ``lossinf(c)`` (or ``losssup(c)`` for ``"max"``)."""
        if sense == "min":
            idx = np.flatnonzero(self.costs <= c + 1e-12)
            pick = np.argmin if idx.size else None
        else:
            idx = np.flatnonzero(self.costs >= c - 1e-12)
            pick = np.argmax if idx.size else None
        return None if pick is None else self.etas[idx[pick(self.losses[idx])]]

    @property
    def cost_step(self) -> float:
        """Cost change of moving every group one lattice step."""
        return 1.0 / self.steps

    def lossinf(self, c):
        i = np.searchsorted(self.costs, c + 1e-12, side="right") - 1
        return float(self._cum_min[i]) if i >= 0 else np.inf

    def losssup(self, c):
        i = np.searchsorted(self.costs, c - 1e-12, side="left")
        return float(self._rev_max[i]) if i < self.costs.size else -np.inf

    def costinf(self, ell):
        i = np.searchsorted(self._loss_sorted, ell + 1e-12, side="right") - 1
        return float(self._cost_min_by_loss[i]) if i >= 0 else np.inf

    def costsup(self, ell):
        i = np.searchsorted(self._loss_sorted, ell - 1e-12, side="left")
        return float(self._cost_max_by_loss[i]) if i < self._loss_sorted.size else -np.inf

    def outcomes(self) -> List[Outcome]:
        return [Outcome(float(c), float(l)) for c, l in zip(self.costs, self.losses)]


def _batched_re(model, etas, chunk=20_000):
    """Spectral radius by dense eigenvalues, independent of power iteration."""
    scale = model.weights / model.gamma
    out = np.empty(len(etas))
    for s in range(0, len(etas), chunk):
        e = etas[s:s + chunk]
        mats = model.kernel[np.newaxis, :, :] * (e * scale)[:, np.newaxis, :]
        out[s:s + chunk] = np.abs(np.linalg.eigvals(mats)).max(axis=-1)
    return out


def grid_oracle(problem: Problem, steps: int) -> OracleResult:
    n = problem.n
    if n > 4 or (steps + 1) ** n > MAX_ORACLE_CELLS:
        raise TooLarge(f"lattice with {(steps + 1) ** n} cells for {n} groups is too large")
    axis = np.linspace(0.0, 1.0, steps + 1)
    etas = np.array(list(itertools.product(axis, repeat=n)))
    keep = np.array([problem.constraints.contains(e) for e in etas]) if problem.constraints.kind != "box" else None
    if keep is not None:
        etas = etas[keep]
    costs = (1.0 - etas) @ problem.cost_weights
    if problem.loss_kind == LOSS_RE:
        losses = _batched_re(problem.model, etas)
    else:
        losses = np.array([fast_equilibrium(problem.model, e).infected_fraction for e in etas])
    return OracleResult(costs, losses, etas, steps)


def _cached_oracle(problem, steps):
    key = ("oracle", steps)
    if key not in problem._cache:
        problem._cache[key] = grid_oracle(problem, steps)
    return problem._cache[key]


def feasible_region_sample(problem: Problem, samples: int, seed: int = 0, with_eta: bool = False):
    """Seeded outcomes: random strategies and the segments towards 0 and 1."""
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    cs, w = problem.constraints, problem.weights
    out = []
    for k in range(samples):
        eta = cs.project(rng.random(problem.n), w)
        t = rng.random()
        kind = k % 3
        if kind == 1:
            eta = t * eta + (1.0 - t)
        elif kind == 2:
            eta = t * eta
        o = problem.outcome(eta)
        out.append((o, eta) if with_eta else o)
    return out


# --------------------------------------------------------------------------
# CSV


def fmt(x: float) -> str:
    return f"{x:.12g}"


@contextmanager
def _sink(target):
    """Open ``target`` for writing unless it already is a text stream."""
    if hasattr(target, "write"):
        yield target
    else:
        with Path(target).open("w", newline="") as fh:
            yield fh


def write_frontier_csv(curve: FrontierCurve, target) -> None:
    n = len(curve.points[0].eta) if curve.points else 0
    with _sink(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["c", "ell", "status"] + [f"eta_{i + 1}" for i in range(n)])
        for p in sorted(curve.points, key=lambda p: p.cost):
            writer.writerow([fmt(p.cost), fmt(p.loss), p.solver_status] + [fmt(x) for x in p.eta])


def read_frontier_csv(path):
    """Rows of ``(c, ell)`` from a frontier or oracle CSV."""
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        return [(float(r["c"]), float(r["ell"])) for r in reader]


def write_outcomes_csv(outcomes, target) -> None:
    rows = sorted((o.cost, o.loss) for o in outcomes)
    with _sink(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["c", "ell"])
        for c, l in rows:
            writer.writerow([fmt(c), fmt(l)])
