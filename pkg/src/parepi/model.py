"""Discretized heterogeneous SIS model, vaccination strategies and costs.

A model is a finite set of groups with population weights ``weights``
(summing to one), recovery rates ``gamma`` and a transmission kernel
``kernel`` where ``kernel[i, j]`` is the rate at which group ``j`` infects
group ``i``.  A strategy ``eta`` gives, per group, the fraction of the
population that is *not* vaccinated: ``eta = 1`` everywhere means doing
nothing, ``eta = 0`` means vaccinating everybody.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ParseError, ValidationError

WEIGHT_SUM_TOL = 1e-9
MIN_COST_DENSITY = 1e-9
# keeps renormalization idempotent so that save/load round-trips exactly
_ROUNDOFF = 4e-16


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """Finite metapopulation SIS model.

    Weights within ``1e-9`` of summing to one are renormalized exactly.  A
    cost density, when given, is rescaled so that vaccinating everybody
    costs one: ``sum(weights * cost_density) == 1``.
    """

    weights: np.ndarray
    gamma: np.ndarray
    kernel: np.ndarray
    cost_density: Optional[np.ndarray] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        try:
            w = np.asarray(self.weights, dtype=float)
            g = np.asarray(self.gamma, dtype=float)
            k = np.asarray(self.kernel, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"non-numeric model entry: {exc}") from exc
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("weights must be a non-empty vector")
        n = w.size
        if g.shape != (n,):
            raise ValidationError(f"gamma has shape {g.shape}, expected ({n},)")
        if k.shape != (n, n):
            raise ValidationError(f"kernel has shape {k.shape}, expected ({n}, {n})")
        for label, arr in (("weights", w), ("gamma", g), ("kernel", k)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{label} has non-finite entries")
        if np.any(w <= 0):
            raise ValidationError("weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights sum to {w.sum():.12g}, expected 1")
        if np.any(g <= 0):
            raise ValidationError("gamma must be positive")
        if np.any(k < 0):
            raise ValidationError("kernel entries must be non-negative")
        if abs(w.sum() - 1.0) > _ROUNDOFF * n:
            w = w / w.sum()
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "gamma", _readonly(g))
        object.__setattr__(self, "kernel", _readonly(k))

        if self.cost_density is not None:
            d = np.asarray(self.cost_density, dtype=float)
            if d.shape != (n,):
                raise ValidationError(f"cost_density has shape {d.shape}, expected ({n},)")
            if not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise ValidationError("cost_density must be finite and positive")
            scale = np.dot(w, d)
            if abs(scale - 1.0) > _ROUNDOFF * n:
                d = d / scale
            object.__setattr__(self, "cost_density", _readonly(d))

    @property
    def n(self) -> int:
        return self.weights.size

    def with_kernel(self, kernel) -> "PopulationModel":
        return PopulationModel(self.weights, self.gamma, kernel, self.cost_density, self.name)

    def permuted(self, perm: Sequence[int]) -> "PopulationModel":
        """Relabel groups: new group ``i`` is old group ``perm[i]``."""
        p = np.asarray(perm)
        d = None if self.cost_density is None else self.cost_density[p]
        return PopulationModel(self.weights[p], self.gamma[p], self.kernel[np.ix_(p, p)], d, self.name)

    def to_dict(self) -> dict:
        out = {
            "weights": self.weights.tolist(),
            "gamma": self.gamma.tolist(),
            "kernel": self.kernel.tolist(),
        }
        if self.cost_density is not None:
            out["cost_density"] = self.cost_density.tolist()
        return out

    def __eq__(self, other):
        if not isinstance(other, PopulationModel):
            return NotImplemented
        same_density = (self.cost_density is None) == (other.cost_density is None)
        if same_density and self.cost_density is not None:
            same_density = np.array_equal(self.cost_density, other.cost_density)
        return (
            same_density
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.gamma, other.gamma)
            and np.array_equal(self.kernel, other.kernel)
        )

    __hash__ = None


def as_strategy(eta, n: Optional[int] = None, atol: float = 1e-12) -> np.ndarray:
    """Validate a strategy vector; entries within ``atol`` of [0, 1] are clipped."""
    e = np.array(eta, dtype=float).reshape(-1)
    if n is not None and e.size != n:
        raise ValidationError(f"strategy has {e.size} entries, model has {n} groups")
    if not np.all(np.isfinite(e)) or np.any(e < -atol) or np.any(e > 1 + atol):
        raise ValidationError("strategy entries must lie in [0, 1]")
    return np.clip(e, 0.0, 1.0)


def zeros(model: PopulationModel) -> np.ndarray:
    return np.zeros(model.n)


def ones(model: PopulationModel) -> np.ndarray:
    return np.ones(model.n)


# --------------------------------------------------------------------------
# constraint sets


def _pava_clip(y, w):
    return np.clip(isotonic_regression(y, weights=w, increasing=True).x, 0.0, 1.0)


def _oscillation_anchor(x, w, delta):
    """Lower end ``m`` of the best band ``[m, m + delta]`` for ``x``.

    The squared weighted distance from ``x`` to the band is a convex
    piecewise quadratic in ``m``; its derivative is piecewise linear with
    breakpoints at ``x`` and ``x - delta``, so the root is found exactly.
    """
    hi = 1.0 - delta

    def slope(m):
        return np.dot(w, np.maximum(m - x, 0.0) - np.maximum(x - m - delta, 0.0))

    knots = np.unique(np.clip(np.concatenate([x, x - delta, [0.0, hi]]), 0.0, hi))
    s = np.array([slope(m) for m in knots])
    if s[0] >= 0:
        return 0.0
    if s[-1] <= 0:
        return hi
    k = int(np.searchsorted(s, 0.0))  # s[k-1] < 0 <= s[k]
    a, b = knots[k - 1], knots[k]
    return a + (b - a) * (-s[k - 1]) / (s[k] - s[k - 1])


@dataclass(frozen=True)
class ConstraintSet:
    """Admissible strategies.

    ``kind`` is ``"box"`` (all of [0, 1]^n), ``"osc"`` (oscillation
    ``max - min <= delta``) or ``"ord"`` (non-decreasing along ``order``;
    ``order=None`` means the natural group order).
    """

    kind: str = "box"
    delta: Optional[float] = None
    order: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("box", "osc", "ord"):
            raise ValidationError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "osc" and not (self.delta is not None and 0.0 < self.delta < 1.0):
            raise ValidationError("oscillation constraint needs delta in (0, 1)")
        if self.order is not None:
            object.__setattr__(self, "order", tuple(int(i) for i in self.order))

    @classmethod
    def box(cls):
        return cls("box")

    @classmethod
    def oscillation(cls, delta):
        return cls("osc", delta=float(delta))

    @classmethod
    def ordered(cls, order=None):
        return cls("ord", order=None if order is None else tuple(order))

    @classmethod
    def parse(cls, text: str) -> "ConstraintSet":
        """Parse ``box``, ``osc:DELTA``, ``ord`` or ``ord:2,0,1``."""
        head, _, tail = text.partition(":")
        if head == "box" and not tail:
            return cls.box()
        if head == "osc":
            try:
                return cls.oscillation(float(tail))
            except ValueError as exc:
                raise ValidationError(f"bad oscillation constraint {text!r}") from exc
        if head == "ord":
            if not tail:
                return cls.ordered()
            try:
                return cls.ordered([int(t) for t in tail.split(",")])
            except ValueError as exc:
                raise ValidationError(f"bad ordering {text!r}") from exc
        raise ValidationError(f"unknown constraint {text!r}")

    def _perm(self, n):
        if self.order is None:
            return np.arange(n)
        p = np.asarray(self.order)
        if sorted(p.tolist()) != list(range(n)):
            raise ValidationError(f"ordering {self.order} is not a permutation of {n} groups")
        return p

    def contains(self, eta, atol: float = 1e-12) -> bool:
        e = np.asarray(eta, dtype=float)
        if np.any(e < -atol) or np.any(e > 1 + atol):
            return False
        if self.kind == "osc":
            return bool(e.max() - e.min() <= self.delta + atol)
        if self.kind == "ord":
            return bool(np.all(np.diff(e[self._perm(e.size)]) >= -atol))
        return True

    def project(self, x, weights=None) -> np.ndarray:
        """Nearest admissible strategy in the ``weights``-weighted norm."""
        x = np.asarray(x, dtype=float)
        w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
        if self.kind == "box":
            return np.clip(x, 0.0, 1.0)
        if self.kind == "ord":
            p = self._perm(x.size)
            out = np.empty_like(x)
            out[p] = _pava_clip(x[p], w[p])
            return out
        m = _oscillation_anchor(x, w, self.delta)
        return np.clip(x, m, m + self.delta)

    def project_budget(self, x, weights, density, level: float, sense: str = "ge") -> np.ndarray:
        """Project onto the admissible set intersected with a half-space.

        The half-space is ``sum(weights * density * eta) >= level`` for
        ``sense == "ge"`` (a cost cap) and ``<= level`` for ``"le"`` (a
        cost floor).  The projection has the form ``project(x + t * density)``
        for a scalar multiplier ``t`` whose sign follows ``sense``; the
        constrained quantity is monotone in ``t``: on the box it is piecewise
        linear and solved from its breakpoints, otherwise ``t`` is bisected.
        The returned point always satisfies the half-space constraint.
        """
        x = np.asarray(x, dtype=float)
        w = np.asarray(weights, dtype=float)
        d = np.asarray(density, dtype=float)
        sign = 1.0 if sense == "ge" else -1.0
        wd = w * d

        def value(t):
            y = self.project(x + sign * t * d, w)
            return sign * np.dot(wd, y), y

        target = sign * level
        v0, y0 = value(0.0)
        if v0 >= target:
            return y0
        lo = 0.0
        hi = (1.0 + np.abs(x).max()) / d.min() + 1.0
        vh, yh = value(hi)
        while vh < target:
            hi *= 2.0
            vh, yh = value(hi)
            if hi > 1e12:
                break
        if self.kind == "box":
            # the constrained sum is piecewise linear in t between these breakpoints
            knots = np.concatenate([-x / (sign * d), (1.0 - x) / (sign * d)])
            knots = np.unique(knots[(knots > 0.0) & (knots < hi)])
            vals = np.array([value(t)[0] for t in knots])
            k = int(np.searchsorted(vals, target))  # vals[k - 1] < target <= vals[k]
            t_lo, v_lo = (knots[k - 1], vals[k - 1]) if k > 0 else (0.0, v0)
            if k < knots.size:
                t_hi, v_hi = knots[k], vals[k]
            else:
                t_hi, v_hi = hi, vh
            t = t_lo + (t_hi - t_lo) * (target - v_lo) / (v_hi - v_lo) if v_hi > v_lo else t_hi
            vt, yt = value(t)
            if vt >= target:
                return yt
            lo, hi = t, t_hi
            vh, yh = value(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            vm, ym = value(mid)
            if vm >= target:
                hi, yh = mid, ym
            else:
                lo = mid
        return yh


def project(eta_raw, cs: ConstraintSet, weights=None) -> np.ndarray:
    return cs.project(eta_raw, weights)


# --------------------------------------------------------------------------
# costs


@dataclass(frozen=True)
class CostFunction:
    """``uniform``: vaccinated fraction; ``affine``: density-weighted."""

    kind: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("uniform", "affine"):
            raise ValidationError(f"unknown cost kind {self.kind!r}")

    def density(self, model: PopulationModel) -> np.ndarray:
        if self.kind == "uniform":
            return np.ones(model.n)
        if model.cost_density is None:
            raise ValidationError("affine cost needs a model with cost_density")
        return np.asarray(model.cost_density)

    def __call__(self, model: PopulationModel, eta) -> float:
        return cost(model, self, eta)


UNIFORM = CostFunction("uniform")
AFFINE = CostFunction("affine")


def cost(model: PopulationModel, cf: CostFunction, eta) -> float:
    e = np.asarray(eta, dtype=float)
    if e.shape != (model.n,):
        raise ValidationError(f"strategy has shape {e.shape}, model has {model.n} groups")
    return float(np.dot(model.weights * cf.density(model), 1.0 - e))


def to_uniform_cost_model(model: PopulationModel) -> PopulationModel:
    """Fold the affine cost into weights and kernel.

    The returned model carries no cost density; its uniform cost and its
    effective reproduction number agree with the affine cost and reproduction
    number of ``model`` for every strategy.
    """
    d = model.cost_density
    if d is None:
        raise ValidationError("model has no cost_density")
    if np.any(d < MIN_COST_DENSITY):
        raise ValidationError("cost_density must be bounded away from 0")
    return PopulationModel(
        model.weights * d,
        model.gamma,
        model.kernel / d[np.newaxis, :],
        None,
        model.name,
    )


# --------------------------------------------------------------------------
# construction and I/O


def discretize_kernel(
    k_fn: Callable[[float, float], float],
    gamma_fn: Callable[[float], float],
    n: int,
) -> PopulationModel:
    """Midpoint-rule discretization of a model on [0, 1] with Lebesgue measure."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    x = (np.arange(n) + 0.5) / n
    kernel = np.array([[float(k_fn(xi, yj)) for yj in x] for xi in x])
    gamma = np.array([float(gamma_fn(xi)) for xi in x])
    return PopulationModel(np.full(n, 1.0 / n), gamma, kernel)


def model_from_dict(data) -> PopulationModel:
    if not isinstance(data, dict):
        raise ParseError("model file must hold a JSON object")
    missing = [key for key in ("weights", "gamma", "kernel") if key not in data]
    if missing:
        raise ParseError(f"model file lacks {', '.join(missing)}")
    try:
        weights = np.array(data["weights"], dtype=float)
        gamma = np.array(data["gamma"], dtype=float)
        kernel = np.array(data["kernel"], dtype=float)
        density = data.get("cost_density")
        density = None if density is None else np.array(density, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"model file has non-numeric or ragged entries: {exc}") from exc
    return PopulationModel(weights, gamma, kernel, density, str(data.get("name", "")))


def load_model(path) -> PopulationModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    model = model_from_dict(data)
    if not model.name:
        object.__setattr__(model, "name", path.stem)
    return model


def save_model(model: PopulationModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")
