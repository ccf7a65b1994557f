"""Command-line interface.

Subcommands: ``analyze``, ``simulate``, ``frontier``, ``oracle``, ``plot``.
Every failure prints one line ``error <code>: <message>`` on stderr and
exits with status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import frontier as fr
from .connectivity import classify
from .equilibrium import DEFAULT_TOL, integrate_sis, maximal_equilibrium, max_stable_dt, write_trajectory_csv
from .errors import ParepiError, ParseError, ValidationError
from .model import ConstraintSet, CostFunction, as_strategy, load_model
from .spectral import r0 as compute_r0


class UsageError(ParepiError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} {text!r}")
        if not value > 0:
            raise argparse.ArgumentTypeError(f"{text} must be positive")
        return value
    return parse


def parse_eta(text: str, n: int) -> np.ndarray:
    """Comma-separated reals or ``@file.json`` holding ``{"eta": [...]}``.

    A single value is broadcast to every group.
    """
    if text.startswith("@"):
        path = Path(text[1:])
        try:
            data = json.loads(path.read_text())
            values = data["eta"]
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: expected a JSON object with key 'eta'") from exc
    else:
        values = [t for t in text.split(",") if t.strip()]
    try:
        eta = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"strategy has non-numeric entries: {text!r}") from exc
    if eta.ndim != 1:
        raise ParseError("strategy must be a flat list of numbers")
    if eta.size == 1 and n > 1:
        eta = np.full(n, eta[0])
    return as_strategy(eta, n)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parepi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, loss=True):
        p.add_argument("--model", required=True, help="model JSON file")
        if loss:
            p.add_argument("--loss", choices=["re", "i"], default="re")
            p.add_argument("--cost", choices=["uniform", "affine"], default="uniform")
            p.add_argument("--constraint", default="box", help="box, osc:DELTA or ord")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("analyze", help="connectivity report, R_0 and I_0 as JSON")
    common(p, loss=False)

    p = sub.add_parser("simulate", help="RK4 trajectory from the all-infected state as CSV")
    common(p, loss=False)
    p.add_argument("--eta", default="1", help="strategy: LIST or @FILE (default: no vaccination)")
    p.add_argument("--t-max", type=float, help="final time (default 200 / min gamma)")
    p.add_argument("--dt", type=_positive(float), help="step (default: the stability bound)")

    p = sub.add_parser("frontier", help="Pareto or anti-Pareto frontier as CSV")
    common(p)
    direction = p.add_mutually_exclusive_group()
    direction.add_argument("--pareto", dest="anti", action="store_false", help="best strategies (default)")
    direction.add_argument("--anti", dest="anti", action="store_true", help="worst strategies")
    p.set_defaults(anti=False)
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-tol", type=_positive(float), default=fr.SolverOptions.loss_tol)
    p.add_argument("--oracle-tol", type=_positive(float), default=fr.SolverOptions.oracle_tol)

    p = sub.add_parser("oracle", help="lattice outcomes (or seeded random outcomes) as CSV")
    common(p)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--samples", type=int, help="random feasible outcomes instead of the lattice")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("plot", help="SVG of frontiers and feasible outcomes")
    p.add_argument("--frontier", help="Pareto frontier CSV (solid)")
    p.add_argument("--anti-frontier", help="anti-Pareto frontier CSV (dashed)")
    p.add_argument("--feasible", help="outcome CSV with columns c,ell (scatter)")
    p.add_argument("--title", default="")
    p.add_argument("--out", help="output SVG (default: stdout)")
    return parser


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs; built from parsed flags or by hand."""

    command: str
    model_path: Optional[str] = None
    loss_kind: str = "re"
    cost_kind: str = "uniform"
    constraint: str = "box"
    grid: int = 21
    steps: int = 50
    samples: Optional[int] = None
    seed: int = 0
    anti: bool = False
    eta: str = "1"
    t_max: Optional[float] = None
    dt: Optional[float] = None
    out: Optional[str] = None
    frontier: Optional[str] = None
    anti_frontier: Optional[str] = None
    feasible: Optional[str] = None
    title: str = ""
    loss_tol: float = fr.SolverOptions.loss_tol
    oracle_tol: float = fr.SolverOptions.oracle_tol
    fp_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.command != "plot" and not self.model_path:
            raise ValidationError("--model is required")
        for name in ("loss_tol", "oracle_tol", "fp_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.grid < 2:
            raise ValidationError("--grid must be at least 2")
        if self.steps < 1:
            raise ValidationError("--steps must be at least 1")
        if self.samples is not None and self.samples < 1:
            raise ValidationError("--samples must be at least 1")

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        given = vars(ns)
        renamed = {"model": "model_path", "loss": "loss_kind", "cost": "cost_kind"}
        values = {renamed.get(k, k): v for k, v in given.items()}
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


# --------------------------------------------------------------------------
# commands


def _problem(cfg: RunConfig) -> fr.Problem:
    model = load_model(cfg.model_path)
    return fr.Problem(model, cfg.loss_kind, CostFunction(cfg.cost_kind), ConstraintSet.parse(cfg.constraint))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args: RunConfig) -> int:
    model = load_model(args.model_path)
    report = classify(model)
    radius = compute_r0(model)
    eq = maximal_equilibrium(model, np.ones(model.n), tol=args.fp_tol)
    data = report.to_dict()
    data.update(n=model.n, r0=radius, i0=eq.infected_fraction)
    _emit(json.dumps(data, indent=2) + "\n", args.out)
    return 0


def cmd_simulate(args: RunConfig) -> int:
    model = load_model(args.model_path)
    eta = parse_eta(args.eta, model.n)
    t_max = 200.0 / float(model.gamma.min()) if args.t_max is None else args.t_max
    dt = max_stable_dt(model) if args.dt is None else args.dt
    traj = integrate_sis(model, eta, np.ones(model.n), t_max, dt)
    write_trajectory_csv(traj, args.out or sys.stdout)
    return 0


def cmd_frontier(args: RunConfig) -> int:
    problem = _problem(args)
    opts = fr.SolverOptions(loss_tol=args.loss_tol, oracle_tol=args.oracle_tol, seed=args.seed)
    solve = fr.anti_pareto_frontier if args.anti else fr.pareto_frontier
    curve = solve(problem, args.grid, opts)
    fr.write_frontier_csv(curve, args.out or sys.stdout)
    weak = sum(p.solver_status == fr.BEST_EFFORT for p in curve.points)
    if weak:
        print(f"warning best_effort: {weak} of {len(curve.points)} points not certified", file=sys.stderr)
    if curve.c0_bracket is not None:
        lo, hi = curve.c0_bracket
        print(f"info c0: bracket [{fr.fmt(lo)}, {fr.fmt(hi)}]", file=sys.stderr)
    return 0


def cmd_oracle(args: RunConfig) -> int:
    problem = _problem(args)
    if args.samples is not None:
        outcomes = fr.feasible_region_sample(problem, args.samples, args.seed)
    else:
        outcomes = fr.grid_oracle(problem, args.steps).outcomes()
    fr.write_outcomes_csv(outcomes, args.out or sys.stdout)
    return 0


def cmd_plot(args: RunConfig) -> int:
    if not (args.frontier or args.anti_frontier or args.feasible):
        raise ValidationError("plot needs at least one of --frontier, --anti-frontier, --feasible")
    load = lambda path: _read_points(path) if path else []
    svg = render_svg(load(args.frontier), load(args.anti_frontier), load(args.feasible), args.title)
    _emit(svg, args.out)
    return 0


def _read_points(path):
    try:
        return fr.read_frontier_csv(path)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: expected numeric columns c and ell") from exc


# --------------------------------------------------------------------------
# SVG


_W, _H, _PAD = 480, 360, 50


def render_svg(pareto, anti, feasible, title: str = "") -> str:
    """Cost on the x axis over [0, 1], loss on the y axis over [0, ell_max]."""
    losses = [l for pts in (pareto, anti, feasible) for _, l in pts]
    ell_max = max(losses) if losses and max(losses) > 0 else 1.0
    sx = lambda c: _PAD + c * (_W - 2 * _PAD)
    sy = lambda l: _H - _PAD - l / ell_max * (_H - 2 * _PAD)
    pt = lambda c, l: f"{sx(c):.2f},{sy(l):.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>']
    x0, y0, x1, y1 = sx(0), sy(0), sx(1), sy(ell_max)
    out.append(f'<path d="M{x0:.2f},{y1:.2f} L{x0:.2f},{y0:.2f} L{x1:.2f},{y0:.2f}" '
               'fill="none" stroke="black" stroke-width="1"/>')
    for frac in (0.0, 0.5, 1.0):
        out.append(f'<text x="{sx(frac):.2f}" y="{y0 + 16:.2f}" font-size="11" text-anchor="middle">'
                   f'{frac:g}</text>')
        out.append(f'<text x="{x0 - 6:.2f}" y="{sy(frac * ell_max) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{frac * ell_max:.3g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{_H - 12}" font-size="13" text-anchor="middle">'
               'cost c</text>')
    out.append(f'<text x="14" y="{(y0 + y1) / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 14 {(y0 + y1) / 2:.2f})">loss ℓ</text>')
    if title:
        out.append(f'<text x="{_W / 2:.1f}" y="20" font-size="14" text-anchor="middle">{_escape(title)}</text>')

    for c, l in feasible:
        out.append(f'<circle cx="{sx(c):.2f}" cy="{sy(l):.2f}" r="1.5" fill="#9aa" fill-opacity="0.6"/>')
    if pareto:
        out.append(_polyline(pareto, pt, "#1f4e9c", dashed=False))
    if anti:
        anti = sorted(anti)
        isolated = []
        # the outcome (1, 0) after a positive loss is a separate component
        if len(anti) >= 2 and anti[-1][1] == 0.0 and anti[-2][1] > 0.0 and anti[-1][0] >= 1.0 - 1e-12:
            isolated = [anti.pop()]
        out.append(_polyline(anti, pt, "#b23a2a", dashed=True))
        for c, l in isolated:
            out.append(f'<circle cx="{sx(c):.2f}" cy="{sy(l):.2f}" r="3" fill="#b23a2a"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _polyline(points, pt, color, dashed):
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    coords = " ".join(pt(c, l) for c, l in sorted(points))
    return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"{dash}/>'


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# --------------------------------------------------------------------------


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "frontier": cmd_frontier,
    "oracle": cmd_oracle,
    "plot": cmd_plot,
}


def run(config: RunConfig) -> int:
    """Execute one command and return its exit code; module errors propagate."""
    return COMMANDS[config.command](config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(RunConfig.from_args(build_parser().parse_args(argv)))
    except UsageError as exc:
        print(f"error {exc.code}: {_one_line(exc)}", file=sys.stderr)
        return 2
    except ParepiError as exc:
        print(f"error {exc.code}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error {type(exc).__name__.lower()}: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


if __name__ == "__main__":
    sys.exit(main())
