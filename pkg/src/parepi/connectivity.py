"""Invariant sets, atoms and kernel classification.

The support digraph has an edge ``j -> i`` whenever ``kernel[i, j] > 0``,
read "group j infects group i".  A set of groups is invariant when it
infects nothing outside itself.  For a finite model with positive weights
the atoms of the sigma-field generated by invariant sets are the strongly
connected components of this digraph; the non-zero atoms are those whose
restricted kernel has positive spectral radius.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .errors import NotMonatomic
from .model import PopulationModel
from .spectral import spectral_radius

IRREDUCIBLE = "Irreducible"
QUASI_IRREDUCIBLE = "QuasiIrreducible"
MONATOMIC = "Monatomic"
GENERAL = "General"
DEGENERATE = "Degenerate"
MONATOMIC_KINDS = (IRREDUCIBLE, QUASI_IRREDUCIBLE, MONATOMIC)


@dataclass(frozen=True)
class ConnectivityReport:
    sccs: list
    nonzero_atoms: list = field(default_factory=list)
    classification: Optional[str] = None
    omega_a: Optional[frozenset] = None
    radii: list = field(default_factory=list)

    @property
    def is_monatomic(self) -> bool:
        return self.classification in MONATOMIC_KINDS

    def to_dict(self) -> dict:
        return {
            "sccs": [sorted(s) for s in self.sccs],
            "nonzero_atoms": [sorted(s) for s in self.nonzero_atoms],
            "classification": self.classification,
            "omega_a": None if self.omega_a is None else sorted(self.omega_a),
        }


def support_graph(model: PopulationModel, tol: float = 0.0) -> nx.DiGraph:
    src_dst = np.argwhere(model.kernel.T > tol)  # rows (j, i): j infects i
    graph = nx.DiGraph()
    graph.add_nodes_from(range(model.n))
    graph.add_edges_from((int(j), int(i)) for j, i in src_dst)
    return graph


def is_invariant(model: PopulationModel, a, tol: float = 0.0) -> bool:
    """True iff no group in ``a`` infects a group outside ``a``."""
    inside = np.zeros(model.n, dtype=bool)
    inside[list(a)] = True
    return not np.any(model.kernel[np.ix_(~inside, inside)] > tol)


def condensation(model: PopulationModel, tol: float = 0.0) -> ConnectivityReport:
    """Strongly connected components, sinks of the infection DAG first."""
    graph = support_graph(model, tol)
    dag = nx.condensation(graph)
    # lexicographic tie-break keeps the order deterministic
    order = list(nx.lexicographical_topological_sort(dag, key=lambda c: min(dag.nodes[c]["members"])))
    sccs = [frozenset(dag.nodes[c]["members"]) for c in reversed(order)]
    return ConnectivityReport(sccs=sccs)


def induced_radius(model: PopulationModel, members, tol: float = 0.0) -> float:
    idx = sorted(members)
    block = model.kernel[np.ix_(idx, idx)]
    block = np.where(block > tol, block, 0.0)
    return spectral_radius(block, vectors=False).rho


def classify(model: PopulationModel, tol: float = 0.0) -> ConnectivityReport:
    sccs = condensation(model, tol).sccs
    radii = [induced_radius(model, s, tol) for s in sccs]
    atoms = [s for s, r in zip(sccs, radii) if r > 0.0]
    omega_a = None
    if not np.any(model.kernel > tol):
        kind = DEGENERATE
    elif len(sccs) == 1 and radii[0] > 0:
        kind = IRREDUCIBLE
    elif len(atoms) == 1:
        inside = np.zeros(model.n, dtype=bool)
        inside[list(atoms[0])] = True
        outside = model.kernel > tol
        outside[np.ix_(inside, inside)] = False
        kind = MONATOMIC if outside.any() else QUASI_IRREDUCIBLE
    else:
        kind = GENERAL
    if kind in MONATOMIC_KINDS:
        omega_a = atoms[0]
    return ConnectivityReport(sccs=sccs, nonzero_atoms=atoms, classification=kind,
                              omega_a=omega_a, radii=radii)


def reachable_from(model: PopulationModel, a, tol: float = 0.0) -> frozenset:
    """Groups infected, directly or not, by ``a`` (including ``a``)."""
    graph = support_graph(model, tol)
    out = set(a)
    for node in a:
        out |= nx.descendants(graph, node)
    return frozenset(out)


def atom_indicator_strategy(report: ConnectivityReport, n: Optional[int] = None) -> np.ndarray:
    """Vaccinate everybody outside the non-zero atom."""
    if not report.is_monatomic:
        raise NotMonatomic(f"kernel is {report.classification}, not monatomic")
    if n is None:
        n = sum(len(s) for s in report.sccs)
    eta = np.zeros(n)
    eta[sorted(report.omega_a)] = 1.0
    return eta


def report_json(report: ConnectivityReport, **extra) -> str:
    data = report.to_dict()
    data.update(extra)
    return json.dumps(data, indent=2)
