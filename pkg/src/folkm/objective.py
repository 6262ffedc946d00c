"""Objective assembly: fitting risk + RKHS regularizer + constraint penalty.

The hypothesis for each predicate is a kernel expansion over a fixed
support, so the full objective is a function of the finite weight
vectors.  Because every labeled tuple and every grounded atom tuple lies
in the support, one Gram matvec per predicate yields all needed function
values, and the exact gradient comes back through the same matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptyLabeledSet, ObjectiveError
from .grounding import GroundedGraph, eval_graph
from .kernels import KernelExpansion, expansion_eval, rkhs_norm_sq

SQUARED = "squared"
HINGE = "hinge"

#: diagonal jitter added to Gram matrices before direct solves (tests/oracles)
DEFAULT_JITTER = 1e-10


@dataclass
class ObjectiveConfig:
    lambda_pi: dict[str, float]        # per-predicate fitting weight, > 0
    lambda_r: dict[str, float]         # per-predicate regularization weight, > 0
    lambda_v: dict[str, float] = field(default_factory=dict)  # per-clause, >= 0
    loss_kind: str = SQUARED

    def __post_init__(self):
        for name, lam in self.lambda_pi.items():
            if not lam > 0:
                raise ObjectiveError(f"lambda_pi['{name}'] must be > 0")
        for name, lam in self.lambda_r.items():
            if not lam > 0:
                raise ObjectiveError(f"lambda_r['{name}'] must be > 0")
        for name, lam in self.lambda_v.items():
            if lam < 0:
                raise ObjectiveError(f"lambda_v['{name}'] must be >= 0")
        if self.loss_kind not in (SQUARED, HINGE):
            raise ObjectiveError(f"unknown loss kind {self.loss_kind!r}")


def loss_values(kind: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    if kind == SQUARED:
        return (z - y) ** 2
    margin = 1.0 - (2.0 * y - 1.0) * (2.0 * z - 1.0)
    return np.maximum(0.0, margin)


def loss_grads(kind: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    if kind == SQUARED:
        return 2.0 * (z - y)
    margin = 1.0 - (2.0 * y - 1.0) * (2.0 * z - 1.0)
    return np.where(margin > 0.0, -2.0 * (2.0 * y - 1.0), 0.0)


def make_predictor(expansions: dict[str, KernelExpansion], samples):
    """Raw-output atom evaluator over trained expansions."""
    def predict(predicate: str, args: tuple[int, ...]) -> float:
        return expansion_eval(expansions[predicate], args, samples)
    return predict


# --- standalone terms ------------------------------------------------------

def empirical_risk(expansions, labeled, samples, cfg: ObjectiveConfig) -> float:
    """Weighted mean fitting loss over the labeled sets."""
    total = 0.0
    for ls in labeled:
        lam = cfg.lambda_pi.get(ls.predicate, 1.0)
        if len(ls) == 0:
            if lam > 0:
                raise EmptyLabeledSet(ls.predicate)
            continue
        exp = expansions[ls.predicate]
        z = np.array([expansion_eval(exp, t, samples) for t in ls.tuples])
        total += lam * float(np.mean(loss_values(cfg.loss_kind, z, ls.targets)))
    return total


def regularizer(expansions, grams, cfg: ObjectiveConfig) -> float:
    """Sum of per-predicate weighted squared RKHS norms."""
    total = 0.0
    for name, exp in expansions.items():
        total += cfg.lambda_r.get(name, 0.0) * rkhs_norm_sq(exp, grams[name])
    return total


def constraint_penalty(expansions, graphs, samples, cfg: ObjectiveConfig,
                       names=None) -> float:
    """Weighted sum of clause penalties under the current hypothesis."""
    predict = make_predictor(expansions, samples)
    names = names or [f"c{i}" for i in range(len(graphs))]
    total = 0.0
    for name, g in zip(names, graphs):
        penalty, _ = eval_graph(g, predict)
        total += cfg.lambda_v.get(name, 1.0) * penalty
    return total


# --- compiled fast path ------------------------------------------------------

@dataclass
class CompiledProblem:
    """Index structures binding graphs and labels to expansion supports."""

    samples: object
    grams: dict[str, np.ndarray]
    labeled_rows: dict[str, np.ndarray]
    labeled_targets: dict[str, np.ndarray]
    graphs: list[GroundedGraph]
    clause_names: list[str]
    # per graph: predicate -> (atom slots, support rows)
    atom_gather: list[dict[str, tuple[np.ndarray, np.ndarray]]]


class ObjectiveTerms(NamedTuple):
    risk: float
    reg: float
    penalty: float           # full-weight constraint term, sum of lambda_v * p_h
    total: float             # risk + reg + scale * penalty (the optimized value)
    per_clause: dict[str, float]   # unweighted clause penalties p_h
    grads: dict[str, np.ndarray]
    grad_norm: float


def evaluate_objective(expansions: dict[str, KernelExpansion],
                       compiled: CompiledProblem, cfg: ObjectiveConfig,
                       constraint_scale: float = 1.0) -> ObjectiveTerms:
    """Objective terms and exact per-weight gradient in one pass.

    ``constraint_scale`` multiplies the constraint term (used by the
    trainer's ramp); the reported ``penalty`` stays at full weight.
    """
    fvals = {}
    dfd = {}
    for name, exp in expansions.items():
        fvals[name] = compiled.grams[name] @ exp.weights
        dfd[name] = np.zeros_like(fvals[name])

    risk = 0.0
    for name, rows in compiled.labeled_rows.items():
        lam = cfg.lambda_pi.get(name, 1.0)
        if rows.size == 0:
            if lam > 0:
                raise EmptyLabeledSet(name)
            continue
        y = compiled.labeled_targets[name]
        z = fvals[name][rows]
        risk += lam * float(np.mean(loss_values(cfg.loss_kind, z, y)))
        np.add.at(dfd[name], rows, (lam / rows.size) * loss_grads(cfg.loss_kind, z, y))

    reg = 0.0
    for name, exp in expansions.items():
        reg += cfg.lambda_r.get(name, 0.0) * float(exp.weights @ fvals[name])

    penalty = 0.0
    per_clause = {}
    for cname, g, gather in zip(compiled.clause_names, compiled.graphs,
                                compiled.atom_gather):
        lam = cfg.lambda_v.get(cname, 1.0)
        atom_raw = np.empty(len(g.atoms))
        for pred, (slots, rows) in gather.items():
            atom_raw[slots] = fvals[pred][rows]
        values = g.forward(atom_raw)
        p = float(values[g.root])
        per_clause[cname] = p
        penalty += lam * p
        if lam * constraint_scale != 0.0:
            atom_grad = g.backward(lam * constraint_scale)
            for pred, (slots, rows) in gather.items():
                np.add.at(dfd[pred], rows, atom_grad[slots])

    grads = {}
    sq = 0.0
    for name, exp in expansions.items():
        lam_r = cfg.lambda_r.get(name, 0.0)
        grad = compiled.grams[name] @ dfd[name] + 2.0 * lam_r * fvals[name]
        grads[name] = grad
        sq += float(grad @ grad)

    total = risk + reg + constraint_scale * penalty
    return ObjectiveTerms(risk, reg, penalty, total, per_clause, grads,
                          float(np.sqrt(sq)))


def objective_and_gradient(expansions, compiled: CompiledProblem,
                           cfg: ObjectiveConfig) -> tuple[float, dict[str, np.ndarray]]:
    """Full objective E = R + N + V and its gradient per weight vector."""
    terms = evaluate_objective(expansions, compiled, cfg)
    return terms.total, terms.grads
