"""Two-stage primal gradient descent over the expansion weights.

Stage one ("labeled") fits the supervised examples under the RKHS
regularizer only; it is strictly convex for positive-definite kernels
with the squared loss.  Stage two ("abstraction") adds the constraint
penalty, optionally ramping its weight in linearly, and continues from
the stage-one solution.  Weights start at zero, the plain gradient step
halves the learning rate whenever the objective would increase, and a
stage ends on a gradient-norm tolerance or an epoch cap.  Everything is
deterministic for a fixed config and seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DivergenceDetected,
    NonFiniteLoss,
    SupportCapExceeded,
    TrainingError,
    UnknownPredicate,
)
from .fol import And, Atom, Iff, Implies, Not, Or
from .grounding import ground_clause, squash
from .kernels import KernelExpansion, expansion_eval, expansion_eval_vector, gram_matrix
from .objective import CompiledProblem, ObjectiveConfig, evaluate_objective

_MIN_LEARNING_RATE = 1e-16

STAGE_INIT = "init"
STAGE_LABELED = "labeled"
STAGE_ABSTRACTION = "abstraction"
STAGE_DONE = "done"


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    max_epochs_stage1: int = 2000
    max_epochs_stage2: int = 2000
    grad_tol: float = 1e-6
    constraint_ramp_epochs: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise TrainingError("learning_rate must be > 0")
        if self.max_epochs_stage1 < 1 or self.max_epochs_stage2 < 1:
            raise TrainingError("epoch caps must be >= 1")
        if not self.grad_tol > 0:
            raise TrainingError("grad_tol must be > 0")
        if self.constraint_ramp_epochs < 0:
            raise TrainingError("constraint_ramp_epochs must be >= 0")


class TraceRow(NamedTuple):
    epoch: int
    stage: str
    risk: float
    reg: float
    penalty: float
    total: float
    grad_norm: float


@dataclass
class TrainState:
    expansions: dict[str, KernelExpansion]
    stage: str = STAGE_INIT
    trace: list[TraceRow] = field(default_factory=list)
    stage1_expansions: dict[str, KernelExpansion] | None = None
    compiled: CompiledProblem | None = None


def build_supports(problem, graphs) -> dict[str, np.ndarray]:
    """Support tuples per learnable predicate: labeled tuples plus every
    tuple referenced by a grounded atom, deduplicated in first-seen order."""
    supports: dict[str, list[tuple[int, ...]]] = {}
    seen: dict[str, set] = {}
    for name in problem.learnable:
        supports[name] = []
        seen[name] = set()

    def add(name, t):
        if t not in seen[name]:
            seen[name].add(t)
            supports[name].append(t)

    for name, ls in problem.labeled.items():
        for t in map(tuple, ls.tuples.tolist()):
            add(name, t)
    for g in graphs:
        for key in g.atoms:
            add(key.predicate, key.args)

    out = {}
    for name, tuples in supports.items():
        if len(tuples) > problem.support_cap:
            raise SupportCapExceeded(name, len(tuples), problem.support_cap)
        arity = problem.signatures[name].arity
        out[name] = np.asarray(tuples, dtype=np.int64).reshape(len(tuples), arity)
    return out


def compile_clauses(problem) -> list:
    return [
        ground_clause(
            c.ast,
            problem.samples,
            problem.known,
            guard=problem.guards.get(problem.clause_name(i)),
            pool=problem.pool,
            max_groundings=problem.max_groundings,
            subsample=problem.subsample,
            seed=problem.train.seed,
        )
        for i, c in enumerate(problem.clauses)
    ]


def compile_problem(problem, graphs=None) -> tuple[dict[str, KernelExpansion], CompiledProblem]:
    """Ground the clauses, build supports, Gram matrices and gather maps."""
    if graphs is None:
        graphs = compile_clauses(problem)
    supports = build_supports(problem, graphs)

    expansions = {}
    grams = {}
    for name, support in supports.items():
        exp = KernelExpansion(name, problem.kernels[name], support,
                              np.zeros(support.shape[0]))
        expansions[name] = exp
        grams[name] = gram_matrix(exp.kernel, support, problem.samples)

    labeled_rows = {}
    labeled_targets = {}
    for name, ls in problem.labeled.items():
        rows = np.array(
            [expansions[name].row_of(t) for t in map(tuple, ls.tuples.tolist())],
            dtype=np.int64,
        ).reshape(len(ls))
        labeled_rows[name] = rows
        labeled_targets[name] = ls.targets

    atom_gather = []
    for g in graphs:
        by_pred: dict[str, tuple[list, list]] = {}
        for slot, key in enumerate(g.atoms):
            slots, rows = by_pred.setdefault(key.predicate, ([], []))
            slots.append(slot)
            rows.append(expansions[key.predicate].row_of(key.args))
        atom_gather.append(
            {
                pred: (np.asarray(s, dtype=np.int64), np.asarray(r, dtype=np.int64))
                for pred, (s, r) in by_pred.items()
            }
        )

    compiled = CompiledProblem(
        samples=problem.samples,
        grams=grams,
        labeled_rows=labeled_rows,
        labeled_targets=labeled_targets,
        graphs=graphs,
        clause_names=problem.clause_names,
        atom_gather=atom_gather,
    )
    return expansions, compiled


def _check_finite(terms):
    if not (np.isfinite(terms.total) and np.isfinite(terms.grad_norm)):
        raise NonFiniteLoss(f"objective became non-finite: E={terms.total!r}")


def _run_stage(expansions, compiled, cfg: ObjectiveConfig, train: TrainConfig,
               trace, stage: str, start_epoch: int) -> tuple[dict, int]:
    if stage == STAGE_LABELED:
        max_epochs = train.max_epochs_stage1
        scale_at = lambda i: 0.0
        ramp_done_at = lambda i: True
    else:
        max_epochs = train.max_epochs_stage2
        ramp = train.constraint_ramp_epochs
        scale_at = lambda i: 1.0 if ramp == 0 else min(1.0, (i + 1) / ramp)
        ramp_done_at = lambda i: scale_at(i) >= 1.0

    lr = train.learning_rate
    scale = scale_at(0)
    terms = evaluate_objective(expansions, compiled, cfg, scale)
    _check_finite(terms)
    initial_full = terms.risk + terms.reg + terms.penalty
    epoch = start_epoch
    if not trace:
        trace.append(TraceRow(epoch, stage, terms.risk, terms.reg,
                              terms.penalty, terms.risk + terms.reg + terms.penalty,
                              terms.grad_norm))

    for i in range(max_epochs):
        if terms.grad_norm < train.grad_tol and ramp_done_at(i):
            break
        new_scale = scale_at(i)
        if new_scale != scale:
            scale = new_scale
            terms = evaluate_objective(expansions, compiled, cfg, scale)
            _check_finite(terms)
        stepped = False
        while lr >= _MIN_LEARNING_RATE:
            trial = {
                name: exp.with_weights(exp.weights - lr * terms.grads[name])
                for name, exp in expansions.items()
            }
            trial_terms = evaluate_objective(trial, compiled, cfg, scale)
            _check_finite(trial_terms)
            if trial_terms.total <= terms.total:
                stepped = True
                break
            lr *= 0.5
        if not stepped:
            break  # no descent direction at float precision
        expansions = trial
        terms = trial_terms
        epoch += 1
        full = terms.risk + terms.reg + terms.penalty
        trace.append(TraceRow(epoch, stage, terms.risk, terms.reg,
                              terms.penalty, full, terms.grad_norm))
        if full > 10.0 * initial_full + 1e-9:
            raise DivergenceDetected(
                f"objective rose from {initial_full!r} to {full!r}"
            )
    return expansions, epoch


def train(problem) -> TrainState:
    """Run both stages on a loaded problem and return the final state."""
    expansions, compiled = compile_problem(problem)
    cfg = problem.objective
    tcfg = problem.train
    trace: list[TraceRow] = []

    expansions, epoch = _run_stage(expansions, compiled, cfg, tcfg, trace,
                                   STAGE_LABELED, start_epoch=0)
    state = TrainState(expansions=expansions, stage=STAGE_LABELED, trace=trace,
                       compiled=compiled)
    state.stage1_expansions = dict(expansions)

    if compiled.graphs:
        expansions, epoch = _run_stage(expansions, compiled, cfg, tcfg, trace,
                                       STAGE_ABSTRACTION, start_epoch=epoch)
        state.expansions = expansions
    state.stage = STAGE_DONE
    return state


def predict(state: TrainState, predicate: str, args) -> tuple[float, float]:
    """Raw expansion output and its squashed truth value at an id tuple."""
    exp = state.expansions.get(predicate)
    if exp is None:
        raise UnknownPredicate(f"no trained predicate '{predicate}'")
    raw = expansion_eval(exp, args, state.compiled.samples)
    return raw, squash(raw)


def predict_vector(state: TrainState, predicate: str, z) -> tuple[float, float]:
    """Same as :func:`predict` for an out-of-sample concatenated vector."""
    exp = state.expansions.get(predicate)
    if exp is None:
        raise UnknownPredicate(f"no trained predicate '{predicate}'")
    raw = expansion_eval_vector(exp, z, state.compiled.samples)
    return raw, squash(raw)


# --- coherence diagnostic ----------------------------------------------------

def _body_atoms(expr):
    if isinstance(expr, Atom):
        yield expr
    elif isinstance(expr, Not):
        yield from _body_atoms(expr.child)
    elif isinstance(expr, (And, Or, Implies, Iff)):
        yield from _body_atoms(expr.left)
        yield from _body_atoms(expr.right)


def _body_truth(expr, env, problem, expansions):
    if isinstance(expr, Atom):
        ids = tuple(env[v] for v in expr.args)
        table = problem.known.get(expr.predicate)
        if table is not None:
            return table.lookup(ids)
        return squash(expansion_eval(expansions[expr.predicate], ids, problem.samples))
    if isinstance(expr, Not):
        return 1.0 - _body_truth(expr.child, env, problem, expansions)
    a = _body_truth(expr.left, env, problem, expansions)
    b = _body_truth(expr.right, env, problem, expansions)
    if isinstance(expr, And):
        return a * b
    if isinstance(expr, Or):
        return 1.0 - (1.0 - a) * (1.0 - b)
    if isinstance(expr, Implies):
        return 1.0 - a * (1.0 - b)
    return (1.0 - a * (1.0 - b)) * (1.0 - b * (1.0 - a))


def labeled_restricted_penalty(problem, expansions) -> dict[str, float | None]:
    """Clause penalty restricted to fully supervised groundings.

    A grounding qualifies when every learnable atom's id tuple appears in
    that predicate's labeled set, i.e. the clause is evaluated only on the
    supervised portion of the data.  Returns the mean violation per
    purely universal clause (None for clauses with existentials or with
    no qualifying grounding).
    """
    labeled_tuples = {
        name: set(map(tuple, ls.tuples.tolist())) for name, ls in problem.labeled.items()
    }
    labeled_ids = sorted({i for ls in problem.labeled.values()
                          for i in ls.tuples.ravel().tolist()})
    out = {}
    for idx, clause in enumerate(problem.clauses):
        name = problem.clause_name(idx)
        if any(q.kind != "forall" for q in clause.ast.prefix) or not labeled_ids:
            out[name] = None
            continue
        variables = [q.var for q in clause.ast.prefix]
        atoms = list(_body_atoms(clause.ast.body))
        violations = []
        for assign in itertools.product(labeled_ids, repeat=len(variables)):
            env = dict(zip(variables, assign))
            ok = True
            for atom in atoms:
                if atom.predicate in labeled_tuples:
                    t = tuple(env[v] for v in atom.args)
                    if t not in labeled_tuples[atom.predicate]:
                        ok = False
                        break
                elif atom.predicate not in problem.known:
                    ok = False  # learnable but entirely unlabeled predicate
                    break
            if ok:
                violations.append(1.0 - _body_truth(clause.ast.body, env, problem, expansions))
        out[name] = float(np.mean(violations)) if violations else None
    return out
