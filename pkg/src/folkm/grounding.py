"""Compile prenex clauses into differentiable grounded expression graphs.

Product t-norm semantics: AND is ``a*b``, OR is ``1-(1-a)(1-b)``, NOT is
``1-a``; ``a -> b`` is rewritten as ``not (a and not b)`` and ``a <-> b``
as the conjunction of both implications.  Learnable atoms enter the graph
through the squash ``min(1, max(y, 0))`` applied to the raw kernel-machine
output; known atoms fold to constants at compile time.

Quantifier expansion over the sample pool: a run of universal variables
becomes the arithmetic mean of the per-grounding truth values, a run of
existential variables becomes ``1 - prod(1 - truth)``.  The graph root is
one minus the clause truth, i.e. the clause penalty in [0, 1]; it is zero
exactly when every universal grounding evaluates to 1 and every
existential obligation is met.

The compiled graph is a flat, topologically ordered node table, so the
evaluation and backprop loops are plain array code; they run under numba
unless ``FOLKM_NO_NUMBA`` selects the uncompiled path.
"""

from __future__ import annotations

import itertools
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from ._accel import jit_kernel
from .errors import (
    DomainError,
    GraphNotEvaluated,
    GroundingError,
    GroundingTooLarge,
    MissingAtomValue,
    NonFinite,
    UnknownGuardPredicate,
)
from .fol import And, Atom, ClauseAst, Iff, Implies, Not, Or, pretty

_SLACK = 1e-12

# node kind codes
ATOM = 0
CONST = 1
NOT = 2
AND = 3
OR = 4
MEAN = 5
EXISTS = 6
ONE_MINUS = 7

KIND_NAMES = {
    ATOM: "learnable_atom",
    CONST: "known_const",
    NOT: "not",
    AND: "and",
    OR: "or",
    MEAN: "universal_mean",
    EXISTS: "existential_product",
    ONE_MINUS: "one_minus",
}


# --- t-norm operators ------------------------------------------------------

def _check_unit(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name}: non-finite truth value")
    if np.any(arr < -_SLACK) or np.any(arr > 1.0 + _SLACK):
        raise DomainError(f"{name}: truth value outside [0,1]")


def tnorm_and(a, b):
    """Product t-norm: a * b."""
    _check_unit(a, "tnorm_and")
    _check_unit(b, "tnorm_and")
    return a * b


def tnorm_or(a, b):
    """Product t-conorm (De Morgan dual): 1 - (1-a)(1-b)."""
    _check_unit(a, "tnorm_or")
    _check_unit(b, "tnorm_or")
    return 1.0 - (1.0 - a) * (1.0 - b)


def tnorm_not(a):
    """Fuzzy negation: 1 - a."""
    _check_unit(a, "tnorm_not")
    return 1.0 - a


def squash(y):
    """Piecewise-linear clamp of a raw score into [0, 1]."""
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("squash: non-finite input")
    if np.ndim(y) == 0:
        return min(1.0, max(float(y), 0.0))
    return np.clip(arr, 0.0, 1.0)


def squash_prime(y):
    """Derivative convention for the clamp: 1 on [0,1] (boundary included), else 0."""
    if np.ndim(y) == 0:
        return 1.0 if 0.0 <= y <= 1.0 else 0.0
    arr = np.asarray(y, dtype=float)
    return ((arr >= 0.0) & (arr <= 1.0)).astype(float)


# --- evaluation kernels ------------------------------------------------------

def _graph_forward(kinds, arg0, arg1, fconst, extra, child_idx, atom_raw, values):
    n = kinds.shape[0]
    for i in range(n):
        k = kinds[i]
        if k == 0:
            r = atom_raw[arg0[i]]
            if r < 0.0:
                r = 0.0
            elif r > 1.0:
                r = 1.0
            values[i] = r
        elif k == 1:
            values[i] = fconst[i]
        elif k == 2 or k == 7:
            values[i] = 1.0 - values[arg0[i]]
        elif k == 3:
            values[i] = values[arg0[i]] * values[arg1[i]]
        elif k == 4:
            values[i] = 1.0 - (1.0 - values[arg0[i]]) * (1.0 - values[arg1[i]])
        elif k == 5:
            s = 0.0
            for j in range(arg0[i], arg1[i]):
                s += values[child_idx[j]]
            values[i] = (s + extra[i]) / fconst[i]
        else:
            p = 1.0
            for j in range(arg0[i], arg1[i]):
                p *= 1.0 - values[child_idx[j]]
            values[i] = 1.0 - p


def _graph_backward(kinds, arg0, arg1, fconst, extra, child_idx,
                    atom_raw, values, upstream, adj, atom_grad, scratch):
    n = kinds.shape[0]
    adj[n - 1] += upstream
    for i in range(n - 1, -1, -1):
        u = adj[i]
        if u == 0.0:
            continue
        k = kinds[i]
        if k == 0:
            r = atom_raw[arg0[i]]
            if 0.0 <= r <= 1.0:
                atom_grad[arg0[i]] += u
        elif k == 1:
            pass
        elif k == 2 or k == 7:
            adj[arg0[i]] -= u
        elif k == 3:
            adj[arg0[i]] += u * values[arg1[i]]
            adj[arg1[i]] += u * values[arg0[i]]
        elif k == 4:
            adj[arg0[i]] += u * (1.0 - values[arg1[i]])
            adj[arg1[i]] += u * (1.0 - values[arg0[i]])
        elif k == 5:
            du = u / fconst[i]
            for j in range(arg0[i], arg1[i]):
                adj[child_idx[j]] += du
        else:
            a = arg0[i]
            m = arg1[i] - a
            p = 1.0
            for t in range(m):
                scratch[t] = p
                p *= 1.0 - values[child_idx[a + t]]
            suf = 1.0
            for t in range(m - 1, -1, -1):
                c = child_idx[a + t]
                adj[c] += u * scratch[t] * suf
                suf *= 1.0 - values[c]


_forward_jit = jit_kernel(_graph_forward)
_backward_jit = jit_kernel(_graph_backward)


# --- graph structure ---------------------------------------------------------

class AtomKey(NamedTuple):
    predicate: str
    args: tuple[int, ...]


class _Builder:
    def __init__(self):
        self.kinds: list[int] = []
        self.arg0: list[int] = []
        self.arg1: list[int] = []
        self.fconst: list[float] = []
        self.extra: list[int] = []
        self.child_idx: list[int] = []
        self.atoms: list[AtomKey] = []
        self.atom_index: dict[AtomKey, int] = {}
        self._atom_nodes: dict[AtomKey, int] = {}
        self._const_nodes: dict[float, int] = {}

    def _push(self, kind, a0=-1, a1=-1, fc=0.0, ex=0) -> int:
        self.kinds.append(kind)
        self.arg0.append(a0)
        self.arg1.append(a1)
        self.fconst.append(fc)
        self.extra.append(ex)
        return len(self.kinds) - 1

    def atom(self, key: AtomKey) -> int:
        node = self._atom_nodes.get(key)
        if node is None:
            slot = self.atom_index.setdefault(key, len(self.atoms))
            if slot == len(self.atoms):
                self.atoms.append(key)
            node = self._push(ATOM, a0=slot)
            self._atom_nodes[key] = node
        return node

    def const(self, value: float) -> int:
        node = self._const_nodes.get(value)
        if node is None:
            node = self._push(CONST, fc=float(value))
            self._const_nodes[value] = node
        return node

    def unary(self, kind: int, child: int) -> int:
        return self._push(kind, a0=child)

    def binary(self, kind: int, left: int, right: int) -> int:
        return self._push(kind, a0=left, a1=right)

    def nary(self, kind: int, children: Sequence[int], virtual_true: int = 0,
             total: float | None = None) -> int:
        start = len(self.child_idx)
        self.child_idx.extend(children)
        if total is None:
            total = float(len(children) + virtual_true)
        return self._push(kind, a0=start, a1=len(self.child_idx), fc=total, ex=virtual_true)


class GroundedGraph:
    """Flat, topologically ordered expression DAG; the last node is the penalty."""

    def __init__(self, builder: _Builder, *, source: str, grounding_count: int,
                 exact: bool, lead_kind: str | None, lead_vars: tuple[str, ...],
                 lead_ids: np.ndarray, lead_children: np.ndarray):
        self.kinds = np.asarray(builder.kinds, dtype=np.int8)
        self.arg0 = np.asarray(builder.arg0, dtype=np.int64)
        self.arg1 = np.asarray(builder.arg1, dtype=np.int64)
        self.fconst = np.asarray(builder.fconst, dtype=np.float64)
        self.extra = np.asarray(builder.extra, dtype=np.int64)
        self.child_idx = np.asarray(builder.child_idx, dtype=np.int64)
        self.atoms = list(builder.atoms)
        self.atom_index = dict(builder.atom_index)
        self.source = source
        self.grounding_count = grounding_count
        self.exact = exact
        self.lead_kind = lead_kind
        self.lead_vars = lead_vars
        self.lead_ids = lead_ids
        self.lead_children = lead_children
        nary = self.kinds >= MEAN
        self._max_children = int((self.arg1[nary] - self.arg0[nary]).max()) if nary.any() else 1
        self.values_: np.ndarray | None = None
        self.atom_raw_: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.kinds.shape[0]

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def forward(self, atom_raw: np.ndarray) -> np.ndarray:
        atom_raw = np.ascontiguousarray(atom_raw, dtype=float)
        if atom_raw.shape != (len(self.atoms),):
            raise MissingAtomValue(
                f"need {len(self.atoms)} atom values, got {atom_raw.shape}"
            )
        values = np.empty(self.n_nodes)
        _forward_jit(self.kinds, self.arg0, self.arg1, self.fconst, self.extra,
                     self.child_idx, atom_raw, values)
        self.values_ = values
        self.atom_raw_ = atom_raw
        return values

    def backward(self, upstream: float = 1.0) -> np.ndarray:
        if self.values_ is None:
            raise GraphNotEvaluated("run forward() / eval_graph() before backprop")
        adj = np.zeros(self.n_nodes)
        atom_grad = np.zeros(max(len(self.atoms), 1))
        scratch = np.empty(self._max_children)
        _backward_jit(self.kinds, self.arg0, self.arg1, self.fconst, self.extra,
                      self.child_idx, self.atom_raw_, self.values_, float(upstream),
                      adj, atom_grad, scratch)
        return atom_grad[: len(self.atoms)]

    def dump(self) -> str:
        """Plain-text DAG listing: node id, kind, children, cached value."""
        lines = [f"# clause: {self.source}", f"# groundings: {self.grounding_count}"]
        for i in range(self.n_nodes):
            k = int(self.kinds[i])
            fields = [f"{i}", KIND_NAMES[k]]
            if k == ATOM:
                key = self.atoms[self.arg0[i]]
                fields.append(f"{key.predicate}{key.args}")
            elif k == CONST:
                fields.append(f"value={self.fconst[i]!r}")
            elif k in (NOT, ONE_MINUS):
                fields.append(f"child={self.arg0[i]}")
            elif k in (AND, OR):
                fields.append(f"children=({self.arg0[i]},{self.arg1[i]})")
            else:
                kids = self.child_idx[self.arg0[i]: self.arg1[i]]
                fields.append("children=" + ",".join(map(str, kids.tolist())))
                if k == MEAN:
                    fields.append(f"virtual_true={self.extra[i]} total={self.fconst[i]:g}")
            if self.values_ is not None:
                fields.append(f"= {self.values_[i]!r}")
            lines.append(" ".join(fields))
        return "\n".join(lines)


# --- compilation -------------------------------------------------------------

def _runs(prefix):
    for kind, group in itertools.groupby(prefix, key=lambda q: q.kind):
        yield kind, [q.var for q in group]


def ground_clause(
    ast: ClauseAst,
    samples,
    known: Mapping[str, "KnownPredicateTable"] | Sequence,
    guard: str | None = None,
    *,
    pool: np.ndarray | None = None,
    max_groundings: int = 1_000_000,
    subsample: int = 0,
    seed: int = 0,
) -> GroundedGraph:
    """Expand a clause over the sample pool into a penalty graph.

    ``guard`` names a known predicate with default 0 over a purely
    universal prefix; enumeration is then restricted to the guard table's
    tuples, every other grounding contributing exactly zero penalty.
    ``subsample`` > 0 draws that many groundings uniformly (seeded)
    instead of full enumeration -- a documented approximation, again only
    for purely universal prefixes.
    """
    if not isinstance(known, Mapping):
        known = {t.predicate: t for t in known}
    if pool is None:
        pool = samples.ids
    pool = [int(i) for i in np.asarray(pool, dtype=np.int64)]
    if not pool:
        raise GroundingError("cannot ground a clause over an empty sample pool")
    n = len(pool)
    q = len(ast.prefix)
    pure_universal = all(qf.kind == "forall" for qf in ast.prefix)
    total = n ** q

    guard_table = None
    if guard is not None:
        guard_table = known.get(guard)
        if guard_table is None:
            raise UnknownGuardPredicate(f"guard '{guard}' is not a known predicate")
        if not pure_universal:
            raise GroundingError("a guard requires a purely universal prefix")
        arity = len(next(iter(guard_table.entries))) if guard_table.entries else q
        if arity != q:
            raise GroundingError(
                f"guard '{guard}' covers {arity} variables, clause quantifies {q}"
            )
        if guard_table.default != 0.0:
            raise GroundingError(
                f"guard '{guard}' must default to 0 for restricted enumeration"
            )
        pool_set = set(pool)
        admitted = sorted(t for t in guard_table.entries if all(i in pool_set for i in t))
        count = len(admitted)
    elif subsample and q > 0 and total > subsample:
        if not pure_universal:
            raise GroundingError("subsampling requires a purely universal prefix")
        count = subsample
    else:
        subsample = 0
        count = total

    if count > max_groundings:
        raise GroundingTooLarge(count, max_groundings)

    builder = _Builder()
    lead: dict = {"kind": None, "vars": (), "ids": [], "children": []}

    def compile_body(expr, env) -> int:
        if isinstance(expr, Atom):
            ids = tuple(env[v] for v in expr.args)
            table = known.get(expr.predicate)
            if table is not None:
                return builder.const(table.lookup(ids))
            return builder.atom(AtomKey(expr.predicate, ids))
        if isinstance(expr, Not):
            return builder.unary(NOT, compile_body(expr.child, env))
        if isinstance(expr, And):
            return builder.binary(AND, compile_body(expr.left, env),
                                  compile_body(expr.right, env))
        if isinstance(expr, Or):
            return builder.binary(OR, compile_body(expr.left, env),
                                  compile_body(expr.right, env))
        if isinstance(expr, Implies):
            # a -> b  compiles as  not (a and not b)  ==  1 - a*(1-b)
            a = compile_body(expr.left, env)
            nb = builder.unary(NOT, compile_body(expr.right, env))
            return builder.unary(NOT, builder.binary(AND, a, nb))
        if isinstance(expr, Iff):
            fwd = compile_body(Implies(expr.left, expr.right), env)
            bwd = compile_body(Implies(expr.right, expr.left), env)
            return builder.binary(AND, fwd, bwd)
        raise TypeError(f"unexpected AST node {type(expr).__name__}")

    def compile_truth(runs, env, outermost) -> int:
        if not runs:
            return compile_body(ast.body, env)
        (kind, variables), rest = runs[0], runs[1:]
        if outermost and guard_table is not None:
            assignments = admitted
        elif outermost and subsample:
            rng = np.random.default_rng(seed)
            draws = rng.integers(0, n, size=(subsample, len(variables)))
            assignments = [tuple(pool[j] for j in row) for row in draws]
        else:
            assignments = itertools.product(pool, repeat=len(variables))
        children = []
        for assign in assignments:
            env2 = dict(env)
            env2.update(zip(variables, assign))
            child = compile_truth(rest, env2, False)
            if outermost and guard_table is not None:
                # guarded grounding: truth = 1 - d * (1 - e)
                d = builder.const(guard_table.lookup(assign))
                ne = builder.unary(NOT, child)
                child = builder.unary(NOT, builder.binary(AND, d, ne))
            children.append(child)
            if outermost:
                lead["ids"].append(assign)
        if outermost:
            lead["kind"] = kind
            lead["vars"] = tuple(variables)
            lead["children"] = children
        if kind == "forall":
            if outermost and guard_table is not None:
                return builder.nary(MEAN, children,
                                    virtual_true=total - len(children), total=float(total))
            return builder.nary(MEAN, children)
        return builder.nary(EXISTS, children)

    runs = list(_runs(ast.prefix))
    truth = compile_truth(runs, {}, True)
    builder.unary(ONE_MINUS, truth)

    n_lead = len(lead["ids"])
    lead_width = len(lead["vars"]) if lead["vars"] else 1
    return GroundedGraph(
        builder,
        source=pretty(ast),
        grounding_count=count,
        exact=guard_table is not None or not subsample,
        lead_kind=lead["kind"],
        lead_vars=lead["vars"],
        lead_ids=np.asarray(lead["ids"], dtype=np.int64).reshape(n_lead, lead_width),
        lead_children=np.asarray(lead["children"], dtype=np.int64),
    )


# --- public evaluation -------------------------------------------------------

def _atom_raw_from(predict, atoms: list[AtomKey]) -> np.ndarray:
    raw = np.empty(len(atoms))
    getter = predict.__getitem__ if isinstance(predict, Mapping) else predict
    for slot, key in enumerate(atoms):
        try:
            if isinstance(predict, Mapping):
                value = getter(key)
            else:
                value = getter(key.predicate, key.args)
        except KeyError:
            raise MissingAtomValue(f"no value for atom {key.predicate}{key.args}") from None
        if value is None:
            raise MissingAtomValue(f"no value for atom {key.predicate}{key.args}")
        if not np.isfinite(value):
            raise NonFinite(f"atom {key.predicate}{key.args} evaluated to {value!r}")
        raw[slot] = value
    return raw


def eval_graph(g: GroundedGraph, predict) -> tuple[float, np.ndarray]:
    """Evaluate the clause penalty.

    ``predict`` supplies the raw (pre-squash) kernel-machine output per
    learnable atom: either a callable ``(predicate, id_tuple) -> float``
    or a mapping from :class:`AtomKey`.  Returns the penalty and the
    cached per-node values.
    """
    values = g.forward(_atom_raw_from(predict, g.atoms))
    return float(values[g.root]), values


def backprop_graph(g: GroundedGraph, predict=None, upstream: float = 1.0,
                   ) -> dict[AtomKey, float]:
    """Exact penalty gradient per atom, w.r.t. the pre-squash raw output.

    Uses the values cached by the last :func:`eval_graph`; pass ``predict``
    to evaluate first.
    """
    if predict is not None:
        eval_graph(g, predict)
    grad = g.backward(upstream)
    return {key: float(grad[slot]) for slot, key in enumerate(g.atoms)}
