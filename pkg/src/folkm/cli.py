"""Command-line frontend: check, train, predict, penalty-report.

Exit codes: 0 success, 1 runtime failure, 2 validation failure.  All
output is line-oriented ``key=value`` text for script friendliness.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import load_problem
from .errors import (
    ClauseError,
    DataError,
    EmptyLabeledSet,
    FolkmError,
    GroundingTooLarge,
    KernelError,
    ObjectiveError,
    SupportCapExceeded,
    UnknownGuardPredicate,
)
from .grounding import eval_graph, ground_clause
from .kernels import expansion_eval, load_model, save_model
from .objective import evaluate_objective, make_predictor
from .training import build_supports, compile_clauses, train

_VALIDATION_ERRORS = (
    ClauseError,
    DataError,
    KernelError,
    GroundingTooLarge,
    UnknownGuardPredicate,
    SupportCapExceeded,
    ObjectiveError,
    EmptyLabeledSet,
)


def _ground_one_clause(problem, index):
    clause = problem.clauses[index]
    return ground_clause(
        clause.ast,
        problem.samples,
        problem.known,
        guard=problem.guards.get(problem.clause_name(index)),
        pool=problem.pool,
        max_groundings=problem.max_groundings,
        subsample=problem.subsample,
        seed=problem.train.seed,
    )


def _apply_overrides(problem, args):
    if getattr(args, "seed", None) is not None:
        problem.train.seed = args.seed
    if getattr(args, "max_epochs", None) is not None:
        problem.train.max_epochs_stage1 = args.max_epochs
        problem.train.max_epochs_stage2 = args.max_epochs
    for item in getattr(args, "lambda_v", None) or []:
        name, _, value = item.partition("=")
        try:
            value = float(value)
        except ValueError:
            raise DataError(f"--lambda-v expects NAME=VALUE, got {item!r}") from None
        if value < 0:
            raise DataError("--lambda-v values must be >= 0")
        if name == "all":
            for cname in problem.clause_names:
                problem.objective.lambda_v[cname] = value
        elif name in problem.objective.lambda_v:
            problem.objective.lambda_v[name] = value
        else:
            raise DataError(f"--lambda-v: no clause named {name!r}")


def cmd_check(args) -> int:
    problem = load_problem(args.config)
    print(f"samples={len(problem.samples)} dimension={problem.samples.dimension} "
          f"pool={problem.pool.size}")
    for sig in problem.signatures.values():
        extra = ""
        if sig.kind == "learnable":
            extra = f" kernel={problem.kernels[sig.name].kind}"
            if sig.name in problem.labeled:
                extra += f" labeled={len(problem.labeled[sig.name])}"
        print(f"predicate={sig.name} arity={sig.arity} kind={sig.kind}{extra}")

    failures = 0
    graphs = []
    for i, clause in enumerate(problem.clauses):
        name = problem.clause_name(i)
        try:
            g = _ground_one_clause(problem, i)
        except FolkmError as exc:
            print(f"clause={name} error: {exc}")
            failures += 1
            continue
        graphs.append(g)
        mode = "exact" if g.exact else "subsampled"
        print(f"clause={name} groundings={g.grounding_count} mode={mode} "
              f"source={clause.source!r}")
        if args.dump_graph:
            print(g.dump())
    if not failures:
        try:
            supports = build_supports(problem, graphs)
        except FolkmError as exc:
            print(f"supports error: {exc}")
            failures += 1
        else:
            for name, sup in supports.items():
                print(f"support={name} tuples={sup.shape[0]}")
    if failures:
        print(f"FAILED checks={failures}")
        return 2
    print("OK")
    return 0


def cmd_train(args) -> int:
    problem = load_problem(args.config)
    _apply_overrides(problem, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    state = train(problem)
    save_model(out / "model.json", state.expansions)

    header = "epoch,stage,R,N,V,E,grad_norm"
    rows = [
        f"{r.epoch},{r.stage},{r.risk!r},{r.reg!r},{r.penalty!r},{r.total!r},{r.grad_norm!r}"
        for r in state.trace
    ]
    (out / "trace.csv").write_text("\n".join([header] + rows) + "\n", encoding="utf-8")

    final = evaluate_objective(state.expansions, state.compiled, problem.objective)
    lines = [
        f"epochs={state.trace[-1].epoch}",
        f"stage1_epochs={sum(1 for r in state.trace if r.stage == 'labeled' and r.epoch > 0)}",
        f"stage2_epochs={sum(1 for r in state.trace if r.stage == 'abstraction')}",
        f"final_R={final.risk!r}",
        f"final_N={final.reg!r}",
        f"final_V={final.penalty!r}",
        f"final_E={final.risk + final.reg + final.penalty!r}",
        f"grad_norm={final.grad_norm!r}",
    ]
    for cname in state.compiled.clause_names:
        lines.append(f"penalty_{cname}={final.per_clause[cname]!r}")
        lines.append(f"lambda_v_{cname}={problem.objective.lambda_v[cname]!r}")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")

    if args.dump_graph:
        for cname, g in zip(state.compiled.clause_names, state.compiled.graphs):
            (out / f"graph_{cname}.txt").write_text(g.dump() + "\n", encoding="utf-8")
    return 0


def cmd_predict(args) -> int:
    problem = load_problem(args.config)
    model = load_model(args.model)
    if args.predicate not in model:
        raise DataError(f"model has no predicate '{args.predicate}'")
    exp = model[args.predicate]
    if len(args.ids) != exp.arity:
        raise DataError(f"'{args.predicate}' expects {exp.arity} sample id(s)")
    raw = expansion_eval(exp, args.ids, problem.samples)
    truth = min(1.0, max(raw, 0.0))
    print(f"predicate={args.predicate} args={','.join(map(str, args.ids))} "
          f"raw={raw!r} truth={truth!r}")
    return 0


def _check_model_matches(problem, model):
    for name in problem.learnable:
        if name not in model:
            raise DataError(f"model/problem mismatch: no expansion for '{name}'")
        exp = model[name]
        if exp.arity != problem.signatures[name].arity:
            raise DataError(f"model/problem mismatch: arity of '{name}' differs")
        if exp.support.size and exp.support.max() >= len(problem.samples):
            raise DataError(
                f"model/problem mismatch: '{name}' references unknown sample ids"
            )


def cmd_penalty_report(args) -> int:
    problem = load_problem(args.config)
    model = load_model(args.model)
    _check_model_matches(problem, model)
    predict = make_predictor(model, problem.samples)
    graphs = compile_clauses(problem)
    for i, g in enumerate(graphs):
        name = problem.clause_name(i)
        penalty, values = eval_graph(g, predict)
        lam = problem.objective.lambda_v.get(name, 1.0)
        print(f"clause={name} penalty={penalty!r} lambda_v={lam!r} "
              f"weighted={lam * penalty!r} source={g.source!r}")
        if g.lead_kind == "forall":
            truths = values[g.lead_children]
            violation = 1.0 - truths
            order = sorted(range(len(truths)), key=lambda j: (-violation[j], j))
            shown = 0
            for j in order:
                if violation[j] <= 1e-12 or shown >= args.top:
                    break
                ids = ",".join(map(str, g.lead_ids[j].tolist()))
                print(f"  grounding={ids} value={float(truths[j])!r} "
                      f"violation={float(violation[j])!r}")
                shown += 1
        elif g.lead_kind == "exists":
            print("  (existential lead quantifier: no per-grounding listing)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="folkm",
        description="Learn kernel-machine predicates under first-order logic constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a problem without training")
    p.add_argument("--config", required=True)
    p.add_argument("--dump-graph", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("train", help="run two-stage training, write artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-epochs", type=int, help="cap for both stages")
    p.add_argument("--lambda-v", action="append", metavar="NAME=VALUE",
                   help="override a clause weight; NAME is a clause (c0, c1, ...) or 'all'")
    p.add_argument("--dump-graph", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="evaluate a trained predicate at sample ids")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("predicate")
    p.add_argument("ids", nargs="+", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("penalty-report", help="per-clause violations of a trained model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int, default=10, help="worst groundings to list")
    p.set_defaults(func=cmd_penalty_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FolkmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
