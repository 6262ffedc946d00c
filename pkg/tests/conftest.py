import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from folkm.data import LabeledSet, Problem, SampleSet
from folkm.fol import PredicateSignature, WeightedClause, parse_clause_text
from folkm.kernels import KernelSpec
from folkm.objective import ObjectiveConfig
from folkm.training import TrainConfig


def two_blob_samples(seed=12345, std=0.4, per_blob=30):
    rng = np.random.default_rng(seed)
    blob1 = rng.normal([0.0, 0.0], std, size=(per_blob, 2))
    blob2 = rng.normal([3.0, 3.0], std, size=(per_blob, 2))
    return SampleSet(np.vstack([blob1, blob2])), rng


def make_toy_problem(lambda_v=1.0, seed=12345):
    """Two unary predicates on two Gaussian blobs with A(x) -> B(x).

    A gets 10 positive labels on blob 1, B two labels at a subset of A's
    labeled points.  Blob 1 is sample ids 0..29.
    """
    samples, rng = two_blob_samples(seed)
    sigs = {
        "A": PredicateSignature("A", 1, "learnable"),
        "B": PredicateSignature("B", 1, "learnable"),
    }
    a_ids = rng.choice(30, size=10, replace=False)
    b_ids = a_ids[:2]
    labeled = {
        "A": LabeledSet("A", a_ids.reshape(-1, 1), np.ones(10)),
        "B": LabeledSet("B", b_ids.reshape(-1, 1), np.ones(2)),
    }
    text = "forall x: A(x) -> B(x)"
    clause = parse_clause_text(text, list(sigs.values()))
    return Problem(
        samples=samples,
        pool=samples.ids,
        signatures=sigs,
        kernels={"A": KernelSpec("rbf", gamma=2.0), "B": KernelSpec("rbf", gamma=2.0)},
        labeled=labeled,
        known={},
        clauses=[WeightedClause(clause, 1.0, text, 1)],
        objective=ObjectiveConfig(
            lambda_pi={"A": 1.0, "B": 1.0},
            lambda_r={"A": 0.005, "B": 0.005},
            lambda_v={"c0": lambda_v},
        ),
        train=TrainConfig(learning_rate=1.0, max_epochs_stage1=4000,
                          max_epochs_stage2=4000, grad_tol=1e-4, seed=0),
    )


@pytest.fixture
def toy_problem():
    return make_toy_problem()


def write_toy_config(tmp_path, lambda_v=1.0, seed=12345, **training_overrides):
    """Materialize the toy problem as on-disk fixture files + TOML config."""
    problem = make_toy_problem(lambda_v=lambda_v, seed=seed)
    lines = [
        ",".join([str(i)] + [repr(v) for v in row])
        for i, row in enumerate(problem.samples.vectors.tolist())
    ]
    (tmp_path / "samples.csv").write_text("\n".join(lines) + "\n")
    for name, ls in problem.labeled.items():
        rows = [
            f"{t[0]},{int(y)}" for t, y in zip(ls.tuples.tolist(), ls.targets.tolist())
        ]
        (tmp_path / f"labels_{name}.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "clauses.txt").write_text("forall x: A(x) -> B(x)\n")
    training = {
        "learning_rate": 1.0,
        "max_epochs_stage1": 4000,
        "max_epochs_stage2": 4000,
        "grad_tol": 1e-4,
        "seed": 0,
        **training_overrides,
    }
    training_lines = "\n".join(
        f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}"
        for k, v in training.items()
    )
    config = f"""
[problem]
samples = "samples.csv"
clauses = "clauses.txt"

[[predicates]]
name = "A"
arity = 1
kind = "learnable"
kernel = "rbf"
gamma = 2.0
labeled = "labels_A.csv"
lambda_pi = 1.0
lambda_r = 0.005

[[predicates]]
name = "B"
arity = 1
kind = "learnable"
kernel = "rbf"
gamma = 2.0
labeled = "labels_B.csv"
lambda_pi = 1.0
lambda_r = 0.005

[constraints]
lambda_v = {lambda_v!r}

[training]
{training_lines}
"""
    path = tmp_path / "problem.toml"
    path.write_text(config)
    return path
