import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from folkm.data import (
    KnownPredicateTable,
    LabeledSet,
    SampleSet,
    load_problem,
    load_samples,
    pool_samples,
    save_samples,
)
from folkm.errors import (
    ConfigError,
    DanglingSampleId,
    DataError,
    DimensionMismatch,
    DuplicateSampleId,
    MissingFile,
)

from conftest import write_toy_config


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadSamples:
    def test_basic(self, tmp_path):
        p = _write(tmp_path, "s.csv", "0,1.5,2.0\n1,0.25,-1.0\n2,0,0\n3,1,1\n")
        s = load_samples(p)
        assert s.dimension == 2
        assert len(s) == 4
        assert s.vectors[1, 1] == -1.0

    def test_rows_in_any_order(self, tmp_path):
        p = _write(tmp_path, "s.csv", "1,5\n0,3\n")
        s = load_samples(p)
        assert s.vectors[0, 0] == 3.0 and s.vectors[1, 0] == 5.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_samples(tmp_path / "nope.csv")

    def test_dimension_mismatch(self, tmp_path):
        p = _write(tmp_path, "s.csv", "0,1,2\n1,1\n")
        with pytest.raises(DimensionMismatch) as exc:
            load_samples(p)
        assert ":2" in str(exc.value)  # row number in message

    def test_duplicate_id(self, tmp_path):
        p = _write(tmp_path, "s.csv", "0,1\n0,2\n")
        with pytest.raises(DuplicateSampleId):
            load_samples(p)

    def test_non_dense_ids(self, tmp_path):
        p = _write(tmp_path, "s.csv", "0,1\n2,2\n")
        with pytest.raises(DanglingSampleId):
            load_samples(p)

    def test_full_precision_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        original = SampleSet(rng.standard_normal((7, 3)) * 1e3)
        save_samples(tmp_path / "s.csv", original)
        reloaded = load_samples(tmp_path / "s.csv")
        assert np.array_equal(original.vectors, reloaded.vectors)

    def test_labeled_and_known_round_trip(self, tmp_path):
        from folkm.data import (
            load_known_table,
            load_labeled,
            save_known_table,
            save_labeled,
        )

        ls = LabeledSet("A", np.array([[0, 2], [1, 0]]), np.array([1.0, 0.0]))
        save_labeled(tmp_path / "l.csv", ls)
        back = load_labeled(tmp_path / "l.csv", "A", 2, 3)
        assert np.array_equal(back.tuples, ls.tuples)
        assert np.array_equal(back.targets, ls.targets)

        table = KnownPredicateTable("D", {(0, 1): 0.123456789012345, (2, 2): 1.0})
        save_known_table(tmp_path / "d.csv", table)
        back = load_known_table(tmp_path / "d.csv", "D", 2, 3)
        assert back.entries == table.entries


class TestLabeledAndKnown:
    def test_targets_must_be_binary(self):
        with pytest.raises(DataError):
            LabeledSet("A", np.array([[0]]), np.array([0.5]))

    def test_known_values_in_unit_interval(self):
        with pytest.raises(DataError):
            KnownPredicateTable("D", {(0, 1): 1.5})

    def test_known_lookup_default(self):
        t = KnownPredicateTable("D", {(0, 1): 0.75}, default=0.0)
        assert t.lookup((0, 1)) == 0.75
        assert t.lookup((1, 0)) == 0.0


class TestPoolSamples:
    def test_union(self):
        l1 = LabeledSet("A", np.array([[0], [1]]), np.array([1.0, 0.0]))
        assert pool_samples([l1], [1, 2]).tolist() == [0, 1, 2]

    def test_unlabeled_only(self):
        assert pool_samples([], [0, 1]).tolist() == [0, 1]

    def test_dedup_across_sets(self):
        l1 = LabeledSet("A", np.array([[0]]), np.array([1.0]))
        l2 = LabeledSet("B", np.array([[0]]), np.array([1.0]))
        assert pool_samples([l1, l2], []).tolist() == [0]

    @given(st.lists(st.integers(0, 20), max_size=30),
           st.lists(st.integers(0, 20), max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_and_order_independent(self, ids_a, ids_b):
        l1 = LabeledSet("A", np.array(ids_a, dtype=np.int64).reshape(-1, 1),
                        np.ones(len(ids_a))) if ids_a else None
        labeled = [l1] if l1 is not None else []
        pooled = pool_samples(labeled, ids_b)
        again = pool_samples(labeled, pooled)
        assert np.array_equal(pooled, again)
        shuffled = pool_samples(labeled, list(reversed(ids_b)))
        assert np.array_equal(pooled, shuffled)


class TestLoadProblem:
    def test_toy_config_loads(self, tmp_path):
        problem = load_problem(write_toy_config(tmp_path))
        assert len(problem.samples) == 60
        assert problem.samples.dimension == 2
        assert problem.pool.size == 60
        assert problem.learnable == ["A", "B"]
        assert len(problem.clauses) == 1
        assert problem.objective.lambda_v == {"c0": 1.0}
        assert problem.train.grad_tol == 1e-4

    def test_dangling_labeled_id(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n1,2\n")
        _write(tmp_path, "l.csv", "99,1\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
[[predicates]]
name = "A"
arity = 1
labeled = "l.csv"
""")
        with pytest.raises(DanglingSampleId):
            load_problem(tmp_path / "p.toml")

    def test_empty_unlabeled_with_labels_is_valid(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n1,2\n2,3\n")
        _write(tmp_path, "l.csv", "0,1\n")
        _write(tmp_path, "u.csv", "# empty\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
unlabeled = "u.csv"
[[predicates]]
name = "A"
arity = 1
labeled = "l.csv"
""")
        problem = load_problem(tmp_path / "p.toml")
        assert problem.pool.tolist() == [0]  # U empty: pool is labeled args only

    def test_empty_pool_rejected(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n")
        _write(tmp_path, "u.csv", "\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
unlabeled = "u.csv"
[[predicates]]
name = "A"
arity = 1
""")
        with pytest.raises(DataError):
            load_problem(tmp_path / "p.toml")

    def test_known_predicate_table(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n1,2\n")
        _write(tmp_path, "d.csv", "0,1,1.0\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
[[predicates]]
name = "A"
arity = 1
[[predicates]]
name = "D"
kind = "known"
arity = 2
table = "d.csv"
""")
        problem = load_problem(tmp_path / "p.toml")
        assert problem.known["D"].lookup((0, 1)) == 1.0
        assert problem.known["D"].lookup((1, 1)) == 0.0

    def test_guard_must_name_known_predicate(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n")
        _write(tmp_path, "c.txt", "forall x: A(x)\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
clauses = "c.txt"
[[predicates]]
name = "A"
arity = 1
[constraints]
guards = {c0 = "A"}
""")
        from folkm.errors import UnknownGuardPredicate
        with pytest.raises(UnknownGuardPredicate):
            load_problem(tmp_path / "p.toml")

    def test_unknown_config_key_type(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
[[predicates]]
name = "A"
arity = "one"
""")
        with pytest.raises(ConfigError):
            load_problem(tmp_path / "p.toml")

    def test_clause_weight_scales_lambda_v(self, tmp_path):
        _write(tmp_path, "s.csv", "0,1\n")
        _write(tmp_path, "c.txt", "[w=2.0] forall x: A(x)\nforall x: A(x)\n")
        _write(tmp_path, "p.toml", """
[problem]
samples = "s.csv"
clauses = "c.txt"
[[predicates]]
name = "A"
arity = 1
[constraints]
lambda_v = 3.0
""")
        problem = load_problem(tmp_path / "p.toml")
        assert problem.objective.lambda_v == {"c0": 6.0, "c1": 3.0}
