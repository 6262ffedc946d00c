"""Problem loading: samples, labeled sets, known-predicate tables, config.

File formats (all plain text, '#' comments and blank lines ignored):

* samples:   ``id,x1,...,xm`` one row per sample, ids dense 0..n-1
* labeled:   ``id1,...,id_arity,target`` with target exactly 0 or 1
* known:     ``id1,...,id_arity,value`` with value in [0,1]
* unlabeled: one sample id per line (the set U)

The problem config is TOML; see the README for the key reference.
Floats are parsed at full precision and re-serialized with repr, so a
load/save round trip is value-exact.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import (
    ConfigError,
    DanglingSampleId,
    DataError,
    DimensionMismatch,
    DuplicateSampleId,
    MissingFile,
    UnknownGuardPredicate,
)
from .fol import PredicateSignature, WeightedClause, parse_clause_lines
from .kernels import KernelSpec
from .objective import ObjectiveConfig
from .training import TrainConfig


@dataclass
class SampleSet:
    """Pooled feature vectors, row index == sample id."""

    vectors: np.ndarray  # (n, m) float64

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)


@dataclass
class LabeledSet:
    predicate: str
    tuples: np.ndarray   # (n_examples, arity) int64
    targets: np.ndarray  # (n_examples,) float64, each exactly 0 or 1

    def __post_init__(self):
        self.tuples = np.atleast_2d(np.asarray(self.tuples, dtype=np.int64))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.shape != (self.tuples.shape[0],):
            raise DimensionMismatch(
                f"labeled set '{self.predicate}': {self.tuples.shape[0]} tuples, "
                f"{self.targets.shape[0]} targets"
            )
        bad = ~np.isin(self.targets, (0.0, 1.0))
        if bad.any():
            raise DataError(
                f"labeled set '{self.predicate}': targets must be exactly 0 or 1"
            )

    def __len__(self) -> int:
        return self.tuples.shape[0]


@dataclass
class KnownPredicateTable:
    predicate: str
    entries: dict[tuple[int, ...], float]
    default: float = 0.0

    def __post_init__(self):
        for t, v in self.entries.items():
            if not 0.0 <= v <= 1.0:
                raise DataError(
                    f"known predicate '{self.predicate}': value {v!r} at {t} outside [0,1]"
                )
        if not 0.0 <= self.default <= 1.0:
            raise DataError(f"known predicate '{self.predicate}': default outside [0,1]")

    def lookup(self, args: tuple[int, ...]) -> float:
        return self.entries.get(tuple(int(a) for a in args), self.default)


def pool_samples(labeled: list[LabeledSet], unlabeled) -> np.ndarray:
    """Union of all labeled argument ids and the unlabeled ids, sorted."""
    parts = [np.asarray(unlabeled, dtype=np.int64).ravel()]
    parts.extend(ls.tuples.ravel() for ls in labeled)
    return np.unique(np.concatenate(parts)) if parts else np.empty(0, np.int64)


# --- CSV-ish readers ------------------------------------------------------

def _read_rows(path: Path):
    if not path.is_file():
        raise MissingFile(str(path))
    rows = []
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((line_no, [f.strip() for f in line.split(",")]))
    return rows


def _parse_int(text: str, path, line_no) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{path}:{line_no}: expected an integer id, got {text!r}") from None


def _parse_float(text: str, path, line_no) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{line_no}: expected a number, got {text!r}") from None


def load_samples(path) -> SampleSet:
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: samples file is empty")
    n = len(rows)
    m = len(rows[0][1]) - 1
    if m < 1:
        raise DimensionMismatch(f"{path}:{rows[0][0]}: need an id and at least one feature")
    vectors = np.empty((n, m))
    seen = np.zeros(n, dtype=bool)
    for line_no, fields in rows:
        if len(fields) - 1 != m:
            raise DimensionMismatch(
                f"{path}:{line_no}: row has {len(fields) - 1} features, expected {m}"
            )
        sid = _parse_int(fields[0], path, line_no)
        if not 0 <= sid < n:
            raise DanglingSampleId(
                f"{path}:{line_no}: id {sid} outside dense range 0..{n - 1}"
            )
        if seen[sid]:
            raise DuplicateSampleId(f"{path}:{line_no}: duplicate id {sid}")
        seen[sid] = True
        vectors[sid] = [_parse_float(f, path, line_no) for f in fields[1:]]
    return SampleSet(vectors)


def _check_ids(tuples, n_samples, where):
    arr = np.asarray(tuples, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= n_samples):
        bad = arr.flat[np.argmax((arr < 0) | (arr >= n_samples))]
        raise DanglingSampleId(f"{where}: sample id {int(bad)} not in the sample set")


def load_labeled(path, predicate: str, arity: int, n_samples: int) -> LabeledSet:
    path = Path(path)
    tuples, targets = [], []
    for line_no, fields in _read_rows(path):
        if len(fields) != arity + 1:
            raise DimensionMismatch(
                f"{path}:{line_no}: expected {arity} id(s) and a target"
            )
        tuples.append([_parse_int(f, path, line_no) for f in fields[:-1]])
        targets.append(_parse_float(fields[-1], path, line_no))
    tuples = np.asarray(tuples, dtype=np.int64).reshape(-1, arity)
    _check_ids(tuples, n_samples, f"{path} (labeled '{predicate}')")
    return LabeledSet(predicate, tuples, np.asarray(targets, dtype=float))


def load_known_table(path, predicate: str, arity: int, n_samples: int,
                     default: float = 0.0) -> KnownPredicateTable:
    path = Path(path)
    entries = {}
    for line_no, fields in _read_rows(path):
        if len(fields) != arity + 1:
            raise DimensionMismatch(
                f"{path}:{line_no}: expected {arity} id(s) and a value"
            )
        ids = tuple(_parse_int(f, path, line_no) for f in fields[:-1])
        _check_ids(np.asarray(ids), n_samples, f"{path} (known '{predicate}')")
        entries[ids] = _parse_float(fields[-1], path, line_no)
    return KnownPredicateTable(predicate, entries, default)


def load_unlabeled(path, n_samples: int) -> np.ndarray:
    path = Path(path)
    ids = []
    for line_no, fields in _read_rows(path):
        for f in fields:
            ids.append(_parse_int(f, path, line_no))
    arr = np.asarray(ids, dtype=np.int64)
    _check_ids(arr, n_samples, f"{path} (unlabeled)")
    return np.unique(arr)


# --- serialization (exact round trip) -------------------------------------

def save_samples(path, samples: SampleSet) -> None:
    lines = [
        ",".join([str(i)] + [repr(v) for v in row])
        for i, row in enumerate(samples.vectors.tolist())
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_labeled(path, labeled: LabeledSet) -> None:
    lines = [
        ",".join([str(i) for i in t] + [repr(y)])
        for t, y in zip(labeled.tuples.tolist(), labeled.targets.tolist())
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_known_table(path, table: KnownPredicateTable) -> None:
    lines = [
        ",".join([str(i) for i in t] + [repr(v)])
        for t, v in table.entries.items()
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- problem assembly ------------------------------------------------------

@dataclass
class Problem:
    samples: SampleSet
    pool: np.ndarray                    # grounding domain, sorted sample ids
    signatures: dict[str, PredicateSignature]
    kernels: dict[str, KernelSpec]      # learnable predicates only
    labeled: dict[str, LabeledSet]      # predicates that have examples
    known: dict[str, KnownPredicateTable]
    clauses: list[WeightedClause]
    objective: ObjectiveConfig
    train: TrainConfig
    guards: dict[str, str] = field(default_factory=dict)  # clause name -> known predicate
    max_groundings: int = 1_000_000
    subsample: int = 0                  # 0 = exact enumeration
    support_cap: int = 5000

    def clause_name(self, index: int) -> str:
        return f"c{index}"

    @property
    def clause_names(self) -> list[str]:
        return [self.clause_name(i) for i in range(len(self.clauses))]

    @property
    def learnable(self) -> list[str]:
        return [s.name for s in self.signatures.values() if s.kind == "learnable"]


def _cfg_get(section: dict, key: str, typ, default=None, required=False, where=""):
    if key not in section:
        if required:
            raise ConfigError(f"missing config key {where}{key}")
        return default
    val = section[key]
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, typ):
        raise ConfigError(f"config key {where}{key} has wrong type {type(val).__name__}")
    return val


def _kernel_from_config(entry: dict, name: str) -> KernelSpec:
    kind = _cfg_get(entry, "kernel", str, default="linear", where=f"predicates.{name}.")
    if kind == "rbf":
        return KernelSpec("rbf", gamma=_cfg_get(entry, "gamma", float, default=1.0))
    if kind == "polynomial":
        return KernelSpec(
            "polynomial",
            degree=_cfg_get(entry, "degree", int, default=2),
            offset=_cfg_get(entry, "offset", float, default=1.0),
        )
    if kind == "linear":
        return KernelSpec("linear")
    raise ConfigError(f"predicates.{name}: unknown kernel {kind!r}")


def load_problem(config_path) -> Problem:
    """Load a full problem from a TOML config; paths are config-relative."""
    config_path = Path(config_path)
    if not config_path.is_file():
        raise MissingFile(str(config_path))
    try:
        cfg = tomllib.loads(config_path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{config_path}: {exc}") from None
    base = config_path.parent

    prob = cfg.get("problem", {})
    samples = load_samples(base / _cfg_get(prob, "samples", str, required=True, where="problem."))

    preds = cfg.get("predicates")
    if not preds:
        raise ConfigError("config needs at least one [[predicates]] entry")
    signatures: dict[str, PredicateSignature] = {}
    kernels: dict[str, KernelSpec] = {}
    labeled: dict[str, LabeledSet] = {}
    known: dict[str, KnownPredicateTable] = {}
    lambda_pi: dict[str, float] = {}
    lambda_r: dict[str, float] = {}
    for entry in preds:
        name = _cfg_get(entry, "name", str, required=True, where="predicates.")
        if name in signatures:
            raise ConfigError(f"duplicate predicate '{name}'")
        kind = _cfg_get(entry, "kind", str, default="learnable", where=f"predicates.{name}.")
        arity = _cfg_get(entry, "arity", int, default=1, where=f"predicates.{name}.")
        signatures[name] = PredicateSignature(name, arity, kind)
        if kind == "learnable":
            kernels[name] = _kernel_from_config(entry, name)
            lambda_pi[name] = _cfg_get(entry, "lambda_pi", float, default=1.0)
            lambda_r[name] = _cfg_get(entry, "lambda_r", float, default=0.01)
            if "labeled" in entry:
                labeled[name] = load_labeled(
                    base / entry["labeled"], name, arity, len(samples)
                )
        else:
            default = _cfg_get(entry, "default", float, default=0.0)
            if "table" in entry:
                known[name] = load_known_table(
                    base / entry["table"], name, arity, len(samples), default
                )
            else:
                known[name] = KnownPredicateTable(name, {}, default)

    clauses: list[WeightedClause] = []
    if "clauses" in prob:
        path = base / prob["clauses"]
        if not path.is_file():
            raise MissingFile(str(path))
        clauses = parse_clause_lines(
            path.read_text(encoding="utf-8").splitlines(), list(signatures.values())
        )

    if "unlabeled" in prob:
        unlabeled = load_unlabeled(base / prob["unlabeled"], len(samples))
    else:
        unlabeled = samples.ids  # no U file: every sample is in the pool
    pool = pool_samples(list(labeled.values()), unlabeled)
    if pool.size == 0:
        raise DataError("pooled sample set is empty: no labeled arguments and no unlabeled ids")

    cons = cfg.get("constraints", {})
    lambda_v_scale = _cfg_get(cons, "lambda_v", float, default=1.0, where="constraints.")
    lambda_v = {f"c{i}": lambda_v_scale * c.weight for i, c in enumerate(clauses)}
    guards = dict(_cfg_get(cons, "guards", dict, default={}, where="constraints."))
    clause_names = {f"c{i}" for i in range(len(clauses))}
    for cname, gname in guards.items():
        if cname not in clause_names:
            raise ConfigError(f"constraints.guards: no clause named '{cname}'")
        if gname not in known:
            raise UnknownGuardPredicate(f"guard '{gname}' is not a known predicate")

    objective = ObjectiveConfig(
        lambda_pi=lambda_pi,
        lambda_r=lambda_r,
        lambda_v=lambda_v,
        loss_kind=_cfg_get(cfg.get("training", {}), "loss", str, default="squared"),
    )

    tr = cfg.get("training", {})
    train = TrainConfig(
        learning_rate=_cfg_get(tr, "learning_rate", float, default=0.01),
        max_epochs_stage1=_cfg_get(tr, "max_epochs_stage1", int, default=2000),
        max_epochs_stage2=_cfg_get(tr, "max_epochs_stage2", int, default=2000),
        grad_tol=_cfg_get(tr, "grad_tol", float, default=1e-6),
        constraint_ramp_epochs=_cfg_get(tr, "constraint_ramp_epochs", int, default=0),
        seed=_cfg_get(tr, "seed", int, default=0),
    )

    return Problem(
        samples=samples,
        pool=pool,
        signatures=signatures,
        kernels=kernels,
        labeled=labeled,
        known=known,
        clauses=clauses,
        objective=objective,
        train=train,
        guards=guards,
        max_groundings=_cfg_get(cons, "max_groundings", int, default=1_000_000),
        subsample=_cfg_get(cons, "subsample", int, default=0),
        support_cap=_cfg_get(tr, "support_cap", int, default=5000),
    )
