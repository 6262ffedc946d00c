"""Kernels over argument tuples, Gram matrices and kernel expansions.

An n-ary predicate is scored by a kernel on the concatenation of its n
argument vectors, so every kernel here operates on vectors in R^(m*n).
Gram construction is the one O(n^2) hot spot; it runs through a numba
kernel by default and a vectorized NumPy path under ``FOLKM_NO_NUMBA``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._accel import USING_NUMBA, jit_kernel
from .errors import DanglingSampleId, DimensionMismatch, KernelError, LengthMismatch

LINEAR = "linear"
POLYNOMIAL = "polynomial"
RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    degree: int = 1        # polynomial only
    offset: float = 0.0    # polynomial only
    gamma: float = 1.0     # rbf only

    def __post_init__(self):
        if self.kind not in (LINEAR, POLYNOMIAL, RBF):
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == POLYNOMIAL:
            if not isinstance(self.degree, int) or self.degree < 1:
                raise KernelError("polynomial degree must be an integer >= 1")
            if self.offset < 0:
                raise KernelError("polynomial offset must be >= 0")
        if self.kind == RBF and not self.gamma > 0:
            raise KernelError("rbf gamma must be > 0")

    def to_dict(self) -> dict:
        if self.kind == POLYNOMIAL:
            return {"kind": self.kind, "degree": self.degree, "offset": self.offset}
        if self.kind == RBF:
            return {"kind": self.kind, "gamma": self.gamma}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)


def kernel_eval(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate the kernel on two concatenated argument vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"kernel arguments have shapes {a.shape} and {b.shape}")
    if spec.kind == LINEAR:
        return float(np.dot(a, b))
    if spec.kind == POLYNOMIAL:
        return float((np.dot(a, b) + spec.offset) ** spec.degree)
    d = a - b
    return math.exp(-spec.gamma * float(np.dot(d, d)))


# --- Gram construction -------------------------------------------------
#
# Loop kernels (numba) compute the upper triangle and mirror it, so the
# result is bitwise symmetric; the NumPy paths symmetrize the same way.

def _gram_rbf_loops(X, gamma):
    n = X.shape[0]
    d = X.shape[1]
    G = np.empty((n, n))
    for i in range(n):
        G[i, i] = 1.0
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                t = X[i, k] - X[j, k]
                s += t * t
            v = np.exp(-gamma * s)
            G[i, j] = v
            G[j, i] = v
    return G


def _gram_dot_loops(X):
    n = X.shape[0]
    d = X.shape[1]
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(d):
                s += X[i, k] * X[j, k]
            G[i, j] = s
            G[j, i] = s
    return G


_gram_rbf_jit = jit_kernel(_gram_rbf_loops)
_gram_dot_jit = jit_kernel(_gram_dot_loops)


def _gram_rbf_numpy(X, gamma):
    n = X.shape[0]
    G = np.empty((n, n))
    for i in range(n):
        diff = X - X[i]
        G[i] = np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))
    G[np.diag_indices(n)] = 1.0
    return G


def _gram_dot_numpy(X):
    G = X @ X.T
    return np.tril(G) + np.tril(G, -1).T


def _gram_from_vectors(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    if spec.kind == RBF:
        return _gram_rbf_jit(X, spec.gamma) if USING_NUMBA else _gram_rbf_numpy(X, spec.gamma)
    G = _gram_dot_jit(X) if USING_NUMBA else _gram_dot_numpy(X)
    if spec.kind == POLYNOMIAL:
        G = (G + spec.offset) ** spec.degree
    return G


def stack_tuples(samples, tuples: np.ndarray) -> np.ndarray:
    """Concatenate sample vectors per id tuple: (n_tuples, arity*m)."""
    tuples = np.asarray(tuples, dtype=np.int64)
    if tuples.ndim == 1:
        tuples = tuples[:, None]
    n = len(samples)
    if tuples.size and (tuples.min() < 0 or tuples.max() >= n):
        bad = tuples.flat[np.argmax((tuples < 0) | (tuples >= n))]
        raise DanglingSampleId(f"sample id {int(bad)} out of range 0..{n - 1}")
    X = samples.vectors[tuples]              # (n_tuples, arity, m)
    return X.reshape(tuples.shape[0], tuples.shape[1] * samples.dimension)


def gram_matrix(spec: KernelSpec, tuples: np.ndarray, samples) -> np.ndarray:
    """Dense Gram matrix of the kernel over a list of unique id tuples."""
    tuples = np.asarray(tuples, dtype=np.int64)
    if tuples.ndim == 1:
        tuples = tuples[:, None]
    seen = set(map(tuple, tuples.tolist()))
    if len(seen) != tuples.shape[0]:
        raise KernelError("support tuples must be unique")
    return _gram_from_vectors(spec, stack_tuples(samples, tuples))


def cross_kernel(spec: KernelSpec, X: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Kernel values k(X[i], z) for one query vector z."""
    if spec.kind == RBF:
        diff = X - z
        return np.exp(-spec.gamma * np.einsum("ij,ij->i", diff, diff))
    base = X @ z
    if spec.kind == POLYNOMIAL:
        return (base + spec.offset) ** spec.degree
    return base


# --- kernel expansions --------------------------------------------------

@dataclass
class KernelExpansion:
    """Representer-form hypothesis: f(args) = sum_i w_i k(support_i, args)."""

    predicate: str
    kernel: KernelSpec
    support: np.ndarray          # (n_support, arity) int64 id tuples
    weights: np.ndarray          # (n_support,) float64
    _row_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.support = np.atleast_2d(np.asarray(self.support, dtype=np.int64))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.support.shape[0],):
            raise DimensionMismatch(
                f"'{self.predicate}': {self.support.shape[0]} support tuples "
                f"but {self.weights.shape[0]} weights"
            )
        if not np.all(np.isfinite(self.weights)):
            raise KernelError(f"'{self.predicate}': weights must be finite")
        rows = list(map(tuple, self.support.tolist()))
        if len(set(rows)) != len(rows):
            raise KernelError(f"'{self.predicate}': support tuples must be unique")
        object.__setattr__(self, "_row_index", {t: i for i, t in enumerate(rows)})

    @property
    def arity(self) -> int:
        return self.support.shape[1]

    def row_of(self, args: tuple[int, ...]) -> int | None:
        return self._row_index.get(tuple(int(a) for a in args))

    def with_weights(self, w: np.ndarray) -> "KernelExpansion":
        return KernelExpansion(self.predicate, self.kernel, self.support, w)


def expansion_eval(exp: KernelExpansion, args, samples) -> float:
    """f(args) for an id tuple, linear in the weights."""
    args = np.asarray(args, dtype=np.int64).reshape(1, -1)
    if args.shape[1] != exp.arity:
        raise DimensionMismatch(
            f"'{exp.predicate}' expects {exp.arity} argument id(s), got {args.shape[1]}"
        )
    z = stack_tuples(samples, args)[0]
    return expansion_eval_vector(exp, z, samples)


def expansion_eval_vector(exp: KernelExpansion, z: np.ndarray, samples) -> float:
    """f at a raw concatenated argument vector (out-of-sample queries)."""
    z = np.asarray(z, dtype=float).ravel()
    X = stack_tuples(samples, exp.support)
    if z.shape[0] != X.shape[1]:
        raise LengthMismatch(f"query vector has length {z.shape[0]}, expected {X.shape[1]}")
    return float(np.dot(exp.weights, cross_kernel(exp.kernel, X, z)))


def rkhs_norm_sq(exp: KernelExpansion, gram: np.ndarray) -> float:
    """Squared RKHS norm w' G w over the expansion's own support."""
    gram = np.asarray(gram, dtype=float)
    n = exp.weights.shape[0]
    if gram.shape != (n, n):
        raise DimensionMismatch(f"gram is {gram.shape}, expected ({n}, {n})")
    return float(exp.weights @ gram @ exp.weights)


# --- model checkpoint format ---------------------------------------------
#
# Plain-text JSON, one entry per predicate: kernel spec, support id tuples
# and weights.  Ids refer to the samples file, which must travel with the
# model.  Floats are written with repr precision and round-trip exactly.

def save_model(path, expansions: dict[str, KernelExpansion]) -> None:
    doc = {
        "format": "folkm-model",
        "version": 1,
        "predicates": [
            {
                "name": exp.predicate,
                "kernel": exp.kernel.to_dict(),
                "arity": exp.arity,
                "support": exp.support.tolist(),
                "weights": exp.weights.tolist(),
            }
            for exp in expansions.values()
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> dict[str, KernelExpansion]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "folkm-model":
        raise KernelError(f"{path}: not a folkm model file")
    out = {}
    for entry in doc["predicates"]:
        out[entry["name"]] = KernelExpansion(
            predicate=entry["name"],
            kernel=KernelSpec.from_dict(entry["kernel"]),
            support=np.asarray(entry["support"], dtype=np.int64).reshape(-1, entry["arity"]),
            weights=np.asarray(entry["weights"], dtype=float),
        )
    return out
