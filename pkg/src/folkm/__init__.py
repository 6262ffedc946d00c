"""folkm: joint kernel-machine learning of logic predicates.

Learns real-valued predicate functions from labeled and unlabeled
examples while enforcing first-order background knowledge, compiled via
product t-norm fuzzy semantics into a differentiable penalty.
"""

from ._accel import USING_NUMBA
from .data import (
    KnownPredicateTable,
    LabeledSet,
    Problem,
    SampleSet,
    load_problem,
    pool_samples,
)
from .fol import (
    ClauseAst,
    PredicateSignature,
    parse_clause,
    parse_clause_lines,
    parse_clause_text,
    pretty,
    tokenize,
)
from .grounding import (
    AtomKey,
    GroundedGraph,
    backprop_graph,
    eval_graph,
    ground_clause,
    squash,
    tnorm_and,
    tnorm_not,
    tnorm_or,
)
from .kernels import (
    KernelExpansion,
    KernelSpec,
    expansion_eval,
    expansion_eval_vector,
    gram_matrix,
    kernel_eval,
    load_model,
    rkhs_norm_sq,
    save_model,
)
from .objective import (
    ObjectiveConfig,
    constraint_penalty,
    empirical_risk,
    make_predictor,
    objective_and_gradient,
    regularizer,
)
from .training import (
    TrainConfig,
    TrainState,
    build_supports,
    compile_problem,
    labeled_restricted_penalty,
    predict,
    predict_vector,
    train,
)

__version__ = "0.1.0"
