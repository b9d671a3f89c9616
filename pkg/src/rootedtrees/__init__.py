"""Exact probability distributions on rooted subtrees of a perfect k-ary
base tree, with a generalized context-tree source model and lossless codec."""

from .base_tree import (
    ROOT,
    Address,
    RootedSubtree,
    TreeShape,
    enumerate_subtrees,
    format_address,
    format_subtree,
    parent,
    parse_address,
    parse_subtree,
    path_edges,
    validate_subtree,
)
from .codec import CodecConfig, decode, encode, ideal_codelength
from .conjugacy import (
    ConstantAlphaRule,
    DirichletHyper,
    PathLikelihood,
    PathPatternLikelihood,
    dirichlet_posterior,
    tree_posterior_general,
    tree_posterior_path,
    tree_posterior_path_patterned,
)
from .context_tree import (
    Alphabet,
    ContextTreeModel,
    SymbolHistory,
    context_of,
    sample_source,
)
from .distribution import (
    FullTreeRule,
    NodeParam,
    RecursionStats,
    TreeDistribution,
    UniformRule,
    generic_sum,
    normalization_sum,
)
from .errors import (
    AbsoluteContinuityError,
    CodecError,
    EnumerationCapError,
    FormatError,
    TreeStructureError,
    ZeroConditionError,
    ZeroEvidenceError,
)
from .experiment import ExperimentConfig, ExperimentReport, run_experiment

__all__ = [
    "ROOT",
    "Address",
    "Alphabet",
    "AbsoluteContinuityError",
    "CodecConfig",
    "CodecError",
    "ConstantAlphaRule",
    "ContextTreeModel",
    "DirichletHyper",
    "EnumerationCapError",
    "ExperimentConfig",
    "ExperimentReport",
    "FormatError",
    "FullTreeRule",
    "NodeParam",
    "PathLikelihood",
    "PathPatternLikelihood",
    "RecursionStats",
    "RootedSubtree",
    "SymbolHistory",
    "TreeDistribution",
    "TreeShape",
    "TreeStructureError",
    "UniformRule",
    "ZeroConditionError",
    "ZeroEvidenceError",
    "context_of",
    "decode",
    "dirichlet_posterior",
    "encode",
    "enumerate_subtrees",
    "format_address",
    "format_subtree",
    "generic_sum",
    "ideal_codelength",
    "normalization_sum",
    "parent",
    "parse_address",
    "parse_subtree",
    "path_edges",
    "run_experiment",
    "sample_source",
    "tree_posterior_general",
    "tree_posterior_path",
    "tree_posterior_path_patterned",
    "validate_subtree",
]
