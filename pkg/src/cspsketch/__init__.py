"""Sketching approximation ratios for symmetric Boolean CSPs and bias-based streaming algorithms."""

from .errors import (
    InvalidWitnessError,
    OracleRefusal,
    ParseError,
    UnsupportedPredicateError,
    ValidationError,
)
from .predicates import (
    PredicateSpec,
    SymmetricDist,
    beta,
    exact_weight,
    gamma_curve,
    gamma_S,
    kand,
    lam,
    make_predicate,
    mu,
    threshold,
)
from .alpha import (
    AlphaCertificate,
    alpha_numeric,
    closed_form_alpha,
    support2_search,
    uniqueness_scan_3and,
    verify_max_min,
)
from .padded import padded_decompose, padded_search, pair_ratio
from .instance import (
    Instance,
    canonical_instance,
    diff_and_bias,
    eval_assignment,
    exact_value,
    flip_instance,
    generate_instance,
    parse_instance,
    serialize_instance,
    sym_dist,
)
from .sketch import L1Sketch
from .algorithms import estimate_value, round_assignment

__version__ = "0.1.0"
