"""Bias-based streaming algorithms for threshold predicates.

``estimate_value`` makes one pass, feeding every literal occurrence into an
l1 sketch of the diff vector, and outputs alpha * gamma(b / (1 + delta))
where b is the sketched bias.  ``round_assignment`` outputs the majority
assignment with each coordinate kept with probability p* and flipped
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .alpha import alpha_numeric, closed_form_alpha
from .errors import UnsupportedPredicateError, ValidationError
from .instance import Instance, diff_and_bias, flip_instance, majority, sym_dist
from .predicates import PredicateSpec, gamma_curve, lam
from .sketch import L1Sketch, rows_for


def predicate_alpha(spec: PredicateSpec, grid: int = 200) -> float:
    cf = closed_form_alpha(spec)
    if cf is not None:
        return cf.alpha
    return alpha_numeric(spec, grid).alpha


@dataclass
class ValueEstimate:
    value: float
    bias_estimate: float
    delta: float
    alpha: float
    rows: int
    total_weight: float
    constraints: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def shrink_factor(alpha: float, epsilon: float) -> float:
    """delta with (1 - delta) / (1 + delta) * alpha >= alpha - epsilon."""
    return min(epsilon / (2 * alpha), 0.5)


def estimate_value(stream, spec: PredicateSpec, epsilon: float, seed: int = 0,
                   n: Optional[int] = None, alpha: Optional[float] = None) -> ValueEstimate:
    """Single-pass (alpha - epsilon)-approximation of the instance value.

    ``stream`` is an :class:`Instance` or an iterable of (b, j, w) triples
    with 0-based indices; in the latter case ``n`` must be given.
    """
    if not spec.is_threshold:
        raise UnsupportedPredicateError(f"{spec.label()} is not a threshold predicate")
    if not 0 < epsilon < 1:
        raise ValidationError("epsilon must lie in (0, 1)")
    if isinstance(stream, Instance):
        n = stream.n
        if stream.k != spec.k:
            raise ValidationError("instance arity does not match predicate")
        stream = stream.constraints()
    if n is None:
        raise ValidationError("dimension n is required for a raw constraint stream")
    if alpha is None:
        alpha = predicate_alpha(spec)
    delta = shrink_factor(alpha, epsilon)
    sketch = L1Sketch(n, delta, seed)
    total, count = 0.0, 0
    for b, j, w in stream:
        if len(b) != spec.k:
            raise ValidationError("constraint arity does not match predicate")
        for bt, jt in zip(b, j):
            sketch.update(int(jt), float(w) * int(bt))
        total += w
        count += 1
    if total <= 0:
        raise ValidationError("stream has no positive weight")
    b_hat = sketch.estimate() / (spec.k * total)
    value = alpha * gamma_curve(spec, min(b_hat / (1 + delta), 1.0))
    return ValueEstimate(float(value), float(b_hat), delta, float(alpha), sketch.rows, float(total), count)


def estimate_value_amplified(inst: Instance, spec: PredicateSpec, epsilon: float, seed: int,
                             repeats: int, alpha: Optional[float] = None) -> float:
    """Median of ``repeats`` independent estimates (seeds seed, seed+1, ...)."""
    if alpha is None:
        alpha = predicate_alpha(spec)
    vals = [estimate_value(inst, spec, epsilon, seed + r, alpha=alpha).value for r in range(repeats)]
    return float(np.median(vals))


def round_assignment(inst: Instance, spec: PredicateSpec, p_star: float, seed: int = 0) -> np.ndarray:
    """maj ⊙ a with a_i = +1 with probability p_star (so each coordinate flips w.p. 1 - p_star)."""
    if not 0.0 <= p_star <= 1.0:
        raise ValidationError("p_star must lie in [0, 1]")
    if spec.k != inst.k:
        raise ValidationError("instance arity does not match predicate")
    rng = np.random.default_rng(seed)
    a = np.where(rng.random(inst.n) < p_star, 1, -1).astype(np.int8)
    return majority(inst) * a


def rounding_expectation(inst: Instance, spec: PredicateSpec, p_star: float) -> float:
    """Exact expected value of :func:`round_assignment` over its coin flips."""
    return lam(spec, sym_dist(flip_instance(inst, majority(inst))), p_star)


def bias_l1_updates(inst: Instance):
    """The turnstile updates whose l1 norm is k * W * bias."""
    for b, j, w in inst.constraints():
        for bt, jt in zip(b, j):
            yield int(jt), w * int(bt)


def exact_bias(inst: Instance) -> float:
    return diff_and_bias(inst)[1]


__all__ = [
    "ValueEstimate", "estimate_value", "estimate_value_amplified", "round_assignment",
    "rounding_expectation", "predicate_alpha", "shrink_factor", "bias_l1_updates", "exact_bias",
    "rows_for",
]
