import numpy as np
import pytest

from cspsketch.algorithms import (
    estimate_value,
    estimate_value_amplified,
    exact_bias,
    predicate_alpha,
    round_assignment,
    rounding_expectation,
    shrink_factor,
)
from cspsketch.errors import UnsupportedPredicateError, ValidationError
from cspsketch.instance import (
    Instance,
    canonical_instance,
    eval_assignment,
    eval_many,
    exact_value,
    generate_instance,
    majority,
)
from cspsketch.predicates import exact_weight, gamma_curve, kand, threshold


def test_shrink_factor_meets_guarantee():
    for a in (0.1, 2 / 9, 4 / 9, 0.75):
        for eps in (0.01, 0.05, 0.2):
            d = shrink_factor(a, eps)
            assert 0 < d <= 0.5
            assert (1 - d) / (1 + d) * a >= a - eps - 1e-15


def test_repeated_2and_constraint():
    inst = Instance(2, 2, [[1, 1]] * 50, [[0, 1]] * 50, np.ones(50))
    est = estimate_value(inst, kand(2), 0.05, seed=1)
    assert est.value <= 1.0
    assert est.value >= 4 / 9 - 0.05


def test_estimate_never_exceeds_val_with_exact_bias():
    # the shrunken argument: alpha * gamma(b) <= gamma(b) and val <= gamma(b); with b exact we stay below val
    for seed in range(30):
        spec = threshold(3, 4) if seed % 2 else kand(2)
        inst = generate_instance("random_uniform", spec.k, n=8, m=30, seed=seed)
        b = exact_bias(inst)
        a = predicate_alpha(spec)
        d = shrink_factor(a, 0.05)
        val = exact_value(inst, spec)[0]
        for bh in (b, b * (1 + d)):
            assert a * gamma_curve(spec, min(bh / (1 + d), 1)) <= val + 1e-12


def test_estimate_accepts_raw_stream():
    inst = generate_instance("random_uniform", 2, n=10, m=50, seed=4)
    a = estimate_value(inst, kand(2), 0.1, seed=2)
    b = estimate_value(inst.constraints(), kand(2), 0.1, seed=2, n=inst.n)
    assert a == b
    with pytest.raises(ValidationError):
        estimate_value(inst.constraints(), kand(2), 0.1)


def test_estimate_rejects_non_threshold():
    inst = generate_instance("random_uniform", 3, n=5, m=5)
    with pytest.raises(UnsupportedPredicateError):
        estimate_value(inst, exact_weight(2, 3), 0.1)


def test_amplified_estimate_is_median():
    inst = generate_instance("random_uniform", 2, n=10, m=100, seed=1)
    vals = sorted(estimate_value(inst, kand(2), 0.1, seed=s).value for s in range(3))
    assert estimate_value_amplified(inst, kand(2), 0.1, 0, 3) == vals[1]


def test_round_p_one_is_majority():
    inst = generate_instance("random_uniform", 3, n=12, m=40, seed=9)
    assert np.array_equal(round_assignment(inst, kand(3), 1.0, seed=4), majority(inst))


def test_round_is_seeded():
    inst = generate_instance("random_uniform", 3, n=12, m=40, seed=9)
    a = round_assignment(inst, kand(3), 2 / 3, seed=4)
    assert np.array_equal(a, round_assignment(inst, kand(3), 2 / 3, seed=4))
    with pytest.raises(ValidationError):
        round_assignment(inst, kand(3), 1.5)


def _mc(inst, spec, p, draws, seed):
    rng = np.random.default_rng(seed)
    a = np.where(rng.random((draws, inst.n)) < p, 1, -1).astype(np.int8)
    vals = eval_many(inst, spec, a * majority(inst))
    return vals.mean(), vals.std(ddof=1) / np.sqrt(draws)


def test_round_single_2and_constraint():
    inst = Instance(2, 2, [[1, 1]], [[0, 1]], [1.0])
    assert rounding_expectation(inst, kand(2), 2 / 3) == pytest.approx(4 / 9)
    mean, se = _mc(inst, kand(2), 2 / 3, 10_000, 0)
    assert abs(mean - 4 / 9) <= 2 * se


def test_round_canonical_3and():
    inst = canonical_instance((0, 0, 1, 0))
    val = exact_value(inst, kand(3))[0]
    mean, se = _mc(inst, kand(3), 2 / 3, 10_000, 1)
    assert mean >= 2 / 9 * val - 2 * se


def test_rounding_expectation_matches_monte_carlo():
    inst = generate_instance("random_uniform", 3, n=9, m=25, seed=3)
    mean, se = _mc(inst, threshold(2, 3), 0.7, 20_000, 2)
    assert abs(mean - rounding_expectation(inst, threshold(2, 3), 0.7)) <= 4 * se
