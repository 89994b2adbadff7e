"""Weighted Max-CSP instances over symmetric predicates.

Indices are 0-based in memory and 1-based in the text format::

    # comment
    p maxcsp <n> <k> <m>
    c <weight> <±j1> ... <±jk>

A ``+`` (or no sign) on index j_t means b_t = +1, ``-`` means b_t = -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import OracleRefusal, ParseError, ValidationError
from .predicates import DistLike, PredicateSpec, SymmetricDist, as_dist

MAX_EXACT_N = 24


@dataclass
class Instance:
    n: int
    k: int
    signs: np.ndarray  # (m, k) int8 in {-1, +1}
    indices: np.ndarray  # (m, k) int64, 0-based
    weights: np.ndarray  # (m,) float

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=np.int8).reshape(-1, self.k)
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.k)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        m = len(self.weights)
        if self.n < 1 or self.k < 1:
            raise ValidationError("n and k must be positive")
        if self.signs.shape != (m, self.k) or self.indices.shape != (m, self.k):
            raise ValidationError("signs, indices and weights disagree on the constraint count")
        if m == 0:
            raise ValidationError("instance has no constraints")
        if not np.all(np.isin(self.signs, (-1, 1))):
            raise ValidationError("negation patterns must be +-1")
        if self.indices.min() < 0 or self.indices.max() >= self.n:
            raise ValidationError(f"variable index out of range [1, {self.n}]")
        srt = np.sort(self.indices, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            row = int(np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))[0])
            raise ValidationError(f"constraint {row + 1} repeats a variable index")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValidationError("weights must be finite and nonnegative")
        if self.weights.sum() <= 0:
            raise ValidationError("total weight must be positive")

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def constraints(self) -> Iterator[tuple]:
        """(b, j, w) triples in stream order, j 0-based."""
        for b, j, w in zip(self.signs, self.indices, self.weights):
            yield b, j, float(w)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.n, self.k) == (other.n, other.k) and all(
            np.array_equal(a, b) for a, b in ((self.signs, other.signs), (self.indices, other.indices),
                                              (self.weights, other.weights)))


def _check_assignment(inst: Instance, sigma) -> np.ndarray:
    s = np.asarray(sigma)
    if s.shape[-1] != inst.n:
        raise ValidationError(f"assignment length {s.shape[-1]} does not match n={inst.n}")
    if not np.all(np.isin(s, (-1, 1))):
        raise ValidationError("assignment entries must be +-1")
    return s


# ------------------------------------------------------------------ text I/O


def _fmt_weight(w: float) -> str:
    return repr(float(w))


def serialize_instance(inst: Instance, comment: Optional[str] = None) -> str:
    lines = []
    if comment:
        lines.extend("# " + c for c in comment.splitlines())
    lines.append(f"p maxcsp {inst.n} {inst.k} {inst.m}")
    for b, j, w in inst.constraints():
        lits = " ".join(("+" if bt > 0 else "-") + str(jt + 1) for bt, jt in zip(b, j))
        lines.append(f"c {_fmt_weight(w)} {lits}")
    return "\n".join(lines) + "\n"


def iter_constraints(lines: Iterable[str]):
    """Parse the text format lazily.  Yields the header (n, k, m) first, then (b, j, w) triples."""
    header = None
    seen = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if header is not None:
                raise ParseError("duplicate header", lineno)
            if len(parts) != 5 or parts[1] != "maxcsp":
                raise ParseError("header must read 'p maxcsp <n> <k> <m>'", lineno)
            try:
                n, k, m = (int(x) for x in parts[2:])
            except ValueError:
                raise ParseError("header values must be integers", lineno) from None
            if n < 1 or k < 1 or m < 1:
                raise ParseError("header values must be positive", lineno)
            if k > n:
                raise ParseError("arity exceeds variable count", lineno)
            header = (n, k, m)
            yield header
            continue
        if parts[0] != "c":
            raise ParseError(f"unrecognised line type {parts[0]!r}", lineno)
        if header is None:
            raise ParseError("constraint before header", lineno)
        n, k, m = header
        if len(parts) != k + 2:
            raise ParseError(f"expected weight and {k} literals", lineno)
        try:
            w = float(parts[1])
        except ValueError:
            raise ParseError(f"bad weight {parts[1]!r}", lineno) from None
        if not np.isfinite(w) or w < 0:
            raise ParseError("weight must be finite and nonnegative", lineno)
        b, j = [], []
        for lit in parts[2:]:
            sign = -1 if lit.startswith("-") else 1
            try:
                idx = int(lit.lstrip("+-"))
            except ValueError:
                raise ParseError(f"bad literal {lit!r}", lineno) from None
            if not 1 <= idx <= n:
                raise ParseError(f"index {idx} out of range [1, {n}]", lineno)
            b.append(sign)
            j.append(idx - 1)
        if len(set(j)) != k:
            raise ParseError("duplicate index in constraint", lineno)
        seen += 1
        if seen > m:
            raise ParseError(f"more than the declared {m} constraints", lineno)
        yield np.array(b, dtype=np.int8), np.array(j, dtype=np.int64), w
    if header is None:
        raise ParseError("missing header")
    if seen != header[2]:
        raise ParseError(f"header declares {header[2]} constraints, found {seen}")


def parse_instance(text: str) -> Instance:
    it = iter_constraints(text.splitlines())
    n, k, m = next(it)
    rows = list(it)
    return Instance(n, k, [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])


def read_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------- evaluation


def _satisfied(inst: Instance, spec: PredicateSpec, sigmas: np.ndarray) -> np.ndarray:
    """Weighted satisfied mass for each assignment row; sigmas has shape (A, n)."""
    lits = inst.signs[None, :, :] * sigmas[:, inst.indices]  # (A, m, k)
    wt = (lits > 0).sum(axis=2)
    return spec.indicator[wt].astype(float) @ inst.weights


def eval_assignment(inst: Instance, spec: PredicateSpec, sigma) -> float:
    if spec.k != inst.k:
        raise ValidationError(f"predicate arity {spec.k} does not match instance arity {inst.k}")
    s = _check_assignment(inst, sigma).astype(np.int8)
    return float(_satisfied(inst, spec, s[None, :])[0] / inst.total_weight)


def eval_many(inst: Instance, spec: PredicateSpec, sigmas: np.ndarray) -> np.ndarray:
    s = _check_assignment(inst, sigmas).astype(np.int8).reshape(-1, inst.n)
    out = np.empty(len(s))
    chunk = max(1, 2**22 // max(1, inst.m * inst.k))
    for start in range(0, len(s), chunk):
        out[start:start + chunk] = _satisfied(inst, spec, s[start:start + chunk])
    return out / inst.total_weight


def exact_value(inst: Instance, spec: PredicateSpec) -> tuple:
    """Maximum value over all 2^n assignments and the lexicographically first maximiser (-1 < +1)."""
    if spec.k != inst.k:
        raise ValidationError(f"predicate arity {spec.k} does not match instance arity {inst.k}")
    n = inst.n
    if n > MAX_EXACT_N:
        raise OracleRefusal(f"exhaustive search is limited to n <= {MAX_EXACT_N}; use estimate_value")
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    total = 1 << n
    chunk = max(1, min(total, 2**22 // max(1, inst.m * inst.k)))
    best_v, best_code = -1.0, 0
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        sig = (((codes[:, None] >> shifts) & 1) * 2 - 1).astype(np.int8)
        vals = _satisfied(inst, spec, sig)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_code = float(vals[i]), int(codes[i])
    sigma = (((best_code >> shifts) & 1) * 2 - 1).astype(np.int8)
    return best_v / inst.total_weight, sigma


# ------------------------------------------------------------- bias machinery


def diff_and_bias(inst: Instance) -> tuple:
    """Per-variable positive-minus-negative occurrence weight, and the normalised bias."""
    diff = np.zeros(inst.n)
    np.add.at(diff, inst.indices.ravel(), (inst.signs * inst.weights[:, None]).ravel())
    # sum |diff| <= kW exactly; rounding can overshoot by an ulp
    return diff, min(float(np.abs(diff).sum() / (inst.k * inst.total_weight)), 1.0)


def majority(inst: Instance) -> np.ndarray:
    diff, _ = diff_and_bias(inst)
    return np.where(diff >= 0, 1, -1).astype(np.int8)


def flip_instance(inst: Instance, a) -> Instance:
    a = _check_assignment(inst, a).astype(np.int8)
    return Instance(inst.n, inst.k, inst.signs * a[inst.indices], inst.indices.copy(), inst.weights.copy())


def sym_dist(inst: Instance) -> SymmetricDist:
    wt = (inst.signs > 0).sum(axis=1)
    masses = np.bincount(wt, weights=inst.weights, minlength=inst.k + 1)
    return SymmetricDist(masses / inst.total_weight)


# -------------------------------------------------------------- construction


def canonical_instance(dist: DistLike) -> Instance:
    """One constraint per negation pattern on variables 1..k, weighted by its probability under ``dist``.

    Patterns with zero probability are omitted.
    """
    d = as_dist(dist)
    k = d.k
    signs, weights = [], []
    for code in range(2**k):
        b = np.array([1 if (code >> (k - 1 - t)) & 1 else -1 for t in range(k)], dtype=np.int8)
        w = int((b > 0).sum())
        prob = d.masses[w] / comb(k, w)
        if prob > 0:
            signs.append(b)
            weights.append(prob)
    idx = np.tile(np.arange(k), (len(weights), 1))
    return Instance(k, k, signs, idx, weights)


def _random_tuples(rng: np.random.Generator, n: int, k: int, m: int) -> np.ndarray:
    keys = rng.random((m, n))
    return np.argsort(keys, axis=1)[:, :k]


def generate_instance(kind: str, k: int, n: int = 10, m: int = 100, seed: int = 0,
                      dist: Optional[DistLike] = None, weighted: bool = False) -> Instance:
    """Random instances: ``random_uniform``, ``planted_dist`` (patterns drawn from ``dist``) or ``canonical``."""
    if kind == "canonical":
        if dist is None:
            raise ValidationError("canonical instances need a distribution")
        return canonical_instance(dist)
    if n < k:
        raise ValidationError(f"need n >= k, got n={n}, k={k}")
    if m < 1:
        raise ValidationError("need m >= 1")
    rng = np.random.default_rng(seed)
    idx = _random_tuples(rng, n, k, m)
    if kind == "random_uniform":
        signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, k))
    elif kind == "planted_dist":
        if dist is None:
            raise ValidationError("planted_dist instances need a distribution")
        d = as_dist(dist)
        if d.k != k:
            raise ValidationError("distribution arity does not match k")
        wts = rng.choice(k + 1, size=m, p=d.masses)
        order = np.argsort(rng.random((m, k)), axis=1)
        signs = np.where(order < wts[:, None], 1, -1).astype(np.int8)
    else:
        raise ValidationError(f"unknown instance kind {kind!r}")
    weights = rng.uniform(0.5, 2.0, size=m) if weighted else np.ones(m)
    return Instance(n, k, signs, idx, weights)
