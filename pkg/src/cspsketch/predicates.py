"""Symmetric Boolean predicates and the quantities attached to them.

A predicate ``f_{S,k}`` accepts a vector in {-1,1}^k iff its Hamming weight
(number of +1 entries) lies in ``S``.  Symmetric distributions over
{-1,1}^k are carried as their k+1 weight-class masses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError

MAX_ARITY = 31
# masses this close to summing to one are renormalized silently
RENORM_TOL = 1e-6

BETA_GRID = 4096
BETA_STARTS = 3


@dataclass(frozen=True)
class PredicateSpec:
    k: int
    S: frozenset

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k <= MAX_ARITY:
            raise ValidationError(f"arity k must be an integer in [1, {MAX_ARITY}], got {self.k!r}")
        if not self.S:
            raise ValidationError("accepting set S must be nonempty")
        bad = sorted(s for s in self.S if not 0 <= s <= self.k)
        if bad:
            raise ValidationError(f"elements {bad} of S lie outside [0, {self.k}]")

    @property
    def s_min(self) -> int:
        return min(self.S)

    @property
    def s_max(self) -> int:
        return max(self.S)

    @cached_property
    def rho(self) -> float:
        return sum(comb(self.k, s) for s in self.S) / 2**self.k

    @property
    def eps_min(self) -> float:
        return epsilon_weight(self.s_min, self.k)

    @property
    def eps_max(self) -> float:
        return epsilon_weight(self.s_max, self.k)

    @cached_property
    def indicator(self) -> np.ndarray:
        """Boolean vector over weights 0..k, True on accepted weights."""
        out = np.zeros(self.k + 1, dtype=bool)
        out[sorted(self.S)] = True
        return out

    @cached_property
    def transfer(self) -> np.ndarray:
        """Integer matrix T with lambda(D, p) = sum_i D<i> sum_w T[i, w] p^w (1-p)^(k-w).

        T[i, w] counts negation patterns b of weight w such that a ⊙ b is
        accepted, for a fixed a of weight i.
        """
        k = self.k
        T = np.zeros((k + 1, k + 1))
        for i in range(k + 1):
            for w in range(k + 1):
                total = 0
                for j in range(max(0, w - (k - i)), min(i, w) + 1):
                    if k - i - w + 2 * j in self.S:
                        total += comb(i, j) * comb(k - i, w - j)
                T[i, w] = total
        return T

    @property
    def is_threshold(self) -> bool:
        return set(self.S) == set(range(self.s_min, self.k + 1))

    @property
    def supports_onewise(self) -> bool:
        """True when S has elements on both sides of k/2 (approximation resistant)."""
        return 2 * self.s_min <= self.k <= 2 * self.s_max

    def mirrored(self) -> "PredicateSpec":
        return PredicateSpec(self.k, frozenset(self.k - s for s in self.S))

    def label(self) -> str:
        return "f_{" + ",".join(map(str, sorted(self.S))) + "}," + str(self.k)


def make_predicate(k: int, S: Iterable[int]) -> PredicateSpec:
    try:
        members = frozenset(int(s) for s in S)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"S must be a collection of integers: {exc}") from None
    return PredicateSpec(int(k) if isinstance(k, (int, np.integer)) else k, members)


def kand(k: int) -> PredicateSpec:
    return make_predicate(k, {k})


def threshold(i: int, k: int) -> PredicateSpec:
    return make_predicate(k, range(i, k + 1))


def exact_weight(i: int, k: int) -> PredicateSpec:
    return make_predicate(k, {i})


@dataclass(frozen=True)
class SymmetricDist:
    """Symmetric distribution on {-1,1}^k given by masses D<0>, ..., D<k>."""

    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.masses, dtype=float).reshape(-1)
        if m.size < 2:
            raise ValidationError("a symmetric distribution needs at least two masses (k >= 1)")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("masses must be finite and nonnegative")
        total = m.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValidationError(f"masses sum to {total!r}, not 1")
        m = m / total
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def k(self) -> int:
        return self.masses.size - 1

    def __repr__(self):
        return f"SymmetricDist({np.round(self.masses, 6).tolist()})"

    def __eq__(self, other):
        if not isinstance(other, SymmetricDist):
            return NotImplemented
        return np.array_equal(self.masses, other.masses)

    def __hash__(self):
        return hash(self.masses.tobytes())

    def tolist(self) -> list:
        return self.masses.tolist()

    def reversed(self) -> "SymmetricDist":
        return SymmetricDist(self.masses[::-1])

    @classmethod
    def point(cls, i: int, k: int) -> "SymmetricDist":
        m = np.zeros(k + 1)
        m[i] = 1.0
        return cls(m)

    @classmethod
    def binomial(cls, k: int) -> "SymmetricDist":
        """Uniform distribution on {-1,1}^k."""
        return cls(np.array([comb(k, i) for i in range(k + 1)], dtype=float) / 2**k)


DistLike = Union[SymmetricDist, Sequence[float], np.ndarray]


def as_dist(dist: DistLike) -> SymmetricDist:
    return dist if isinstance(dist, SymmetricDist) else SymmetricDist(dist)


def _check_arity(spec: PredicateSpec, dist: SymmetricDist) -> None:
    if dist.k != spec.k:
        raise ValidationError(f"distribution has arity {dist.k}, predicate has arity {spec.k}")


def _check_p(p) -> None:
    if np.any(np.asarray(p) < 0) or np.any(np.asarray(p) > 1) or np.any(np.isnan(p)):
        raise ValidationError(f"p must lie in [0, 1], got {p!r}")


def epsilon_weight(i: int, k: int) -> float:
    """Marginal -1 + 2i/k of a point mass on Hamming weight i."""
    if not 0 <= i <= k:
        raise ValidationError(f"weight {i} outside [0, {k}]")
    return (2 * i - k) / k


def epsilons(k: int) -> np.ndarray:
    return (2 * np.arange(k + 1) - k) / k


def mu(dist: DistLike) -> float:
    d = as_dist(dist)
    return float(epsilons(d.k) @ d.masses)


def weight_basis(p, k: int) -> np.ndarray:
    """Rows p^w (1-p)^(k-w) for w = 0..k; shape (len(p), k+1)."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    w = np.arange(k + 1)
    return p[:, None] ** w * (1.0 - p[:, None]) ** (k - w)


def lambda_coefficients(spec: PredicateSpec, p) -> np.ndarray:
    """Coefficients c_i(p) such that lambda_S(D, p) = sum_i c_i(p) D<i>; shape (len(p), k+1)."""
    return weight_basis(p, spec.k) @ spec.transfer.T


def lam(spec: PredicateSpec, dist: DistLike, p) -> float:
    """Expected value of a p-biased assignment on the canonical instance of ``dist``."""
    d = as_dist(dist)
    _check_arity(spec, d)
    _check_p(p)
    return float(lambda_coefficients(spec, p)[0] @ d.masses)


def lam_grid(spec: PredicateSpec, masses: np.ndarray, ps) -> np.ndarray:
    """Vectorised lambda for a batch of mass vectors (rows) and probabilities."""
    return np.asarray(masses) @ lambda_coefficients(spec, ps).T


def gamma_S(spec: PredicateSpec, dist: DistLike) -> float:
    d = as_dist(dist)
    _check_arity(spec, d)
    return float(d.masses[spec.indicator].sum())


def gamma_curve(spec: PredicateSpec, mu_val) -> float:
    """Largest accepted mass of any symmetric distribution with marginal ``mu_val``.

    Piecewise linear: rises from mu=-1 to the knee at the smallest accepted
    weight, flat at 1 between the knees, then falls to mu=1.  A rising or
    falling branch whose knee sits at -1 or 1 does not exist.
    """
    m = np.asarray(mu_val, dtype=float)
    if np.any(m < -1 - 1e-12) or np.any(m > 1 + 1e-12) or np.any(np.isnan(m)):
        raise ValidationError(f"marginal must lie in [-1, 1], got {mu_val!r}")
    m = np.clip(m, -1.0, 1.0)
    out = np.ones_like(m)
    s, t, k = spec.s_min, spec.s_max, spec.k
    if s > 0:
        # (1 + mu) / (1 + eps_s) with 1 + eps_s = 2s/k
        out = np.minimum(out, (1.0 + m) * k / (2 * s))
    if t < k:
        out = np.minimum(out, (1.0 - m) * k / (2 * (k - t)))
    return float(out) if out.ndim == 0 else out


def _golden_max(f, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 200):
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def beta(spec: PredicateSpec, dist: DistLike, grid: int = BETA_GRID) -> tuple:
    """Maximum over p in [0,1] of lambda_S(dist, p), with its maximiser.

    lambda is a degree-k polynomial in p and can be multimodal, so the
    search is a uniform grid followed by golden-section refinement around
    the best few local maxima.
    """
    d = as_dist(dist)
    _check_arity(spec, d)
    coef = d.masses @ spec.transfer  # coefficients on p^w (1-p)^(k-w)

    def f(p):
        return float(weight_basis(p, spec.k)[0] @ coef)

    ps = np.linspace(0.0, 1.0, grid + 1)
    vals = weight_basis(ps, spec.k) @ coef
    # local maxima on the grid, endpoints included
    left = np.concatenate(([-np.inf], vals[:-1]))
    right = np.concatenate((vals[1:], [-np.inf]))
    peaks = np.flatnonzero((vals >= left) & (vals >= right))
    peaks = peaks[np.argsort(-vals[peaks], kind="stable")][:BETA_STARTS]
    best_p, best_v = float(ps[peaks[0]]), float(vals[peaks[0]])
    h = 1.0 / grid
    for idx in peaks:
        lo, hi = max(0.0, ps[idx] - h), min(1.0, ps[idx] + h)
        p, v = _golden_max(f, lo, hi)
        for cand_p, cand_v in ((p, v), (float(ps[idx]), float(vals[idx]))):
            if cand_v > best_v:
                best_p, best_v = cand_p, cand_v
    return best_v, best_p


def beta_many(spec: PredicateSpec, masses: np.ndarray, grid: int = 512) -> np.ndarray:
    """Grid-only beta for a batch of mass vectors; a screening tool, not a certificate."""
    ps = np.linspace(0.0, 1.0, grid + 1)
    coefs = lambda_coefficients(spec, ps)  # (P, k+1)
    out = np.empty(len(masses))
    chunk = max(1, 2**22 // len(ps))
    for start in range(0, len(masses), chunk):
        block = np.asarray(masses[start:start + chunk])
        out[start:start + chunk] = (block @ coefs.T).max(axis=1)
    return out
