"""Computing and certifying the sketching approximation ratio alpha(f_{S,k}).

alpha is the infimum over symmetric D of beta_S(D) / gamma_{S,k}(mu(D)).
Three routes are provided:

* ``closed_form_alpha`` -- catalogued families with known witnesses.
* ``verify_max_min`` -- certifies a witness (D*, p*) by checking that p*
  maximises lambda(D*, .) and that lambda(., p*) >= alpha * gamma on every
  extreme point of the pieces where gamma is linear.
* ``alpha_numeric`` -- sweeps the marginal mu and solves the inner
  minimisation of beta over {D : mu(D) = mu} exactly as a cutting-plane LP
  (beta is a maximum of functions linear in D, hence convex).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, isqrt
from typing import Optional

import numpy as np
from scipy.optimize import brentq, linprog

from .errors import InvalidWitnessError, ValidationError
from .predicates import (
    DistLike,
    PredicateSpec,
    SymmetricDist,
    as_dist,
    beta,
    beta_many,
    epsilons,
    gamma_curve,
    lam,
    lambda_coefficients,
    mu,
)

CERT_TOL = 1e-9
LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class VertexInequality:
    vertex_id: str
    vertex: SymmetricDist
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs - CERT_TOL

    def to_dict(self) -> dict:
        return {
            "vertex": self.vertex_id,
            "masses": self.vertex.tolist(),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "pass": self.passed,
        }


@dataclass
class AlphaCertificate:
    alpha: float
    witness_dist: SymmetricDist
    witness_p: float
    verified: bool
    method: str  # closed_form | max_min_verified | numeric_only
    vertex_report: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "alpha": self.alpha,
            "witness": {"masses": self.witness_dist.tolist(), "p_star": self.witness_p},
            "method": self.method,
            "verified": self.verified,
            "vertex_report": [v.to_dict() for v in self.vertex_report],
        }
        out.update(self.notes)
        return out


# ---------------------------------------------------------------- closed forms


def alpha_prime(k: int) -> float:
    """((k-1)(k+1) / 4k^2)^((k-1)/2) for odd k >= 3."""
    if k < 3 or k % 2 == 0:
        raise ValidationError(f"alpha'_k is defined for odd k >= 3, got {k}")
    e = (k - 1) // 2
    return ((k - 1) * (k + 1)) ** e / (4 * k * k) ** e


def ex_mid_p(k: int) -> float:
    """Maximiser of lambda for the Ex^{(k+1)/2}_k witness (positive critical point)."""
    return (3 * k - k * k + np.sqrt(4 * k + k * k - 2 * k**3 + k**4)) / (4 * k)


def ex_mid_alpha(k: int, p: Optional[float] = None) -> float:
    if p is None:
        p = ex_mid_p(k)
    q = 1.0 - p
    h = (k + 1) // 2
    return comb(k, h) * ((k - 1) / (2 * k) * q**h * p ** (h - 1) + (k + 1) / (2 * k) * q ** (h - 1) * p**h)


def positive_root(coeffs_low_to_high) -> float:
    """The unique positive real root of a polynomial, polished by bracketing."""
    c = np.asarray(coeffs_low_to_high, dtype=float)
    roots = np.roots(c[::-1])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9 and r.real > 0)
    if len(real) != 1:
        raise ValueError(f"expected a unique positive root, found {real}")
    r = real[0]
    poly = np.polynomial.Polynomial(c)
    lo, hi = r * (1 - 1e-6), r * (1 + 1e-6)
    if poly(lo) * poly(hi) > 0:
        return r
    return brentq(poly, lo, hi, xtol=1e-15, rtol=1e-15)


P1 = (-72, 4890, -108999, 800000)
P2 = (-908, 5021, -9001, 5158)
P3 = (-60, 5745, -183426, 1953125)
P4 = (-344, 1770, -3102, 1811)


def _table_entry(S: frozenset, k: int):
    if (S, k) == (frozenset({2, 3}), 3):
        return 0.5 + np.sqrt(3.0) / 18.0, [0, 0.5, 0, 0.5]
    if (S, k) == (frozenset({4, 5}), 5):
        r = positive_root(P2)
        return 8 * positive_root(P1), [0, 0, 1 - r, r, 0, 0]
    if (S, k) == (frozenset({4}), 5):
        r = positive_root(P4)
        return 8 * positive_root(P3), [0, 0, 1 - r, r, 0, 0]
    if (S, k) == (frozenset({3, 4, 5}), 5):
        return 0.5 + 3 * np.sqrt(5.0) / 125.0, [0, 0.5, 0, 0, 0, 0.5]
    return None


@dataclass
class ClosedForm:
    alpha: float
    dist: SymmetricDist
    p_star: float
    family: str


def closed_form_alpha(spec: PredicateSpec) -> Optional[ClosedForm]:
    """Look up alpha and a saddle-point witness for catalogued predicate families."""
    k, S = spec.k, frozenset(spec.S)
    if spec.supports_onewise:
        # the uniform distribution has zero marginal and lambda = rho for every p
        return ClosedForm(spec.rho, SymmetricDist.binomial(k), 0.5, "onewise")
    if 2 * spec.s_max < k:
        # f_{S,k}(x) = f_{k-S,k}(-x): reverse the witness, keep p*
        cf = closed_form_alpha(spec.mirrored())
        if cf is None:
            return None
        return ClosedForm(cf.alpha, cf.dist.reversed(), cf.p_star, cf.family + "-mirrored")
    if S == {k} and k >= 2:
        if k % 2:
            m = np.zeros(k + 1)
            m[(k + 1) // 2] = 1.0
            return ClosedForm(alpha_prime(k), SymmetricDist(m), (k + 1) / (2 * k), "kand")
        h = k // 2
        norm = (h + 1) ** 2 + h**2
        m = np.zeros(k + 1)
        m[h], m[h + 1] = (h + 1) ** 2 / norm, h**2 / norm
        return ClosedForm(2 * alpha_prime(k + 1), SymmetricDist(m), (k + 2) / (2 * (k + 1)), "kand")
    if S == {k - 1, k} and k % 2 == 0 and k >= 4:
        h = k // 2
        norm = h**2 + (h - 1) ** 2
        m = np.zeros(k + 1)
        m[h], m[h + 1] = h**2 / norm, (h - 1) ** 2 / norm
        return ClosedForm(h * alpha_prime(k - 1), SymmetricDist(m), k / (2 * (k - 1)), "th-k-1")
    if k % 2 and 3 <= k <= 51 and S == {(k + 1) // 2}:
        m = np.zeros(k + 1)
        m[0], m[k] = (k - 1) / (2 * k), (k + 1) / (2 * k)
        return ClosedForm(ex_mid_alpha(k), SymmetricDist(m), ex_mid_p(k), "ex-mid")
    entry = _table_entry(S, k)
    if entry is not None:
        a, masses = entry
        d = SymmetricDist(masses)
        _, p = beta(spec, d)
        return ClosedForm(float(a), d, float(p), "table")
    return None


def family_spec(family: str, k: int) -> PredicateSpec:
    if family == "kand":
        return PredicateSpec(k, frozenset({k}))
    if family == "th-k-1":
        if k % 2:
            raise ValidationError("th-k-1 family requires even k")
        return PredicateSpec(k, frozenset({k - 1, k}))
    if family == "ex-mid":
        if k % 2 == 0:
            raise ValidationError("ex-mid family requires odd k")
        return PredicateSpec(k, frozenset({(k + 1) // 2}))
    raise ValidationError(f"unknown family {family!r}")


# ---------------------------------------------------------- max-min machinery


def knees(spec: PredicateSpec) -> list:
    """Interior weights where gamma_{S,k} bends, as integers s with knee marginal (2s-k)/k."""
    out = []
    if spec.s_min > 0:
        out.append(spec.s_min)
    if spec.s_max < spec.k and spec.s_max not in out:
        out.append(spec.s_max)
    return out


def region_vertices(spec: PredicateSpec) -> list:
    """Extreme points of the pieces of the simplex on which gamma_{S,k}(mu(.)) is linear.

    These are the point masses D_i together with, for each knee weight s,
    the two-point distributions D_{i,j} (i < s < j) whose marginal equals
    the knee marginal.
    """
    k = spec.k
    out = []
    for i in range(k + 1):
        out.append((f"D{i}", SymmetricDist.point(i, k)))
    for s in knees(spec):
        for i in range(s):
            for j in range(s + 1, k + 1):
                m = np.zeros(k + 1)
                m[i] = Fraction(j - s, j - i)
                m[j] = Fraction(s - i, j - i)
                out.append((f"D{i},{j}@{s}", SymmetricDist(m)))
    return out


def vertex_inequalities(spec: PredicateSpec, p: float, alpha: float) -> list:
    out = []
    for vid, v in region_vertices(spec):
        out.append(VertexInequality(vid, v, lam(spec, v, p), alpha * gamma_curve(spec, mu(v))))
    return out


def maxmin_lower(spec: PredicateSpec, p: float) -> float:
    """inf over all symmetric D of lambda(D, p) / gamma_{S,k}(mu(D)); a lower bound on alpha."""
    best = np.inf
    for _, v in region_vertices(spec):
        g = gamma_curve(spec, mu(v))
        if g > 0:
            best = min(best, lam(spec, v, p) / g)
    return float(best)


def verify_max_min(spec: PredicateSpec, dist: DistLike, p_star: float) -> AlphaCertificate:
    """Certify that (dist, p_star) is a saddle point of lambda / gamma."""
    d = as_dist(dist)
    if d.k != spec.k:
        raise ValidationError(f"witness arity {d.k} does not match predicate arity {spec.k}")
    if not 0.0 <= p_star <= 1.0:
        raise ValidationError(f"p* must lie in [0, 1], got {p_star}")
    g = gamma_curve(spec, mu(d))
    if g <= 0:
        raise InvalidWitnessError("gamma vanishes at the witness marginal")
    at_p = lam(spec, d, p_star)
    best, best_p = beta(spec, d)
    p_is_max = best - at_p <= CERT_TOL
    alpha_cand = at_p / g
    report = vertex_inequalities(spec, p_star, alpha_cand)
    verified = p_is_max and all(v.passed for v in report)
    return AlphaCertificate(
        alpha=alpha_cand,
        witness_dist=d,
        witness_p=float(p_star),
        verified=verified,
        method="max_min_verified" if verified else "numeric_only",
        vertex_report=report,
        notes={"beta_witness": best, "beta_argmax": best_p, "p_star_is_maximizer": p_is_max,
               "upper_bound": best / g, "lower_bound": maxmin_lower(spec, p_star)},
    )


# ------------------------------------------------------------- numeric alpha


@dataclass
class BetaSlice:
    mu: float
    value: float  # beta_S at the minimising distribution (upper estimate)
    lower: float  # LP value (lower estimate)
    dist: SymmetricDist
    p_star: float


def beta_sk(spec: PredicateSpec, mu_val: float, init_grid: int = 64, tol: float = 1e-11,
            max_iter: int = 100) -> BetaSlice:
    """inf of beta_S(D) over symmetric D with marginal ``mu_val``.

    Cutting-plane LP: minimise t subject to lambda(D, p) <= t for p in a
    growing set, adding the true maximiser of lambda(D, .) each round.
    """
    k = spec.k
    if not -1.0 <= mu_val <= 1.0:
        raise ValidationError(f"marginal must lie in [-1, 1], got {mu_val}")
    eps = epsilons(k)
    ps = list(np.linspace(0.0, 1.0, init_grid + 1))
    c = np.zeros(k + 2)
    c[-1] = 1.0
    A_eq = np.vstack([np.r_[np.ones(k + 1), 0.0], np.r_[eps, 0.0]])
    b_eq = np.array([1.0, mu_val])
    bounds = [(0, None)] * (k + 1) + [(None, None)]
    for _ in range(max_iter):
        coef = lambda_coefficients(spec, ps)
        A_ub = np.hstack([coef, -np.ones((len(ps), 1))])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(ps)), A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs", options=LP_OPTIONS)
        if res.status != 0:
            raise RuntimeError(f"LP failed at mu={mu_val}: {res.message}")
        masses = np.clip(res.x[: k + 1], 0.0, None)
        d = SymmetricDist(masses / masses.sum())
        t = float(res.x[-1])
        b, p = beta(spec, d)
        if b - t <= tol:
            break
        ps.append(p)
    return BetaSlice(float(mu_val), float(b), t, d, float(p))


def _golden_min(f, lo, hi, iters):
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc[0] <= fd[0]:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return min((fc, fd), key=lambda r: r[0])


def alpha_numeric(spec: PredicateSpec, grid: int = 200, refine_iters: int = 40,
                  threads: int = 1) -> AlphaCertificate:
    """Numerical alpha: minimise beta_{S,k}(mu) / gamma_{S,k}(mu) over a grid of marginals.

    The ratio is quasi-convex in mu (convex over concave), so golden-section
    refinement around the best grid point converges to the global minimum.
    """
    if grid < 10:
        raise ValidationError("grid must be at least 10")
    t0 = time.perf_counter()
    mus = np.linspace(-1.0, 1.0, grid + 1)
    gammas = gamma_curve(spec, mus)
    skipped = [float(m) for m, g in zip(mus, gammas) if g <= 0]
    mus = mus[gammas > 0]

    def ratio(m):
        sl = beta_sk(spec, float(m))
        return sl.value / gamma_curve(spec, sl.mu), sl

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(ratio, mus))
    else:
        results = [ratio(m) for m in mus]
    vals = np.array([r[0] for r in results])
    i = int(np.argmin(vals))
    best = results[i]
    lo = mus[max(i - 1, 0)]
    hi = mus[min(i + 1, len(mus) - 1)]
    if refine_iters > 0 and hi > lo:
        refined = _golden_min(ratio, float(lo), float(hi), refine_iters)
        if refined[0] < best[0]:
            best = refined
    value, sl = best
    table = [
        {"masses": r[1].dist.tolist(), "mu": r[1].mu, "beta": r[1].value,
         "gamma": float(gamma_curve(spec, r[1].mu)), "ratio": r[0]}
        for r in results
    ]
    return AlphaCertificate(
        alpha=float(value),
        witness_dist=sl.dist,
        witness_p=sl.p_star,
        verified=False,
        method="numeric_only",
        notes={"grid": grid, "skipped_mu": skipped, "mu_star": sl.mu, "scan": table,
               "runtime_ms": int((time.perf_counter() - t0) * 1000)},
    )


# --------------------------------------------------------- support-2 search


@dataclass
class Support2Result:
    dist: SymmetricDist
    lower: float
    upper: float
    p_star: float
    verified: bool


def _ratio_exact(spec, masses):
    g = gamma_curve(spec, float(epsilons(spec.k) @ masses))
    if g <= 0:
        return np.inf, 0.0
    b, p = beta(spec, SymmetricDist(masses))
    return b / g, p


def support2_search(spec: PredicateSpec, resolution: int = 400,
                    dist: Optional[DistLike] = None) -> Support2Result:
    """Best witness supported on at most two Hamming weights, with max-min bounds on alpha.

    ``upper`` is beta/gamma at the witness; ``lower`` is the max-min bound
    obtained by fixing p at the witness's maximiser.  If ``dist`` is given
    the search is skipped and the bounds are evaluated there.
    """
    if resolution < 100:
        raise ValidationError("resolution must be at least 100")
    k = spec.k
    if dist is None:
        fr = np.arange(resolution + 1) / resolution
        pairs = [(i, j) for i in range(k + 1) for j in range(i + 1, k + 1)]
        masses = np.zeros((len(pairs) * len(fr), k + 1))
        for n, (i, j) in enumerate(pairs):
            rows = slice(n * len(fr), (n + 1) * len(fr))
            masses[rows, i] = 1 - fr
            masses[rows, j] = fr
        g = gamma_curve(spec, masses @ epsilons(k))
        with np.errstate(divide="ignore", invalid="ignore"):
            screen = np.where(g > 0, beta_many(spec, masses) / np.where(g > 0, g, 1), np.inf)
        # exact evaluation of the best screened candidates, then refine the mixing fraction
        order = np.argsort(screen, kind="stable")[:8]
        best = None
        for idx in order:
            pair = pairs[idx // len(fr)]
            f0 = fr[idx % len(fr)]
            i, j = pair

            def at(f, i=i, j=j):
                m = np.zeros(k + 1)
                m[i], m[j] = 1 - f, f
                return _ratio_exact(spec, m)[0], m

            lo, hi = max(0.0, f0 - 1 / resolution), min(1.0, f0 + 1 / resolution)
            cands = [at(f0), _golden_min(at, lo, hi, 60)]
            for val, m in cands:
                key = (val, tuple(m))
                if best is None or key < (best[0], tuple(best[1])):
                    best = (val, m)
        d = SymmetricDist(best[1])
    else:
        d = as_dist(dist)
    cert = verify_max_min(spec, d, beta(spec, d)[1])
    upper = cert.notes["upper_bound"]
    lower = cert.notes["lower_bound"]
    return Support2Result(d, float(lower), float(upper), cert.witness_p, cert.verified)


# ------------------------------------------------------ 3AND uniqueness scan


def simplex_lattice(parts: int, grid: int) -> np.ndarray:
    """All compositions of ``grid`` into ``parts`` nonnegative parts, divided by grid (lex order)."""
    if parts == 1:
        return np.array([[1.0]])
    rows = []

    def rec(prefix, remaining, left):
        if left == 1:
            rows.append(prefix + [remaining])
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a, left - 1)

    if parts <= 3:
        rec([], grid, parts)
        return np.array(rows, dtype=float) / grid
    # vectorised for four parts
    out = []
    for a in range(grid + 1):
        for b in range(grid - a + 1):
            c = np.arange(grid - a - b + 1)
            block = np.empty((c.size, 4))
            block[:, 0], block[:, 1], block[:, 2] = a, b, c
            block[:, 3] = grid - a - b - c
            out.append(block)
    return np.vstack(out) / grid


def three_and_proxy_ratio(masses: np.ndarray) -> np.ndarray:
    """lambda_{3}(D, p(D)) / gamma_{3,3}(mu(D)) with p(D) = D<1>/3 + 2D<2>/3 + D<3>."""
    masses = np.atleast_2d(masses)
    p = masses @ np.array([0.0, 1 / 3, 2 / 3, 1.0])
    q = 1.0 - p
    num = masses[:, 0] * q**3 + masses[:, 1] * q**2 * p + masses[:, 2] * q * p**2 + masses[:, 3] * p**3
    den = masses @ np.array([0.0, 1 / 3, 2 / 3, 1.0])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1), np.inf)


def uniqueness_scan_3and(grid: int = 200, ball: float = 0.05, threads: int = 1) -> dict:
    if grid < 100:
        raise ValidationError("grid must be at least 100")
    t0 = time.perf_counter()
    pts = simplex_lattice(4, grid)
    target = np.array([0.0, 0.0, 1.0, 0.0])
    chunks = np.array_split(np.arange(len(pts)), max(1, threads))

    def work(idx):
        return three_and_proxy_ratio(pts[idx])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = np.concatenate(list(pool.map(work, chunks)))
    else:
        vals = three_and_proxy_ratio(pts)
    i = int(np.argmin(vals))  # first minimiser in lexicographic lattice order
    far = np.abs(pts - target).sum(axis=1) >= ball - 1e-12
    j = int(np.flatnonzero(far)[np.argmin(vals[far])])
    return {
        "grid": grid,
        "points": int(len(pts)),
        "min": float(vals[i]),
        "argmin": pts[i].tolist(),
        "margin": float(vals[j] - 2 / 9),
        "margin_argmin": pts[j].tolist(),
        "ball": ball,
        "runtime_ms": int((time.perf_counter() - t0) * 1000),
    }
