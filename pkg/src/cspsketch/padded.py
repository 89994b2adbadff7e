"""Padded one-wise pairs: decomposition and search.

A pair (D_Y, D_N) is padded one-wise when both share a common component
tau * D_0 and the remaining parts have zero marginal.  Such pairs give
streaming (not only sketching) lower bounds with ratio
beta_S(D_N) / gamma_S(D_Y).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .alpha import LP_OPTIONS
from .errors import ValidationError
from .predicates import (
    DistLike,
    PredicateSpec,
    SymmetricDist,
    as_dist,
    beta,
    epsilons,
    gamma_S,
    gamma_curve,
    lambda_coefficients,
    mu,
)

FEAS_TOL = 1e-4


@dataclass
class PaddedPairDecomposition:
    tau: float
    D0: SymmetricDist
    DYprime: SymmetricDist
    DNprime: SymmetricDist

    def reconstruct(self) -> tuple:
        t = self.tau
        return (t * self.D0.masses + (1 - t) * self.DYprime.masses,
                t * self.D0.masses + (1 - t) * self.DNprime.masses)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "D0": self.D0.tolist(), "DYprime": self.DYprime.tolist(),
                "DNprime": self.DNprime.tolist()}


def _zero_marginal_fallback(k: int) -> SymmetricDist:
    return SymmetricDist.binomial(k)


def padded_decompose(DY: DistLike, DN: DistLike) -> Optional[PaddedPairDecomposition]:
    """Find the decomposition with the largest shared weight tau, or None if none exists.

    The shared part E = tau * D_0 must sit below both inputs componentwise
    and carry all of their (common) marginal, which is a small LP.
    """
    dy, dn = as_dist(DY), as_dist(DN)
    if dy.k != dn.k:
        raise ValidationError(f"arity mismatch: {dy.k} vs {dn.k}")
    k = dy.k
    eps = epsilons(k)
    cap = np.minimum(dy.masses, dn.masses)
    mu_y, mu_n = float(eps @ dy.masses), float(eps @ dn.masses)
    if abs(mu_y - mu_n) > FEAS_TOL:
        return None
    res = linprog(-np.ones(k + 1), A_eq=np.vstack([eps, eps]), b_eq=[mu_y, mu_n],
                  bounds=list(zip(np.zeros(k + 1), cap)), method="highs", options=LP_OPTIONS)
    if res.status != 0:
        return None
    E = np.clip(res.x, 0.0, cap)
    tau = float(E.sum())
    if tau >= 1.0 - 1e-12:
        # D_Y = D_N = D_0; the residual weight is zero so any zero-marginal residual works
        fb = _zero_marginal_fallback(k)
        return PaddedPairDecomposition(1.0, dy, fb, fb)
    if tau <= 1e-15:
        if abs(mu_y) > FEAS_TOL:
            return None
        return PaddedPairDecomposition(0.0, _zero_marginal_fallback(k), dy, dn)
    ry = np.clip(dy.masses - E, 0.0, None)
    rn = np.clip(dn.masses - E, 0.0, None)
    ry, rn = ry / ry.sum(), rn / rn.sum()
    if abs(eps @ ry) > FEAS_TOL or abs(eps @ rn) > FEAS_TOL:
        return None
    return PaddedPairDecomposition(tau, SymmetricDist(E / tau), SymmetricDist(ry), SymmetricDist(rn))


def pair_ratio(spec: PredicateSpec, DY: DistLike, DN: DistLike) -> float:
    """beta_S(D_N) / gamma_S(D_Y)."""
    return beta(spec, DN)[0] / gamma_S(spec, DY)


@dataclass
class PaddedSearchResult:
    DY: SymmetricDist
    DN: SymmetricDist
    decomposition: PaddedPairDecomposition
    ratio: float
    iterations: int

    def to_dict(self) -> dict:
        return {"DY": self.DY.tolist(), "DN": self.DN.tolist(), "ratio": self.ratio,
                "decomposition": self.decomposition.to_dict(), "iterations": self.iterations}


def padded_search(spec: PredicateSpec, resolution: int = 200, max_outer: int = 60,
                  tol: float = 1e-12) -> PaddedSearchResult:
    """Padded one-wise pair minimising beta_S(D_N) / gamma_S(D_Y).

    Write the shared part as E (total mass tau) and the no-side residual as
    R (total mass 1 - tau, zero marginal).  The best yes-side residual
    always attains gamma_{S,k}(0), so the denominator is linear in (E, R)
    and the numerator beta_S(E + R) is convex; the ratio is minimised by
    Dinkelbach iterations whose inner problems are cutting-plane LPs over
    a p-grid of ``resolution`` points that grows with each true maximiser.
    """
    if resolution < 50:
        raise ValidationError("resolution must be at least 50")
    k = spec.k
    n = k + 1
    eps = epsilons(k)
    ind = spec.indicator.astype(float)
    g0 = float(gamma_curve(spec, 0.0))
    ps = list(np.linspace(0.0, 1.0, resolution + 1))
    # variables: E (n), R (n), t
    A_eq = np.vstack([np.r_[np.ones(2 * n), 0.0], np.r_[np.zeros(n), eps, 0.0]])
    b_eq = np.array([1.0, 0.0])
    bounds = [(0, None)] * (2 * n) + [(None, None)]

    def solve(c_ratio):
        for _ in range(200):
            coef = lambda_coefficients(spec, ps)
            A_ub = np.hstack([coef, coef, -np.ones((len(ps), 1))])
            obj = np.r_[-c_ratio * ind, -c_ratio * g0 * np.ones(n), 1.0]
            res = linprog(obj, A_ub=A_ub, b_ub=np.zeros(len(ps)), A_eq=A_eq, b_eq=b_eq,
                          bounds=bounds, method="highs", options=LP_OPTIONS)
            if res.status != 0:
                raise RuntimeError(f"padded LP failed: {res.message}")
            E = np.clip(res.x[:n], 0.0, None)
            R = np.clip(res.x[n:2 * n], 0.0, None)
            b, p = beta(spec, (E + R) / (E + R).sum())
            if b - res.x[-1] <= 1e-11:
                return E, R, b
            ps.append(p)
        return E, R, b

    # start from the trivial pair D_Y = D_N = uniform (ratio rho / gamma(0) at worst)
    c_ratio = spec.rho / g0 if g0 > 0 else 1.0
    E = R = None
    it = 0
    for it in range(1, max_outer + 1):
        E, R, b = solve(c_ratio)
        den = float(ind @ E + g0 * R.sum())
        new = b / den
        if abs(new - c_ratio) <= tol:
            c_ratio = new
            break
        c_ratio = min(c_ratio, new)
    tau = float(E.sum())
    dn = SymmetricDist((E + R) / (E + R).sum())
    yes_resid = _best_zero_marginal_yes(spec)
    dy_masses = E + (1 - tau) * yes_resid.masses
    dy = SymmetricDist(dy_masses / dy_masses.sum())
    dec = padded_decompose(dy, dn)
    if dec is None:
        # numerically borderline: build it from the optimiser's own pieces
        D0 = SymmetricDist(E / tau) if tau > 1e-15 else _zero_marginal_fallback(k)
        rn = SymmetricDist(R / R.sum()) if R.sum() > 1e-15 else _zero_marginal_fallback(k)
        dec = PaddedPairDecomposition(tau, D0, yes_resid, rn)
    return PaddedSearchResult(dy, dn, dec, pair_ratio(spec, dy, dn), it)


def _best_zero_marginal_yes(spec: PredicateSpec) -> SymmetricDist:
    """A zero-marginal distribution attaining gamma_{S,k}(0), per the knee construction."""
    k = spec.k
    s, t = spec.s_min, spec.s_max
    m = np.zeros(k + 1)
    if 2 * s <= k <= 2 * t:
        if s == t:
            m[s] = 1.0
        else:
            # mix s and t to zero marginal
            m[s], m[t] = (2 * t - k) / (2 * (t - s)), (k - 2 * s) / (2 * (t - s))
    elif 2 * s > k:
        # weights 0 and s
        m[0], m[s] = (2 * s - k) / (2 * s), k / (2 * s)
    else:
        m[t], m[k] = k / (2 * (k - t)), (k - 2 * t) / (2 * (k - t))
    return SymmetricDist(m)
