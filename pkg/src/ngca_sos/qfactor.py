"""Closed-form solve for the simple-spider part of Q and its left square root."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dist import MomentProfile, ProfileError, cucl, l_a
from .rho import (
    BlockMatrix,
    component_numeric,
    components,
    forward_substitution_inverse,
    from_components,
    rho,
    rho_inverse,
)
from .spider import (
    SpiderElement,
    SpiderError,
    SSDElement,
    dcomb,
    is_consistent,
    is_good,
    is_left,
    ssd_transpose,
    star,
    star_inverse,
    transpose,
    wbp,
)


class FeasibilityError(ValueError):
    pass


@dataclass
class SpiderFactorization:
    D: int
    L_SS: SpiderElement
    Q0_SS: SpiderElement
    Qhat: SpiderElement
    Q_SS: SpiderElement
    min_eig_rho0: float
    certified_bound: float | None
    C_U: float
    C_L: float
    component_min_eigs: list = field(default_factory=list)
    alpha0: SpiderElement | None = None
    alpha0_inv: SpiderElement | None = None
    alpha0_exact: bool = False


def _coef(v) -> Fraction:
    # float profiles carry rounding dust where the moments match exactly
    if isinstance(v, Fraction):
        return v
    return Fraction(0) if abs(v) <= 1e-10 else Fraction(float(v))


def build_parts(profile: MomentProfile, D: int) -> tuple[SpiderElement, SpiderElement, SpiderElement]:
    """L_SS, Q0_SS and Qhat, each read off the Hermite expectations."""
    if 2 * D > profile.T:
        raise FeasibilityError(f"need profile degree >= {2 * D}, have {profile.T}")
    L, Q0, Qhat = {}, {}, {}
    for u in range(D + 1):
        for i in range(D + 1 - u):
            for j in range(D + 1 - u):
                c = _coef(profile(i + j))
                Qhat[(i, j, u)] = c
                if i == j == 0:
                    L[(0, 0, u)] = Q0[(0, 0, u)] = Fraction(1)
                elif i > j:
                    L[(i, j, u)] = c
                elif i == j:
                    Q0[(i, j, u)] = c
    return SpiderElement(D, L), SpiderElement(D, Q0), SpiderElement(D, Qhat)


def left_inverse(L: SpiderElement) -> SpiderElement:
    """Star inverse of a unit lower-triangular element by forward substitution."""
    M = rho(L)
    return rho_inverse(BlockMatrix(L.D, forward_substitution_inverse(M.pre)))


def component_eigs(x: SpiderElement) -> list[float]:
    """Least eigenvalue of each orthonormal component of a symmetric element."""
    out = []
    for comp in components(rho(x)):
        m = component_numeric(comp)
        out.append(float(np.linalg.eigvalsh((m + m.T) / 2)[0]))
    return out


def solve_qss(profile: MomentProfile, D: int, k: int | None = None, dtrunc: int | None = None) -> SpiderFactorization:
    """Solve L_SS * Q_SS * L_SS^T = Qhat exactly and certify the spectrum."""
    L, Q0, Qhat = build_parts(profile, D)
    Linv = left_inverse(L)
    Q = star(star(Linv, Qhat), transpose(Linv))
    eigs = component_eigs(Q)
    dtrunc = dtrunc if dtrunc is not None else max(1, profile.T // 3)
    if 3 * dtrunc > profile.T:
        raise FeasibilityError(f"need profile degree >= {3 * dtrunc}, have {profile.T}")
    try:
        cu, cl = cucl(profile, D, dtrunc)
    except ProfileError:
        # not a distribution: no certificate, the square root step reports it
        cu, cl = math.nan, math.inf
    bound = None if math.isinf(cl) else (6 * cu) ** (-2 * D) * cl ** (-D)
    return SpiderFactorization(D, L, Q0, Qhat, Q, eigs[0], bound, cu, cl, eigs)


def psd_cholesky(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Lower Cholesky factor that tolerates semidefinite input (small pivots are zeroed)."""
    n = a.shape[0]
    low = np.zeros_like(a, dtype=float)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot < -1e-8:
            raise FeasibilityError("Q_SS not PSD: distribution violates degree-D feasibility")
        if pivot < tol:
            continue
        low[j, j] = math.sqrt(pivot)
        for i in range(j + 1, n):
            low[i, j] = (a[i, j] - low[i, :j] @ low[j, :j]) / low[j, j]
    return low


def _rationalize(x: SpiderElement, max_den: int = 10**6) -> SpiderElement:
    return SpiderElement(x.D, {key: c.limit_denominator(max_den) for key, c in x.coeffs.items()})


def sqrt_alpha0(fact: SpiderFactorization, k: int | None = None) -> SpiderFactorization:
    """Left, consistent square root alpha0 with alpha0 * alpha0^T = Q_SS."""
    D = fact.D
    rho0 = component_numeric(components(rho(fact.Q_SS))[0])
    low = psd_cholesky((rho0 + rho0.T) / 2)
    # back to the rational form: pre = sqrt(C) rho sqrt(C)^-1 inside the component
    s = np.sqrt([float(math.factorial(r)) for r in range(D + 1)])
    pre0 = low * s[:, None] / s[None, :]
    comps = []
    for i in range(D + 1):
        n = D - i + 1
        comp = np.empty((n, n), dtype=object)
        for a in range(n):
            for b in range(n):
                comp[a, b] = Fraction(float(pre0[a, b]))
        comps.append(comp)
    alpha = rho_inverse(from_components(comps))
    alpha = SpiderElement(D, {key: c for key, c in alpha.coeffs.items() if abs(c) > 1e-12})
    exact_try = _rationalize(alpha)
    exact = star(exact_try, transpose(exact_try)) == fact.Q_SS
    if exact:
        alpha = exact_try
    inv = None
    if np.all(np.diag(low) > 1e-12):
        inv = star_inverse(alpha)
        if not exact:
            inv = SpiderElement(D, {key: c for key, c in inv.coeffs.items() if abs(c) > 1e-12})
    fact.alpha0, fact.alpha0_inv, fact.alpha0_exact = alpha, inv, exact
    return fact


def spider_residual(a: SpiderElement, b: SpiderElement) -> float:
    keys = set(a.coeffs) | set(b.coeffs)
    return max((abs(float(a[key] - b[key])) for key in keys), default=0.0)


def degree4_root(l4) -> float:
    """Solution x of 2x + x^2/2 = l4 with x >= -2."""
    return -2 + math.sqrt(2 * float(l4) + 4)


def bounds_check(fact: SpiderFactorization, C_U: float | None = None, C_L: float | None = None) -> list[dict]:
    """Coefficient bounds for alpha0 and its inverse on the spiders S(i, j; 0)."""
    cu = fact.C_U if C_U is None else C_U
    cl = fact.C_L if C_L is None else C_L
    rows = []
    if fact.alpha0 is None:
        raise FeasibilityError("alpha0 has not been extracted")
    for (i, j, u), c in sorted(fact.alpha0.coeffs.items()):
        if u:
            continue
        bound = 2.0 ** (i * (i + 4)) * cu ** (2 * i * i + i)
        rows.append({"element": "alpha0", "spider": (i, j, 0), "value": float(c), "bound": bound, "ok": abs(float(c)) <= bound})
    if fact.alpha0_inv is not None:
        for (i, j, u), c in sorted(fact.alpha0_inv.coeffs.items()):
            if u:
                continue
            bound = (8 * cu * cu * math.sqrt(cl)) ** i if math.isfinite(cl) else math.inf
            rows.append({"element": "alpha0_inv", "spider": (i, j, 0), "value": float(c), "bound": bound, "ok": abs(float(c)) <= bound})
    return rows


def build_qssd(fact: SpiderFactorization) -> SSDElement:
    """D-combination of Q_SS."""
    if not is_consistent(fact.Q_SS):
        raise SpiderError("Q_SS is not consistent")
    return dcomb(fact.Q_SS)


def qssd_square_check(fact: SpiderFactorization) -> bool | None:
    """Whether [alpha0]^D wbp ([alpha0]^D)^T equals [Q_SS]^D exactly (None if alpha0 is not exact)."""
    if fact.alpha0 is None or not fact.alpha0_exact:
        return None
    A = dcomb(fact.alpha0)
    return wbp(A, ssd_transpose(A)) == build_qssd(fact)


def feasibility(profile: MomentProfile, tol: float = 1e-12) -> dict:
    """The two necessary conditions l4 >= -2 and l6 - l4^2 >= -9 l4 - 6."""
    if profile.T < 6:
        raise FeasibilityError(f"need profile degree >= 6, have {profile.T}")
    l4, l6 = profile(4), profile(6)
    slack = 0 if profile.exact else tol
    first = l4 + 2
    second = l6 - l4 * l4 + 9 * l4 + 6
    return {
        "l4": float(l4),
        "l6": float(l6),
        "l4_condition": bool(first >= -slack),
        "l6_condition": bool(second >= -slack),
        "l4_margin": float(first),
        "l6_margin": float(second),
    }


def rho0_qhat(profile: MomentProfile, D: int) -> np.ndarray:
    _, _, Qhat = build_parts(profile, D)
    return component_numeric(components(rho(Qhat))[0])


def left_good_consistent(x: SpiderElement, k: int) -> bool:
    return is_left(x) and is_good(x, k) and is_consistent(x)


def sigma_min_check(profile: MomentProfile, D: int) -> tuple[float, float]:
    """Least eigenvalue of rho_0(Qhat) next to L_A(D)."""
    return float(np.linalg.eigvalsh(rho0_qhat(profile, D))[0]), l_a(profile, D)
