"""One-dimensional moment profiles and the hard-instance families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np
from numpy.polynomial import hermite_e

from .hermite import eval_hermite, monomial_coeffs

FAMILIES = ("gaussian", "rademacher", "mixture", "a_mix", "a_cov", "a_gmm", "custom")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class MomentProfile:
    """Hermite expectations l(t) = E_A[h_t] for t = 0..T of a 1-D distribution."""

    l: tuple
    family: str
    params: dict = field(default_factory=dict)
    components: tuple | None = None  # (weight, mean, variance) triples
    sampleable: bool = True

    @property
    def T(self) -> int:
        return len(self.l) - 1

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.l)

    @property
    def k_match(self) -> int:
        for t in range(1, len(self.l)):
            if not _is_zero(self.l[t]):
                return t
        return len(self.l)

    def __call__(self, t: int):
        if t < 0 or t > self.T:
            raise ProfileError(f"degree {t} outside profile range 0..{self.T}")
        return self.l[t]

    def floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.l])


def _is_zero(v) -> bool:
    return v == 0 if isinstance(v, Fraction) else abs(v) <= 1e-10


def _as_rational(x):
    """Rationals stay exact; decimal floats are read as their shortest decimal literal."""
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(repr(float(x)))


def component_hermite(mu, var, t: int):
    """E[h_t] under N(mu, var)."""
    if var <= 0:
        raise ProfileError(f"variance must be positive, got {var}")
    half = (var - 1) / 2
    total = 0
    for j in range(t // 2 + 1):
        total += Fraction(math.factorial(t), math.factorial(j) * math.factorial(t - 2 * j)) * mu ** (t - 2 * j) * half**j
    return total


def _pair_hermite(mu_sq, var, t: int):
    """E[h_t] under the symmetric pair ½N(-mu, var) + ½N(mu, var), given mu²."""
    if t % 2:
        return mu_sq * 0
    half = (var - 1) / 2
    total = 0
    for j in range(t // 2 + 1):
        total += Fraction(math.factorial(t), math.factorial(j) * math.factorial(t - 2 * j)) * mu_sq ** ((t - 2 * j) // 2) * half**j
    return total


def quadrature(k: int):
    """Nodes (roots of He_k) and weights k!/(k² He_{k-1}(x)²) of the k-point Gaussian rule."""
    if not 1 <= k <= 16:
        raise ProfileError(f"quadrature order must be in 1..16, got {k}")
    nodes, _ = hermite_e.hermegauss(k)
    for _ in range(50):
        step = np.array([eval_hermite(k, x) / (k * eval_hermite(k - 1, x)) for x in nodes])
        nodes = nodes - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(nodes))):
            break
    nodes = np.where(np.abs(nodes) < 1e-15, 0.0, nodes)
    nodes = (nodes - nodes[::-1]) / 2  # the rule is symmetric about 0
    weights = np.array([math.factorial(k) / (k * k * eval_hermite(k - 1, x) ** 2) for x in nodes])
    weights = (weights + weights[::-1]) / 2
    return nodes, weights


def _mixture_l(components, T: int) -> tuple:
    exact = all(isinstance(c, Fraction) for comp in components for c in comp)
    out = []
    for t in range(T + 1):
        if exact:
            out.append(sum((w * component_hermite(mu, var, t) for w, mu, var in components), Fraction(0)))
        else:
            out.append(float(sum(float(w) * float(component_hermite(float(mu), float(var), t)) for w, mu, var in components)))
    return tuple(out)


def make_profile(family: str, T: int, **params) -> MomentProfile:
    """Build a profile of Hermite expectations up to degree T.

    Families: gaussian, rademacher, mixture(components=...), a_mix(delta),
    a_cov(tau), a_gmm(k, delta), custom(l=...).
    """
    if T < 0:
        raise ProfileError(f"T must be non-negative, got {T}")
    if family == "gaussian":
        l = (Fraction(1),) + (Fraction(0),) * T
        return MomentProfile(l, family, {}, ((Fraction(1), Fraction(0), Fraction(1)),))
    if family == "rademacher":
        l = tuple(sum(monomial_coeffs(t), Fraction(0)) if t % 2 == 0 else Fraction(0) for t in range(T + 1))
        return MomentProfile(l, family, {})
    if family == "mixture":
        comps = params.get("components")
        if not comps:
            raise ProfileError("mixture needs a non-empty 'components' list")
        comps = tuple(tuple(c) for c in comps)
        for w, _, var in comps:
            if not 0 < float(w) <= 1:
                raise ProfileError(f"mixture weight {w} outside (0, 1]")
            if float(var) <= 0:
                raise ProfileError(f"mixture variance {var} must be positive")
        if abs(sum(float(w) for w, _, _ in comps) - 1) > 1e-12:
            raise ProfileError("mixture weights must sum to 1")
        if all(isinstance(c, Rational) for comp in comps for c in comp):
            comps = tuple(tuple(Fraction(c) for c in comp) for comp in comps)
        return MomentProfile(_mixture_l(comps, T), family, {"components": comps}, comps)
    if family == "a_mix":
        delta = _as_rational(params.get("delta", 0.3))
        if not 0 < delta < 1:
            raise ProfileError(f"a_mix needs delta in (0, 1), got {delta}")
        mu_sq = 1 / (1 + delta * delta)
        var = delta * delta * mu_sq
        l = tuple(_pair_hermite(mu_sq, var, t) for t in range(T + 1))
        mu = math.sqrt(mu_sq)
        comps = ((Fraction(1, 2), -mu, var), (Fraction(1, 2), mu, var))
        return MomentProfile(l, family, {"delta": delta}, comps)
    if family == "a_cov":
        tau = _as_rational(params.get("tau", 0.1))
        if not 0 < tau < Fraction(1, 5):
            raise ProfileError(f"a_cov needs tau in (0, 1/5), got {tau}")
        var0 = 1 - Fraction(4, 5) / (1 - tau)
        mu_sq = Fraction(4, 5) / tau
        l = tuple((1 - tau) * component_hermite(Fraction(0), var0, t) + tau * _pair_hermite(mu_sq, Fraction(1), t) for t in range(T + 1))
        mu = math.sqrt(mu_sq)
        comps = ((1 - tau, 0.0, var0), (tau / 2, -mu, Fraction(1)), (tau / 2, mu, Fraction(1)))
        return MomentProfile(l, family, {"tau": tau}, comps)
    if family == "a_gmm":
        k = int(params.get("k", 2))
        delta = float(params.get("delta", 0.5))
        if k < 1:
            raise ProfileError(f"a_gmm needs k >= 1, got {k}")
        if not 0 < delta < 1:
            raise ProfileError(f"a_gmm needs delta in (0, 1), got {delta}")
        nodes, weights = quadrature(k)
        scale = math.sqrt(1 - delta)
        comps = tuple((float(w), float(scale * x), delta) for x, w in zip(nodes, weights))
        return MomentProfile(_mixture_l(comps, T), family, {"k": k, "delta": delta}, comps)
    if family == "custom":
        raw = params.get("l")
        if raw is None or len(raw) == 0:
            raise ProfileError("custom profile needs an 'l' array")
        l = [v if isinstance(v, (Fraction, float)) else (Fraction(v) if isinstance(v, (int, str)) else float(v)) for v in raw]
        if l[0] != 1:
            raise ProfileError("custom profile must have l(0) = 1")
        if not all(isinstance(v, Fraction) for v in l):
            l = [float(v) for v in l]
        l = l[: T + 1] + [Fraction(0) if isinstance(l[0], Fraction) else 0.0] * max(0, T + 1 - len(l))
        return MomentProfile(tuple(l), family, {}, None, sampleable=False)
    raise ProfileError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


def profile_from_literal(spec: dict, T: int) -> MomentProfile:
    """Build from the JSON literal {"family": ..., "params": {...}}."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ProfileError("profile literal needs a 'family' key")
    return make_profile(spec["family"], T, **spec.get("params", {}))


def parse_profile(text: str, T: int) -> MomentProfile:
    """Parse shorthand like 'a_mix(0.3)', 'a_gmm(3,0.5)', 'rademacher' or a JSON literal."""
    import json
    import re

    text = text.strip()
    if text.startswith("{"):
        return profile_from_literal(json.loads(text), T)
    m = re.fullmatch(r"(\w+)(?:\((.*)\))?", text)
    if not m:
        raise ProfileError(f"cannot parse profile {text!r}")
    name, args = m.group(1), [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    keys = {"a_mix": ["delta"], "a_cov": ["tau"], "a_gmm": ["k", "delta"]}.get(name, [])
    if len(args) > len(keys):
        raise ProfileError(f"too many arguments for {name}: {text!r}")
    params = {}
    for key, a in zip(keys, args):
        params[key] = int(a) if key == "k" else (Fraction(a) if "/" in a else float(a))
    return make_profile(name, T, **params)


def u_a(profile: MomentProfile, t: int) -> float:
    """max over 0 <= i <= t of |l(i)|."""
    return float(max(abs(profile(i)) for i in range(t + 1)))


def gram_exact(profile: MomentProfile, t: int) -> list[list]:
    """Unnormalized Gram matrix E_A[h_a h_b], a, b <= t."""
    return [[sum(math.comb(a, u) * math.comb(b, u) * math.factorial(u) * profile(a + b - 2 * u) for u in range(min(a, b) + 1))
             for b in range(t + 1)] for a in range(t + 1)]


def gram_matrix(profile: MomentProfile, t: int) -> np.ndarray:
    """Normalized Gram matrix E_A[h_a h_b]/sqrt(a! b!), a, b <= t."""
    if 2 * t > profile.T:
        raise ProfileError(f"need profile degree >= {2 * t}, have {profile.T}")
    rows = gram_exact(profile, t)
    return np.array([[float(v) / math.sqrt(math.factorial(a) * math.factorial(b)) for b, v in enumerate(row)]
                     for a, row in enumerate(rows)])


def _exact_det(rows) -> Fraction:
    m = [list(r) for r in rows]
    n, det = len(m), Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for j in range(c, n):
                    m[r][j] -= f * m[c][j]
    return det


def l_a(profile: MomentProfile, t: int) -> float:
    """Least eigenvalue of the normalized Gram matrix of degree t."""
    g = gram_matrix(profile, t)
    lo = float(np.linalg.eigvalsh(g)[0])
    if lo < -1e-8:
        raise ProfileError(f"profile is not a valid distribution up to degree {t}")
    if profile.exact and _exact_det(gram_exact(profile, t)) == 0:
        return 0.0
    return max(lo, 0.0)


def cucl(profile: MomentProfile, D: int, Dtrunc: int) -> tuple[float, float]:
    """The constants C_U and C_L (C_L is inf when some L_A(t) vanishes)."""
    if 3 * Dtrunc > profile.T:
        raise ProfileError(f"need profile degree >= {3 * Dtrunc}, have {profile.T}")
    cu = max([1.0] + [abs(float(profile(t))) ** (1 / t) for t in range(1, 3 * Dtrunc + 1)])
    cl = 1.0
    for t in range(1, D + 1):
        v = l_a(profile, t)
        if v == 0:
            return cu, math.inf
        cl = max(cl, v ** (-1 / t))
    return cu, cl


def sample(profile: MomentProfile, count: int, seed) -> np.ndarray:
    """Draw i.i.d. values from the profile's distribution."""
    if not profile.sampleable:
        raise ProfileError(f"profile family {profile.family!r} is not sampleable")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if profile.family == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=count)
    w = np.array([float(c[0]) for c in profile.components])
    mu = np.array([float(c[1]) for c in profile.components])
    sd = np.sqrt([float(c[2]) for c in profile.components])
    idx = rng.choice(len(w), size=count, p=w / w.sum())
    return mu[idx] + sd[idx] * rng.standard_normal(count)


def generic_ua_bound(t: int, sigma: float, C: float, B: float) -> float:
    """(8t)^t (sigma C^t + 2 B^(2t) + sigma^(t+1) t^(t/2))."""
    return (8 * t) ** t * (sigma * C**t + 2 * B ** (2 * t) + sigma ** (t + 1) * t ** (t / 2))


def mixture_ua_bound(profile: MomentProfile, t: int) -> float:
    """Generic U_A bound with constants read off the mixture components."""
    if profile.components is None:
        raise ProfileError(f"no mixture components for family {profile.family!r}")
    C = max(abs(float(c[1])) for c in profile.components)
    sigma = max(1.0, max(math.sqrt(float(c[2])) for c in profile.components))
    B = max(2.0, C + sigma)
    return generic_ua_bound(t, sigma, C, B)


def log_density(profile: MomentProfile, x) -> np.ndarray:
    if profile.components is None:
        raise ProfileError(f"family {profile.family!r} has no density")
    x = np.asarray(x, dtype=float)
    terms = []
    for w, mu, var in profile.components:
        var = float(var)
        terms.append(math.log(float(w)) - 0.5 * math.log(2 * math.pi * var) - (x - float(mu)) ** 2 / (2 * var))
    return np.logaddexp.reduce(np.stack(terms), axis=0)


def density_ratio_la_bound(profile: MomentProfile, t: int, grid: int = 20001) -> float:
    """min over |x| <= 10 sqrt(t ln(t+1)) of q(x) / (2 g(x)), evaluated in log space."""
    r = 10 * math.sqrt(t * math.log(t + 1))
    x = np.linspace(-r, r, grid)
    log_g = -0.5 * math.log(2 * math.pi) - x**2 / 2
    return float(math.exp(np.min(log_density(profile, x) - log_g) - math.log(2)))
