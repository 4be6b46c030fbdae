"""Absolute exponents, per-generation scales and the inequality ledger.

A hierarchy is fixed by a handful of absolute exponents (beta, b, the small
gammas, the time exponent e) and a base frequency lambda0.  Generation q then
has

    lambda_q = ceil(lambda0 ** (b ** q)),  mu_q = lambda_q ** e,
    delta_q = lambda_q ** (-2 beta),       kappa_q = lambda_q ** (-theta),

with theta = 2b(1+beta)/(b+1).  The admissible region for the exponents is a
list of strict inequalities.  In ``strict`` mode they are expected to hold; in
``desk`` mode they are evaluated and reported while construction proceeds,
because any admissible region needs a base frequency far beyond a grid that
fits in memory.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace

from .errors import ScaleOverflowError

__all__ = [
    "AbsoluteParams",
    "GenerationParams",
    "Constraint",
    "ConstraintReport",
    "derive_generation",
    "validate_constraints",
    "desk_preset",
    "e_band",
]

# Largest integer below which every float64 integer is exactly representable.
EXACT_INT_LIMIT = 2.0 ** 53


def e_band(beta, b, gamma_S):
    """Admissible interval for the time exponent e.

    Returns ``(lo, hi)`` such that ``lo <= e <= hi`` is the band on ``b*e``
    divided by ``b``.
    """
    centre = 1.0 - b * beta + (1.0 + beta) * (b - 1.0) / (2.0 * (1.0 + b))
    half = 0.5 * b * gamma_S
    return (centre - half) / b, (centre + half) / b


@dataclass(frozen=True)
class AbsoluteParams:
    """Absolute exponents of the construction.

    Parameters
    ----------
    beta : float
        Velocity regularity exponent, ``0 < beta < 1/3``.
    b : float
        Super-exponential growth rate of the frequencies, ``b > 1``.
    alpha0, alpha_prime, s : float
        Target Hölder exponent, datum regularity and Sobolev index.
    gamma_I, gamma_R, gamma_S, gamma : float
        Small auxiliary exponents.
    e : float or None
        Time exponent in ``mu_q = lambda_q ** e``.  ``None`` selects the
        midpoint of the admissible band.
    lambda0 : int
        Base frequency.
    Nstar, N, Q : int
        Taylor order of the surrogate flow and two bookkeeping integers.
    mode : {"strict", "desk"}
    """

    beta: float = 0.3
    b: float = 1.25
    alpha0: float = 0.3
    alpha_prime: float = 0.65
    s: float = 0.97
    gamma_I: float = 0.0125
    gamma_R: float = 0.0125
    gamma_S: float = 0.1
    gamma: float = 0.003
    e: float | None = None
    lambda0: int = 16
    Nstar: int = 2
    N: int = 16
    Q: int = 2
    mode: str = "desk"

    def __post_init__(self):
        if self.mode not in ("strict", "desk"):
            raise ValueError(f"mode must be 'strict' or 'desk', got {self.mode!r}")
        if int(self.lambda0) != self.lambda0 or self.lambda0 < 2:
            raise ValueError("lambda0 must be an integer >= 2")
        if self.b <= 1.0:
            raise ValueError("b must exceed 1")
        positive = ("beta", "alpha0", "alpha_prime", "s",
                    "gamma_I", "gamma_R", "gamma_S", "gamma")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("Nstar", "N", "Q"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.e is None:
            lo, hi = e_band(self.beta, self.b, self.gamma_S)
            object.__setattr__(self, "e", 0.5 * (lo + hi))

    @property
    def theta(self):
        return 2.0 * self.b * (1.0 + self.beta) / (self.b + 1.0)

    @property
    def alpha(self):
        # 2 alpha + beta = 1 + 2 b gamma_I - 2 b^2 gamma
        return 0.5 * (1.0 - self.beta + 2.0 * self.b * self.gamma_I
                      - 2.0 * self.b ** 2 * self.gamma)

    @property
    def ratio_exponent(self):
        """Exponent of delta^(1/2)/(kappa lambda) as a power of lambda."""
        return (1.0 + self.beta) * (self.b - 1.0) / (self.b + 1.0)

    def to_dict(self):
        return asdict(self)

    def with_(self, **kw):
        return replace(self, **kw)


def desk_preset(**overrides) -> AbsoluteParams:
    """Desk-scale parameters (lambda0=16, b=1.25, beta=0.3)."""
    return AbsoluteParams(**overrides)


@dataclass(frozen=True)
class GenerationParams:
    """Scales of one generation.

    ``lambda_real`` is ``lambda0 ** (b ** q)`` before the ceiling; every other
    field is computed from the ceiled integer ``lambda_q``.
    """

    q: int
    lambda_q: int
    lambda_real: float
    mu_q: float
    delta_q: float
    kappa_q: float
    ringLambda_q: float
    ringMu_q: float
    eps_q: float
    theta: float
    alpha: float

    @property
    def sqrt_delta(self):
        return math.sqrt(self.delta_q)

    @property
    def ratio(self):
        """delta^(1/2) / (kappa lambda) with the ceiled lambda."""
        return self.sqrt_delta / (self.kappa_q * self.lambda_q)

    def to_dict(self):
        return asdict(self)


def _lambda(abs_: AbsoluteParams, q: int):
    try:
        real = float(abs_.lambda0) ** (abs_.b ** q)
    except OverflowError:
        raise ScaleOverflowError(q, math.inf) from None
    if not math.isfinite(real) or real > EXACT_INT_LIMIT:
        raise ScaleOverflowError(q, real)
    return int(math.ceil(real)), real


def _scales(abs_: AbsoluteParams, lam: int):
    mu = lam ** abs_.e
    delta = lam ** (-2.0 * abs_.beta)
    kappa = lam ** (-abs_.theta)
    ratio = math.sqrt(delta) / (kappa * lam)
    ring_lambda = lam ** (1.0 + abs_.b * abs_.gamma_I) * math.sqrt(ratio)
    ring_mu = math.sqrt(delta) * lam ** (1.0 + 2.0 * abs_.b * abs_.gamma_I)
    return mu, delta, kappa, ring_lambda, ring_mu


def derive_generation(abs_: AbsoluteParams, q: int) -> GenerationParams:
    """Closed-form scales of generation ``q``.

    Raises
    ------
    ScaleOverflowError
        If lambda_q or lambda_{q+1} (needed for eps_q) exceeds 2**53.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    lam, real = _lambda(abs_, q)
    lam_next, _ = _lambda(abs_, q + 1)
    mu, delta, kappa, ring_lambda, ring_mu = _scales(abs_, lam)
    mu_next = lam_next ** abs_.e
    eps = math.sqrt(delta) * lam ** (1.0 + 2.0 * abs_.b * abs_.gamma_R) / mu_next
    return GenerationParams(
        q=q, lambda_q=lam, lambda_real=real, mu_q=mu, delta_q=delta,
        kappa_q=kappa, ringLambda_q=ring_lambda, ringMu_q=ring_mu, eps_q=eps,
        theta=abs_.theta, alpha=abs_.alpha)


@dataclass
class Constraint:
    """One inequality ``left <op> right`` with its evaluated margin."""

    name: str
    left: float
    right: float
    op: str
    satisfied: bool

    @property
    def margin(self):
        """Signed slack, positive when satisfied (right - left for <, <=)."""
        if self.op in ("<", "<="):
            return self.right - self.left
        return self.left - self.right


@dataclass
class ConstraintReport:
    mode: str
    qmax: int
    entries: list = field(default_factory=list)
    ratio_checks: list = field(default_factory=list)

    @property
    def overall(self):
        return all(c.satisfied for c in self.entries)

    def failed(self):
        return [c for c in self.entries if not c.satisfied]

    def __getitem__(self, name):
        for c in self.entries:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.entries]

    def to_dict(self):
        rows = []
        for c in self.entries:
            rows.append(dict(name=c.name, left=c.left, op=c.op, right=c.right,
                             satisfied=c.satisfied, margin=c.margin))
        return dict(mode=self.mode, qmax=self.qmax, overall=self.overall,
                    constraints=rows, ratio_identity=self.ratio_checks)

    def to_json(self, **kw):
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)


_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def validate_constraints(abs_: AbsoluteParams, qmax: int) -> ConstraintReport:
    """Evaluate every inequality of the parameter ledger up to ``qmax``.

    Failures are report entries, never exceptions (apart from scale overflow
    while deriving generations).
    """
    if qmax < 1:
        raise ValueError("qmax must be >= 1")
    rep = ConstraintReport(mode=abs_.mode, qmax=qmax)

    def add(name, left, op, right):
        rep.entries.append(Constraint(name, float(left), float(right), op,
                                      bool(_OPS[op](left, right))))

    p = abs_
    b, beta = p.b, p.beta
    add("beta < 1/3", beta, "<", 1.0 / 3.0)
    add("2 alpha0 + beta < 1", 2 * p.alpha0 + beta, "<", 1.0)
    add("alpha' > alpha0", p.alpha_prime, ">", p.alpha0)
    add("s > (1+beta)/2", p.s, ">", 0.5 * (1 + beta))
    add("b > 1", b, ">", 1.0)
    add("b < 11/10", b, "<", 1.1)
    add("alpha' >= b(alpha0+1) - 1", p.alpha_prime, ">=", b * (p.alpha0 + 1) - 1)
    add("s >= b(1+beta)/((b+1)(2-b))", p.s, ">=",
        b * (1 + beta) / ((b + 1) * (2 - b)) if b < 2 else math.inf)
    add("2 alpha0 + beta + (1+beta)(b-1) alpha0/(b+1) <= 1",
        2 * p.alpha0 + beta + (1 + beta) * (b - 1) * p.alpha0 / (b + 1), "<=", 1.0)
    add("4(gamma_I + gamma_R) <= gamma_S", 4 * (p.gamma_I + p.gamma_R), "<=", p.gamma_S)
    add("gamma_S <= (b-1)/(b+1)", p.gamma_S, "<=", (b - 1) / (b + 1))
    add("3 b gamma <= min(gamma_I, gamma_R)", 3 * b * p.gamma, "<=",
        min(p.gamma_I, p.gamma_R))
    add("3 b gamma_S <= (1-(2b+1)beta)/(2(b+1))", 3 * b * p.gamma_S, "<=",
        (1 - (2 * b + 1) * beta) / (2 * (b + 1)))
    lo, hi = e_band(beta, b, p.gamma_S)
    add("b e >= lower band", b * p.e, ">=", b * lo)
    add("b e <= upper band", b * p.e, "<=", b * hi)
    add("alpha > 0", p.alpha, ">", 0.0)
    add("alpha < 1", p.alpha, "<", 1.0)
    add("Nstar gamma >= 3", p.Nstar * p.gamma, ">=", 3.0)
    add("Q >= N", p.Q, ">=", p.N)
    add("N >= Nstar^4", p.N, ">=", p.Nstar ** 4)

    gens = [derive_generation(p, q) for q in range(qmax + 1)]
    for g in gens:
        exact = g.lambda_real ** p.ratio_exponent
        mu, delta, kappa, _, _ = _scales(p, g.lambda_real)
        real_ratio = math.sqrt(delta) / (kappa * g.lambda_real)
        rep.ratio_checks.append(dict(
            q=g.q,
            rel_dev_real=abs(real_ratio - exact) / exact,
            rel_dev_ceiled=abs(g.ratio - g.lambda_q ** p.ratio_exponent)
            / g.lambda_q ** p.ratio_exponent,
            rel_dev_ceil_vs_real=abs(g.ratio - exact) / exact,
        ))

    for q in range(qmax):
        g, h = gens[q], gens[q + 1]
        lam1 = h.lambda_q
        sd1 = h.sqrt_delta
        tag = f"[q={q}]"
        add(f"{tag} delta_(q+1)^(1/2) ringLambda_q lambda_(q+1)^(2 gamma_S)"
            f" / (kappa_(q+1) lambda_(q+1)^2) <= 1",
            sd1 * g.ringLambda_q * lam1 ** (2 * p.gamma_S)
            / (h.kappa_q * lam1 ** 2), "<=", 1.0)
        cap = lam1 ** p.gamma_S
        denom = sd1 * g.ringLambda_q
        add(f"{tag} mu_(q+1) / (delta_(q+1)^(1/2) ringLambda_q) <= lambda_(q+1)^gamma_S",
            h.mu_q / denom, "<=", cap)
        add(f"{tag} eps_q kappa_(q+1) lambda_(q+1)^2 / (delta_(q+1)^(1/2) ringLambda_q)"
            f" <= lambda_(q+1)^gamma_S",
            g.eps_q * h.kappa_q * lam1 ** 2 / denom, "<=", cap)
        add(f"{tag} ringMu_q / (eps_q delta_(q+1)^(1/2) ringLambda_q) <= lambda_(q+1)^gamma_S",
            g.ringMu_q / (g.eps_q * denom), "<=", cap)
        add(f"{tag} kappa_(q+1) lambda_(q+1)^2 / (eps_q delta_(q+1)^(1/2) lambda_(q+1))"
            f" <= lambda_(q+1)^gamma_S",
            h.kappa_q * lam1 ** 2 / (g.eps_q * sd1 * lam1), "<=", cap)
        add(f"{tag} chain ringMu_(q+1) > delta_(q+1)^(1/2) lambda_(q+1)",
            h.ringMu_q, ">", sd1 * lam1)
        add(f"{tag} chain delta_(q+1)^(1/2) lambda_(q+1) > kappa_(q+1) lambda_(q+1)^2",
            sd1 * lam1, ">", h.kappa_q * lam1 ** 2)
        add(f"{tag} chain kappa_(q+1) lambda_(q+1)^2 > mu_(q+1)",
            h.kappa_q * lam1 ** 2, ">", h.mu_q)
        add(f"{tag} chain mu_(q+1) > ringMu_q", h.mu_q, ">", g.ringMu_q)
        add(f"{tag} chain ringMu_q > delta_q^(1/2) lambda_q",
            g.ringMu_q, ">", g.sqrt_delta * g.lambda_q)
    return rep
