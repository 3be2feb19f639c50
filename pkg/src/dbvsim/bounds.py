"""Analytical security bounds and challenge-length requirements.

Chernoff tail bounds drive the challenge lengths; the exact binomial tails
they dominate are kept alongside as the ground-truth oracle.  The
guessing-security arithmetic (leakage, sampling) supports the
bounded-retrieval protocol analysis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import BerPair

__all__ = [
    "DbvSpec",
    "CloseSecurity",
    "BrmSpec",
    "InfeasibleError",
    "max_errors",
    "chernoff_false_reject",
    "chernoff_false_accept",
    "exact_binomial_tail_upper",
    "exact_binomial_tail_lower",
    "challenge_length_dfa",
    "challenge_length_brm_general",
    "challenge_length_brm_sampling",
    "leakage_degradation",
    "sampler_close_security",
    "brm_exponent_general",
    "brm_exponent_sampling",
]

_LN2 = math.log(2.0)

#: Challenge lengths above this are reported as infeasible rather than returned.
DEFAULT_K_CAP = 10**15


class InfeasibleError(ValueError):
    """A parameter choice violates a feasibility condition.

    ``condition`` names the violated condition so callers (and the CLI) can
    report it instead of a sentinel number.
    """

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        super().__init__(condition if not detail else f"{condition}: {detail}")


@dataclass(frozen=True)
class DbvSpec:
    """Security target: separation ratio and the two error budgets."""

    psi: float
    eps_fa: float
    eps_fr: float

    def __post_init__(self) -> None:
        if not self.psi > 1:
            raise ValueError(f"psi must be > 1, got {self.psi}")
        if not 0 < self.eps_fa < 1:
            raise ValueError(f"eps_fa must be in (0,1), got {self.eps_fa}")
        if not 0 < self.eps_fr < 1:
            raise ValueError(f"eps_fr must be in (0,1), got {self.eps_fr}")


@dataclass(frozen=True)
class CloseSecurity:
    """Guessing security of an n-bit string.

    No single guess lands within Hamming radius mu*n of the string except
    with probability 2**(-delta*n).  ``delta`` may be non-positive, in which
    case the statement is vacuous; callers check positivity.
    """

    mu: float
    delta: float
    n: int

    def __post_init__(self) -> None:
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mu must be in [0,1], got {self.mu}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    @property
    def guess_bound(self) -> float:
        """The probability bound 2**(-delta*n)."""
        return 2.0 ** (-self.delta * self.n)


@dataclass(frozen=True)
class BrmSpec:
    """Bounded-retrieval setting: retrieval rate plus sampler slack/failure.

    The effective closeness radius used by the length bounds is
    mu = beta + theta; it is passed to the bound functions explicitly
    alongside the threshold beta and checked there.
    """

    lam: float
    theta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.lam < 1:
            raise ValueError(f"retrieval rate must be in (0,1), got {self.lam}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0,1), got {self.gamma}")


def max_errors(beta: float | Fraction, k: int) -> int:
    """Largest error count accepted by the threshold test d_H <= beta*k.

    Exact for Fraction thresholds; floats get a 1e-12 absolute guard so that
    a beta*k that is an integer up to rounding is treated inclusively.
    """
    if isinstance(beta, Fraction):
        return min(k, int(beta * k))
    return min(k, int(math.floor(beta * k + 1e-12)))


def chernoff_false_reject(k: int, beta: float, p_i: float) -> float:
    """Bound exp(-(beta-p_i)**2 * k / (beta+p_i)) on Pr(Bin(k, p_i) > beta*k)."""
    if not p_i < beta:
        raise InfeasibleError(
            "infeasible-threshold", f"requires p_i < beta, got p_i={p_i}, beta={beta}"
        )
    return math.exp(-((beta - p_i) ** 2) * k / (beta + p_i))


def chernoff_false_accept(k: int, beta: float, p_b: float) -> float:
    """Bound exp(-(p_b-beta)**2 * k / (2*p_b)) on Pr(Bin(k, p_b) <= beta*k)."""
    if not beta < p_b:
        raise InfeasibleError(
            "infeasible-threshold", f"requires beta < p_b, got beta={beta}, p_b={p_b}"
        )
    return math.exp(-((p_b - beta) ** 2) * k / (2.0 * p_b))


def _binomial_tails(k: int, beta: float | Fraction, p: float) -> tuple[float, float]:
    """(lower, upper) = (Pr(Bin(k,p) <= c), Pr(Bin(k,p) > c)) at c = max_errors(beta, k).

    The numerically smaller side is summed directly in log space (log-gamma
    binomial coefficients, compensated summation in ascending order); the
    other side is its exact complement, so lower + upper == 1 always.
    """
    if k < 1 or k != int(k):
        raise ValueError(f"k must be a positive integer, got {k}")
    if not 0 <= p <= 1:
        raise ValueError(f"p must be in [0,1], got {p}")
    k = int(k)
    cut = max_errors(beta, k)
    if cut < 0:
        return 0.0, 1.0
    if cut >= k:
        return 1.0, 0.0
    if p == 0.0:
        return 1.0, 0.0
    if p == 1.0:
        return 0.0, 1.0

    def _log_pmf(i: np.ndarray) -> np.ndarray:
        lg = math.lgamma(k + 1)
        return (
            lg
            - np.array([math.lgamma(v + 1) for v in i])
            - np.array([math.lgamma(k - v + 1) for v in i])
            + i * math.log(p)
            + (k - i) * math.log1p(-p)
        )

    lower_is_small = (cut + 0.5) < k * p
    if lower_is_small:
        idx = np.arange(0, cut + 1, dtype=np.float64)
    else:
        idx = np.arange(cut + 1, k + 1, dtype=np.float64)
    logs = _log_pmf(idx)
    m = float(np.max(logs))
    small = math.exp(m) * math.fsum(sorted(np.exp(logs - m)))
    small = min(small, 1.0)
    if lower_is_small:
        return small, 1.0 - small
    return 1.0 - small, small


def exact_binomial_tail_upper(k: int, beta: float | Fraction, p: float) -> float:
    """Pr(Bin(k, p) > beta*k), the exact false-reject probability at error rate p."""
    return _binomial_tails(k, beta, p)[1]


def exact_binomial_tail_lower(k: int, beta: float | Fraction, p: float) -> float:
    """Pr(Bin(k, p) <= beta*k), the exact false-accept probability at error rate p."""
    return _binomial_tails(k, beta, p)[0]


def _ceil_checked(value: float, k_cap: int) -> int:
    if not math.isfinite(value):
        raise InfeasibleError("challenge-length-cap", "required length diverges")
    k = max(1, math.ceil(value))
    if k > k_cap:
        raise InfeasibleError(
            "challenge-length-cap", f"required length {k} exceeds cap {k_cap}"
        )
    return k


def challenge_length_dfa(
    ber: BerPair, beta: float, spec: DbvSpec, *, k_cap: int = DEFAULT_K_CAP
) -> int:
    """Smallest k with both Chernoff bounds under the targets at threshold beta.

    k = ceil(max{(p_i+beta)*ln(1/eps_fr)/(beta-p_i)**2,
                 2*p_b*ln(1/eps_fa)/(p_b-beta)**2}).
    Requires p_i < beta < p_b strictly (either equality makes a denominator
    vanish).
    """
    p_i, p_b = ber.p_i, ber.p_b
    if not p_i < beta:
        raise InfeasibleError(
            "infeasible-threshold", f"requires p_i < beta, got p_i={p_i}, beta={beta}"
        )
    if not beta < p_b:
        raise InfeasibleError(
            "infeasible-threshold", f"requires beta < p_b, got beta={beta}, p_b={p_b}"
        )
    t_fr = (p_i + beta) * math.log(1.0 / spec.eps_fr) / (beta - p_i) ** 2
    t_fa = 2.0 * p_b * math.log(1.0 / spec.eps_fa) / (p_b - beta) ** 2
    return _ceil_checked(max(t_fr, t_fa), k_cap)


def _check_brm_common(ber: BerPair, beta: float, mu: float, brm: BrmSpec, spec: DbvSpec) -> None:
    if not ber.p_i < beta:
        raise InfeasibleError(
            "infeasible-threshold",
            f"requires p_i < beta, got p_i={ber.p_i}, beta={beta}",
        )
    if abs(mu - (beta + brm.theta)) > 1e-12 * max(1.0, abs(mu)):
        raise ValueError(f"mu must equal beta + theta, got mu={mu}, beta+theta={beta + brm.theta}")
    if not brm.gamma < spec.eps_fa:
        raise InfeasibleError(
            "sampler-failure-too-large",
            f"requires gamma < eps_fa, got gamma={brm.gamma}, eps_fa={spec.eps_fa}",
        )


def challenge_length_brm_general(
    ber: BerPair,
    beta: float,
    mu: float,
    brm: BrmSpec,
    spec: DbvSpec,
    *,
    k_cap: int = DEFAULT_K_CAP,
) -> tuple[int, int]:
    """(k, n) for the bounded-retrieval protocol against arbitrary retrieval functions.

    k = ceil(max{(p_i+beta)*ln(1/eps_fr)/(beta-p_i)**2,
                 2*p_b*lam*ln(1/(eps_fa-gamma)) / ((p_b-mu)**2 - 2*ln2*p_b*lam)}),
    n = ceil(k/lam).  Feasible only when mu < p_b - sqrt(2*ln2*p_b*lam).
    """
    _check_brm_common(ber, beta, mu, brm, spec)
    p_i, p_b = ber.p_i, ber.p_b
    denom = (p_b - mu) ** 2 - 2.0 * _LN2 * p_b * brm.lam
    if mu >= p_b or denom <= 0:
        raise InfeasibleError(
            "general-intruder-infeasible",
            f"requires mu < p_b - sqrt(2*ln2*p_b*lambda), got mu={mu}, "
            f"p_b={p_b}, lambda={brm.lam}",
        )
    t_fr = (p_i + beta) * math.log(1.0 / spec.eps_fr) / (beta - p_i) ** 2
    t_fa = 2.0 * p_b * brm.lam * math.log(1.0 / (spec.eps_fa - brm.gamma)) / denom
    k = _ceil_checked(max(t_fr, t_fa), k_cap)
    return k, math.ceil(k / brm.lam)


def challenge_length_brm_sampling(
    ber: BerPair,
    beta: float,
    mu: float,
    brm: BrmSpec,
    spec: DbvSpec,
    *,
    k_cap: int = DEFAULT_K_CAP,
) -> tuple[int, int]:
    """(k, n) for the bounded-retrieval protocol against position-sampling intruders.

    k = ceil(max{(p_i+beta)*ln(1/eps_fr)/(beta-p_i)**2,
                 2*(1-lam)*p_b*ln(1/(eps_fa-gamma)) / ((1-lam)*p_b - mu)**2}),
    n = ceil(k/lam).  Feasible only when mu < (1-lam)*p_b.
    """
    _check_brm_common(ber, beta, mu, brm, spec)
    p_i, p_b = ber.p_i, ber.p_b
    pb_eff = (1.0 - brm.lam) * p_b
    if not mu < pb_eff:
        raise InfeasibleError(
            "sampling-intruder-infeasible",
            f"requires mu < (1-lambda)*p_b, got mu={mu}, (1-lambda)*p_b={pb_eff}",
        )
    t_fr = (p_i + beta) * math.log(1.0 / spec.eps_fr) / (beta - p_i) ** 2
    t_fa = 2.0 * pb_eff * math.log(1.0 / (spec.eps_fa - brm.gamma)) / (pb_eff - mu) ** 2
    k = _ceil_checked(max(t_fr, t_fa), k_cap)
    return k, math.ceil(k / brm.lam)


def leakage_degradation(cs: CloseSecurity, leak_log2: float) -> CloseSecurity:
    """Security exponent after leaking a variable with support size 2**leak_log2.

    delta drops by leak_log2/n; mu and n are unchanged.  The result may have
    non-positive delta, which the caller must check before relying on it.
    """
    if leak_log2 < 0:
        raise ValueError(f"leak_log2 must be >= 0, got {leak_log2}")
    return CloseSecurity(cs.mu, cs.delta - leak_log2 / cs.n, cs.n)


def sampler_close_security(
    cs: CloseSecurity, k: int, theta: float, gamma: float
) -> CloseSecurity:
    """Guessing security of k positions drawn by a (mu, theta, gamma) sampler.

    The sampled string is (mu-theta, delta')-secure with
    2**(-delta'*k) = gamma + 2**(-delta*n), i.e.
    delta' = -log2(gamma + 2**(-delta*n)) / k.
    """
    if theta > cs.mu:
        raise ValueError(f"theta must be <= mu, got theta={theta}, mu={cs.mu}")
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must be in [0,1), got {gamma}")
    total = gamma + cs.guess_bound
    if total >= 1:
        raise InfeasibleError(
            "no-security-remains",
            f"gamma + 2**(-delta*n) = {total} >= 1",
        )
    delta_p = math.inf if total == 0.0 else -math.log2(total) / k
    return CloseSecurity(cs.mu - theta, delta_p, k)


def brm_exponent_general(p_b: float, mu: float, lam: float) -> float:
    """Security exponent (p_b-mu)**2/(2*ln2*p_b) - lam after a lam*n-bit arbitrary leak."""
    if not 0 <= mu < p_b:
        raise InfeasibleError(
            "general-intruder-infeasible", f"requires mu < p_b, got mu={mu}, p_b={p_b}"
        )
    delta1 = (p_b - mu) ** 2 / (2.0 * _LN2 * p_b)
    delta2 = delta1 - lam
    if delta2 <= 0:
        warnings.warn(
            f"non-positive security exponent {delta2}: retrieval rate {lam} "
            "leaks more than the source hides",
            RuntimeWarning,
            stacklevel=2,
        )
    return delta2


def brm_exponent_sampling(p_b: float, mu: float, lam: float) -> float:
    """Security exponent ((1-lam)*p_b - mu)**2 / (2*ln2*(1-lam)*p_b) under index sampling."""
    pb_eff = (1.0 - lam) * p_b
    if not 0 <= mu < pb_eff:
        raise InfeasibleError(
            "sampling-intruder-infeasible",
            f"requires mu < (1-lambda)*p_b, got mu={mu}, (1-lambda)*p_b={pb_eff}",
        )
    return (pb_eff - mu) ** 2 / (2.0 * _LN2 * pb_eff)
