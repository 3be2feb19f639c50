"""Minimize challenge/source lengths over transmit power and threshold.

For every candidate reference power the inner problem
min_beta max{decreasing completeness term, increasing soundness term} is
solved exactly at the unique crossing of the two terms; the outer power
search walks a fixed logarithmic grid and refines the best cell by golden
section, so results are deterministic and reproducible bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .bounds import (
    BrmSpec,
    DbvSpec,
    InfeasibleError,
    challenge_length_brm_general,
    challenge_length_brm_sampling,
    challenge_length_dfa,
)
from .channel import ChannelParams, intended_blocked_ber, watts_to_dbm

__all__ = [
    "OptimalDfaConfig",
    "OptimalBrmConfig",
    "MaxLambdaResult",
    "BRM_MODES",
    "optimize_dfa",
    "optimize_brm",
    "max_feasible_lambda",
    "sweep_curves",
    "write_curves_csv",
    "CURVES_CSV_HEADER",
]

_LN2 = math.log(2.0)

#: Outer search grid: points on [span * e_max, e_max], logarithmically spaced.
E0_GRID_POINTS = 2000
E0_GRID_SPAN = 1e-6
#: Relative tolerance of the golden-section refinement on e0.
E0_REFINE_RTOL = 1e-6

BRM_MODES = ("general", "sampling")


@dataclass(frozen=True)
class OptimalDfaConfig:
    """Optimal challenge-response parameters for a distance-fraud target.

    For equal error budgets ``objective`` is the dimensionless minimized
    value with k_star = ceil(ln(1/eps) * objective); for unequal budgets it
    is the pre-ceiling challenge length itself.
    """

    e0_star: float
    beta_star: float
    k_star: int
    objective: float


@dataclass(frozen=True)
class OptimalBrmConfig:
    """Optimal bounded-retrieval parameters; n_star = ceil(k_star / lam)."""

    e0_star: float
    beta_star: float
    mu_star: float
    k_star: int
    n_star: int
    mode: str
    objective: float


@dataclass(frozen=True)
class MaxLambdaResult:
    """Largest feasible retrieval rate; feasible=False when no rate works at all."""

    lambda_star: float
    feasible: bool


def _completeness_term(p_i: float) -> Callable[[float], float]:
    return lambda beta: (p_i + beta) / (beta - p_i) ** 2


def _crossing(
    f_dec: Callable[[float], float],
    f_inc: Callable[[float], float],
    lo: float,
    hi: float,
    w_dec: float,
    w_inc: float,
) -> tuple[float, float]:
    """Crossing point of w_dec*f_dec (decreasing) and w_inc*f_inc (increasing) on (lo, hi).

    Returns (beta, max of the two weighted terms there); (nan, inf) when the
    bracket degenerates numerically.
    """
    width = hi - lo
    if not width > 0:
        return math.nan, math.inf
    # Keep the bracket strictly inside (lo, hi) even when the interval is a
    # few ulps wide.
    a = max(lo + width * 1e-12, math.nextafter(lo, hi))
    b = min(hi - width * 1e-12, math.nextafter(hi, lo))
    if not a < b:
        return math.nan, math.inf

    log_ratio = math.log(w_dec) - math.log(w_inc)

    def g(beta: float) -> float:
        return log_ratio + math.log(f_dec(beta)) - math.log(f_inc(beta))

    try:
        ga, gb = g(a), g(b)
        if not (ga > 0 > gb):
            # One term dominates over the whole bracket: the max is minimized
            # at the edge where the dominating term is smallest.
            if ga <= 0:
                beta = a
            else:
                beta = b
        else:
            beta = brentq(g, a, b, xtol=1e-300, rtol=8.9e-16)
    except (ValueError, OverflowError, ZeroDivisionError):
        return math.nan, math.inf
    value = max(w_dec * f_dec(beta), w_inc * f_inc(beta))
    if not math.isfinite(value):
        return math.nan, math.inf
    return beta, value


def _dfa_inner(p_i: float, p_b: float, w_fr: float, w_fa: float) -> tuple[float, float]:
    if not 0 <= p_i < p_b:
        return math.nan, math.inf
    return _crossing(
        _completeness_term(p_i),
        lambda beta: 2.0 * p_b / (p_b - beta) ** 2,
        p_i,
        p_b,
        w_fr,
        w_fa,
    )


def _brm_inner(
    p_i: float,
    p_b: float,
    mode: str,
    lam: float,
    theta: float,
    w_fr: float,
    w_fa: float,
) -> tuple[float, float]:
    if not 0 <= p_i < p_b:
        return math.nan, math.inf
    if mode == "general":
        beta_hi = p_b - math.sqrt(2.0 * _LN2 * p_b * lam) - theta

        def f_inc(beta: float) -> float:
            return 2.0 * p_b * lam / ((p_b - beta - theta) ** 2 - 2.0 * _LN2 * p_b * lam)

    else:
        pb_eff = (1.0 - lam) * p_b
        beta_hi = pb_eff - theta

        def f_inc(beta: float) -> float:
            return 2.0 * pb_eff / (pb_eff - beta - theta) ** 2

    if not beta_hi > p_i:
        return math.nan, math.inf
    return _crossing(_completeness_term(p_i), f_inc, p_i, beta_hi, w_fr, w_fa)


def _e0_grid(ch: ChannelParams, points: int) -> np.ndarray:
    return np.geomspace(E0_GRID_SPAN * ch.e_max, ch.e_max, points)


def _golden_refine(
    value: Callable[[float], float], lo: float, hi: float
) -> tuple[float, float]:
    """Golden-section minimum of value on [lo, hi] in log space, to E0_REFINE_RTOL."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = value(math.exp(c)), value(math.exp(d))
    while (b - a) > E0_REFINE_RTOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = value(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = value(math.exp(d))
    x = math.exp((a + b) / 2.0)
    return x, value(x)


def _outer_min(
    value: Callable[[float], float], ch: ChannelParams, grid_points: int
) -> tuple[float, float]:
    grid = _e0_grid(ch, grid_points)
    vals = np.array([value(e0) for e0 in grid])
    vals = np.where(np.isnan(vals), np.inf, vals)
    if not np.isfinite(vals).any():
        raise InfeasibleError(
            "infeasible-for-all-powers",
            f"no reference power in (0, {ch.e_max}] W admits a threshold",
        )
    i = int(np.argmin(vals))
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    e0, v = _golden_refine(value, lo, hi)
    # Keep the grid winner if refinement drifted onto a worse point.
    if vals[i] < v:
        return float(grid[i]), float(vals[i])
    return float(e0), float(v)


def optimize_dfa(
    spec: DbvSpec, ch: ChannelParams, *, grid_points: int = E0_GRID_POINTS
) -> OptimalDfaConfig:
    """Minimize the challenge length over reference power and threshold.

    With eps_fa == eps_fr the dimensionless objective is independent of eps,
    so the optimal power is identical across error budgets; otherwise the two
    log weights enter the inner crossing directly.
    """
    symmetric = spec.eps_fa == spec.eps_fr
    w_fr = 1.0 if symmetric else math.log(1.0 / spec.eps_fr)
    w_fa = 1.0 if symmetric else math.log(1.0 / spec.eps_fa)

    def value(e0: float) -> float:
        ber = intended_blocked_ber(e0, spec.psi, ch)
        return _dfa_inner(ber.p_i, ber.p_b, w_fr, w_fa)[1]

    e0_star, obj = _outer_min(value, ch, grid_points)
    ber = intended_blocked_ber(e0_star, spec.psi, ch)
    beta_star, _ = _dfa_inner(ber.p_i, ber.p_b, w_fr, w_fa)
    k_star = challenge_length_dfa(ber, beta_star, spec)
    return OptimalDfaConfig(e0_star=e0_star, beta_star=beta_star, k_star=k_star, objective=obj)


def optimize_brm(
    spec: DbvSpec,
    ch: ChannelParams,
    lam: float,
    mode: str,
    theta: float = 1e-4,
    gamma: Optional[float] = None,
    *,
    grid_points: int = E0_GRID_POINTS,
) -> OptimalBrmConfig:
    """Minimize the source length for the bounded-retrieval protocol.

    gamma defaults to eps_fa/100; theta defaults to a negligible 1e-4.
    Raises InfeasibleError when no power at or below e_max satisfies the
    mode's feasibility condition.
    """
    if mode not in BRM_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {BRM_MODES}")
    if gamma is None:
        gamma = spec.eps_fa / 100.0
    brm = BrmSpec(lam=lam, theta=theta, gamma=gamma)
    if not gamma < spec.eps_fa:
        raise InfeasibleError(
            "sampler-failure-too-large",
            f"requires gamma < eps_fa, got gamma={gamma}, eps_fa={spec.eps_fa}",
        )
    w_fr = math.log(1.0 / spec.eps_fr)
    w_fa = math.log(1.0 / (spec.eps_fa - gamma))

    def value(e0: float) -> float:
        ber = intended_blocked_ber(e0, spec.psi, ch)
        return _brm_inner(ber.p_i, ber.p_b, mode, lam, theta, w_fr, w_fa)[1]

    try:
        e0_star, obj = _outer_min(value, ch, grid_points)
    except InfeasibleError:
        condition = (
            "general-intruder-infeasible" if mode == "general" else "sampling-intruder-infeasible"
        )
        detail = (
            "p_i < p_b - sqrt(2*ln2*p_b*lambda)"
            if mode == "general"
            else "p_i < (1-lambda)*p_b"
        )
        raise InfeasibleError(
            condition, f"no power <= e_max satisfies {detail} with lambda={lam}"
        ) from None
    ber = intended_blocked_ber(e0_star, spec.psi, ch)
    beta_star, _ = _brm_inner(ber.p_i, ber.p_b, mode, lam, theta, w_fr, w_fa)
    mu_star = beta_star + theta
    length = challenge_length_brm_general if mode == "general" else challenge_length_brm_sampling
    k_star, n_star = length(ber, beta_star, mu_star, brm, spec)
    return OptimalBrmConfig(
        e0_star=e0_star,
        beta_star=beta_star,
        mu_star=mu_star,
        k_star=k_star,
        n_star=n_star,
        mode=mode,
        objective=obj,
    )


def max_feasible_lambda(
    psi: float,
    ch: ChannelParams,
    mode: str,
    *,
    tol: float = 1e-4,
    grid_points: int = E0_GRID_POINTS,
) -> MaxLambdaResult:
    """Largest retrieval rate for which some admissible power and radius exist.

    Uses the existence condition on the error probabilities themselves
    (p_i < p_b - sqrt(2*ln2*p_b*lambda), resp. p_i < (1-lambda)*p_b), i.e.
    the theta -> 0 limit; bisected to ``tol``.
    """
    if mode not in BRM_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {BRM_MODES}")
    bers = [intended_blocked_ber(e0, psi, ch) for e0 in _e0_grid(ch, grid_points)]
    p_i = np.array([b.p_i for b in bers])
    p_b = np.array([b.p_b for b in bers])

    def feasible(lam: float) -> bool:
        if mode == "general":
            margin = p_b - np.sqrt(2.0 * _LN2 * p_b * lam) - p_i
        else:
            margin = (1.0 - lam) * p_b - p_i
        return bool((margin > 0).any())

    if not feasible(0.0):
        return MaxLambdaResult(0.0, False)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return MaxLambdaResult(lo, True)


CURVES_CSV_HEADER = [
    "psi",
    "eps_or_lambda",
    "e0_star_dbm",
    "beta_star",
    "k_star_or_n_star",
    "feasible",
]


def _sweep_point(args) -> dict:
    mode, psi, eps_or_lambda, eps_fa, eps_fr, ch, theta, gamma = args
    row = {"psi": psi, "eps_or_lambda": eps_or_lambda, "feasible": True}
    try:
        if mode == "dfa":
            spec = DbvSpec(psi=psi, eps_fa=eps_or_lambda, eps_fr=eps_or_lambda)
            opt = optimize_dfa(spec, ch)
            row.update(
                e0_star_w=opt.e0_star,
                e0_star_dbm=watts_to_dbm(opt.e0_star),
                beta_star=opt.beta_star,
                k_star_or_n_star=opt.k_star,
            )
        else:
            spec = DbvSpec(psi=psi, eps_fa=eps_fa, eps_fr=eps_fr)
            opt = optimize_brm(spec, ch, eps_or_lambda, mode, theta=theta, gamma=gamma)
            row.update(
                e0_star_w=opt.e0_star,
                e0_star_dbm=watts_to_dbm(opt.e0_star),
                beta_star=opt.beta_star,
                k_star_or_n_star=opt.n_star,
            )
    except InfeasibleError as err:
        row.update(
            feasible=False,
            condition=err.condition,
            e0_star_w=None,
            e0_star_dbm=None,
            beta_star=None,
            k_star_or_n_star=None,
        )
    return row


def sweep_curves(
    template: DbvSpec,
    ch: ChannelParams,
    mode: str,
    psi_values,
    *,
    eps_values=None,
    lambda_values=None,
    theta: float = 1e-4,
    gamma: Optional[float] = None,
    jobs: int = 1,
) -> list[dict]:
    """Grid of optimal parameters, one row per (psi, eps-or-lambda) point.

    dfa mode sweeps the error budget (eps_fa = eps_fr = eps); brm modes sweep
    the retrieval rate at the template's error budgets.  Infeasible points
    are emitted with feasible=False, never dropped.  Row order is the grid
    order regardless of how the points are computed.
    """
    if mode == "dfa":
        if not eps_values:
            raise ValueError("dfa sweep needs eps_values")
        inner = list(eps_values)
    elif mode in BRM_MODES:
        if not lambda_values:
            raise ValueError("brm sweep needs lambda_values")
        inner = list(lambda_values)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    psi_values = list(psi_values)
    if not psi_values or not inner:
        raise ValueError("sweep ranges must be non-empty")

    points = [
        (mode, psi, v, template.eps_fa, template.eps_fr, ch, theta, gamma)
        for psi in psi_values
        for v in inner
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, points))
    return [_sweep_point(p) for p in points]


def write_curves_csv(rows: list[dict], path: str) -> None:
    """CSV with the fixed sweep header; numbers at 9 significant digits."""
    import csv

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return f"{v:.9g}"
        return str(v)

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVES_CSV_HEADER)
        for row in rows:
            w.writerow([fmt(row.get(col)) for col in CURVES_CSV_HEADER])
