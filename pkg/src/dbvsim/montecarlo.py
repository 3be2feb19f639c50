"""Monte Carlo estimation of acceptance rates with exact confidence intervals.

Trials are seeded individually from (master_seed, trial_index), so results
are reproducible, independent of worker count, and splittable across
processes without coordination.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from . import attacks
from .bounds import DbvSpec, exact_binomial_tail_lower, max_errors
from .channel import ChannelParams, bit_error_prob, snr_at_distance, transmit_power_for_claim
from .protocols import (
    ACC,
    Claim,
    PartyPlacement,
    ProtocolConfig,
    RetrievalCapError,
    Transcript,
    run_protocol,
)

__all__ = [
    "Scenario",
    "SCENARIO_KINDS",
    "TrialSummary",
    "BoundCheck",
    "clopper_pearson",
    "run_trial",
    "estimate_rates",
    "compare_to_bound",
    "exact_success_probability",
    "TRIAL_CSV_HEADER",
]

logger = logging.getLogger(__name__)

SCENARIO_KINDS = (
    "honest",
    "dfa",
    "mfa",
    "impersonation",
    "tfa-relay",
    "tfa-sampling",
    "tfa-general",
)


@dataclass(frozen=True)
class Scenario:
    """What to simulate: scenario kind, placements, and strategy knobs."""

    kind: str
    d_claim: float
    d_real: float
    intruder_d: Optional[float] = None
    mfa_strategy: str = "best-guess"
    tfa_strategy: Optional[attacks.RetrievalStrategy] = None
    index_choice: str = "first"
    leaked_sampler_key: bool = False
    leaked_mac_key: bool = False
    noiseless: bool = False

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not self.d_claim > 0 or not self.d_real > 0:
            raise ValueError("distances must be > 0")


def run_trial(
    scenario: Scenario,
    cfg: ProtocolConfig,
    ch: ChannelParams,
    rng: np.random.Generator,
    seed: Optional[int] = None,
) -> tuple[bool, bool, Optional[Transcript]]:
    """(accepted, blocked, transcript) for one protocol or attack run.

    ``blocked`` marks attacks stopped structurally by the retrieval audit;
    those never accept.
    """
    kind = scenario.kind
    try:
        if kind == "honest":
            t = run_protocol(
                cfg,
                Claim(scenario.d_claim),
                PartyPlacement(scenario.d_real),
                ch,
                rng,
                noiseless=scenario.noiseless,
                seed=seed,
            )
        elif kind == "dfa":
            t = attacks.attack_dfa(
                cfg, scenario.d_claim, scenario.d_real, ch, rng,
                noiseless=scenario.noiseless, seed=seed,
            )
        elif kind == "mfa":
            t = attacks.attack_mfa(
                cfg, scenario.d_real, scenario.d_claim, ch, rng,
                scenario.mfa_strategy,
                intruder_d=scenario.intruder_d,
                noiseless=scenario.noiseless, seed=seed,
            )
        elif kind == "impersonation":
            t = attacks.attack_impersonation(
                cfg, scenario.d_claim, ch, rng,
                adversary_d=scenario.intruder_d,
                leaked_sampler_key=scenario.leaked_sampler_key,
                leaked_mac_key=scenario.leaked_mac_key,
                noiseless=scenario.noiseless, seed=seed,
            )
        elif kind == "tfa-relay":
            t = attacks.attack_tfa_relay(
                cfg, scenario.d_claim, scenario.d_real, ch, rng,
                intruder_d=scenario.intruder_d,
                noiseless=scenario.noiseless, seed=seed,
            )
        elif kind == "tfa-sampling":
            t = attacks.attack_tfa_sampling(
                cfg, scenario.d_claim, scenario.d_real, ch, rng,
                index_choice=scenario.index_choice,
                noiseless=scenario.noiseless, seed=seed,
            )
        else:
            strategy = scenario.tfa_strategy or attacks.IndexSamplingStrategy(
                scenario.index_choice
            )
            t = attacks.attack_tfa_general(
                cfg, scenario.d_claim, scenario.d_real, ch, rng, strategy,
                noiseless=scenario.noiseless, seed=seed,
            )
    except RetrievalCapError:
        return False, True, None
    return t.verdict == ACC, False, t


@dataclass
class BoundCheck:
    """Consistency verdict between an estimated rate and its analytic bound."""

    passed: bool
    slack: float
    form: str  # "false-accept" or "false-reject"


@dataclass
class TrialSummary:
    """Aggregate of N independent trials of one scenario."""

    scenario: str
    protocol: str
    trials: int
    accepts: int
    blocked: int
    rate: float
    ci_low: float
    ci_high: float
    analytic_bound: Optional[float]
    bound_kind: str
    analytic_exact: Optional[float] = None
    bound_satisfied: Optional[bool] = None
    master_seed: Optional[int] = None

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "1",
            "scenario": self.scenario,
            "protocol": self.protocol,
            "trials": self.trials,
            "accepts": self.accepts,
            "blocked": self.blocked,
            "rate": self.rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "analytic_bound": self.analytic_bound,
            "bound_kind": self.bound_kind,
            "analytic_exact": self.analytic_exact,
            "bound_satisfied": self.bound_satisfied,
            "master_seed": self.master_seed,
        }

    def to_csv_row(self) -> list[str]:
        d = self.to_json_dict()
        del d["schema_version"]
        return ["" if d[k] is None else str(d[k]) for k in TRIAL_CSV_HEADER]


TRIAL_CSV_HEADER = [
    "scenario",
    "protocol",
    "trials",
    "accepts",
    "blocked",
    "rate",
    "ci_low",
    "ci_high",
    "analytic_bound",
    "bound_kind",
    "analytic_exact",
    "bound_satisfied",
    "master_seed",
]


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval; valid down to zero observed successes."""
    if not 0 <= successes <= trials or trials < 1:
        raise ValueError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = (
        1.0
        if successes == trials
        else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    )
    return lo, hi


def _trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(index,)))


def _run_range(
    scenario: Scenario,
    cfg: ProtocolConfig,
    ch: ChannelParams,
    master_seed: int,
    start: int,
    stop: int,
    collect: bool = False,
) -> tuple[int, int, list[dict]]:
    accepts = 0
    blocked = 0
    dumped: list[dict] = []
    for i in range(start, stop):
        acc, blk, t = run_trial(scenario, cfg, ch, _trial_rng(master_seed, i), seed=i)
        accepts += acc
        blocked += blk
        if collect and t is not None:
            d = t.to_json_dict()
            d["scenario"] = scenario.kind
            dumped.append(d)
        elif collect:
            dumped.append(
                {"scenario": scenario.kind, "seed": i, "verdict": "Rej", "blocked": True}
            )
    return accepts, blocked, dumped


def _chunk_worker(args) -> tuple[int, int, list[dict]]:
    return _run_range(*args)


def exact_success_probability(
    scenario: Scenario, cfg: ProtocolConfig, ch: ChannelParams
) -> Optional[float]:
    """Closed-form acceptance probability where one exists, as an oracle."""
    e = transmit_power_for_claim(scenario.d_claim, cfg.e0, ch)
    kind = scenario.kind
    if scenario.noiseless:
        return None
    if kind in ("honest", "dfa"):
        p = bit_error_prob(snr_at_distance(e, scenario.d_real, ch))
        return exact_binomial_tail_lower(cfg.k, cfg.beta, p)
    if kind == "tfa-relay":
        if cfg.protocol == "pi3":
            return 0.0
        if scenario.intruder_d is None:
            return 1.0
        p = bit_error_prob(snr_at_distance(e, scenario.intruder_d, ch))
        return exact_binomial_tail_lower(cfg.k, cfg.beta, p)
    if kind == "tfa-sampling" and cfg.protocol == "pi3":
        # Overlap between the sampled set and the intruder's set is
        # hypergeometric; outside the overlap each bit errs with p_b.
        brm = cfg.brm
        p_b = bit_error_prob(snr_at_distance(e, scenario.d_real, ch))
        overlap = stats.hypergeom(brm.n, brm.retrieval_cap, cfg.k)
        cut = max_errors(cfg.beta, cfg.k)
        total = 0.0
        for j in range(0, cfg.k + 1):
            w = overlap.pmf(j)
            if w == 0.0:
                continue
            unknown = cfg.k - j
            acc = 1.0 if unknown == 0 else float(stats.binom.cdf(cut, unknown, p_b))
            total += w * acc
        return total
    return None


def estimate_rates(
    scenario: Scenario,
    cfg: ProtocolConfig,
    spec: Optional[DbvSpec],
    ch: ChannelParams,
    trials: int,
    master_seed: int,
    *,
    jobs: int = 1,
    dump_path: Optional[str] = None,
) -> TrialSummary:
    """Run independent trials and summarize with a 95% Clopper-Pearson interval.

    Results depend only on (scenario, cfg, ch, trials, master_seed), never on
    ``jobs``.  When ``dump_path`` is given, per-trial transcripts are written
    as JSON lines in trial order (this path runs serially).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    bound_kind = "false-reject" if scenario.kind == "honest" else "false-accept"
    bound = None
    if spec is not None:
        bound = spec.eps_fr if bound_kind == "false-reject" else spec.eps_fa
        if trials < 10.0 / bound:
            logger.warning(
                "%d trials cannot resolve a rate near the bound %g (want >= %d)",
                trials,
                bound,
                math.ceil(10.0 / bound),
            )

    collect = dump_path is not None
    if jobs <= 1 or collect:
        accepts, blocked, dumped = _run_range(
            scenario, cfg, ch, master_seed, 0, trials, collect
        )
    else:
        bounds_ = np.linspace(0, trials, jobs + 1).astype(int)
        chunks = [
            (scenario, cfg, ch, master_seed, int(a), int(b), False)
            for a, b in zip(bounds_[:-1], bounds_[1:])
            if b > a
        ]
        accepts = blocked = 0
        dumped = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for acc, blk, _ in pool.map(_chunk_worker, chunks):
                accepts += acc
                blocked += blk

    if collect:
        with open(dump_path, "w") as fh:
            for d in dumped:
                fh.write(json.dumps(d, sort_keys=True) + "\n")

    rate = accepts / trials
    ci_low, ci_high = clopper_pearson(accepts, trials)
    summary = TrialSummary(
        scenario=scenario.kind,
        protocol=cfg.protocol,
        trials=trials,
        accepts=accepts,
        blocked=blocked,
        rate=rate,
        ci_low=ci_low,
        ci_high=ci_high,
        analytic_bound=bound,
        bound_kind=bound_kind,
        analytic_exact=exact_success_probability(scenario, cfg, ch),
        master_seed=master_seed,
    )
    if bound is not None:
        summary.bound_satisfied = compare_to_bound(summary).passed
    return summary


def compare_to_bound(summary: TrialSummary) -> BoundCheck:
    """PASS when the interval is consistent with the bound.

    Soundness (attack scenarios): the accept-rate CI must reach down to the
    bound, ci_low <= bound.  Completeness (honest): the reject-rate CI must
    reach down to the bound, 1 - ci_high <= bound.
    """
    if summary.analytic_bound is None:
        raise ValueError("summary has no analytic bound to compare against")
    b = summary.analytic_bound
    if summary.bound_kind == "false-reject":
        observed_low = 1.0 - summary.ci_high
    else:
        observed_low = summary.ci_low
    return BoundCheck(passed=observed_low <= b, slack=b - observed_low, form=summary.bound_kind)
