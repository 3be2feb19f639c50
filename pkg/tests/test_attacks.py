import math

import numpy as np
import pytest

from dbvsim.attacks import (
    BlockMajorityStrategy,
    IndexSamplingStrategy,
    ParitySketchStrategy,
    attack_dfa,
    attack_impersonation,
    attack_mfa,
    attack_tfa_general,
    attack_tfa_relay,
    attack_tfa_sampling,
    default_strategy_library,
)
from dbvsim.bounds import exact_binomial_tail_lower
from dbvsim.channel import DEFAULT_CHANNEL, bit_error_prob, snr_at_distance, transmit_power_for_claim
from dbvsim.protocols import ACC, BrmParams, ProtocolConfig, RetrievalCapError

CH = DEFAULT_CHANNEL
PI1 = ProtocolConfig("pi1", e0=2000.0, k=150, beta=0.1)
PI2 = ProtocolConfig("pi2", e0=2000.0, k=150, beta=0.1)
PI2_S8 = ProtocolConfig("pi2", e0=2000.0, k=150, beta=0.1, mac_bits=8)


def pi3_config(lam=0.3, k=120, beta=0.1, mac_bits=64):
    n = math.ceil(k / lam)
    return ProtocolConfig("pi3", e0=2000.0, k=k, beta=beta, mac_bits=mac_bits,
                          brm=BrmParams(lam=lam, n=n))


def rate(fn, trials, seed0=0):
    hits = 0
    for i in range(trials):
        t = fn(np.random.default_rng((seed0, i)))
        hits += t.verdict == ACC
    return hits / trials


class TestDfa:
    def test_noiseless_always_succeeds(self):
        # without noise there is nothing to distinguish distances
        for i in range(10):
            t = attack_dfa(PI1, 1e4, 9e4, CH, np.random.default_rng(i), noiseless=True)
            assert t.verdict == ACC

    def test_success_matches_binomial_tail(self):
        d_c, d_r = 4e4, 6e4
        e = transmit_power_for_claim(d_c, PI1.e0, CH)
        p_b = bit_error_prob(snr_at_distance(e, d_r, CH))
        expected = exact_binomial_tail_lower(PI1.k, PI1.beta, p_b)
        assert 0.01 < expected < 0.9  # test is informative
        trials = 4000
        got = rate(lambda r: attack_dfa(PI1, d_c, d_r, CH, r), trials, seed0=1)
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert abs(got - expected) < 3.5 * sd

    def test_monotone_in_distance(self):
        d_c = 4e4
        rates = [
            rate(lambda r, d=d: attack_dfa(PI1, d_c, d, CH, r), 1500, seed0=2)
            for d in (5.2e4, 6.4e4, 8e4)
        ]
        assert rates[0] > rates[1] > rates[2]

    def test_scenario_label(self):
        t = attack_dfa(PI1, 1e4, 3e4, CH, np.random.default_rng(3))
        assert t.scenario == "dfa"


class TestMfa:
    def test_replay_vs_pi2_never_succeeds(self):
        # the prover's tag covers its honest claim, not the forged one
        for i in range(200):
            t = attack_mfa(PI2, 8e4, 4e4, CH, np.random.default_rng(i), "replay")
            assert t.verdict != ACC
            assert t.mac_ok is False

    def test_best_guess_vs_pi1_succeeds(self):
        # no authentication: an error-free intruder answers perfectly
        for i in range(50):
            t = attack_mfa(PI1, 8e4, 4e4, CH, np.random.default_rng(i), "best-guess")
            assert t.verdict == ACC

    def test_replay_vs_pi1_is_binomial(self):
        honest_d_r, forged = 6e4, 4e4
        e = transmit_power_for_claim(forged, PI1.e0, CH)
        p = bit_error_prob(snr_at_distance(e, honest_d_r, CH))
        expected = exact_binomial_tail_lower(PI1.k, PI1.beta, p)
        trials = 3000
        got = rate(
            lambda r: attack_mfa(PI1, honest_d_r, forged, CH, r, "replay"), trials, seed0=4
        )
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert abs(got - expected) < 3.5 * sd

    def test_random_tag_vs_pi2_success_near_two_to_minus_s(self):
        trials = 4000
        got = rate(
            lambda r: attack_mfa(PI2_S8, 8e4, 4e4, CH, r, "best-guess"), trials, seed0=5
        )
        expected = 1 / 256  # threshold passes (error-free intruder), tag is a guess
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert abs(got - expected) < 4 * sd

    def test_mfa_success_bounded_by_mac_plus_tail(self):
        trials = 4000
        e = transmit_power_for_claim(4e4, PI2_S8.e0, CH)
        p = bit_error_prob(snr_at_distance(e, 8e4, CH))
        tail = exact_binomial_tail_lower(PI2_S8.k, PI2_S8.beta, p)
        from dbvsim.primitives import mac_forgery_bound

        eps_mac = mac_forgery_bound(PI2_S8.k + 64, 8)
        for strategy in ("replay", "random-tag", "best-guess"):
            got = rate(
                lambda r, s=strategy: attack_mfa(PI2_S8, 8e4, 4e4, CH, r, s),
                trials,
                seed0=6,
            )
            bound = eps_mac + tail
            assert got <= bound + 4 * math.sqrt(max(bound * (1 - bound), 1e-9) / trials)


class TestImpersonation:
    def test_vs_pi1_reduces_to_dfa(self):
        d_c, d_r = 4e4, 6e4
        e = transmit_power_for_claim(d_c, PI1.e0, CH)
        p = bit_error_prob(snr_at_distance(e, d_r, CH))
        expected = exact_binomial_tail_lower(PI1.k, PI1.beta, p)
        trials = 3000
        got = rate(
            lambda r: attack_impersonation(PI1, d_c, CH, r, adversary_d=d_r),
            trials,
            seed0=7,
        )
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert abs(got - expected) < 3.5 * sd

    def test_vs_pi2_blocked_by_mac(self):
        trials = 4000
        got = rate(lambda r: attack_impersonation(PI2_S8, 4e4, CH, r), trials, seed0=8)
        expected = 1 / 256
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert abs(got - expected) < 4 * sd

    def test_vs_pi3_with_leaked_sampler_key_still_blocked_by_mac(self):
        cfg = pi3_config(mac_bits=8)
        trials = 3000
        got = rate(
            lambda r: attack_impersonation(cfg, 4e4, CH, r, leaked_sampler_key=True),
            trials,
            seed0=9,
        )
        expected = 1 / 256
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert abs(got - expected) < 4 * sd

    def test_vs_pi3_without_sampler_key_threshold_blocks_too(self):
        cfg = pi3_config()
        for i in range(100):
            t = attack_impersonation(cfg, 4e4, CH, np.random.default_rng((10, i)))
            assert t.verdict != ACC


class TestRelay:
    def test_vs_pi2_error_free_always_succeeds(self):
        for i in range(200):
            t = attack_tfa_relay(PI2, 4e4, 9e4, CH, np.random.default_rng(i))
            assert t.verdict == ACC

    def test_vs_pi1_same(self):
        for i in range(100):
            t = attack_tfa_relay(PI1, 4e4, 9e4, CH, np.random.default_rng(i))
            assert t.verdict == ACC

    def test_matches_honest_at_zero_distance(self):
        # relay success equals honest acceptance next to the verifier
        from dbvsim.protocols import Claim, PartyPlacement, run_pi2

        trials = 500
        relay = rate(
            lambda r: attack_tfa_relay(PI2, 4e4, 9e4, CH, r, intruder_d=1.0),
            trials, seed0=11,
        )
        honest = sum(
            run_pi2(PI2, Claim(4e4), PartyPlacement(1.0), CH,
                    np.random.default_rng((11, 5000 + i))).verdict == ACC
            for i in range(trials)
        ) / trials
        pooled = (relay + honest) / 2
        sd = math.sqrt(max(2 * pooled * (1 - pooled) / trials, 1e-12))
        assert abs(relay - honest) <= 4 * sd + 1e-12

    def test_vs_pi3_structurally_blocked(self):
        cfg = pi3_config()
        for i in range(50):
            with pytest.raises(RetrievalCapError) as e:
                attack_tfa_relay(cfg, 4e4, 9e4, CH, np.random.default_rng((12, i)))
            assert e.value.party == "intruder"

    def test_vs_pi3_blocked_even_at_high_rate(self):
        cfg = pi3_config(lam=0.9, k=90)
        with pytest.raises(RetrievalCapError):
            attack_tfa_relay(cfg, 4e4, 9e4, CH, np.random.default_rng(13))


class TestTfaSampling:
    CFG = pi3_config(lam=0.4, k=100)

    def test_expected_errors_scale_with_unknown_fraction(self):
        d_c, d_r = 4e4, 8e4
        e = transmit_power_for_claim(d_c, self.CFG.e0, CH)
        p_b = bit_error_prob(snr_at_distance(e, d_r, CH))
        lam = self.CFG.brm.lam
        trials = 800
        hams = []
        for i in range(trials):
            t = attack_tfa_sampling(self.CFG, d_c, d_r, CH, np.random.default_rng((14, i)))
            hams.append(t.hamming)
        expected = (1 - lam) * p_b * self.CFG.k
        assert np.mean(hams) == pytest.approx(expected, rel=0.12)

    def test_intruder_reads_exactly_the_cap(self):
        t = attack_tfa_sampling(self.CFG, 4e4, 8e4, CH, np.random.default_rng(15))
        assert t.retrieval_cap == self.CFG.brm.retrieval_cap
        assert t.accesses["prover"] <= self.CFG.brm.retrieval_cap

    def test_first_vs_random_indices_indistinguishable(self):
        # the sampler key is independent of the intruder's choice
        d_c, d_r = 4e4, 8e4
        trials = 1500
        r_first = rate(
            lambda r: attack_tfa_sampling(self.CFG, d_c, d_r, CH, r, index_choice="first"),
            trials, seed0=16,
        )
        r_rand = rate(
            lambda r: attack_tfa_sampling(self.CFG, d_c, d_r, CH, r, index_choice="random"),
            trials, seed0=17,
        )
        pooled = (r_first + r_rand) / 2
        sd = math.sqrt(max(2 * pooled * (1 - pooled) / trials, 1e-9))
        assert abs(r_first - r_rand) < 4 * sd + 1e-9

    def test_high_rate_approaches_honest(self):
        # lam -> 1: the intruder hands over almost every source bit
        cfg = pi3_config(lam=0.99, k=99)
        got = rate(lambda r: attack_tfa_sampling(cfg, 4e4, 9.9e4, CH, r), 300, seed0=18)
        assert got > 0.95


class TestTfaGeneral:
    CFG = pi3_config(lam=0.4, k=100)

    def test_sampling_strategy_containment(self):
        a = attack_tfa_general(
            self.CFG, 4e4, 8e4, CH, np.random.default_rng(19), IndexSamplingStrategy("first")
        )
        b = attack_tfa_sampling(self.CFG, 4e4, 8e4, CH, np.random.default_rng(19))
        assert a.verdict == b.verdict
        np.testing.assert_array_equal(a.response, b.response)

    def test_parity_sketch_no_better_than_channel(self):
        # threshold placed where the plain-demodulation rate is sizeable, so
        # an information gain from the parity digest would be visible
        cfg = pi3_config(lam=0.4, k=100, beta=0.2)
        d_c, d_r = 4e4, 8e4
        e = transmit_power_for_claim(d_c, cfg.e0, CH)
        p_b = bit_error_prob(snr_at_distance(e, d_r, CH))
        expected = exact_binomial_tail_lower(cfg.k, cfg.beta, p_b)
        assert 0.05 < expected < 0.8
        trials = 1200
        r_parity = rate(
            lambda r: attack_tfa_general(cfg, d_c, d_r, CH, r, ParitySketchStrategy()),
            trials, seed0=20,
        )
        sd = math.sqrt(expected * (1 - expected) / trials)
        assert r_parity <= expected + 4 * sd

    def test_block_majority_runs_and_stays_bounded(self):
        d_c, d_r = 4e4, 8e4
        trials = 600
        r_maj = rate(
            lambda r: attack_tfa_general(self.CFG, d_c, d_r, CH, r, BlockMajorityStrategy()),
            trials, seed0=22,
        )
        r_samp = rate(
            lambda r: attack_tfa_sampling(self.CFG, d_c, d_r, CH, r), trials, seed0=23
        )
        # index sampling is the strongest implemented digest
        sd = math.sqrt(max(r_samp * (1 - r_samp) / trials, 1e-9))
        assert r_maj <= r_samp + 4 * sd + 0.02

    def test_library_contents(self):
        lib = default_strategy_library()
        assert {s.name for s in lib} == {"index-sampling", "parity-sketch", "block-majority"}

    def test_strategy_library_bounded_at_feasible_parameters(self):
        # every implemented digest stays under the false-accept budget when
        # the parameters satisfy the arbitrary-digest feasibility condition
        from dbvsim.bounds import DbvSpec
        from dbvsim.optimize import optimize_brm

        spec = DbvSpec(psi=4.0, eps_fa=1e-2, eps_fr=1e-2)
        opt = optimize_brm(spec, CH, 0.2, "general")
        cfg = ProtocolConfig(
            "pi3", e0=opt.e0_star, k=opt.k_star, beta=opt.beta_star,
            brm=BrmParams(lam=0.2, n=opt.n_star, gamma=spec.eps_fa / 100),
        )
        d_c = 2e4
        trials = 1000
        for strategy in default_strategy_library():
            got = rate(
                lambda r, s=strategy: attack_tfa_general(
                    cfg, d_c, spec.psi * d_c, CH, r, s
                ),
                trials,
                seed0=hash(strategy.name) % 1000,
            )
            assert got <= spec.eps_fa + 4 * math.sqrt(spec.eps_fa / trials), strategy.name

    def test_wrong_protocol_rejected(self):
        from dbvsim.protocols import ProtocolConfigError

        with pytest.raises(ProtocolConfigError):
            attack_tfa_general(PI2, 4e4, 8e4, CH, np.random.default_rng(24),
                               ParitySketchStrategy())
