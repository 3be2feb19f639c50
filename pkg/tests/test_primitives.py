import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbvsim.primitives import (
    FIELD_POLYNOMIALS,
    IndexSet,
    MacKey,
    SamplerKey,
    encode_response_claim,
    gf_mul,
    mac_forgery_bound,
    mac_sign,
    mac_verify,
    sample_indices,
    sampler_guarantee,
)


# ---------------------------------------------------------------------------
# field arithmetic


def _poly_mul_mod(a: int, b: int, f: int) -> int:
    deg = f.bit_length() - 1
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= f
    return r


def _poly_gcd(a: int, b: int) -> int:
    while b:
        while a.bit_length() >= b.bit_length() and a:
            a ^= b << (a.bit_length() - b.bit_length())
        a, b = b, a
    return a


class TestFieldPolynomials:
    @pytest.mark.parametrize("s", sorted(FIELD_POLYNOMIALS))
    def test_irreducible(self, s):
        # f divides x^(2^s) - x, and gcd(x^(2^(s/2)) - x, f) = 1 (s is a
        # power of two, so s/2 covers every proper subfield degree).
        f = FIELD_POLYNOMIALS[s]
        x = 0b10
        t = x
        for _ in range(s):
            t = _poly_mul_mod(t, t, f)
        assert t == x, f"x^(2^{s}) != x mod f"
        t = x
        for _ in range(s // 2):
            t = _poly_mul_mod(t, t, f)
        assert _poly_gcd(t ^ x, f) == 1

    def test_mul_basics(self):
        assert gf_mul(0, 123, 8) == 0
        assert gf_mul(1, 123, 8) == 123
        # commutativity and distributivity spot checks
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b, c = (int(v) for v in rng.integers(0, 256, 3))
            assert gf_mul(a, b, 8) == gf_mul(b, a, 8)
            assert gf_mul(a, b ^ c, 8) == gf_mul(a, b, 8) ^ gf_mul(a, c, 8)


# ---------------------------------------------------------------------------
# MAC


def _mul_table(s=8):
    t = np.zeros((256, 256), dtype=np.uint8)
    for a in range(256):
        for b in range(256):
            t[a, b] = gf_mul(a, b, s)
    return t


def _hash_all_points(table, blocks):
    """Polynomial part of the tag for every field point a, vectorized."""
    a = np.arange(256)
    acc = np.zeros(256, dtype=np.uint8)
    for blk in blocks:
        acc = table[acc ^ blk, a]
    return acc


def _blocks_of(message_bits):
    from dbvsim.primitives import _to_blocks

    return _to_blocks(np.asarray(message_bits, dtype=np.uint8), 8)


class TestMac:
    @given(st.lists(st.integers(0, 1), max_size=200), st.integers(0, 2**63))
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, bits, seed):
        rng = np.random.default_rng(seed)
        key = MacKey.generate(rng, 64)
        msg = np.array(bits, dtype=np.uint8)
        assert mac_verify(key, msg, mac_sign(key, msg))

    def test_flipped_tag_rejected(self):
        rng = np.random.default_rng(0)
        key = MacKey.generate(rng, 64)
        msg = np.ones(32, dtype=np.uint8)
        tag = mac_sign(key, msg)
        assert not mac_verify(key, msg, tag ^ 1)

    def test_out_of_range_tag_rejected(self):
        key = MacKey(8, 3, 5)
        msg = np.zeros(4, dtype=np.uint8)
        assert not mac_verify(key, msg, None)
        assert not mac_verify(key, msg, 1 << 8)

    def test_length_extension_blocked(self):
        # zero-padding is disambiguated by the length prefix
        key = MacKey(8, 7, 11)
        short = np.array([1, 0, 1], dtype=np.uint8)
        padded = np.array([1, 0, 1, 0, 0], dtype=np.uint8)
        assert mac_sign(key, short) != mac_sign(key, padded) or not np.array_equal(
            _blocks_of(short), _blocks_of(padded)
        )
        assert _blocks_of(short) != _blocks_of(padded)

    def test_forgery_bound_formula(self):
        assert mac_forgery_bound(64, 64) == pytest.approx(2 / 2**64)
        assert mac_forgery_bound(0, 8) == pytest.approx(8 / 256)  # prefix alone

    def test_exhaustive_forgery_bound_s8(self):
        """Best tag-consistent forgery over all 2^16 keys succeeds <= L/256."""
        table = _mul_table()
        m = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
        m2 = m.copy()
        m2[3] ^= 1
        blocks = _blocks_of(m)
        blocks2 = _blocks_of(m2)
        L = max(len(blocks), len(blocks2))
        h1 = _hash_all_points(table, blocks)
        h2 = _hash_all_points(table, blocks2)
        # Keys are (a, b); observed tag t = h1[a]^b, forged target u = h2[a]^b.
        a_grid, b_grid = np.meshgrid(np.arange(256), np.arange(256), indexing="ij")
        t = h1[a_grid] ^ b_grid
        u = h2[a_grid] ^ b_grid
        joint = np.zeros((256, 256), dtype=np.int64)
        np.add.at(joint, (t.ravel(), u.ravel()), 1)
        best_success = joint.max(axis=1).sum()  # optimal (m2, u) response per t
        assert best_success <= L * 256
        assert best_success / 2**16 <= L / 256

    def test_one_bit_flip_tag_collisions_bounded_s8(self):
        table = _mul_table()
        rng = np.random.default_rng(21)
        m = rng.integers(0, 2, 16).astype(np.uint8)
        m2 = m.copy()
        m2[7] ^= 1
        b1 = _blocks_of(m)
        b2 = _blocks_of(m2)
        L = max(len(b1), len(b2))
        h1 = _hash_all_points(table, b1)
        h2 = _hash_all_points(table, b2)
        # tags collide iff the polynomial difference vanishes at a; b cancels
        colliding_keys = int((h1 == h2).sum()) * 256
        assert colliding_keys / 2**16 <= L / 256

    def test_random_tag_success_is_exactly_two_to_minus_s(self):
        # For any fixed (message, tag) guess, exactly one b per a verifies.
        table = _mul_table()
        msg = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
        h = _hash_all_points(table, _blocks_of(msg))
        guess = 0x5A
        hits = sum(1 for a in range(256) for b in range(256) if (h[a] ^ b) == guess)
        assert hits == 256  # 2^16 * 2^-8

    def test_python_and_table_paths_agree(self):
        table = _mul_table()
        rng = np.random.default_rng(4)
        msg = rng.integers(0, 2, 24).astype(np.uint8)
        for _ in range(20):
            key = MacKey.generate(rng, 8)
            h = _hash_all_points(table, _blocks_of(msg))
            assert mac_sign(key, msg) == (int(h[key.a]) ^ key.b)


class TestEncodeResponseClaim:
    def test_claim_injective(self):
        resp = np.array([1, 0, 1], dtype=np.uint8)
        a = encode_response_claim(resp, 1234.5)
        b = encode_response_claim(resp, 1234.5000048)  # one fixed-point step up
        assert not np.array_equal(a, b)

    def test_layout(self):
        resp = np.array([1, 1, 0, 0], dtype=np.uint8)
        enc = encode_response_claim(resp, 3.0)
        assert enc.size == 4 + 64
        np.testing.assert_array_equal(enc[:4], resp)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            encode_response_claim(np.array([1], dtype=np.uint8), 0.0)


# ---------------------------------------------------------------------------
# sampler


class TestSampler:
    def test_full_draw_is_permutation(self):
        key = SamplerKey.generate(np.random.default_rng(0), 128)
        idx = sample_indices(key, 16, 16)
        assert sorted(int(i) for i in idx.indices) == list(range(16))

    def test_distinctness_many_seeds(self):
        rng = np.random.default_rng(1)
        for _ in range(10**4):
            key = SamplerKey.generate(rng, 128)
            idx = sample_indices(key, 64, 32)
            assert idx.k == 32  # IndexSet validates distinctness on build

    def test_determinism(self):
        key = SamplerKey(seed=b"\x01" * 16)
        a = sample_indices(key, 1000, 100)
        b = sample_indices(key, 1000, 100)
        np.testing.assert_array_equal(a.indices, b.indices)

    def test_k_greater_than_n(self):
        key = SamplerKey(seed=b"\x02" * 16)
        with pytest.raises(ValueError):
            sample_indices(key, 4, 5)

    def test_subset_uniformity(self):
        # All 20 3-subsets of 6 equally likely (5 sigma per cell, fixed seed).
        from itertools import combinations

        rng = np.random.default_rng(42)
        counts = {frozenset(c): 0 for c in combinations(range(6), 3)}
        reps = 10**5
        for _ in range(reps):
            key = SamplerKey.generate(rng, 64)
            counts[sample_indices(key, 6, 3).as_set()] += 1
        exp = reps / 20
        sd = math.sqrt(reps * (1 / 20) * (19 / 20))
        for c, v in counts.items():
            assert abs(v - exp) < 5 * sd, (c, v)

    def test_hoeffding_guarantee_monte_carlo(self):
        # Pr(sample mean < mu - theta) <= exp(-2*k*theta^2) for a [0,1] f.
        rng = np.random.default_rng(7)
        n, k, theta = 2000, 200, 0.05
        f = rng.uniform(0, 1, n)
        mu = f.mean()
        gamma = sampler_guarantee(k, theta)
        reps = 20000
        bad = 0
        for _ in range(reps):
            key = SamplerKey.generate(rng, 64)
            idx = sample_indices(key, n, k)
            bad += f[idx.indices].mean() < mu - theta
        assert bad / reps <= gamma + 3 * math.sqrt(gamma * (1 - gamma) / reps)

    def test_guarantee_values(self):
        assert sampler_guarantee(1000, 0.05) == pytest.approx(math.exp(-5), rel=1e-12)
        assert sampler_guarantee(1000, 0.05) == pytest.approx(6.74e-3, rel=1e-3)
        assert sampler_guarantee(2000, 0.05) == pytest.approx(
            sampler_guarantee(1000, 0.05) ** 2, rel=1e-12
        )
        assert sampler_guarantee(100, 1e-12) == pytest.approx(1.0)

    def test_guarantee_requires_positive_theta(self):
        with pytest.raises(ValueError):
            sampler_guarantee(10, 0.0)

    def test_index_set_validation(self):
        with pytest.raises(ValueError):
            IndexSet(np.array([1, 1, 2]), 5)
        with pytest.raises(ValueError):
            IndexSet(np.array([0, 5]), 5)
