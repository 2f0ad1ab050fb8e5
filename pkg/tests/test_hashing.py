import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from latsec.entropy import renyi2_entropy, shannon_entropy
from latsec.errors import DomainError, ResourceCapError, ValidationError
from latsec.hashing import (BitLabeling, EncoderKit, FiniteFieldMatrix,
                            bits_to_int, build_encoder, collision_probability,
                            decode_secret, encode_secret,
                            exact_full_rank_probability, exact_hashed_entropy,
                            flat_bit_source, full_rank_check,
                            full_rank_fraction_exhaustive, full_rank_fraction_mc,
                            full_rank_lower_bound, geometric_bit_source,
                            gf2_rank_ints, int_to_bits, privacy_amp_bound,
                            sample_linear_hash, secret_rate_select)
from latsec.lattice import NestedLatticePair


def all_matrices(r, n):
    for g_int in range(1 << (r * n)):
        yield int_to_bits(g_int, r * n).reshape(r, n)


class TestBits:
    def test_round_trip(self):
        for v in (0, 1, 5, 255):
            assert bits_to_int(int_to_bits(v, 8)) == v

    def test_msb_first(self):
        assert int_to_bits(4, 3).tolist() == [1, 0, 0]

    def test_width_guard(self):
        with pytest.raises(DomainError):
            int_to_bits(8, 3)


class TestFieldMatrix:
    def test_prime_required(self):
        with pytest.raises(ValidationError):
            FiniteFieldMatrix(4, np.zeros((1, 1), dtype=np.int64))

    def test_entry_range(self):
        with pytest.raises(ValidationError):
            FiniteFieldMatrix(2, np.array([[2]]))

    def test_rank_matches_int_packing(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            r, n = int(rng.integers(1, 5)), int(rng.integers(1, 7))
            m = FiniteFieldMatrix(2, rng.integers(0, 2, size=(r, n)))
            packed = [bits_to_int(row) for row in m.entries]
            assert m.rank() == gf2_rank_ints(packed)

    def test_rank_gf3(self):
        m = FiniteFieldMatrix(3, np.array([[1, 2], [2, 4 % 3]]))
        # second row is twice the first mod 3
        assert m.rank() == 1


class TestSampling:
    def test_deterministic_per_seed(self):
        a = sample_linear_hash(3, 4, 2, 99)
        b = sample_linear_hash(3, 4, 2, 99)
        assert a.equals(b)
        assert not a.equals(sample_linear_hash(3, 4, 2, 100))

    def test_single_bit_family_balanced(self):
        draws = [int(sample_linear_hash(1, 1, 2, s).entries[0, 0]) for s in range(1000)]
        ones = sum(draws)
        assert 400 <= ones <= 600

    def test_entry_frequencies_roughly_uniform(self):
        # chi-square sanity over 10^4 entries of GF(3) draws
        rng_entries = np.concatenate(
            [sample_linear_hash(10, 10, 3, s).entries.ravel() for s in range(100)])
        counts = np.bincount(rng_entries, minlength=3)
        expected = len(rng_entries) / 3
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 20  # df=2; extremely loose


class TestCollision:
    def test_exhaustive_oracle(self):
        rng = np.random.default_rng(17)
        for r, n in ((1, 2), (2, 2), (3, 3)):
            x1 = rng.integers(0, 2, size=n)
            x2 = x1.copy()
            x2[0] ^= 1
            hits = 0
            total = 0
            for g in all_matrices(r, n):
                total += 1
                if np.array_equal((g @ x1) % 2, (g @ x2) % 2):
                    hits += 1
            assert collision_probability(r, n, 2, x1, x2) == pytest.approx(
                hits / total, abs=1e-12)

    def test_bound(self):
        x1 = np.array([1, 0, 0])
        x2 = np.array([0, 1, 0])
        for r in (1, 2, 3):
            assert collision_probability(r, 3, 2, x1, x2) <= 2.0 ** (-r) + 1e-15

    def test_equal_inputs_rejected(self):
        with pytest.raises(DomainError):
            collision_probability(2, 2, 2, [1, 0], [1, 0])

    @pytest.mark.parametrize("q,r,n", [(2, 1, 2), (2, 2, 2), (3, 1, 2)])
    def test_universality_every_distinct_pair(self, q, r, n):
        # enumerate the whole family and every distinct input pair
        inputs = list(itertools.product(range(q), repeat=n))
        family = [np.array(m, dtype=np.int64).reshape(r, n)
                  for m in itertools.product(range(q), repeat=r * n)]
        for x1 in inputs:
            for x2 in inputs:
                if x1 == x2:
                    continue
                hits = sum(1 for g in family
                           if np.array_equal((g @ x1) % q, (g @ x2) % q))
                assert hits / len(family) == pytest.approx(
                    collision_probability(r, n, q, x1, x2), abs=1e-12)
                assert hits / len(family) <= q ** (-r) + 1e-15


class TestFullRank:
    def test_identity_and_zero(self):
        assert full_rank_check(FiniteFieldMatrix.identity(3))
        assert not full_rank_check(FiniteFieldMatrix(2, np.zeros((2, 3), dtype=int)))

    def test_exhaustive_fraction_r2_n4(self):
        frac = full_rank_fraction_exhaustive(2, 4)
        assert frac >= full_rank_lower_bound(2, 4)  # 0.75
        assert frac == pytest.approx(exact_full_rank_probability(2, 4), abs=1e-12)

    def test_exhaustive_matches_matrix_rank(self):
        # independent route: rank via field elimination instead of bit packing
        hits = sum(
            1 for g in all_matrices(2, 3)
            if FiniteFieldMatrix(2, g).rank() == 2)
        assert full_rank_fraction_exhaustive(2, 3) == pytest.approx(hits / 64)

    def test_monte_carlo_sane(self):
        frac = full_rank_fraction_mc(4, 8, 4000, seed=5)
        exact = exact_full_rank_probability(4, 8)
        sigma = math.sqrt(exact * (1 - exact) / 4000)
        assert abs(frac - exact) <= 4 * sigma


class TestPrivacyAmpBound:
    def test_exponent_zero(self):
        assert privacy_amp_bound(3, 2, 3.0) == pytest.approx(3 - 1 / math.log(2))

    def test_large_margin_limit(self):
        assert privacy_amp_bound(2, 2, 60.0) == pytest.approx(2.0, abs=1e-12)

    def test_worked_value(self):
        assert privacy_amp_bound(2, 2, 4.0) == pytest.approx(
            2 - 0.25 / math.log(2), abs=1e-12)
        assert privacy_amp_bound(2, 2, 4.0) == pytest.approx(1.639, abs=1e-3)


class TestHashedEntropy:
    def test_uniform_source_meets_floor(self):
        for n in (2, 3):
            for r in (1, 2):
                src = flat_bit_source(n, 1 << n)
                h = exact_hashed_entropy(src, r)
                assert h >= privacy_amp_bound(r, 2, float(n)) - 1e-12

    def test_point_mass_gives_zero(self):
        src = flat_bit_source(3, 1)
        assert exact_hashed_entropy(src, 2) == pytest.approx(0.0, abs=1e-12)

    def test_two_element_source_hand_average(self):
        # independent oracle: average H(g(A)) by explicit loop over the family
        src = flat_bit_source(2, 2)
        acc = 0.0
        count = 0
        for g in all_matrices(1, 2):
            masses = {}
            for sym, p in zip(src.support, src.probs):
                out = int(((g @ np.array(sym)) % 2)[0])
                masses[out] = masses.get(out, 0) + float(p)
            acc += -sum(p * math.log2(p) for p in masses.values() if p > 0)
            count += 1
        oracle = acc / count
        assert exact_hashed_entropy(src, 1) == pytest.approx(oracle, abs=1e-12)

    def test_seed_set_fallback(self):
        src = flat_bit_source(4, 16)
        h = exact_hashed_entropy(src, 2, seed_set=list(range(64)))
        assert 0 < h <= 2.0 + 1e-12

    def test_cap(self):
        with pytest.raises(ResourceCapError):
            exact_hashed_entropy(flat_bit_source(8, 4), 4, cap=100)


class TestEncoder:
    def test_identity_tail_completion(self):
        n, r = 4, 2
        g = FiniteFieldMatrix(2, np.eye(n, dtype=np.int64)[n - r:])
        kit = build_encoder(g)
        assert np.array_equal(kit.g_prime.entries, np.eye(n, dtype=np.int64)[: n - r])
        stacked = np.vstack([kit.g_prime.entries, kit.g.entries])
        assert np.array_equal((stacked @ kit.a_inv.entries) % 2, np.eye(n, dtype=int))

    def test_random_full_rank_inverse(self):
        rng = np.random.default_rng(13)
        built = 0
        for seed in range(40):
            g = sample_linear_hash(3, 7, 2, seed)
            if not full_rank_check(g):
                continue
            kit = build_encoder(g)
            stacked = np.vstack([kit.g_prime.entries, kit.g.entries])
            assert np.array_equal((stacked @ kit.a_inv.entries) % 2,
                                  np.eye(7, dtype=int))
            built += 1
        assert built > 30

    def test_all_ones_row(self):
        g = FiniteFieldMatrix(2, np.ones((1, 3), dtype=np.int64))
        kit = build_encoder(g)
        stacked = np.vstack([kit.g_prime.entries, kit.g.entries])
        # exhaustive oracle: some completion must exist, and ours verifies
        assert FiniteFieldMatrix(2, stacked).rank() == 3

    def test_rank_deficient_rejected(self):
        g = FiniteFieldMatrix(2, np.array([[1, 0, 1], [1, 0, 1]]))
        with pytest.raises(DomainError):
            build_encoder(g)

    def test_full_square_hash_allows_empty_g_prime(self):
        g = FiniteFieldMatrix.identity(3)
        kit = build_encoder(g)
        assert kit.g_prime.rows == 0

    def test_json_round_trip(self):
        g = sample_linear_hash(2, 5, 2, 3)
        if not full_rank_check(g):
            g = FiniteFieldMatrix(2, np.eye(5, dtype=np.int64)[:2])
        kit = build_encoder(g)
        again = EncoderKit.from_json(kit.to_json())
        assert again.g.equals(kit.g)
        assert again.g_prime.equals(kit.g_prime)
        assert again.a_inv.equals(kit.a_inv)


def _labeling_for(n_bits):
    pair = NestedLatticePair(1, 2.0 ** n_bits, 2 ** n_bits)
    return BitLabeling.from_layers([pair])


class TestSecretCodec:
    def test_zero_maps_to_first_point(self):
        lab = _labeling_for(3)
        g = FiniteFieldMatrix(2, np.eye(3, dtype=np.int64)[2:])
        kit = build_encoder(g)
        t = encode_secret(kit, np.zeros(1, dtype=int), np.zeros(2, dtype=int), lab)
        assert np.allclose(t, lab.points[0])

    def test_round_trip_and_uniformity(self):
        for n_bits in (3, 6, 10):
            lab = _labeling_for(n_bits)
            r = max(1, n_bits // 3)
            g = None
            for seed in range(20):
                cand = sample_linear_hash(r, n_bits, 2, seed)
                if full_rank_check(cand):
                    g = cand
                    break
            kit = build_encoder(g)
            seen = set()
            for s_int in range(1 << r):
                for sp_int in range(1 << (n_bits - r)):
                    s = int_to_bits(s_int, r)
                    sp = int_to_bits(sp_int, n_bits - r)
                    t = encode_secret(kit, s, sp, lab)
                    sp2, s2 = decode_secret(kit, t, lab)
                    assert np.array_equal(s2, s)
                    assert np.array_equal(sp2, sp)
                    seen.add(tuple(np.round(t, 9)))
            assert len(seen) == 1 << n_bits  # uniform input sweeps the whole subset

    def test_length_mismatch(self):
        lab = _labeling_for(3)
        kit = build_encoder(FiniteFieldMatrix(2, np.eye(3, dtype=np.int64)[2:]))
        with pytest.raises(DomainError):
            encode_secret(kit, np.zeros(2, dtype=int), np.zeros(1, dtype=int), lab)

    def test_partial_codebook_labeling(self):
        pair = NestedLatticePair(1, 3.0, 3)  # 3 points -> 1 labeled bit
        lab = BitLabeling.from_layers([pair])
        assert lab.n_bits == 1
        assert lab.points.shape == (2, 1)
        assert lab.index_of(lab.points[1]) == 1
        with pytest.raises(DomainError):
            lab.index_of([1.0])  # the third point was cut


class TestRateSelect:
    def test_zero_margin(self):
        assert secret_rate_select(10, 1.0, 0.1, 0.1) == 0

    def test_worked_value(self):
        assert secret_rate_select(20, 2.0, 0.1, 0.1) == 15

    def test_strict_inequality_and_cap(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n_bar = int(rng.integers(1, 40))
            rate0 = float(rng.uniform(1.0, 3.0))
            eps = float(rng.uniform(0.01, 1.0))
            delta = float(rng.uniform(0.01, 0.5))
            r0 = secret_rate_select(n_bar, rate0, eps, delta)
            assert r0 >= 0
            threshold = n_bar * (rate0 - 1) - eps * n_bar - delta * n_bar
            if 0 < eps < rate0 - 1 and threshold > 0:
                assert r0 < threshold + 1e-9
                assert r0 <= max(0.0, n_bar * (rate0 - 1 - eps))
            else:
                assert r0 == 0

    def test_delta_guard(self):
        with pytest.raises(DomainError):
            secret_rate_select(8, 2.0, 0.1, 0.0)


class TestSources:
    def test_flat_source_collision_entropy(self):
        src = flat_bit_source(4, 8)
        assert renyi2_entropy(src) == pytest.approx(3.0, abs=1e-12)
        assert src.is_exact

    def test_geometric_source_valid(self):
        src = geometric_bit_source(3)
        assert src.is_exact
        assert sum(src.probs) == Fraction(1)
        assert shannon_entropy(src) > renyi2_entropy(src) > 0
