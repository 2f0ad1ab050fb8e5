import json
import math
from fractions import Fraction

import numpy as np
import pytest

from latsec.entropy import (DiscreteDistribution, JointDistribution,
                            conditional_entropy_floor_sweep, conditional_shannon,
                            conditional_slice, grid_joint_from_counts,
                            iter_grid_joints, min_entropy, mutual_information,
                            renyi2_entropy, shannon_entropy,
                            side_info_violation_mass, violation_mass_grid_sweep)
from latsec.errors import DomainError, ValidationError


def uniform(n):
    return DiscreteDistribution(tuple(range(n)), tuple(1 / n for _ in range(n)))


def random_joint(rng, nx, nt):
    p = rng.exponential(size=(nx, nt))
    p /= p.sum()
    return JointDistribution(tuple(range(nx)), tuple(range(nt)),
                             tuple(tuple(row) for row in p))


def independent_joint(px, pt):
    rows = tuple(tuple(a * b for b in pt) for a in px)
    return JointDistribution(tuple(range(len(px))), tuple(range(len(pt))), rows)


def copy_joint(n):
    rows = tuple(tuple(1 / n if i == j else 0.0 for j in range(n)) for i in range(n))
    return JointDistribution(tuple(range(n)), tuple(range(n)), rows)


class TestValidation:
    def test_negative_mass_rejected(self):
        with pytest.raises(ValidationError):
            DiscreteDistribution((0, 1), (-0.1, 1.1))

    def test_bad_total_rejected(self):
        with pytest.raises(ValidationError):
            DiscreteDistribution((0, 1), (0.6, 0.5))

    def test_duplicate_symbols_rejected(self):
        with pytest.raises(ValidationError):
            DiscreteDistribution(("a", "a"), (0.5, 0.5))

    def test_joint_shape_mismatch(self):
        with pytest.raises(ValidationError):
            JointDistribution((0, 1), (0, 1), ((0.5, 0.5),))


class TestMeasures:
    def test_shannon_uniform_four(self):
        assert shannon_entropy(uniform(4)) == pytest.approx(2.0, abs=1e-12)

    def test_shannon_point_mass(self):
        d = DiscreteDistribution((0, 1), (1.0, 0.0))
        assert shannon_entropy(d) == 0.0

    def test_shannon_half_quarter_quarter(self):
        probs = (0.5, 0.25, 0.25)
        oracle = -sum(p * math.log2(p) for p in probs)  # direct summation
        d = DiscreteDistribution((0, 1, 2), probs)
        assert oracle == pytest.approx(1.5, abs=1e-12)
        assert shannon_entropy(d) == pytest.approx(oracle, abs=1e-12)

    def test_renyi2_uniform(self):
        for n in (2, 5, 8):
            assert renyi2_entropy(uniform(n)) == pytest.approx(math.log2(n), abs=1e-12)

    def test_renyi2_three_quarters(self):
        probs = (0.75, 0.25)
        oracle = -math.log2(sum(p * p for p in probs))  # direct summation
        assert oracle == pytest.approx(-math.log2(10 / 16), abs=1e-12)
        d = DiscreteDistribution((0, 1), probs)
        assert renyi2_entropy(d) == pytest.approx(oracle, abs=1e-12)

    def test_min_entropy_examples(self):
        assert min_entropy(uniform(8)) == pytest.approx(3.0, abs=1e-12)
        point = DiscreteDistribution((0, 1), (1.0, 0.0))
        assert min_entropy(point) == 0.0
        d = DiscreteDistribution((0, 1), (0.75, 0.25))
        assert min_entropy(d) == pytest.approx(math.log2(4 / 3), abs=1e-12)

    def test_measure_ordering(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            n = int(rng.integers(2, 9))
            p = rng.exponential(size=n)
            p /= p.sum()
            d = DiscreteDistribution(tuple(range(n)), tuple(p))
            h, h2, hm = shannon_entropy(d), renyi2_entropy(d), min_entropy(d)
            assert hm <= h2 + 1e-9
            assert h2 <= h + 1e-9


class TestConditional:
    def test_independent_keeps_entropy(self):
        j = independent_joint((0.5, 0.3, 0.2), (0.25, 0.75))
        assert conditional_shannon(j) == pytest.approx(
            shannon_entropy(j.marginal_x()), abs=1e-12)

    def test_copy_is_deterministic(self):
        assert conditional_shannon(copy_joint(4)) == pytest.approx(0.0, abs=1e-12)

    def test_chain_rule_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            j = random_joint(rng, 3, 3)
            flat = [p for row in j.probs for p in row]
            h_joint = -sum(p * math.log2(p) for p in flat if p > 0)
            h_t = shannon_entropy(j.marginal_t())
            assert conditional_shannon(j) == pytest.approx(h_joint - h_t, abs=1e-9)

    def test_slice_independent(self):
        j = independent_joint((0.5, 0.5), (0.25, 0.75))
        for t in (0, 1):
            for m in ("shannon", "renyi2", "min"):
                d = j.marginal_x()
                expected = {"shannon": shannon_entropy, "renyi2": renyi2_entropy,
                            "min": min_entropy}[m](d)
                assert conditional_slice(j, t, m) == pytest.approx(expected, abs=1e-12)

    def test_slice_copy(self):
        j = copy_joint(3)
        for t in range(3):
            assert conditional_slice(j, t, "shannon") == 0.0

    def test_slice_hand_normalized_column(self):
        # 4x2 joint; column t=0 is (0.1, 0.2, 0.3, 0.0) before normalizing
        rows = ((0.1, 0.05), (0.2, 0.05), (0.3, 0.1), (0.0, 0.2))
        j = JointDistribution((0, 1, 2, 3), (0, 1), rows)
        col = [0.1, 0.2, 0.3, 0.0]
        norm = [c / 0.6 for c in col]
        oracle = -sum(p * math.log2(p) for p in norm if p > 0)
        assert conditional_slice(j, 0, "shannon") == pytest.approx(oracle, abs=1e-12)
        oracle2 = -math.log2(sum(p * p for p in norm))
        assert conditional_slice(j, 0, "renyi2") == pytest.approx(oracle2, abs=1e-12)
        assert conditional_slice(j, 0, "min") == pytest.approx(
            -math.log2(max(norm)), abs=1e-12)

    def test_zero_mass_slice_rejected(self):
        rows = ((0.5, 0.0), (0.5, 0.0))
        j = JointDistribution((0, 1), (0, 1), rows)
        with pytest.raises(DomainError):
            conditional_slice(j, 1, "shannon")


class TestViolationMass:
    def test_independent_joint_never_violates(self):
        j = independent_joint((0.5, 0.3, 0.2), (0.25, 0.75))
        for s in (0.5, 1, 2, 4):
            assert side_info_violation_mass(j, "renyi2", s) == 0
            assert side_info_violation_mass(j, "min", s) == 0

    def test_copy_joint_at_s_log_m(self):
        m = 4
        rows = tuple(tuple(Fraction(1, m) if i == j else Fraction(0)
                           for j in range(m)) for i in range(m))
        j = JointDistribution(tuple(range(m)), tuple(range(m)), rows)
        # the drop equals log2 m = log2||T|| exactly, strictly below the s margin
        assert side_info_violation_mass(j, "renyi2", math.log2(m)) == 0
        assert side_info_violation_mass(j, "min", math.log2(m)) == 0

    def test_invalid_s_rejected(self):
        j = copy_joint(2)
        with pytest.raises(DomainError):
            side_info_violation_mass(j, "min", 0.0)
        with pytest.raises(DomainError):
            side_info_violation_mass(j, "shannon", 1.0)

    def test_exact_mode_matches_grid_sweep_arithmetic(self):
        # sample grid joints and cross-check the Fraction path against the
        # integer comparisons used by the exhaustive sweep
        picked = []
        for k, counts in enumerate(iter_grid_joints(3, 3, 8)):
            if k % 997 == 0:
                picked.append(counts)
        assert picked
        for counts in picked:
            j = grid_joint_from_counts(counts, 3, 3, 8)
            for s in (0.5, 1.0, 2.0, 4.0):
                mass_r = side_info_violation_mass(j, "renyi2", s)
                mass_m = side_info_violation_mass(j, "min", s)
                assert isinstance(mass_r, Fraction)
                assert float(mass_r) <= 2 ** (1 - s / 2) + 1e-15
                assert float(mass_m) <= 2 ** (-s) + 1e-15

    def test_tail_bounds_on_random_joints(self):
        rng = np.random.default_rng(77)
        for _ in range(200):
            j = random_joint(rng, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
            for s in (0.5, 1, 2, 4):
                assert side_info_violation_mass(j, "renyi2", s) <= 2 ** (1 - s / 2) + 1e-12
                assert side_info_violation_mass(j, "min", s) <= 2 ** (-s) + 1e-12


class TestMutualInformation:
    def test_independent_is_zero(self):
        j = independent_joint((0.5, 0.3, 0.2), (0.25, 0.75))
        assert mutual_information(j) == pytest.approx(0.0, abs=1e-12)

    def test_copy_is_log_m(self):
        assert mutual_information(copy_joint(8)) == pytest.approx(3.0, abs=1e-12)

    def test_kl_divergence_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            j = random_joint(rng, 4, 3)
            px = j.x_masses()
            pt = j.t_masses()
            kl = 0.0
            for i, row in enumerate(j.probs):
                for k, p in enumerate(row):
                    if p > 0:
                        kl += p * math.log2(p / (px[i] * pt[k]))
            assert mutual_information(j) == pytest.approx(kl, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            j = random_joint(rng, 3, 5)
            assert mutual_information(j) == pytest.approx(
                mutual_information(j.transpose()), abs=1e-9)

    def test_zero_iff_product(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            px = rng.exponential(size=3)
            px /= px.sum()
            pt = rng.exponential(size=4)
            pt /= pt.sum()
            assert mutual_information(independent_joint(tuple(px), tuple(pt))) < 1e-12
        # any visibly non-product joint has positive information
        j = JointDistribution((0, 1), (0, 1), ((0.4, 0.1), (0.1, 0.4)))
        assert mutual_information(j) > 1e-3


class TestLemmaSweeps:
    def test_floor_sweep_clean(self):
        rep = conditional_entropy_floor_sweep(1500, 8, 8, seed=4)
        assert rep.violations == 0
        assert rep.max_deficit <= 1e-9

    def test_spoiler_expectation_bound(self):
        # E_T[max_x p(x|t)] never exceeds ||T|| * max_x p(x)
        rng = np.random.default_rng(31)
        for _ in range(200):
            j = random_joint(rng, int(rng.integers(2, 7)), int(rng.integers(2, 7)))
            px = j.x_masses()
            lhs = 0.0
            for t, mass in zip(j.t_support, j.t_masses()):
                if mass > 0:
                    lhs += mass * max(j.conditional_x_given_t(t).probs)
            rhs = j.realized_t_count() * max(px)
            assert lhs <= rhs + 1e-12

    def test_grid_sweep_small_clean(self):
        rep = violation_mass_grid_sweep(3, 3, 6, (0.5, 1.0, 2.0, 4.0))
        assert rep.bound_violations_renyi2 == 0
        assert rep.bound_violations_min == 0
        assert rep.joints > 0

    def test_grid_sweep_rejects_uneven_s(self):
        with pytest.raises(DomainError):
            violation_mass_grid_sweep(2, 2, 4, (0.3,))


class TestSerialization:
    def test_distribution_round_trip(self):
        d = DiscreteDistribution(("a", "b"), (0.25, 0.75))
        d2 = DiscreteDistribution.from_json(d.to_json())
        assert d2.support == d.support
        assert d2.probs == d.probs

    def test_fraction_round_trip(self):
        d = DiscreteDistribution((0, 1), (Fraction(1, 3), Fraction(2, 3)))
        d2 = DiscreteDistribution.from_json(d.to_json())
        assert d2.probs == (Fraction(1, 3), Fraction(2, 3))
        assert d2.is_exact

    def test_joint_round_trip(self):
        j = JointDistribution((0, 1), ("x", "y"), ((0.1, 0.2), (0.3, 0.4)))
        j2 = JointDistribution.from_json(j.to_json())
        assert j2.probs == j.probs
        assert j2.t_support == ("x", "y")

    def test_joint_json_schema(self):
        j = copy_joint(2)
        obj = json.loads(j.to_json())
        assert set(obj) == {"x_support", "t_support", "probs"}
        assert obj["probs"] == [[0.5, 0.0], [0.0, 0.5]]
