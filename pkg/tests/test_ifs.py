import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.optimize import brentq

from chaoscover.errors import BudgetExceededError, InvalidInputError
from chaoscover.ifs import (
    IfsSystem,
    Similitude,
    apply_word,
    apply_words,
    attractor_box,
    diameter_estimate,
    diameter_upper_bound,
    exponent_t,
    fixed_point,
    level_points,
    scalar_report,
    sierpinski,
    similarity_dimension,
)

from conftest import line_system

ratios_st = st.lists(st.floats(0.05, 0.9), min_size=2, max_size=6)


def brentq_dimension(ratios):
    return brentq(lambda s: sum(r**s for r in ratios) - 1.0, 0.0, 50.0, xtol=1e-15)


class TestSimilarityDimension:
    def test_sierpinski(self):
        assert similarity_dimension([0.5] * 3) == pytest.approx(math.log(3) / math.log(2), abs=1e-12)

    def test_halves(self):
        assert similarity_dimension([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("ratios, frozen", [
        ((1 / 3, 1 / 4), 0.5604988652238639),
        ((1 / 2, 1 / 3), 0.7878849110258699),
        ((1 / 2, 1 / 4), 0.6942419136306173),
    ])
    def test_frozen_values(self, ratios, frozen):
        assert similarity_dimension(ratios) == pytest.approx(frozen, abs=1e-12)

    @given(ratios_st)
    def test_matches_brentq(self, ratios):
        s = similarity_dimension(ratios)
        assert abs(sum(r**s for r in ratios) - 1.0) <= 1e-12
        assert s == pytest.approx(brentq_dimension(ratios), abs=1e-10)

    @given(ratios_st, st.integers(0, 5), st.floats(0.5, 0.99))
    def test_decreasing_in_each_ratio(self, ratios, idx, shrink):
        idx %= len(ratios)
        smaller = list(ratios)
        smaller[idx] *= shrink
        assume(smaller[idx] < ratios[idx] * (1 - 1e-6))
        assert similarity_dimension(smaller) < similarity_dimension(ratios)

    @pytest.mark.parametrize("bad", [[], [0.5, 1.0], [0.0, 0.5], [-0.2, 0.5]])
    def test_rejects(self, bad):
        with pytest.raises(InvalidInputError):
            similarity_dimension(bad)


class TestExponent:
    def test_uniform(self, sier):
        t, arg, unique = exponent_t(sier)
        assert t == pytest.approx(math.log(3) / math.log(2))
        assert arg == {1, 2, 3} and not unique

    def test_skewed(self, sier_skewed):
        t, arg, unique = exponent_t(sier_skewed)
        assert t == pytest.approx(2.0)
        assert arg == {1, 2} and not unique

    def test_unique(self, half_quarter):
        t, arg, unique = exponent_t(half_quarter)
        assert t == pytest.approx(1.0)
        assert arg == {1} and unique

    @given(ratios_st, st.lists(st.floats(0.05, 1.0), min_size=6, max_size=6))
    def test_at_least_dimension(self, ratios, weights):
        n = len(ratios)
        w = np.array(weights[:n])
        sys_ = line_system(ratios, np.arange(n) * 2.0, w / w.sum())
        t, _, _ = exponent_t(sys_)
        assert t >= similarity_dimension(ratios) - 1e-9

    @given(ratios_st)
    def test_equality_for_natural_weights(self, ratios):
        s = similarity_dimension(ratios)
        probs = np.array(ratios) ** s
        probs /= probs.sum()
        sys_ = line_system(ratios, np.arange(len(ratios)) * 2.0, probs)
        assert exponent_t(sys_)[0] == pytest.approx(s, abs=1e-6)


class TestMaps:
    def test_sierpinski_first_map(self, sier):
        assert np.allclose(apply_word(sier, (1,), (1.0, 0.0)), (0.5, 0.0))

    def test_empty_word(self, sier):
        assert np.array_equal(apply_word(sier, (), (0.3, 0.2)), (0.3, 0.2))

    def test_composition_order(self, sier):
        assert np.allclose(apply_word(sier, (1, 2), (0.0, 0.0)), (0.25, 0.0))

    def test_bad_symbol(self, sier):
        with pytest.raises(InvalidInputError):
            apply_word(sier, (4,), (0.0, 0.0))

    @given(st.lists(st.integers(1, 3), max_size=8), st.lists(st.integers(1, 3), max_size=8),
           st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
    def test_concatenation(self, u, v, x):
        sys_ = sierpinski()
        left = apply_word(sys_, tuple(u) + tuple(v), x)
        right = apply_word(sys_, u, apply_word(sys_, v, x))
        assert np.allclose(left, right, atol=1e-12)

    @given(st.lists(st.integers(1, 3), min_size=1, max_size=10),
           st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
    def test_distance_scales(self, w, u, v):
        sys_ = rotated_system()
        du = np.linalg.norm(np.subtract(u, v))
        assume(du > 1e-6)
        r_w = np.prod([sys_.maps[s - 1].scale for s in w])
        dw = np.linalg.norm(apply_word(sys_, w, u) - apply_word(sys_, w, v))
        assert dw == pytest.approx(r_w * du, rel=1e-9)

    def test_vectorised_matches_scalar(self):
        sys_ = rotated_system()
        words = [(), (1,), (2, 3), (3, 1, 2, 2), (1, 1, 1)]
        batch = apply_words(sys_, words, (0.2, -0.1))
        for w, row in zip(words, batch):
            assert np.allclose(row, apply_word(sys_, w, (0.2, -0.1)), atol=1e-14)


def rotated_system():
    c, s = math.cos(0.7), math.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    refl = np.array([[1.0, 0.0], [0.0, -1.0]])
    maps = (
        Similitude(0.5, rot, (0.0, 0.0)),
        Similitude(0.3, refl, (1.0, 0.0)),
        Similitude(0.4, np.eye(2), (0.0, 1.0)),
    )
    return IfsSystem(maps, (0.2, 0.3, 0.5))


class TestFixedPoint:
    def test_examples(self, sier):
        assert np.allclose(fixed_point(sier.maps[0]), (0.0, 0.0))
        assert np.allclose(fixed_point(sier.maps[1]), (1.0, 0.0))
        assert np.allclose(fixed_point(Similitude.scaling(1 / 3, (2.0, 0.0))), (3.0, 0.0))

    @given(st.floats(0.05, 0.95), st.floats(0, 2 * math.pi), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
    def test_residual(self, r, angle, b):
        c, s = math.cos(angle), math.sin(angle)
        sim = Similitude(r, np.array([[c, -s], [s, c]]), b)
        x = fixed_point(sim)
        assert np.linalg.norm(sim(x) - x) <= 1e-10


class TestValidation:
    def test_non_orthogonal(self):
        with pytest.raises(InvalidInputError):
            Similitude(0.5, np.array([[1.0, 0.1], [0.0, 1.0]]), (0.0, 0.0))

    def test_scale_range(self):
        with pytest.raises(InvalidInputError):
            Similitude.scaling(1.0, (0.0,))

    def test_degenerate_probs(self):
        maps = (Similitude.scaling(0.5, (0.0,)), Similitude.scaling(0.5, (0.5,)))
        with pytest.raises(InvalidInputError):
            IfsSystem(maps, (1.0, 0.0))
        with pytest.raises(InvalidInputError):
            IfsSystem(maps, (0.5, 0.4))
        with pytest.raises(InvalidInputError):
            IfsSystem(maps, (0.5, 0.25, 0.25))

    def test_mixed_dimensions(self):
        with pytest.raises(InvalidInputError):
            IfsSystem((Similitude.scaling(0.5, (0.0,)), Similitude.scaling(0.5, (0.0, 1.0))), (0.5, 0.5))


class TestDiameter:
    def test_sierpinski(self, sier):
        est = diameter_estimate(sier, 8)
        # the three vertices are fixed points at mutual distance 1
        assert est == pytest.approx(1.0, abs=2**-7)
        assert diameter_upper_bound(est, 0.5, 8) >= 1.0

    def test_segment(self):
        sys_ = line_system((0.5, 0.5), (0.0, 1.0), (0.5, 0.5))
        assert diameter_estimate(sys_, 8) == pytest.approx(2.0, abs=2**-6)

    def test_planar_segment(self):
        maps = (Similitude.scaling(0.5, (0.0, 0.0)), Similitude.scaling(0.5, (1.0, 0.0)))
        assert diameter_estimate(IfsSystem(maps, (0.5, 0.5)), 8) == pytest.approx(2.0, abs=2**-6)

    def test_refinement_monotone(self, sier):
        values = [diameter_estimate(sier, k) for k in range(1, 9)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    def test_brute_force_agrees(self):
        sys_ = rotated_system()
        pts = level_points(sys_, 5)
        brute = np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))
        assert diameter_estimate(sys_, 5) == pytest.approx(brute, rel=1e-12)

    def test_budget(self, sier):
        with pytest.raises(BudgetExceededError):
            level_points(sier, 10, budget=1000)

    def test_box_contains_deep_points(self, sier):
        lo, hi = attractor_box(sier, depth=5)
        pts = level_points(sier, 10)
        assert np.all(pts >= lo - 1e-12) and np.all(pts <= hi + 1e-12)


def test_scalar_report(sier_skewed):
    rep = scalar_report(sier_skewed)
    assert rep.t == pytest.approx(2.0)
    assert rep.s == pytest.approx(math.log(3) / math.log(2))
    assert rep.diameter_estimate <= 1.0 <= rep.diameter_upper
