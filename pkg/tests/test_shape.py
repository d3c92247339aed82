import math

import numpy as np
import pytest
from conftest import random_discrete_law

from votesig.laws import DiscreteLaw, make_named, margin_mass_bound_holds, uniform_density
from votesig.shape import (MarginCondition, bridge_bound, classify_shape, density_bridge_bound,
                           gap_bridge_bound, increment_signs, near_zero_bound, oscillation_sign_changes,
                           oscillation_signs, rate_sharpness_probe, signature_support_radius,
                           variation_bound)
from votesig.signature import curve, curve_direct, endpoint, pushforward


def delta(q):
    return DiscreteLaw.from_atoms([(q, 1.0)])


def check_variation_dominance(law, n_max=100):
    v = curve(law, n_max).values
    tv = pushforward(law).total_variation()
    worst = 0.0
    for n in range(n_max):
        for m in range(n + 1, n_max + 1):
            sum_form, closed = variation_bound(tv, n, m)
            assert sum_form <= closed + 1e-15
            gap = abs(v[m] - v[n])
            worst = max(worst, gap - sum_form)
    return worst


class TestVariationBound:
    def test_examples(self):
        assert variation_bound(1.0, 0, 1)[0] == pytest.approx(0.25)
        assert variation_bound(0.0, 3, 9) == (0.0, 0.0)
        assert variation_bound(1.0, 0, 4)[1] == 1.0

    def test_sum_form_is_telescoped_kernel(self):
        # oracle: exact integer coefficients
        total = sum(math.comb(2 * k + 1, k + 1) / 4 ** (k + 1) for k in range(5, 40))
        assert variation_bound(0.3, 5, 40)[0] == pytest.approx(0.3 * total, rel=1e-13)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            variation_bound(0.5, 4, 4)
        with pytest.raises(ValueError):
            variation_bound(1.5, 0, 4)

    def test_dominance_random_laws(self, rng):
        for _ in range(10):
            assert check_variation_dominance(random_discrete_law(rng, include_half=True), 60) <= 1e-12

    def test_dominance_extreme_law(self):
        # mass just off 1/2 on both sides moves the curve as fast as possible
        law = DiscreteLaw.from_atoms([(0.5 + 1e-3, 0.5), (1 - 1e-9, 0.5)])
        assert check_variation_dominance(law, 40) <= 1e-12


class TestNearZeroBound:
    def test_examples(self):
        assert near_zero_bound(0.5, 3 / 16, 0) == pytest.approx(0.75)
        assert near_zero_bound(1.0, 1e-12, 3) < 1e-30

    def test_dominance_delta(self):
        law = delta(0.75)
        sig = pushforward(law)
        a = signature_support_radius(sig)
        assert a == pytest.approx(3 / 16)
        v = curve(law, 300).values
        end = endpoint(law)
        for n in (0, 1, 5, 20, 100):
            bound = near_zero_bound(sig.total_variation(), a, n)
            assert abs(end - v[n]) <= bound
            assert np.all(np.abs(v[n + 1:] - v[n]) <= bound + 1e-15)

    def test_dominance_random(self, rng):
        for _ in range(10):
            q = np.concatenate([rng.uniform(0, 0.35, 3), rng.uniform(0.65, 1, 3)])
            w = rng.random(6) + 0.1
            law = DiscreteLaw(q, w / w.sum())
            sig = pushforward(law)
            a = max(signature_support_radius(sig), 1e-6)
            v = curve(law, 150).values
            end = endpoint(law)
            for n in (0, 3, 10, 40):
                bound = near_zero_bound(sig.total_variation(), a, n)
                assert abs(end - v[n]) <= bound + 1e-15


class TestBridgeBounds:
    def test_gap_example(self):
        assert gap_bridge_bound(0.25, 0) == pytest.approx(math.exp(-1 / 8))
        assert abs(curve(delta(0.75), 0).values[0] - endpoint(delta(0.75))) <= gap_bridge_bound(0.25, 0)

    def test_density_example(self):
        assert density_bridge_bound(1.0, 12) == pytest.approx(math.exp(-12.5) + math.sqrt(math.pi / 50))

    def test_vanishes(self):
        cond = MarginCondition(2.0, 1.0, 0.5)
        assert bridge_bound(cond, 10**8) < 1e-3

    def test_margin_condition_validation(self):
        with pytest.raises(ValueError):
            MarginCondition(1.0, 1.0, 0.6)
        with pytest.raises(ValueError):
            MarginCondition(0.0, 1.0, 0.2)

    @pytest.mark.parametrize("kappa,t0", [(1.0, 0.5), (2.0, 0.5), (1.0, 0.2), (0.5, 0.3), (3.0, 0.4)])
    def test_dominance_worst_case_laws(self, kappa, t0):
        cond = MarginCondition(2.0, kappa, t0)
        law = make_named("margin_worst_case", C=cond.C, kappa=kappa, t0=t0)
        assert margin_mass_bound_holds(law, cond.C, kappa, t0)
        n = np.unique(np.geomspace(1, 10**4, 25).astype(int))
        gaps = np.abs(curve_direct(law, n) - endpoint(law))
        bounds = np.array([bridge_bound(cond, k) for k in n])
        assert np.all(gaps <= bounds)

    def test_dominance_uniform(self):
        law = uniform_density()
        cond = MarginCondition(2.0, 1.0, 0.5)
        assert margin_mass_bound_holds(law, 2.0, 1.0, 0.5)
        n = [0, 1, 10, 100, 1000, 10**4]
        gaps = np.abs(curve_direct(law, n) - endpoint(law))
        assert np.all(gaps <= [bridge_bound(cond, k) for k in n])
        assert np.all(gaps <= [density_bridge_bound(1.0, k) for k in n])

    def test_dominance_gap_laws(self, rng):
        for _ in range(10):
            law = random_discrete_law(rng)
            delta_gap = float(np.min(np.abs(law.q - 0.5)))
            n = [0, 2, 10, 50, 300, 2000, 10**4]
            gaps = np.abs(curve(law, 10**4).values[n] - endpoint(law))
            assert np.all(gaps <= [gap_bridge_bound(delta_gap, k) + 1e-15 for k in n])


class TestRateProbe:
    N_LIST = np.unique(np.geomspace(4, 2048, 24).astype(int))

    @pytest.mark.parametrize("kappa", [1.0, 2.0])
    def test_slope(self, kappa):
        res = rate_sharpness_probe(MarginCondition(2.0, kappa, 0.5), self.N_LIST)
        assert res.slope == pytest.approx(-kappa / 2, abs=0.1)
        assert res.polynomial
        assert res.meta["smallest_usable_M"] == 9

    def test_gap_law_not_polynomial(self):
        res = rate_sharpness_probe(MarginCondition(2.0, 1.0, 0.5), self.N_LIST, law=delta(0.75))
        assert not res.polynomial
        assert res.slope < -3

    def test_needs_two_decades(self):
        with pytest.raises(ValueError, match="two decades"):
            rate_sharpness_probe(MarginCondition(2.0, 1.0, 0.5), [4, 8, 16])

    def test_degenerate_fit(self):
        with pytest.raises(ValueError, match="degenerate"):
            rate_sharpness_probe(MarginCondition(2.0, 1.0, 0.5), [0, 10, 100], law=delta(0.9))


class TestClassify:
    def test_examples(self):
        assert classify_shape(pushforward(delta(0.75))) == "monotone_up"
        assert classify_shape(pushforward(delta(0.25))) == "monotone_down"
        assert classify_shape(pushforward(make_named("figure1", name="dip then surpass"))) == "mixed"

    def test_density(self):
        assert classify_shape(pushforward(uniform_density())) == "monotone_up"

    def test_monotone_up_curves_are_concave(self, rng):
        seen = 0
        for _ in range(60):
            law = random_discrete_law(rng)
            if classify_shape(pushforward(law)) != "monotone_up":
                continue
            seen += 1
            inc = np.diff(curve(law, 80).values)
            assert np.all(inc >= -1e-12)
            assert np.all(np.diff(inc) <= 1e-12)
        assert seen > 0


class TestOscillation:
    def test_first_signs(self):
        rows = oscillation_signs(3)
        assert rows == [(2, 24, 1), (3, 72, -1)]

    def test_alternation(self):
        rows = oscillation_signs(10)
        assert [s for _, _, s in rows] == [(-1) ** j for j in range(2, 11)]

    def test_cap(self):
        assert len(oscillation_signs(14)) == 13
        with pytest.raises(ValueError):
            oscillation_signs(15)

    def test_increment_signs_follow(self):
        sig = pushforward(make_named("oscillation", j_max=10))
        signs = increment_signs(sig, 3 * 8 * 2**8)
        for j, k, s in oscillation_signs(8):
            assert signs[k - 1] == s

    def test_direction_changes_between_checkpoints(self):
        assert all(changed for _, _, changed in oscillation_sign_changes(2, 8))
