import math

import numpy as np
import pytest

from pfcocycle import maps
from pfcocycle.errors import PerturbationLeavesClass
from pfcocycle.maps import CircleMap, LyClassParams


class TestEval:
    def test_pure_doubling_derivative(self):
        t = CircleMap(2)
        x = np.linspace(0, 1, 7)
        assert np.allclose(t.eval(x, 1), 2.0)

    def test_first_derivative_closed_form(self):
        t = CircleMap(2, ((1, 0.1, 0.0),))
        assert t.eval(0.0, 1) == pytest.approx(2.0 + 0.2 * math.pi)

    def test_second_derivative_vs_finite_differences(self):
        # central finite differences of the first derivative as oracle
        t = CircleMap(2, ((1, 0.1, 0.0),))
        h = 1e-5
        for x in (0.25, 0.1, 0.77):
            fd = (t.eval(x + h, 1) - t.eval(x - h, 1)) / (2 * h)
            assert t.eval(x, 2) == pytest.approx(fd, abs=1e-6)

    def test_value_is_mod_one(self):
        t = CircleMap(3, ((2, 0.05, 0.3),))
        x = np.linspace(0, 1, 33)
        v = t.eval(x, 0)
        assert np.all((0.0 <= v) & (v < 1.0))
        assert np.allclose(np.mod(t.lift(x), 1.0), v)

    def test_higher_orders_vanish_without_harmonics(self):
        t = CircleMap(4)
        assert np.allclose(t.eval(np.array([0.1, 0.9]), 3), 0.0)


class TestValidate:
    def test_doubling_map_passes(self):
        rep = maps.validate(CircleMap(2), LyClassParams(2, 0.5, 10.0))
        assert rep.ok
        assert rep.inf_deriv == pytest.approx(2.0)

    def test_large_harmonic_breaks_expansion(self):
        # min T' = 2 - 0.6 pi < 2 = 1/alpha
        rep = maps.validate(CircleMap(2, ((1, 0.3, 0.0),)), LyClassParams(2, 0.5, 10.0))
        assert not rep.ok

    def test_grid_minimum_matches_closed_form(self):
        # min T' = 3 - 0.2 pi =~ 2.3717, so any alpha above 1/2.3717 accepts
        t = CircleMap(3, ((2, 0.05, 0.0),))  # T = 3x + 0.05 sin(4 pi x)
        rep = maps.validate(t, LyClassParams(2, 0.45, 20.0), grid=4096)
        assert rep.ok
        assert rep.inf_deriv == pytest.approx(3.0 - 0.2 * math.pi, abs=1e-6)

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            maps.validate(CircleMap(2), LyClassParams(2, 0.5, 10.0), grid=16)

    def test_monotone_in_class_bounds(self, rng):
        # enlarging K or alpha never flips ok from True to False
        for _ in range(30):
            deg = int(rng.integers(2, 4))
            t = CircleMap(deg, ((int(rng.integers(1, 4)), float(rng.uniform(0, 0.1)), float(rng.uniform(0, 6))),))
            alpha = float(rng.uniform(0.3, 0.9))
            big_k = float(rng.uniform(1.0, 12.0))
            before = maps.validate(t, LyClassParams(2, alpha, big_k)).ok
            after = maps.validate(t, LyClassParams(2, min(0.95, alpha * 1.2), big_k * 2.0)).ok
            assert after or not before


class TestCkDistance:
    def test_identical_maps(self, two_maps):
        for t in two_maps:
            assert maps.ck_distance(t, t, 3) == 0.0

    def test_single_harmonic_closed_form(self):
        eps = 1e-3
        t, s = CircleMap(2), CircleMap(2, ((1, eps, 0.0),))
        assert maps.ck_distance(t, s, 1) == pytest.approx(2 * math.pi * eps, rel=1e-9)

    def test_degree_mismatch_is_infinite(self):
        assert maps.ck_distance(CircleMap(2), CircleMap(3), 1) == math.inf

    def test_pseudometric_on_grid(self, rng):
        ts = [
            CircleMap(2, ((1, float(rng.uniform(0, 0.05)), float(rng.uniform(0, 6))),))
            for _ in range(3)
        ]
        d01 = maps.ck_distance(ts[0], ts[1], 1)
        d10 = maps.ck_distance(ts[1], ts[0], 1)
        assert d01 == pytest.approx(d10, rel=1e-12)
        d02 = maps.ck_distance(ts[0], ts[2], 1)
        d12 = maps.ck_distance(ts[1], ts[2], 1)
        assert d02 <= d01 + d12 + 1e-12


class TestPerturb:
    def test_zero_size_returns_same_map(self, two_maps, class_params):
        assert maps.perturb(two_maps[0], 0.0, "amplitude", class_params, seed=1) is two_maps[0]

    def test_new_harmonic_hits_target_distance(self, class_params):
        t = CircleMap(3, ((1, 0.05, 0.0),))
        eps = 1e-3
        s = maps.perturb(t, eps, "new-harmonic", class_params, seed=4, harmonic=1)
        d = maps.ck_distance(t, s, class_params.k - 1)
        assert 0.5 * eps <= d <= 2.0 * eps
        assert d == pytest.approx(eps, rel=1e-9)

    def test_large_perturbation_leaves_class(self):
        with pytest.raises(PerturbationLeavesClass):
            maps.perturb(CircleMap(2), 1.0, "new-harmonic", LyClassParams(2, 0.5, 10.0), seed=0)

    @pytest.mark.parametrize("mode", ["amplitude", "phase", "new-harmonic"])
    def test_distance_scales_linearly(self, mode, class_params):
        t = CircleMap(3, ((1, 0.05, 0.0),))
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3, 1e-4):
            s = maps.perturb(t, eps, mode, class_params, seed=8)
            ratios.append(maps.ck_distance(t, s, class_params.k - 1) / eps)
        for r in ratios[1:]:
            assert r == pytest.approx(ratios[0], rel=1e-9)

    def test_amplitude_mode_needs_a_harmonic(self, class_params):
        with pytest.raises(ValueError):
            maps.perturb(CircleMap(2), 1e-3, "amplitude", class_params, seed=0)

    def test_unknown_mode_rejected(self, two_maps, class_params):
        with pytest.raises(ValueError):
            maps.perturb(two_maps[0], 1e-3, "wiggle", class_params, seed=0)


class TestSerialization:
    def test_spec_round_trip_bit_exact(self, two_maps):
        for t in two_maps:
            s = CircleMap.from_spec(t.to_spec())
            assert s == t

    def test_json_round_trip(self):
        import json

        t = CircleMap(3, ((2, 0.12345678901234567, 1.9),))
        blob = json.dumps(t.to_spec())
        assert CircleMap.from_spec(json.loads(blob)) == t


class TestParams:
    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            LyClassParams(1, 0.5, 10.0)
        with pytest.raises(ValueError):
            LyClassParams(2, 1.5, 10.0)
        with pytest.raises(ValueError):
            LyClassParams(2, 0.5, -1.0)

    def test_degree_and_harmonics_validated(self):
        with pytest.raises(ValueError):
            CircleMap(1)
        with pytest.raises(ValueError):
            CircleMap(2, ((0, 0.1, 0.0),))
