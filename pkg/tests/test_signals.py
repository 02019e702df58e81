import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eftqdi.errors import BoundViolation, DegenerateInterval, DimensionMismatch
from eftqdi.harness import regressor_streams
from eftqdi.presets import example_config, regressor_envelope
from eftqdi.signals import (
    BinarySensor,
    GaussianNoise,
    QuantizedChannel,
    ScriptedNoise,
    ScriptedRegressor,
    StateSpaceRegressor,
    cdf,
    channel_transmit,
    density_bounds,
    excitation_report,
    quantize,
    regressor_next,
    sense,
    warn_if_exceeded,
)
from oracles import normal_cdf, normal_pdf

MEAS = GaussianNoise(8.0)


class TestGaussian:
    def test_centre(self):
        assert cdf(MEAS, 0.0) == 0.5

    def test_one_std(self):
        assert cdf(MEAS, 8.0) == pytest.approx(normal_cdf(1.0), abs=1e-14)
        assert cdf(MEAS, 8.0) == pytest.approx(0.841344746068543, abs=1e-12)
        assert cdf(MEAS, -8.0) == pytest.approx(0.158655253931457, abs=1e-12)

    def test_grid_against_series_oracle(self):
        xs = np.linspace(-64.0, 64.0, 10_000)
        got = MEAS.cdf(xs)
        ref = np.array([normal_cdf(x, 8.0) for x in xs])
        assert np.max(np.abs(got - ref)) <= 1e-10

    def test_oracle_agrees_with_stdlib(self):
        for x in np.linspace(-7, 7, 301):
            assert normal_cdf(x) == pytest.approx(0.5 * math.erfc(-x / math.sqrt(2)), abs=1e-11)

    @given(st.floats(-100, 100), st.floats(-100, 100))
    def test_monotone(self, x, y):
        lo, hi = sorted((x, y))
        assert MEAS.cdf(lo) <= MEAS.cdf(hi)

    @given(st.floats(-100, 100), st.floats(0.1, 20))
    def test_symmetry(self, x, std):
        g = GaussianNoise(std)
        assert abs(g.cdf(-x) + g.cdf(x) - 1.0) <= 1e-12

    def test_pdf(self):
        assert MEAS.pdf(3.0) == pytest.approx(normal_pdf(3.0, 8.0), rel=1e-14)

    def test_invalid_std(self):
        with pytest.raises(ValueError):
            GaussianNoise(0.0)


class TestDensityBounds:
    def test_unit_interval(self):
        lo, hi = density_bounds(GaussianNoise(1.0), 0.0, 1.0)
        assert hi == pytest.approx(0.3989422804014327, abs=1e-15)
        assert lo == pytest.approx(0.24197072451914337, abs=1e-15)

    def test_tiny_radius_collapses(self):
        lo, hi = density_bounds(GaussianNoise(1.0), 0.0, 1e-12)
        assert lo == pytest.approx(hi, rel=1e-12)

    def test_example_lower_bound_is_farthest_point(self):
        radius = 74.0 * math.sqrt(12.0)
        lo, hi = density_bounds(MEAS, 1.0, radius)
        assert lo == pytest.approx(normal_pdf(1.0 + radius, 8.0), rel=1e-12)
        grid = np.linspace(1.0 - radius, 1.0 + radius, 20001)
        assert lo <= MEAS.pdf(grid).min() * (1 + 1e-12)
        assert hi == pytest.approx(MEAS.pdf(grid).max(), rel=1e-6)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_degenerate(self, r):
        with pytest.raises(DegenerateInterval):
            density_bounds(MEAS, 0.0, r)


class TestRegressors:
    def example_node(self, i, halfwidth=0.1):
        spec = example_config(1, horizon=10).regressors[i]
        return StateSpaceRegressor(spec.A, spec.B, spec.C, spec.x0, halfwidth)

    def test_node_one_noiseless_step(self):
        np.testing.assert_array_equal(self.example_node(0, 0.0).advance(0.0), [1.3, 0.0, 0.0])

    def test_node_four_mirrors_node_one(self):
        np.testing.assert_array_equal(self.example_node(3, 0.0).advance(0.0), [-1.3, 0.0, 0.0])

    def test_zero_dynamics(self):
        g = StateSpaceRegressor([0, 0], [0, 0], [1, 1], [5.0, -2.0], 0.0)
        for _ in range(3):
            np.testing.assert_array_equal(g.advance(0.0), [0.0, 0.0])

    def test_strict_bound(self):
        g = StateSpaceRegressor([1.0], [1.0], [1.0], [1.0], 0.0, phi_bar=1.5, strict=True)
        g.advance(0.4)
        with pytest.raises(BoundViolation):
            g.advance(0.4)

    def test_monitor_records_maximum(self):
        g = StateSpaceRegressor([1.0], [1.0], [1.0], [0.0], 0.0, phi_bar=1.0)
        for eta in (0.5, 1.5, -3.0):
            g.advance(eta)
        assert g.realized_max == 2.0  # state 0.5, 2.0, -1.0

    def test_scripted(self):
        g = ScriptedRegressor([[1.0, 0.0], [0.0, 2.0]], phi_bar=3.0)
        out = [regressor_next(g, None) for _ in range(3)]
        np.testing.assert_array_equal(out[2], [1.0, 0.0])
        with pytest.raises(BoundViolation):
            regressor_next(ScriptedRegressor([[4.0, 0.0]], phi_bar=3.0), None)

    def test_warn_if_exceeded(self):
        with pytest.warns(RuntimeWarning):
            assert warn_if_exceeded(2.0, 1.0)
        assert not warn_if_exceeded(1.0, 1.0)

    def test_example_model_stays_within_envelope(self):
        K = 10_000
        cfg = example_config(1, horizon=K)
        bound = regressor_envelope(K)
        for rep in range(5):
            phis = regressor_streams(cfg, K, rep=rep)
            assert np.sqrt((phis**2).sum(axis=-1)).max() <= bound

    def test_innovations_are_bounded(self):
        g = self.example_node(1)
        rng = np.random.default_rng(1)
        etas = [g.draw_innovation(rng) for _ in range(1000)]
        assert max(abs(e) for e in etas) <= 0.1


class TestQuantizers:
    def test_sensor_below_threshold(self):
        s = BinarySensor(1.0, ScriptedNoise([0.0]))
        assert sense(s, [1.0, 0.0], [0.0, 5.0]) == 1

    def test_sensor_above_threshold(self):
        s = BinarySensor(1.0, ScriptedNoise([0.0]))
        assert sense(s, [1.0, 0.0], [2.0, 0.0]) == 0

    def test_tie_gives_one(self):
        assert quantize(1.0, 0.0, 1.0) == 1

    @pytest.mark.parametrize("encoded,bit", [(-1.0, 1), (1.0, 0)])
    def test_channel(self, encoded, bit):
        ch = QuantizedChannel(0.0, ScriptedNoise([0.0]))
        assert channel_transmit(ch, encoded) == bit

    def test_channel_mean_matches_cdf(self):
        M = 100_000
        ch = QuantizedChannel(0.0, GaussianNoise(1.0))
        rng = np.random.default_rng(5)
        bits = quantize(np.full(M, 0.5), ch.noise.sample(rng, M), 0.0)
        assert abs(bits.mean() - normal_cdf(-0.5)) <= 0.01

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-5, 5))
    def test_outputs_are_bits(self, signal, noise, threshold):
        assert quantize(signal, noise, threshold) in (0, 1)

    def test_scripted_noise_without_law(self):
        with pytest.raises(TypeError):
            ScriptedNoise([0.0]).cdf(0.0)


class TestExcitation:
    def test_single_constant_node_fails(self):
        streams = np.tile([1.0, 0.0, 0.0], (1, 20, 1))
        r = excitation_report(streams, 1)
        assert r.delta_phi_sq == 0.0 and not r.satisfied

    def test_three_basis_nodes(self):
        streams = np.stack([np.tile(e, (10, 1)) for e in np.eye(3)])
        r = excitation_report(streams, 1)
        assert r.delta_phi_sq == pytest.approx(1 / 3, abs=1e-15)
        assert r.satisfied and r.windows == 10

    def test_example_model_satisfied_with_window_two(self):
        cfg = example_config(1, horizon=10)
        r = excitation_report(regressor_streams(cfg, 1001), 2)
        assert r.satisfied and r.delta_phi_sq > 0

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatch):
            excitation_report(np.zeros((3, 4)), 1)
        with pytest.raises(DimensionMismatch):
            excitation_report([np.zeros((4, 2)), np.zeros((5, 2))], 1)
        with pytest.raises(DimensionMismatch):
            excitation_report(np.zeros((1, 4, 2)), 1, horizon=5)

    @given(st.integers(0, 2**32), st.integers(1, 4), st.integers(1, 3))
    def test_adding_a_node_never_lowers_total_gram(self, seed, m, h):
        # the node-averaged bound can drop when a weak node joins; the summed
        # Gram (m * delta) cannot
        rng = np.random.default_rng(seed)
        streams = rng.normal(size=(m + 1, 12, 3))
        before = excitation_report(streams[:m], h).delta_phi_sq * m
        after = excitation_report(streams, h).delta_phi_sq * (m + 1)
        assert after >= before - 1e-12
