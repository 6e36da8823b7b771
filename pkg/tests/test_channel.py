import math

import numpy as np
import pytest
from scipy import stats

import oracles
from cvqkd import channel as ch
from cvqkd.mathcore import DomainError, RandomStream, integrate


class TestFromLossDb:
    def test_no_loss(self):
        assert ch.from_loss_db(0.0).transmittance == 1.0

    def test_one_decade(self):
        assert ch.from_loss_db(10.0).transmittance == pytest.approx(0.1, abs=1e-15)

    def test_fractional(self):
        assert ch.from_loss_db(1.4).transmittance == pytest.approx(0.7244, abs=1e-4)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            ch.from_loss_db(-0.1)


class TestSamplePair:
    MOD = ch.ModulationSpec(variance=31.0)

    def test_modulation_variance(self):
        n = 10 ** 6
        x, _ = ch.sample_pair(self.MOD, ch.from_loss_db(0.3), RandomStream(1), n)
        v = self.MOD.variance
        assert np.var(x) == pytest.approx(v, abs=4 * math.sqrt(2 / n) * v)

    def test_cross_correlation_identity_channel(self):
        n = 10 ** 6
        model = ch.ChannelModel(transmittance=1.0)
        x, xp = ch.sample_pair(self.MOD, model, RandomStream(2), n)
        # E[x x'] = sqrt(eta) V; standard error of the product-moment.
        se = math.sqrt(np.var(x * xp) / n)
        assert np.mean(x * xp) == pytest.approx(31.0, abs=4 * se)

    def test_deterministic_under_stream(self):
        model = ch.from_loss_db(0.7)
        a = ch.sample_pair(self.MOD, model, RandomStream(3, 9), 256)
        b = ch.sample_pair(self.MOD, model, RandomStream(3, 9), 256)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_conditional_residuals_normal(self):
        n = 10 ** 5
        model = ch.ChannelModel(transmittance=0.8, excess_noise=0.5)
        x, xp = ch.sample_pair(self.MOD, model, RandomStream(4), n)
        resid = (xp - math.sqrt(0.8) * x) / math.sqrt(model.noise_variance)
        assert stats.kstest(resid, "norm").pvalue > 0.01


class TestEveOverlapKernel:
    def test_identical_inputs(self):
        model = ch.ChannelModel(transmittance=0.6)
        for x in (-4.0, 0.0, 2.5):
            assert ch.eve_overlap_kernel(x, x, model) == 1.0

    def test_unit_transmittance_decouples(self):
        model = ch.ChannelModel(transmittance=1.0)
        assert ch.eve_overlap_kernel(-3.0, 7.0, model) == 1.0

    def test_half_transmittance_value(self):
        model = ch.ChannelModel(transmittance=0.5)
        assert ch.eve_overlap_kernel(0.0, 2.0, model) == pytest.approx(
            math.exp(-0.25), abs=1e-12
        )

    def test_symmetry_and_bounds(self):
        model = ch.ChannelModel(transmittance=0.33)
        xs = np.linspace(-6, 6, 13)
        k = ch.eve_overlap_kernel(xs[:, None], xs[None, :], model)
        assert np.allclose(k, k.T)
        assert np.all(k > 0) and np.all(k <= 1)
        off = ~np.eye(13, dtype=bool)
        assert np.all(k[off] < 1)

    def test_matches_fock_oracle(self):
        model = ch.ChannelModel(transmittance=0.5)
        xs = np.linspace(-6, 6, 10)
        for x1 in xs:
            for x2 in xs:
                assert ch.eve_overlap_kernel(x1, x2, model) == pytest.approx(
                    oracles.coherent_overlap_fock(x1, x2, 0.5), abs=1e-6
                )


class TestBobWavefunction:
    @pytest.mark.parametrize("x", [0.0, 3.0, -7.0])
    def test_normalized(self, x):
        model = ch.ChannelModel(transmittance=0.8)
        val = integrate(
            lambda xp: ch.bob_wavefunction(xp, x, model) ** 2,
            (math.sqrt(0.8) * x - 10, math.sqrt(0.8) * x + 10),
            rel_tol=1e-11,
        )
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_peak_at_scaled_mean(self):
        model = ch.ChannelModel(transmittance=0.49)
        x = 4.0
        mu = math.sqrt(0.49) * x
        grid = np.linspace(mu - 3, mu + 3, 601)
        amp = ch.bob_wavefunction(grid, x, model)
        assert grid[np.argmax(amp)] == pytest.approx(mu, abs=0.01)

    def test_vacuum_variance_ratio(self):
        model = ch.ChannelModel(transmittance=1.0)
        ratio = ch.bob_wavefunction(1.0, 0.0, model) ** 2 / ch.bob_wavefunction(
            0.0, 0.0, model
        ) ** 2
        assert ratio == pytest.approx(math.exp(-0.5), abs=1e-9)

    def test_excess_noise_rejected(self):
        model = ch.ChannelModel(transmittance=0.9, excess_noise=0.1)
        with pytest.raises(DomainError):
            ch.bob_wavefunction(0.0, 0.0, model)


class TestMutualInformation:
    MOD = ch.ModulationSpec(variance=31.0)

    def test_lossless_benchmark(self):
        assert ch.mutual_information(
            self.MOD, ch.ChannelModel(transmittance=1.0)
        ) == pytest.approx(2.5, abs=1e-12)

    def test_vanishes_without_signal(self):
        val = ch.mutual_information(self.MOD, ch.ChannelModel(transmittance=1e-12))
        assert val == pytest.approx(0.0, abs=1e-10)

    def test_half_transmittance(self):
        val = ch.mutual_information(self.MOD, ch.ChannelModel(transmittance=0.5))
        assert val == pytest.approx(2.022, abs=1e-3)

    def test_monotonicity(self):
        etas = np.linspace(0.05, 1.0, 20)
        vals = [
            ch.mutual_information(self.MOD, ch.ChannelModel(transmittance=e))
            for e in etas
        ]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        variances = np.linspace(1.0, 60.0, 20)
        model = ch.ChannelModel(transmittance=0.7)
        vals = [
            ch.mutual_information(ch.ModulationSpec(variance=v), model)
            for v in variances
        ]
        assert all(b > a for a, b in zip(vals, vals[1:]))
