"""Channel model tests: steering vectors, path loss, fading evolution."""

import numpy as np
import pytest

from jamnull import channel
from jamnull.errors import ConfigError, NumericInputError
from jamnull.linalg import make_rng

ULA8 = channel.ArrayGeometry(8)
ULA12 = channel.ArrayGeometry(12)

# Okumura-Hata suburban closed form evaluated once by an independent
# reference script and frozen (447 MHz, heights 50/2 m, 100 m).
PATHLOSS_BS_UE_DB = 72.23919865961643
PATHLOSS_JAM_UE_DB = 82.40222252266214


class TestSteeringVector:
    def test_broadside_all_ones(self):
        a = channel.steering_vector(0.0, ULA8)
        np.testing.assert_allclose(a, np.ones(8), atol=1e-15)

    def test_unit_modulus_and_first_element(self):
        rng = np.random.default_rng(1)
        for ang in rng.uniform(-np.pi / 2, np.pi / 2, 20):
            a = channel.steering_vector(ang, ULA12)
            np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)
            assert a[0] == 1.0 + 0.0j

    def test_elementwise_formula(self):
        # independent scalar-loop evaluation of the same closed form
        ang = 0.7
        a = channel.steering_vector(ang, ULA8)
        for i in range(8):
            want = np.exp(-1j * 2 * np.pi * 0.5 * i * np.sin(ang))
            assert abs(a[i] - want) < 1e-12

    def test_rejects_nan(self):
        with pytest.raises(NumericInputError):
            channel.steering_vector(float("nan"), ULA8)


class TestCost231:
    def test_frozen_bs_ue_value(self):
        link = channel.LinkGeometry(447.0, 50.0, 2.0, 100.0, "suburban")
        assert channel.cost231_pathloss_db(link) == pytest.approx(
            PATHLOSS_BS_UE_DB, abs=1e-9
        )

    def test_frozen_jammer_ue_value(self):
        link = channel.LinkGeometry(447.0, 2.0, 2.0, 100.0, "suburban")
        assert channel.cost231_pathloss_db(link) == pytest.approx(
            PATHLOSS_JAM_UE_DB, abs=1e-9
        )

    def test_monotone_in_distance(self):
        losses = [
            channel.cost231_pathloss_db(
                channel.LinkGeometry(447.0, 50.0, 2.0, d, "suburban")
            )
            for d in (50.0, 100.0, 500.0, 2000.0)
        ]
        assert all(a < b for a, b in zip(losses, losses[1:]))

    def test_suburban_below_urban(self):
        urban = channel.cost231_pathloss_db(
            channel.LinkGeometry(447.0, 50.0, 2.0, 100.0, "urban")
        )
        sub = channel.cost231_pathloss_db(
            channel.LinkGeometry(447.0, 50.0, 2.0, 100.0, "suburban")
        )
        assert sub < urban

    def test_warns_outside_validity(self):
        with pytest.warns(UserWarning):
            channel.cost231_pathloss_db(
                channel.LinkGeometry(100.0, 50.0, 2.0, 100.0, "suburban")
            )

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(NumericInputError):
            channel.cost231_pathloss_db(
                channel.LinkGeometry(447.0, 50.0, 2.0, 0.0, "suburban")
            )

    def test_high_band_branch(self):
        loss = channel.cost231_pathloss_db(
            channel.LinkGeometry(1800.0, 50.0, 2.0, 1000.0, "urban")
        )
        metro = channel.cost231_pathloss_db(
            channel.LinkGeometry(1800.0, 50.0, 2.0, 1000.0, "metropolitan")
        )
        assert metro == pytest.approx(loss + 3.0, abs=1e-12)


class TestFading:
    def test_entry_variance_monte_carlo(self):
        # per-entry variance of H must be 1/eta; eta=1 here
        rng = make_rng(42)
        proto = channel.draw_fading_state(rng, 8, 1.0, 8.28, 400e3)
        acc = 0.0
        n = 4000
        for _ in range(n):
            h = channel.sample_channel(rng, proto, ULA8, ULA12)
            acc += np.mean(np.abs(h) ** 2)
        assert acc / n == pytest.approx(1.0, abs=0.05)

    def test_jammer_column_shape_and_variance(self):
        rng = make_rng(43)
        proto = channel.draw_fading_state(rng, 8, 4.0, 8.28, 400e3, has_tx_array=False)
        acc = 0.0
        n = 4000
        for _ in range(n):
            z = channel.sample_channel(rng, proto, ULA8, None)
            assert z.shape == (8, 1)
            acc += np.mean(np.abs(z) ** 2)
        assert acc / n == pytest.approx(0.25, abs=0.02)

    def test_zero_doppler_static(self):
        rng = make_rng(44)
        st = channel.draw_fading_state(rng, 8, 1.0, 0.0, 400e3)
        h0 = channel.channel_matrix(st, ULA8, ULA12)
        h1 = channel.channel_matrix(channel.evolve_fading(st, 123_456), ULA8, ULA12)
        assert np.array_equal(h0, h1)

    def test_evolution_composes(self):
        rng = make_rng(45)
        st = channel.draw_fading_state(rng, 8, 8.28, 1.0, 400e3)
        a = channel.evolve_fading(channel.evolve_fading(st, 300), 700)
        b = channel.evolve_fading(st, 1000)
        assert a.t_samples == b.t_samples
        ga = channel.channel_matrix(a, ULA8, ULA12)
        gb = channel.channel_matrix(b, ULA8, ULA12)
        assert np.array_equal(ga, gb)

    def test_autocorrelation_slow_fading(self):
        # 1 ms at F_d = 8.28 Hz: normalized autocorrelation >= 0.95
        rng = make_rng(46)
        lag = 400  # samples at 400 kHz = 1 ms
        num = 0.0
        den = 0.0
        for _ in range(500):
            st = channel.draw_fading_state(rng, 8, 1.0, 8.28, 400e3)
            g0 = st.path_gains()
            g1 = channel.evolve_fading(st, lag).path_gains()
            num += np.real(np.vdot(g0, g1))
            den += np.real(np.vdot(g0, g0))
        assert num / den >= 0.95

    def test_variance_preserved_after_long_evolution(self):
        # expectation across states at t = 1e6 samples matches t = 0
        rng = make_rng(47)
        var0 = 0.0
        var1 = 0.0
        n = 1500
        for _ in range(n):
            st = channel.draw_fading_state(rng, 8, 1.0, 8.28, 400e3)
            h0 = channel.channel_matrix(st, ULA8, ULA12)
            h1 = channel.channel_matrix(
                channel.evolve_fading(st, 1_000_000), ULA8, ULA12
            )
            var0 += np.mean(np.abs(h0) ** 2)
            var1 += np.mean(np.abs(h1) ** 2)
        assert var1 / var0 == pytest.approx(1.0, abs=0.05)

    def test_rejects_negative_evolution(self):
        rng = make_rng(48)
        st = channel.draw_fading_state(rng, 2, 1.0, 8.28, 400e3)
        with pytest.raises(ConfigError):
            channel.evolve_fading(st, -1)

    def test_seeded_reproducibility(self):
        a = channel.draw_fading_state(make_rng(9), 8, 2.0, 8.28, 400e3)
        b = channel.draw_fading_state(make_rng(9), 8, 2.0, 8.28, 400e3)
        assert np.array_equal(
            channel.channel_matrix(a, ULA8, ULA12),
            channel.channel_matrix(b, ULA8, ULA12),
        )
