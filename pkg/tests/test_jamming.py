"""Jamming model tests: schedules, covariance synthesis, sampling
statistics, and the virtual-change factor."""

import numpy as np
import pytest

from jamnull import jamming
from jamnull.errors import ConfigError, ShapeError
from jamnull.linalg import make_rng

DOWN = jamming.CorrelationSchedule()  # defaults: sawtooth-down, 5000, 1.0..0.8


def model_with_rho(rho, variances=(1.0, 1.0)):
    sched = jamming.CorrelationSchedule(kind="constant", rho_max=rho)
    return jamming.JammerModel(variances=variances, schedule=sched)


class TestSchedule:
    def test_sawtooth_down_anchor_points(self):
        assert jamming.rho_at(DOWN, 0) == pytest.approx(1.0)
        assert jamming.rho_at(DOWN, 2500) == pytest.approx(0.9)
        assert jamming.rho_at(DOWN, 4999) == pytest.approx(0.8 + 0.2 / 5000.0)
        assert jamming.rho_at(DOWN, 5000) == pytest.approx(1.0)

    def test_linear_in_between(self):
        p = np.arange(0, 5000)
        rho = jamming.rho_at(DOWN, p)
        np.testing.assert_allclose(rho, 1.0 - 0.2 * p / 5000.0, atol=1e-12)

    def test_switch_flips_direction(self):
        sched = jamming.CorrelationSchedule(switch_sample=10_000)
        assert jamming.rho_at(sched, 9_999) == pytest.approx(1.0 - 0.2 * 4999 / 5000)
        assert jamming.rho_at(sched, 10_000) == pytest.approx(0.8)
        assert jamming.rho_at(sched, 12_500) == pytest.approx(0.9)
        assert jamming.rho_at(sched, 15_000) == pytest.approx(0.8)

    def test_constant(self):
        sched = jamming.CorrelationSchedule(kind="constant", rho_max=0.65)
        assert jamming.rho_at(sched, 0) == 0.65
        assert jamming.rho_at(sched, 10**9) == 0.65

    def test_table_cycles(self):
        sched = jamming.CorrelationSchedule(kind="table", table=(0.1, 0.2, 0.3))
        assert jamming.rho_at(sched, 4) == pytest.approx(0.2)

    def test_rejects_bad_kind_and_rho(self):
        with pytest.raises(ConfigError):
            jamming.CorrelationSchedule(kind="triangle")
        with pytest.raises(ConfigError):
            jamming.CorrelationSchedule(rho_max=1.5)

    def test_rejects_negative_index(self):
        with pytest.raises(ConfigError):
            jamming.rho_at(DOWN, -1)


class TestSigma:
    def test_structure(self):
        model = model_with_rho(0.5, variances=(4.0, 1.0))
        sig = jamming.build_sigma_j(model, 0)
        assert sig[0, 0] == pytest.approx(4.0)
        assert sig[1, 1] == pytest.approx(1.0)
        assert sig[0, 1] == pytest.approx(0.5 * 2.0 * 1.0)
        assert np.allclose(sig, sig.conj().T)

    def test_rank_deficient_at_unit_rho(self):
        sig = jamming.build_sigma_j(model_with_rho(1.0), 0)
        w = np.linalg.eigvalsh(sig)
        assert w[0] == pytest.approx(0.0, abs=1e-12)

    def test_average_matches_schedule_mean(self):
        model = jamming.JammerModel(schedule=DOWN)
        sig = jamming.average_sigma_j(model, 0, 5000)
        rho_bar = np.mean(jamming.rho_at(DOWN, np.arange(5000)))
        assert sig[0, 1].real == pytest.approx(rho_bar, abs=1e-12)


class TestSampling:
    def test_pearson_estimate_recovers_rho(self):
        # sample correlation estimator over a long constant-rho block
        rng = make_rng(101)
        model = model_with_rho(0.7, variances=(2.0, 0.5))
        x = jamming.sample_jamming_block(rng, model, 0, 200_000)
        num = np.mean(x[0] * np.conj(x[1]))
        den = np.sqrt(np.mean(np.abs(x[0]) ** 2) * np.mean(np.abs(x[1]) ** 2))
        assert (num / den).real == pytest.approx(0.7, abs=0.01)
        assert abs((num / den).imag) < 0.01

    def test_unit_rho_capped_not_crashing(self):
        rng = make_rng(102)
        x = jamming.sample_jamming_block(rng, model_with_rho(1.0), 0, 50_000)
        num = np.mean(x[0] * np.conj(x[1]))
        den = np.sqrt(np.mean(np.abs(x[0]) ** 2) * np.mean(np.abs(x[1]) ** 2))
        assert (num / den).real > 0.99

    def test_variances_recovered(self):
        rng = make_rng(103)
        model = model_with_rho(0.3, variances=(3.0, 1.0))
        x = jamming.sample_jamming_block(rng, model, 0, 200_000)
        assert np.mean(np.abs(x[0]) ** 2) == pytest.approx(3.0, rel=0.02)
        assert np.mean(np.abs(x[1]) ** 2) == pytest.approx(1.0, rel=0.02)

    def test_zero_variance_gives_zero_block(self):
        rng = make_rng(104)
        x = jamming.sample_jamming_block(
            rng, model_with_rho(0.9, variances=(0.0, 0.0)), 0, 100
        )
        np.testing.assert_allclose(x, 0.0, atol=1e-14)

    def test_mean_offset(self):
        rng = make_rng(105)
        model = jamming.JammerModel(
            variances=(1.0, 1.0),
            mean=(2.0 + 1.0j, -1.0),
            schedule=jamming.CorrelationSchedule(kind="constant", rho_max=0.0),
        )
        x = jamming.sample_jamming_block(rng, model, 0, 100_000)
        np.testing.assert_allclose(
            x.mean(axis=1), [2.0 + 1.0j, -1.0], atol=0.02
        )

    def test_schedule_tracked_within_block(self):
        # early samples of the default schedule are near rho=1, late near 0.8
        rng = make_rng(106)
        model = jamming.JammerModel(schedule=DOWN)
        acc_early = []
        acc_late = []
        for _ in range(4000):
            x = jamming.sample_jamming_block(rng, model, 0, 5000, stride=1)
            acc_early.append(x[0, :100] * np.conj(x[1, :100]))
            acc_late.append(x[0, -100:] * np.conj(x[1, -100:]))
        rho_early = np.mean(np.concatenate(acc_early)).real
        rho_late = np.mean(np.concatenate(acc_late)).real
        assert rho_early == pytest.approx(0.999, abs=0.01)
        assert rho_late == pytest.approx(0.802, abs=0.01)

    def test_seeded_reproducibility(self):
        model = jamming.JammerModel(schedule=DOWN)
        a = jamming.sample_jamming_block(make_rng(7), model, 123, 256)
        b = jamming.sample_jamming_block(make_rng(7), model, 123, 256)
        assert np.array_equal(a, b)


def sigma2(rho, v1=1.0, v2=1.0):
    s = np.sqrt(v1 * v2)
    return np.array([[v1, rho * s], [rho * s, v2]], dtype=complex)


def oracle_d_2x2(rho_e, rho_d):
    """Closed-form D for equal-variance 2x2 covariances: shared
    eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2 with eigenvalues 1+-rho."""
    v = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    lam = np.diag(
        [
            np.sqrt((1 + rho_d) / (1 + rho_e)),
            np.sqrt((1 - rho_d) / (1 - rho_e)),
        ]
    )
    return v @ lam @ v.T


class TestVirtualChange:
    def test_identity_on_equal_random_psd(self):
        rng = np.random.default_rng(201)
        for _ in range(100):
            nj = int(rng.integers(2, 4))
            b = rng.standard_normal((nj, nj)) + 1j * rng.standard_normal((nj, nj))
            sigma = b @ b.conj().T
            vc = jamming.virtual_change_factor(sigma, sigma)
            assert np.linalg.norm(vc.d - np.eye(nj), "fro") < 1e-9

    def test_matches_2x2_closed_form(self):
        for rho_e, rho_d in [(0.9, 0.8), (0.5, 0.95), (0.99, 0.8)]:
            vc = jamming.virtual_change_factor(sigma2(rho_e), sigma2(rho_d))
            np.testing.assert_allclose(vc.d, oracle_d_2x2(rho_e, rho_d), atol=1e-10)

    def test_blowup_monotone_toward_unit_rho(self):
        rho_d = 0.8
        maxima = []
        for rho_e in (0.8, 0.9, 0.99, 0.999, 0.9999):
            vc = jamming.virtual_change_factor(sigma2(rho_e), sigma2(rho_d))
            maxima.append(vc.max_abs_entry)
        assert maxima[0] == pytest.approx(1.0, abs=1e-9)
        assert all(a < b for a, b in zip(maxima, maxima[1:]))
        assert maxima[-1] / maxima[1] >= 5.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            jamming.virtual_change_factor(sigma2(0.5), np.eye(3, dtype=complex))

    def test_non_hermitian_rejected(self):
        bad = np.array([[1.0, 0.9], [0.1, 1.0]], dtype=complex)
        with pytest.raises(ShapeError):
            jamming.virtual_change_factor(bad, sigma2(0.5))
