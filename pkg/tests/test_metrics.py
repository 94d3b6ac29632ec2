"""SI-SDR, per-group error, and periodogram contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pald import metrics, noise
from pald.numerics.rng import stream
from pald.synthdata import make_feature_map


class TestSiSdr:
    def test_perfect_reconstruction_capped(self):
        s = stream(0, "s").standard_normal(64)
        assert metrics.si_sdr(s, s) == metrics.SI_SDR_CAP_DB

    def test_scale_invariance_exact(self):
        s = stream(1, "s").standard_normal(64)
        assert metrics.si_sdr(s, 2.0 * s) == metrics.SI_SDR_CAP_DB

    @given(st.floats(min_value=0.05, max_value=20.0))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance_property(self, c):
        rng = stream(2, "s")
        s = rng.standard_normal(32)
        e = s + 0.3 * rng.standard_normal(32)
        assert metrics.si_sdr(s, c * e) == pytest.approx(metrics.si_sdr(s, e), abs=1e-9)

    def test_orthogonal_equal_norm_error_is_zero_db(self):
        s = np.zeros(4)
        s[0] = 2.0
        e = np.zeros(4)
        e[1] = 2.0
        assert metrics.si_sdr(s, s + e) == pytest.approx(0.0, abs=1e-12)

    def test_rotation_invariance(self):
        rng = stream(3, "rot")
        s = rng.standard_normal(16)
        e = s + 0.5 * rng.standard_normal(16)
        q, _ = np.linalg.qr(rng.standard_normal((16, 16)))
        assert metrics.si_sdr(q @ s, q @ e) == pytest.approx(metrics.si_sdr(s, e), abs=1e-9)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            metrics.si_sdr(np.zeros(8), np.ones(8))
        with pytest.raises(ValueError):
            metrics.si_sdr(np.ones(8), np.zeros(8))


class TestGroupError:
    def setup_method(self):
        self.fmap = make_feature_map(4, 3, seed=5)

    def test_identical_inputs_zero(self):
        x = stream(4, "x").standard_normal((6, 12))
        assert np.all(metrics.group_error(x, x, self.fmap) == 0.0)

    def test_error_confined_to_one_group(self):
        x = stream(5, "x").standard_normal(12)
        bump = self.fmap.basis[:, 4] * 0.7  # a group-1 direction (groups of 3)
        e = metrics.group_error(x, x + bump, self.fmap)
        assert e[1] == pytest.approx(0.49, abs=1e-12)
        assert np.allclose(np.delete(e, 1), 0.0, atol=1e-25)

    def test_parseval_total(self):
        rng = stream(6, "x")
        x = rng.standard_normal((5, 12))
        xh = rng.standard_normal((5, 12))
        e = metrics.group_error(x, xh, self.fmap)
        total = np.mean(np.sum((x - xh) ** 2, axis=1))  # basis is complete here
        assert np.sum(e) == pytest.approx(total, abs=1e-10)


class TestPsd:
    def test_sinusoid_concentrates(self):
        n = 256
        t = np.arange(n * 8)
        x = np.sin(2 * np.pi * 16 * t / n)
        p = metrics.psd(x, n)
        assert p[16] / p.sum() > 0.99

    def test_white_noise_flat(self):
        x = stream(7, "w").standard_normal(64 * 10_000)
        p = metrics.psd(x, 64)
        interior = p[1:-1] / np.mean(p[1:-1])
        assert np.all(np.abs(interior - 1.0) < 0.10)

    def test_zero_signal(self):
        assert np.all(metrics.psd(np.zeros(128), 32) == 0.0)

    def test_parseval(self):
        x = stream(8, "p").standard_normal(1024)
        p = metrics.psd(x, 128)
        frames = x[: 1024 // 128 * 128].reshape(-1, 128)
        assert p.sum() == pytest.approx(np.mean(frames ** 2), abs=1e-9)

    def test_nfft_longer_than_signal_rejected(self):
        with pytest.raises(ValueError):
            metrics.psd(np.ones(16), 32)

    def test_noised_latent_psd_decomposition(self):
        """psd(z') ~= (1-t)^2 psd(z) + t^2 gamma^2 flat: ties metrics to noise."""
        rng = stream(9, "mix")
        n_fft = 64
        # colored signal: smooth filter over white noise
        base = rng.standard_normal(n_fft * 4000)
        z = np.convolve(base, np.ones(4) / 2.0, mode="same")
        t = 0.5
        out = noise.noise_latents(z, t, 1.0, rng)
        p_mix = metrics.psd(out.z_prime, n_fft)
        p_sig = metrics.psd(z, n_fft)
        # unit-variance white noise in the sum convention: 2/n per interior
        # one-sided bin, 1/n at DC and Nyquist
        flat = np.full(n_fft // 2 + 1, 2.0 / n_fft)
        flat[0] = flat[-1] = 1.0 / n_fft
        expected = (1 - t) ** 2 * p_sig + t ** 2 * flat
        assert np.allclose(p_mix, expected, rtol=0.12, atol=5e-4)
