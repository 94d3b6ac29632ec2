"""Synthetic generators: hierarchical signals, Markov melodies, EEG."""

import numpy as np
import pytest

from pald import synthdata as sd
from pald.numerics.rng import stream


class TestHierarchical:
    def setup_method(self):
        self.spec = sd.HierarchicalSignalSpec(k_groups=4, group_dim=3, seed=11)

    def test_basis_orthonormal(self):
        fmap = sd.make_feature_map(4, 3, seed=11)
        gram = fmap.basis.T @ fmap.basis
        assert np.allclose(gram, np.eye(12), atol=1e-12)

    def test_per_group_power(self):
        spec = sd.HierarchicalSignalSpec(k_groups=4, group_dim=3,
                                         coeff_std=(2.0, 1.0, 0.5, 0.25), seed=12)
        x, coeffs, fmap = sd.gen_hierarchical(spec, 10_000)
        proj = fmap.project(x)
        power = np.mean(proj ** 2, axis=(0, 2))
        assert np.allclose(power, np.array([4.0, 1.0, 0.25, 0.0625]), rtol=0.05)

    def test_projections_match_coeffs(self):
        x, coeffs, fmap = sd.gen_hierarchical(self.spec, 50)
        assert np.allclose(fmap.project(x), coeffs, atol=1e-10)

    def test_seed_reproducible(self):
        x1, _, _ = sd.gen_hierarchical(self.spec, 20)
        x2, _, _ = sd.gen_hierarchical(self.spec, 20)
        assert np.array_equal(x1, x2)

    def test_bad_stds_rejected(self):
        with pytest.raises(ValueError):
            sd.HierarchicalSignalSpec(k_groups=2, group_dim=2,
                                      coeff_std=(1.0, -1.0)).stds()


def _spec(construction=sd.ALIGNED, **kw):
    trans = sd.make_transition_matrix(8, seed=42)
    args = dict(n_pitches=8, transition=tuple(trans.ravel()), seq_len=24,
                latent_dim=8, pitch_dim=4, construction=construction,
                pitch_power=1.0, nuisance_power=0.25, rotation_seed=7)
    args.update(kw)
    return sd.MarkovMelodySpec(**args)


class TestMelody:
    def test_transition_rows_stochastic(self):
        p = sd.make_transition_matrix(8, seed=1)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0)

    def test_stationary_distribution(self):
        p = sd.make_transition_matrix(6, seed=2)
        pi = sd.stationary_distribution(p)
        assert np.allclose(pi @ p, pi, atol=1e-10)
        assert pi.sum() == pytest.approx(1.0)

    def test_aligned_pitch_power_fraction(self):
        spec = _spec()
        frames, _ = sd.gen_melody_latents(spec, 500, stream(3, "m"))
        pitch_pow = np.mean(np.sum(frames[:, :, :4] ** 2, axis=2))
        total = np.mean(np.sum(frames ** 2, axis=2))
        d_n = spec.latent_dim - spec.pitch_dim
        expected = spec.pitch_power ** 2 / (spec.pitch_power ** 2
                                            + d_n * spec.nuisance_power ** 2)
        assert pitch_pow / total == pytest.approx(expected, rel=0.02)

    def test_unaligned_uniform_power(self):
        spec = _spec(sd.UNALIGNED)
        frames, _ = sd.gen_melody_latents(spec, 800, stream(4, "m"))
        per_dim = np.mean(frames.reshape(-1, 8) ** 2, axis=0)
        assert np.all(np.abs(per_dim / per_dim.mean() - 1.0) < 0.05)

    def test_identity_transition_constant_path(self):
        eye = tuple(np.eye(4).ravel())
        spec = sd.MarkovMelodySpec(n_pitches=4, transition=eye, seq_len=10,
                                   latent_dim=6, pitch_dim=3,
                                   construction=sd.ALIGNED, rotation_seed=1)
        _, pitches = sd.gen_melody_latents(spec, 5, stream(5, "m"))
        assert np.all(pitches == pitches[:, :1])

    def test_constructions_share_pitch_information(self):
        """A fixed linear map recovers the pitch embedding exactly in both."""
        a_spec, u_spec = _spec(), _spec(sd.UNALIGNED)
        fa, pa = sd.gen_melody_latents(a_spec, 20, stream(6, "m"))
        fu, pu = sd.gen_melody_latents(u_spec, 20, stream(6, "m"))
        assert np.array_equal(pa, pu)  # same pitch paths
        t_map = sd.unaligned_map(u_spec)
        recovered = fu @ np.linalg.inv(t_map).T  # undoes rotation and whitening
        assert np.allclose(recovered, fa, atol=1e-9)
        e = sd.pitch_embedding(a_spec)
        pitch_block = recovered[:, :, : a_spec.pitch_dim]
        assert np.allclose(pitch_block, a_spec.pitch_power * e[pa], atol=1e-9)

    def test_unaligned_needs_valid_powers(self):
        with pytest.raises(ValueError):
            _spec(pitch_power=0.1, nuisance_power=0.25)

    def test_bad_transition_rejected(self):
        with pytest.raises(ValueError):
            sd.MarkovMelodySpec(n_pitches=2, transition=(0.5, 0.4, 0.5, 0.5),
                                latent_dim=4, pitch_dim=2).matrix()


class TestOracleIc:
    def test_identity_chain_zero_ic(self):
        eye = tuple(np.eye(4).ravel())
        spec = sd.MarkovMelodySpec(n_pitches=4, transition=eye, seq_len=6,
                                   latent_dim=6, pitch_dim=3)
        ic = sd.oracle_ic(spec, np.array([2, 2, 2, 2]))
        assert np.allclose(ic[1:], 0.0)

    def test_uniform_chain(self):
        uni = tuple(np.full((4, 4), 0.25).ravel())
        spec = sd.MarkovMelodySpec(n_pitches=4, transition=uni, seq_len=6,
                                   latent_dim=6, pitch_dim=3)
        ic = sd.oracle_ic(spec, np.array([0, 3, 1, 2]))
        assert np.allclose(ic, np.log(4))

    def test_rare_transition(self):
        p = np.array([[0.9, 0.1], [0.5, 0.5]])
        spec = sd.MarkovMelodySpec(n_pitches=2, transition=tuple(p.ravel()),
                                   seq_len=4, latent_dim=4, pitch_dim=2)
        ic = sd.oracle_ic(spec, np.array([0, 1]))
        assert ic[1] == pytest.approx(-np.log(0.1))

    def test_empirical_consistency(self):
        """Mean -log frequency of realized transitions matches oracle mean."""
        spec = _spec(seq_len=64)
        _, pitches = sd.gen_melody_latents(spec, 1600, stream(7, "m"))
        ic = sd.oracle_ic(spec, pitches)[:, 1:]
        p = spec.matrix()
        counts = np.zeros((8, 8))
        for row in pitches:
            np.add.at(counts, (row[:-1], row[1:]), 1)
        emp = counts / np.maximum(counts.sum(axis=1, keepdims=True), 1)
        seen = counts > 10
        emp_ic_mean = np.sum(np.where(seen, -np.log(np.maximum(emp, 1e-12)) * emp, 0)
                             * counts.sum(axis=1, keepdims=True))
        emp_ic_mean /= counts.sum()
        assert ic.mean() == pytest.approx(emp_ic_mean, rel=0.02)


class TestSyntheticEEG:
    def test_kernel_support_inside_window(self):
        spec = sd.SyntheticEEGSpec()
        kernels = sd.default_eeg_kernels(spec)
        n_lags = kernels.shape[2]
        assert n_lags / spec.sample_rate <= 0.700  # inside the nominal lag window

    def test_uncoupled_channels_have_zero_ic_kernel(self):
        spec = sd.SyntheticEEGSpec(n_channels=6, coupled_channels=(0, 1))
        kernels = sd.default_eeg_kernels(spec)
        assert np.all(kernels[2:, 0] == 0.0)
        assert np.all(kernels[:2, 0] != 0.0) or np.any(kernels[:2, 0] != 0.0)

    def test_zero_kernels_pure_noise(self):
        spec = sd.SyntheticEEGSpec(n_channels=2, n_trials=2, n_participants=1,
                                   coupled_channels=(0,), noise_power=1.0)
        kernels = np.zeros((2, 2, 8))
        preds = {"ic": np.ones((2, 256)), "envelope": np.ones((2, 256))}
        eeg = sd.gen_synthetic_eeg(spec, preds, stream(8, "e"), kernels)
        assert np.var(eeg) == pytest.approx(1.0, rel=0.2)

    def test_deterministic(self):
        spec = sd.SyntheticEEGSpec(n_channels=3, n_trials=2, n_participants=2,
                                   coupled_channels=(0,))
        preds = {"ic": stream(9, "p").standard_normal((2, 128)),
                 "envelope": stream(10, "p").standard_normal((2, 128))}
        e1 = sd.gen_synthetic_eeg(spec, preds, stream(11, "e"))
        e2 = sd.gen_synthetic_eeg(spec, preds, stream(11, "e"))
        assert np.array_equal(e1, e2)

    def test_pink_noise_spectrum_decays(self):
        x = sd.pink_noise(4096, stream(12, "n"))
        spec = np.abs(np.fft.rfft(x)) ** 2
        low = spec[1:50].mean()
        high = spec[-200:].mean()
        assert low > 5 * high


class TestRenderMelody:
    def test_lengths_and_mask(self):
        render = sd.RenderSpec(rest_prob=1.0)  # every note followed by a rest
        vals, wave, voiced = sd.render_melody(np.array([0, 1]), np.array([2.0, 3.0]),
                                              render, seed=1)
        note = int(round(render.note_duration_s * render.sample_rate))
        rest = int(round(render.rest_duration_s * render.sample_rate))
        assert vals.size == 2 * (note + rest)
        assert voiced.sum() == 2 * note
        assert np.all(vals[:note] == 2.0)
        assert np.all(wave[note : note + rest] == 0.0)

    def test_no_rests(self):
        render = sd.RenderSpec(rest_prob=0.0)
        vals, wave, voiced = sd.render_melody(np.arange(3), np.ones(3), render, seed=2)
        assert np.all(voiced)

    def test_deterministic_given_seed(self):
        render = sd.RenderSpec(rest_prob=0.5)
        a = sd.render_melody(np.arange(6), np.arange(6.0), render, seed=3)
        b = sd.render_melody(np.arange(6), np.arange(6.0), render, seed=3)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
