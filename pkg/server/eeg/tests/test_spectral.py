import numpy as np
from django.conf import settings as django_settings
from django.test import SimpleTestCase
from hypothesis import given, settings as hyp_settings, strategies as st
from scipy.integrate import trapezoid

from eeg.exceptions import SpectralError
from eeg.io.montage import common_channels
from eeg.spectral.features import (
    SpectralParams, extract_features, feature_correlation, feature_frame, feature_names,
)
from eeg.spectral.psd import Spectrum, band_power, multitaper_psd, relative_band_power
from eeg.spectral.tapers import dpss_tapers
from eeg.tests.factories import make_epoch_set

FS = 250.0


def grid_spectrum(values_fn, df=0.5, top=125.0):
    freqs = np.arange(0.0, top + df / 2, df)
    return Spectrum(freqs=freqs, psd=values_fn(freqs))


class TaperTests(SimpleTestCase):

    @hyp_settings(max_examples=20, deadline=None)
    @given(n=st.integers(64, 600), nw=st.sampled_from([2.0, 2.5, 3.0, 4.0]), data=st.data())
    def test_orthonormal(self, n, nw, data):
        k = data.draw(st.integers(1, int(2 * nw - 1)))
        tapers = dpss_tapers(n, nw, k)
        gram = tapers.tapers @ tapers.tapers.T
        self.assertLess(np.abs(gram - np.eye(k)).max(), 1e-8)
        self.assertTrue(np.all(np.diff(tapers.concentrations) <= 1e-12))

    def test_concentrations(self):
        tapers = dpss_tapers(512, 4, 7)
        self.assertEqual(tapers.tapers.shape, (7, 512))
        self.assertTrue(np.all(tapers.concentrations > 0.90))
        self.assertTrue(np.all(tapers.concentrations <= 1.0))

    def test_sign_normalized(self):
        for row in dpss_tapers(500, 4, 7).tapers:
            self.assertGreater(row[np.flatnonzero(np.abs(row) > 1e-12)[0]], 0)

    def test_count_out_of_range(self):
        with self.assertRaises(SpectralError):
            dpss_tapers(500, 4, 8)
        with self.assertRaises(SpectralError):
            dpss_tapers(500, 4, 0)


class PsdTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tapers = dpss_tapers(500, 4, 7)

    def test_zero_signal(self):
        spec = multitaper_psd(np.zeros(500), self.tapers, FS)
        np.testing.assert_array_equal(spec.psd, 0.0)
        self.assertEqual(spec.freqs[-1], 125.0)
        self.assertEqual(len(spec.freqs), 251)

    def test_white_noise_parseval(self):
        rng = np.random.default_rng(0)
        totals = [band_power(multitaper_psd(rng.standard_normal(500), self.tapers, FS), (0.0, 125.0))
                  for _ in range(100)]
        self.assertTrue(0.9 <= np.mean(totals) <= 1.1)

    def test_tone_peak(self):
        t = np.arange(500) / FS
        spec = multitaper_psd(np.sin(2 * np.pi * 10.0 * t), self.tapers, FS)
        self.assertLessEqual(abs(spec.freqs[np.argmax(spec.psd)] - 10.0), 0.5)

    def test_length_mismatch(self):
        with self.assertRaises(SpectralError):
            multitaper_psd(np.zeros(400), self.tapers, FS)


class BandPowerTests(SimpleTestCase):

    def test_simpson_exact_on_quadratic(self):
        freqs = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertAlmostEqual(band_power(Spectrum(freqs, freqs ** 2), (0.0, 1.0)), 1.0 / 3.0, delta=1e-14)

    def test_flat(self):
        spec = grid_spectrum(lambda f: np.full_like(f, 3.0))
        self.assertAlmostEqual(band_power(spec, (8.0, 12.0)), 12.0, delta=1e-12)

    def test_even_point_count_trimmed(self):
        spec = grid_spectrum(lambda f: np.full_like(f, 2.0))
        # [8, 11.5] spans 8 points; the trailing one is dropped
        self.assertAlmostEqual(band_power(spec, (8.0, 11.5)), 2.0 * 3.0, delta=1e-12)

    def test_smooth_against_fine_trapezoid(self):
        def psd(f):
            return np.exp(-((f - 10.0) ** 2) / 8.0) + 0.1 + 0.02 * np.sin(f / 3.0)

        spec = grid_spectrum(psd)
        fine = np.linspace(4.0, 7.0, 30001)
        oracle = trapezoid(psd(fine), fine)
        self.assertLess(abs(band_power(spec, (4.0, 7.0)) - oracle) / oracle, 1e-3)

    def test_band_outside_grid(self):
        with self.assertRaises(SpectralError):
            band_power(grid_spectrum(np.ones_like), (100.0, 200.0))
        with self.assertRaises(SpectralError):
            band_power(grid_spectrum(np.ones_like), (10.0, 10.5))

    def test_relative_flat(self):
        spec = grid_spectrum(np.ones_like)
        self.assertAlmostEqual(relative_band_power(spec, (8.0, 12.0), (1.0, 50.0)), 4.0 / 49.0, delta=1e-9)
        self.assertEqual(relative_band_power(spec, (1.0, 50.0), (1.0, 50.0)), 1.0)

    def test_relative_narrowband(self):
        spec = grid_spectrum(lambda f: np.where((f >= 4.5) & (f <= 6.5), 1.0, 1e-6))
        self.assertGreater(relative_band_power(spec, (4.0, 7.0), (1.0, 50.0)), 0.99)

    def test_relative_zero_total(self):
        with self.assertRaises(SpectralError):
            relative_band_power(grid_spectrum(np.zeros_like), (8.0, 12.0), (1.0, 50.0))

    def test_band_not_inside_total(self):
        with self.assertRaises(SpectralError):
            relative_band_power(grid_spectrum(np.ones_like), (0.5, 4.0), (1.0, 50.0))


class FeatureTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.names = common_channels()
        cls.sets = [
            make_epoch_set(n_epochs=4, names=cls.names, condition="eyes_open", seed=1),
            make_epoch_set(n_epochs=3, names=cls.names, condition="eyes_closed", seed=2),
            make_epoch_set(n_epochs=3, names=cls.names, condition="eyes_closed", seed=3),
        ]

    def test_216_columns(self):
        row = extract_features(self.sets, self.names, subject_id="s1")
        self.assertEqual(len(row), 216)
        self.assertEqual(list(row.values.index), feature_names(self.names))
        self.assertEqual(row.values.index[0], "fp1.open.theta")
        self.assertIn("fc2.close.theta", row.values.index)

    def test_bounds(self):
        values = extract_features(self.sets, self.names).values
        self.assertTrue(((values >= 0) & (values <= 1)).all())
        theta = values[[n for n in values.index if n.endswith(".theta")]].to_numpy()
        alpha = values[[n for n in values.index if n.endswith(".alpha")]].to_numpy()
        self.assertTrue(np.all(theta + alpha <= 1.0))

    def test_identical_epochs_equal_single_epoch(self):
        single = [es.replace(epochs=es.epochs[:1], keep_mask=None) for es in self.sets]
        repeated = [es.replace(epochs=np.repeat(es.epochs[:1], 5, axis=0), keep_mask=None) for es in self.sets]
        np.testing.assert_allclose(extract_features(repeated, self.names).values,
                                   extract_features(single, self.names).values, rtol=1e-12)

    def test_scale_invariant(self):
        scaled = [es.replace(epochs=es.epochs * 37.0) for es in self.sets]
        np.testing.assert_allclose(extract_features(scaled, self.names).values,
                                   extract_features(self.sets, self.names).values, rtol=1e-9)

    def test_deterministic(self):
        first = extract_features(self.sets, self.names).values
        second = extract_features(self.sets, self.names).values
        np.testing.assert_array_equal(first.to_numpy(), second.to_numpy())

    def test_rejected_epochs_ignored(self):
        open_set = self.sets[0]
        masked = open_set.replace(epochs=np.concatenate([open_set.epochs, 1e3 * open_set.epochs[:1]]),
                                  keep_mask=[True] * open_set.n_epochs + [False])
        np.testing.assert_array_equal(extract_features([masked, *self.sets[1:]], self.names).values,
                                      extract_features(self.sets, self.names).values)

    def test_missing_condition(self):
        with self.assertRaises(SpectralError):
            extract_features(self.sets[:1], self.names)

    def test_no_surviving_epochs(self):
        dead = self.sets[0].replace(keep_mask=[False] * self.sets[0].n_epochs)
        with self.assertRaises(SpectralError):
            extract_features([dead, *self.sets[1:]], self.names)

    def test_protocol_blocks_accepted(self):
        labelled = [self.sets[0].replace(block_index=1), self.sets[1].replace(block_index=2),
                    self.sets[2].replace(block_index=3)]
        np.testing.assert_array_equal(extract_features(labelled, self.names).values,
                                      extract_features(self.sets, self.names).values)

    def test_swapped_conditions_rejected(self):
        swapped = [self.sets[0].replace(block_index=2), self.sets[1].replace(block_index=1),
                   self.sets[2].replace(block_index=3)]
        with self.assertRaises(SpectralError) as ctx:
            extract_features(swapped, self.names, subject_id="s7")
        self.assertEqual(ctx.exception.field, "condition")
        self.assertIn("s7", str(ctx.exception))

    def test_block_mapping_from_settings(self):
        with self.settings(EEG_SPECTRAL={**django_settings.EEG_SPECTRAL, "OPEN_BLOCKS": [2, 3],
                                         "CLOSED_BLOCKS": [1, 4]}):
            params = SpectralParams.from_settings()
        swapped = [self.sets[0].replace(block_index=2), self.sets[1].replace(block_index=1),
                   self.sets[2].replace(block_index=4)]
        self.assertEqual(len(extract_features(swapped, self.names, params=params)), 216)
        with self.assertRaises(SpectralError):
            SpectralParams(open_blocks=(1, 2), closed_blocks=(2, 3))

    def test_ratio_averaging(self):
        params = SpectralParams(average="ratio")
        values = extract_features(self.sets, self.names, params=params).values
        self.assertTrue(((values >= 0) & (values <= 1)).all())
        with self.assertRaises(SpectralError):
            SpectralParams(average="median")

    def test_frame_and_correlation(self):
        rows = [extract_features(self.sets, self.names, subject_id=s) for s in ("a", "b", "c")]
        frame = feature_frame(rows)
        self.assertEqual(list(frame.columns[:2]), ["subject_id", "fp1.open.theta"])
        corr = feature_correlation(frame.iloc[:, :5])
        self.assertEqual(corr.shape, (4, 4))


class FeatureSettingsTests(SimpleTestCase):

    def test_settings_defaults(self):
        params = SpectralParams.from_settings()
        self.assertEqual(params, SpectralParams())
