import numpy as np
import pytest

from acquisition_sim import (SourceDetectorModel, accidental_background, accidental_rate, acquisition_time,
                             derive_seed, expected_coincidence_rate, expected_rates, forward_model,
                             masks_for_fraction, raster_scan, read_log, run_acquisition, sample_counts,
                             write_log)
from errors import ContractViolationError
from image_synth import PixelImage, build_superpixels
from mask_bases import Mask
from walk_core import ModeSpectrum


def test_accidental_rate_at_nominal_rates():
    assert accidental_rate(1.9e6, 4500, 16e-9) == pytest.approx(136.8, abs=0.1)


def test_model_derived_quantities(model):
    assert 6.0 <= model.snr <= 8.0
    assert model.loss_db == pytest.approx(17.0, abs=0.05)
    assert model.without_noise().snr == float("inf")


@pytest.mark.parametrize("kwargs", [{"heralding_efficiency": 0.0}, {"system_transmission": 1.5},
                                    {"coincidence_window": -1e-9}])
def test_invalid_model_rejected(kwargs):
    with pytest.raises(ContractViolationError):
        SourceDetectorModel(**kwargs)


def test_all_on_snr_from_simulated_counts(facet, model):
    all_on = Mask(np.ones(facet.shape, dtype=int))
    rate = expected_coincidence_rate(facet, all_on, "+", model)
    counts = sample_counts(rate, 100.0, seed=5)
    accidental_counts = model.all_on_accidental_rate * 100.0
    assert 6.0 <= (counts - accidental_counts) / accidental_counts <= 8.0


def test_complementary_polarities_add_up(facet, model, cake_masks):
    rate_pos, rate_neg = expected_rates(facet, cake_masks, len(cake_masks), model)
    all_on = model.true_rate + model.all_on_accidental_rate
    # dark counts aside, ON fractions of a mask and its complement sum to one
    assert np.allclose(rate_pos + rate_neg, all_on + accidental_rate(
        model.herald_singles_rate, model.signal_dark_rate, model.coincidence_window))


def test_complementarity_with_dark_counts(facet, cake_masks):
    dark = SourceDetectorModel(signal_dark_rate=300.0)
    rate_pos, rate_neg = expected_rates(facet, cake_masks, 16, dark)
    full = dark.true_rate + accidental_rate(dark.herald_singles_rate, dark.signal_rate,
                                           dark.coincidence_window)
    extra = 2 * dark.herald_singles_rate * dark.coincidence_window * dark.signal_dark_rate
    assert np.allclose(rate_pos + rate_neg, full + extra)


def test_expected_rate_requires_normalized_image(model):
    image = PixelImage(np.full((2, 2), 0.5))
    with pytest.raises(ContractViolationError):
        expected_coincidence_rate(image, Mask(np.ones((2, 2), dtype=int)), "+", model)


def test_differential_rate_is_forward_model(facet, model, cake_masks):
    clean = model.without_noise()
    rate_pos, rate_neg = expected_rates(facet, cake_masks, 64, clean)
    assert np.allclose(rate_pos - rate_neg, forward_model(facet, cake_masks, 64, clean.true_rate))


def test_poisson_counts_have_poisson_statistics():
    counts = np.array([sample_counts(250.0, 1.0, derive_seed(11, k)) for k in range(4000)])
    assert counts.mean() == pytest.approx(250.0, rel=0.02)
    assert counts.var() == pytest.approx(250.0, rel=0.1)


def test_zero_rate_gives_zero_counts():
    assert sample_counts(0.0, 1.0, 3) == 0


def test_seed_derivation_is_stable():
    assert derive_seed(7, 3) == derive_seed(7, 3)
    assert derive_seed(7, 3) != derive_seed(7, 4)
    assert derive_seed(7, 3) != derive_seed(8, 3)


@pytest.mark.parametrize("fraction, expected", [(1.0, 1024), (0.5, 512), (0.125, 128), (0.05, 52)])
def test_masks_for_fraction(fraction, expected):
    assert masks_for_fraction(fraction, 1024) == expected


def test_fraction_out_of_range_rejected():
    with pytest.raises(ContractViolationError):
        masks_for_fraction(0.0, 1024)
    with pytest.raises(ContractViolationError):
        masks_for_fraction(1.2, 1024)


def test_full_acquisition_produces_one_record_per_mask(facet, model, cake_masks):
    records = run_acquisition(facet, cake_masks, 1.0, 1.0, model, seed=1)
    assert len(records) == 1024
    assert [r.mask_index for r in records] == list(range(1024))


def test_partial_acquisition_is_a_prefix_of_the_full_one(facet, model, cake_masks):
    full = run_acquisition(facet, cake_masks, 1.0, 1.0, model, seed=9)
    partial = run_acquisition(facet, cake_masks, 0.125, 1.0, model, seed=9, workers=4)
    assert len(partial) == 128
    assert partial == full[:128]


def test_noiseless_acquisition_rounds_expected_counts(facet, model, cake_masks):
    records = run_acquisition(facet, cake_masks, 0.05, 2.0, model.without_noise(), seed=0, shot_noise=False)
    rate_pos, _ = expected_rates(facet, cake_masks, len(records), model.without_noise())
    assert [r.counts_pos for r in records] == np.rint(rate_pos * 2.0).astype(int).tolist()


def test_log_round_trip(tmp_path, facet, model, cake_masks):
    records = run_acquisition(facet, cake_masks, 0.05, 1.0, model, seed=4)
    path = tmp_path / "log.csv"
    write_log(path, records)
    assert read_log(path) == records
    first = path.read_bytes()
    write_log(path, run_acquisition(facet, cake_masks, 0.05, 1.0, model, seed=4))
    assert path.read_bytes() == first


def test_acquisition_time_with_overhead():
    assert acquisition_time(1024, 1.0) == 2048.0
    # ~40 minutes with upload and settling overhead
    assert acquisition_time(1024, 1.0, 0.34) / 60.0 == pytest.approx(40.0, abs=0.5)


def test_noiseless_raster_recovers_superpixel_spectrum(facet, geometry, model):
    superpixels = build_superpixels(geometry, 1.0)
    spectrum = raster_scan(facet, superpixels, 10.0, model.without_noise(), seed=0, shot_noise=False,
                           total_true_rate=1e9)
    expected = ModeSpectrum([facet.values[superpixels.mask(k)].sum() for k in range(13)]).normalized()
    assert np.allclose(spectrum.intensities, expected.intensities, atol=1e-6)


def test_dark_scene_raster_is_all_zero(geometry, model):
    superpixels = build_superpixels(geometry, 1.0)
    dark = PixelImage(np.zeros(geometry.shape))
    spectrum = raster_scan(dark, superpixels, 1.0, model.without_noise(), seed=0, shot_noise=False)
    assert np.all(spectrum.intensities == 0)


def test_unset_rates_follow_the_source_chain():
    derived = SourceDetectorModel(signal_singles_rate=None, coincidence_rate=None)
    assert derived.source_singles_rate == pytest.approx(2e6)
    assert derived.signal_rate == pytest.approx(4e4)
    assert derived.true_rate == pytest.approx(1e4)


def test_source_parameters_drive_expected_rates():
    image = PixelImage(np.full((4, 4), 1.0 / 16))
    all_on = Mask(np.ones((4, 4), dtype=int))
    base = SourceDetectorModel(signal_singles_rate=None, coincidence_rate=None)
    brighter = SourceDetectorModel(pair_rate=1e6, signal_singles_rate=None, coincidence_rate=None)
    lossier = SourceDetectorModel(system_transmission=0.01, signal_singles_rate=None, coincidence_rate=None)
    rate = expected_coincidence_rate(image, all_on, "+", base)
    assert expected_coincidence_rate(image, all_on, "+", brighter) == pytest.approx(2 * rate)
    assert expected_coincidence_rate(image, all_on, "+", lossier) == pytest.approx(rate / 2)


@pytest.mark.parametrize("kwargs", [
    {"pair_rate": 1.0, "heralding_efficiency": 0.01, "system_transmission": 1.0},
    {"coincidence_rate": 1200.0},
    {"signal_singles_rate": 5e4},
])
def test_rates_beyond_the_source_chain_rejected(kwargs):
    with pytest.raises(ContractViolationError, match="source chain"):
        SourceDetectorModel(**kwargs)


def test_complement_of_all_on_mask_sees_only_the_dark_floor(facet, model):
    all_on = Mask(np.ones(facet.shape, dtype=int))
    assert expected_coincidence_rate(facet, all_on, "-", model) == 0.0
    dark = SourceDetectorModel(signal_dark_rate=300.0)
    floor = dark.herald_singles_rate * dark.signal_dark_rate * dark.coincidence_window
    assert expected_coincidence_rate(facet, all_on, "-", dark) == pytest.approx(floor)
    assert expected_coincidence_rate(facet, all_on, "-", dark.without_noise()) == 0.0


def test_half_on_mask_over_uniform_image(model):
    image = PixelImage(np.full((4, 4), 1.0 / 16))
    half = Mask(np.where(np.arange(16).reshape(4, 4) % 4 < 2, 1, -1))
    clean = model.without_noise()
    assert expected_coincidence_rate(image, half, "+", clean) == pytest.approx(500.0)
    assert expected_coincidence_rate(image, half, "-", clean) == pytest.approx(500.0)


def test_noiseless_differential_within_one_count_of_projection(facet, model, cake_masks):
    clean = model.without_noise()
    records = run_acquisition(facet, cake_masks, 0.125, 3.0, clean, seed=0, shot_noise=False)
    y = np.array([(r.counts_pos - r.counts_neg) / r.integration_time for r in records])
    exact = forward_model(facet, cake_masks, len(records), clean.true_rate)
    assert np.all(np.abs(y - exact) <= 1.0 / 3.0 + 1e-12)


def test_accidental_background_uses_recorded_singles(model):
    assert accidental_background(4500, 1.0, model) == pytest.approx(136.8, abs=0.1)
    assert accidental_background(9000, 2.0, model) == pytest.approx(136.8, abs=0.1)
    assert accidental_background(4500, 1.0, model.without_noise()) == 0.0


def test_raster_background_removes_dark_floor(facet, geometry):
    dark = SourceDetectorModel(signal_dark_rate=300.0)
    superpixels = build_superpixels(geometry, 1.0)
    spectrum = raster_scan(facet, superpixels, 1e4, dark, seed=2)
    expected = ModeSpectrum([facet.values[superpixels.mask(k)].sum() for k in range(13)]).normalized()
    assert np.allclose(spectrum.intensities, expected.intensities, atol=1e-3)
