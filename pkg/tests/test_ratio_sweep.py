import statistics
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from acquisition_sim import run_acquisition
from errors import OrderingMissingError
from experiment_config import default_config
from mask_bases import build_mask_set
from pipeline import facet_image, fit_spectrum, run_raster
from ratio_sweep import (RatioSweepResult, SweepRow, compare_orderings, read_sweep_csv, sweep_ratios,
                         trend_inversions)
from recon import differential_signal, tv_reconstruct
from spectrum import spectrum_mse

SEEDS = list(range(1, 11))


def row(ordering, fraction, seed, error):
    return SweepRow(ordering, fraction, seed, int(1024 * fraction), error, error, 10, True, 1.0)


def test_small_sweep_rows_and_self_comparison(cfg):
    result = sweep_ratios(cfg, [1.0, 0.25, 0.5], ["cake_cutting", "russian_dolls"], [3])
    assert len(result.rows) == 6
    assert result.fractions == [0.25, 0.5, 1.0]
    for ordering in ("cake_cutting", "russian_dolls"):
        assert result.median_mse(ordering, 1.0) == 0.0
    assert [r.masks for r in result.rows if r.ordering == "cake_cutting"] == [256, 512, 1024]

    out = Path(cfg.run.output_dir)
    assert read_sweep_csv(out / "sweep.csv") == result
    assert sorted(p.name for p in (out / "sweep").iterdir()) == ["cake_cutting_seed3", "russian_dolls_seed3"]


def test_sweep_is_byte_identical_across_runs_and_workers(cfg, tmp_path):
    first = cfg.with_overrides(output_dir=tmp_path / "a")
    second = cfg.with_overrides(output_dir=tmp_path / "b", workers=3)
    sweep_ratios(first, [0.125, 1.0], ["cake_cutting", "russian_dolls"], [1, 2])
    sweep_ratios(second, [0.125, 1.0], ["cake_cutting", "russian_dolls"], [1, 2])
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_rows_are_sorted_regardless_of_input_order():
    result = RatioSweepResult((row("russian_dolls", 0.5, 2, 0.1), row("cake_cutting", 0.5, 1, 0.2),
                               row("cake_cutting", 0.25, 1, 0.3)))
    assert [(r.ordering, r.fraction) for r in result.rows] == [
        ("cake_cutting", 0.25), ("cake_cutting", 0.5), ("russian_dolls", 0.5)]


def test_compare_orderings_reports_medians_and_sign():
    rows = [row("cake_cutting", 0.25, s, e) for s, e in enumerate([0.01, 0.02, 0.03])]
    rows += [row("russian_dolls", 0.25, s, e) for s, e in enumerate([0.05, 0.04, 0.06])]
    rows += [row("cake_cutting", 1.0, 0, 0.0), row("russian_dolls", 1.0, 0, 0.0)]
    comparison = compare_orderings(RatioSweepResult(tuple(rows)))
    assert [c.fraction for c in comparison] == [0.25, 1.0]
    assert comparison[0].median_first == 0.02
    assert comparison[0].median_second == 0.05
    assert comparison[0].sign == -1
    assert comparison[1].sign == 0


def test_compare_orderings_needs_both_orderings():
    result = RatioSweepResult((row("cake_cutting", 0.5, 1, 0.01),))
    with pytest.raises(OrderingMissingError):
        compare_orderings(result)


def test_trend_inversions_counts_increases():
    rows = [row("cake_cutting", f, 1, e) for f, e in [(0.1, 0.05), (0.2, 0.06), (0.3, 0.01), (0.4, 0.0)]]
    assert trend_inversions(RatioSweepResult(tuple(rows)), "cake_cutting") == 1


@pytest.fixture(scope="module")
def acceptance_sweep(tmp_path_factory):
    fractions = sorted(set(default_config().run.sweep_fractions) | {0.125})
    cfg = default_config().with_overrides(output_dir=tmp_path_factory.mktemp("sweep"), workers=4)
    return sweep_ratios(cfg, fractions, ["cake_cutting", "russian_dolls"], SEEDS)


@pytest.mark.slow
def test_cake_cutting_quarter_sampling_stays_below_threshold(acceptance_sweep):
    assert acceptance_sweep.median_mse("cake_cutting", 0.25) < 0.03


@pytest.mark.slow
def test_cake_cutting_beats_russian_dolls_at_low_ratios(acceptance_sweep):
    comparison = {c.fraction: c for c in compare_orderings(acceptance_sweep)}
    for fraction in (0.125, 0.25):
        assert comparison[fraction].median_first <= comparison[fraction].median_second


@pytest.mark.slow
def test_both_orderings_near_zero_from_half_sampling(acceptance_sweep):
    for c in compare_orderings(acceptance_sweep):
        if c.fraction >= 0.5:
            assert c.median_first < 0.01
            assert c.median_second < 0.01


@pytest.mark.slow
def test_cake_cutting_trend_is_non_increasing(acceptance_sweep):
    assert trend_inversions(acceptance_sweep, "cake_cutting", tolerance=1e-4) <= 1


@pytest.mark.slow
def test_raster_agrees_with_full_reconstruction(cfg):
    masks = build_mask_set(64, 16, "cake_cutting")
    image = facet_image(cfg)
    errors = []
    for seed in SEEDS:
        run_cfg = replace(cfg, run=replace(cfg.run, seed=seed))
        records = run_acquisition(image, masks, 1.0, 1.0, run_cfg.model, seed)
        full = tv_reconstruct(differential_signal(records), masks, run_cfg.reconstruction.tv_params())
        spi, _ = fit_spectrum(full.image, run_cfg)
        errors.append(spectrum_mse(run_raster(run_cfg, image), spi))
    assert statistics.median(errors) < 0.05
    assert np.isfinite(errors).all()
