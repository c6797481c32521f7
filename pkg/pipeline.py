"""
End-to-end simulated experiment
Walk spectrum -> facet image -> ordered masks -> photon counting -> reconstruction
-> spectrum extraction -> MSE report, every stage persisted as CSV
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from acquisition_sim import (acquisition_time, derive_seed, masks_for_fraction, raster_scan,
                             run_acquisition, write_log)
from errors import FitConvergenceError
from experiment_config import write_config
from image_synth import build_superpixels, render_image, write_image_csv, write_pgm
from mask_bases import build_mask_set, write_masks_csv, write_permutation
from recon import differential_signal, invert_full, progressive_reconstruct, write_diagnostics_csv
from spectrum import extract_spectrum, spectrum_mse, write_fit_csv, write_spectrum_csv
from walk_core import walk_spectrum

logger = logging.getLogger(__name__)

# stream key for raster-scan seeds, disjoint from Hadamard row indices
RASTER_STREAM = 1 << 20


@dataclass
class PipelineResult:
    output_dir: Path
    ground_truth: object
    extracted: dict = field(default_factory=dict)   # fraction -> ModeSpectrum
    mse_vs_ground_truth: dict = field(default_factory=dict)
    raster: object = None
    raster_mse: float = float("nan")
    acquisition_time_s: float = 0.0
    records: list = field(default_factory=list)


def ground_truth_spectrum(cfg):
    guides = cfg.run.input_guides or None
    return walk_spectrum(cfg.walk, guides, indistinguishable=cfg.run.indistinguishable)


def facet_image(cfg, spectrum=None):
    """Rendered facet image normalized to unit total"""
    spectrum = spectrum if spectrum is not None else ground_truth_spectrum(cfg)
    return render_image(spectrum, cfg.geometry).normalized()


def fit_spectrum(image, cfg):
    """extract_spectrum that keeps the best-effort fit when the optimizer gives up"""
    try:
        spectrum, fit = extract_spectrum(image, cfg.geometry, fit_baseline=cfg.reconstruction.fit_baseline)
    except FitConvergenceError as exc:
        logger.warning("%s; using the best-effort fit", exc)
        fit = exc.fit
        spectrum = fit.intensities
    return spectrum, fit


def run_raster(cfg, image):
    superpixels = build_superpixels(cfg.geometry, cfg.acquisition.raster_radius)
    return raster_scan(image, superpixels, cfg.acquisition.raster_time, cfg.model,
                       derive_seed(cfg.run.seed, RASTER_STREAM), shot_noise=cfg.acquisition.noise)


def _label(fraction):
    return f"f{fraction:.3f}"


def run_pipeline(cfg):
    """Simulate one experiment and write every artifact under cfg.run.output_dir"""
    out = Path(cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / "config.ini", cfg)
    acq, rec = cfg.acquisition, cfg.reconstruction
    norm = rec.normalization

    truth = ground_truth_spectrum(cfg)
    write_spectrum_csv(out / "ground_truth_spectrum.csv", truth)
    image = facet_image(cfg, truth)
    write_image_csv(out / "facet_image.csv", image)
    write_pgm(out / "facet_image.pgm", image)
    logger.info("[OK] Rendered %dx%d facet image of %d modes",
                cfg.geometry.grid_width, cfg.geometry.grid_height, len(truth))

    masks = build_mask_set(cfg.geometry.grid_width, cfg.geometry.grid_height, acq.ordering,
                           acq.workers, acq.min_library)
    write_masks_csv(out / "masks.csv", masks)
    write_permutation(out / "permutation.txt", masks)

    largest = max(acq.fractions)
    records = run_acquisition(image, masks, largest, acq.integration_time, cfg.model, cfg.run.seed,
                              shot_noise=acq.noise, workers=acq.workers)
    write_log(out / "acquisition_log.csv", records)
    measurements = differential_signal(records, model=cfg.model if acq.subtract_accidentals else None)

    tv_results = progressive_reconstruct(measurements, masks, acq.fractions, rec.tv_params())
    diagnostics = []
    images = {}
    for fraction, result in tv_results.items():
        label = _label(fraction)
        write_image_csv(out / f"reconstruction_{label}.csv", result.image)
        write_pgm(out / f"reconstruction_{label}.pgm", result.image)
        diagnostics.append((label, masks_for_fraction(fraction, len(masks)), result))
        images[fraction] = result.image
    write_diagnostics_csv(out / "diagnostics.csv", diagnostics)

    if len(records) == len(masks):
        direct = invert_full(measurements, masks)
        write_image_csv(out / "reconstruction_direct.csv", direct)
        write_pgm(out / "reconstruction_direct.pgm", direct)
        if rec.full_solver == "direct":
            images[1.0] = direct

    result = PipelineResult(out, truth, records=records)
    report = []
    for fraction in acq.fractions:
        spectrum, fit = fit_spectrum(images[fraction], cfg)
        label = _label(fraction)
        write_spectrum_csv(out / f"extracted_spectrum_{label}.csv", spectrum)
        write_fit_csv(out / f"spectrum_fit_{label}.csv", fit)
        result.extracted[fraction] = spectrum
        result.mse_vs_ground_truth[fraction] = spectrum_mse(spectrum, truth, norm)
        report.append(("spectrum_mse_vs_ground_truth", fraction, result.mse_vs_ground_truth[fraction]))
    write_spectrum_csv(out / "extracted_spectrum.csv", result.extracted[largest])

    if 1.0 in result.extracted:
        full = result.extracted[1.0]
        for fraction in acq.fractions:
            report.append(("spectrum_mse_vs_full", fraction,
                           spectrum_mse(result.extracted[fraction], full, norm)))

    result.raster = run_raster(cfg, image)
    write_spectrum_csv(out / "raster_spectrum.csv", result.raster)
    result.raster_mse = spectrum_mse(result.raster, truth, norm)
    report.append(("raster_mse_vs_ground_truth", None, result.raster_mse))
    if 1.0 in result.extracted:
        report.append(("raster_mse_vs_spi", None, spectrum_mse(result.raster, result.extracted[1.0], norm)))

    result.acquisition_time_s = acquisition_time(len(records), acq.integration_time, acq.overhead_per_mask)
    report.append(("masks_acquired", largest, len(records)))
    report.append(("acquisition_time_s", largest, result.acquisition_time_s))
    _write_report(out / "mse_report.csv", report)

    logger.info("[OK] Pipeline finished: %d masks, spectrum MSE %.3g, raster MSE %.3g, "
                "simulated acquisition %.1f min", len(records), result.mse_vs_ground_truth[largest],
                result.raster_mse, result.acquisition_time_s / 60.0)
    return result


def _write_report(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric", "fraction", "value"])
        for metric, fraction, value in rows:
            writer.writerow([metric, "" if fraction is None else repr(float(fraction)),
                             value if isinstance(value, int) else repr(float(value))])


def read_report(path):
    """{(metric, fraction or None): value}"""
    with open(path, newline="") as f:
        return {
            (row["metric"], float(row["fraction"]) if row["fraction"] else None): float(row["value"])
            for row in csv.DictReader(f)
        }
