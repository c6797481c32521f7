"""
Main entry point for the single-pixel quantum-walk read-out simulator
Command-line dispatcher over the pipeline stages, sweeps and reports
"""
import argparse
import logging
import sys
from pathlib import Path

from acquisition_sim import masks_for_fraction, read_log, run_acquisition, write_log
from errors import SimulationError
from experiment_config import default_config, load_config
from image_synth import write_image_csv, write_pgm
from integrated_report import run_integrated_report
from mask_bases import (ORDERINGS, build_mask_set, mask_set_from_permutation, write_masks_csv,
                        write_permutation)
from pipeline import facet_image, fit_spectrum, ground_truth_spectrum, run_pipeline, run_raster
from ratio_sweep import read_sweep_csv, sweep_ratios
from recon import differential_signal, invert_full, progressive_reconstruct, write_diagnostics_csv
from spectrum import spectrum_mse, write_fit_csv, write_spectrum_csv

logger = logging.getLogger(__name__)


def print_header(title):
    print("\n" + "=" * 80)
    print(" " * max(0, (80 - len(title)) // 2) + title)
    print("=" * 80)


def print_spectrum(spectrum, label="Intensity"):
    print(f"\n{'Mode':<8} {label:<20}")
    print("-" * 80)
    for k, value in enumerate(spectrum.intensities):
        print(f"{k:<8} {value:<20.6f} {'#' * int(round(40 * value / max(spectrum.intensities.max(), 1e-300)))}")


def _output_dir(cfg):
    out = Path(cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mask_set(cfg, ordering=None):
    acq = cfg.acquisition
    return build_mask_set(cfg.geometry.grid_width, cfg.geometry.grid_height, ordering or acq.ordering,
                          acq.workers, acq.min_library)


def cmd_walk(cfg, args):
    spectrum = ground_truth_spectrum(cfg)
    write_spectrum_csv(_output_dir(cfg) / "ground_truth_spectrum.csv", spectrum)
    print_header("QUANTUM WALK OUTPUT SPECTRUM")
    print(f"\nGuides: {cfg.walk.num_guides}   gamma*L: {cfg.walk.coupling_length:.3f}")
    print_spectrum(spectrum)


def cmd_render(cfg, args):
    out = _output_dir(cfg)
    image = facet_image(cfg)
    write_image_csv(out / "facet_image.csv", image)
    write_pgm(out / "facet_image.pgm", image)
    logger.info("[OK] Facet image written to %s", out)


def cmd_masks(cfg, args):
    out = _output_dir(cfg)
    masks = _mask_set(cfg, args.ordering)
    write_masks_csv(out / "masks.csv", masks)
    write_permutation(out / "permutation.txt", masks)
    print_header(f"MASK SET ({masks.ordering})")
    print(f"\n{'Position':<10} {'Natural row':<14} {'Blocks':<10}")
    print("-" * 80)
    for position in range(min(args.show, len(masks))):
        print(f"{position:<10} {int(masks.rows[position]):<14} {int(masks.block_counts[position]):<10}")


def cmd_acquire(cfg, args):
    out = _output_dir(cfg)
    masks = _mask_set(cfg, args.ordering)
    write_permutation(out / "permutation.txt", masks)
    fraction = args.fraction or max(cfg.acquisition.fractions)
    records = run_acquisition(facet_image(cfg), masks, fraction, cfg.acquisition.integration_time,
                              cfg.model, cfg.run.seed, shot_noise=cfg.acquisition.noise,
                              workers=cfg.acquisition.workers)
    write_log(out / "acquisition_log.csv", records)


def cmd_reconstruct(cfg, args):
    out = _output_dir(cfg)
    records = read_log(args.log or out / "acquisition_log.csv")
    masks = mask_set_from_permutation(args.permutation or out / "permutation.txt", cfg.acquisition.workers)
    model = cfg.model if cfg.acquisition.subtract_accidentals else None
    measurements = differential_signal(records, model=model)
    fractions = args.fractions or [f for f in cfg.acquisition.fractions
                                   if masks_for_fraction(f, len(masks)) <= len(measurements)]
    results = progressive_reconstruct(measurements, masks, fractions, cfg.reconstruction.tv_params())
    truth = ground_truth_spectrum(cfg)

    print_header("RECONSTRUCTION")
    print(f"\n{'Fraction':<12} {'Iterations':<12} {'Converged':<12} {'MSE vs truth':<15}")
    print("-" * 80)
    diagnostics = []
    for fraction, result in results.items():
        label = f"f{fraction:.3f}"
        write_image_csv(out / f"reconstruction_{label}.csv", result.image)
        write_pgm(out / f"reconstruction_{label}.pgm", result.image)
        spectrum, fit = fit_spectrum(result.image, cfg)
        write_spectrum_csv(out / f"extracted_spectrum_{label}.csv", spectrum)
        write_fit_csv(out / f"spectrum_fit_{label}.csv", fit)
        error = spectrum_mse(spectrum, truth, cfg.reconstruction.normalization)
        diagnostics.append((label, masks_for_fraction(fraction, len(masks)), result))
        print(f"{fraction:<12.1%} {result.iterations:<12} {str(result.converged):<12} {error:<15.3e}")
    write_diagnostics_csv(out / "diagnostics.csv", diagnostics)

    if len(measurements) == len(masks):
        direct = invert_full(measurements, masks)
        write_image_csv(out / "reconstruction_direct.csv", direct)
        write_pgm(out / "reconstruction_direct.pgm", direct)


def cmd_raster(cfg, args):
    spectrum = run_raster(cfg, facet_image(cfg))
    write_spectrum_csv(_output_dir(cfg) / "raster_spectrum.csv", spectrum)
    print_header("SUPERPIXEL RASTER SCAN")
    print_spectrum(spectrum)
    error = spectrum_mse(spectrum, ground_truth_spectrum(cfg), cfg.reconstruction.normalization)
    print(f"\nMSE vs ground truth: {error:.3e}")


def cmd_run(cfg, args):
    result = run_pipeline(cfg)
    print_header("PIPELINE SUMMARY")
    print(f"\n{'Fraction':<12} {'Spectrum MSE vs truth':<25}")
    print("-" * 80)
    for fraction, error in result.mse_vs_ground_truth.items():
        print(f"{fraction:<12.1%} {error:<25.3e}")
    print(f"\nRaster MSE vs truth:       {result.raster_mse:.3e}")
    print(f"Simulated acquisition:     {result.acquisition_time_s / 60.0:.1f} min")
    print(f"Artifacts:                 {result.output_dir}")


def cmd_sweep(cfg, args):
    result = sweep_ratios(cfg, args.fractions, args.orderings, args.seeds)
    run_integrated_report(result, args.plot)


def cmd_report(cfg, args):
    path = args.sweep or Path(cfg.run.output_dir) / "sweep.csv"
    run_integrated_report(read_sweep_csv(path), args.plot)


def build_parser():
    parser = argparse.ArgumentParser(prog="spi-walk",
                                     description="Compressive single-pixel read-out of simulated quantum walks")
    parser.add_argument("--config", help="experiment config file")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--noise", choices=["on", "off"], help="shot noise and accidentals")
    parser.add_argument("--workers", type=int, help="thread pool size")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("walk", help="emit the walk output spectrum").set_defaults(handler=cmd_walk)
    sub.add_parser("render", help="render the facet image").set_defaults(handler=cmd_render)

    p = sub.add_parser("masks", help="emit the ordered mask set and block counts")
    p.add_argument("--ordering", choices=ORDERINGS)
    p.add_argument("--show", type=int, default=16, help="rows to print")
    p.set_defaults(handler=cmd_masks)

    p = sub.add_parser("acquire", help="simulate photon counting")
    p.add_argument("--ordering", choices=ORDERINGS)
    p.add_argument("--fraction", type=float)
    p.set_defaults(handler=cmd_acquire)

    p = sub.add_parser("reconstruct", help="reconstruct from an acquisition log")
    p.add_argument("--log")
    p.add_argument("--permutation")
    p.add_argument("--fractions", type=float, nargs="+")
    p.set_defaults(handler=cmd_reconstruct)

    sub.add_parser("raster", help="superpixel raster scan").set_defaults(handler=cmd_raster)
    sub.add_parser("run", help="full pipeline").set_defaults(handler=cmd_run)

    p = sub.add_parser("sweep", help="MSE against reconstruction ratio")
    p.add_argument("--fractions", type=float, nargs="+")
    p.add_argument("--orderings", nargs="+", choices=ORDERINGS)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--plot", help="write an MSE figure to this path")
    p.set_defaults(handler=cmd_sweep)

    for name in ("report", "compare"):
        p = sub.add_parser(name, help="ordering comparison from a sweep CSV")
        p.add_argument("--sweep")
        p.add_argument("--plot")
        p.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)

    try:
        cfg = load_config(args.config) if args.config else default_config()
        noise = None if args.noise is None else args.noise == "on"
        cfg = cfg.with_overrides(seed=args.seed, output_dir=args.out, noise=noise, workers=args.workers)
        args.handler(cfg, args)
    except (SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
