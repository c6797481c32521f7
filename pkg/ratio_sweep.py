"""
Reconstruction-ratio sweep
Runs one acquisition per (ordering, seed), reconstructs growing prefixes of it and
scores each partial spectrum against the same run's full reconstruction
"""
import csv
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from acquisition_sim import masks_for_fraction, run_acquisition, write_log
from errors import ContractViolationError, OrderingMissingError
from mask_bases import build_mask_set
from pipeline import facet_image, fit_spectrum, ground_truth_spectrum
from recon import differential_signal, progressive_reconstruct
from spectrum import spectrum_mse, write_spectrum_csv

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["ordering", "fraction", "seed", "masks", "mse_vs_full", "mse_vs_ground_truth",
                 "iterations", "converged", "final_objective"]


@dataclass(frozen=True)
class SweepRow:
    ordering: str
    fraction: float
    seed: int
    masks: int
    mse_vs_full: float
    mse_vs_ground_truth: float
    iterations: int
    converged: bool
    final_objective: float

    def sort_key(self):
        return (self.ordering, self.fraction, self.seed)


@dataclass(frozen=True)
class RatioSweepResult:
    """One row per (ordering, fraction, seed), sorted by ordering, then fraction, then seed"""
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=SweepRow.sort_key)))

    @property
    def orderings(self):
        return sorted({r.ordering for r in self.rows})

    @property
    def fractions(self):
        return sorted({r.fraction for r in self.rows})

    @property
    def seeds(self):
        return sorted({r.seed for r in self.rows})

    def values(self, ordering, fraction, column="mse_vs_full"):
        return [getattr(r, column) for r in self.rows if r.ordering == ordering and r.fraction == fraction]

    def median_mse(self, ordering, fraction, column="mse_vs_full"):
        values = self.values(ordering, fraction, column)
        if not values:
            raise OrderingMissingError(f"no sweep rows for {ordering} at fraction {fraction}")
        return statistics.median(values)


@dataclass(frozen=True)
class OrderingComparison:
    fraction: float
    median_first: float
    median_second: float

    @property
    def sign(self):
        """-1 when the first ordering has the lower median MSE, +1 when higher, 0 on a tie"""
        return int(np.sign(self.median_first - self.median_second))


def _sweep_job(cfg, masks, seed, fractions, workdir, truth, image):
    """Acquire once, then reconstruct every prefix; writes into its own directory"""
    acq, rec = cfg.acquisition, cfg.reconstruction
    workdir.mkdir(parents=True, exist_ok=True)
    records = run_acquisition(image, masks, 1.0, acq.integration_time, cfg.model, seed,
                              shot_noise=acq.noise)
    write_log(workdir / "acquisition_log.csv", records)
    measurements = differential_signal(records, model=cfg.model if acq.subtract_accidentals else None)

    results = progressive_reconstruct(measurements, masks, set(fractions) | {1.0}, rec.tv_params())
    spectra = {f: fit_spectrum(r.image, cfg)[0] for f, r in results.items()}
    full = spectra[1.0]

    rows = []
    for fraction in fractions:
        result = results[fraction]
        write_spectrum_csv(workdir / f"spectrum_f{fraction:.3f}.csv", spectra[fraction])
        rows.append(SweepRow(
            ordering=masks.ordering,
            fraction=float(fraction),
            seed=int(seed),
            masks=masks_for_fraction(fraction, len(masks)),
            mse_vs_full=spectrum_mse(spectra[fraction], full, rec.normalization),
            mse_vs_ground_truth=spectrum_mse(spectra[fraction], truth, rec.normalization),
            iterations=result.iterations,
            converged=result.converged,
            final_objective=float(result.final_objective),
        ))
    write_sweep_csv(workdir / "sweep.csv", rows)
    logger.info("[OK] Sweep job %s seed %d: %d fractions", masks.ordering, seed, len(fractions))
    return rows


def sweep_ratios(cfg, fractions=None, orderings=None, seeds=None, workers=None):
    """MSE of every partial-prefix spectrum against the full-set spectrum of the same run.

    Jobs run concurrently, each under <out>/sweep/<ordering>_seed<seed>/; the merged
    table is assembled afterwards in sorted order and written to <out>/sweep.csv.
    """
    fractions = sorted(set(fractions or cfg.run.sweep_fractions))
    orderings = list(orderings or cfg.run.sweep_orderings)
    seeds = list(seeds or cfg.run.seeds)
    if not fractions or any(not 0 < f <= 1 for f in fractions):
        raise ContractViolationError(f"fractions must lie in (0, 1], got {fractions}")
    workers = workers or cfg.acquisition.workers

    out = Path(cfg.run.output_dir)
    truth = ground_truth_spectrum(cfg)
    image = facet_image(cfg, truth)
    mask_sets = {o: build_mask_set(cfg.geometry.grid_width, cfg.geometry.grid_height, o,
                                   min_library=cfg.acquisition.min_library) for o in orderings}

    jobs = [(o, s) for o in orderings for s in seeds]
    logger.info("Sweeping %d fractions over %d orderings x %d seeds (%d workers)",
                len(fractions), len(orderings), len(seeds), workers)

    def job(key):
        ordering, seed = key
        return _sweep_job(cfg, mask_sets[ordering], seed, fractions,
                          out / "sweep" / f"{ordering}_seed{seed}", truth, image)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        batches = list(pool.map(job, jobs))

    result = RatioSweepResult(tuple(row for batch in batches for row in batch))
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "sweep.csv", result.rows)
    logger.info("[OK] Sweep complete: %d rows written to %s", len(result.rows), out / "sweep.csv")
    return result


def compare_orderings(result, first="cake_cutting", second="russian_dolls"):
    """Median MSE of both orderings at every fraction they share"""
    present = set(result.orderings)
    missing = [o for o in (first, second) if o not in present]
    if missing:
        raise OrderingMissingError(f"sweep has no rows for: {', '.join(missing)}")
    comparisons = []
    for fraction in result.fractions:
        if not result.values(first, fraction) or not result.values(second, fraction):
            continue
        comparisons.append(OrderingComparison(fraction, result.median_mse(first, fraction),
                                              result.median_mse(second, fraction)))
    return comparisons


def trend_inversions(result, ordering, tolerance=0.0):
    """Adjacent fraction pairs where the median MSE goes up by more than tolerance"""
    medians = [result.median_mse(ordering, f) for f in result.fractions if result.values(ordering, f)]
    return sum(1 for a, b in zip(medians, medians[1:]) if b > a + tolerance)


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([r.ordering, repr(r.fraction), r.seed, r.masks, repr(float(r.mse_vs_full)),
                             repr(float(r.mse_vs_ground_truth)), r.iterations, int(r.converged),
                             repr(r.final_objective)])


def read_sweep_csv(path):
    with open(path, newline="") as f:
        rows = [SweepRow(
            ordering=row["ordering"],
            fraction=float(row["fraction"]),
            seed=int(row["seed"]),
            masks=int(row["masks"]),
            mse_vs_full=float(row["mse_vs_full"]),
            mse_vs_ground_truth=float(row["mse_vs_ground_truth"]),
            iterations=int(row["iterations"]),
            converged=bool(int(row["converged"])),
            final_objective=float(row["final_objective"]),
        ) for row in csv.DictReader(f)]
    return RatioSweepResult(tuple(rows))

