"""
Heralded single-pixel acquisition
Expected coincidence rates per displayed mask, Poisson photon counting,
accidental coincidences and superpixel raster scans
"""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from errors import ContractViolationError
from walk_core import ModeSpectrum

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["ordering_position", "natural_row_index", "counts_pos", "counts_neg",
               "integration_time_s", "seed"]


@dataclass(frozen=True)
class SourceDetectorModel:
    """SPDC source, chip and bucket detector reduced to scalar rates.

    The source chain bounds what the detectors can see: each arm carries
    pair_rate / heralding_efficiency singles, the signal arm passes a
    system_transmission share of them, and at most a heralding_efficiency share of
    the signal singles have their twin registered. Observed rates set to None are
    taken at those bounds; explicit ones must respect them.
    """
    pair_rate: float = 5e5               # pairs/s at the source
    heralding_efficiency: float = 0.25   # pairs/singles
    system_transmission: float = 0.02    # chip input to bucket detector
    herald_singles_rate: float = 1.9e6   # S1, events/s
    signal_singles_rate: float = field(default=4500.0, metadata={"auto": True})  # S2, all pixels ON
    coincidence_rate: float = field(default=1000.0, metadata={"auto": True})     # true, all pixels ON
    coincidence_window: float = 16e-9    # s
    signal_dark_rate: float = 0.0        # events/s on the bucket detector
    include_accidentals: bool = True

    def __post_init__(self):
        rates = {
            "pair_rate": self.pair_rate,
            "herald_singles_rate": self.herald_singles_rate,
            "signal_singles_rate": self.signal_singles_rate,
            "coincidence_rate": self.coincidence_rate,
            "coincidence_window": self.coincidence_window,
            "signal_dark_rate": self.signal_dark_rate,
        }
        for name, value in rates.items():
            if value is not None and value < 0:
                raise ContractViolationError(f"{name} must be >= 0, got {value}")
        if not 0 < self.heralding_efficiency <= 1:
            raise ContractViolationError(
                f"heralding_efficiency must be in (0, 1], got {self.heralding_efficiency}")
        if not 0 < self.system_transmission <= 1:
            raise ContractViolationError(
                f"system_transmission must be in (0, 1], got {self.system_transmission}")

        bounds = (
            ("herald_singles_rate", self.herald_singles_rate, self.source_singles_rate),
            ("signal_singles_rate", self.signal_rate, self.source_singles_rate * self.system_transmission),
            ("coincidence_rate", self.true_rate, self.heralding_efficiency * self.signal_rate),
        )
        for name, value, bound in bounds:
            if value > bound * (1 + 1e-12):
                raise ContractViolationError(
                    f"{name} = {value:g}/s exceeds the {bound:g}/s the source chain can deliver")

    @property
    def source_singles_rate(self):
        """Singles per arm at the source"""
        return self.pair_rate / self.heralding_efficiency

    @property
    def signal_rate(self):
        """S2 with every pixel ON, from the observed value or the source chain"""
        if self.signal_singles_rate is not None:
            return self.signal_singles_rate
        return self.source_singles_rate * self.system_transmission

    @property
    def true_rate(self):
        """True coincidences/s with every pixel ON"""
        if self.coincidence_rate is not None:
            return self.coincidence_rate
        return self.heralding_efficiency * self.signal_rate

    @property
    def loss_db(self):
        return -10.0 * math.log10(self.system_transmission)

    @property
    def all_on_accidental_rate(self):
        if not self.include_accidentals:
            return 0.0
        return accidental_rate(self.herald_singles_rate, self.signal_rate + self.signal_dark_rate,
                               self.coincidence_window)

    @property
    def snr(self):
        """True over accidental coincidences with every pixel ON"""
        accidental = self.all_on_accidental_rate
        return math.inf if accidental == 0 else self.true_rate / accidental

    def without_noise(self):
        """Same rates with accidentals and dark counts switched off"""
        return replace(self, include_accidentals=False, signal_dark_rate=0.0)


@dataclass(frozen=True)
class MeasurementRecord:
    mask_index: int          # position in the ordering
    natural_row: int         # Sylvester row index of the mask
    counts_pos: int
    counts_neg: int
    integration_time: float  # s, per polarity
    rng_seed: int

    def __post_init__(self):
        if self.counts_pos < 0 or self.counts_neg < 0:
            raise ContractViolationError("counts must be >= 0")
        if self.integration_time <= 0:
            raise ContractViolationError("integration time must be > 0")


def accidental_rate(s1, s2, window):
    """Uncorrelated coincidences: S1 * S2 * tau"""
    return s1 * s2 * window


def _on_rate(on_fraction, model, total_true_rate):
    true_rate = total_true_rate * on_fraction
    if not model.include_accidentals:
        return true_rate
    s2_on = model.signal_rate * on_fraction + model.signal_dark_rate
    return true_rate + accidental_rate(model.herald_singles_rate, s2_on, model.coincidence_window)


def _check_normalized(image):
    total = image.values.sum()
    if abs(total - 1.0) > 1e-9:
        raise ContractViolationError(f"image must be normalized to unit sum, got {total:.6g}")


def expected_coincidence_rate(image, mask, polarity, model, total_true_rate=None):
    """Coincidence rate while the mask (polarity '+') or its complement ('-') is displayed"""
    _check_normalized(image)
    if polarity not in ("+", "-"):
        raise ValueError(f"Unknown polarity: {polarity}")
    total_true_rate = model.true_rate if total_true_rate is None else total_true_rate
    if total_true_rate < 0:
        raise ContractViolationError("total_true_rate must be >= 0")
    on = mask.values == (1 if polarity == "+" else -1)
    return _on_rate(float(image.values[on].sum()), model, total_true_rate)


def derive_seed(master_seed, key):
    """Independent per-record seed; depends only on (master, key)"""
    return int(np.random.SeedSequence([int(master_seed), int(key)]).generate_state(1)[0])


def sample_counts(rate, integration_time, seed):
    """Poisson count with mean rate*T"""
    if rate < 0 or integration_time <= 0:
        raise ContractViolationError("need rate >= 0 and integration time > 0")
    return int(np.random.default_rng(seed).poisson(rate * integration_time))


def masks_for_fraction(fraction, total):
    """ceil(f*N) with a guard against floating-point overshoot"""
    if not 0 < fraction <= 1:
        raise ContractViolationError(f"fraction must be in (0, 1], got {fraction}")
    return min(total, max(1, math.ceil(fraction * total - 1e-9)))


def forward_model(image, masks, count=None, total_true_rate=1.0):
    """Exact noiseless differential signal R * <mask, image> for the first `count` masks"""
    matrix = masks.matrix(count)
    return total_true_rate * (matrix @ image.flatten())


def expected_rates(image, masks, count, model, total_true_rate=None):
    """(rate_pos, rate_neg) arrays for the first `count` masks"""
    _check_normalized(image)
    total_true_rate = model.true_rate if total_true_rate is None else total_true_rate
    x = image.flatten()
    projection = masks.matrix(count) @ x
    total = x.sum()
    f_pos = np.clip((total + projection) / 2.0, 0.0, None)
    f_neg = np.clip((total - projection) / 2.0, 0.0, None)
    return _on_rate(f_pos, model, total_true_rate), _on_rate(f_neg, model, total_true_rate)


def run_acquisition(image, masks, fraction, integration_time, model, seed,
                    shot_noise=True, workers=1):
    """Measure both polarities of the first ceil(f*N) masks in order.

    With shot_noise off each count is the expected count rounded to the nearest
    integer, so the differential signal matches the expected projection to within
    1/T per record rather than exactly.
    """
    if integration_time <= 0:
        raise ContractViolationError("integration time must be > 0")
    count = masks_for_fraction(fraction, len(masks))
    rate_pos, rate_neg = expected_rates(image, masks, count, model)

    def measure(position):
        row = int(masks.rows[position])
        record_seed = derive_seed(seed, row)
        mean_pos = rate_pos[position] * integration_time
        mean_neg = rate_neg[position] * integration_time
        if shot_noise:
            rng = np.random.default_rng(record_seed)
            counts_pos, counts_neg = int(rng.poisson(mean_pos)), int(rng.poisson(mean_neg))
        else:
            counts_pos, counts_neg = int(np.rint(mean_pos)), int(np.rint(mean_neg))
        return MeasurementRecord(position, row, counts_pos, counts_neg, float(integration_time), record_seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(measure, range(count)))
    else:
        records = [measure(k) for k in range(count)]

    logger.info("[OK] Acquired %d/%d masks (%s order), %.0f s simulated exposure",
                count, len(masks), masks.ordering, 2 * count * integration_time)
    return records


def acquisition_time(num_masks, integration_time, overhead_per_mask=0.0):
    """Simulated wall-clock: two exposures per mask plus per-mask latency"""
    return 2 * num_masks * integration_time + num_masks * overhead_per_mask


def accidental_background(signal_singles, integration_time, model):
    """Expected accidental counts given the bucket-detector singles recorded in one gate"""
    if not model.include_accidentals:
        return 0.0
    return accidental_rate(model.herald_singles_rate, signal_singles / integration_time,
                           model.coincidence_window) * integration_time


def raster_scan(image, superpixels, integration_time, model, seed, shot_noise=True,
                total_true_rate=None):
    """Gate one superpixel at a time; background-subtract, clamp at zero, normalize.

    Each gate records coincidences and bucket-detector singles, and the accidental
    background comes from the recorded singles. Without shot noise both counts are
    the rounded expectations. An all-dark scene yields an all-zero spectrum
    (normalization is skipped).
    """
    total_true_rate = model.true_rate if total_true_rate is None else total_true_rate
    counts = np.zeros(len(superpixels))
    for mode in range(len(superpixels)):
        on_fraction = float(image.values[superpixels.mask(mode)].sum())
        rate = _on_rate(on_fraction, model, total_true_rate)
        singles_rate = model.signal_rate * on_fraction + model.signal_dark_rate
        if shot_noise:
            rng = np.random.default_rng(derive_seed(seed, mode))
            raw = int(rng.poisson(rate * integration_time))
            singles = int(rng.poisson(singles_rate * integration_time))
        else:
            raw = int(np.rint(rate * integration_time))
            singles = int(np.rint(singles_rate * integration_time))
        background = accidental_background(singles, integration_time, model)
        counts[mode] = max(raw - background, 0.0)
        logger.debug("Raster mode %d: raw %d, singles %d, background %.1f", mode, raw, singles, background)

    return ModeSpectrum(counts).normalized("unit")


def write_log(path, records):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in records:
            writer.writerow([r.mask_index, r.natural_row, r.counts_pos, r.counts_neg,
                             repr(float(r.integration_time)), r.rng_seed])


def read_log(path):
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            records.append(MeasurementRecord(
                mask_index=int(row["ordering_position"]),
                natural_row=int(row["natural_row_index"]),
                counts_pos=int(row["counts_pos"]),
                counts_neg=int(row["counts_neg"]),
                integration_time=float(row["integration_time_s"]),
                rng_seed=int(row["seed"]),
            ))
    return records
