"""
Mode-spectrum extraction and comparison
Column profiles of reconstructed images, Gaussian-sum fitting and the MSE metric
"""
import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from errors import ContractViolationError, DegenerateFitWarning, FitConvergenceError
from walk_core import ModeSpectrum

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class ColumnProfile:
    values: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class GaussianFit:
    amplitudes: np.ndarray
    centers: np.ndarray    # columns
    widths: np.ndarray     # sigma, columns
    residual_norm: float
    baseline: float = 0.0
    converged: bool = True
    evaluations: int = 0

    @property
    def intensities(self):
        """Integrated Gaussian areas normalized to unit sum"""
        return ModeSpectrum(self.amplitudes * self.widths * SQRT_2PI).normalized("unit")

    def model(self, columns):
        return _gaussian_sum(columns, self.amplitudes, self.centers, self.widths) + self.baseline


def _gaussian_sum(columns, amplitudes, centers, widths):
    z = (columns[None, :] - centers[:, None]) / widths[:, None]
    return (amplitudes[:, None] * np.exp(-0.5 * z ** 2)).sum(axis=0)


def column_profile(image):
    """values[c] = sum_r max(img[r][c], 0)"""
    return ColumnProfile(np.maximum(image.values, 0.0).sum(axis=0))


def fit_gaussians(profile, n_modes, init_centers, init_width=1.0, fit_baseline=False,
                  max_evaluations=2000, min_prominence=0.01):
    """Least-squares fit of sum_k A_k exp(-(c - c_k)^2 / 2 s_k^2) to the profile.

    Trust-region reflective steps with analytic Jacobian; amplitudes are kept
    nonnegative and each center stays within 0.45 pitch of its start, so centers
    remain strictly increasing.
    A DegenerateFitWarning is issued when more initial centers sit on bright
    columns than the profile has peaks with at least min_prominence of its range.
    """
    values = np.asarray(profile.values, dtype=float)
    columns = np.arange(len(values), dtype=float)
    centers0 = np.asarray(init_centers, dtype=float)
    if n_modes < 1 or len(centers0) != n_modes:
        raise ContractViolationError(f"need {n_modes} >= 1 initial centers, got {len(centers0)}")
    if np.any(np.diff(centers0) <= 0):
        raise ContractViolationError("initial centers must be strictly increasing")
    if centers0[0] < 0 or centers0[-1] > len(values) - 1:
        raise ContractViolationError("initial centers must lie inside the profile")
    if init_width <= 0:
        raise ContractViolationError("initial width must be positive")
    if not 0 <= min_prominence < 1:
        raise ContractViolationError(f"min_prominence must be in [0, 1), got {min_prominence}")

    scale = float(np.max(np.abs(values))) or 1.0
    nearest = np.clip(np.rint(centers0).astype(int), 0, len(values) - 1)

    # only modes bright enough to show a peak of their own can be unresolved
    floor = float(np.min(values))
    threshold = min_prominence * (float(np.max(values)) - floor)
    peaks, _ = find_peaks(np.concatenate([[floor], values, [floor]]), prominence=threshold)
    bright = int(np.sum(values[nearest] - floor >= threshold))
    if bright > len(peaks):
        warnings.warn(f"{bright} modes stand above {min_prominence:.0%} of the profile range but only "
                      f"{len(peaks)} peaks are resolved; fit is degenerate",
                      DegenerateFitWarning, stacklevel=2)

    amplitudes0 = np.maximum(values[nearest], 1e-9 * scale)

    reach = 0.45 * float(np.min(np.diff(centers0))) if n_modes > 1 else float(len(values))
    lower = np.concatenate([np.zeros(n_modes), centers0 - reach, np.full(n_modes, 0.25 * init_width)])
    upper = np.concatenate([np.full(n_modes, np.inf), centers0 + reach, np.full(n_modes, 4.0 * init_width)])
    start = np.concatenate([amplitudes0, centers0, np.full(n_modes, init_width)])
    if fit_baseline:
        lower = np.append(lower, -np.inf)
        upper = np.append(upper, np.inf)
        start = np.append(start, float(np.min(values)))

    def unpack(p):
        return p[:n_modes], p[n_modes:2 * n_modes], p[2 * n_modes:3 * n_modes]

    def residuals(p):
        a, c, s = unpack(p)
        r = _gaussian_sum(columns, a, c, s) - values
        return r + p[-1] if fit_baseline else r

    def jacobian(p):
        a, c, s = unpack(p)
        z = (columns[None, :] - c[:, None]) / s[:, None]
        g = np.exp(-0.5 * z ** 2)
        d_a = g
        d_c = a[:, None] * g * z / s[:, None]
        d_s = a[:, None] * g * z ** 2 / s[:, None]
        blocks = [d_a, d_c, d_s]
        if fit_baseline:
            blocks.append(np.ones((1, len(columns))))
        return np.vstack(blocks).T

    result = least_squares(residuals, start, jac=jacobian, bounds=(lower, upper), method="trf",
                           x_scale="jac", ftol=1e-12, xtol=1e-12, gtol=1e-12,
                           max_nfev=max_evaluations)
    a, c, s = unpack(result.x)
    fit = GaussianFit(
        amplitudes=a.copy(), centers=c.copy(), widths=s.copy(),
        residual_norm=float(np.linalg.norm(result.fun)),
        baseline=float(result.x[-1]) if fit_baseline else 0.0,
        converged=result.status > 0,
        evaluations=int(result.nfev),
    )
    if result.status <= 0:
        raise FitConvergenceError(f"Gaussian fit did not converge: {result.message}", fit=fit)
    logger.debug("Gaussian fit: %d modes, %d evaluations, residual %.3g",
                 n_modes, fit.evaluations, fit.residual_norm)
    return fit


def extract_spectrum(image, geom, fit_baseline=False):
    """Column profile + Gaussian fit initialized from the optical geometry"""
    profile = column_profile(image)
    centers = geom.mode_centers()[:, 1]
    fit = fit_gaussians(profile, geom.num_modes, centers, init_width=geom.sigma_px,
                        fit_baseline=fit_baseline)
    return fit.intensities, fit


def _values(spectrum):
    return np.asarray(spectrum.intensities if isinstance(spectrum, ModeSpectrum) else spectrum, dtype=float)


def normalize_spectrum(values, mode="peak"):
    return ModeSpectrum(_values(values)).normalized(mode)


def mse(a, b):
    """(1/N) sum (a_i - b_i)^2"""
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise ContractViolationError(f"spectra differ in length: {len(a)} vs {len(b)}")
    return float(np.mean((a - b) ** 2))


def spectrum_mse(a, b, normalization="peak"):
    """MSE after normalizing both spectra the same way ("unit" sum or "peak")"""
    return mse(normalize_spectrum(a, normalization), normalize_spectrum(b, normalization))


def write_spectrum_csv(path, spectrum):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["mode_index", "intensity"])
        for k, value in enumerate(_values(spectrum)):
            writer.writerow([k, repr(float(value))])


def read_spectrum_csv(path):
    with open(path, newline="") as f:
        return ModeSpectrum(np.array([float(row["intensity"]) for row in csv.DictReader(f)]))


def write_fit_csv(path, fit):
    intensities = fit.intensities.intensities
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["mode_index", "amplitude", "center", "width", "intensity",
                         "baseline", "residual_norm"])
        for k in range(len(fit.amplitudes)):
            writer.writerow([k, repr(float(fit.amplitudes[k])), repr(float(fit.centers[k])),
                             repr(float(fit.widths[k])), repr(float(intensities[k])),
                             repr(fit.baseline), repr(fit.residual_norm)])
