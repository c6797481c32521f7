"""
Image reconstruction from differential single-pixel measurements
Direct Hadamard inversion for the full set; for partial sets, total-variation
minimization by proximal outer steps solved with augmented-Lagrangian
alternating-direction updates
"""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve

from acquisition_sim import masks_for_fraction
from errors import ContractViolationError, IncompleteSamplingError
from image_synth import PixelImage

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ["label", "measurements", "iterations", "final_objective", "converged"]


@dataclass(frozen=True)
class MeasurementVector:
    y: np.ndarray              # counts/s, indexed by ordering position
    selected_rows: np.ndarray  # natural row index of each entry

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        rows = np.asarray(self.selected_rows, dtype=int)
        if y.shape != rows.shape:
            raise ContractViolationError("y and selected_rows must have the same length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "selected_rows", rows)

    def __len__(self):
        return len(self.y)

    def prefix(self, count):
        return MeasurementVector(self.y[:count], self.selected_rows[:count])


@dataclass(frozen=True)
class TVParams:
    """Solver settings.

    penalty_weight multiplies the data term of the orthonormalized operator
    (+/-1 rows divided by sqrt(N)), so at full sampling it is the inverse of the
    denoising strength and does not depend on the grid size. proximal_weight anchors
    each outer step to the previous iterate; inner_iterations caps the
    alternating-direction steps spent on one outer step.
    """
    penalty_weight: float = 4.0
    lagrangian_step: float = 1.0
    tolerance: float = 1e-6
    max_iterations: int = 500
    tv_variant: str = "anisotropic"
    proximal_weight: float = 1.0
    inner_iterations: int = 100

    def __post_init__(self):
        for name in ("penalty_weight", "lagrangian_step", "tolerance", "max_iterations",
                     "proximal_weight", "inner_iterations"):
            if getattr(self, name) <= 0:
                raise ContractViolationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.tv_variant not in ("anisotropic", "isotropic"):
            raise ContractViolationError(f"Unknown TV variant: {self.tv_variant}")


@dataclass
class TVResult:
    image: PixelImage
    iterations: int                                         # accepted outer steps
    converged: bool
    objective_history: list = field(default_factory=list)  # objective of each accepted iterate
    initial_objective: float = float("nan")
    admm_steps: int = 0

    @property
    def final_objective(self):
        return self.objective_history[-1] if self.objective_history else self.initial_objective


def differential_signal(records, integration_time=None, model=None):
    """y_k = (counts_pos - counts_neg) / T.

    With a source model the accidental share of the differential is removed using
    the aggregate rates: E[y] = (R + S1*S2*tau) * projection, so y is scaled by
    R / (R + S1*S2*tau).
    """
    positions = [r.mask_index for r in records]
    if len(set(positions)) != len(positions):
        raise ContractViolationError("duplicate mask_index in measurement records")
    rows = [r.natural_row for r in records]
    if len(set(rows)) != len(rows):
        raise ContractViolationError("duplicate mask row in measurement records")

    y = np.array([
        (r.counts_pos - r.counts_neg) / (integration_time or r.integration_time) for r in records
    ], dtype=float)
    if model is not None and model.include_accidentals:
        accidental = model.herald_singles_rate * model.signal_rate * model.coincidence_window
        if model.true_rate + accidental > 0:
            y *= model.true_rate / (model.true_rate + accidental)
    return MeasurementVector(y, np.array(rows, dtype=int))


def _sensing_rows(measurements, masks):
    """Measurements sorted by natural row with the matching +/-1 matrix"""
    position_of_row = np.empty(len(masks), dtype=int)
    position_of_row[masks.rows] = np.arange(len(masks))
    order = np.argsort(measurements.selected_rows, kind="stable")
    rows = measurements.selected_rows[order]
    matrix = masks.matrix()[position_of_row[rows]]
    return matrix, measurements.y[order], rows


def invert_full(measurements, masks):
    """x = H^T y / N; every row must be present"""
    n = len(masks)
    if len(measurements) != n or len(np.unique(measurements.selected_rows)) != n:
        raise IncompleteSamplingError(
            f"direct inversion needs all {n} rows, got {len(np.unique(measurements.selected_rows))}; "
            "use tv_reconstruct for partial sets")
    matrix, y, _ = _sensing_rows(measurements, masks)
    x = matrix.T @ y / n
    return PixelImage(x.reshape(masks.height, masks.width))


def _difference_operator(height, width):
    """Forward differences (horizontal block then vertical), zero across the far edges"""
    def diff(n):
        d = sparse.lil_matrix((n, n))
        for i in range(n - 1):
            d[i, i] = -1.0
            d[i, i + 1] = 1.0
        return d.tocsr()

    horizontal = sparse.kron(sparse.identity(height), diff(width))
    vertical = sparse.kron(diff(height), sparse.identity(width))
    return sparse.vstack([horizontal, vertical]).tocsr()


def total_variation(x, d, variant="anisotropic"):
    g = d @ x
    if variant == "anisotropic":
        return float(np.abs(g).sum())
    half = len(g) // 2
    return float(np.hypot(g[:half], g[half:]).sum())


def data_fidelity(x, a, y, penalty_weight):
    """(mu / 2N) ||A x - y||^2 with N the number of pixels"""
    r = a @ x - y
    return 0.5 * penalty_weight / a.shape[1] * float(r @ r)


def data_gradient(x, a, y, penalty_weight):
    return penalty_weight / a.shape[1] * (a.T @ (a @ x - y))


def _shrink(v, threshold, variant):
    if variant == "anisotropic":
        return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)
    half = len(v) // 2
    magnitude = np.hypot(v[:half], v[half:])
    scale = np.where(magnitude > threshold, 1.0 - threshold / np.maximum(magnitude, 1e-300), 0.0)
    return v * np.concatenate([scale, scale])


def objective(x, a, y, d, params):
    """TV(x) + data fidelity; the quantity the outer iterations decrease"""
    return total_variation(x, d, params.tv_variant) + data_fidelity(x, a, y, params.penalty_weight)


def tv_reconstruct(measurements, masks, params=None):
    """min_x TV(x) + (mu / 2N) ||A x - y||^2 over x >= 0.

    Outer iterations are proximal steps

        x_k+1 = argmin_{x >= 0} TV(x) + data(x) + (rho / 2) ||x - x_k||^2

    each solved by alternating-direction updates: an exact linear solve for x, then
    shrinkage on the gradient split w = Dx and projection onto x >= 0 through the
    split z = x, then the scaled multiplier updates for both constraints. The inner
    state is warm-started across outer steps.

    A step is accepted only when the inner solution brings the proximal objective
    below the current objective, which makes the recorded objective non-increasing.
    When no such step exists at inner precision the iterate is a fixed point and
    the solve stops; it counts as converged if the inner solver met its tolerance.
    """
    params = params or TVParams()
    if len(measurements) == 0:
        raise ContractViolationError("tv_reconstruct needs at least one measurement")
    a, y, _ = _sensing_rows(measurements, masks)
    height, width = masks.height, masks.width
    n = height * width
    mu, beta, rho = params.penalty_weight, params.lagrangian_step, params.proximal_weight

    d = _difference_operator(height, width)
    system = (mu / n) * (a.T @ a) + (rho + beta) * np.eye(n) + beta * (d.T @ d).toarray()
    factor = cho_factor(system)
    a_ty = (mu / n) * (a.T @ y)

    anchor = np.zeros(n)
    anchor_objective = initial_objective = objective(anchor, a, y, d, params)
    x, z, s = np.zeros(n), np.zeros(n), np.zeros(n)
    w, u = np.zeros(d.shape[0]), np.zeros(d.shape[0])
    history = []
    converged = False
    steps = 0

    for iteration in range(1, params.max_iterations + 1):
        inner_done = False
        for _ in range(params.inner_iterations):
            x = cho_solve(factor, a_ty + rho * anchor + beta * (d.T @ (w - u)) + beta * (z - s))
            dx = d @ x
            w = _shrink(dx + u, 1.0 / beta, params.tv_variant)
            z_prev, z = z, np.maximum(x + s, 0.0)
            u += dx - w
            s += x - z
            steps += 1
            residual = np.sqrt(np.sum((dx - w) ** 2) + np.sum((x - z) ** 2))
            scale = max(np.linalg.norm(z), 1e-12)
            if max(residual, np.linalg.norm(z - z_prev)) <= params.tolerance * scale:
                inner_done = True
                break

        candidate_objective = objective(z, a, y, d, params)
        step = np.linalg.norm(z - anchor)
        if candidate_objective + 0.5 * rho * step ** 2 > anchor_objective:
            converged = inner_done
            break
        change = step / max(np.linalg.norm(anchor), 1e-12)
        anchor, anchor_objective = z, candidate_objective
        history.append(anchor_objective)
        logger.debug("TV outer step %d: objective %.9g, relative change %.2e, %d inner steps so far",
                     iteration, anchor_objective, change, steps)
        if change < params.tolerance:
            converged = True
            break

    if not converged:
        logger.warning("TV solver stopped after %d outer steps without reaching tolerance %.1e",
                       len(history), params.tolerance)
    logger.debug("TV solve: %d measurements, %d outer steps, %d inner steps, objective %.6g",
                 len(measurements), len(history), steps, anchor_objective)
    return TVResult(PixelImage(anchor.reshape(height, width)), len(history), converged, history,
                    initial_objective, steps)


def progressive_reconstruct(measurements, masks, fractions, params=None):
    """Reconstruct from growing prefixes of one acquisition, keyed by fraction"""
    results = {}
    for fraction in sorted(fractions):
        count = masks_for_fraction(fraction, len(masks))
        if count > len(measurements):
            raise IncompleteSamplingError(
                f"fraction {fraction} needs {count} measurements, only {len(measurements)} recorded")
        results[fraction] = tv_reconstruct(measurements.prefix(count), masks, params)
    return results


def write_diagnostics_csv(path, rows):
    """rows: iterable of (label, measurements, TVResult)"""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for label, count, result in rows:
            writer.writerow([label, count, result.iterations, repr(float(result.final_objective)),
                             int(result.converged)])
