"""
Continuous-time quantum walk on a uniform waveguide array
Builds the nearest-neighbour Hamiltonian and evolves single- and two-photon inputs
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from errors import ContractViolationError, InvalidArrayError, UnsupportedInputError

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class WaveguideArray:
    """Uniform evanescently coupled array with open (hard-wall) edges"""
    num_guides: int = 13
    gamma: float = 0.35    # 1/mm, nearest-neighbour coupling
    beta: float = 0.0      # 1/mm, uniform propagation constant
    length: float = 9.0    # mm
    c: float = 1.0         # dimensionless Hamiltonian scale

    def __post_init__(self):
        if int(self.num_guides) != self.num_guides or self.num_guides < 2:
            raise InvalidArrayError(f"num_guides must be an integer >= 2, got {self.num_guides}")
        if self.gamma < 0:
            raise InvalidArrayError(f"gamma must be >= 0, got {self.gamma}")
        if self.length < 0:
            raise InvalidArrayError(f"length must be >= 0, got {self.length}")

    @property
    def central_guide(self):
        return self.num_guides // 2

    @property
    def coupling_length(self):
        """Dimensionless gamma*L; the calibration knob of the walk"""
        return self.c * self.gamma * self.length


def calibrated_array():
    """13-guide array calibrated so a central input reaches the outermost guides.

    The nominal coupling (0.0085 /mm over ~9 mm) would leave nearly all light in
    the input guide, so gamma*L is set to ~3.15 rad instead.
    """
    return WaveguideArray(num_guides=13, gamma=0.35, beta=0.0, length=9.0)


@dataclass(frozen=True)
class UnitaryMatrix:
    entries: np.ndarray

    @property
    def size(self):
        return self.entries.shape[0]

    def unitarity_error(self):
        """max |U^dagger U - I|"""
        u = self.entries
        return float(np.max(np.abs(u.conj().T @ u - np.eye(self.size))))


@dataclass(frozen=True)
class ModeSpectrum:
    """Per-waveguide intensities"""
    intensities: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.intensities, dtype=float)
        if np.any(values < 0):
            raise ContractViolationError("mode intensities must be nonnegative")
        object.__setattr__(self, "intensities", values)

    def __len__(self):
        return len(self.intensities)

    @property
    def total(self):
        return float(self.intensities.sum())

    def normalized(self, mode="unit"):
        """Unit-sum ("unit") or unit-maximum ("peak") copy; all-zero spectra stay zero"""
        values = self.intensities
        if mode == "unit":
            scale = values.sum()
        elif mode == "peak":
            scale = values.max() if len(values) else 0.0
        else:
            raise ValueError(f"Unknown normalization: {mode}")
        if scale <= 0:
            return ModeSpectrum(np.zeros_like(values))
        return ModeSpectrum(values / scale)


@dataclass(frozen=True)
class TwoPhotonCorrelation:
    """Symmetric coincidence matrix over ordered detector pairs.

    Entries over the full (q, r) grid sum to 1, so a pair landing in two different
    guides is split evenly between gamma_qr[q, r] and gamma_qr[r, q]: with no
    evolution, photons launched in guides 0 and 1 give 0.5 in each of those two
    entries. pair_probability folds the two back into the unordered probability.
    """
    gamma_qr: np.ndarray

    def pair_probability(self, q, r):
        """Probability of one photon in q and one in r (unordered)"""
        if q == r:
            return float(self.gamma_qr[q, q])
        return float(self.gamma_qr[q, r] + self.gamma_qr[r, q])


def build_hamiltonian(array):
    """Tridiagonal single-excitation Hamiltonian: c*beta on the diagonal, c*gamma beside it"""
    n = array.num_guides
    if n < 2:
        raise InvalidArrayError(f"num_guides must be >= 2, got {n}")
    h = np.diag(np.full(n, array.c * array.beta))
    off = np.full(n - 1, array.c * array.gamma)
    h += np.diag(off, 1) + np.diag(off, -1)
    return h


def _is_tridiagonal(h):
    return np.count_nonzero(np.triu(h, 2)) == 0 and np.count_nonzero(np.tril(h, -2)) == 0


def evolve(h, t):
    """U = exp(-iHt) through the eigendecomposition of the real symmetric H"""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolationError(f"Hamiltonian must be square, got shape {h.shape}")
    if not np.allclose(h, h.T, rtol=0.0, atol=1e-12):
        raise ContractViolationError("Hamiltonian must be symmetric")
    if t < 0:
        raise ContractViolationError(f"propagation length must be >= 0, got {t}")

    if _is_tridiagonal(h):
        eigenvalues, eigenvectors = eigh_tridiagonal(np.diag(h).copy(), np.diag(h, 1).copy())
    else:
        eigenvalues, eigenvectors = eigh(h)

    phases = np.exp(-1j * eigenvalues * t)
    u = (eigenvectors * phases) @ eigenvectors.T
    unitary = UnitaryMatrix(u)

    error = unitary.unitarity_error()
    if error > UNITARITY_TOLERANCE:
        logger.warning("Evolution lost unitarity: max|U^dagger U - I| = %.2e", error)
    return unitary


def evolve_array(array):
    """Convenience: evolve the array over its own length"""
    return evolve(build_hamiltonian(array), array.length)


def _check_guide(unitary, index):
    if not 0 <= index < unitary.size:
        raise UnsupportedInputError(f"guide index {index} outside 0..{unitary.size - 1}")


def single_photon_distribution(unitary, input_guide):
    """p_j = |U_{j,input}|^2"""
    _check_guide(unitary, input_guide)
    column = unitary.entries[:, input_guide]
    return ModeSpectrum(np.abs(column) ** 2)


# Bright-light (coherent state) input gives the same intensity pattern, so the
# camera-style preview uses the single-photon distribution directly.
coherent_preview = single_photon_distribution


def two_photon_correlation(unitary, i, j, indistinguishable=True):
    """Coincidence matrix for one photon launched in guide i and one in guide j"""
    _check_guide(unitary, i)
    _check_guide(unitary, j)
    if i == j:
        raise UnsupportedInputError("two-photon input needs two different guides")

    a = unitary.entries[:, i]
    b = unitary.entries[:, j]
    if indistinguishable:
        amplitude = np.outer(a, b) + np.outer(b, a)
        gamma_qr = np.abs(amplitude) ** 2
    else:
        gamma_qr = np.abs(np.outer(a, b)) ** 2 + np.abs(np.outer(b, a)) ** 2

    gamma_qr = 0.5 * (gamma_qr + gamma_qr.T)
    gamma_qr /= gamma_qr.sum()
    return TwoPhotonCorrelation(gamma_qr)


def two_photon_marginal(correlation):
    """Single-detector intensity seen for a two-photon input"""
    marginal = correlation.gamma_qr.sum(axis=1)
    return ModeSpectrum(marginal / marginal.sum())


def walk_spectrum(array, input_guides=None, indistinguishable=True):
    """Output spectrum for one input guide (single photon) or two (two-photon marginal)"""
    if input_guides is None:
        input_guides = (array.central_guide,)
    unitary = evolve_array(array)
    if len(input_guides) == 1:
        return single_photon_distribution(unitary, input_guides[0])
    if len(input_guides) == 2:
        correlation = two_photon_correlation(unitary, input_guides[0], input_guides[1],
                                             indistinguishable=indistinguishable)
        return two_photon_marginal(correlation)
    raise UnsupportedInputError(f"expected one or two input guides, got {len(input_guides)}")
