"""
Facet image synthesis on the virtual DMD grid
Renders a mode spectrum as Gaussian spots and groups pixels into superpixels
"""
import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import ContractViolationError, GeometryError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OpticalGeometry:
    """Mapping of waveguide modes onto the active DMD region"""
    grid_width: int = 64          # pixels (columns)
    grid_height: int = 16         # pixels (rows)
    mode_pitch_px: float = 5.0    # pixels between adjacent mode centers
    mode_waist_px: float = 1.7    # 1/e^2 radius; FWHM ~ 2 px
    center_row: float = 7.5
    first_mode_col: float = 1.5
    num_modes: int = 13

    def __post_init__(self):
        if self.grid_width <= 0 or self.grid_height <= 0:
            raise GeometryError(f"grid must be positive, got {self.grid_width}x{self.grid_height}")
        if self.mode_pitch_px <= 0:
            raise GeometryError(f"mode pitch must be > 0, got {self.mode_pitch_px}")
        if self.mode_waist_px <= 0:
            raise GeometryError(f"mode waist must be > 0, got {self.mode_waist_px}")
        if self.num_modes < 1:
            raise GeometryError(f"need at least one mode, got {self.num_modes}")

    @property
    def shape(self):
        return (self.grid_height, self.grid_width)

    @property
    def num_pixels(self):
        return self.grid_width * self.grid_height

    @property
    def sigma_px(self):
        return self.mode_waist_px / 2.0

    def mode_centers(self):
        """(row, col) of every mode; raises if any lies outside the grid"""
        cols = self.first_mode_col + self.mode_pitch_px * np.arange(self.num_modes)
        rows = np.full(self.num_modes, float(self.center_row))
        outside = (cols < 0) | (cols > self.grid_width - 1) | (rows < 0) | (rows > self.grid_height - 1)
        if np.any(outside):
            bad = int(np.flatnonzero(outside)[0])
            raise GeometryError(
                f"mode {bad} center ({rows[bad]:.2f}, {cols[bad]:.2f}) lies outside "
                f"the {self.grid_width}x{self.grid_height} grid")
        return np.column_stack([rows, cols])


@dataclass(frozen=True)
class PixelImage:
    """Intensity grid, rows x columns.

    Reconstructions may carry small negative noise values; they are clamped on export.
    """
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def shape(self):
        return self.values.shape

    @property
    def total(self):
        return float(self.values.sum())

    def clamped(self):
        return PixelImage(np.maximum(self.values, 0.0))

    def normalized(self):
        total = self.values.sum()
        if total <= 0:
            raise ContractViolationError("cannot normalize an image with nonpositive total")
        return PixelImage(self.values / total)

    def flatten(self):
        """Row-major vector, matching the mask reshape convention"""
        return self.values.reshape(-1)


@dataclass(frozen=True)
class SuperpixelAssignment:
    """Per-mode pixel sets, each a tuple of (row, col)"""
    pixels: tuple
    shape: tuple

    def __len__(self):
        return len(self.pixels)

    def mask(self, mode):
        gate = np.zeros(self.shape, dtype=bool)
        for row, col in self.pixels[mode]:
            gate[row, col] = True
        return gate


def _lattice_gaussian(n, center, sigma):
    """Gaussian sampled at integer positions, unit sum over the unbounded lattice, cut to 0..n-1"""
    reach = int(math.ceil(12 * sigma)) + 2
    k = np.arange(int(math.floor(center)) - reach, int(math.ceil(center)) + reach + 1)
    weights = np.exp(-((k - center) ** 2) / (2 * sigma ** 2))
    weights /= weights.sum()
    out = np.zeros(n)
    inside = (k >= 0) & (k < n)
    out[k[inside]] = weights[inside]
    return out


def mode_footprint(geom, mode):
    """Unit-integral spot of one mode on the grid"""
    row, col = geom.mode_centers()[mode]
    gy = _lattice_gaussian(geom.grid_height, row, geom.sigma_px)
    gx = _lattice_gaussian(geom.grid_width, col, geom.sigma_px)
    return np.outer(gy, gx)


def render_image(spectrum, geom):
    """Image = sum_k I_k * G_k"""
    intensities = np.asarray(spectrum.intensities, dtype=float)
    if len(intensities) != geom.num_modes:
        raise ContractViolationError(
            f"spectrum has {len(intensities)} modes, geometry expects {geom.num_modes}")
    centers = geom.mode_centers()

    image = np.zeros(geom.shape)
    for k, (row, col) in enumerate(centers):
        if intensities[k] == 0:
            continue
        gy = _lattice_gaussian(geom.grid_height, row, geom.sigma_px)
        gx = _lattice_gaussian(geom.grid_width, col, geom.sigma_px)
        image += intensities[k] * np.outer(gy, gx)
    return PixelImage(image)


def build_superpixels(geom, radius_px):
    """Pixels within radius of each mode center; shared pixels go to the nearest center, then lower index"""
    if geom.mode_pitch_px < 1:
        raise GeometryError(f"mode pitch {geom.mode_pitch_px} px is below one pixel; superpixels overlap")
    if radius_px < 0:
        raise GeometryError(f"superpixel radius must be >= 0, got {radius_px}")
    centers = geom.mode_centers()

    rows, cols = np.indices(geom.shape)
    # distance of every pixel to every center: (modes, rows, cols)
    dist = np.hypot(rows[None] - centers[:, 0, None, None], cols[None] - centers[:, 1, None, None])
    owner = np.argmin(dist, axis=0)   # argmin keeps the first (lowest) index on ties

    claimed = np.zeros(geom.shape, dtype=bool)
    pixels = []
    for k in range(len(centers)):
        members = (dist[k] <= radius_px + 1e-12) & (owner == k)
        if not members.any():
            flat = int(np.argmin(dist[k]))
            members = np.zeros(geom.shape, dtype=bool)
            members.flat[flat] = True
            if owner.flat[flat] != k:
                raise GeometryError(f"mode {k} has no pixel of its own at radius {radius_px}")
        if np.any(members & claimed):
            raise GeometryError(f"superpixel of mode {k} overlaps another mode")
        claimed |= members
        pixels.append(tuple((int(r), int(c)) for r, c in zip(*np.nonzero(members))))

    logger.debug("Built %d superpixels, sizes %s", len(pixels), [len(p) for p in pixels])
    return SuperpixelAssignment(tuple(pixels), geom.shape)


def write_image_csv(path, image):
    """Row-major, one image row per line; floats written in round-trip form"""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in image.values:
            writer.writerow([repr(float(v)) for v in row])


def read_image_csv(path):
    with open(path, newline="") as f:
        rows = [[float(v) for v in row] for row in csv.reader(f) if row]
    return PixelImage(np.array(rows))


def write_pgm(path, image, maxval=255):
    """Plain-text graymap of the clamped image, scaled so the brightest pixel is maxval"""
    values = np.maximum(image.values, 0.0)
    peak = float(values.max())
    levels = np.zeros(values.shape, dtype=int) if peak <= 0 else np.rint(values / peak * maxval).astype(int)
    height, width = values.shape
    with open(path, "w") as f:
        f.write("P2\n")
        f.write(f"# scale {peak!r}\n")
        f.write(f"{width} {height}\n{maxval}\n")
        for row in levels:
            f.write(" ".join(str(v) for v in row) + "\n")


def read_pgm(path):
    """Inverse of write_pgm up to 8-bit quantization"""
    scale = None
    tokens = []
    with open(path) as f:
        for line in f:
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "scale":
                    scale = float(parts[1])
                continue
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path} is not a plain graymap")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    levels = np.array([int(v) for v in tokens[4:4 + width * height]], dtype=float).reshape(height, width)
    factor = (scale if scale is not None else 1.0) / maxval
    return PixelImage(levels * factor)
