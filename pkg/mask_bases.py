"""
Hadamard mask sets and their acquisition orderings
Natural (Sylvester row) order, Cake-cutting (ascending block count) and Russian Dolls
(lowest embedded Hadamard library first, block-sorted within each group)
"""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.linalg import hadamard

from errors import ContractViolationError

logger = logging.getLogger(__name__)

ORDERINGS = ("natural", "cake_cutting", "russian_dolls")


@dataclass(frozen=True)
class Mask:
    """+/-1 pattern, rows x columns"""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if not np.all(np.abs(values) == 1):
            raise ContractViolationError("mask entries must all be +1 or -1")
        object.__setattr__(self, "values", values.astype(np.int8))


@dataclass(frozen=True)
class MaskSet:
    """Masks in acquisition order.

    patterns[k] is the mask shown at position k, rows[k] its Sylvester row index.
    """
    patterns: np.ndarray      # (N, height, width) int8
    rows: np.ndarray          # natural row index per position
    ordering: str
    block_counts: np.ndarray  # per position

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ValueError(f"Unknown ordering: {self.ordering}")

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        for pattern in self.patterns:
            yield Mask(pattern)

    def mask(self, position):
        return Mask(self.patterns[position])

    @property
    def height(self):
        return self.patterns.shape[1]

    @property
    def width(self):
        return self.patterns.shape[2]

    def matrix(self, count=None):
        """First `count` masks as +/-1 rows of length width*height (row-major)"""
        count = len(self) if count is None else count
        return self.patterns[:count].reshape(count, -1).astype(float)

    def reordered(self, permutation, ordering):
        permutation = np.asarray(permutation)
        return MaskSet(self.patterns[permutation], self.rows[permutation], ordering,
                       self.block_counts[permutation])


def hadamard_matrix(n):
    """Sylvester Hadamard matrix, H H^T = n I and an all-ones first row"""
    if int(n) != n or n < 1 or (int(n) & (int(n) - 1)) != 0:
        raise ContractViolationError(f"Hadamard order must be a power of two, got {n}")
    return hadamard(int(n)).astype(np.int8)


def reshape_row(row, w, h):
    """Row-major fill: mask[r][c] = row[r*w + c]"""
    row = np.asarray(row)
    if row.size != w * h:
        raise ContractViolationError(f"row of length {row.size} cannot fill a {w}x{h} mask")
    return Mask(row.reshape(h, w))


def count_blocks(mask):
    """Number of 4-connected regions of equal sign"""
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask)
    _, positive = ndimage.label(values > 0)
    _, negative = ndimage.label(values < 0)
    return positive + negative


def _block_counts(patterns, workers=1):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(count_blocks, patterns))
    else:
        counts = [count_blocks(p) for p in patterns]
    return np.array(counts, dtype=int)


def natural_mask_set(w, h, workers=1):
    n = w * h
    patterns = hadamard_matrix(n).reshape(n, h, w)
    return MaskSet(patterns, np.arange(n), "natural", _block_counts(patterns, workers))


def order_cake_cutting(mask_set):
    """Positions sorted ascending by block count, ties by natural row"""
    return np.lexsort((mask_set.rows, mask_set.block_counts))


@lru_cache(maxsize=None)
def _library(n, w, h):
    """Byte strings of H_n rows reshaped to w x h"""
    patterns = hadamard_matrix(n).reshape(n, h, w)
    return frozenset(p.tobytes() for p in patterns)


def library_order(pattern, min_library=4):
    """Order of the smallest Hadamard library the mask is embedded in.

    A mask belongs to the library one level down when it is constant on 2x2 blocks
    and its block-decimated pattern is a row of that library. Returns the mask's own
    set size when no lower library identifies it.
    """
    current = np.asarray(pattern, dtype=np.int8)
    size = current.size
    order = size
    while current.shape[0] % 2 == 0 and current.shape[1] % 2 == 0 and size // 4 >= min_library:
        down = current[::2, ::2]
        if not np.array_equal(np.kron(down, np.ones((2, 2), dtype=np.int8)), current):
            break
        h, w = down.shape
        if down.tobytes() not in _library(size // 4, w, h):
            break
        current = down
        size //= 4
        order = size
    return order


def russian_dolls_groups(mask_set, min_library=4):
    return np.array([library_order(p, min_library) for p in mask_set.patterns], dtype=int)


def order_russian_dolls(mask_set, min_library=4):
    """Lowest library group first, unidentified masks last, block-sorted inside each group"""
    groups = russian_dolls_groups(mask_set, min_library)
    return np.lexsort((mask_set.rows, mask_set.block_counts, groups))


def build_mask_set(w, h, ordering="cake_cutting", workers=1, min_library=4):
    """Full Sylvester set reshaped to w x h and arranged in the requested order"""
    natural = natural_mask_set(w, h, workers)
    if ordering == "natural":
        return natural
    if ordering == "cake_cutting":
        permutation = order_cake_cutting(natural)
    elif ordering == "russian_dolls":
        permutation = order_russian_dolls(natural, min_library)
    else:
        raise ValueError(f"Unknown ordering: {ordering}")
    logger.info("[OK] Ordered %d masks (%dx%d) by %s", len(natural), w, h, ordering)
    return natural.reordered(permutation, ordering)


def write_masks_csv(path, mask_set):
    """One mask per line in acquisition order: natural row, block count, row-major +/-1 values"""
    header = ["natural_row", "block_count"] + [
        f"r{r}c{c}" for r in range(mask_set.height) for c in range(mask_set.width)]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row, blocks, pattern in zip(mask_set.rows, mask_set.block_counts, mask_set.patterns):
            writer.writerow([int(row), int(blocks)] + [int(v) for v in pattern.reshape(-1)])


def read_masks_csv(path, ordering="natural"):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        last = header[-1]
        h = int(last[1:last.index("c")]) + 1
        w = int(last[last.index("c") + 1:]) + 1
        rows, blocks, patterns = [], [], []
        for record in reader:
            if not record:
                continue
            rows.append(int(record[0]))
            blocks.append(int(record[1]))
            patterns.append(np.array([int(v) for v in record[2:]], dtype=np.int8).reshape(h, w))
    return MaskSet(np.array(patterns, dtype=np.int8), np.array(rows), ordering, np.array(blocks))


def write_permutation(path, mask_set):
    """Plain-text ordering: two comment lines, then one natural row index per line"""
    with open(path, "w") as f:
        f.write(f"# ordering {mask_set.ordering}\n")
        f.write(f"# grid {mask_set.width}x{mask_set.height}\n")
        for row in mask_set.rows:
            f.write(f"{int(row)}\n")


def read_permutation(path):
    """Returns (ordering, width, height, natural rows)"""
    ordering, width, height, rows = "natural", None, None, []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                if key == "ordering":
                    ordering = value
                elif key == "grid":
                    width, height = (int(v) for v in value.split("x"))
                continue
            rows.append(int(line))
    return ordering, width, height, np.array(rows, dtype=int)


def mask_set_from_permutation(path, workers=1):
    """Rebuild an ordered mask set from a saved permutation file"""
    ordering, width, height, rows = read_permutation(path)
    natural = natural_mask_set(width, height, workers)
    return natural.reordered(rows, ordering)
