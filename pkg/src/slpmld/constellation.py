"""Square QAM alphabets, constructive-interference point classes and bit mapping.

Points are indexed by the integer value of their Gray label, so ``points[i]``
carries the label ``i`` written on ``bits_per_symbol`` bits (MSB first).  The
first half of a label codes the in-phase axis, the second half the quadrature
axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, InvalidSymbolError

SUPPORTED_ORDERS = (4, 16, 64)
MEMBERSHIP_TOL = 1e-9


class PointKind(enum.Enum):
    A = "A"  # inner point, no scalable part
    B = "B"  # real part scalable
    C = "C"  # imaginary part scalable
    D = "D"  # both parts scalable


@dataclass(frozen=True)
class PointClass:
    kind: PointKind
    real_scalable: bool
    imag_scalable: bool


@dataclass(frozen=True)
class SymbolBases:
    s_R: complex
    s_J: complex


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy square QAM alphabet with per-axis Gray labels."""

    order: int
    points: np.ndarray
    labels: tuple[str, ...]
    norm_factor: float

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def side(self) -> int:
        return int(round(np.sqrt(self.order)))

    @property
    def max_coordinate(self) -> float:
        """Largest per-axis amplitude, i.e. the coordinate of the outer ring."""
        return (self.side - 1) * self.norm_factor

    @property
    def bit_table(self) -> np.ndarray:
        """``(order, bits_per_symbol)`` array of label bits, row ``i`` for point ``i``."""
        return _bit_table(self.order)

    def index_of(self, s) -> np.ndarray:
        """Indices of the alphabet points equal to ``s`` (array-like).

        Raises :class:`InvalidSymbolError` if any entry is off the alphabet.
        """
        s = np.asarray(s, dtype=complex)
        d = np.abs(s.reshape(-1, 1) - self.points.reshape(1, -1))
        idx = np.argmin(d, axis=1)
        bad = d[np.arange(idx.size), idx] > MEMBERSHIP_TOL
        if np.any(bad):
            raise InvalidSymbolError(
                f"symbol {s.reshape(-1)[np.argmax(bad)]!r} is not a {self.order}-QAM point")
        return idx.reshape(s.shape)


def _gray(n: int) -> int:
    return n ^ (n >> 1)


@lru_cache(maxsize=None)
def _bit_table(order: int) -> np.ndarray:
    nbits = int(np.log2(order))
    table = (np.arange(order)[:, None] >> np.arange(nbits - 1, -1, -1)) & 1
    table = table.astype(np.uint8)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def build_constellation(order: int) -> Constellation:
    """Build the normalized ``order``-QAM alphabet (4, 16 or 64)."""
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    half_bits = int(np.log2(side))
    levels = 2 * np.arange(side) - side + 1  # odd integers, ascending
    # unit energy: mean |p|^2 = 2 * mean(level^2) over one axis
    norm = 1.0 / np.sqrt(2.0 * np.mean(levels.astype(float) ** 2))
    points = np.empty(order, dtype=complex)
    for ix in range(side):
        for iy in range(side):
            label = (_gray(ix) << half_bits) | _gray(iy)
            points[label] = norm * complex(levels[ix], levels[iy])
    points.setflags(write=False)
    nbits = 2 * half_bits
    labels = tuple(format(i, f"0{nbits}b") for i in range(order))
    return Constellation(order=order, points=points, labels=labels, norm_factor=float(norm))


def classify_point(s: complex, c: Constellation) -> PointClass:
    """Constructive-interference class of an alphabet point."""
    c.index_of(s)
    top = c.max_coordinate
    real_scalable = abs(abs(s.real) - top) <= MEMBERSHIP_TOL
    imag_scalable = abs(abs(s.imag) - top) <= MEMBERSHIP_TOL
    kind = {
        (False, False): PointKind.A,
        (True, False): PointKind.B,
        (False, True): PointKind.C,
        (True, True): PointKind.D,
    }[(real_scalable, imag_scalable)]
    return PointClass(kind, real_scalable, imag_scalable)


def decompose_symbol(s: complex) -> SymbolBases:
    s = complex(s)
    return SymbolBases(complex(s.real, 0.0), complex(0.0, s.imag))


@dataclass(frozen=True, eq=False)
class IndexPartition:
    """Split of the ``2n`` real components of a symbol vector into outer/inner sets.

    Component ``2i`` is the real part of symbol ``i`` and ``2i+1`` its imaginary
    part.  ``permutation @ v`` lists the outer components first, then the inner
    ones, each group in original order.
    """

    outer_indices: tuple[int, ...]
    inner_indices: tuple[int, ...]
    permutation: np.ndarray

    @property
    def n_outer(self) -> int:
        return len(self.outer_indices)

    @property
    def order(self) -> np.ndarray:
        return np.array(self.outer_indices + self.inner_indices, dtype=int)


def scalable_mask(s, c: Constellation) -> np.ndarray:
    """Boolean mask over the ``2n`` components: True where the component is outer."""
    s = np.asarray(s, dtype=complex).reshape(-1)
    c.index_of(s)
    top = c.max_coordinate
    mask = np.empty(2 * s.size, dtype=bool)
    mask[0::2] = np.abs(np.abs(s.real) - top) <= MEMBERSHIP_TOL
    mask[1::2] = np.abs(np.abs(s.imag) - top) <= MEMBERSHIP_TOL
    return mask


def build_index_partition(s, c: Constellation) -> IndexPartition:
    mask = scalable_mask(s, c)
    outer = tuple(int(i) for i in np.flatnonzero(mask))
    inner = tuple(int(i) for i in np.flatnonzero(~mask))
    n = mask.size
    perm = np.zeros((n, n))
    perm[np.arange(n), np.array(outer + inner, dtype=int)] = 1.0
    return IndexPartition(outer, inner, perm)


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map a 0/1 sequence (array or ``"0101"`` string) onto alphabet points."""
    if isinstance(bits, str):
        bits = [int(b) for b in bits]
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    k = c.bits_per_symbol
    if bits.size % k:
        raise ConfigurationError(f"bit count {bits.size} is not a multiple of {k}")
    if bits.size == 0:
        return np.zeros(0, dtype=complex)
    words = bits.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
    return c.points[words]


@lru_cache(maxsize=None)
def _lexicographic(order: int) -> tuple[np.ndarray, np.ndarray]:
    pts = build_constellation(order).points
    perm = np.lexsort((pts.imag, pts.real))
    return perm, pts[perm]


def demap(s_hat, c: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-point slicing.

    Returns ``(symbols, bits)``; ``bits`` is a flat uint8 array.  Equidistant
    points are resolved toward the smaller real part, then the smaller
    imaginary part.
    """
    s_hat = np.asarray(s_hat, dtype=complex).reshape(-1)
    perm, sorted_pts = _lexicographic(c.order)
    d = np.abs(s_hat[:, None] - sorted_pts[None, :]) ** 2
    dmin = d.min(axis=1, keepdims=True) if s_hat.size else d
    first = np.argmax(d <= dmin + 1e-12, axis=1)
    idx = perm[first]
    return c.points[idx], c.bit_table[idx].reshape(-1)
