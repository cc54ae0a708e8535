"""Frame compatible sequences, the relations ≈ and ≦, and lattice operations.

A sequence is stored as its finite prefix ``x_1..x_depth`` together with the
cumulative block sizes ``|I_1|..|I_depth|`` of the decomposition it lives on.
Asymptotic relations are decided on a trailing window of blocks and are
reported as windowed verdicts, never as statements about limits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, IncompatibleError, NotInXRError

DEFAULT_COMPARE_TOL = 1e-3
DEFAULT_TAIL_FRACTION = 0.5


def _integral(values: np.ndarray) -> bool:
    return (values.dtype.kind in "iu"
            or (np.all(np.isfinite(values)) and np.all(values == np.round(values))
                and np.all(np.abs(values) < 2 ** 53)))


@dataclass(frozen=True, eq=False)
class RealSequence:
    """Finite prefix of a real sequence aligned to a nested decomposition.

    Integral inputs are kept as ``int64`` so that b-sequences of synthesized
    frames stay exact.

    Attributes:
        values: ``x_1..x_depth``.
        sizes: cumulative block sizes ``|I_1|..|I_depth|``.
        certificate: growth constant ``c`` when membership in X^R is known.
    """

    values: np.ndarray
    sizes: np.ndarray
    certificate: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype.kind not in "iu":
            values = values.astype(float)
            if _integral(values):
                values = values.astype(np.int64)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if values.ndim != 1 or sizes.ndim != 1 or len(values) != len(sizes):
            raise DomainError(
                f"length mismatch: {values.shape} values for {sizes.shape} blocks")
        if len(sizes) == 0 or sizes[0] <= 0 or np.any(np.diff(sizes) < 0):
            raise DomainError("block sizes must be positive and nondecreasing")
        values.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sizes", sizes)

    def __len__(self):
        return len(self.values)

    @property
    def increments(self) -> np.ndarray:
        """``x_1, x_2 - x_1, ...``"""
        return np.diff(self.values, prepend=0)

    @property
    def block_growth(self) -> np.ndarray:
        """``|I_1|, |I_2 \\ I_1|, ...``"""
        return np.diff(self.sizes, prepend=0)

    def normalized(self) -> np.ndarray:
        """``x_n / |I_n|``"""
        return self.values / self.sizes

    def _check(self, other: "RealSequence"):
        if not np.array_equal(self.sizes, other.sizes):
            raise IncompatibleError("sequences live on different decompositions")

    def __add__(self, other):
        self._check(other)
        return RealSequence(self.values + other.values, self.sizes)

    def __sub__(self, other):
        self._check(other)
        return RealSequence(self.values - other.values, self.sizes)

    def __mul__(self, c):
        return RealSequence(self.values * c, self.sizes)

    __rmul__ = __mul__

    def __neg__(self):
        return RealSequence(-self.values, self.sizes)

    @classmethod
    def index_sequence(cls, sizes: Sequence[int]) -> "RealSequence":
        """The sequence ``(|I_1|, |I_2|, ...)``."""
        sizes = np.asarray(sizes, dtype=np.int64)
        return cls(sizes.copy(), sizes, certificate=1.0)

    @classmethod
    def from_normalized(cls, a: Sequence[float], sizes: Sequence[int]) -> "RealSequence":
        sizes = np.asarray(sizes, dtype=np.int64)
        return cls(np.asarray(a, dtype=float) * sizes, sizes)


@dataclass(frozen=True)
class ComparisonVerdict:
    """Windowed decision between ``x ≈ y``, ``x ≦ y``, ``y ≦ x``.

    ``liminf_gap`` and ``limsup_gap`` are the extreme values of
    ``(x_n - y_n)/|I_n|`` over the window.
    """

    kind: str  # equivalent | left_dominated | right_dominated | incomparable | undecided
    liminf_gap: float
    limsup_gap: float
    blocks_used: int
    tol: float

    @property
    def gap(self) -> float:
        return max(abs(self.liminf_gap), abs(self.limsup_gap))


def is_frame_compatible(x: RealSequence, tol: float = 0.0) -> bool:
    """``0 <= x_1 <= |I_1|`` and ``0 <= x_i - x_{i-1} <= |I_i \\ I_{i-1}|``."""
    d = x.increments
    return bool(np.all(d >= -tol) and np.all(d <= x.block_growth + tol))


def floor_seq(x: RealSequence, snap: float = 0.0) -> RealSequence:
    """Entrywise floor.

    Values within ``snap`` of an integer are rounded to it first, which
    absorbs round-off in numerically computed b-sequences.
    """
    v = np.asarray(x.values, dtype=float)
    if snap > 0:
        r = np.round(v)
        v = np.where(np.abs(v - r) <= snap, r, v)
    return RealSequence(np.floor(v).astype(np.int64), x.sizes)


def _window(n: int, tail_fraction: float) -> slice:
    k = max(1, int(np.ceil(n * tail_fraction)))
    return slice(n - k, n)


def compare(x: RealSequence, y: RealSequence, tol: float = DEFAULT_COMPARE_TOL,
            tail_fraction: float = DEFAULT_TAIL_FRACTION) -> ComparisonVerdict:
    """Decide ``x ≈ y`` / ``x ≦ y`` / ``y ≦ x`` on the trailing window.

    Domination is only defined for nonnegative sequences; a non-equivalent
    pair with a negative entry raises :class:`DomainError`.
    """
    x._check(y)
    w = _window(len(x), tail_fraction)
    g = (np.asarray(x.values, float) - np.asarray(y.values, float))[w] / x.sizes[w]
    lo, hi = float(g.min()), float(g.max())
    used = len(g)
    if max(abs(lo), abs(hi)) <= tol:
        return ComparisonVerdict("equivalent", lo, hi, used, tol)
    if np.any(x.values < 0) or np.any(y.values < 0):
        raise DomainError("order relation is defined for nonnegative sequences only")
    if hi <= tol:
        return ComparisonVerdict("left_dominated", lo, hi, used, tol)
    if lo >= -tol:
        return ComparisonVerdict("right_dominated", lo, hi, used, tol)
    dg = np.diff(g)
    monotone = bool(np.all(dg >= -1e-15) or np.all(dg <= 1e-15))
    return ComparisonVerdict("incomparable" if monotone else "undecided", lo, hi, used, tol)


def xr_membership(x: RealSequence) -> float:
    """Smallest ``c`` with ``|x_1| <= c|I_1|`` and ``|x_i - x_{i-1}| <= c|I_i \\ I_{i-1}|``.

    Raises:
        NotInXRError: an increment occurs where the block does not grow.
    """
    d = np.abs(np.asarray(x.increments, dtype=float))
    growth = x.block_growth.astype(float)
    stuck = growth == 0
    if np.any(stuck & (d > 0)):
        k = int(np.flatnonzero(stuck & (d > 0))[0]) + 1
        raise NotInXRError(f"x changes at block {k} although |I_{k}| = |I_{k-1}|")
    ratios = np.divide(d, growth, out=np.zeros_like(d), where=~stuck)
    return float(ratios.max())


def decompose_positive(x: RealSequence) -> tuple[RealSequence, RealSequence]:
    """Split ``x`` in X^R as ``x_plus - x_minus`` with both parts in X^+.

    Positive increments accumulate in ``x_plus``, negative ones in
    ``x_minus``; each part increases by either 0 or ``|d_i|`` at step ``i``.
    """
    c = xr_membership(x)
    d = x.increments
    plus = np.cumsum(np.maximum(d, 0))
    minus = np.cumsum(np.maximum(-d, 0))
    return RealSequence(plus, x.sizes, c), RealSequence(minus, x.sizes, c)


def wedge(x: RealSequence, y: RealSequence) -> RealSequence:
    x._check(y)
    return RealSequence(np.minimum(x.values, y.values), x.sizes)


def vee(x: RealSequence, y: RealSequence) -> RealSequence:
    x._check(y)
    return RealSequence(np.maximum(x.values, y.values), x.sizes)


def random_compatible(sizes: Sequence[int], rng: np.random.Generator,
                      scale: float | None = None) -> RealSequence:
    """A random member of X on the given decomposition.

    Each increment is uniform on ``[0, s*|I_i \\ I_{i-1}|]`` where ``s`` is
    ``scale`` or itself drawn uniformly from ``[0, 1]``.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    s = rng.uniform() if scale is None else scale
    growth = np.diff(sizes, prepend=0)
    inc = rng.uniform(0, 1, len(sizes)) * s * growth
    return RealSequence(np.cumsum(inc), sizes)
