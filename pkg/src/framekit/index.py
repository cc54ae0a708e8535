"""Nested index decompositions, quasi-metrics and remapping diagnostics.

An index set ``I`` is only ever seen through a finite prefix ``I_depth`` of
a nested family ``I_1 ⊂ I_2 ⊂ ...``.  Labels are integers or fixed-arity
integer tuples; point sets with real coordinates (time-frequency lattices)
carry integer surrogate labels plus a coordinate side table.
"""

from __future__ import annotations

import importlib.util
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import CollarError, DomainError, IncompatibleError

Label = Hashable

# Verdicts on asymptotic conditions look at this trailing fraction of n_list.
TREND_FRACTION = 1.0 / 3.0
DEFAULT_TREND_TOL = 1e-2


def _as_label(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return tuple(int(v) for v in x)
    return int(x)


@dataclass(frozen=True, eq=False)
class IndexDecomposition:
    """Finite prefix of a nested decomposition of a countable index set.

    Attributes:
        labels: Labels of ``I_depth`` in order; block ``n`` is the prefix of
            length ``block_sizes[n-1]``.
        block_sizes: Cumulative counts ``|I_1| <= |I_2| <= ...``.
        coordinates: Optional ``(len(labels), k)`` array used by metrics in
            place of the labels themselves.
        complete: True when ``I`` is finite and entirely materialized (for
            example the torus ``Z_N x Z_N``).
    """

    labels: tuple
    block_sizes: tuple
    coordinates: np.ndarray | None = None
    complete: bool = False

    def __post_init__(self):
        labels = tuple(_as_label(v) for v in self.labels)
        sizes = tuple(int(s) for s in self.block_sizes)
        if not sizes:
            raise DomainError("a decomposition needs at least one block")
        if sizes[0] <= 0:
            raise DomainError("block sizes must be strictly positive")
        if any(b < a for a, b in zip(sizes, sizes[1:])):
            raise DomainError("block sizes must be nondecreasing")
        if sizes[-1] != len(labels):
            raise DomainError(
                f"|I_depth| = {sizes[-1]} but {len(labels)} labels were given")
        if len(set(labels)) != len(labels):
            raise DomainError("labels must be distinct")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "block_sizes", sizes)
        if self.coordinates is not None:
            coords = np.asarray(self.coordinates, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != len(labels):
                raise DomainError("coordinate table does not match labels")
            coords.setflags(write=False)
            object.__setattr__(self, "coordinates", coords)

    @property
    def depth(self) -> int:
        return len(self.block_sizes)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.block_sizes, dtype=np.int64)

    @cached_property
    def position(self) -> dict:
        return {lab: k for k, lab in enumerate(self.labels)}

    @cached_property
    def coords(self) -> np.ndarray:
        if self.coordinates is not None:
            return self.coordinates
        arr = np.array([lab if isinstance(lab, tuple) else (lab,)
                        for lab in self.labels], dtype=float)
        return arr.reshape(len(self.labels), -1)

    def size(self, n: int) -> int:
        """``|I_n|`` for the 1-based block index ``n``."""
        self._check_block(n)
        return self.block_sizes[n - 1]

    def block(self, n: int) -> tuple:
        return self.labels[:self.size(n)]

    def shell(self, n: int) -> tuple:
        """Labels of ``I_n \\ I_{n-1}``."""
        lo = 0 if n == 1 else self.size(n - 1)
        return self.labels[lo:self.size(n)]

    def index_of(self, label) -> int:
        try:
            return self.position[_as_label(label)]
        except KeyError:
            raise DomainError(f"label {label!r} is not materialized") from None

    def coords_of(self, labels: Iterable) -> np.ndarray:
        idx = [self.index_of(lab) for lab in labels]
        return self.coords[idx]

    def prefix(self, depth: int) -> "IndexDecomposition":
        """The same decomposition cut after ``depth`` blocks."""
        self._check_block(depth)
        m = self.block_sizes[depth - 1]
        coords = None if self.coordinates is None else self.coordinates[:m]
        return IndexDecomposition(self.labels[:m], self.block_sizes[:depth],
                                  coords, self.complete and depth == self.depth)

    def same_as(self, other: "IndexDecomposition") -> bool:
        return (self.labels == other.labels
                and self.block_sizes == other.block_sizes)

    def _check_block(self, n: int):
        if not 1 <= n <= self.depth:
            raise DomainError(f"block {n} not materialized (depth {self.depth})")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], start: int = 0) -> "IndexDecomposition":
        """Consecutive integer labels ``start, start+1, ...`` cut at ``sizes``."""
        sizes = [int(s) for s in sizes]
        return cls(tuple(range(start, start + sizes[-1])), tuple(sizes))

    @classmethod
    def naturals(cls, depth: int) -> "IndexDecomposition":
        """``I_n = {1, ..., n}`` for ``n = 1..depth``."""
        return cls.from_sizes(range(1, depth + 1), start=1)

    @classmethod
    def symmetric_boxes(cls, n_max: int, dim: int = 1) -> "IndexDecomposition":
        """``I_n = [-n, n]^dim`` in ``Z^dim`` for ``n = 1..n_max``.

        Labels are ints for ``dim == 1`` and tuples otherwise; inside each
        shell they are sorted lexicographically.
        """
        axis = np.arange(-n_max, n_max + 1)
        grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), -1).reshape(-1, dim)
        radius = np.abs(grid).max(axis=1)
        radius[radius == 0] = 1  # the origin belongs to I_1
        order = np.lexsort(tuple(grid[:, k] for k in reversed(range(dim))) + (radius,))
        grid = grid[order]
        sizes = [int(((2 * n + 1) ** dim)) for n in range(1, n_max + 1)]
        if dim == 1:
            labels = tuple(int(v) for v in grid[:, 0])
        else:
            labels = tuple(tuple(int(v) for v in row) for row in grid)
        return cls(labels, tuple(sizes))

    def to_dict(self) -> dict:
        out = {"labels": [list(l) if isinstance(l, tuple) else l for l in self.labels],
               "block_sizes": list(self.block_sizes)}
        if self.coordinates is not None:
            out["coordinates"] = self.coordinates.tolist()
        if self.complete:
            out["complete"] = True
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "IndexDecomposition":
        return cls(tuple(data["labels"]), tuple(data["block_sizes"]),
                   data.get("coordinates"), bool(data.get("complete", False)))


# -- quasi-metrics -----------------------------------------------------------


def _pairwise_abs(a, b):
    return np.abs(a[:, None, 0] - b[None, :, 0])


def _pairwise_sup(a, b):
    return np.abs(a[:, None, :] - b[None, :, :]).max(axis=-1)


def _torus_sup(modulus):
    def pairwise(a, b):
        d = np.abs(a[:, None, :] - b[None, :, :]) % modulus
        return np.minimum(d, modulus - d).max(axis=-1)
    return pairwise


@dataclass(eq=False)
class QuasiMetric:
    """Symmetric nonnegative distance on labels, evaluated on coordinates.

    ``pairwise(A, B)`` maps coordinate arrays of shapes ``(m, k)`` and
    ``(p, k)`` to the ``(m, p)`` distance matrix.  Distinct labels may sit at
    distance zero (repeated time-frequency points).
    """

    name: str
    pairwise: Callable[[np.ndarray, np.ndarray], np.ndarray]
    upper_density_cache: dict = field(default_factory=dict)

    def dist(self, i, j, decomp: IndexDecomposition | None = None) -> float:
        if decomp is None:
            a = np.atleast_2d(np.asarray(_label_tuple(i), dtype=float))
            b = np.atleast_2d(np.asarray(_label_tuple(j), dtype=float))
        else:
            a, b = decomp.coords_of([i]), decomp.coords_of([j])
        return float(self.pairwise(a, b)[0, 0])

    def check_triangle(self, decomp: IndexDecomposition, samples: int = 256,
                       seed: int = 0, tol: float = 1e-12) -> bool:
        """Spot-check symmetry, ``d(i,i) = 0`` and the triangle inequality."""
        rng = np.random.default_rng(seed)
        c = decomp.coords
        idx = rng.integers(0, len(c), size=(samples, 3))
        a, b, k = c[idx[:, 0]], c[idx[:, 1]], c[idx[:, 2]]
        dab = np.diagonal(self.pairwise(a, b))
        dba = np.diagonal(self.pairwise(b, a))
        dak = np.diagonal(self.pairwise(a, k))
        dkb = np.diagonal(self.pairwise(k, b))
        daa = np.diagonal(self.pairwise(a, a))
        return bool(np.all(dab >= 0) and np.allclose(dab, dba, atol=tol)
                    and np.all(np.abs(daa) <= tol)
                    and np.all(dab <= dak + dkb + tol))

    def upper_density(self, decomp: IndexDecomposition, radius: float) -> int:
        """Largest ball cardinality among materialized centers."""
        key = (id(decomp), float(radius))
        if key not in self.upper_density_cache:
            best = 0
            for rows in _chunks(len(decomp.labels)):
                d = self.pairwise(decomp.coords[rows], decomp.coords)
                best = max(best, int((d <= radius).sum(axis=1).max()))
            self.upper_density_cache[key] = best
        return self.upper_density_cache[key]


def _label_tuple(label):
    return label if isinstance(label, tuple) else (label,)


def _chunks(m: int, size: int = 2048):
    for lo in range(0, m, size):
        yield slice(lo, min(m, lo + size))


def get_metric(key: str) -> QuasiMetric:
    """Look up a metric by registry key.

    Keys: ``abs`` (``|i-j|`` on integers), ``sup2d`` / ``sup`` (max-norm on
    integer tuples), ``torus:N`` (max-norm with wrap-around modulo ``N``) and
    ``custom:<file.py>`` where the file defines ``pairwise(A, B)``.
    """
    if key == "abs":
        return QuasiMetric("abs", _pairwise_abs)
    if key in ("sup2d", "sup"):
        return QuasiMetric(key, _pairwise_sup)
    if key.startswith("torus:"):
        return QuasiMetric(key, _torus_sup(int(key.split(":", 1)[1])))
    if key.startswith("custom:"):
        path = key.split(":", 1)[1]
        spec = importlib.util.spec_from_file_location("framekit_custom_metric", path)
        if spec is None or spec.loader is None:
            raise DomainError(f"cannot load metric file {path}")
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        return QuasiMetric(key, module.pairwise)
    raise DomainError(f"unknown metric {key!r}")


# -- balls and boundary collars ---------------------------------------------


def ball(decomp: IndexDecomposition, metric: QuasiMetric, center, radius: float) -> frozenset:
    """Materialized labels within ``radius`` of ``center``."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    c = decomp.coords_of([center])
    d = metric.pairwise(c, decomp.coords)[0]
    return frozenset(lab for lab, hit in zip(decomp.labels, d <= radius) if hit)


def _min_distance(metric: QuasiMetric, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(b) == 0:
        return np.full(len(a), np.inf)
    out = np.empty(len(a))
    for rows in _chunks(len(a)):
        out[rows] = metric.pairwise(a[rows], b).min(axis=1)
    return out


def boundary_fraction(decomp: IndexDecomposition, metric: QuasiMetric,
                      n: int, R: float) -> float:
    """Fraction of ``I_n`` lying within ``R`` of ``I \\ I_n``.

    Only the materialized labels are known, so each ``i in I_n`` must be
    decided: either a materialized outside label is within ``R`` (``i`` is
    in the collar), or ``i`` is farther than ``R`` from the outermost shell
    (no unmaterialized label can reach it, assuming the decomposition grows
    outward).  Otherwise :class:`CollarError` is raised.
    """
    m = decomp.size(n)
    if n >= decomp.depth and not decomp.complete:
        raise CollarError(f"collar not witnessed: nothing materialized beyond block {n}")
    coords = decomp.coords
    near_out = _min_distance(metric, coords[:m], coords[m:]) <= R
    if not decomp.complete:
        outer = coords[decomp.block_sizes[-2]:] if decomp.depth > 1 else coords
        undecided = ~near_out & (_min_distance(metric, coords[:m], outer) <= R)
        if undecided.any():
            raise CollarError(
                f"collar not witnessed: {int(undecided.sum())} labels of I_{n} "
                f"are within {R} of the outermost materialized shell")
    return float(near_out.sum()) / m


@dataclass
class UniformMetricReport:
    table: list  # rows (n, R, fraction)
    per_radius: dict  # R -> (n_list, fractions, consistent)
    consistent: bool
    note: str = ("finite trend test on the trailing third of n_list; "
                 "not a proof of the asymptotic condition")


def _tail(values, fraction: float = TREND_FRACTION, minimum: int = 2):
    k = max(minimum, math.ceil(len(values) * fraction))
    return values[-k:]


def uniform_metric_report(decomp: IndexDecomposition, metric: QuasiMetric,
                          R_list: Sequence[float], n_list: Sequence[int],
                          tol: float = DEFAULT_TREND_TOL) -> UniformMetricReport:
    """Boundary fractions over a grid of blocks and radii, with a trend verdict.

    For every radius the trailing third of the fractions must be
    nonincreasing and either strictly decreasing overall or already below
    ``tol``.
    """
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 2:
        raise DomainError("need at least two blocks to assess a trend")
    table, per_radius, ok = [], {}, True
    for R in R_list:
        fr = np.array([boundary_fraction(decomp, metric, n, R) for n in n_list])
        table.extend((n, R, f) for n, f in zip(n_list, fr))
        tail = _tail(fr)
        good = bool(np.all(np.diff(tail) <= 1e-12)
                    and (tail[-1] < tail[0] or tail.max() <= tol))
        per_radius[R] = (n_list, fr, good)
        ok &= good
    return UniformMetricReport(table, per_radius, ok)


# -- remaps -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IndexRemap:
    """Bijection ``a: I -> J`` tabulated on the materialized source labels.

    Images need not all be materialized in ``target``.
    """

    forward: dict
    source: IndexDecomposition
    target: IndexDecomposition

    def __post_init__(self):
        fwd = {_as_label(k): _as_label(v) for k, v in self.forward.items()}
        if len(set(fwd.values())) != len(fwd):
            raise DomainError("remap is not injective")
        missing = [lab for lab in self.source.labels if lab not in fwd]
        if missing:
            raise DomainError(f"remap undefined on {len(missing)} source labels")
        object.__setattr__(self, "forward", fwd)

    @cached_property
    def inverse(self) -> dict:
        return {v: k for k, v in self.forward.items()}

    @classmethod
    def from_function(cls, func: Callable, source: IndexDecomposition,
                      target: IndexDecomposition) -> "IndexRemap":
        return cls({lab: func(lab) for lab in source.labels}, source, target)


@dataclass
class RemapMeasureReport:
    n_list: list
    overlap: np.ndarray  # |a(I_n) ∩ J_n| / |I_n|
    size_ratio: np.ndarray  # |J_n| / |I_n|
    passed: bool


def remap_measure_condition(remap: IndexRemap, n_list: Sequence[int],
                            tol: float = DEFAULT_TREND_TOL) -> RemapMeasureReport:
    """Both counting ratios of the remap condition, with a trend verdict."""
    n_list = sorted(int(n) for n in n_list)
    top = n_list[-1]
    if top > remap.source.depth or top > remap.target.depth:
        raise IncompatibleError(
            f"depth mismatch: block {top} requested, source depth "
            f"{remap.source.depth}, target depth {remap.target.depth}")
    overlap, ratio = [], []
    for n in n_list:
        src = remap.source.block(n)
        tgt = set(remap.target.block(n))
        hits = sum(1 for lab in src if remap.forward[lab] in tgt)
        overlap.append(hits / len(src))
        ratio.append(len(tgt) / len(src))
    overlap, ratio = np.array(overlap), np.array(ratio)
    passed = bool(np.all(np.abs(_tail(overlap) - 1) <= tol)
                  and np.all(np.abs(_tail(ratio) - 1) <= tol))
    return RemapMeasureReport(n_list, overlap, ratio, passed)


@dataclass
class LipschitzReport:
    """Empirical envelope ``r(u) = max{d(a^-1 j1, a^-1 j2) : e(j1, j2) <= u}``."""

    target_dist: np.ndarray  # sorted e values
    envelope_values: np.ndarray  # running max of source distances
    passed: bool | None
    worst_pair: tuple | None = None

    def envelope(self, u: float) -> float:
        k = np.searchsorted(self.target_dist, u, side="right")
        return 0.0 if k == 0 else float(self.envelope_values[k - 1])


def _coords_for(decomp: IndexDecomposition, labels) -> np.ndarray:
    if decomp.coordinates is not None:
        return decomp.coords_of(labels)
    return np.array([_label_tuple(lab) for lab in labels], dtype=float)


def remap_lipschitz_condition(remap: IndexRemap, metric_source: QuasiMetric,
                              metric_target: QuasiMetric, sample_pairs,
                              candidate: Callable[[float], float] | None = None,
                              tol: float = 1e-12) -> LipschitzReport:
    """Check ``d(a^-1 j1, a^-1 j2) <= r(e(j1, j2))`` on sampled target pairs."""
    pairs = [(_as_label(p), _as_label(q)) for p, q in sample_pairs]
    if not pairs:
        raise DomainError("empty sample of pairs")
    try:
        src1 = [remap.inverse[p] for p, _ in pairs]
        src2 = [remap.inverse[q] for _, q in pairs]
    except KeyError as exc:
        raise DomainError(f"target label {exc.args[0]!r} is not an image") from None
    e = np.diagonal(metric_target.pairwise(_coords_for(remap.target, [p for p, _ in pairs]),
                                           _coords_for(remap.target, [q for _, q in pairs])))
    d = np.diagonal(metric_source.pairwise(_coords_for(remap.source, src1),
                                           _coords_for(remap.source, src2)))
    order = np.argsort(e, kind="stable")
    e_sorted, env = e[order], np.maximum.accumulate(d[order])
    passed, worst = None, None
    if candidate is not None:
        bound = np.array([candidate(float(u)) for u in e])
        excess = d - bound
        passed = bool(np.all(excess <= tol))
        k = int(np.argmax(excess))
        worst = pairs[k]
    return LipschitzReport(e_sorted, env, passed, worst)
