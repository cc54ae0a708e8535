"""Operator-level measure, off-diagonal decay tables and superframe checks.

For a matrix ``A`` on ``l^2(I)`` the sequence ``b_n(A) = sum_{i in I_n} A_ii``
extends ``b`` from frames (through their Gram projections) to operators.
Decay is reported as tables over radii, never as a yes/no statement about
an infinite operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ._spectral import blockwise_eigh, spectral_norm
from .errors import DomainError, IncompatibleError
from .frames import (DEFAULT_RANK_TOL, FrameSnapshot, analyze, direct_sum,
                     measure_sequence, projection_product_norm, two_depth_stability)
from .index import IndexDecomposition, QuasiMetric, _chunks, _min_distance
from .measure import DEFAULT_CLUSTER_EPS, MeasureProfile, profile
from .sequences import RealSequence, xr_membership

ADDITIVITY_FRACTION = 1.0 / 3.0


@dataclass(frozen=True, eq=False)
class OperatorSnapshot:
    """A square matrix indexed by the labels of ``decomp`` (dense or sparse)."""

    matrix: np.ndarray | sp.spmatrix
    decomp: IndexDecomposition
    metric: QuasiMetric | None = None

    def __post_init__(self):
        A = self.matrix if sp.issparse(self.matrix) else np.asarray(self.matrix)
        m = len(self.decomp.labels)
        if A.shape != (m, m):
            raise DomainError(f"matrix has shape {A.shape}, expected {(m, m)}")
        object.__setattr__(self, "matrix", A)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else self.matrix

    def adjoint(self) -> "OperatorSnapshot":
        return OperatorSnapshot(self.matrix.conj().T, self.decomp, self.metric)

    def __matmul__(self, other: "OperatorSnapshot") -> "OperatorSnapshot":
        if not self.decomp.same_as(other.decomp):
            raise IncompatibleError("operators live on different decompositions")
        return OperatorSnapshot(self.matrix @ other.matrix, self.decomp, self.metric)


@dataclass(frozen=True)
class BOp:
    """Real and imaginary parts of ``b_op(A)`` with the norm certificate."""

    real: RealSequence
    imag: RealSequence
    norm: float
    certified: bool


def b_op(op: OperatorSnapshot, tol: float = 1e-9) -> BOp:
    """Block partial sums of the diagonal of ``A``.

    Both parts are members of the real sequence space with growth constant
    at most ``||A||``; ``certified`` records that this held on the prefix.
    """
    A = op.matrix
    d = np.asarray(A.diagonal())
    csum = np.cumsum(d)[op.decomp.sizes - 1]
    norm = spectral_norm(A)
    re = RealSequence(np.real(csum), op.decomp.sizes)
    im = RealSequence(np.imag(csum), op.decomp.sizes)
    ok = xr_membership(re) <= norm + tol and xr_membership(im) <= norm + tol
    return BOp(RealSequence(re.values, re.sizes, norm), RealSequence(im.values, im.sizes, norm),
               norm, bool(ok))


# -- decay tables ----------------------------------------------------------------


@dataclass
class NonExpansiveReport:
    """Worst interior tail energies per radius.

    ``col_tail[k]`` is ``max_i sum_{d(i,j) > R_k} |A_ji|^2`` (the columns of
    ``A``) and ``row_tail[k]`` the same for ``A*``, both over centers whose
    ball of radius ``R_k`` is fully materialized.
    """

    radii: np.ndarray
    row_tail: np.ndarray
    col_tail: np.ndarray
    interior_counts: np.ndarray
    excluded_counts: np.ndarray
    interior_only: bool = True

    @property
    def tail(self) -> np.ndarray:
        return np.maximum(self.row_tail, self.col_tail)

    def radius_for(self, eps: float) -> float | None:
        """Smallest tabulated radius whose tails are both at most ``eps``."""
        hits = np.flatnonzero(self.tail <= eps)
        return float(self.radii[hits[0]]) if len(hits) else None

    def rows(self):
        for r, a, b, i, e in zip(self.radii, self.col_tail, self.row_tail,
                                 self.interior_counts, self.excluded_counts):
            yield float(r), float(a), float(b), int(i), int(e)


def _interior(decomp: IndexDecomposition, metric: QuasiMetric, R: float) -> np.ndarray:
    m = len(decomp.labels)
    if decomp.complete:
        return np.ones(m, dtype=bool)
    if decomp.depth < 2:
        return np.zeros(m, dtype=bool)
    coords = decomp.coords
    outer = coords[decomp.block_sizes[-2]:]
    return _min_distance(metric, coords, outer) > R


def nonexpansive_report(op: OperatorSnapshot, radii: Sequence[float],
                        metric: QuasiMetric | None = None) -> NonExpansiveReport:
    """Tail energies of ``A`` and ``A*`` outside balls of each radius.

    Raises:
        DomainError: no metric, or no interior center at some radius.
    """
    metric = metric or op.metric
    if metric is None:
        raise DomainError("a metric is required for decay tables")
    radii = np.sort(np.asarray(radii, dtype=float))
    A2 = np.abs(op.dense()) ** 2
    coords = op.decomp.coords
    m = len(coords)
    row_t, col_t, n_in, n_out = [], [], [], []
    dist = np.empty((m, m))
    for rows in _chunks(m):
        dist[rows] = metric.pairwise(coords[rows], coords)
    for R in radii:
        inside = _interior(op.decomp, metric, R)
        if not inside.any():
            raise DomainError(f"no interior center at radius {R}")
        far = dist > R
        col = (A2 * far).sum(axis=0)  # column i: sum_j |A_ji|^2
        row = (A2 * far).sum(axis=1)  # row i of A = column i of A*
        col_t.append(float(col[inside].max()))
        row_t.append(float(row[inside].max()))
        n_in.append(int(inside.sum()))
        n_out.append(int(m - inside.sum()))
    return NonExpansiveReport(radii, np.array(row_t), np.array(col_t),
                              np.array(n_in), np.array(n_out))


def tracial_residual(op1: OperatorSnapshot, op2: OperatorSnapshot) -> RealSequence:
    """``|b_n(T1 T2) - b_n(T2 T1)|`` per block; ``.normalized()`` gives ``r_n``."""
    if not op1.decomp.same_as(op2.decomp):
        raise IncompatibleError("operators live on different decompositions")
    if op1.matrix.shape != op2.matrix.shape:
        raise IncompatibleError("operator shapes differ")
    A, B = op1.matrix, op2.matrix
    # diag(AB)_i = sum_j A_ij B_ji without forming the products
    if sp.issparse(A) or sp.issparse(B):
        d12 = np.asarray(sp.csr_matrix(A).multiply(sp.csr_matrix(B).T).sum(axis=1)).ravel()
        d21 = np.asarray(sp.csr_matrix(B).multiply(sp.csr_matrix(A).T).sum(axis=1)).ravel()
    else:
        d12 = np.einsum("ij,ji->i", A, B)
        d21 = np.einsum("ij,ji->i", B, A)
    sizes = op1.decomp.sizes
    diff = np.cumsum(d12 - d21)[sizes - 1]
    return RealSequence(np.abs(diff), sizes)


def window_means(r: np.ndarray, sizes_n: Sequence[int]) -> np.ndarray:
    """Mean of ``r`` over blocks ``[n/2, n]`` for each ``n`` (1-based blocks)."""
    return np.array([float(np.mean(r[max(n // 2, 1) - 1:n])) for n in sizes_n])


# -- superframes -------------------------------------------------------------------


@dataclass
class SuperframeReport:
    """Whether the direct sum is a frame for the sum of the spans.

    ``combined_bounds[0]`` is the smallest eigenvalue of the combined frame
    operator on a space of dimension ``sum(ranks)``; it is 0 when the
    direct sum has smaller rank.
    """

    is_superframe: bool
    p1p2_norm: float
    combined_bounds: tuple
    ranks: tuple
    combined_rank: int
    consistent: bool


def _eigs_desc(A) -> np.ndarray:
    w = np.concatenate([g.w.ravel() for g in blockwise_eigh(A)])
    return np.sort(w)[::-1]


def restrict(frame: FrameSnapshot, positions) -> FrameSnapshot:
    """The subfamily at the given 0-based positions, as a single block."""
    positions = np.asarray(positions, dtype=int)
    labels = tuple(frame.decomp.labels[k] for k in positions)
    decomp = IndexDecomposition(labels, (len(labels),))
    dual = None if frame.explicit_dual is None else frame.explicit_dual[positions]
    return FrameSnapshot(frame.ambient_dim, frame.vectors[positions], decomp, dual)


def superframe_check(*frames: FrameSnapshot, tol: float = 1e-9,
                     rank_tol: float = DEFAULT_RANK_TOL,
                     positions=None) -> SuperframeReport:
    """Superframe test for two or more frames on one decomposition.

    For two frames ``p1p2_norm`` is ``||P1 P2||``; for more it is the largest
    pairwise value.  The verdict comes from the combined lower bound and is
    cross-checked against ``p1p2_norm < 1 - tol`` (meaningful for two).

    ``positions`` restricts the test to a subfamily, typically the labels
    whose vectors are not cut by the truncation.
    """
    if len(frames) < 2:
        raise DomainError("need at least two frames")
    for f in frames[1:]:
        if not f.decomp.same_as(frames[0].decomp):
            raise IncompatibleError("frames live on different decompositions")
    if positions is not None:
        frames = tuple(restrict(f, positions) for f in frames)
    analyses = [analyze(f, rank_tol) for f in frames]
    ranks = tuple(a.span_dim for a in analyses)
    norms = [projection_product_norm(analyses[i], analyses[j])
             for i in range(len(frames)) for j in range(i + 1, len(frames))]
    grams = [a.gram for a in analyses]
    if all(sp.issparse(g) for g in grams):
        G = sum(grams[1:], grams[0])
    else:  # mixing sparse and dense would produce np.matrix
        G = sum((g.toarray() if sp.issparse(g) else g for g in grams[1:]),
                grams[0].toarray() if sp.issparse(grams[0]) else grams[0])
    w = _eigs_desc(G)
    top = float(w[0])
    total = sum(ranks)
    low = float(w[total - 1]) if total <= len(w) else 0.0
    low = max(low, 0.0)
    combined_rank = int(np.sum(w > rank_tol * top))
    is_sf = bool(low > max(tol, rank_tol * top))
    p12 = float(max(norms))
    consistent = True
    if len(frames) == 2:
        consistent = is_sf == (p12 < 1 - tol)
    return SuperframeReport(is_sf, p12, (low, top), ranks, combined_rank, consistent)


def projection_join_rank(P1: np.ndarray, P2: np.ndarray, rank_tol: float = 1e-9) -> int:
    """Rank of ``P1 ∨ P2``, the projection onto ``range(P1 + P2)``."""
    w = _eigs_desc(P1 + P2)
    return int(np.sum(w > rank_tol * max(float(w[0]), 1.0)))


@dataclass
class AdditivityReport:
    """``a_n(F1 ⊕ F2)`` against ``a_n(F1) + a_n(F2)`` on the stable blocks."""

    residual: float
    residual_sequence: np.ndarray
    stable_blocks: int
    window: tuple
    profile_sum: tuple
    profile_direct_sum: MeasureProfile
    superframe: SuperframeReport
    a1: np.ndarray = field(repr=False, default=None)
    a2: np.ndarray = field(repr=False, default=None)
    a12: np.ndarray = field(repr=False, default=None)


def _a_with_stability(f, f_fine, rank_tol):
    ms = measure_sequence(analyze(f, rank_tol))
    if f_fine is not None:
        ms = two_depth_stability(ms, measure_sequence(analyze(f_fine, rank_tol)))
    return ms


def superset_additivity_report(f1: FrameSnapshot, f2: FrameSnapshot,
                               refined: tuple | None = None,
                               fraction: float = ADDITIVITY_FRACTION,
                               cluster_eps: float = DEFAULT_CLUSTER_EPS,
                               rank_tol: float = DEFAULT_RANK_TOL,
                               require_superframe: bool = True,
                               positions=None) -> AdditivityReport:
    """Additivity residual of the superset ``F1 ⊕ F2``.

    The residual is the largest ``|a_n(F1 ⊕ F2) - a_n(F1) - a_n(F2)|`` over
    the trailing ``fraction`` of the stable blocks.  ``refined`` is an
    optional pair of deeper truncations used to decide stability, and
    ``positions`` is passed on to :func:`superframe_check`.

    Raises:
        DomainError: the pair is not a superframe (unless
            ``require_superframe`` is False).
    """
    sf = superframe_check(f1, f2, rank_tol=rank_tol, positions=positions)
    if require_superframe and not sf.is_superframe:
        raise DomainError("the frames do not form a superframe")
    f12 = direct_sum(f1, f2)
    fine1 = fine2 = fine12 = None
    if refined is not None:
        fine1, fine2 = refined
        fine12 = direct_sum(fine1, fine2)
    m1 = _a_with_stability(f1, fine1, rank_tol)
    m2 = _a_with_stability(f2, fine2, rank_tol)
    m12 = _a_with_stability(f12, fine12, rank_tol)
    stable = m1.stable_mask & m2.stable_mask & m12.stable_mask
    usable = int(np.sum(np.logical_and.accumulate(stable)))
    res = np.abs(m12.a - m1.a - m2.a)
    k = max(1, int(np.ceil(usable * fraction)))
    lo = usable - k
    residual = float(res[lo:usable].max()) if usable else float("nan")
    p1 = profile(m1.a[:usable], cluster_eps=cluster_eps)
    p2 = profile(m2.a[:usable], cluster_eps=cluster_eps)
    p12 = profile(m12.a[:usable], cluster_eps=cluster_eps)
    return AdditivityReport(residual, res, usable, (lo + 1, usable),
                            (p1.liminf + p2.liminf, p1.limsup + p2.limsup), p12, sf,
                            m1.a, m2.a, m12.a)
