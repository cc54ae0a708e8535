"""Finite truncations of frames: Gram operator, canonical dual, Gram projection.

Everything is computed from the Gram matrix ``G_ij = <f_j, f_i>``.  With
``P`` the orthogonal projection onto ``range(G)`` and ``G^+`` the
pseudo-inverse, the canonical dual is ``f~_i = sum_j conj(G^+)_ij f_j`` and
the diagonal products are ``<f_i, f~_i> = P_ii``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._spectral import blockwise_eigh, spectral_norm
from .errors import DomainError, EmptySpanError, IncompatibleError
from .index import IndexDecomposition
from .sequences import RealSequence

DEFAULT_RANK_TOL = 1e-10
DEFAULT_STABILITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FrameSnapshot:
    """The vectors ``f_i, i in I_depth`` of a frame, one row per label.

    Attributes:
        ambient_dim: dimension of the coordinate space.
        vectors: ``(|I_depth|, ambient_dim)`` array or scipy sparse matrix;
            row ``k`` is the vector of ``decomp.labels[k]``.  Real inputs
            stay real.
        decomp: the index decomposition.
        explicit_dual: optional closed-form dual vectors, same shape.
    """

    ambient_dim: int
    vectors: np.ndarray | sp.spmatrix
    decomp: IndexDecomposition
    explicit_dual: np.ndarray | sp.spmatrix | None = None

    def __post_init__(self):
        if self.ambient_dim <= 0:
            raise DomainError("ambient dimension must be positive")
        expected = (len(self.decomp.labels), self.ambient_dim)
        object.__setattr__(self, "vectors", _coerce(self.vectors, expected, "vectors"))
        if self.explicit_dual is not None:
            object.__setattr__(self, "explicit_dual",
                               _coerce(self.explicit_dual, expected, "dual"))

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.vectors)

    def dense_vectors(self) -> np.ndarray:
        return self.vectors.toarray() if self.is_sparse else self.vectors

    def gram(self):
        """``G_ij = <f_j, f_i>``; sparse when the vectors are."""
        V = self.vectors
        G = V.conj() @ V.T
        return G.tocsr() if sp.issparse(G) else G

    def norms_squared(self) -> np.ndarray:
        V = self.vectors
        if sp.issparse(V):
            return np.asarray(abs(V).power(2).sum(axis=1)).ravel()
        return np.sum(np.abs(V) ** 2, axis=1)

    def explicit_diag(self) -> np.ndarray:
        """``<f_i, d_i>`` against the supplied explicit dual."""
        if self.explicit_dual is None:
            raise DomainError("no explicit dual attached")
        V, D = self.vectors, self.explicit_dual
        if sp.issparse(V) or sp.issparse(D):
            prod = sp.csr_matrix(V).multiply(sp.csr_matrix(D).conj())
            return np.real(np.asarray(prod.sum(axis=1)).ravel())
        return np.real(np.einsum("ij,ij->i", V, D.conj()))


def _coerce(vecs, expected, what):
    if sp.issparse(vecs):
        vecs = sp.csr_matrix(vecs)
        if vecs.dtype.kind not in "fc":
            vecs = vecs.astype(float)
    else:
        vecs = np.asarray(vecs)
        if vecs.dtype.kind not in "fc":
            vecs = vecs.astype(float)
    if vecs.shape != expected:
        raise DomainError(f"{what} have shape {vecs.shape}, expected {expected}")
    return vecs


class FrameAnalysis:
    """Spectral data of a snapshot, computed component by component.

    Attributes:
        gram: the Gram matrix (sparse for sparse snapshots).
        diag_products: ``<f_i, f~_i>`` (the diagonal of the Gram projection).
        frame_bounds: smallest and largest nonzero eigenvalue of the frame
            operator on the span.
        span_dim: numerical rank.
        warnings: notes about near-threshold eigenvalues.
    """

    def __init__(self, frame: FrameSnapshot, rank_tol: float = DEFAULT_RANK_TOL):
        self.frame = frame
        self.rank_tol = rank_tol
        self.gram = frame.gram()
        groups = blockwise_eigh(self.gram)
        top = max((float(g.w.max()) for g in groups), default=0.0)
        if top <= 0:
            raise EmptySpanError("empty span: every vector is zero")
        threshold = rank_tol * top
        self.threshold = threshold
        self.warnings: list[str] = []
        diag = np.zeros(frame.count)
        low, rank, near = np.inf, 0, 0
        self._groups = []
        for g in groups:
            keep = g.w > threshold
            near += int(np.sum((g.w > threshold / 10) & (g.w < threshold * 10)))
            U = g.V * keep[:, None, :]
            winv = np.where(keep, 1.0 / np.where(keep, g.w, 1.0), 0.0)
            self._groups.append((g.idx, g.w, U, winv))
            diag[g.idx] = np.sum(np.abs(U) ** 2, axis=2)
            if keep.any():
                low = min(low, float(g.w[keep].min()))
                rank += int(keep.sum())
        if near:
            self.warnings.append(
                f"{near} eigenvalue(s) within 10x of the rank threshold "
                f"{threshold:.3g}; rank decision is ill-conditioned")
        self.diag_products = diag
        self.frame_bounds = (low, top)
        self.span_dim = rank
        for note in self.warnings:
            warnings.warn(note, RuntimeWarning, stacklevel=2)

    def _assemble(self, weights) -> np.ndarray | sp.spmatrix:
        """``sum_k U_k diag(weights(w_k)) U_k^H`` laid out on the labels."""
        rows, cols, vals = [], [], []
        for idx, w, U, winv in self._groups:
            block = (U * weights(w, winv)[:, None, :]) @ np.conj(np.swapaxes(U, 1, 2))
            s = idx.shape[1]
            rows.append(np.repeat(idx, s, axis=1).ravel())
            cols.append(np.tile(idx, (1, s)).ravel())
            vals.append(block.ravel())
        m = self.frame.count
        out = sp.coo_matrix((np.concatenate(vals),
                             (np.concatenate(rows), np.concatenate(cols))),
                            shape=(m, m)).tocsr()
        return out if self.frame.is_sparse else out.toarray()

    @cached_property
    def gram_projection(self):
        return self._assemble(lambda w, winv: (winv > 0).astype(float))

    @cached_property
    def gram_pinv(self):
        return self._assemble(lambda w, winv: winv)

    def _transform(self, weights) -> np.ndarray:
        # f'_i = sum_j conj(M)_ij f_j with M = U diag(weights) U^H
        V = self.frame.dense_vectors()
        out = np.zeros(V.shape, dtype=np.result_type(V.dtype, self.gram.dtype))
        for idx, w, U, winv in self._groups:
            M = (U * weights(w, winv)[:, None, :]) @ np.conj(np.swapaxes(U, 1, 2))
            out[idx] = np.conj(M) @ V[idx]
        return out

    @cached_property
    def dual_vectors(self) -> np.ndarray:
        return self._transform(lambda w, winv: winv)

    def parseval_vectors(self) -> np.ndarray:
        """Rows of the associated Parseval frame ``S^{-1/2} f_i``."""
        return self._transform(lambda w, winv: np.sqrt(winv))


def analyze(frame: FrameSnapshot, rank_tol: float = DEFAULT_RANK_TOL) -> FrameAnalysis:
    """Gram projection, canonical dual and frame bounds of a snapshot.

    Eigenvalues of the Gram matrix at or below ``rank_tol`` times the largest
    one are treated as zero.

    Raises:
        EmptySpanError: every vector is zero.
    """
    return FrameAnalysis(frame, rank_tol)


@dataclass(frozen=True, eq=False)
class MeasureSequence:
    """``a_n = b_n / |I_n|`` with ``b_n = sum_{i in I_n} <f_i, f~_i>``.

    ``stable`` and ``digits`` are filled in by :func:`two_depth_stability`.
    """

    a: np.ndarray
    b: np.ndarray
    sizes: np.ndarray
    stable: np.ndarray | None = None
    digits: np.ndarray | None = None
    diag: np.ndarray | None = field(default=None, repr=False)

    def b_sequence(self) -> RealSequence:
        return RealSequence(self.b, self.sizes)

    def a_sequence(self) -> RealSequence:
        return RealSequence(self.a * self.sizes, self.sizes)

    @property
    def stable_mask(self) -> np.ndarray:
        if self.stable is None:
            return np.ones(len(self.a), dtype=bool)
        return self.stable

    def rows(self):
        """CSV rows ``(n, |I_n|, a_n, b_n, stable)``."""
        for n, (s, a, b, ok) in enumerate(zip(self.sizes, self.a, self.b,
                                              self.stable_mask), start=1):
            yield n, int(s), float(a), float(b), bool(ok)


def measure_sequence(analysis: FrameAnalysis,
                     decomp: IndexDecomposition | None = None) -> MeasureSequence:
    """Block partial sums of the diagonal products."""
    decomp = analysis.frame.decomp if decomp is None else decomp
    if decomp.block_sizes[-1] > analysis.frame.count:
        raise DomainError("decomposition is deeper than the analyzed frame")
    csum = np.cumsum(analysis.diag_products)
    sizes = decomp.sizes
    b = csum[sizes - 1]
    return MeasureSequence(b / sizes, b, sizes, diag=analysis.diag_products)


def two_depth_stability(coarse: MeasureSequence, fine: MeasureSequence,
                        tol: float = DEFAULT_STABILITY_TOL) -> MeasureSequence:
    """Mark the blocks on which two truncation depths agree.

    Blocks are matched by cardinality (the fine decomposition must extend the
    coarse one).  A block is stable when ``|a_n - a_n'| <= tol`` and every
    earlier block is stable; ``digits`` holds ``-log10 |a_n - a_n'|``.
    """
    pos = {int(s): k for k, s in enumerate(fine.sizes)}
    diff = np.full(len(coarse.a), np.nan)
    for k, s in enumerate(coarse.sizes):
        j = pos.get(int(s))
        if j is not None:
            diff[k] = abs(coarse.a[k] - fine.a[j])
    ok = np.nan_to_num(diff, nan=np.inf) <= tol
    stable = np.logical_and.accumulate(ok)
    with np.errstate(divide="ignore"):
        digits = np.clip(-np.log10(np.maximum(diff, 1e-16)), 0, 16)
    return MeasureSequence(coarse.a, coarse.b, coarse.sizes, stable, digits, coarse.diag)


def direct_sum(f1: FrameSnapshot, f2: FrameSnapshot) -> FrameSnapshot:
    """The superset ``{f_i ⊕ g_i}``."""
    if not f1.decomp.same_as(f2.decomp):
        raise IncompatibleError("direct sum needs identical decompositions")
    if f1.is_sparse or f2.is_sparse:
        vecs = sp.hstack([sp.csr_matrix(f1.vectors), sp.csr_matrix(f2.vectors)]).tocsr()
    else:
        vecs = np.hstack([f1.vectors, f2.vectors])
    return FrameSnapshot(f1.ambient_dim + f2.ambient_dim, vecs, f1.decomp)


def projection_product_norm(a1: FrameAnalysis, a2: FrameAnalysis) -> float:
    """``||P_1 P_2||`` for the Gram projections of two analyses."""
    return spectral_norm(a1.gram_projection @ a2.gram_projection)


def is_orthogonal_supersets(f1: FrameSnapshot, f2: FrameSnapshot,
                            tol: float = 1e-10) -> bool:
    """True when the coefficient ranges are orthogonal, i.e. ``P_1 P_2 ≈ 0``."""
    if not f1.decomp.same_as(f2.decomp):
        raise IncompatibleError("frames live on different decompositions")
    return projection_product_norm(analyze(f1), analyze(f2)) <= tol


def same_gram_projection(f1: FrameSnapshot, f2: FrameSnapshot, tol: float = 1e-9) -> bool:
    """Equivalence test: the two Gram projections agree to ``tol`` in operator norm.

    Only the test is offered; sorting frames into equivalence classes is not.
    """
    if not f1.decomp.same_as(f2.decomp):
        raise IncompatibleError("frames live on different decompositions")
    P1, P2 = analyze(f1).gram_projection, analyze(f2).gram_projection
    return spectral_norm(P1 - P2) <= tol


def apply_phases_and_permutation(frame: FrameSnapshot, phases=None,
                                 perm=None, tol: float = 1e-12) -> FrameSnapshot:
    """``g_i = e^{i phi_i} f_{pi(i)}`` over the materialized labels.

    ``perm`` is an array of positions (``perm[k]`` is the position whose
    vector moves to position ``k``); it must fix everything past some block.
    """
    m = frame.count
    perm = np.arange(m) if perm is None else np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(m)):
        raise DomainError("perm is not a permutation of the materialized labels")
    phases = np.ones(m) if phases is None else np.asarray(phases)
    if phases.shape != (m,):
        raise DomainError("one phase per label is required")
    if np.any(np.abs(np.abs(phases) - 1) > tol):
        raise DomainError("phases must be unimodular")

    def twist(V):
        if sp.issparse(V):
            return (sp.diags(phases) @ V[perm]).tocsr()
        return phases[:, None] * V[perm]

    vecs = twist(frame.vectors)
    dual = None if frame.explicit_dual is None else twist(frame.explicit_dual)
    return FrameSnapshot(frame.ambient_dim, vecs, frame.decomp, dual)


def permutation_support_block(frame: FrameSnapshot, perm) -> int:
    """Smallest block ``n`` such that ``perm`` fixes every position past ``I_n``."""
    perm = np.asarray(perm)
    moved = np.flatnonzero(perm != np.arange(len(perm)))
    if len(moved) == 0:
        return 1
    last = int(moved.max())
    return int(np.searchsorted(frame.decomp.sizes, last + 1)) + 1


def frame_b_sequence(frame: FrameSnapshot, rank_tol: float = DEFAULT_RANK_TOL) -> RealSequence:
    """``b(F)`` as a sequence; the all-zero family gives ``b = 0``."""
    try:
        ms = measure_sequence(analyze(frame, rank_tol))
    except EmptySpanError:
        return RealSequence(np.zeros(frame.decomp.depth, dtype=np.int64), frame.decomp.sizes)
    return ms.b_sequence()
