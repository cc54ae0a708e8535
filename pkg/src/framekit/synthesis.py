"""Perpendicular-normal frames realizing prescribed sequences.

A perpendicular-normal frame consists of distinct orthonormal vectors and
zeros, so ``b_n`` simply counts its nonzero elements in ``I_n``.  Every
``floor(x)`` with ``x`` frame compatible is realized this way, and a sum
``z = x^1 + ... + x^k`` can be realized as a superset of such frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, IncompatibleError
from .frames import FrameSnapshot, frame_b_sequence
from .index import IndexDecomposition
from .sequences import RealSequence, floor_seq, is_frame_compatible, vee, wedge

DEFAULT_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class PerpNormalFrame:
    """A perpendicular-normal snapshot together with its support.

    Attributes:
        snapshot: the frame; nonzero rows are distinct standard basis vectors.
        support: positions (0-based, in label order) of the nonzero vectors.
        basis_assignment: ``label -> basis index`` for the support.
        degenerate: True when every vector is zero.
    """

    snapshot: FrameSnapshot
    support: np.ndarray
    basis_assignment: dict
    degenerate: bool

    @property
    def support_labels(self) -> frozenset:
        labels = self.snapshot.decomp.labels
        return frozenset(labels[k] for k in self.support)

    def counts(self) -> RealSequence:
        """``|S ∩ I_n|`` as an exact integer sequence."""
        decomp = self.snapshot.decomp
        mark = np.zeros(len(decomp.labels), dtype=np.int64)
        mark[self.support] = 1
        return RealSequence(np.cumsum(mark)[decomp.sizes - 1], decomp.sizes)

    def b(self) -> RealSequence:
        """``b`` computed spectrally (it equals :meth:`counts`)."""
        return frame_b_sequence(self.snapshot)


def _decomp_for(x: RealSequence, decomp: IndexDecomposition | None) -> IndexDecomposition:
    if decomp is None:
        return IndexDecomposition.from_sizes(x.sizes, start=1)
    if not np.array_equal(decomp.sizes, x.sizes):
        raise IncompatibleError("sequence and decomposition have different block sizes")
    return decomp


def _build(support: np.ndarray, decomp: IndexDecomposition, dim: int,
           basis: np.ndarray) -> PerpNormalFrame:
    m = len(decomp.labels)
    vecs = np.zeros((m, dim))
    vecs[support, basis] = 1.0
    assignment = {decomp.labels[k]: int(b) for k, b in zip(support, basis)}
    return PerpNormalFrame(FrameSnapshot(dim, vecs, decomp), np.asarray(support, dtype=int),
                           assignment, len(support) == 0)


def _lowest_in_shells(counts: np.ndarray, sizes: np.ndarray, pool=None) -> np.ndarray:
    """Take the first ``counts[i]`` positions of each shell (optionally from ``pool``)."""
    picked = []
    lo = 0
    for c, hi in zip(counts, sizes):
        cand = np.arange(lo, hi) if pool is None else pool[(pool >= lo) & (pool < hi)]
        if c > len(cand):
            raise DomainError("shell too small for the requested count")
        picked.append(cand[:c])
        lo = hi
    return np.concatenate(picked) if picked else np.zeros(0, dtype=int)


def synth_perp_normal(x: RealSequence, decomp: IndexDecomposition | None = None,
                      snap: float = DEFAULT_SNAP) -> PerpNormalFrame:
    """Perpendicular-normal frame ``G^x`` with ``b(G^x) = floor(x)``.

    Inside each shell ``I_i \\ I_{i-1}`` the lowest-ordered
    ``floor(x_i) - floor(x_{i-1})`` labels are occupied, and they receive
    basis vectors ``e_0, e_1, ...`` in label order.  The ambient dimension is
    ``max(|S|, 1)``.

    Raises:
        DomainError: ``x`` is not frame compatible.
    """
    if not is_frame_compatible(x, tol=snap):
        raise DomainError("sequence is not frame compatible")
    decomp = _decomp_for(x, decomp)
    fl = np.asarray(floor_seq(x, snap).values, dtype=np.int64)
    inc = np.diff(fl, prepend=0)
    support = _lowest_in_shells(inc, decomp.sizes)
    return _build(support, decomp, max(len(support), 1), np.arange(len(support)))


@dataclass(frozen=True, eq=False)
class SplitResult:
    """Parts ``F^{x^1}, ..., F^{x^k}`` whose superset is ``F^z``.

    All parts share the ambient space and basis of ``F^z``.
    """

    parts: list
    whole: PerpNormalFrame
    z: RealSequence


def split_superset(x_list: Sequence[RealSequence],
                   decomp: IndexDecomposition | None = None,
                   snap: float = DEFAULT_SNAP) -> SplitResult:
    """Realize ``z = sum x^i`` by ``F^z`` and split its support among the ``x^i``.

    Two sequences are handled by the recursion
    ``t_1 = floor(x_1)``, ``t_i = min(t_{i-1} + floor(z_i) - floor(z_{i-1}), floor(x_i))``:
    the first part takes ``t_i - t_{i-1}`` labels of the support inside
    shell ``i`` (lowest labels first) and the second part takes the rest.
    The sum ``z`` must itself be frame compatible.  For more sequences the remainder is split again against
    ``x^2 + ... + x^k``, and so on; the last part takes what is left.
    """
    if len(x_list) < 1:
        raise DomainError("need at least one sequence")
    for x in x_list:
        if not is_frame_compatible(x, tol=snap):
            raise DomainError("every input must be frame compatible")
        x_list[0]._check(x)
    z = x_list[0]
    for x in x_list[1:]:
        z = z + x
    if not is_frame_compatible(z, tol=snap):
        raise DomainError("the sum of the inputs is not frame compatible")
    decomp = _decomp_for(z, decomp)
    whole = synth_perp_normal(z, decomp, snap)
    dim = whole.snapshot.ambient_dim
    basis_of = np.zeros(len(decomp.labels), dtype=int)
    basis_of[whole.support] = np.arange(len(whole.support))

    pool = whole.support
    target = np.asarray(floor_seq(z, snap).values, dtype=np.int64)
    parts = []
    for x in x_list[:-1]:
        fx = np.asarray(floor_seq(x, snap).values, dtype=np.int64)
        dt = np.diff(target, prepend=0)
        t = np.empty_like(fx)
        prev = 0
        for i in range(len(fx)):
            prev = min(prev + dt[i], fx[i])
            t[i] = prev
        mine = _lowest_in_shells(np.diff(t, prepend=0), decomp.sizes, pool)
        parts.append(_build(mine, decomp, dim, basis_of[mine]))
        pool = np.setdiff1d(pool, mine)
        target = target - t
    parts.append(_build(pool, decomp, dim, basis_of[pool]))
    return SplitResult(parts, whole, z)


def frame_wedge(f1: FrameSnapshot, f2: FrameSnapshot) -> PerpNormalFrame:
    """A frame whose ``b`` is ``floor(b(f1) ∧ b(f2))``."""
    if not f1.decomp.same_as(f2.decomp):
        raise IncompatibleError("frames live on different decompositions")
    return synth_perp_normal(wedge(frame_b_sequence(f1), frame_b_sequence(f2)), f1.decomp)


def frame_vee(f1: FrameSnapshot, f2: FrameSnapshot) -> PerpNormalFrame:
    """A frame whose ``b`` is ``floor(b(f1) ∨ b(f2))``."""
    if not f1.decomp.same_as(f2.decomp):
        raise IncompatibleError("frames live on different decompositions")
    return synth_perp_normal(vee(frame_b_sequence(f1), frame_b_sequence(f2)), f1.decomp)
