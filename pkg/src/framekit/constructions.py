"""Reference frames and sequences with known measure.

These are the fixtures used by the tests, the suites and the CLI: bases,
repeated bases, invertible images of bases, the non-additive pair on
``I_n = {1..n}`` and the two-cluster sequence on ``|I_n| = 2^n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .frames import FrameSnapshot, direct_sum
from .index import IndexDecomposition
from .sequences import RealSequence


def onb(dim: int, complex_: bool = False) -> FrameSnapshot:
    """The standard basis of ``C^dim`` on ``I_n = {1..n}``."""
    eye = np.eye(dim, dtype=complex if complex_ else float)
    return FrameSnapshot(dim, eye, IndexDecomposition.naturals(dim), explicit_dual=eye)


def interleaved_double_onb(dim: int) -> FrameSnapshot:
    """Two copies of the standard basis, ``e_1, e_1, e_2, e_2, ...``.

    Blocks are ``I_n = {1..2n}`` so that every block holds whole pairs.
    """
    vecs = np.repeat(np.eye(dim), 2, axis=0)
    decomp = IndexDecomposition.from_sizes(range(2, 2 * dim + 1, 2), start=1)
    return FrameSnapshot(dim, vecs, decomp, explicit_dual=vecs / 2)


def random_riesz(dim: int, rng: np.random.Generator,
                 complex_: bool = True) -> FrameSnapshot:
    """``{A e_i}`` for a random complex Gaussian (almost surely invertible) ``A``."""
    A = rng.standard_normal((dim, dim))
    if complex_:
        A = A + 1j * rng.standard_normal((dim, dim))
    return FrameSnapshot(dim, A.T, IndexDecomposition.naturals(dim))


def perp_normal_on(support, decomp: IndexDecomposition) -> FrameSnapshot:
    """Distinct basis vectors on the positions in ``support``, zeros elsewhere."""
    support = np.asarray(sorted(support), dtype=int)
    m = len(decomp.labels)
    dim = max(len(support), 1)
    vecs = sp.csr_matrix((np.ones(len(support)), (support, np.arange(len(support)))),
                         shape=(m, dim))
    return FrameSnapshot(dim, vecs.toarray(), decomp)


# -- the non-additive pair -----------------------------------------------------


@dataclass(frozen=True)
class CounterexamplePair:
    """``F``, ``G`` and ``F ⊕ G`` on ``I_n = {1..n}``, materialized to ``length``.

    Attributes:
        depth: every block ``n <= depth`` has its exact infinite-frame
            diagonal products (the partners ``k^2+1`` of all even ``k <= depth``
            are materialized).
        length: number of materialized labels.
        closed_positions: 0-based positions whose vectors are not cut by the
            truncation (every label except even ``i`` with ``i^2 + 1 > length``).
    """

    F: FrameSnapshot
    G: FrameSnapshot
    FG: FrameSnapshot
    depth: int
    length: int
    closed_positions: np.ndarray


def _partner_length(depth: int) -> int:
    k = depth - depth % 2
    return max(depth, k * k + 1)


def counterexample_pair(depth: int, length: int | None = None) -> CounterexamplePair:
    """Build the pair with ``f_i = e_i`` (``i`` even) and averaged pairs ``g``.

    For even ``k`` the vectors ``g_k`` and ``g_{k^2+1}`` both equal
    ``(e_k + e_{k^2+1})/2``; every other ``g_i`` and every odd ``f_i`` is
    zero.  The ambient space is spanned by ``e_1..e_length``; coordinates
    beyond it are dropped, which only affects labels whose partner is not
    materialized.

    Args:
        depth: blocks that must be exact; by default the truncation runs to
            ``length = k^2 + 1`` for the largest even ``k <= depth``.
        length: explicit number of labels (overrides the default).

    Each snapshot carries its closed-form dual: ``F`` and ``G`` are Parseval
    on their spans, and ``F ⊕ G`` uses ``e_i ⊕ 0`` at even ``i`` and
    ``-e_k ⊕ (e_k + e_{k^2+1})`` at ``k^2+1``.
    """
    L = _partner_length(depth) if length is None else int(length)
    decomp = IndexDecomposition.naturals(L)
    labels = np.arange(1, L + 1)
    even = labels[labels % 2 == 0]
    # F
    F = sp.csr_matrix((np.ones(len(even)), (even - 1, even - 1)), shape=(L, L))
    # G: even k with partner k^2+1, then the partner rows themselves
    rows, cols, vals = [], [], []
    partner = even * even + 1
    inside = partner <= L
    rows += [even - 1, even[inside] - 1]
    cols += [even - 1, partner[inside] - 1]
    vals += [np.full(len(even), 0.5), np.full(int(inside.sum()), 0.5)]
    kk, pp = even[inside], partner[inside]
    rows += [pp - 1, pp - 1]
    cols += [kk - 1, pp - 1]
    vals += [np.full(len(pp), 0.5)] * 2
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(L, L))
    # dual of F ⊕ G: e_k ⊕ 0 and -e_k ⊕ (e_k + e_{k^2+1})
    drows = [even - 1, pp - 1, pp - 1, pp - 1]
    dcols = [even - 1, kk - 1, L + kk - 1, L + pp - 1]
    dvals = [np.ones(len(even)), -np.ones(len(pp)), np.ones(len(pp)), np.ones(len(pp))]
    H = sp.csr_matrix((np.concatenate(dvals), (np.concatenate(drows), np.concatenate(dcols))),
                      shape=(L, 2 * L))
    f = FrameSnapshot(L, F, decomp, explicit_dual=F)
    g = FrameSnapshot(L, G, decomp, explicit_dual=G)
    fg = direct_sum(f, g)
    fg = FrameSnapshot(fg.ambient_dim, fg.vectors, decomp, explicit_dual=H)
    cut = (labels % 2 == 0) & (labels * labels + 1 > L)
    return CounterexamplePair(f, g, fg, min(depth, L), L, np.flatnonzero(~cut))


def counterexample_closed_form(n_max: int):
    """Exact ``a_n`` of ``F``, ``G`` and ``F ⊕ G`` for ``n = 1..n_max``.

    With ``c_n = #{even k >= 2 : k^2 + 1 <= n}``::

        a_n(F) = floor(n/2)/n
        a_n(G) = (floor(n/2) + c_n) / (2n)
        a_n(F ⊕ G) = (floor(n/2) + c_n) / n
    """
    n = np.arange(1, n_max + 1)
    half = n // 2
    c = np.floor(np.sqrt(np.maximum(n - 1, 0))).astype(int) // 2
    return half / n, (half + c) / (2 * n), (half + c) / n


# -- sequences ------------------------------------------------------------------


def two_cluster_sequence(depth: int) -> RealSequence:
    """The frame compatible sequence on ``|I_n| = 2^n`` that fills every even step.

    ``x_1 = 0``, ``x_{2n} = x_{2n-1} + |I_{2n} \\ I_{2n-1}|``, ``x_{2n+1} = x_{2n}``;
    the normalized values alternate between neighbourhoods of 1/3 and 2/3.
    """
    sizes = 2 ** np.arange(1, depth + 1, dtype=np.int64)
    growth = np.diff(sizes, prepend=0)
    n = np.arange(1, depth + 1)
    inc = np.where(n % 2 == 0, growth, 0)
    return RealSequence(np.cumsum(inc), sizes)


# -- operators ------------------------------------------------------------------


def banded_random_operator(decomp: IndexDecomposition, bandwidth: int,
                           rng: np.random.Generator, complex_: bool = True):
    """Random matrix supported on ``|i - j| <= bandwidth`` in label coordinates.

    Entries are standard (complex) Gaussians scaled by ``1/sqrt(2 bandwidth + 1)``
    so that rows have unit expected energy.
    """
    from .index import get_metric
    from .operators import OperatorSnapshot

    x = decomp.coords[:, 0]
    m = len(x)
    rows, cols = [], []
    target = {v: k for k, v in enumerate(x)}
    for d in range(-bandwidth, bandwidth + 1):
        # positions whose neighbour at offset d is materialized
        for k, v in enumerate(x):
            j = target.get(v + d)
            if j is not None:
                rows.append(k)
                cols.append(j)
    vals = rng.standard_normal(len(rows))
    if complex_:
        vals = (vals + 1j * rng.standard_normal(len(rows))) / np.sqrt(2)
    vals = vals / np.sqrt(2 * bandwidth + 1)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    return OperatorSnapshot(A, decomp, get_metric("abs"))


def dense_ramp_operator(decomp: IndexDecomposition, rng: np.random.Generator):
    """Dense Gaussian matrix with column weights ``1 + |x_j| / L``.

    Entries have variance ``1/M`` before weighting (``M`` labels, ``L`` the
    largest label modulus), so row energy grows toward the edge of the box
    and the operator is far from non-expansive.
    """
    from .index import get_metric
    from .operators import OperatorSnapshot

    x = decomp.coords[:, 0]
    m = len(x)
    A = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2 * m)
    A = A * (1 + np.abs(x) / np.abs(x).max())[None, :]
    return OperatorSnapshot(A, decomp, get_metric("abs"))
