"""Blockwise Hermitian eigensolves.

Gram matrices of the frames studied here are often block diagonal after a
permutation (disjoint supports).  Splitting along connected components of
the nonzero pattern keeps the eigensolves small and keeps exactly-zero
entries exactly zero.  Dense arrays and scipy sparse matrices are accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


@dataclass
class EigenGroup:
    """Eigendecompositions of ``g`` components that all have size ``s``.

    ``A[idx[k]][:, idx[k]] = V[k] @ diag(w[k]) @ V[k]^H`` for each ``k``.
    """

    idx: np.ndarray  # (g, s)
    w: np.ndarray  # (g, s)
    V: np.ndarray  # (g, s, s)


def _pattern(A):
    """Coordinates and values of the nonzero entries."""
    if sp.issparse(A):
        coo = A.tocoo()
        keep = coo.data != 0
        return coo.row[keep], coo.col[keep], coo.data[keep]
    r, c = np.nonzero(A)
    return r, c, A[r, c]


def component_labels(A) -> np.ndarray:
    """Component number of every row of ``A != 0``."""
    m = A.shape[0]
    r, c, _ = _pattern(A)
    graph = sp.coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(m, m))
    _, lab = connected_components(graph.tocsr(), directed=False)
    return lab


def components(A) -> list[np.ndarray]:
    """Index sets of the connected components of ``A != 0``."""
    m = A.shape[0]
    if m == 0:
        return []
    lab = component_labels(A)
    order = np.argsort(lab, kind="stable")
    bounds = np.flatnonzero(np.diff(lab[order])) + 1
    return np.split(order, bounds)


def blockwise_eigh(A) -> list[EigenGroup]:
    """Eigendecompose a Hermitian matrix one component at a time.

    Components of equal size are stacked and solved in one batched call.
    """
    m = A.shape[0]
    if m == 0:
        return []
    lab = component_labels(A)
    counts = np.bincount(lab)
    if len(counts) == 1 and not sp.issparse(A):
        w, V = np.linalg.eigh(A)
        return [EigenGroup(np.arange(m)[None, :], w[None, :], V[None, :, :])]
    # position of each row inside its component, and the component's slot
    # among the components of the same size
    order = np.argsort(lab, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.empty(m, dtype=np.int64)
    pos[order] = np.arange(m) - starts[lab[order]]
    size_of = counts[lab]
    slot_of_comp = np.empty(len(counts), dtype=np.int64)
    for s in np.unique(counts):
        comps = np.flatnonzero(counts == s)
        slot_of_comp[comps] = np.arange(len(comps))
    slot = slot_of_comp[lab]
    r, c, v = _pattern(A)
    dtype = np.result_type(v.dtype, float)
    out = []
    for s in np.unique(counts):
        comps = np.flatnonzero(counts == s)
        rows = order[np.isin(lab[order], comps)]
        idx = np.empty((len(comps), s), dtype=np.int64)
        idx[slot[rows], pos[rows]] = rows
        blocks = np.zeros((len(comps), s, s), dtype=dtype)
        sel = size_of[r] == s
        blocks[slot[r[sel]], pos[r[sel]], pos[c[sel]]] = v[sel]
        w, V = np.linalg.eigh(blocks)
        out.append(EigenGroup(idx, w, V))
    return out


def spectral_norm(A) -> float:
    """Largest singular value via the eigenvalues of ``A^H A``."""
    if A.shape[0] == 0 or A.shape[1] == 0:
        return 0.0
    N = A.conj().T @ A
    top = max((float(g.w.max()) for g in blockwise_eigh(N)), default=0.0)
    return float(np.sqrt(max(top, 0.0)))
