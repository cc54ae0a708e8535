"""Measure profiles: what every ultrafilter limit of ``a_n`` must look like.

An ultrafilter limit of a bounded sequence is one of its accumulation
points, and the extreme accumulation points are attained.  A finite prefix
cannot name a point of the Stone-Cech remainder, so the profile reports the
envelope ``[liminf, limsup]`` of a trailing window together with the
clusters the window values form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._spectral import blockwise_eigh
from .errors import DomainError, EmptySpanError, IncompatibleError
from .frames import (DEFAULT_RANK_TOL, FrameSnapshot, MeasureSequence, analyze,
                     frame_b_sequence, measure_sequence, two_depth_stability)
from .sequences import (DEFAULT_COMPARE_TOL, DEFAULT_TAIL_FRACTION, ComparisonVerdict,
                        RealSequence, compare)

DEFAULT_CLUSTER_EPS = 1e-2
MIN_WINDOW = 4


@dataclass
class MeasureProfile:
    """Envelope and accumulation clusters of a normalized sequence.

    Attributes:
        liminf, limsup: extremes over the tail window.
        clusters: ``(center, weight)`` pairs; weight is the fraction of the
            window in the cluster.
        converged: envelope narrower than ``cluster_eps`` and the
            oscillation is not growing.
        tail_window: 1-based inclusive block range ``(first, last)``.
        stability: per-block agreement digits between two truncation depths,
            when known.
        values: the full normalized sequence the profile was taken from.
    """

    liminf: float
    limsup: float
    clusters: list
    converged: bool
    tail_window: tuple
    cluster_eps: float
    stability: np.ndarray | None = None
    values: np.ndarray | None = field(default=None, repr=False)
    stable_blocks: int | None = None

    @property
    def width(self) -> float:
        return self.limsup - self.liminf

    @property
    def limit(self) -> float | None:
        """The common value when converged."""
        return 0.5 * (self.liminf + self.limsup) if self.converged else None

    def within(self, target: float, tol: float) -> bool:
        """True when the whole envelope lies within ``tol`` of ``target``."""
        return bool(abs(self.liminf - target) <= tol and abs(self.limsup - target) <= tol)

    def to_dict(self) -> dict:
        out = {"liminf": self.liminf, "limsup": self.limsup,
               "clusters": [[c, w] for c, w in self.clusters],
               "converged": self.converged, "tail_window": list(self.tail_window),
               "cluster_eps": self.cluster_eps}
        if self.stability is not None:
            out["stability"] = [float(d) for d in self.stability]
        if self.stable_blocks is not None:
            out["stable_blocks"] = self.stable_blocks
        return out


def _clusters(values: np.ndarray, eps: float) -> list:
    v = np.sort(values)
    cuts = np.flatnonzero(np.diff(v) > eps) + 1
    return [(float(g.mean()), len(g) / len(v)) for g in np.split(v, cuts)]


def _normalized(seq) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    if isinstance(seq, MeasureSequence):
        return np.asarray(seq.a, float), seq.stable, seq.digits
    if isinstance(seq, RealSequence):
        return np.asarray(seq.normalized(), float), None, None
    return np.asarray(seq, float), None, None


def profile(seq, window: float = DEFAULT_TAIL_FRACTION,
            cluster_eps: float = DEFAULT_CLUSTER_EPS) -> MeasureProfile:
    """Profile of ``a_n`` (or of ``x_n / |I_n|``) over a trailing window.

    Args:
        seq: a :class:`MeasureSequence` (only its leading stable blocks are
            used), a :class:`RealSequence` (normalized first) or an array
            of normalized values.
        window: trailing fraction of the usable blocks.
        cluster_eps: single-linkage resolution for clusters.

    Raises:
        DomainError: fewer than four blocks in the window.
    """
    a, stable, digits = _normalized(seq)
    usable = len(a) if stable is None else int(np.sum(np.logical_and.accumulate(stable)))
    k = int(np.ceil(usable * window))
    if k < MIN_WINDOW:
        raise DomainError(
            f"window holds {k} blocks; at least {MIN_WINDOW} are required")
    lo = usable - k
    tail = a[lo:usable]
    liminf, limsup = float(tail.min()), float(tail.max())
    q = max(1, len(tail) // 4)
    early = float(np.ptp(tail[:q]))
    late = float(np.ptp(tail[-q:]))
    converged = bool(limsup - liminf <= cluster_eps and late <= early + 1e-15)
    clusters = _clusters(tail, cluster_eps)
    return MeasureProfile(liminf, limsup, clusters, converged, (lo + 1, usable),
                          cluster_eps, digits, a, None if stable is None else usable)


def frame_measure_sequence(frame: FrameSnapshot, refined: FrameSnapshot | None = None,
                           rank_tol: float = DEFAULT_RANK_TOL,
                           stability_tol: float = 1e-8) -> MeasureSequence:
    """``a(F)``, annotated with stability against a deeper truncation if given."""
    ms = measure_sequence(analyze(frame, rank_tol))
    if refined is not None:
        fine = measure_sequence(analyze(refined, rank_tol))
        ms = two_depth_stability(ms, fine, stability_tol)
    return ms


def frame_measure(frame: FrameSnapshot, refined: FrameSnapshot | None = None,
                  window: float = DEFAULT_TAIL_FRACTION,
                  cluster_eps: float = DEFAULT_CLUSTER_EPS,
                  rank_tol: float = DEFAULT_RANK_TOL,
                  stability_tol: float = 1e-8) -> MeasureProfile:
    """Profile of ``a(F)``.

    When ``refined`` (a deeper truncation of the same frame) is supplied,
    only the blocks on which both truncations agree enter the window.
    """
    ms = frame_measure_sequence(frame, refined, rank_tol, stability_tol)
    return profile(ms, window, cluster_eps)


def frames_compare(f1: FrameSnapshot, f2: FrameSnapshot, tol: float = DEFAULT_COMPARE_TOL,
                   tail_fraction: float = DEFAULT_TAIL_FRACTION) -> ComparisonVerdict:
    """Compare ``b(f1)`` with ``b(f2)``; ``left_dominated`` means ``f1 ≦ f2``."""
    if not f1.decomp.same_as(f2.decomp):
        raise IncompatibleError("frames live on different decompositions")
    return compare(frame_b_sequence(f1), frame_b_sequence(f2), tol, tail_fraction)


# -- excess ------------------------------------------------------------------------


@dataclass
class ExcessReport:
    """Outcome of removing elements with small diagonal products.

    ``claim_satisfied`` means the remaining family spans the same space and
    its lower frame bound is at least ``A(1 - epsilon - alpha)``.
    """

    alpha: float
    epsilon: float
    removed_labels: frozenset
    candidates: int
    original_bounds: tuple
    remaining_bounds: tuple
    claim_satisfied: bool
    trivial: bool = False
    density_cap: bool = False
    total: int = 0

    @property
    def removed_fraction(self) -> float:
        return len(self.removed_labels) / max(self.total, 1)


def _extremes(w: np.ndarray, thr: float) -> tuple[float, float]:
    w = w[w > thr]
    return (float(w.min()), float(w.max())) if len(w) else (np.inf, 0.0)


def excess_probe(frame: FrameSnapshot, alpha: float, epsilon: float,
                 tol: float = 1e-9, density_cap: bool = False,
                 rank_tol: float = DEFAULT_RANK_TOL) -> ExcessReport:
    """Greedily remove labels with ``<f_i, f~_i> <= alpha`` while the claim holds.

    Candidates are visited in label order.  A removal is kept only if the
    span is unchanged and the lower frame bound of what remains is still at
    least ``A(1 - epsilon - alpha) - tol``.  With ``density_cap`` at most
    ``epsilon/(1 - epsilon)`` of each block may be removed.

    Frames whose profile reaches 1 get a trivial report with nothing removed.
    """
    if not (0 <= alpha <= 1 and 0 <= epsilon < 1):
        raise DomainError("need 0 <= alpha <= 1 and 0 <= epsilon < 1")
    an = analyze(frame, rank_tol)
    bounds = an.frame_bounds
    ms = measure_sequence(an)
    labels = frame.decomp.labels
    prof = profile(ms, cluster_eps=DEFAULT_CLUSTER_EPS) if len(ms.a) >= 2 * MIN_WINDOW else None
    top = prof.limsup if prof is not None else float(ms.a.max())
    if top >= 1 - tol:
        return ExcessReport(alpha, epsilon, frozenset(), 0, bounds, bounds, True,
                            trivial=True, density_cap=density_cap, total=len(labels))
    floor_bound = bounds[0] * (1 - epsilon - alpha) - tol
    thr = an.threshold
    G = an.gram
    G = G.toarray() if hasattr(G, "toarray") else G
    # component structure of the Gram matrix; removals only touch their own
    comp_ext = {}
    comp_of = np.empty(frame.count, dtype=int)
    members = {}
    comp_rank = {}
    for g in blockwise_eigh(G):
        for k in range(g.idx.shape[0]):
            cid = len(members)
            members[cid] = set(int(i) for i in g.idx[k])
            comp_of[g.idx[k]] = cid
            comp_ext[cid] = _extremes(g.w[k], thr)
            comp_rank[cid] = int(np.sum(g.w[k] > thr))
    candidates = np.flatnonzero(an.diag_products <= alpha)
    cap = epsilon / (1 - epsilon)
    sizes = frame.decomp.sizes
    removed = []
    removed_per_block = np.zeros(len(sizes), dtype=int)
    for i in candidates:
        blk = int(np.searchsorted(sizes, i + 1))
        if density_cap and np.any(removed_per_block[blk:] + 1 > cap * sizes[blk:]):
            continue
        cid = comp_of[i]
        rest = sorted(members[cid] - {int(i)})
        if rest:
            w = np.linalg.eigvalsh(G[np.ix_(rest, rest)])
            rank, ext = int(np.sum(w > thr)), _extremes(w, thr)
        else:
            rank, ext = 0, (np.inf, 0.0)
        if rank != comp_rank[cid]:
            continue
        others = min((v[0] for c, v in comp_ext.items() if c != cid), default=np.inf)
        if min(ext[0], others) < floor_bound:
            continue
        members[cid].discard(int(i))
        comp_ext[cid] = ext
        removed.append(int(i))
        removed_per_block[blk:] += 1
    if len(removed) == frame.count:
        raise EmptySpanError("removal emptied the span")
    remaining = (min(v[0] for v in comp_ext.values()),
                 max(v[1] for v in comp_ext.values()))
    ok = bool(remaining[0] >= floor_bound)
    return ExcessReport(alpha, epsilon, frozenset(labels[i] for i in removed),
                        len(candidates), bounds, remaining, ok,
                        density_cap=density_cap, total=len(labels))


# -- redundancy ----------------------------------------------------------------------


@dataclass(frozen=True)
class Redundancy:
    """Reciprocal envelope ``[1/limsup, 1/liminf]``; ``inf`` when liminf is 0."""

    low: float
    high: float

    @property
    def unbounded(self) -> bool:
        return bool(np.isinf(self.high))

    def to_dict(self) -> dict:
        return {"low": self.low, "high": None if self.unbounded else self.high,
                "unbounded": self.unbounded}


def redundancy(prof: MeasureProfile) -> Redundancy:
    if prof.liminf < 0:
        raise DomainError("redundancy needs a nonnegative profile")
    low = np.inf if prof.limsup == 0 else 1.0 / prof.limsup
    high = np.inf if prof.liminf == 0 else 1.0 / prof.liminf
    return Redundancy(float(low), float(high))
