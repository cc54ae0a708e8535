"""Finite Gabor systems on ``l^2(Z_N)`` and time-frequency densities.

A point ``(t, w)`` of the lattice gives the vector
``g_(t,w)[x] = e^{i phi} e^{2 pi i w x / N} g[(x - t) mod N]``.  Lattices are
indexed by nested skewed boxes ``M Q_n(O)`` around a center ``O``, which
also provides the index decomposition of the resulting frame.

Densities are measured against the time-frequency volume of the finite
model, in which a box of ``det(M) n^2`` lattice cells has volume
``det(M) n^2 / N`` (the whole torus has volume ``N``).  The exact finite
density of a lattice is therefore ``|Λ| / N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError
from .frames import FrameSnapshot, analyze, measure_sequence
from .index import IndexDecomposition, IndexRemap, get_metric, remap_measure_condition
from .measure import DEFAULT_CLUSTER_EPS, MeasureProfile, frame_measure, profile
from .operators import SuperframeReport, superframe_check

BOX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GaborLattice:
    """A multiset of time-frequency points.

    Attributes:
        points: ``(K, 2m)`` array.  In the finite model (``N`` set) ``m = 1``
            and the points are integers reduced mod ``N``.
        N: modulus of the finite model, or None for point sets in ``R^{2m}``.
        phases: optional unimodular scalar per point.
        spacing: ``(a, b)`` when the lattice is the regular ``aZ x bZ``.
    """

    points: np.ndarray
    N: int | None = None
    phases: np.ndarray | None = None
    spacing: tuple | None = None

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim != 2 or pts.shape[1] % 2:
            raise DomainError("points must be a (K, 2m) array")
        if self.N is not None:
            if pts.shape[1] != 2:
                raise DomainError("the finite model is one dimensional (points (t, w))")
            if not np.all(pts == np.round(pts)):
                raise DomainError("finite-model points must be integers")
            pts = np.mod(pts.astype(np.int64), int(self.N))
        else:
            pts = pts.astype(float)
        object.__setattr__(self, "points", pts)
        if self.phases is not None:
            ph = np.asarray(self.phases, dtype=complex)
            if ph.shape != (len(pts),):
                raise DomainError("one phase per point is required")
            if np.any(np.abs(np.abs(ph) - 1) > 1e-12):
                raise DomainError("phases must be unimodular")
            object.__setattr__(self, "phases", ph)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        """``2m``."""
        return self.points.shape[1]

    @classmethod
    def regular(cls, N: int, a: int, b: int) -> "GaborLattice":
        """``aZ_N x bZ_N``; ``a`` and ``b`` must divide ``N``."""
        if N % a or N % b:
            raise DomainError("a and b must divide N")
        t, w = np.meshgrid(np.arange(0, N, a), np.arange(0, N, b), indexing="ij")
        return cls(np.stack([t.ravel(), w.ravel()], 1), N, spacing=(a, b))

    @classmethod
    def full(cls, N: int) -> "GaborLattice":
        return cls.regular(N, 1, 1)

    @classmethod
    def real_lattice(cls, A: np.ndarray, extent: float) -> "GaborLattice":
        """``A Z^{2m}`` restricted to ``||x||_inf <= extent``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        d = A.shape[0]
        if abs(np.linalg.det(A)) < 1e-14:
            raise DomainError("degenerate lattice matrix")
        # integer range large enough to cover the extent
        reach = int(np.ceil(extent * np.abs(np.linalg.inv(A)).sum(axis=1).max())) + 1
        axis = np.arange(-reach, reach + 1)
        k = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d)
        pts = k @ A.T
        return cls(pts[np.abs(pts).max(axis=1) <= extent + BOX_TOL])

    def jittered(self, rng: np.random.Generator, amount) -> "GaborLattice":
        """Independent perturbation of every point.

        In the finite model each coordinate moves by an integer drawn
        uniformly from ``{-amount, ..., amount}``; otherwise by a uniform
        real in ``(-amount, amount)``.
        """
        if self.N is not None:
            step = rng.integers(-int(amount), int(amount) + 1, size=self.points.shape)
            return GaborLattice(self.points + step, self.N, self.phases)
        step = rng.uniform(-amount, amount, size=self.points.shape)
        return GaborLattice(self.points + step, None, self.phases)

    def with_phases(self, phases) -> "GaborLattice":
        return GaborLattice(self.points, self.N, phases, self.spacing)

    def to_dict(self) -> dict:
        out = {"N": self.N, "points": self.points.tolist()}
        if self.phases is not None:
            out["phases"] = [[float(p.real), float(p.imag)] for p in self.phases]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GaborLattice":
        phases = data.get("phases")
        if phases is not None:
            phases = np.array([complex(*p) if isinstance(p, (list, tuple)) else p
                               for p in phases])
        return cls(np.asarray(data["points"]), data.get("N"), phases)


def torus_rep(v: np.ndarray, N: int) -> np.ndarray:
    """Representatives in ``[-N/2, N/2)``."""
    return np.mod(np.asarray(v, dtype=float) + N / 2, N) - N / 2


@dataclass(frozen=True)
class BoxSpec:
    """Skewed boxes ``M Q_n(O) = {O + M y : ||y||_inf <= n/2}``."""

    center: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        c = np.asarray(self.center, dtype=float).ravel()
        if M.shape != (len(c), len(c)):
            raise DomainError("M must be square of the same dimension as the center")
        if abs(np.linalg.det(M)) < 1e-14:
            raise DomainError("degenerate skew matrix")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "center", c)

    @classmethod
    def standard(cls, dim: int = 2) -> "BoxSpec":
        return cls(np.zeros(dim), np.eye(dim))

    @property
    def det(self) -> float:
        return float(abs(np.linalg.det(self.M)))

    def levels(self, points: np.ndarray, N: int | None = None,
               center: np.ndarray | None = None) -> np.ndarray:
        """Smallest side ``n`` whose box contains each point: ``2||M^-1 (p - O)||_inf``."""
        c = self.center if center is None else center
        d = np.asarray(points, dtype=float) - c
        if N is not None:
            d = torus_rep(d, N)
        return 2 * np.abs(d @ np.linalg.inv(self.M).T).max(axis=1)

    def volume(self, n: float, N: int | None = None) -> float:
        vol = self.det * n ** len(self.center)
        return vol / N if N is not None else vol


def box_decomposition(lattice: GaborLattice, box: BoxSpec | None = None):
    """Index decomposition of the lattice by nested boxes of sides ``1, 2, ...``.

    Labels are point indices; coordinates are the points themselves (torus
    representatives around the center in the finite model).

    Returns:
        ``(decomp, order, sides)`` where ``order`` lists point indices in
        label order and ``sides[k]`` is the side of block ``k + 1``.
    """
    box = box or BoxSpec.standard(lattice.dim)
    lev = box.levels(lattice.points, lattice.N)
    entry = np.maximum(np.ceil(lev - BOX_TOL), 1).astype(int)
    order = np.lexsort((np.arange(len(lev)), lev))
    sides = np.arange(entry.min(), entry.max() + 1)
    sizes = np.searchsorted(np.sort(entry), sides, side="right")
    coords = lattice.points[order].astype(float)
    if lattice.N is not None:
        coords = torus_rep(coords - box.center, lattice.N) + box.center
    decomp = IndexDecomposition(tuple(int(k) for k in order), tuple(int(s) for s in sizes),
                                coords, complete=lattice.N is not None)
    return decomp, order, sides


# -- windows -------------------------------------------------------------------------


def gaussian_window(N: int, sigma: float) -> np.ndarray:
    """Periodized Gaussian ``sum_k exp(-(x - kN)^2 / (2 sigma^2))``, unit norm."""
    x = np.arange(N)
    k = np.arange(-3, 4)[:, None]
    g = np.exp(-((x[None, :] - k * N) ** 2) / (2 * sigma ** 2)).sum(axis=0)
    return g / np.linalg.norm(g)


def get_window(key: str, N: int) -> np.ndarray:
    """Window registry: ``delta``, ``gaussian:<sigma>``, ``file:<path>``.

    Files are ``.npy`` arrays or text with one value (or a real and an
    imaginary column) per line.
    """
    if key == "delta":
        g = np.zeros(N)
        g[0] = 1.0
        return g
    if key.startswith("gaussian:"):
        return gaussian_window(N, float(key.split(":", 1)[1]))
    if key.startswith("file:"):
        path = Path(key.split(":", 1)[1])
        if path.suffix == ".npy":
            g = np.load(path)
        else:
            raw = np.loadtxt(path, ndmin=2)
            g = raw[:, 0] + 1j * raw[:, 1] if raw.shape[1] > 1 else raw[:, 0]
        g = np.asarray(g).ravel()
        if len(g) != N:
            raise DomainError(f"window has length {len(g)}, expected {N}")
        return g
    raise DomainError(f"unknown window {key!r}")


def gabor_system(g: np.ndarray, lattice: GaborLattice,
                 box: BoxSpec | None = None, order: np.ndarray | None = None,
                 decomp: IndexDecomposition | None = None) -> FrameSnapshot:
    """The Gabor family of ``g`` over ``lattice``, in box order.

    ``order``/``decomp`` override the box decomposition, which lets several
    systems share the index set of a reference lattice.

    Raises:
        DomainError: zero window, or a lattice outside the finite model.
    """
    if lattice.N is None:
        raise DomainError("Gabor systems need the finite model (N)")
    N = int(lattice.N)
    g = np.asarray(g)
    if g.shape != (N,):
        raise DomainError(f"window must have length {N}")
    if not np.any(g != 0):
        raise DomainError("zero window")
    if decomp is None or order is None:
        decomp, order, _ = box_decomposition(lattice, box)
    pts = lattice.points[order]
    t, w = pts[:, 0], pts[:, 1]
    x = np.arange(N)
    shifted = g[(x[None, :] - t[:, None]) % N]
    vecs = np.exp(2j * np.pi * np.outer(w, x) / N) * shifted
    if lattice.phases is not None:
        vecs = lattice.phases[order][:, None] * vecs
    return FrameSnapshot(N, vecs, decomp)


def gabor_gram_operator(frame: FrameSnapshot, N: int):
    """The Gram matrix as an operator with the torus sup-metric attached."""
    from .operators import OperatorSnapshot
    return OperatorSnapshot(frame.gram(), frame.decomp, get_metric(f"torus:{N}"))


# -- densities -------------------------------------------------------------------------


@dataclass
class DensityEstimate:
    """Counts and density ratios over boxes of increasing side.

    Attributes:
        n_list: box sides.
        counts: ``|Λ ∩ M Q_n(O)|`` with multiplicity.
        ratios: ``counts / vol(M Q_n(O))``.
        profile: profile of the ratio sequence.
        beurling_upper, beurling_lower: per-side max/min ratio over the
            scanned centers (None without a scan).
        exact: ``|Λ| / N`` in the finite model (the ratio of the box that
            covers the whole torus), else None.
        normalization: which volume is in force.
    """

    n_list: np.ndarray
    counts: np.ndarray
    ratios: np.ndarray
    profile: MeasureProfile
    beurling_upper: np.ndarray | None = None
    beurling_lower: np.ndarray | None = None
    exact: float | None = None
    normalization: str = "lebesgue"
    scan_points: int = 0

    @property
    def interval(self) -> tuple:
        """Density envelope used for comparisons."""
        if self.exact is not None:
            return (self.exact, self.exact)
        return (self.profile.liminf, self.profile.limsup)

    def to_dict(self) -> dict:
        out = {"n": self.n_list.tolist(), "counts": self.counts.tolist(),
               "ratios": self.ratios.tolist(), "profile": self.profile.to_dict(),
               "normalization": self.normalization, "exact": self.exact}
        if self.beurling_upper is not None:
            out["beurling_upper"] = self.beurling_upper.tolist()
            out["beurling_lower"] = self.beurling_lower.tolist()
            out["scan_points"] = self.scan_points
        return out


def _count(lattice: GaborLattice, box: BoxSpec, n: float, center=None) -> int:
    return int(np.sum(box.levels(lattice.points, lattice.N, center) <= n + BOX_TOL))


def density_estimate(lattice: GaborLattice, box: BoxSpec | None = None,
                     n_list: Sequence[float] | None = None,
                     center_scan: tuple | None = None,
                     window: float = 0.5,
                     cluster_eps: float = DEFAULT_CLUSTER_EPS) -> DensityEstimate:
    """Point counts in nested boxes, their density ratios and a Beurling scan.

    Args:
        lattice: the point set.
        box: center and skew of the boxes.
        n_list: box sides; default ``1..N`` in the finite model.
        center_scan: ``(lo, hi)`` coordinate bounds; for every side ``n`` the
            centers range over a grid of step ``n/4`` inside them.
        window: trailing fraction used by the ratio profile.
    """
    if len(lattice) == 0:
        raise DomainError("empty lattice")
    box = box or BoxSpec.standard(lattice.dim)
    N = lattice.N
    if n_list is None:
        if N is None:
            raise DomainError("n_list is required for point sets in R^2m")
        n_list = np.arange(1, N + 1)
    n_list = np.asarray(n_list, dtype=float)
    counts = np.array([_count(lattice, box, n) for n in n_list])
    ratios = counts / np.array([box.volume(n, N) for n in n_list])
    prof = profile(ratios, window, cluster_eps)
    upper = lower = None
    scanned = 0
    if center_scan is not None:
        lo, hi = (np.asarray(v, dtype=float) for v in center_scan)
        upper, lower = [], []
        for n in n_list:
            axes = [np.arange(l, h + BOX_TOL, n / 4) for l, h in zip(lo, hi)]
            centers = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))
            scanned = max(scanned, len(centers))
            vol = box.volume(n, N)
            c = np.array([_count(lattice, box, n, cc) for cc in centers]) / vol
            upper.append(c.max())
            lower.append(c.min())
        upper, lower = np.array(upper), np.array(lower)
    exact = float(len(lattice) / N) if N is not None else None
    norm = "counting/N (finite model: torus volume N)" if N is not None else "lebesgue"
    return DensityEstimate(n_list, counts, ratios, prof, upper, lower, exact, norm, scanned)


@dataclass
class MeasureDensityReport:
    measure: MeasureProfile
    density: tuple
    product: tuple
    residual: float
    passed: bool
    normalization: str


def measure_vs_density(frame_or_profile, estimate: DensityEstimate,
                       tol: float = 1e-9) -> MeasureDensityReport:
    """Compare the measure profile with the reciprocal density.

    The product interval is ``[liminf * D_low, limsup * D_high]``; the
    residual is the larger distance of its endpoints from 1.
    """
    prof = (frame_or_profile if isinstance(frame_or_profile, MeasureProfile)
            else frame_measure(frame_or_profile))
    d_lo, d_hi = estimate.interval
    prod = (prof.liminf * d_lo, prof.limsup * d_hi)
    residual = float(max(abs(prod[0] - 1), abs(prod[1] - 1)))
    return MeasureDensityReport(prof, (d_lo, d_hi), prod, residual, residual <= tol,
                                estimate.normalization)


@dataclass
class SuperframeDensityReport:
    superframe: SuperframeReport
    measures: list  # full-set a of each system
    measure_sum: float
    profile_limsup_sum: float
    det_sum: float | None
    necessary_condition: bool
    remap_ratios: list = field(default_factory=list)


def superframe_density_condition(systems: Sequence[tuple], box: BoxSpec | None = None,
                                 tol: float = 1e-6) -> SuperframeDensityReport:
    """Superframe test for ``d`` Gabor systems and the density condition.

    Args:
        systems: ``(window, lattice)`` pairs with lattices of equal size.
            Point ``j`` of every lattice is attached to label ``j``; the
            decomposition is the box decomposition of the first lattice.
        box: boxes for that decomposition.

    ``necessary_condition`` is ``sum of measures <= 1 + tol``; for regular
    lattices ``det_sum`` is ``sum a_k b_k / N``.
    """
    if not systems:
        raise DomainError("no systems given")
    lattices = [lat for _, lat in systems]
    K = len(lattices[0])
    if any(len(l) != K for l in lattices):
        raise DomainError("lattices must have the same number of points")
    decomp, order, _ = box_decomposition(lattices[0], box)
    frames = [gabor_system(g, lat, order=order, decomp=decomp) for g, lat in systems]
    remap_ratios = []
    for lat in lattices[1:]:
        own, _, _ = box_decomposition(lat, box)
        depth = min(own.depth, decomp.depth)
        remap = IndexRemap({lab: lab for lab in decomp.labels}, decomp.prefix(decomp.depth),
                           own)
        rep = remap_measure_condition(remap, range(1, depth + 1), tol=1e-2)
        remap_ratios.append(rep.overlap.tolist())
    if len(frames) == 1:
        sf = None
    else:
        sf = superframe_check(*frames)
    measures, limsups = [], []
    for f in frames:
        ms = measure_sequence(analyze(f))
        measures.append(float(ms.a[-1]))
        limsups.append(profile(ms.a).limsup)
    det_sum = None
    if all(l.spacing is not None for l in lattices):
        det_sum = float(sum(a * b / l.N for l, (a, b) in
                            zip(lattices, (l.spacing for l in lattices))))
    total = float(sum(measures))
    return SuperframeDensityReport(sf, measures, total, float(sum(limsups)), det_sum,
                                   total <= 1 + tol, remap_ratios)
