"""Named experiments: configuration, execution and artifacts.

Each experiment writes a ``summary.json`` (checks with pass/fail), the
sequences it computed as CSV and one or more PNG figures into its output
directory.  Payloads contain no timestamps, so reruns with the same
configuration reproduce the JSON and CSV files byte for byte.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import io, plotting
from .channel import ChannelRun, simulate, thread_count
from .constructions import (banded_random_operator, counterexample_pair, dense_ramp_operator,
                            interleaved_double_onb, random_riesz, two_cluster_sequence)
from .errors import InputError
from .frames import analyze, measure_sequence
from .gabor import (GaborLattice, box_decomposition, density_estimate, gabor_system,
                    gaussian_window, get_window, measure_vs_density,
                    superframe_density_condition)
from .index import IndexDecomposition
from .measure import excess_probe, frame_measure_sequence, profile
from .operators import superset_additivity_report, tracial_residual, window_means

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"type": "string"},
        "inputs": {"type": "object"},
        "params": {"type": "object"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "depths": {"type": "array", "items": {"type": "integer"}},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "output_dir": {"type": "string"},
    },
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    """One experiment.

    Attributes:
        kind: registry name (see :data:`EXPERIMENTS`).
        inputs: named input paths.
        params: kind-specific parameters.
        tolerances: overrides of the kind's default tolerances.
        depths: truncation depths (each at least 4).
        seeds: random seeds.
        output_dir: where artifacts go.
    """

    kind: str
    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    depths: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    output_dir: str = "framekit-out"

    def __post_init__(self):
        problems = []
        if self.kind not in EXPERIMENTS:
            problems.append(f"kind: unknown experiment {self.kind!r} "
                            f"(known: {', '.join(sorted(EXPERIMENTS))})")
        problems += [f"tolerances/{k}: must be positive" for k, v in self.tolerances.items()
                     if not v > 0]
        problems += [f"depths: {d} is below 4" for d in self.depths if d < 4]
        if problems:
            raise InputError("invalid experiment configuration", problems)

    @classmethod
    def from_dict(cls, data: Any, source: str = "<config>") -> "ExperimentConfig":
        problems = io.schema_problems(data, CONFIG_SCHEMA)
        if problems:
            raise InputError(f"{source}: schema violation", problems)
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(io.read_json(path), str(path))

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[self.kind][name]))

    def depth(self, default: int) -> int:
        return int(self.depths[0]) if self.depths else default

    def seed(self, default: int = 0) -> int:
        return int(self.seeds[0]) if self.seeds else default


@dataclass
class Check:
    name: str
    passed: bool
    value: Any
    tol: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "tol": self.tol, "detail": self.detail}


@dataclass
class ExperimentResult:
    kind: str
    checks: list
    payload: dict
    files: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary(self) -> dict:
        return {"kind": self.kind, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks], "results": self.payload,
                "files": sorted(Path(f).name for f in self.files)}


def _envelope_check(name, prof, target, tol) -> Check:
    return Check(name, prof.within(target, tol), [prof.liminf, prof.limsup], tol,
                 f"target {target}")


# -- experiments -----------------------------------------------------------------------


def _paper_counterexample(cfg: ExperimentConfig, out: Path):
    depth = cfg.depth(400)
    coarse, fine = counterexample_pair(depth), counterexample_pair(2 * depth)
    tol, files, checks, payload, series, profs = cfg.tol("profile"), [], [], {}, {}, {}
    for name, target in (("F", 0.5), ("G", 0.25), ("FG", 0.5)):
        f, g = getattr(coarse, name), getattr(fine, name)
        ms = frame_measure_sequence(f, g)
        prof = profile(ms)
        series[name], profs[name] = ms.a, prof
        payload[name] = prof.to_dict()
        files.append(io.write_measure_sequence(out / f"measure_{name}.csv", ms))
        checks.append(_envelope_check(f"profile_{name}", prof, target, tol))
        stable = ms.stable_mask & np.logical_and.accumulate(ms.stable_mask)
        k = int(f.decomp.sizes[np.flatnonzero(stable)[-1]])
        gap = float(np.max(np.abs(f.explicit_diag()[:k] - ms.diag[:k])))
        checks.append(Check(f"explicit_dual_{name}", gap <= cfg.tol("dual"), gap,
                            cfg.tol("dual")))
    add = superset_additivity_report(coarse.F, coarse.G, (fine.F, fine.G),
                                     positions=coarse.closed_positions)
    payload["additivity_residual"] = add.residual
    checks.append(Check("non_additive", abs(add.residual - 0.25) <= cfg.tol("residual"),
                        add.residual, cfg.tol("residual"), "target 0.25"))
    files.append(plotting.plot_measure_sequences(
        {k: v[: 2 * depth] for k, v in series.items()}, out / "measure.png", profs,
        title=f"non-additive pair, depth {depth}"))
    return checks, payload, files


def _riesz(cfg: ExperimentConfig, out: Path):
    dim = cfg.depth(64)
    rng = np.random.default_rng(cfg.seed())
    f = random_riesz(dim, rng)
    ms = measure_sequence(analyze(f))
    prof = profile(ms)
    files = [io.write_measure_sequence(out / "measure.csv", ms),
             plotting.plot_measure_sequences({"a_n": ms.a}, out / "measure.png", {"a_n": prof})]
    dev = float(np.max(np.abs(ms.a - 1)))
    return [Check("profile_one", dev <= cfg.tol("profile"), dev, cfg.tol("profile"))], \
        {"profile": prof.to_dict()}, files


def _two_cluster(cfg: ExperimentConfig, out: Path):
    x = two_cluster_sequence(cfg.depth(20))
    prof = profile(x)
    tol = cfg.tol("profile")
    checks = [Check("liminf", abs(prof.liminf - 1 / 3) <= tol, prof.liminf, tol, "1/3"),
              Check("limsup", abs(prof.limsup - 2 / 3) <= tol, prof.limsup, tol, "2/3"),
              Check("two_clusters", len(prof.clusters) == 2, len(prof.clusters))]
    files = [io.write_sequence(out / "sequence.csv", x),
             plotting.plot_measure_sequences({"x_n/|I_n|": x.normalized()},
                                             out / "profile.png", {"x_n/|I_n|": prof})]
    return checks, {"profile": prof.to_dict()}, files


def _gabor_lattice(p: dict) -> tuple[int, GaborLattice, np.ndarray]:
    N, a, b = int(p.get("N", 16)), int(p.get("a", 2)), int(p.get("b", 2))
    lat = GaborLattice.regular(N, a, b)
    key = p.get("window", f"gaussian:{math.sqrt(a * N / (2 * math.pi * b))!r}")
    return N, lat, get_window(key, N)


def _gabor_regular(cfg: ExperimentConfig, out: Path):
    N, lat, g = _gabor_lattice(cfg.params)
    if "jitter" in cfg.params:
        lat = lat.jittered(np.random.default_rng(cfg.seed()), int(cfg.params["jitter"]))
    f = gabor_system(g, lat)
    ms = measure_sequence(analyze(f))
    prof = profile(ms)
    est = density_estimate(lat)
    rep = measure_vs_density(prof, est, cfg.tol("product"))
    files = [io.write_measure_sequence(out / "measure.csv", ms),
             io.write_csv(out / "density.csv", ("n", "count", "ratio"),
                          zip(est.n_list, est.counts, est.ratios)),
             plotting.plot_lattice(lat, out / "lattice.png"),
             plotting.plot_density(est, out / "density.png"),
             plotting.plot_measure_sequences({"a_n": ms.a}, out / "measure.png", {"a_n": prof})]
    payload = {"profile": prof.to_dict(), "density": est.exact,
               "product": list(rep.product), "normalization": rep.normalization}
    return [Check("measure_times_density", rep.passed, rep.residual, cfg.tol("product"))], \
        payload, files


def gabor_pair_residual(N: int, a: int, b: int, seed: int, jitter: int = 1,
                        window_ratio: float = 1.5) -> float:
    """Additivity residual of a regular Gabor frame and a jittered copy.

    The first window is the Gaussian matched to the lattice; the copy uses
    a Gaussian ``window_ratio`` times wider.  Both share the box
    decomposition of the regular lattice.
    """
    rng = np.random.default_rng(seed)
    l1 = GaborLattice.regular(N, a, b)
    l2 = l1.jittered(rng, jitter)
    sigma = math.sqrt(a * N / (2 * math.pi * b))
    decomp, order, _ = box_decomposition(l1)
    f1 = gabor_system(gaussian_window(N, sigma), l1, order=order, decomp=decomp)
    f2 = gabor_system(gaussian_window(N, window_ratio * sigma), l2, order=order, decomp=decomp)
    rep = superset_additivity_report(f1, f2)
    return rep.residual


GABOR_SWEEP = ((16, 2, 2), (32, 2, 4), (64, 4, 4))


def _gabor_superframe(cfg: ExperimentConfig, out: Path):
    seeds = cfg.seeds or list(range(16))
    rows, means = [], []
    for N, a, b in GABOR_SWEEP:
        res = [gabor_pair_residual(N, a, b, s) for s in seeds]
        rows += [(N, s, r) for s, r in zip(seeds, res)]
        means.append(float(np.mean(res)))
    files = [io.write_csv(out / "residuals.csv", ("N", "seed", "residual"), rows),
             io.write_csv(out / "mean_residuals.csv", ("N", "mean_residual"),
                          zip([s[0] for s in GABOR_SWEEP], means))]
    tol = cfg.tol("residual")
    checks = [Check("residual_N64", means[-1] < tol, means[-1], tol),
              Check("decreasing", bool(np.all(np.diff(means) < 0)), means)]
    return checks, {"mean_residuals": means, "seeds": len(seeds)}, files


def _superframe_density(cfg: ExperimentConfig, out: Path):
    N, a, b = int(cfg.params.get("N", 12)), int(cfg.params.get("a", 3)), int(cfg.params.get("b", 3))
    lat = GaborLattice.regular(N, a, b)
    copies = int(cfg.params.get("copies", 2))
    systems = [(gaussian_window(N, 1.0 + k), lat) for k in range(copies)]
    rep = superframe_density_condition(systems)
    payload = {"measures": rep.measures, "measure_sum": rep.measure_sum,
               "det_sum": rep.det_sum, "is_superframe": rep.superframe.is_superframe}
    consistent = rep.necessary_condition or not rep.superframe.is_superframe
    return [Check("necessity", consistent, rep.measure_sum, cfg.tol("sum"),
                  "superframe implies sum of measures <= 1")], payload, []


def _channel(cfg: ExperimentConfig, out: Path):
    pair = counterexample_pair(cfg.depth(64))
    trials = int(cfg.params.get("trials", 10_000))
    rep = simulate(ChannelRun(pair.F, trials, cfg.seed(42)))
    frac = rep.fraction_within(cfg.tol("z"))
    files = [io.write_csv(out / "channel.csv", ("n", "analytic", "empirical", "stderr", "z"),
                          rep.rows()),
             plotting.plot_channel(rep, out / "channel.png")]
    payload = {"fraction_within": frac, "selftest": rep.selftest.to_dict(),
               "convention": rep.convention, "trials": trials}
    return [Check("agreement", frac >= cfg.tol("fraction"), frac, cfg.tol("fraction")),
            Check("noise_selftest", rep.selftest.passed, rep.selftest.variance)], payload, files


def _excess(cfg: ExperimentConfig, out: Path):
    f = interleaved_double_onb(cfg.depth(32))
    alpha, eps = float(cfg.params.get("alpha", 0.6)), float(cfg.params.get("epsilon", 0.1))
    rep = excess_probe(f, alpha, eps)
    floor = rep.original_bounds[0] * (1 - eps - alpha)
    payload = {"removed_fraction": rep.removed_fraction, "remaining_bounds": rep.remaining_bounds,
               "original_bounds": rep.original_bounds,
               "removed": sorted(rep.removed_labels)}
    tol = cfg.tol("bound")
    return [Check("half_removed", rep.removed_fraction == 0.5, rep.removed_fraction),
            Check("lower_bound", rep.remaining_bounds[0] >= floor - tol,
                  rep.remaining_bounds[0], tol, f"floor {floor!r}")], payload, []


def _tracial(cfg: ExperimentConfig, out: Path):
    half = cfg.depth(512)
    n_eval = int(cfg.params.get("n_eval", half // 2))
    decomp = IndexDecomposition.symmetric_boxes(half)
    rng = np.random.default_rng(cfg.seed())
    t1 = banded_random_operator(decomp, 3, rng)
    t2 = banded_random_operator(decomp, 3, rng)
    r = tracial_residual(t1, t2).normalized()[:n_eval]
    dense = dense_ramp_operator(decomp, rng)
    rd = tracial_residual(dense, dense.adjoint()).normalized()[:n_eval]
    marks = [n for n in (16, 32, 64, 128, 256, 512) if n <= n_eval]
    wm = window_means(r, marks)
    tol = cfg.tol("residual")
    files = [io.write_csv(out / "tracial.csv", ("n", "banded", "dense"),
                          zip(range(1, n_eval + 1), r, rd)),
             plotting.plot_residual(r, out / "tracial.png", "tracial residual (banded)")]
    checks = [Check("decreasing", bool(np.all(np.diff(wm) < 0)), wm.tolist()),
              Check("last_block", r[-1] <= tol, float(r[-1]), tol),
              Check("dense_control", rd[-1] > tol, float(rd[-1]), tol)]
    return checks, {"window_means": wm.tolist(), "dense_last": float(rd[-1])}, files


Runner = Callable[[ExperimentConfig, Path], tuple]

EXPERIMENTS: dict[str, Runner] = {
    "paper-counterexample": _paper_counterexample,
    "riesz": _riesz,
    "two-cluster": _two_cluster,
    "gabor-regular": _gabor_regular,
    "gabor-superframe": _gabor_superframe,
    "superframe-density": _superframe_density,
    "channel": _channel,
    "excess": _excess,
    "tracial": _tracial,
}

DEFAULT_TOLERANCES = {
    "paper-counterexample": {"profile": 0.02, "dual": 1e-8, "residual": 0.02},
    "riesz": {"profile": 1e-9},
    "two-cluster": {"profile": 1e-3},
    "gabor-regular": {"product": 1e-9},
    "gabor-superframe": {"residual": 0.03},
    "superframe-density": {"sum": 1e-6},
    "channel": {"z": 4.0, "fraction": 0.95},
    "excess": {"bound": 1e-9},
    "tracial": {"residual": 0.05},
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run one experiment and write its artifacts and ``summary.json``."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    checks, payload, files = EXPERIMENTS[config.kind](config, out)
    result = ExperimentResult(config.kind, checks, payload, [str(f) for f in files])
    summary = io.write_json(out / "summary.json", result.summary())
    result.files.append(str(summary))
    return result


def run_suite(configs: list[ExperimentConfig]) -> list[ExperimentResult]:
    """Run whole experiments, in parallel when ``FRAMEKIT_THREADS`` allows."""
    threads = min(thread_count(), max(len(configs), 1))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run_experiment, configs))
    return [run_experiment(c) for c in configs]
