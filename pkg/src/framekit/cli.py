"""Command line interface.

Exit codes: 0 when every check passes, 1 when a check fails, 2 when an
input cannot be read or is invalid.  Every command prints a JSON summary on
stdout; commands given ``--out-dir`` also write CSV tables and PNG figures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io, plotting
from .channel import ChannelRun, simulate
from .errors import DomainError, FramekitError, InputError
from .frames import analyze, measure_sequence
from .gabor import (GaborLattice, density_estimate, gabor_system, gaussian_window, get_window,
                    measure_vs_density, superframe_density_condition)
from .index import IndexDecomposition, get_metric
from .measure import (excess_probe, frame_measure_sequence, frames_compare, profile,
                      redundancy)
from .operators import (OperatorSnapshot, b_op, nonexpansive_report, superframe_check,
                        superset_additivity_report, tracial_residual)
from .sequences import compare, decompose_positive, is_frame_compatible, vee, wedge, xr_membership
from .suites import EXPERIMENTS, ExperimentConfig, run_experiment
from .synthesis import synth_perp_normal

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class Outcome:
    """Summary payload and verdict of one command."""

    def __init__(self, payload: dict, passed: bool = True):
        self.payload = payload
        self.passed = passed


def _out(args) -> Path | None:
    return Path(args.out_dir) if getattr(args, "out_dir", None) else None


# -- seq -------------------------------------------------------------------------------


def cmd_seq_check(args) -> Outcome:
    x = io.read_sequence(args.seq)
    ok = is_frame_compatible(x, args.tol)
    payload = {"frame_compatible": ok}
    try:
        payload["xr_certificate"] = xr_membership(x)
    except FramekitError as exc:
        payload["xr_certificate"] = None
        payload["xr_reason"] = str(exc)
    prof = profile(x)
    payload["profile"] = prof.to_dict()
    return Outcome(payload, ok)


def cmd_seq_compare(args) -> Outcome:
    x, y = io.read_sequence(args.x), io.read_sequence(args.y)
    v = compare(x, y, args.tol, args.tail)
    return Outcome({"kind": v.kind, "liminf_gap": v.liminf_gap, "limsup_gap": v.limsup_gap,
                    "blocks_used": v.blocks_used})


def cmd_seq_decompose(args) -> Outcome:
    x = io.read_sequence(args.seq)
    pos, neg = decompose_positive(x)
    out = _out(args)
    if out:
        io.write_sequence(out / "positive.csv", pos)
        io.write_sequence(out / "negative.csv", neg)
    return Outcome({"positive": pos.values.tolist(), "negative": neg.values.tolist()})


def cmd_seq_lattice(args) -> Outcome:
    x, y = io.read_sequence(args.x), io.read_sequence(args.y)
    lo, hi = wedge(x, y), vee(x, y)
    closed = is_frame_compatible(lo) and is_frame_compatible(hi)
    out = _out(args)
    if out:
        io.write_sequence(out / "wedge.csv", lo)
        io.write_sequence(out / "vee.csv", hi)
        plotting.plot_measure_sequences({"wedge": lo.normalized(), "vee": hi.normalized()},
                                        out / "lattice.png")
    return Outcome({"wedge": lo.values.tolist(), "vee": hi.values.tolist(),
                    "compatible": closed}, closed)


# -- frame -------------------------------------------------------------------------------


def cmd_frame_synth(args) -> Outcome:
    x = io.read_sequence(args.seq)
    pn = synth_perp_normal(x)
    io.write_frame(args.out, pn.snapshot)
    exact = bool(np.array_equal(pn.counts().values, np.floor(x.values + 1e-9)))
    return Outcome({"frame": str(args.out), "support": len(pn.support),
                    "ambient_dim": pn.snapshot.ambient_dim, "exact": exact}, exact)


def cmd_frame_measure(args) -> Outcome:
    f = io.read_frame(args.frame)
    fine = io.read_frame(args.refined) if args.refined else None
    ms = frame_measure_sequence(f, fine, args.rank_tol)
    prof = profile(ms, args.window, args.cluster_eps)
    out = _out(args)
    if out:
        io.write_measure_sequence(out / "measure.csv", ms)
        io.write_json(out / "profile.json", prof.to_dict())
        plotting.plot_measure_sequences({"a_n": ms.a}, out / "measure.png", {"a_n": prof})
    payload = prof.to_dict()
    payload["redundancy"] = redundancy(prof).to_dict()
    return Outcome(payload)


def cmd_frame_compare(args) -> Outcome:
    v = frames_compare(io.read_frame(args.f1), io.read_frame(args.f2), args.tol)
    return Outcome({"kind": v.kind, "liminf_gap": v.liminf_gap, "limsup_gap": v.limsup_gap})


def cmd_frame_excess(args) -> Outcome:
    rep = excess_probe(io.read_frame(args.frame), args.alpha, args.epsilon,
                       density_cap=args.density_cap)
    return Outcome({"removed": sorted(rep.removed_labels, key=str),
                    "removed_fraction": rep.removed_fraction,
                    "original_bounds": rep.original_bounds,
                    "remaining_bounds": rep.remaining_bounds,
                    "claim_satisfied": rep.claim_satisfied, "trivial": rep.trivial},
                   rep.claim_satisfied)


def cmd_frame_redundancy(args) -> Outcome:
    prof = profile(frame_measure_sequence(io.read_frame(args.frame)))
    return Outcome(redundancy(prof).to_dict())


def cmd_frame_validate(args) -> Outcome:
    rep = io.validate_frame_file(args.frame)
    if not rep.ok:
        raise InputError(f"{args.frame}: invalid frame file",
                         rep.schema_errors + rep.invariant_errors)
    return Outcome(rep.to_dict())


# -- op / superframe -----------------------------------------------------------------------


def _operator(path: str, labels: str | None, metric: str) -> OperatorSnapshot:
    M = io.read_matrix(path)
    decomp = (io.read_decomposition(labels) if labels
              else IndexDecomposition.naturals(M.shape[0]))
    return OperatorSnapshot(M, decomp, get_metric(metric))


def cmd_op_bmap(args) -> Outcome:
    b = b_op(_operator(args.matrix, args.decomp, args.metric))
    return Outcome({"real": b.real.values.tolist(), "imag": b.imag.values.tolist(),
                    "norm": b.norm, "certified": b.certified})


def cmd_op_tails(args) -> Outcome:
    op = _operator(args.matrix, args.decomp, args.metric)
    rep = nonexpansive_report(op, args.radii)
    out = _out(args)
    if out:
        io.write_csv(out / "tails.csv", ("radius", "col_tail", "row_tail", "interior",
                                         "excluded"), rep.rows())
        plotting.plot_tails(rep, out / "tails.png")
    return Outcome({"radii": rep.radii.tolist(), "row_tail": rep.row_tail.tolist(),
                    "col_tail": rep.col_tail.tolist(),
                    "interior_only": rep.interior_only})


def cmd_op_tracial(args) -> Outcome:
    a = _operator(args.a, args.decomp, args.metric)
    b = _operator(args.b, args.decomp, args.metric)
    r = tracial_residual(a, b).normalized()
    out = _out(args)
    if out:
        io.write_csv(out / "tracial.csv", ("n", "r_n"), zip(range(1, len(r) + 1), r))
        plotting.plot_residual(r, out / "tracial.png", "tracial residual")
    return Outcome({"r": r.tolist()})


def cmd_superframe_check(args) -> Outcome:
    frames = [io.read_frame(p) for p in args.frames]
    rep = superframe_check(*frames, tol=args.tol)
    return Outcome({"is_superframe": rep.is_superframe, "p1p2_norm": rep.p1p2_norm,
                    "combined_bounds": rep.combined_bounds, "ranks": rep.ranks,
                    "combined_rank": rep.combined_rank, "consistent": rep.consistent},
                   rep.is_superframe)


def cmd_superframe_additivity(args) -> Outcome:
    f1, f2 = io.read_frame(args.f1), io.read_frame(args.f2)
    rep = superset_additivity_report(f1, f2)
    out = _out(args)
    if out:
        io.write_csv(out / "additivity.csv", ("n", "a1", "a2", "a12", "residual"),
                     zip(range(1, len(rep.a1) + 1), rep.a1, rep.a2, rep.a12,
                         rep.residual_sequence))
        plotting.plot_residual(rep.residual_sequence, out / "additivity.png",
                               "additivity residual")
    passed = args.max_residual is None or rep.residual <= args.max_residual
    return Outcome({"residual": rep.residual, "window": rep.window,
                    "stable_blocks": rep.stable_blocks}, passed)


# -- gabor ----------------------------------------------------------------------------------


def _lattice(spec: str, N: int | None) -> GaborLattice:
    """``regular:a,b``, ``full`` or a lattice JSON file."""
    if spec == "full" or spec.startswith("regular:"):
        if N is None:
            raise InputError("--N is required for generated lattices")
        if spec == "full":
            return GaborLattice.full(N)
        try:
            a, b = (int(v) for v in spec.split(":", 1)[1].split(","))
        except ValueError as exc:
            raise InputError(f"bad lattice spec {spec!r}; expected regular:a,b") from exc
        return GaborLattice.regular(N, a, b)
    lat = io.read_lattice(spec)
    if N is not None and lat.N != N:
        raise InputError(f"{spec}: lattice modulus {lat.N} differs from --N {N}")
    return lat


def _window(key: str | None, lat: GaborLattice) -> np.ndarray:
    if key is not None:
        return get_window(key, lat.N)
    a, b = lat.spacing if lat.spacing is not None else (1, 1)
    return gaussian_window(lat.N, math.sqrt(a * lat.N / (2 * math.pi * b)))


def cmd_gabor_build(args) -> Outcome:
    lat = _lattice(args.lattice, args.N)
    f = gabor_system(_window(args.window, lat), lat)
    io.write_frame(args.out, f)
    an = analyze(f)
    return Outcome({"frame": str(args.out), "count": f.count, "ambient_dim": f.ambient_dim,
                    "frame_bounds": an.frame_bounds})


def cmd_gabor_density(args) -> Outcome:
    lat = _lattice(args.lattice, args.N)
    est = density_estimate(lat)
    out = _out(args)
    if out:
        io.write_csv(out / "density.csv", ("n", "count", "ratio"),
                     zip(est.n_list, est.counts, est.ratios))
        plotting.plot_density(est, out / "density.png")
        plotting.plot_lattice(lat, out / "lattice.png")
    return Outcome(est.to_dict())


def cmd_gabor_verify(args) -> Outcome:
    lat = _lattice(args.lattice, args.N)
    f = gabor_system(_window(args.window, lat), lat)
    ms = measure_sequence(analyze(f))
    prof = profile(ms)
    est = density_estimate(lat)
    rep = measure_vs_density(prof, est, args.tol)
    out = _out(args)
    if out:
        io.write_measure_sequence(out / "measure.csv", ms)
        plotting.plot_measure_sequences({"a_n": ms.a}, out / "measure.png", {"a_n": prof})
        plotting.plot_density(est, out / "density.png")
    return Outcome({"profile": prof.to_dict(), "density": list(rep.density),
                    "product": list(rep.product), "residual": rep.residual,
                    "normalization": rep.normalization}, rep.passed)


def cmd_gabor_superframe(args) -> Outcome:
    systems = []
    for item in args.system:
        try:
            window, lattice = item.split("@", 1)
        except ValueError as exc:
            raise InputError(f"bad system {item!r}; expected WINDOW@LATTICE") from exc
        lat = _lattice(lattice, args.N)
        systems.append((get_window(window, lat.N), lat))
    rep = superframe_density_condition(systems, tol=args.tol)
    sf = rep.superframe
    payload = {"is_superframe": None if sf is None else sf.is_superframe,
               "measures": rep.measures, "measure_sum": rep.measure_sum,
               "det_sum": rep.det_sum, "necessary_condition": rep.necessary_condition}
    consistent = rep.necessary_condition or sf is None or not sf.is_superframe
    return Outcome(payload, consistent)


# -- channel / suite ------------------------------------------------------------------------


def cmd_channel_sim(args) -> Outcome:
    f = io.read_frame(args.frame)
    rep = simulate(ChannelRun(f, args.trials, args.seed))
    out = _out(args)
    if out:
        io.write_csv(out / "channel.csv", ("n", "analytic", "empirical", "stderr", "z"),
                     rep.rows())
        plotting.plot_channel(rep, out / "channel.png")
    frac = rep.fraction_within(4.0)
    return Outcome({"fraction_within_4se": frac, "selftest": rep.selftest.to_dict(),
                    "convention": rep.convention, "trials": rep.trials, "seed": rep.seed},
                   frac >= 0.95 and rep.selftest.passed)


def cmd_suite(args) -> Outcome:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        if args.out_dir:
            cfg.output_dir = args.out_dir
    else:
        cfg = ExperimentConfig(args.name, output_dir=args.out_dir or f"framekit-out/{args.name}")
    res = run_experiment(cfg)
    return Outcome(res.summary(), res.passed)


# -- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="framekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="group", required=True)

    def command(parent, name, func, help_):
        c = parent.add_parser(name, help=help_)
        c.set_defaults(func=func)
        return c

    def out_dir(c):
        c.add_argument("--out-dir", help="write CSV tables and PNG figures here")

    seq = sub.add_parser("seq", help="frame compatible sequences").add_subparsers(
        dest="cmd", required=True)
    c = command(seq, "check", cmd_seq_check, "compatibility, X^R certificate, profile")
    c.add_argument("--seq", required=True)
    c.add_argument("--tol", type=float, default=0.0)
    c = command(seq, "compare", cmd_seq_compare, "order two sequences")
    c.add_argument("x")
    c.add_argument("y")
    c.add_argument("--tol", type=float, default=1e-3)
    c.add_argument("--tail", type=float, default=0.5)
    c = command(seq, "decompose", cmd_seq_decompose, "split into compatible parts")
    c.add_argument("--seq", required=True)
    out_dir(c)
    c = command(seq, "lattice", cmd_seq_lattice, "pointwise min and max")
    c.add_argument("x")
    c.add_argument("y")
    out_dir(c)

    frame = sub.add_parser("frame", help="frames and measures").add_subparsers(
        dest="cmd", required=True)
    c = command(frame, "synth", cmd_frame_synth, "perpendicular-normal frame for a sequence")
    c.add_argument("--seq", required=True)
    c.add_argument("--out", required=True)
    c = command(frame, "measure", cmd_frame_measure, "measure profile of a frame")
    c.add_argument("--frame", required=True)
    c.add_argument("--refined", help="deeper truncation for stability")
    c.add_argument("--window", type=float, default=0.5)
    c.add_argument("--cluster-eps", type=float, default=1e-2)
    c.add_argument("--rank-tol", type=float, default=1e-10)
    out_dir(c)
    c = command(frame, "compare", cmd_frame_compare, "order two frames by b")
    c.add_argument("f1")
    c.add_argument("f2")
    c.add_argument("--tol", type=float, default=1e-3)
    c = command(frame, "excess", cmd_frame_excess, "remove small diagonal products")
    c.add_argument("--frame", required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--density-cap", action="store_true")
    c = command(frame, "redundancy", cmd_frame_redundancy, "reciprocal profile")
    c.add_argument("--frame", required=True)
    c = command(frame, "validate", cmd_frame_validate, "schema and invariant check")
    c.add_argument("frame")

    op = sub.add_parser("op", help="operators").add_subparsers(dest="cmd", required=True)
    for name, func, help_ in (("bmap", cmd_op_bmap, "b of an operator"),
                              ("tails", cmd_op_tails, "off-ball energy table"),
                              ("tracial", cmd_op_tracial, "tracial residual of a pair")):
        c = command(op, name, func, help_)
        if name == "tracial":
            c.add_argument("a")
            c.add_argument("b")
        else:
            c.add_argument("--matrix", required=True)
        c.add_argument("--decomp", help="decomposition JSON (default: 1..m)")
        c.add_argument("--metric", default="abs")
        if name == "tails":
            c.add_argument("--radii", type=float, nargs="+", required=True)
        if name != "bmap":
            out_dir(c)

    sf = sub.add_parser("superframe", help="superframes").add_subparsers(
        dest="cmd", required=True)
    c = command(sf, "check", cmd_superframe_check, "is the direct sum a frame")
    c.add_argument("frames", nargs="+")
    c.add_argument("--tol", type=float, default=1e-9)
    c = command(sf, "additivity", cmd_superframe_additivity, "additivity residual")
    c.add_argument("f1")
    c.add_argument("f2")
    c.add_argument("--max-residual", type=float)
    out_dir(c)

    gb = sub.add_parser("gabor", help="finite Gabor systems").add_subparsers(
        dest="cmd", required=True)
    for name, func, help_ in (("build", cmd_gabor_build, "write a Gabor frame"),
                              ("density", cmd_gabor_density, "density ratios"),
                              ("verify-measure", cmd_gabor_verify, "measure times density"),
                              ("superframe", cmd_gabor_superframe, "density condition")):
        c = command(gb, name, func, help_)
        c.add_argument("--N", type=int)
        if name == "superframe":
            c.add_argument("--system", action="append", required=True,
                           help="WINDOW@LATTICE, repeatable")
            c.add_argument("--tol", type=float, default=1e-6)
            continue
        c.add_argument("--lattice", required=True, help="regular:a,b | full | file.json")
        if name != "density":
            c.add_argument("--window", help="delta | gaussian:SIGMA | file:PATH "
                           "(default: Gaussian matched to the lattice spacing)")
        if name == "build":
            c.add_argument("--out", required=True)
        else:
            out_dir(c)
        if name == "verify-measure":
            c.add_argument("--tol", type=float, default=1e-9)

    ch = sub.add_parser("channel", help="noise channel").add_subparsers(
        dest="cmd", required=True)
    c = command(ch, "sim", cmd_channel_sim, "Monte Carlo simulation")
    c.add_argument("--frame", required=True)
    c.add_argument("--trials", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=42)
    out_dir(c)

    c = sub.add_parser("suite", help="run a named experiment")
    c.set_defaults(func=cmd_suite)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--name", choices=sorted(EXPERIMENTS))
    g.add_argument("--config", help="experiment JSON")
    out_dir(c)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        outcome = args.func(args)
    except InputError as exc:
        print(json.dumps({"error": str(exc), "problems": exc.problems}, indent=2),
              file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, FramekitError, FileNotFoundError) as exc:
        print(json.dumps({"error": str(exc)}, indent=2), file=sys.stderr)
        return EXIT_INPUT
    try:
        sys.stdout.write(io.dumps({"passed": outcome.passed, **outcome.payload}))
        sys.stdout.flush()
    except BrokenPipeError:
        # the reader went away (e.g. piped into head); keep the exit status
        sys.stdout = open(os.devnull, "w")
    return EXIT_OK if outcome.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
