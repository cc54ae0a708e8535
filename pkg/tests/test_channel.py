import numpy as np
import pytest

from framekit import channel
from framekit.channel import (ChannelRun, _chunk_stats, complex_noise, noise_selftest,
                              simulate)
from framekit.constructions import counterexample_pair, onb
from framekit.errors import DomainError
from framekit.frames import FrameSnapshot, analyze
from framekit.index import IndexDecomposition


def random_frame(seed, m=24, d=9):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
    sizes = np.unique(np.r_[np.linspace(m / 6, m, 5).astype(int), m])
    return FrameSnapshot(d, V, IndexDecomposition.from_sizes(sizes, start=1))


# -- noise ----------------------------------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_selftest_bounds(seed):
    rep = noise_selftest(seed, 100_000)
    assert abs(rep.mean) < 4 / np.sqrt(rep.samples)
    assert abs(rep.variance - 1) < 0.05
    assert abs(rep.lag1) <= 4 * rep.lag1_stderr
    assert rep.passed


def test_selftest_needs_samples():
    with pytest.raises(DomainError):
        noise_selftest(0, 9_999)


def test_noise_convention_circular():
    n = complex_noise(np.random.default_rng(0), 200_000)
    assert np.var(n.real) == pytest.approx(0.5, abs=0.01)
    assert np.var(n.imag) == pytest.approx(0.5, abs=0.01)
    assert abs(np.mean(n * n)) < 0.01  # pseudo-covariance vanishes


# -- chunk statistics against a direct reconstruction ------------------------------------------------


def test_chunk_stats_match_direct_reconstruction():
    f = random_frame(1)
    an = analyze(f)
    P = an.gram_projection
    pars = an.parseval_vectors()
    sizes = np.asarray(f.decomp.sizes)
    ss = np.random.SeedSequence(99)
    count, mean, m2 = _chunk_stats(np.real(np.diag(P)), np.tril(P, k=-1), sizes, ss, 50)
    noise = complex_noise(np.random.default_rng(ss), (50, f.count))
    energy = np.empty((50, len(sizes)))
    for t in range(50):
        for b, s in enumerate(sizes):
            eps = noise[t, :s] @ pars[:s]
            energy[t, b] = np.vdot(eps, eps).real / s
    assert count == 50
    np.testing.assert_allclose(mean, energy.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(m2, ((energy - energy.mean(axis=0)) ** 2).sum(axis=0),
                               rtol=1e-9)


# -- simulate ----------------------------------------------------------------------------------------


def test_onb_channel():
    rep = simulate(ChannelRun(onb(20, complex_=True), trials=2000, seed=4))
    np.testing.assert_allclose(rep.analytic, 1)
    assert np.all(np.abs(rep.empirical - 1) <= 3 * rep.stderr)


def test_parseval_full_block_is_d_over_m():
    f = random_frame(2, m=30, d=12)
    rep = simulate(ChannelRun(f, trials=500, seed=0))
    assert rep.analytic[-1] == pytest.approx(12 / 30, abs=1e-12)


def test_analytic_matches_diag_products():
    f = random_frame(3)
    an = analyze(f)
    rep = simulate(ChannelRun(f, trials=200))
    sizes = np.asarray(f.decomp.sizes)
    np.testing.assert_allclose(rep.analytic, np.cumsum(an.diag_products)[sizes - 1] / sizes,
                               atol=1e-12)


def test_counterexample_f_channel():
    pair = counterexample_pair(32)
    rep = simulate(ChannelRun(pair.F, trials=2000, seed=7))
    n = np.arange(1, pair.length + 1)
    np.testing.assert_allclose(rep.analytic, (n // 2) / n, atol=1e-12)
    assert rep.fraction_within(4) >= 0.95
    assert rep.selftest.passed


def test_agreement_over_seeds():
    f = random_frame(5)
    fr = [simulate(ChannelRun(f, trials=1000, seed=s)).fraction_within(4) for s in range(5)]
    assert np.mean(fr) >= 0.95


def test_reproducible_and_thread_independent(monkeypatch):
    f = random_frame(6)
    monkeypatch.setenv("FRAMEKIT_THREADS", "1")
    a = simulate(ChannelRun(f, trials=1000, seed=42))
    b = simulate(ChannelRun(f, trials=1000, seed=42))
    monkeypatch.setenv("FRAMEKIT_THREADS", "4")
    c = simulate(ChannelRun(f, trials=1000, seed=42))
    for r in (b, c):
        assert r.empirical.tobytes() == a.empirical.tobytes()
        assert r.stderr.tobytes() == a.stderr.tobytes()
    assert c.threads == 4
    d = simulate(ChannelRun(f, trials=1000, seed=43))
    assert d.empirical.tobytes() != a.empirical.tobytes()


def test_thread_count_parsing(monkeypatch):
    monkeypatch.setenv("FRAMEKIT_THREADS", "3")
    assert channel.thread_count() == 3
    monkeypatch.setenv("FRAMEKIT_THREADS", "bogus")
    assert channel.thread_count() >= 1


def test_too_few_trials():
    with pytest.raises(DomainError):
        simulate(ChannelRun(onb(3), trials=99))


def test_report_rows_and_z():
    rep = simulate(ChannelRun(onb(4), trials=300, seed=1))
    rows = list(rep.rows())
    assert len(rows) == 4 and rows[0][0] == 1
    lo, hi = rep.confidence()
    assert np.all(lo <= rep.empirical) and np.all(rep.empirical <= hi)
    np.testing.assert_allclose(rep.z, (rep.empirical - rep.analytic) / rep.stderr)
