"""Monte Carlo additive white noise channel.

Coefficients ``c_i = <h, f_i>`` of a Parseval frame are sent with
independent noise ``n_i`` added; the receiver synthesizes with the same
frame.  The error of the partial reconstruction over ``I_n`` is
``eps_n = sum_{i in I_n} n_i f_i``, whose mean energy per coefficient is
``(1/|I_n|) sum_{i in I_n} ||f_i||^2`` (the analytic value ``a_n'``).

Noise is complex circular Gaussian: real and imaginary parts are
independent with variance 1/2 each, so ``E|n_i|^2 = 1``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .frames import DEFAULT_RANK_TOL, FrameSnapshot, analyze

MIN_TRIALS = 100
MIN_SELFTEST = 10_000
CHUNK = 256
NOISE_CONVENTION = "complex circular Gaussian, Re and Im each N(0, 1/2)"


def thread_count() -> int:
    """Worker threads from ``FRAMEKIT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("FRAMEKIT_THREADS", "1")))
    except ValueError:
        return 1


def complex_noise(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


@dataclass
class SelfTestReport:
    samples: int
    mean: complex
    mean_stderr: float
    variance: float
    variance_stderr: float
    lag1: complex
    lag1_stderr: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.mean) < 4 * self.mean_stderr
                    and abs(self.variance - 1) <= 0.05
                    and abs(self.lag1) <= 4 * self.lag1_stderr)

    def to_dict(self) -> dict:
        return {"samples": self.samples, "mean": [self.mean.real, self.mean.imag],
                "mean_stderr": self.mean_stderr, "variance": self.variance,
                "variance_stderr": self.variance_stderr,
                "lag1": [self.lag1.real, self.lag1.imag], "lag1_stderr": self.lag1_stderr,
                "passed": self.passed, "convention": NOISE_CONVENTION}


def noise_selftest(seed: int, samples: int = 100_000) -> SelfTestReport:
    """Sample mean, variance and lag-1 correlation of the noise generator."""
    if samples < MIN_SELFTEST:
        raise DomainError(f"the self-test needs at least {MIN_SELFTEST} samples")
    n = complex_noise(np.random.default_rng(seed), samples)
    power = np.abs(n) ** 2
    lag = n[1:] * np.conj(n[:-1])
    return SelfTestReport(samples, complex(n.mean()), 1 / math.sqrt(samples),
                          float(power.mean()), float(power.std() / math.sqrt(samples)),
                          complex(lag.mean()), float(np.abs(lag).std() / math.sqrt(len(lag))))


@dataclass
class ChannelRun:
    """Simulation parameters; the frame is replaced by its Parseval frame."""

    frame: FrameSnapshot
    trials: int = 10_000
    seed: int = 0
    rank_tol: float = DEFAULT_RANK_TOL


@dataclass
class ChannelReport:
    """Per-block empirical noise energy per coefficient against ``a_n'``.

    Attributes:
        sizes: ``|I_n|``.
        analytic: ``a_n'`` from the Parseval vector norms.
        empirical: mean over trials of ``||eps_n||^2 / |I_n|``.
        stderr: standard error of ``empirical``.
        z: ``(empirical - analytic) / stderr`` (0 where both vanish).
    """

    trials: int
    seed: int
    sizes: np.ndarray
    analytic: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    selftest: SelfTestReport
    convention: str = NOISE_CONVENTION
    threads: int = 1
    z: np.ndarray = field(init=False)

    def __post_init__(self):
        diff = self.empirical - self.analytic
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, diff / self.stderr, 0.0)
        z[(self.stderr == 0) & (np.abs(diff) > 1e-12)] = np.inf
        self.z = z

    def confidence(self, k: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        return self.empirical - k * self.stderr, self.empirical + k * self.stderr

    def fraction_within(self, k: float = 4.0) -> float:
        return float(np.mean(np.abs(self.z) <= k))

    def rows(self):
        for n, row in enumerate(zip(self.analytic, self.empirical, self.stderr, self.z), 1):
            yield (n, *(float(v) for v in row))


def _chunk_stats(P_diag, L, sizes, seed_seq, count):
    """Mean and sum of squared deviations of ``||eps_n||^2/|I_n|`` over one chunk."""
    rng = np.random.default_rng(seed_seq)
    noise = complex_noise(rng, (count, len(P_diag)))
    # Y[t, i] = sum_{j < i} P_ij n_j
    Y = (L @ noise.T).T
    c = P_diag * np.abs(noise) ** 2 + 2 * np.real(np.conj(noise) * Y)
    energy = np.cumsum(c, axis=1)[:, sizes - 1] / sizes
    mean = energy.mean(axis=0)
    return count, mean, ((energy - mean) ** 2).sum(axis=0)


def simulate(run: ChannelRun) -> ChannelReport:
    """Run the channel; trials are drawn in fixed chunks from spawned seeds.

    Chunk statistics are merged in chunk order, so the output does not
    depend on the number of worker threads.

    Raises:
        DomainError: fewer than 100 trials.
    """
    if run.trials < MIN_TRIALS:
        raise DomainError(f"at least {MIN_TRIALS} trials are required")
    analysis = analyze(run.frame, run.rank_tol)
    P = analysis.gram_projection
    P = sp.csr_matrix(P) if sp.issparse(P) else np.asarray(P)
    pars = analysis.parseval_vectors()
    norms = (np.asarray(abs(pars).power(2).sum(axis=1)).ravel() if sp.issparse(pars)
             else np.sum(np.abs(pars) ** 2, axis=1))
    sizes = np.asarray(run.frame.decomp.sizes)
    analytic = np.cumsum(norms)[sizes - 1] / sizes
    P_diag = np.real(P.diagonal()) if sp.issparse(P) else np.real(np.diag(P))
    L = sp.tril(P, k=-1, format="csr") if sp.issparse(P) else np.tril(P, k=-1)

    root = np.random.SeedSequence(run.seed)
    test_seed, trial_seed = root.spawn(2)
    counts = [CHUNK] * (run.trials // CHUNK)
    if run.trials % CHUNK:
        counts.append(run.trials % CHUNK)
    seeds = trial_seed.spawn(len(counts))
    threads = thread_count()
    jobs = list(zip(seeds, counts))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            stats = list(pool.map(lambda j: _chunk_stats(P_diag, L, sizes, *j), jobs))
    else:
        stats = [_chunk_stats(P_diag, L, sizes, *j) for j in jobs]
    # pairwise merge of (count, mean, M2) in chunk order
    n_tot, mean, m2 = stats[0]
    for n_b, mean_b, m2_b in stats[1:]:
        total = n_tot + n_b
        delta = mean_b - mean
        mean = mean + delta * (n_b / total)
        m2 = m2 + m2_b + delta ** 2 * (n_tot * n_b / total)
        n_tot = total
    var = m2 / (n_tot - 1)
    stderr = np.sqrt(np.maximum(var, 0) / n_tot)
    selftest = noise_selftest(int(test_seed.generate_state(1)[0]), MIN_SELFTEST * 10)
    return ChannelReport(run.trials, run.seed, sizes, analytic, mean, stderr, selftest,
                         threads=threads)
