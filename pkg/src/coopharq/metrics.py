"""Monte-Carlo estimates of outage, retransmission count and spectral efficiency.

The long-term rate of source ``s`` is ``R_s / (M + alpha * E[T_used])`` and
the average spectral efficiency sums the long-term rates weighted by the
per-source success probability after the last round.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernel
from .channel import BLOCK_SIZE, Cdi, draw_frames
from .protocol import ProtocolConfig

DEFAULT_FRAMES = 100_000


@dataclass(frozen=True, eq=False)
class MetricsEstimate:
    rates: tuple
    per_source_outage: np.ndarray
    per_source_outage_se: np.ndarray
    expected_t_used: float
    expected_t_used_se: float
    long_term_rates: np.ndarray
    eta: float
    eta_se: float
    frames: int
    t_used_counts: np.ndarray

    @property
    def t_used_distribution(self):
        return self.t_used_counts / self.frames


def summarize(t_used, destination_sets, rates, alpha: float, max_rounds: int) -> MetricsEstimate:
    """Turn per-frame ``(t_used, destination set)`` samples into estimates.

    Standard errors come from the per-frame sample variances; the error of
    the spectral efficiency is propagated to first order through the ratio
    ``mean(X) / (M + alpha * mean(T_used))`` where ``X`` is the number of
    bits per channel use delivered in a frame.
    """
    t_used = np.asarray(t_used, dtype=np.int64)
    dest = np.asarray(destination_sets, dtype=np.int64)
    n = t_used.size
    if n < 1:
        raise ValueError("need at least one frame")
    rates_arr = np.asarray(rates, dtype=float)
    m = rates_arr.size
    success = ((dest[:, None] >> np.arange(m)) & 1).astype(float)
    outage = 1.0 - success.sum(axis=0) / n
    ddof = 1 if n > 1 else 0

    def se(x):
        return math.sqrt(np.var(x, ddof=ddof) / n) if n > 1 else 0.0

    outage_se = np.array([se(success[:, i]) for i in range(m)])
    mean_t = int(t_used.sum()) / n
    denom = m + alpha * mean_t
    long_term = rates_arr / denom
    eta = float(np.sum(long_term * (1.0 - outage)))

    delivered = success @ rates_arr
    if n > 1:
        cov = np.cov(np.vstack([delivered, t_used.astype(float)]), ddof=1)
        mean_x = delivered.sum() / n
        grad = np.array([1.0 / denom, -alpha * mean_x / denom ** 2])
        eta_se = math.sqrt(max(float(grad @ cov @ grad), 0.0) / n)
    else:
        eta_se = 0.0
    counts = np.bincount(t_used, minlength=max_rounds + 1)
    return MetricsEstimate(
        rates=tuple(float(r) for r in rates_arr),
        per_source_outage=outage,
        per_source_outage_se=outage_se,
        expected_t_used=mean_t,
        expected_t_used_se=se(t_used.astype(float)),
        long_term_rates=long_term,
        eta=eta,
        eta_se=eta_se,
        frames=n,
        t_used_counts=counts,
    )


def _check_rates(cdi, rates):
    if len(rates) != cdi.n_sources:
        raise ValueError(f"need {cdi.n_sources} rates, got {len(rates)}")
    if any(not r > 0 for r in rates):
        raise ValueError("rates must be positive")


def _simulate_chunk(args):
    cdi, rates, kind_code, alpha, max_rounds, seed, stream, start, stop, backend = args
    gains, uniforms = draw_frames(cdi, seed, start, stop, max_rounds, stream)
    run = kernel.get_backend(backend)
    return run(gains, uniforms, rates, kind_code, alpha, max_rounds,
               cdi.n_sources, cdi.n_relays)


def _chunks(n_frames, size=BLOCK_SIZE * 4):
    return [(lo, min(lo + size, n_frames)) for lo in range(0, n_frames, size)]


def simulate(cdi: Cdi, rates, cfg: ProtocolConfig, n_frames: int, seed: int,
             stream: int = 0, workers: int = 1, backend=None):
    """Per-frame ``(t_used, destination_set)`` arrays for frames ``0..n_frames-1``."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    _check_rates(cdi, rates)
    rates = tuple(float(r) for r in rates)
    jobs = [(cdi, rates, cfg.kind.code, cfg.alpha, cfg.max_rounds, seed, stream, lo, hi, backend)
            for lo, hi in _chunks(n_frames)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    else:
        parts = [_simulate_chunk(job) for job in jobs]
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def estimate(cdi: Cdi, rates, cfg: ProtocolConfig, n_frames: int = DEFAULT_FRAMES,
             seed: int = 0, stream: int = 0, workers: int = 1, backend=None) -> MetricsEstimate:
    t_used, dest = simulate(cdi, rates, cfg, n_frames, seed, stream, workers, backend)
    return summarize(t_used, dest, rates, cfg.alpha, cfg.max_rounds)


def t_used_distribution(cdi: Cdi, rates, cfg: ProtocolConfig, n_frames: int = DEFAULT_FRAMES,
                        seed: int = 0, stream: int = 0, workers: int = 1, backend=None):
    """Empirical probabilities of ``T_used = 0..T`` on the same sample as :func:`estimate`."""
    return estimate(cdi, rates, cfg, n_frames, seed, stream, workers, backend).t_used_distribution


class FrameSampler:
    """Fixed channel sample reused across rate tuples (common random numbers).

    Every call to :meth:`estimate` sees exactly the same fading realizations
    and round uniforms, so differences between rate tuples are not blurred
    by sampling noise and the best tuple is a deterministic function of the
    seed.
    """

    def __init__(self, cdi: Cdi, cfg: ProtocolConfig, n_frames: int, seed: int,
                 stream: int = 0, backend=None):
        if n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        self.cdi = cdi
        self.cfg = cfg
        self.n_frames = n_frames
        self.gains, self.uniforms = draw_frames(cdi, seed, 0, n_frames, cfg.max_rounds, stream)
        self._run = kernel.get_backend(backend)

    def estimate(self, rates) -> MetricsEstimate:
        _check_rates(self.cdi, rates)
        cfg = self.cfg
        t_used, dest = self._run(self.gains, self.uniforms, np.asarray(rates, dtype=float),
                                 cfg.kind.code, cfg.alpha, cfg.max_rounds,
                                 self.cdi.n_sources, self.cdi.n_relays)
        return summarize(t_used, dest, rates, cfg.alpha, cfg.max_rounds)
