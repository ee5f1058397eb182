"""Slow link adaptation: pick one MCS rate per source from the CDI alone.

Both searches score rate tuples on one shared channel sample
(:class:`~coopharq.metrics.FrameSampler`), so the winner only depends on the
seed and ties resolve the same way on every run.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor

from .channel import Cdi
from .metrics import FrameSampler, MetricsEstimate
from .protocol import ProtocolConfig

log = logging.getLogger(__name__)

MCS_FAMILY = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
ADAPT_FRAMES = 10_000
TUPLE_BUDGET = 20_000
WARN_TUPLES = 5_000


class SearchBudgetExceeded(ValueError):
    pass


def check_mcs(mcs):
    mcs = tuple(float(r) for r in mcs)
    if not mcs:
        raise ValueError("MCS family is empty")
    if any(r <= 0 for r in mcs):
        raise ValueError("MCS rates must be positive")
    if any(b <= a for a, b in zip(mcs, mcs[1:])):
        raise ValueError("MCS rates must be strictly increasing")
    return mcs


_worker_sampler = None


def _init_worker(cdi, cfg, n_frames, seed, stream, backend):
    global _worker_sampler
    _worker_sampler = FrameSampler(cdi, cfg, n_frames, seed, stream, backend)


def _score(rates):
    return _worker_sampler.estimate(rates)


def exhaustive_search(cdi: Cdi, cfg: ProtocolConfig, mcs=MCS_FAMILY, n_frames: int = ADAPT_FRAMES,
                      seed: int = 0, stream: int = 0, max_tuples: int = TUPLE_BUDGET,
                      workers: int = 1, backend=None) -> tuple[tuple, MetricsEstimate]:
    """Score every rate tuple and keep the best.

    Ties go to the lexicographically smallest tuple. Raises
    :class:`SearchBudgetExceeded` when ``len(mcs) ** M`` exceeds
    ``max_tuples``; use :func:`coordinate_ascent` for those sizes.
    """
    mcs = check_mcs(mcs)
    count = len(mcs) ** cdi.n_sources
    if count > max_tuples:
        raise SearchBudgetExceeded(
            f"{count} rate tuples exceed the budget of {max_tuples}; "
            "use coordinate_ascent (adaptation: ascent) for this network size")
    if count > WARN_TUPLES:
        warnings.warn(f"exhaustive search over {count} rate tuples; this will be slow",
                      RuntimeWarning, stacklevel=2)
    tuples = list(itertools.product(mcs, repeat=cdi.n_sources))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(cdi, cfg, n_frames, seed, stream, backend)) as pool:
            scores = list(pool.map(_score, tuples, chunksize=max(1, len(tuples) // (4 * workers))))
    else:
        sampler = FrameSampler(cdi, cfg, n_frames, seed, stream, backend)
        scores = [sampler.estimate(t) for t in tuples]
    best = 0
    for i, est in enumerate(scores):
        if est.eta > scores[best].eta:
            best = i
    return tuples[best], scores[best]


def coordinate_ascent(cdi: Cdi, cfg: ProtocolConfig, mcs=MCS_FAMILY, n_frames: int = ADAPT_FRAMES,
                      seed: int = 0, stream: int = 0, backend=None,
                      max_sweeps: int = 50) -> tuple[tuple, MetricsEstimate]:
    """Cheap local search over rate tuples.

    Starts with every source at the lowest rate and sweeps the sources in
    order, moving each one to its best rate with the others held fixed. A
    move needs a strict improvement, and the search stops after a sweep
    without moves, so the result never scores below the starting tuple.
    """
    mcs = check_mcs(mcs)
    sampler = FrameSampler(cdi, cfg, n_frames, seed, stream, backend)
    cache = {}

    def score(t):
        if t not in cache:
            cache[t] = sampler.estimate(t)
        return cache[t]

    current = (mcs[0],) * cdi.n_sources
    best = score(current)
    for _ in range(max_sweeps):
        moved = False
        for s in range(cdi.n_sources):
            for r in mcs:
                trial = current[:s] + (r,) + current[s + 1:]
                est = score(trial)
                if est.eta > best.eta:
                    current, best, moved = trial, est, True
        if not moved:
            break
    else:
        log.warning("coordinate ascent stopped after %d sweeps without converging", max_sweeps)
    log.debug("coordinate ascent scored %d tuples", len(cache))
    return current, best


def adapt(cdi: Cdi, cfg: ProtocolConfig, mode: str = "exhaustive", mcs=MCS_FAMILY,
          n_frames: int = ADAPT_FRAMES, seed: int = 0, stream: int = 0,
          workers: int = 1, backend=None, auto_limit: int = 343):
    """Dispatch on ``mode``: ``exhaustive``, ``ascent`` or ``auto``.

    ``auto`` runs the exhaustive search while ``len(mcs) ** M`` stays within
    ``auto_limit`` and coordinate ascent beyond.
    """
    if mode == "auto":
        mode = "exhaustive" if len(mcs) ** cdi.n_sources <= auto_limit else "ascent"
    if mode == "exhaustive":
        return exhaustive_search(cdi, cfg, mcs, n_frames, seed, stream, workers=workers,
                                 backend=backend)
    if mode == "ascent":
        return coordinate_ascent(cdi, cfg, mcs, n_frames, seed, stream, backend=backend)
    raise ValueError(f"unknown adaptation mode {mode!r}")
