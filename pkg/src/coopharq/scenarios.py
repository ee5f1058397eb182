"""Scenario presets and the SNR sweep driver."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
import yaml

from . import adaptation
from .channel import Cdi
from .metrics import DEFAULT_FRAMES, estimate
from .protocol import ProtocolConfig, ProtocolKind


@dataclass(frozen=True)
class Scenario:
    name: str
    n_sources: int
    n_relays: int
    source_offsets_db: tuple = ()
    relay_offset_db: float = 0.0
    source_pairs_db: dict = field(default_factory=dict)
    protocols: dict = field(default_factory=dict)

    def offsets_db(self) -> np.ndarray:
        """Symmetric matrix of link offsets (dB) over sources, relays and destination."""
        m, n = self.n_sources, self.n_sources + self.n_relays + 1
        off = np.full((n, n), float(self.relay_offset_db))
        src = self.source_offsets_db or (0.0,) * m
        for s in range(m):
            off[s, :] = off[:, s] = src[s]
        for s in range(m):
            for t in range(s + 1, m):
                val = self.source_pairs_db.get((s, t), 0.0)
                off[s, t] = off[t, s] = val
        np.fill_diagonal(off, np.nan)
        return off

    def gamma_db(self, gamma_db: float) -> np.ndarray:
        return gamma_db + self.offsets_db()

    def cdi(self, gamma_db: float) -> Cdi:
        return Cdi.from_db(self.n_sources, self.n_relays, self.gamma_db(gamma_db))

    def config(self, protocol, alpha=None, max_rounds=None) -> ProtocolConfig:
        kind = ProtocolKind.parse(protocol)
        params = self.protocols.get(kind, {"alpha": 0.5, "max_rounds": 4})
        return ProtocolConfig(kind,
                              params["alpha"] if alpha is None else alpha,
                              params["max_rounds"] if max_rounds is None else max_rounds)


def _parse_scenario(name, raw):
    try:
        m = int(raw["n_sources"])
        l = int(raw["n_relays"])
    except KeyError as exc:
        raise ValueError(f"preset {name!r} lacks {exc.args[0]}") from None
    offsets = tuple(float(x) for x in raw.get("source_offsets_db", ()))
    if offsets and len(offsets) != m:
        raise ValueError(f"preset {name!r}: need {m} source offsets")
    pairs = {}
    for key, val in (raw.get("source_pairs_db") or {}).items():
        i, j = sorted(int(x) - 1 for x in str(key).split("-"))
        if not 0 <= i < j < m:
            raise ValueError(f"preset {name!r}: bad source pair {key!r}")
        pairs[(i, j)] = float(val)
    protocols = {}
    for key, val in (raw.get("protocols") or {}).items():
        protocols[ProtocolKind.parse(key)] = {"alpha": float(val["alpha"]),
                                              "max_rounds": int(val["max_rounds"])}
    return Scenario(name, m, l, offsets, float(raw.get("relay_offset_db", 0.0)), pairs, protocols)


@lru_cache(maxsize=None)
def load_presets() -> dict:
    text = resources.files("coopharq").joinpath("presets.yaml").read_text()
    raw = yaml.safe_load(text)
    return {name: _parse_scenario(name, body) for name, body in raw.items() if name != "defaults"}


def get_scenario(name: str) -> Scenario:
    presets = load_presets()
    if name not in presets:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(sorted(presets))}")
    return presets[name]


def gamma_grid(start: float, stop: float, step: float) -> list:
    """Inclusive grid ``start, start+step, ..., stop``."""
    if step <= 0:
        raise ValueError("gamma step must be positive")
    if stop < start:
        raise ValueError("gamma stop must not be below start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 9) for i in range(n)]


def point_streams(gamma_db: float) -> tuple[int, int]:
    """Random stream ids (adaptation, final estimate) for one sweep point.

    The ids derive from the SNR value itself, so a point gets the same
    fading samples whatever grid it belongs to and whichever protocol is
    evaluated on it.
    """
    milli = int(round(gamma_db * 1000))
    key = 2 * milli if milli >= 0 else -2 * milli - 1
    return 2 * key, 2 * key + 1


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    gamma_db: float
    protocol: str
    alpha: float
    max_rounds: int
    adaptation: str
    frames: int
    eta: float
    eta_se: float
    expected_t_used: float
    expected_t_used_se: float
    rates: tuple
    outage: tuple


def run_point(scenario: Scenario, protocol, gamma_db: float, n_frames: int = DEFAULT_FRAMES,
              seed: int = 0, mode: str = "exhaustive",
              adapt_frames: int = adaptation.ADAPT_FRAMES, alpha=None, max_rounds=None,
              mcs=adaptation.MCS_FAMILY, backend=None, workers: int = 1) -> SweepRow:
    """Adapt rates at one SNR, then score them on an independent sample."""
    cfg = scenario.config(protocol, alpha, max_rounds)
    cdi = scenario.cdi(gamma_db)
    adapt_stream, final_stream = point_streams(gamma_db)
    rates, _ = adaptation.adapt(cdi, cfg, mode, mcs, adapt_frames, seed, adapt_stream,
                                workers=workers, backend=backend)
    est = estimate(cdi, rates, cfg, n_frames, seed, final_stream, workers=workers,
                   backend=backend)
    return SweepRow(scenario.name, float(gamma_db), cfg.kind.value, cfg.alpha, cfg.max_rounds,
                    mode, n_frames, est.eta, est.eta_se, est.expected_t_used,
                    est.expected_t_used_se, tuple(rates), tuple(float(p) for p in est.per_source_outage))


def _run_point_job(kwargs):
    return run_point(**kwargs)


def run_sweep(scenario: Scenario, protocols, grid_db, n_frames: int = DEFAULT_FRAMES,
              seed: int = 0, mode: str = "exhaustive",
              adapt_frames: int = adaptation.ADAPT_FRAMES, alpha=None, max_rounds=None,
              mcs=adaptation.MCS_FAMILY, workers: int = 1, backend=None) -> list:
    """One row per (gamma, protocol), ordered by grid then protocol."""
    if isinstance(protocols, (str, ProtocolKind)):
        protocols = [protocols]
    grid = list(grid_db)
    if not grid:
        raise ValueError("empty gamma grid")
    jobs = []
    for g in grid:
        for p in protocols:
            # validate eagerly so configuration errors surface before any work
            scenario.config(p, alpha, max_rounds)
            jobs.append(dict(scenario=scenario, protocol=p, gamma_db=g, n_frames=n_frames,
                             seed=seed, mode=mode, adapt_frames=adapt_frames, alpha=alpha,
                             max_rounds=max_rounds, mcs=mcs, backend=backend))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point_job, jobs))
    return [_run_point_job(job) for job in jobs]


def csv_header(n_sources: int) -> list:
    return (["scenario", "gamma_db", "protocol", "alpha", "T", "adaptation", "frames",
             "eta", "eta_se", "e_t_used", "e_t_used_se"]
            + [f"rate_s{i + 1}" for i in range(n_sources)]
            + [f"outage_s{i + 1}" for i in range(n_sources)])


def _fmt(x):
    return format(float(x), ".6g")


def write_csv(rows, stream) -> None:
    if not rows:
        raise ValueError("no rows to write")
    m = len(rows[0].rates)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header(m))
    for r in rows:
        writer.writerow([r.scenario, _fmt(r.gamma_db), r.protocol, _fmt(r.alpha), r.max_rounds,
                         r.adaptation, r.frames, _fmt(r.eta), _fmt(r.eta_se),
                         _fmt(r.expected_t_used), _fmt(r.expected_t_used_se)]
                        + [_fmt(x) for x in r.rates] + [_fmt(x) for x in r.outage])


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()
