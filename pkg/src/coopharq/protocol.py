"""Frame-level simulation of the cooperative HARQ protocols.

A frame has a first phase, where every source transmits once and every
other node tries to decode it, and up to ``T`` retransmission rounds. In each
round the destination schedules the eligible node with the strongest link
to it; the node then sends redundancy for its whole decoding set (IR-MU) or
for one randomly picked source the destination still misses (IR-SU, CC).
Every node that is not transmitting listens and updates its decoding set.

This module is the reference implementation and also the pure-Python
backend of :mod:`coopharq.kernel`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import outage
from .channel import ChannelRealization, Cdi, draw_frames
from .outage import HelpRecord, members


class ProtocolKind(enum.Enum):
    IR_MU = "ir-mu"
    IR_SU = "ir-su"
    CC = "cc"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @property
    def single_user(self) -> bool:
        return self is not ProtocolKind.IR_MU

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown protocol {value!r}; expected one of "
                         + ", ".join(k.value for k in cls))


_KIND_CODES = {ProtocolKind.IR_MU: 0, ProtocolKind.IR_SU: 1, ProtocolKind.CC: 2}


@dataclass(frozen=True)
class ProtocolConfig:
    kind: ProtocolKind
    alpha: float
    max_rounds: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind.parse(self.kind))
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_rounds < 1:
            raise ValueError("need at least one retransmission round")
        if self.kind is ProtocolKind.CC and self.alpha != 1:
            raise ValueError("chase combining repeats the original codeword; alpha must be 1")


@dataclass
class ProtocolState:
    n_sources: int
    n_relays: int
    decoding_sets: list
    history: list = field(default_factory=list)
    round: int = 0

    @property
    def destination(self):
        return self.n_sources + self.n_relays

    @property
    def full(self):
        return (1 << self.n_sources) - 1

    @property
    def destination_set(self):
        return self.decoding_sets[self.destination]

    @property
    def missing(self):
        """Sources the destination has not decoded yet."""
        return self.full & ~self.decoding_sets[self.destination]

    def copy(self):
        return replace(self, decoding_sets=list(self.decoding_sets), history=list(self.history))


@dataclass(frozen=True)
class FrameResult:
    t_used: int
    outage_flags: tuple
    final_destination_set: int


class _Links:
    """Per-frame lookup tables: ``mi[b][a]`` and ``g[b][a]`` for link a -> b."""

    __slots__ = ("g", "mi")

    def __init__(self, gains):
        gains = np.asarray(gains, dtype=float)
        n_tx, n_nodes = gains.shape
        self.g = [[float(gains[a, b]) for a in range(n_tx)] for b in range(n_nodes)]
        self.mi = [[math.log2(1.0 + x) for x in col] for col in self.g]


def _links(realization):
    if isinstance(realization, _Links):
        return realization
    if isinstance(realization, ChannelRealization):
        return _Links(realization.gains)
    return _Links(realization)


def run_first_phase(rates, realization, n_sources: int, n_relays: int) -> ProtocolState:
    links = _links(realization)
    n_nodes = n_sources + n_relays + 1
    sets = [0] * n_nodes
    for s in range(n_sources):
        sets[s] |= 1 << s
    for b in range(n_nodes):
        mi_b = links.mi[b]
        for s in range(n_sources):
            if s != b and rates[s] <= mi_b[s]:
                sets[b] |= 1 << s
    return ProtocolState(n_sources, n_relays, sets)


def eligible_candidates(state: ProtocolState) -> list[int]:
    missing = state.missing
    if not missing:
        raise ValueError("destination already holds every source; the frame is over")
    return [a for a in range(state.destination) if state.decoding_sets[a] & missing]


def select_node(state: ProtocolState, realization) -> int:
    """Eligible node with the largest mutual information towards the destination.

    Ties go to the lowest index, i.e. sources before relays.
    """
    links = _links(realization)
    missing = state.missing
    mi_d = links.mi[state.destination]
    best = -1
    best_mi = 0.0
    for a in range(state.destination):
        if state.decoding_sets[a] & missing and (best < 0 or mi_d[a] > best_mi):
            best = a
            best_mi = mi_d[a]
    if best < 0:
        raise ValueError("no eligible node")
    return best


def choose_helped_source(selected: int, state: ProtocolState, u: float) -> int:
    """Map a uniform ``u`` in [0, 1) onto the sources ``selected`` can help."""
    options = members(state.decoding_sets[selected] & state.missing)
    if not options:
        raise ValueError("selected node holds no source the destination misses")
    return options[min(int(u * len(options)), len(options) - 1)]


def _update_sets(state, links, rates, cfg, helpers, transmitter):
    kind = cfg.kind.code
    new_sets = list(state.decoding_sets)
    full = state.full
    for b in range(len(new_sets)):
        if b == transmitter:
            continue
        missing_b = full & ~state.decoding_sets[b]
        if not missing_b:
            continue
        mi_b = links.mi[b]
        for s in members(missing_b):
            if kind == 0:
                out = outage.mu_individual(s, missing_b, b, rates, mi_b, cfg.alpha, helpers)
            elif kind == 1:
                out = outage.su_individual(s, b, rates, mi_b, cfg.alpha, helpers)
            else:
                out = outage.cc_individual(s, b, rates, links.g[b], helpers)
            if not out:
                new_sets[b] |= 1 << s
    return new_sets


def run_round(state: ProtocolState, realization, rates, cfg: ProtocolConfig, u: float = 0.0,
              forced=None) -> ProtocolState:
    """Execute one retransmission round and return the new state.

    ``forced`` pins the schedule as a ``(node, helped_source)`` pair, which
    bypasses the destination's choice; it is meant for comparing protocols
    on an identical activation sequence.
    """
    if state.round >= cfg.max_rounds:
        raise ValueError("no retransmission rounds left")
    if not state.missing and forced is None:
        raise ValueError("destination already holds every source")
    links = _links(realization)
    if forced is None:
        node = select_node(state, links)
        helped = choose_helped_source(node, state, u) if cfg.kind.single_user else None
    else:
        node, helped = forced
        if cfg.kind.single_user and helped is None:
            raise ValueError("single-user protocols need a helped source")
        if helped is not None and not (state.decoding_sets[node] >> helped) & 1:
            raise ValueError("forced helper does not hold the helped source")
    record = HelpRecord(node, state.decoding_sets[node], helped if cfg.kind.single_user else None)
    new = state.copy()
    new.history.append(record)
    helpers = [(r.node, r.decoding_set, r.helped_source) for r in new.history]
    new.decoding_sets = _update_sets(new, links, rates, cfg, helpers, node)
    new.round += 1
    return new


def simulate_realization(realization, uniforms, rates, cfg: ProtocolConfig,
                         n_sources: int, n_relays: int, trace=None) -> FrameResult:
    links = _links(realization)
    state = run_first_phase(rates, links, n_sources, n_relays)
    if trace is not None:
        trace.append(state)
    while state.missing and state.round < cfg.max_rounds:
        state = run_round(state, links, rates, cfg, float(uniforms[state.round]))
        if trace is not None:
            trace.append(state)
    dest = state.destination_set
    flags = tuple(not (dest >> s) & 1 for s in range(n_sources))
    return FrameResult(state.round, flags, dest)


def simulate_frame(cdi: Cdi, rates, cfg: ProtocolConfig, seed: int, frame_index: int,
                   stream: int = 0, trace=None) -> FrameResult:
    gains, uniforms = draw_frames(cdi, seed, frame_index, frame_index + 1,
                                  cfg.max_rounds, stream)
    return simulate_realization(gains[0], uniforms[0], rates, cfg,
                                cdi.n_sources, cdi.n_relays, trace)


def simulate_batch(gains, uniforms, rates, kind_code, alpha, max_rounds, n_sources, n_relays):
    """Run many frames; returns ``(t_used, destination_set)`` arrays.

    Same contract as the compiled kernel.
    """
    cfg = ProtocolConfig(_KIND_BY_CODE[int(kind_code)], alpha, max_rounds)
    rates = [float(r) for r in rates]
    n = gains.shape[0]
    t_used = np.zeros(n, dtype=np.int32)
    dest = np.zeros(n, dtype=np.int32)
    for f in range(n):
        res = simulate_realization(gains[f], uniforms[f], rates, cfg, n_sources, n_relays)
        t_used[f] = res.t_used
        dest[f] = res.final_destination_set
    return t_used, dest


_KIND_BY_CODE = {v: k for k, v in _KIND_CODES.items()}
