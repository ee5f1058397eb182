"""Individual and common outage events for the three HARQ flavours.

Source sets are plain ``int`` bit masks: bit ``i`` set means source ``i``
(0-based, i.e. ``s_{i+1}``) is a member. Every evaluator takes the view of
one receiving node; the destination is just the usual receiver, relays and
listening sources use the same expressions with their own decoding set and
with the links that point at them.

Outage always needs a strict ``rate > mutual information``; equality decodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization

SourceSet = int


def mask_of(sources) -> SourceSet:
    mask = 0
    for s in sources:
        mask |= 1 << s
    return mask


def members(mask: SourceSet) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def full_set(n_sources: int) -> SourceSet:
    return (1 << n_sources) - 1


def submasks(mask: SourceSet):
    """Yield every subset of ``mask`` (including ``mask`` and 0), largest first."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def format_set(mask: SourceSet) -> str:
    return "{" + ",".join(f"s{i + 1}" for i in members(mask)) + "}"


@dataclass(frozen=True)
class HelpRecord:
    """One second-phase transmission.

    ``decoding_set`` is the transmitter's decoding set when it was picked;
    ``helped_source`` is only used by the single-user protocols.
    """

    node: int
    decoding_set: SourceSet
    helped_source: Optional[int] = None

    def __post_init__(self):
        if self.helped_source is not None and not (self.decoding_set >> self.helped_source) & 1:
            raise ValueError("helped source must belong to the helper's decoding set")


@dataclass(frozen=True)
class TransmissionHistory:
    """Rounds already executed plus the receiver's current decoding set."""

    records: tuple = ()
    decoded: SourceSet = 0

    def append(self, record: HelpRecord, decoded: SourceSet | None = None):
        return TransmissionHistory(self.records + (record,),
                                   self.decoded if decoded is None else decoded)


@dataclass(frozen=True)
class OutageContext:
    rates: Sequence[float]
    realization: ChannelRealization
    alpha: float
    receiver: int
    n_sources: int = field(default=0)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not self.n_sources:
            object.__setattr__(self, "n_sources", len(self.rates))

    @property
    def undecoded_universe(self):
        return full_set(self.n_sources)


# Fast evaluators shared with the frame simulator. ``mi_rx[a]`` is the mutual
# information of link a -> rx, ``helpers`` is a sequence of
# (node, decoding_set, helped_source) triples in round order and already
# includes the candidate transmission.

def _sum_rates_and_mi(u, rates, mi_rx):
    lhs = 0.0
    rhs = 0.0
    i = 0
    while u:
        if u & 1:
            lhs += rates[i]
            rhs += mi_rx[i]
        u >>= 1
        i += 1
    return lhs, rhs


def mu_individual(s, undecoded, rx, rates, mi_rx, alpha, helpers) -> bool:
    bit = 1 << s
    rest = undecoded & ~bit
    # only helpers heard by rx that hold s can ever count
    useful = [(hset, alpha * mi_rx[h]) for h, hset, _ in helpers
              if h != rx and hset & bit]
    for interference in submasks(rest):
        boost = 0.0
        for hset, w in useful:
            if not hset & interference:
                boost += w
        others = rest & ~interference
        violated = False
        for extra in submasks(others):
            lhs, rhs = _sum_rates_and_mi(extra | bit, rates, mi_rx)
            if lhs > rhs + boost:
                violated = True
                break
        if not violated:
            return False
    return True


def mu_common(group, undecoded, rx, rates, mi_rx, alpha, helpers) -> bool:
    interference = undecoded & ~group
    heard = [(hset, alpha * mi_rx[h]) for h, hset, _ in helpers
             if h != rx and not hset & interference]
    for u in submasks(group):
        if u == 0:
            continue
        boost = 0.0
        for hset, w in heard:
            if hset & u:
                boost += w
        lhs, rhs = _sum_rates_and_mi(u, rates, mi_rx)
        if lhs > rhs + boost:
            return True
    return False


def su_individual(s, rx, rates, mi_rx, alpha, helpers) -> bool:
    acc = mi_rx[s]
    for h, _, src in helpers:
        if h != rx and src == s:
            acc += alpha * mi_rx[h]
    return rates[s] > acc


def mrc_snr(s, rx, g_rx, helpers) -> float:
    snr = g_rx[s]
    for h, _, src in helpers:
        if h != rx and src == s:
            snr += g_rx[h]
    return snr


def cc_individual(s, rx, rates, g_rx, helpers) -> bool:
    return rates[s] > math.log2(1.0 + mrc_snr(s, rx, g_rx, helpers))


# Public, validated API.

def _helpers(candidate, history):
    recs = list(history.records)
    if candidate is not None:
        recs.append(candidate)
    return [(r.node, r.decoding_set, r.helped_source) for r in recs]


def _undecoded(history, ctx):
    return ctx.undecoded_universe & ~history.decoded


def _mi_column(ctx):
    col = np.asarray(ctx.realization.gains)[:, ctx.receiver]
    return [math.log2(1.0 + float(g)) for g in col]


def _gain_column(ctx):
    return [float(g) for g in np.asarray(ctx.realization.gains)[:, ctx.receiver]]


def _check_member(s, undecoded):
    if not (undecoded >> s) & 1:
        raise ValueError(f"source s{s + 1} is already decoded by the receiver")


def _check_group(group, undecoded):
    if group & ~undecoded:
        raise ValueError("group must be a subset of the receiver's undecoded sources")


def _check_single_user(helpers):
    if any(src is None for _, _, src in helpers):
        raise ValueError("single-user protocols need a helped source on every record")


def ir_mu_common_outage(group: SourceSet, candidate: HelpRecord | None,
                        history: TransmissionHistory, ctx: OutageContext) -> bool:
    """True if the rates of ``group`` fall outside the accumulated MAC region.

    Sources that the receiver still misses but that are not in ``group`` act
    as interference: a helper counts for a subset ``U`` of the group only if
    it decoded some member of ``U`` and none of the interferers.
    """
    undecoded = _undecoded(history, ctx)
    _check_group(group, undecoded)
    if group == 0:
        return False
    return mu_common(group, undecoded, ctx.receiver, ctx.rates, _mi_column(ctx),
                     ctx.alpha, _helpers(candidate, history))


def ir_mu_individual_outage(s: int, candidate: HelpRecord | None,
                            history: TransmissionHistory, ctx: OutageContext) -> bool:
    """True if ``s`` fails for every choice of interference set.

    For an interference set ``I`` (any subset of the undecoded sources other
    than ``s``) a helper contributes only if it decoded ``s`` and nothing in
    ``I``. Source ``s`` is decodable as soon as one ``I`` leaves every
    rate constraint containing ``s`` satisfied.
    """
    undecoded = _undecoded(history, ctx)
    _check_member(s, undecoded)
    return mu_individual(s, undecoded, ctx.receiver, ctx.rates, _mi_column(ctx),
                         ctx.alpha, _helpers(candidate, history))


def ir_su_individual_outage(s: int, candidate: HelpRecord | None,
                            history: TransmissionHistory, ctx: OutageContext) -> bool:
    helpers = _helpers(candidate, history)
    _check_single_user(helpers)
    return su_individual(s, ctx.receiver, ctx.rates, _mi_column(ctx), ctx.alpha, helpers)


def ir_su_common_outage(group: SourceSet, candidate: HelpRecord | None,
                        history: TransmissionHistory, ctx: OutageContext) -> bool:
    _check_group(group, _undecoded(history, ctx))
    return any(ir_su_individual_outage(s, candidate, history, ctx) for s in members(group))


def _check_cc(ctx):
    if ctx.alpha != 1:
        raise ValueError("chase combining requires alpha == 1")


def cc_mrc_snr(s: int, candidate: HelpRecord | None,
               history: TransmissionHistory, ctx: OutageContext) -> float:
    """Combined SNR of every copy of ``s`` the receiver has heard."""
    _check_cc(ctx)
    helpers = _helpers(candidate, history)
    _check_single_user(helpers)
    return mrc_snr(s, ctx.receiver, _gain_column(ctx), helpers)


def cc_individual_outage(s: int, candidate: HelpRecord | None,
                         history: TransmissionHistory, ctx: OutageContext) -> bool:
    return ctx.rates[s] > math.log2(1.0 + cc_mrc_snr(s, candidate, history, ctx))


def cc_common_outage(group: SourceSet, candidate: HelpRecord | None,
                     history: TransmissionHistory, ctx: OutageContext) -> bool:
    _check_group(group, _undecoded(history, ctx))
    return any(cc_individual_outage(s, candidate, history, ctx) for s in members(group))
