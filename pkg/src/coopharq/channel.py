"""Network topology, channel distribution information and block fading.

Nodes are addressed by flat integer indices in a fixed order: sources
``0..M-1``, relays ``M..M+L-1`` and the destination ``M+L``. Only the
sources and relays ever transmit, so a per-frame gain array has shape
``(M+L, M+L+1)`` with ``gains[a, b]`` the squared magnitude of the fading
coefficient on the directed link ``a -> b``.

Random numbers come from counter-style sub-streams: frame ``f`` of stream
``k`` lives in block ``f // BLOCK_SIZE`` and each block owns an independent
Philox generator keyed by ``SeedSequence(seed, spawn_key=(k, block))``.
Blocks are always drawn whole, so the values seen by a frame depend only on
``(cdi, seed, stream, f)`` and never on how many frames are requested or on
which worker evaluates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

BLOCK_SIZE = 4096


@dataclass(frozen=True, order=True)
class NodeId:
    """Human-facing node address (``s1``, ``r2``, ``d``)."""

    kind: str
    index: int = 0

    def __post_init__(self):
        if self.kind not in ("source", "relay", "destination"):
            raise ValueError(f"unknown node kind {self.kind!r}")
        if self.kind == "destination":
            if self.index != 0:
                raise ValueError("the destination carries no index")
        elif self.index < 1:
            raise ValueError(f"{self.kind} index must be >= 1")

    def __str__(self):
        return {"source": "s", "relay": "r", "destination": "d"}[self.kind] + (
            str(self.index) if self.index else "")


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(value, dtype=float))


class Cdi:
    """Average link SNRs (linear scale) for an (M, L, 1) network.

    Parameters
    ----------
    n_sources, n_relays : int
        Network size. At least one source is required; relays are optional.
    gamma : array_like, shape (M+L+1, M+L+1)
        Symmetric matrix of average SNRs in linear scale. The diagonal is
        ignored and stored as zero.
    """

    def __init__(self, n_sources: int, n_relays: int, gamma):
        if n_sources < 1:
            raise ValueError("at least one source is required")
        if n_relays < 0:
            raise ValueError("relay count must be non-negative")
        n = n_sources + n_relays + 1
        gamma = np.array(gamma, dtype=float)
        if gamma.shape != (n, n):
            raise ValueError(f"gamma must have shape {(n, n)}, got {gamma.shape}")
        np.fill_diagonal(gamma, 0.0)
        if not np.all(np.isfinite(gamma)):
            raise ValueError("average SNRs must be finite")
        if np.any(gamma < 0):
            raise ValueError("average SNRs must be non-negative")
        if not np.array_equal(gamma, gamma.T):
            raise ValueError("average SNR matrix must be symmetric")
        gamma.setflags(write=False)
        self.n_sources = n_sources
        self.n_relays = n_relays
        self.gamma = gamma

    @classmethod
    def from_db(cls, n_sources, n_relays, gamma_db):
        """Build from a dB matrix; ``nan`` or ``-inf`` entries mean no link."""
        lin = db_to_linear(gamma_db)
        lin[np.isnan(lin)] = 0.0
        return cls(n_sources, n_relays, lin)

    @classmethod
    def uniform(cls, n_sources, n_relays, gamma):
        n = n_sources + n_relays + 1
        return cls(n_sources, n_relays, np.full((n, n), float(gamma)))

    @property
    def n_nodes(self):
        return self.n_sources + self.n_relays + 1

    @property
    def n_transmitters(self):
        return self.n_sources + self.n_relays

    @property
    def destination(self):
        return self.n_sources + self.n_relays

    def snr(self, a, b):
        return float(self.gamma[a, b])

    def node_id(self, index: int) -> NodeId:
        if index < 0 or index >= self.n_nodes:
            raise IndexError(index)
        if index < self.n_sources:
            return NodeId("source", index + 1)
        if index < self.destination:
            return NodeId("relay", index - self.n_sources + 1)
        return NodeId("destination")

    def index_of(self, node: NodeId) -> int:
        if node.kind == "source":
            if node.index > self.n_sources:
                raise ValueError(f"no such source: {node}")
            return node.index - 1
        if node.kind == "relay":
            if node.index > self.n_relays:
                raise ValueError(f"no such relay: {node}")
            return self.n_sources + node.index - 1
        return self.destination

    def label(self, index: int) -> str:
        return str(self.node_id(index))

    def transmit_gamma(self):
        """Mean of ``gains[a, b]`` for every transmitter ``a`` and node ``b``."""
        return self.gamma[: self.n_transmitters, :]

    def __eq__(self, other):
        return (isinstance(other, Cdi)
                and self.n_sources == other.n_sources
                and self.n_relays == other.n_relays
                and np.array_equal(self.gamma, other.gamma))

    def __repr__(self):
        return f"Cdi(M={self.n_sources}, L={self.n_relays})"


@dataclass(frozen=True)
class ChannelRealization:
    """Per-frame squared fading magnitudes, ``gains[a, b]`` for link a -> b."""

    gains: np.ndarray

    def gain(self, a, b):
        return float(self.gains[a, b])

    def mi(self, a, b):
        return mutual_information(float(self.gains[a, b]))


def mutual_information(g: float) -> float:
    """Gaussian-input mutual information ``log2(1 + g)`` in bits per channel use."""
    if g < 0:
        raise ValueError(f"squared channel magnitude must be >= 0, got {g}")
    return math.log2(1.0 + g)


def _block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


def draw_block(cdi: Cdi, seed: int, block: int, n_rounds: int, stream: int = 0):
    """Draw one whole block of frames.

    Returns
    -------
    gains : ndarray, shape (BLOCK_SIZE, M+L, M+L+1)
        Exponential gains with means taken from ``cdi``; the two directions
        of a pair are independent draws.
    uniforms : ndarray, shape (BLOCK_SIZE, n_rounds)
        One uniform per retransmission round, consumed by the helped-source
        choice of the single-user protocols.
    """
    rng = _block_generator(seed, stream, block)
    shape = (BLOCK_SIZE, cdi.n_transmitters, cdi.n_nodes)
    gains = rng.standard_exponential(shape) * cdi.transmit_gamma()
    uniforms = rng.random((BLOCK_SIZE, n_rounds))
    return gains, uniforms


def draw_frames(cdi: Cdi, seed: int, start: int, stop: int, n_rounds: int,
                stream: int = 0):
    """Gains and round uniforms for frames ``start..stop-1`` (see :func:`draw_block`)."""
    if not 0 <= start <= stop:
        raise ValueError("need 0 <= start <= stop")
    gains, uniforms = [], []
    for block in range(start // BLOCK_SIZE, -(-stop // BLOCK_SIZE)):
        g, u = draw_block(cdi, seed, block, n_rounds, stream)
        lo = max(start - block * BLOCK_SIZE, 0)
        hi = min(stop - block * BLOCK_SIZE, BLOCK_SIZE)
        gains.append(g[lo:hi])
        uniforms.append(u[lo:hi])
    if not gains:
        return (np.empty((0, cdi.n_transmitters, cdi.n_nodes)),
                np.empty((0, n_rounds)))
    return np.concatenate(gains), np.concatenate(uniforms)


def draw_realization(cdi: Cdi, seed: int, frame_index: int,
                     stream: int = 0) -> ChannelRealization:
    gains, _ = draw_frames(cdi, seed, frame_index, frame_index + 1, 0, stream)
    return ChannelRealization(gains[0])


def realization_from_gains(cdi: Cdi, gains: dict | Iterable) -> ChannelRealization:
    """Build a realization from ``{(a, b): g}`` with unspecified links at zero.

    Mostly useful for hand-built test cases.
    """
    arr = np.zeros((cdi.n_transmitters, cdi.n_nodes))
    items = gains.items() if isinstance(gains, dict) else gains
    for (a, b), g in items:
        if g < 0:
            raise ValueError("gains must be non-negative")
        arr[a, b] = g
    return ChannelRealization(arr)
