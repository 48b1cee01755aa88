"""Coding graph over (receiver, packet) pairs and clique selection.

A vertex exists for every packet a receiver is not known to hold.  Two
vertices of different receivers are adjacent when XORing their packets lets
both decode: either they carry the same packet, or each receiver already
holds the other's packet.  A clique is therefore a coded packet that is
instantly decodable for every receiver in it.

Vertices are stored in (receiver, packet) order, so index order is the
tie-breaking order of every selector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .channel import LinkParams, steady_state
from .probability import BeliefEstimator
from .tracking import PacketState, SenderView

EXACT_LIMIT = 20


class VertexKind(enum.Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"


class CliqueSizeError(ValueError):
    """The exact solver was asked to search a graph above its size guard."""


@dataclass(frozen=True)
class Vertex:
    receiver: int
    packet: int
    kind: VertexKind
    base_weight: float = 0.0
    conn_weight: float = 0.0
    combined_weight: float = 0.0

    @property
    def label(self) -> str:
        return f"{self.receiver}:{self.packet}"


@dataclass(frozen=True)
class IdncGraph:
    receiver: np.ndarray
    packet: np.ndarray
    primary: np.ndarray
    adjacency: np.ndarray
    w0: np.ndarray = None
    w: np.ndarray = None
    wstar: np.ndarray = None
    n_packets: int = 0
    _key: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.receiver.size
        for name in ("w0", "w", "wstar"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(n))

    def __len__(self) -> int:
        return int(self.receiver.size)

    @property
    def key(self) -> np.ndarray:
        """Sorted ``receiver * N + packet`` codes, for index lookup."""
        if self._key is None:
            object.__setattr__(self, "_key", self.receiver * self.n_packets + self.packet)
        return self._key

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def vertices(self) -> list[Vertex]:
        return [self.vertex(k) for k in range(len(self))]

    def vertex(self, k: int) -> Vertex:
        return Vertex(
            int(self.receiver[k]),
            int(self.packet[k]),
            VertexKind.PRIMARY if self.primary[k] else VertexKind.SECONDARY,
            float(self.w0[k]),
            float(self.w[k]),
            float(self.wstar[k]),
        )

    def index(self, receiver: int, packet: int) -> int:
        hits = np.flatnonzero((self.receiver == receiver) & (self.packet == packet))
        if hits.size == 0:
            raise KeyError(f"no vertex {receiver}:{packet}")
        return int(hits[0])

    def subgraph(self, keep) -> "IdncGraph":
        keep = np.asarray(keep, dtype=bool)
        return IdncGraph(
            self.receiver[keep],
            self.packet[keep],
            self.primary[keep],
            self.adjacency[np.ix_(keep, keep)],
            self.w0[keep],
            self.w[keep],
            self.wstar[keep],
            self.n_packets,
        )

    def edge_list(self) -> str:
        """One ``receiver:packet receiver:packet`` line per edge."""
        rows, cols = np.nonzero(np.triu(self.adjacency))
        lines = [
            f"{self.receiver[u]}:{self.packet[u]} {self.receiver[v]}:{self.packet[v]}"
            for u, v in zip(rows, cols)
        ]
        return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class Clique:
    vertices: tuple[Vertex, ...] = ()
    indices: tuple[int, ...] = field(default=(), compare=False)

    @classmethod
    def from_indices(cls, graph: IdncGraph, indices) -> "Clique":
        idx = tuple(sorted(int(k) for k in indices))
        return cls(tuple(graph.vertex(k) for k in idx), idx)

    @property
    def coded_packet(self) -> frozenset[int]:
        return frozenset(v.packet for v in self.vertices)

    @property
    def targets(self) -> dict[int, int]:
        return {v.receiver: v.packet for v in self.vertices}

    def primary_target(self, receiver: int) -> int | None:
        for v in self.vertices:
            if v.receiver == receiver and v.kind is VertexKind.PRIMARY:
                return v.packet
        return None

    def objective(self) -> float:
        return sum(v.base_weight for v in self.vertices if v.kind is VertexKind.PRIMARY)

    def __len__(self):
        return len(self.vertices)


def is_clique(graph: IdncGraph, indices) -> bool:
    idx = list(indices)
    if len({int(graph.receiver[k]) for k in idx}) != len(idx):
        return False
    return all(graph.adjacency[u, v] for a, u in enumerate(idx) for v in idx[a + 1:])


def build_graph(view: SenderView) -> IdncGraph:
    """Graph of every not-held entry; only acknowledged packets count as held."""
    has = view.sfm == PacketState.HAS
    receiver, packet = np.nonzero(~has)
    receiver = receiver.astype(np.int64)
    packet = packet.astype(np.int64)
    primary = view.primary[receiver, packet]
    adjacency = np.asarray(kernels.build_adjacency(receiver, packet, has), dtype=bool)
    return IdncGraph(receiver, packet, primary, adjacency, n_packets=view.packets)


def base_weights(
    graph: IdncGraph,
    view: SenderView,
    links: Mapping[int, LinkParams] | Sequence[LinkParams],
    t: int,
    estimator: BeliefEstimator | None = None,
    blind: bool = False,
) -> IdncGraph:
    """Set w0 = (1 - erasure) * innovation probability on every vertex.

    Only w0 changes; call :func:`connectivity_weights` for w and w*.

    ``blind`` ignores the sender's history and uses the steady-state
    reception probability with innovation taken as certain.
    """
    if blind:
        good = np.array([steady_state(links[i].forward)[0] for i in range(view.receivers)])
        w0 = good[graph.receiver] if len(graph) else np.zeros(0)
    else:
        est = estimator or BeliefEstimator(view, links)
        reception = np.array([1.0 - est.erasure(i, t) for i in range(view.receivers)])
        w0 = reception[graph.receiver] if len(graph) else np.zeros(0)
        # Packets never attempted since the last heard feedback are surely missing.
        pairs = view.history_pairs()
        if pairs:
            rows, cols = np.array(pairs, dtype=np.int64).T
            open_ = view.sfm[rows, cols] != PacketState.HAS
            for i, j, k in zip(rows[open_], cols[open_], np.searchsorted(graph.key, rows[open_] * view.packets + cols[open_])):
                w0[k] *= est.innovative(int(i), int(j), t)
    return replace(graph, w0=w0)


def connectivity_weights(graph: IdncGraph) -> IdncGraph:
    """Set w and w* = (w + 1) * w0 over the whole graph; w = 0 on an edgeless graph."""
    cand = np.arange(len(graph))
    w = np.asarray(kernels.connectivity(graph.adjacency, graph.w0, cand), dtype=np.float64)
    return replace(graph, w=w, wstar=(w + 1.0) * graph.w0)


def _secondary_candidates(graph: IdncGraph, chosen) -> np.ndarray:
    mask = ~graph.primary
    for v in chosen:
        mask &= graph.adjacency[v]
    return np.flatnonzero(mask)


def greedy_select(graph: IdncGraph, view: SenderView | None = None) -> Clique:
    """Primary pass on the primary subgraph, then a secondary pass on what stays adjacent."""
    if len(graph) == 0:
        return Clique()
    primary = kernels.greedy_pass(graph.adjacency, graph.w0, np.flatnonzero(graph.primary))
    secondary = kernels.greedy_pass(graph.adjacency, graph.w0, _secondary_candidates(graph, primary))
    return Clique.from_indices(graph, list(primary) + list(secondary))


def exact_max_weight_clique(graph: IdncGraph, limit: int = EXACT_LIMIT) -> Clique:
    """Maximum total-w0 clique of the primary subgraph, then the greedy secondary pass.

    Ties go to the lexicographically smallest vertex-index tuple.
    """
    prim = [int(k) for k in np.flatnonzero(graph.primary)]
    if len(prim) > limit:
        raise CliqueSizeError(f"{len(prim)} primary vertices exceed the exact-search limit of {limit}")
    w0 = graph.w0
    adj = graph.adjacency
    best_value = 0.0
    best_set: tuple[int, ...] = ()

    def extend(current: list[int], value: float, cand: list[int]):
        nonlocal best_value, best_set
        if current:
            key = tuple(current)
            if value > best_value or (value == best_value and key < best_set):
                best_value, best_set = value, key
        bound = value + sum(w0[c] for c in cand)
        if bound < best_value:
            return
        for pos, v in enumerate(cand):
            rest = [u for u in cand[pos + 1:] if adj[v, u]]
            current.append(v)
            extend(current, value + w0[v], rest)
            current.pop()

    extend([], 0.0, prim)
    secondary = kernels.greedy_pass(adj, w0, _secondary_candidates(graph, best_set))
    return Clique.from_indices(graph, list(best_set) + list(secondary))


def _uncertain_mask(graph: IdncGraph, view: SenderView, t: int | None) -> np.ndarray:
    mask = view.sfm[graph.receiver, graph.packet] == PacketState.UNCERTAIN
    if t is not None:
        for k in range(len(graph)):
            if not mask[k] and graph.primary[k]:
                mask[k] = view.is_uncertain(int(graph.receiver[k]), int(graph.packet[k]), t)
    return mask


def fve_filter(graph: IdncGraph, view: SenderView, t: int | None = None) -> IdncGraph:
    """Drop every vertex whose reception status is unknown.

    Without ``t`` only ``x`` entries count as unknown; with it, primary
    packets already attempted in the frame containing ``t`` do too.
    """
    return graph.subgraph(~_uncertain_mask(graph, view, t))


def sve_filter(
    graph: IdncGraph,
    view: SenderView,
    links,
    rng: np.random.Generator,
    t: int | None = None,
    memo: dict | None = None,
) -> IdncGraph:
    """Keep each unknown-status vertex with its receiver's steady-state Bad probability.

    With ``memo`` the keep/drop draw is made once per attempt of a packet and
    reused until the packet is attempted again.
    """
    uncertain = _uncertain_mask(graph, view, t)
    keep = ~uncertain
    for k in np.flatnonzero(uncertain):
        i, j = int(graph.receiver[k]), int(graph.packet[k])
        bad = steady_state(links[i].forward)[1]
        if memo is None:
            keep[k] = rng.random() < bad
            continue
        key = (i, j, view.last_heard(i), view.window_counts(i).get(j, 0))
        if key not in memo:
            memo[key] = rng.random() < bad
        keep[k] = memo[key]
    return graph.subgraph(keep)
