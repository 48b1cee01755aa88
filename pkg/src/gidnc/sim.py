"""Ground truth and the slot-by-slot session engine.

One session is the initial uncoded broadcast of all N packets followed by
coded recovery transmissions until the sender believes every receiver is
done.  The sender only learns through the TDD uplink; the receivers and the
channels live in :class:`GroundTruth`.

Decoding delay is counted during the recovery phase only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelBank, Coupling, GecParams, LinkParams
from .graph import (
    Clique,
    IdncGraph,
    base_weights,
    build_graph,
    exact_max_weight_clique,
    fve_filter,
    greedy_select,
    sve_filter,
)
from .probability import BeliefEstimator
from .tracking import FrameSchedule, SenderView

CAP_FACTOR = 50


class Algorithm(enum.Enum):
    AGU = "agu"
    AGU_EXACT = "agu-exact"
    FVE = "fve"
    SVE = "sve"
    OPT = "opt"


@dataclass(frozen=True)
class SessionConfig:
    receivers: int = 60
    packets: int = 30
    demand_ratio: float = 0.8
    b_min: float = 0.1
    b_max: float = 0.3
    memory: float = 0.4
    feedback_memory: float | None = None  # defaults to `memory`; independent coupling only
    coupling: Coupling = Coupling.RECIPROCAL
    t_down: int = 4
    t_up: int = 1
    algorithm: Algorithm = Algorithm.AGU
    iterations: int = 1
    seed: int = 0
    redraw_per_frame: bool = False

    def __post_init__(self):
        if self.receivers < 1 or self.packets < 1 or self.iterations < 1:
            raise ValueError("receivers, packets and iterations must be at least 1")
        if not 0.0 < self.demand_ratio <= 1.0:
            raise ValueError("demand ratio must lie in (0, 1]")
        if not 0.0 <= self.b_min <= self.b_max <= 1.0:
            raise ValueError("need 0 <= b_min <= b_max <= 1")
        if not 0.0 <= self.memory < 1.0:
            raise ValueError("memory must lie in [0, 1)")
        if self.t_down < 1 or self.t_up < 1:
            raise ValueError("t_down and t_up must be at least 1")

    @property
    def t_frame(self) -> int:
        return self.t_down + self.t_up

    @property
    def slot_cap(self) -> int:
        return CAP_FACTOR * self.packets * self.t_frame

    @property
    def demand(self) -> int:
        return max(1, int(round(self.demand_ratio * self.packets)))


@dataclass
class SessionMetrics:
    delays: np.ndarray
    slots: int
    capped: bool = False
    transmissions: int = 0

    @property
    def mean_delay(self) -> float:
        return float(self.delays.sum()) / self.delays.size


@dataclass
class GroundTruth:
    primary: np.ndarray  # M x N demand
    has: np.ndarray  # M x N actually held
    channels: ChannelBank
    links: list[LinkParams]

    @property
    def wants(self) -> np.ndarray:
        return self.primary & ~self.has

    def wants_of(self, receiver: int) -> set[int]:
        return set(np.flatnonzero(self.wants[receiver]).tolist())


@dataclass
class Streams:
    setup: np.random.Generator
    channel: np.random.Generator
    scheduler: np.random.Generator

    @classmethod
    def for_iteration(cls, seed: int, iteration: int) -> "Streams":
        children = np.random.SeedSequence([seed, iteration]).spawn(3)
        return cls(*(np.random.default_rng(c) for c in children))


def draw_links(config: SessionConfig, rng: np.random.Generator) -> list[LinkParams]:
    """Per-receiver channel parameters.

    The erasure rate of each forward channel is uniform on [b_min, b_max];
    the transition probabilities follow from that rate and the memory.
    """
    m = config.receivers
    forward = [GecParams.from_erasure_rate(e, config.memory) for e in rng.uniform(config.b_min, config.b_max, m)]
    if config.coupling is not Coupling.INDEPENDENT:
        return [LinkParams(f, f) for f in forward]
    psi = config.memory if config.feedback_memory is None else config.feedback_memory
    feedback = [GecParams.from_erasure_rate(e, psi) for e in rng.uniform(config.b_min, config.b_max, m)]
    return [LinkParams(f, q) for f, q in zip(forward, feedback)]


def draw_demand(config: SessionConfig, rng: np.random.Generator) -> np.ndarray:
    primary = np.zeros((config.receivers, config.packets), dtype=bool)
    for i in range(config.receivers):
        primary[i, rng.choice(config.packets, size=config.demand, replace=False)] = True
    return primary


class Session:
    """One run of one algorithm.  Slots are numbered from 1."""

    def __init__(self, config: SessionConfig, streams: Streams, links: list[LinkParams] | None = None,
                 primary: np.ndarray | None = None):
        self.config = config
        self.streams = streams
        primary = draw_demand(config, streams.setup) if primary is None else np.asarray(primary, dtype=bool)
        links = draw_links(config, streams.setup) if links is None else list(links)
        bank = ChannelBank([l.forward for l in links], [l.feedback for l in links], config.coupling, streams.channel)
        self.truth = GroundTruth(primary, np.zeros_like(primary), bank, links)
        self.schedule = FrameSchedule.round_robin(config.t_down, config.t_up, config.receivers)
        self.view = SenderView(primary, self.schedule)
        self.estimator = BeliefEstimator(self.view, self.truth.links)
        self.delays = np.zeros(config.receivers, dtype=np.int64)
        self.t = 1
        self.transmissions = 0
        self._heard_in_frame = np.zeros(config.receivers, dtype=bool)
        self._targeted_in_frame = np.zeros(config.receivers, dtype=bool)
        self._sve_memo: dict = {}
        self.perfect = config.algorithm is Algorithm.OPT
        self.capture = False
        self.snapshot: tuple[str, str] | None = None  # (SFM text, edge list) at the first coded slot

    # -- slot mechanics --------------------------------------------------

    def _advance(self) -> None:
        self.truth.channels.advance(self.streams.channel)
        self.t += 1
        if self.config.redraw_per_frame and (self.t - 1) % self.schedule.t_frame == 0:
            links = draw_links(self.config, self.streams.setup)
            self.truth.links[:] = links
            self.truth.channels.set_params([l.forward for l in links], [l.feedback for l in links])

    def _transmit(self, packets: frozenset[int], targets: dict[int, int], count_delay: bool) -> None:
        """Deliver the XOR of `packets` at the current slot and update truth."""
        t = self.t
        self.view.record_attempt(sorted(targets.items()), t)
        self.transmissions += 1
        received = ~self.truth.channels.bad_forward
        coded = np.array(sorted(packets), dtype=np.int64)
        has = self.truth.has
        wants = self.truth.wants.any(axis=1)
        missing = ~has[:, coded]
        n_unknown = missing.sum(axis=1)
        decodes = received & (n_unknown == 1)
        rows = np.flatnonzero(decodes)
        got = coded[np.argmax(missing[rows], axis=1)]
        if count_delay:
            useless = received & wants
            useless[rows] &= ~self.truth.primary[rows, got]
            self.delays += useless
        has[rows, got] = True
        for i in targets:
            if received[i]:
                self._heard_in_frame[i] = True
        for i in targets:
            self._targeted_in_frame[i] = True
        if self.perfect:
            for i in range(self.config.receivers):
                self.view.observe_perfect(i, np.flatnonzero(self.truth.has[i]), t, bool(received[i]))

    def _uplink(self) -> None:
        """Process the current uplink slot."""
        t = self.t
        frame = self.schedule.frame_of(t)
        offset = t - self.schedule.first_uplink_slot(frame) + 1
        if self.perfect:
            return
        heard = ~self.truth.channels.bad_feedback
        for i in range(self.config.receivers):
            if self.schedule.uplink_slot[i] != offset or not self._targeted_in_frame[i]:
                continue
            if self._heard_in_frame[i] and heard[i]:
                self.view.apply_feedback(i, np.flatnonzero(self.truth.has[i]).tolist(), t)
            else:
                self.view.close_frame_unheard(i, frame)

    def _end_of_frame(self) -> None:
        self._heard_in_frame[:] = False
        self._targeted_in_frame[:] = False

    def sender_done(self) -> bool:
        return int(self.view.wants_count().sum()) == 0

    # -- scheduling ------------------------------------------------------

    def select(self) -> Clique:
        """Pick the coded packet for the current downlink slot."""
        t = self.t
        alg = self.config.algorithm
        graph = build_graph(self.view)
        if self.capture and self.snapshot is None:
            self.snapshot = (self.view.sfm_text(), graph.edge_list())
        blind = alg in (Algorithm.FVE, Algorithm.SVE)
        weighted = base_weights(graph, self.view, self.truth.links, t, self.estimator, blind=blind)
        search = weighted
        if alg is Algorithm.FVE:
            search = fve_filter(weighted, self.view, t)
        elif alg is Algorithm.SVE:
            search = sve_filter(weighted, self.view, self.truth.links, self.streams.scheduler, t, self._sve_memo)
        if alg is Algorithm.AGU_EXACT and int(search.primary.sum()) <= 20:
            clique = exact_max_weight_clique(search)
        else:
            clique = greedy_select(search)
        if alg in (Algorithm.AGU, Algorithm.AGU_EXACT):
            clique = self._keep_anchor(search, clique)
        if not any(v.packet in self.view.wants(v.receiver) for v in clique.vertices):
            clique = self._uncoded_fallback(weighted)
        return clique

    def _keep_anchor(self, graph: IdncGraph, clique: Clique) -> Clique:
        """Keep a once-attempted wanted packet in every silent window.

        A receiver whose every wanted packet would have been attempted more
        than once since its last heard feedback is switched to another
        wanted packet that fits the clique, or dropped from it.
        """
        chosen = list(clique.indices)
        for k in list(chosen):
            i, j = int(graph.receiver[k]), int(graph.packet[k])
            wants = self.view.wants(i)
            if len(wants) <= 1 or self._anchor_survives(i, j, wants):
                continue
            others = [c for c in chosen if c != k]
            options = [
                c for c in np.flatnonzero((graph.receiver == i) & graph.primary)
                if c != k and all(graph.adjacency[c, o] for o in others)
                and self._anchor_survives(i, int(graph.packet[c]), wants)
            ]
            chosen.remove(k)
            if options:
                chosen.append(max(options, key=lambda c: (graph.w0[c], -c)))
        return Clique.from_indices(graph, chosen)

    def _anchor_survives(self, receiver: int, packet: int, wants: set[int]) -> bool:
        counts = dict(self.view.window_counts(receiver))
        counts[packet] = counts.get(packet, 0) + 1
        return any(counts.get(w, 0) == 1 for w in wants)

    def _uncoded_fallback(self, graph: IdncGraph) -> Clique:
        """Send the best single wanted packet to everyone lacking it."""
        prim = np.flatnonzero(graph.primary)
        if prim.size == 0:
            return Clique()
        best = prim[np.argmax(graph.w0[prim])]
        packet = graph.packet[best]
        return Clique.from_indices(graph, np.flatnonzero(graph.packet == packet))

    # -- phases ----------------------------------------------------------

    def _finish_frame_uplink(self) -> None:
        """Run the uplink subframe of the current frame."""
        while not self.schedule.is_downlink(self.t):
            self._uplink()
            last = (self.t % self.schedule.t_frame) == 0
            self._advance()
            if last:
                self._end_of_frame()

    def initial_phase(self) -> None:
        """Broadcast packets 0..N-1 uncoded, one per downlink slot."""
        everyone = range(self.config.receivers)
        for j in range(self.config.packets):
            while not self.schedule.is_downlink(self.t):
                self._finish_frame_uplink()
            self._transmit(frozenset([j]), {i: j for i in everyone}, count_delay=False)
            self._advance()
        if not self.schedule.is_downlink(self.t):
            self._finish_frame_uplink()

    def recovery(self) -> bool:
        """Coded transmissions until the sender sees no wants.  Returns True if capped."""
        cap = self.config.slot_cap
        while not self.sender_done():
            if self.t > cap:
                return True
            if self.schedule.is_downlink(self.t):
                clique = self.select()
                if clique.vertices:
                    self._transmit(clique.coded_packet, clique.targets, count_delay=True)
                self._advance()
            else:
                self._finish_frame_uplink()
        return False

    def run(self) -> SessionMetrics:
        self.initial_phase()
        capped = self.recovery()
        return SessionMetrics(self.delays.copy(), self.t - 1, capped, self.transmissions)


def run_session(config: SessionConfig, iteration: int = 0, streams: Streams | None = None) -> SessionMetrics:
    streams = streams or Streams.for_iteration(config.seed, iteration)
    return Session(config, streams).run()


def opt_baseline(config: SessionConfig, iteration: int = 0) -> SessionMetrics:
    return run_session(replace(config, algorithm=Algorithm.OPT), iteration)
