"""Loss, innovation, finish and delay-increment probabilities seen by the sender.

All estimates condition on the sender's knowledge in a :class:`SenderView`:
the forward-channel state at the receiver's anchor slot, the slot of its last
heard feedback, and the attempts made since.  Per-slot erasures are treated
as independent given those loss probabilities.

:class:`BeliefEstimator` caches the slot-level quantities and is what the
simulator uses; the module-level functions are thin single-query wrappers.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

from .channel import GecParams, LinkParams, k_step_flip_prob, steady_state
from .tracking import ConstraintViolation, FrameSchedule, PacketState, SenderView

# Above this many coupled packets the exact finish probability falls back to
# the per-packet product.
EXACT_FINISH_LIMIT = 16


def _prod(values) -> float:
    values = list(values)
    if not values:
        return 1.0
    if min(values) >= 1e-6:
        return math.prod(values)
    if min(values) <= 0.0:
        return 0.0
    return math.exp(math.fsum(math.log(v) for v in values))


class BeliefEstimator:
    """Per-view cache of loss and innovation probabilities.

    ``links`` maps receiver index to :class:`LinkParams`.  Cached values are
    keyed on the view's per-receiver revision counter, which changes whenever
    a frame closes unheard or a feedback arrives.
    """

    def __init__(self, view: SenderView, links: Mapping[int, LinkParams] | Sequence[LinkParams]):
        self.view = view
        self.links = links
        self._slot_cache: dict[tuple[int, int], tuple[int, float]] = {}
        self._history_cache: dict[tuple[int, int], tuple[int, float]] = {}

    def erasure(self, receiver: int, t: int) -> float:
        """Probability that a transmission to `receiver` at slot `t` is erased."""
        rev = self.view.revision[receiver]
        key = (receiver, t)
        hit = self._slot_cache.get(key)
        if hit is not None and hit[0] == rev:
            return hit[1]
        value = self._erasure(receiver, t)
        self._slot_cache[key] = (rev, value)
        return value

    def _erasure(self, receiver: int, t: int) -> float:
        params = self.links[receiver].forward
        anchor = self.view.anchor(receiver)
        if anchor is None:
            return steady_state(params)[1]
        steps = t - anchor.slot
        if steps < 0:
            raise ValueError(f"slot {t} precedes the anchor slot {anchor.slot}")
        if anchor.received:
            return k_step_flip_prob(params.to_bad, params.memory(), steps)
        return 1.0 - k_step_flip_prob(params.to_good, params.memory(), steps)

    def feedback_loss(self, receiver: int, t: int) -> float:
        params = self.links[receiver].feedback
        t_star = self.view.t_star(receiver)
        if t_star is None:
            return steady_state(params)[1]
        steps = max(t - t_star + self.view.schedule.uplink_slot[receiver], 0)
        return k_step_flip_prob(params.to_bad, params.memory(), steps)

    def _frame_terms(self, receiver: int, frame: int):
        """Per-packet erasure products of an unheard frame and its feedback-loss probability."""
        per_packet = self.view.attempted_in(receiver, frame)
        products = {
            j: _prod(self.erasure(receiver, s) for s in slots) for j, slots in per_packet.items()
        }
        q = self.feedback_loss(receiver, self.view.schedule.feedback_time(receiver, frame))
        return products, q

    @staticmethod
    def _lost_given_unheard(all_lost: float, subset_lost: float, rest_lost: float, q: float) -> float:
        numerator = all_lost + subset_lost * (1.0 - rest_lost) * q
        denominator = all_lost + (1.0 - all_lost) * q
        if denominator <= 0.0:
            # An unheard frame was impossible under the model; keep the prior.
            return subset_lost
        return numerator / denominator

    def history_factor(self, receiver: int, packet: int) -> float:
        """Probability that every attempt of `packet` in the unheard frames was lost."""
        rev = self.view.revision[receiver]
        key = (receiver, packet)
        hit = self._history_cache.get(key)
        if hit is not None and hit[0] == rev:
            return hit[1]
        factors = []
        for frame in self.view.unheard_frames(receiver, packet):
            products, q = self._frame_terms(receiver, frame)
            all_lost = _prod(products.values())
            rest_lost = _prod(v for j, v in products.items() if j != packet)
            factors.append(self._lost_given_unheard(all_lost, products[packet], rest_lost, q))
        value = _prod(factors)
        self._history_cache[key] = (rev, value)
        return value

    def current_factor(self, receiver: int, packet: int, t: int) -> float:
        frame = self.view.schedule.frame_of(t)
        slots = self.view.attempt_slots(receiver, packet, frame)
        return _prod(self.erasure(receiver, s) for s in slots)

    def innovative(self, receiver: int, packet: int, t: int) -> float:
        """Probability that `packet` is still missing at `receiver` at slot `t`."""
        return self.current_factor(receiver, packet, t) * self.history_factor(receiver, packet)

    def finish(self, receiver: int, t: int, exact: bool = True) -> float:
        """Probability that the receiver already holds every packet the sender thinks it wants."""
        wants = sorted(self.view.wants(receiver))
        if not wants:
            return 0.0
        if not all(self.view.is_uncertain(receiver, j, t) for j in wants):
            return 0.0
        if not exact:
            return _prod(1.0 - self.innovative(receiver, j, t) for j in wants)
        return _prod(self._all_received(receiver, group, t) for group in self._coupled_groups(receiver, wants))

    def _coupled_groups(self, receiver: int, packets: Sequence[int]) -> list[list[int]]:
        """Split packets into groups that share no unheard frame."""
        parent = {j: j for j in packets}

        def find(j):
            while parent[j] != j:
                parent[j] = parent[parent[j]]
                j = parent[j]
            return j

        first_in_frame: dict[int, int] = {}
        for j in packets:
            for frame in self.view.unheard_frames(receiver, j):
                other = first_in_frame.setdefault(frame, j)
                parent[find(j)] = find(other)
        groups: dict[int, list[int]] = defaultdict(list)
        for j in packets:
            groups[find(j)].append(j)
        return list(groups.values())

    def _all_received(self, receiver: int, group: list[int], t: int) -> float:
        if len(group) == 1:
            return 1.0 - self.innovative(receiver, group[0], t)
        if len(group) > EXACT_FINISH_LIMIT:
            return _prod(1.0 - self.innovative(receiver, j, t) for j in group)
        frames = sorted({k for j in group for k in self.view.unheard_frames(receiver, j)})
        terms = []
        for frame in frames:
            products, q = self._frame_terms(receiver, frame)
            other = _prod(v for j, v in products.items() if j not in group)
            terms.append((products, other, _prod(products.values()), q))
        current = {j: self.current_factor(receiver, j, t) for j in group}

        # Inclusion-exclusion over the subset of the group that is still lost.
        total = 1.0
        for size in range(1, len(group) + 1):
            sign = -1.0 if size % 2 else 1.0
            for subset in combinations(group, size):
                chosen = set(subset)
                value = _prod(current[j] for j in subset)
                for products, other, all_lost, q in terms:
                    inside = [v for j, v in products.items() if j in chosen]
                    if not inside:
                        continue
                    outside = _prod(v for j, v in products.items() if j not in chosen and j in current)
                    value *= self._lost_given_unheard(all_lost, _prod(inside), other * outside, q)
                total += sign * value
        return min(max(total, 0.0), 1.0)


# -- receiver classification and delay increments -----------------------------


@dataclass(frozen=True)
class ReceiverClassification:
    targeted_primary: bool
    fully_uncertain: bool
    target_state_unknown: bool
    wants_nonempty: bool


def _targets(clique) -> dict[int, int]:
    if clique is None:
        return {}
    return {v.receiver: v.packet for v in clique.vertices}


def classify(view: SenderView, clique, receiver: int, t: int) -> ReceiverClassification:
    wants = view.wants(receiver)
    target = _targets(clique).get(receiver)
    primary = target is not None and target in wants
    return ReceiverClassification(
        targeted_primary=primary,
        fully_uncertain=bool(wants) and all(view.is_uncertain(receiver, j, t) for j in wants),
        target_state_unknown=primary and view.is_uncertain(receiver, target, t),
        wants_nonempty=bool(wants),
    )


def _delay_increment(est: BeliefEstimator, clique, receiver: int, t: int) -> float:
    view = est.view
    cls = classify(view, clique, receiver, t)
    if not cls.wants_nonempty:
        return 0.0
    received = 1.0 - est.erasure(receiver, t)
    if not cls.targeted_primary:
        if cls.fully_uncertain:
            return received * (1.0 - est.finish(receiver, t))
        return received
    if not cls.target_state_unknown:
        return 0.0
    target = _targets(clique)[receiver]
    innovative = est.innovative(receiver, target, t)
    if not cls.fully_uncertain:
        return received * (1.0 - innovative)
    return received * max(1.0 - innovative - est.finish(receiver, t), 0.0)


def clique_objective(est: BeliefEstimator, clique, t: int) -> float:
    """Sum over primary-targeted receivers of reception times innovation probability."""
    total = 0.0
    for receiver, packet in _targets(clique).items():
        if packet in est.view.wants(receiver):
            total += (1.0 - est.erasure(receiver, t)) * est.innovative(receiver, packet, t)
    return total


# -- single-query wrappers ----------------------------------------------------


def erasure_prob(view: SenderView, params: GecParams, receiver: int, t: int) -> float:
    return BeliefEstimator(view, {receiver: LinkParams(params, params)}).erasure(receiver, t)


def feedback_loss_prob(view: SenderView, params: GecParams, receiver: int, t: int) -> float:
    return BeliefEstimator(view, {receiver: LinkParams(params, params)}).feedback_loss(receiver, t)


def innovative_prob(view: SenderView, link: LinkParams, receiver: int, packet: int, t: int) -> float:
    return BeliefEstimator(view, {receiver: link}).innovative(receiver, packet, t)


def finish_prob(view: SenderView, link: LinkParams, receiver: int, t: int, exact: bool = True) -> float:
    """Probability the receiver finished although the sender still lists wanted packets.

    ``exact=False`` gives the per-packet product, which equals the exact
    posterior whenever no unheard frame carried two of the wanted packets.
    """
    return BeliefEstimator(view, {receiver: link}).finish(receiver, t, exact=exact)


def delay_increment_prob(view: SenderView, link: LinkParams, clique, receiver: int, t: int) -> float:
    return _delay_increment(BeliefEstimator(view, {receiver: link}), clique, receiver, t)


def expected_sum_delay(view: SenderView, links, clique, t: int, estimator: BeliefEstimator | None = None) -> float:
    est = estimator or BeliefEstimator(view, links)
    return sum(_delay_increment(est, clique, i, t) for i in range(view.receivers))


# -- closed forms of the simpler channel/feedback models ----------------------


class SpecialCase(enum.Enum):
    PEC_LOSSY_PROMPT = "pec-lossy-prompt"  # persistent channels, lossy feedback after every packet
    PEC_PERFECT_INTERMITTENT = "pec-perfect-intermittent"
    PEC_PERFECT_PROMPT = "pec-perfect-prompt"
    MEC_LOSSY_INTERMITTENT = "mec-lossy-intermittent"
    MEC_LOSSY_PROMPT = "mec-lossy-prompt"
    MEC_PERFECT_INTERMITTENT = "mec-perfect-intermittent"
    MEC_PERFECT_PROMPT = "mec-perfect-prompt"


_PROMPT = {SpecialCase.PEC_LOSSY_PROMPT, SpecialCase.PEC_PERFECT_PROMPT,
           SpecialCase.MEC_LOSSY_PROMPT, SpecialCase.MEC_PERFECT_PROMPT}
_PERFECT = {SpecialCase.PEC_PERFECT_INTERMITTENT, SpecialCase.PEC_PERFECT_PROMPT,
            SpecialCase.MEC_PERFECT_INTERMITTENT, SpecialCase.MEC_PERFECT_PROMPT}
_MEMORYLESS = {SpecialCase.MEC_LOSSY_INTERMITTENT, SpecialCase.MEC_LOSSY_PROMPT,
               SpecialCase.MEC_PERFECT_INTERMITTENT, SpecialCase.MEC_PERFECT_PROMPT}


def check_case_structure(kind: SpecialCase, schedule: FrameSchedule, link: LinkParams, tol: float = 1e-12) -> None:
    """Raise :class:`ConstraintViolation` unless the setup matches the special case."""
    if kind in _PROMPT and (schedule.t_down, schedule.t_up) != (1, 1):
        raise ConstraintViolation(f"{kind.value} needs one downlink and one uplink slot per frame")
    if kind in _PERFECT and link.feedback.to_bad != 0.0:
        raise ConstraintViolation(f"{kind.value} needs a lossless feedback channel")
    if kind in _MEMORYLESS:
        if abs(link.forward.memory()) > tol or (kind not in _PERFECT and abs(link.feedback.memory()) > tol):
            raise ConstraintViolation(f"{kind.value} needs memoryless channels")


def _probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ConstraintViolation(f"{name}={value!r} is not a probability")
    return value


def special_case_innovative(kind: SpecialCase, **params) -> float:
    """Innovation probability under one of the seven reduced models.

    Keyword arguments by case:

    * ``PEC_LOSSY_PROMPT``: ``unheard`` - sequence of (erasure at the attempt,
      feedback loss at the following uplink slot), one per unheard frame.
    * ``PEC_PERFECT_INTERMITTENT``: ``current`` - erasure probabilities of the
      attempts made in the current frame.
    * ``MEC_LOSSY_INTERMITTENT``: ``p``, ``q``, ``current_attempts`` and
      ``unheard`` - sequence of (slots targeted in the frame, attempts of the
      packet in the frame).
    * ``MEC_LOSSY_PROMPT``: ``p``, ``q``, ``unheard_frames``.
    * ``MEC_PERFECT_INTERMITTENT``: ``p``, ``current_attempts``.
    * prompt perfect-feedback cases take nothing and return 1.
    """
    if kind in (SpecialCase.PEC_PERFECT_PROMPT, SpecialCase.MEC_PERFECT_PROMPT):
        return 1.0
    if kind is SpecialCase.PEC_LOSSY_PROMPT:
        value = 1.0
        for p, q in params["unheard"]:
            _probability("p", p), _probability("q", q)
            den = p + (1.0 - p) * q
            value *= p / den if den > 0 else p
        return value
    if kind is SpecialCase.PEC_PERFECT_INTERMITTENT:
        return _prod(_probability("p", p) for p in params["current"])

    p = _probability("p", params["p"])
    if kind is SpecialCase.MEC_PERFECT_INTERMITTENT:
        return p ** int(params["current_attempts"])
    q = _probability("q", params["q"])
    if kind is SpecialCase.MEC_LOSSY_PROMPT:
        den = p + (1.0 - p) * q
        return (p / den if den > 0 else p) ** int(params["unheard_frames"])
    if kind is SpecialCase.MEC_LOSSY_INTERMITTENT:
        value = p ** int(params["current_attempts"])
        for targeted, attempts in params["unheard"]:
            if not 1 <= attempts <= targeted:
                raise ConstraintViolation("attempts of the packet must be between 1 and the targeted slots")
            num = p**targeted + p**attempts * (1.0 - p ** (targeted - attempts)) * q
            den = p**targeted + (1.0 - p**targeted) * q
            value *= num / den if den > 0 else p**attempts
        return value
    raise ValueError(f"unknown special case {kind!r}")


def prompt_perfect_weight(erasure: float) -> float:
    """Vertex weight when every packet's state is known: the reception probability."""
    return 1.0 - erasure
