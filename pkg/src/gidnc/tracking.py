"""TDD frame arithmetic and the sender's belief about each receiver.

Slots are numbered from 1.  Frame ``n`` occupies slots ``(n-1)*Tf + 1`` to
``n*Tf``; the first ``t_down`` of them are downlink, the rest uplink.
Receivers and packets are 0-based indices.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class PacketState(enum.IntEnum):
    HAS = 0
    SECONDARY_LACK = -1
    WANTED = 1
    UNCERTAIN = 2  # wanted, reception status unknown ("x")


# Plain ints for the hot paths; IntEnum member lookups are slow.
_HAS, _SECONDARY_LACK, _WANTED, _UNCERTAIN = 0, -1, 1, 2

SYMBOLS = {
    PacketState.HAS: "0",
    PacketState.SECONDARY_LACK: "-1",
    PacketState.WANTED: "1",
    PacketState.UNCERTAIN: "x",
}


class AttemptError(ValueError):
    pass


class FeedbackTimingError(ValueError):
    pass


class ConstraintViolation(RuntimeError):
    """No wanted packet was attempted exactly once in a receiver's silent window."""


@dataclass(frozen=True)
class FrameSchedule:
    t_down: int
    t_up: int
    uplink_slot: tuple[int, ...]

    def __post_init__(self):
        if self.t_down < 1 or self.t_up < 1:
            raise ValueError("downlink and uplink subframes need at least one slot")
        for s in self.uplink_slot:
            if not 1 <= s <= self.t_up:
                raise ValueError(f"uplink slot {s} outside [1, {self.t_up}]")

    @classmethod
    def round_robin(cls, t_down: int, t_up: int, receivers: int) -> "FrameSchedule":
        return cls(t_down, t_up, tuple(1 + (i % t_up) for i in range(receivers)))

    @property
    def t_frame(self) -> int:
        return self.t_down + self.t_up

    def frame_of(self, t: int) -> int:
        return -(-t // self.t_frame)

    def prev_downlink_frame(self, t: int) -> int:
        return t // self.t_frame

    def feedback_time(self, receiver: int, frame: int) -> int:
        return frame * self.t_frame - self.t_up + self.uplink_slot[receiver]

    def first_uplink_slot(self, frame: int) -> int:
        return frame * self.t_frame - self.t_up + 1

    def is_downlink(self, t: int) -> bool:
        return t >= 1 and (t - 1) % self.t_frame < self.t_down

    def downlink_slots(self, frame: int) -> range:
        start = (frame - 1) * self.t_frame + 1
        return range(start, start + self.t_down)


@dataclass(frozen=True)
class Anchor:
    """Last slot at which the sender learned the forward channel state."""

    packet: int | None
    slot: int
    received: bool


class SenderView:
    """Feedback matrix plus the attempt history since each receiver's last heard feedback.

    ``primary`` is the M x N demand matrix.  Attempt history is kept per
    receiver as ``frame -> packet -> [slots]`` and dropped whenever a feedback
    from that receiver is heard, so only the current silent window is stored.
    """

    def __init__(self, primary, schedule: FrameSchedule):
        self.primary = np.asarray(primary, dtype=bool)
        m, n = self.primary.shape
        if len(schedule.uplink_slot) != m:
            raise ValueError("schedule and demand matrix disagree on the number of receivers")
        self.schedule = schedule
        self.sfm = np.where(self.primary, PacketState.WANTED, PacketState.SECONDARY_LACK).astype(np.int8)
        self._attempts: list[dict[int, dict[int, list[int]]]] = [{} for _ in range(m)]
        self._unheard: list[dict[int, list[int]]] = [defaultdict(list) for _ in range(m)]
        self._last_heard: list[tuple[int, int] | None] = [None] * m
        self._anchor: list[Anchor | None] = [None] * m
        self.revision = [0] * m
        self.clock = 0

    @property
    def receivers(self) -> int:
        return self.sfm.shape[0]

    @property
    def packets(self) -> int:
        return self.sfm.shape[1]

    # -- queries ---------------------------------------------------------

    def state(self, receiver: int, packet: int) -> PacketState:
        return PacketState(int(self.sfm[receiver, packet]))

    def has(self, receiver: int) -> set[int]:
        return set(np.flatnonzero(self.sfm[receiver] == _HAS).tolist())

    def wants(self, receiver: int) -> set[int]:
        row = self.sfm[receiver]
        return set(np.flatnonzero(row >= _WANTED).tolist())

    def lack(self, receiver: int) -> set[int]:
        return set(np.flatnonzero(self.sfm[receiver] != _HAS).tolist())

    def wants_count(self) -> np.ndarray:
        return (self.sfm >= _WANTED).sum(axis=1)

    def attempt_slots(self, receiver: int, packet: int, frame: int) -> tuple[int, ...]:
        return tuple(self._attempts[receiver].get(frame, {}).get(packet, ()))

    def targeted_slots(self, receiver: int, frame: int) -> tuple[int, ...]:
        per_packet = self._attempts[receiver].get(frame, {})
        return tuple(sorted(s for slots in per_packet.values() for s in slots))

    def attempted_in(self, receiver: int, frame: int) -> dict[int, tuple[int, ...]]:
        return {j: tuple(s) for j, s in self._attempts[receiver].get(frame, {}).items()}

    def unheard_frames(self, receiver: int, packet: int) -> tuple[int, ...]:
        return tuple(self._unheard[receiver].get(packet, ()))

    def window_counts(self, receiver: int) -> dict[int, int]:
        """Number of attempts of each packet since the last heard feedback."""
        counts: dict[int, int] = defaultdict(int)
        for per_packet in self._attempts[receiver].values():
            for j, slots in per_packet.items():
                counts[j] += len(slots)
        return counts

    def history_packets(self, receiver: int) -> set[int]:
        """Packets with at least one attempt in the silent window."""
        out: set[int] = set()
        for per_packet in self._attempts[receiver].values():
            out.update(per_packet)
        return out

    def history_pairs(self) -> list[tuple[int, int]]:
        """All (receiver, packet) pairs attempted since the receiver's last heard feedback."""
        return [(i, j) for i in range(self.receivers) for j in sorted(self.history_packets(i))]

    def last_heard(self, receiver: int) -> tuple[int, int] | None:
        return self._last_heard[receiver]

    def anchor(self, receiver: int) -> Anchor | None:
        return self._anchor[receiver]

    def t_star(self, receiver: int) -> int | None:
        heard = self._last_heard[receiver]
        if heard is None:
            return None
        return self.schedule.first_uplink_slot(heard[1])

    def is_uncertain(self, receiver: int, packet: int, t: int) -> bool:
        """True if the packet's reception status is not known at slot `t`.

        Covers the ``x`` entries as well as packets already attempted in the
        current frame, whose entry only flips to ``x`` at the uplink.
        """
        if self.sfm[receiver, packet] == _UNCERTAIN:
            return True
        frame = self.schedule.frame_of(t)
        return packet in self._attempts[receiver].get(frame, {})

    def anchor_packet(self, receiver: int) -> tuple[int, int]:
        """Latest-attempted wanted packet that was attempted exactly once in the window."""
        once = self._once_attempted(receiver, self.wants(receiver))
        if not once:
            raise ConstraintViolation(f"receiver {receiver} has no once-attempted wanted packet")
        packet = max(once, key=once.__getitem__)
        return packet, once[packet]

    def _once_attempted(self, receiver: int, candidates) -> dict[int, int]:
        slots_of: dict[int, list[int]] = defaultdict(list)
        for per_packet in self._attempts[receiver].values():
            for j, slots in per_packet.items():
                slots_of[j].extend(slots)
        return {j: s[0] for j, s in slots_of.items() if len(s) == 1 and j in candidates}

    # -- updates ---------------------------------------------------------

    def record_attempt(self, targeted: Iterable[tuple[int, int]], t: int) -> None:
        if not self.schedule.is_downlink(t):
            raise AttemptError(f"slot {t} is not a downlink slot")
        targeted = list(targeted)
        seen = set()
        for i, j in targeted:
            if i in seen:
                raise AttemptError(f"receiver {i} targeted twice in slot {t}")
            seen.add(i)
        if targeted:
            rows, cols = zip(*targeted)
            held = self.sfm[list(rows), list(cols)] == _HAS
            if held.any():
                i, j = targeted[int(np.argmax(held))]
                raise AttemptError(f"packet {j} is already acknowledged by receiver {i}")
        frame = self.schedule.frame_of(t)
        for i, j in targeted:
            self._attempts[i].setdefault(frame, {}).setdefault(j, []).append(t)
        self.clock = max(self.clock, t)

    def apply_feedback(self, receiver: int, acked: Iterable[int], t: int) -> None:
        """Process a heard cumulative acknowledgement from `receiver` at slot `t`."""
        frame = self.schedule.frame_of(t)
        if t != self.schedule.feedback_time(receiver, frame):
            raise FeedbackTimingError(f"slot {t} is not receiver {receiver}'s uplink slot")
        acked = set(acked)
        anchor = self._anchor_from_feedback(receiver, acked)
        if anchor is not None:
            self._anchor[receiver] = anchor

        row = self.sfm[receiver]
        lacking = row != _HAS
        row[lacking & self.primary[receiver]] = _WANTED
        row[lacking & ~self.primary[receiver]] = _SECONDARY_LACK
        if acked:
            row[sorted(acked)] = _HAS

        previous = self._last_heard[receiver]
        self._last_heard[receiver] = (previous[1] if previous else 0, frame)
        self._forget(receiver)
        self.clock = max(self.clock, t)

    def _anchor_from_feedback(self, receiver: int, acked: set[int]) -> Anchor | None:
        once = self._once_attempted(receiver, self.wants(receiver))
        if once:
            packet = max(once, key=once.__getitem__)
            return Anchor(packet, once[packet], packet in acked)
        # No wanted packet was attempted once: use the latest slot whose state
        # the acknowledgement still pins down.
        packet_at: dict[int, int] = {}
        counts: dict[int, int] = defaultdict(int)
        for per_packet in self._attempts[receiver].values():
            for j, slots in per_packet.items():
                counts[j] += len(slots)
                for s in slots:
                    packet_at[s] = j
        for s in sorted(packet_at, reverse=True):
            j = packet_at[s]
            if j not in acked:
                return Anchor(j, s, False)
            if counts[j] == 1:
                return Anchor(j, s, True)
        return None

    def close_frame_unheard(self, receiver: int, frame: int) -> None:
        per_packet = self._attempts[receiver].get(frame)
        if not per_packet:
            return
        for j in per_packet:
            if self.primary[receiver, j] and self.sfm[receiver, j] != _HAS:
                self.sfm[receiver, j] = _UNCERTAIN
            frames = self._unheard[receiver][j]
            if frame not in frames:
                frames.append(frame)
        self.revision[receiver] += 1

    def observe_perfect(self, receiver: int, has: Iterable[int], t: int, received: bool) -> None:
        """Error-free, immediate report of the receiver's state after slot `t`."""
        row = self.sfm[receiver]
        row[self.primary[receiver]] = _WANTED
        row[~self.primary[receiver]] = _SECONDARY_LACK
        has = sorted(set(int(j) for j in has))
        if has:
            row[has] = _HAS
        self._anchor[receiver] = Anchor(None, t, received)
        frame = self.schedule.frame_of(t)
        previous = self._last_heard[receiver]
        if previous is None or previous[1] != frame:
            self._last_heard[receiver] = (previous[1] if previous else 0, frame)
        self._forget(receiver)
        self.clock = max(self.clock, t)

    def _forget(self, receiver: int) -> None:
        self._attempts[receiver] = {}
        self._unheard[receiver] = defaultdict(list)
        self.revision[receiver] += 1

    # -- debugging -------------------------------------------------------

    def sfm_text(self) -> str:
        """Feedback matrix as text: one row per receiver, symbols 0/-1/1/x."""
        lines = []
        for row in self.sfm:
            lines.append(" ".join(f"{SYMBOLS[PacketState(int(v))]:>2}" for v in row))
        return "\n".join(lines) + "\n"
