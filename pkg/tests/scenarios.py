"""Silent-window scenarios built through the SenderView API."""

from dataclasses import dataclass
from itertools import product

import numpy as np

from gidnc.channel import GecParams, LinkParams
from gidnc.tracking import FrameSchedule, SenderView

from oracles import markov_flip

WANTED = (0, 1, 2)
ANCHOR_PACKET = 3  # secondary packet attempted alone in the last heard frame
SCHEDULE = FrameSchedule(t_down=2, t_up=2, uplink_slot=(2,))
SLOT_CHOICES = (None,) + WANTED


@dataclass
class Scenario:
    view: SenderView
    link: LinkParams
    t: int
    attempts: list  # (slot, packet, frame or None for the current frame)
    unheard: list
    anchor_received: bool


def build(anchor_received, unheard_plan, current_plan, link):
    """Frame 1 is heard; frames 2.. follow `unheard_plan`; the current frame follows `current_plan`.

    Each plan entry lists the packet attempted in each downlink slot (None = idle).
    """
    primary = np.array([[True, True, True, False]])
    view = SenderView(primary, SCHEDULE)
    view.record_attempt([(0, ANCHOR_PACKET)], 1)
    view.apply_feedback(0, {ANCHOR_PACKET} if anchor_received else set(), SCHEDULE.feedback_time(0, 1))
    attempts, unheard = [], []
    for k, plan in enumerate(unheard_plan):
        frame = 2 + k
        for slot, j in zip(SCHEDULE.downlink_slots(frame), plan):
            if j is not None:
                view.record_attempt([(0, j)], slot)
                attempts.append((slot, j, frame))
        view.close_frame_unheard(0, frame)
        unheard.append(frame)
    frame = 2 + len(unheard_plan)
    slots = list(SCHEDULE.downlink_slots(frame))
    for slot, j in zip(slots, current_plan):
        if j is not None:
            view.record_attempt([(0, j)], slot)
            attempts.append((slot, j, None))
    return Scenario(view, link, slots[-1], attempts, unheard, anchor_received)


def all_scenarios(rng, max_unheard=2):
    """Every plan with up to `max_unheard` unheard frames and one current-frame slot before t."""
    frame_plans = [p for p in product(SLOT_CHOICES, repeat=SCHEDULE.t_down) if any(j is not None for j in p)]
    for n_unheard in range(max_unheard + 1):
        for plans in product(frame_plans, repeat=n_unheard):
            for current in SLOT_CHOICES:
                for anchor_received in (True, False):
                    fwd = GecParams(*rng.uniform(0.05, 0.5, 2))
                    fb = GecParams(*rng.uniform(0.05, 0.5, 2))
                    yield build(anchor_received, plans, (current,), LinkParams(fwd, fb))


def oracle_inputs(sc: Scenario):
    """Per-slot erasure and per-frame feedback-loss probabilities from matrix powers."""
    f = sc.link.forward
    anchor_slot = 1
    p = {}
    for slot, _, _ in sc.attempts:
        steps = slot - anchor_slot
        if sc.anchor_received:
            p[slot] = markov_flip(f.to_bad, f.to_good, steps, start_bad=False)
        else:
            p[slot] = 1.0 - markov_flip(f.to_bad, f.to_good, steps, start_bad=True)
    fb = sc.link.feedback
    t_star = SCHEDULE.first_uplink_slot(1)
    q = {}
    for frame in sc.unheard:
        steps = SCHEDULE.feedback_time(0, frame) - t_star + SCHEDULE.uplink_slot[0]
        q[frame] = markov_flip(fb.to_bad, fb.to_good, steps, start_bad=False)
    return p, q
