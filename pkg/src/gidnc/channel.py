"""Two-state Gilbert-Elliott erasure channels.

A slot is erased when the channel is in the Bad state.  Parameters are the
two transition probabilities; the memory factor and steady state are derived
from them on demand so they can never disagree.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DegenerateParametersError(ValueError):
    """Raised when a steady state is requested for a chain with no transitions."""


class GecState(enum.IntEnum):
    GOOD = 0
    BAD = 1


class Coupling(enum.Enum):
    """How the feedback channel of a receiver relates to its forward channel."""

    INDEPENDENT = "independent"
    IDENTICAL = "iid"  # same parameters, independent realizations
    RECIPROCAL = "reciprocal"  # same realization


@dataclass(frozen=True)
class GecParams:
    to_bad: float
    to_good: float

    def __post_init__(self):
        for name in ("to_bad", "to_good"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value!r} is not a probability")

    @classmethod
    def from_erasure_rate(cls, erasure: float, memory: float) -> "GecParams":
        """Parameters with steady-state Bad probability `erasure` and the given memory."""
        if not 0.0 <= erasure <= 1.0:
            raise ValueError(f"erasure rate {erasure!r} is not a probability")
        if not 0.0 <= memory < 1.0:
            raise ValueError(f"memory {memory!r} must lie in [0, 1)")
        return cls(to_bad=erasure * (1.0 - memory), to_good=(1.0 - erasure) * (1.0 - memory))

    def memory(self) -> float:
        return 1.0 - self.to_good - self.to_bad

    def steady_bad(self) -> float:
        return steady_state(self)[1]

    def steady_good(self) -> float:
        return steady_state(self)[0]


@dataclass(frozen=True)
class LinkParams:
    """Forward and feedback channel parameters of one receiver."""

    forward: GecParams
    feedback: GecParams

    @classmethod
    def reciprocal(cls, params: GecParams) -> "LinkParams":
        return cls(params, params)


def steady_state(params: GecParams) -> tuple[float, float]:
    """Return ``(P(Good), P(Bad))`` of the stationary distribution."""
    total = params.to_bad + params.to_good
    if total <= 0.0:
        raise DegenerateParametersError("to_bad + to_good must be positive")
    return params.to_good / total, params.to_bad / total


def step(state: GecState, params: GecParams, rng: np.random.Generator) -> GecState:
    u = rng.random()
    if state == GecState.GOOD:
        return GecState.BAD if u < params.to_bad else GecState.GOOD
    return GecState.GOOD if u < params.to_good else GecState.BAD


def sample_initial(params: GecParams, rng: np.random.Generator) -> GecState:
    _, bad = steady_state(params)
    return GecState.BAD if rng.random() < bad else GecState.GOOD


def k_step_flip_prob(p_tr: float, memory: float, steps: int) -> float:
    """Probability of being in the other state `steps` slots after a known state.

    With ``p_tr`` the one-step probability of leaving the known state this is
    ``p_tr * sum(memory**l for l in range(steps))``; the empty sum is 0.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0 or p_tr == 0.0:
        return 0.0
    if abs(1.0 - memory) < 1e-15:
        value = p_tr * steps
    else:
        value = p_tr * (1.0 - memory**steps) / (1.0 - memory)
    return min(max(value, 0.0), 1.0)


@dataclass
class ChannelPair:
    """Forward and feedback channel of a single receiver."""

    forward: GecParams
    feedback: GecParams
    coupling: Coupling = Coupling.INDEPENDENT
    forward_state: GecState = GecState.GOOD
    feedback_state: GecState = GecState.GOOD

    def __post_init__(self):
        if self.coupling is not Coupling.INDEPENDENT and self.forward != self.feedback:
            raise ValueError(f"{self.coupling.value} coupling requires equal parameters")
        if self.coupling is Coupling.RECIPROCAL:
            self.feedback_state = self.forward_state

    @classmethod
    def create(cls, forward, feedback=None, coupling=Coupling.INDEPENDENT, rng=None):
        if feedback is None or coupling is not Coupling.INDEPENDENT:
            feedback = forward
        rng = rng if rng is not None else np.random.default_rng()
        fwd = sample_initial(forward, rng)
        fb = fwd if coupling is Coupling.RECIPROCAL else sample_initial(feedback, rng)
        return cls(forward, feedback, coupling, fwd, fb)

    def advance(self, rng: np.random.Generator) -> None:
        self.forward_state = step(self.forward_state, self.forward, rng)
        if self.coupling is Coupling.RECIPROCAL:
            self.feedback_state = self.forward_state
        else:
            self.feedback_state = step(self.feedback_state, self.feedback, rng)


class ChannelBank:
    """Vectorized forward/feedback channels for a population of receivers.

    ``bad_forward[i]`` / ``bad_feedback[i]`` hold the current states.  One
    call to :meth:`advance` consumes a fixed number of uniforms from the
    generator regardless of the states, so two banks driven by equally seeded
    generators produce the same realization.
    """

    def __init__(self, forward, feedback, coupling: Coupling, rng: np.random.Generator):
        self.coupling = coupling
        self.set_params(forward, feedback)
        m = len(self.forward)
        self.bad_forward = rng.random(m) < self._fwd_steady
        if coupling is Coupling.RECIPROCAL:
            self.bad_feedback = self.bad_forward
        else:
            self.bad_feedback = rng.random(m) < self._fb_steady

    def set_params(self, forward, feedback=None) -> None:
        self.forward = list(forward)
        if feedback is None or self.coupling is not Coupling.INDEPENDENT:
            feedback = self.forward
        self.feedback = list(feedback)
        if len(self.feedback) != len(self.forward):
            raise ValueError("forward and feedback populations differ in size")
        self._fwd_b = np.array([p.to_bad for p in self.forward])
        self._fwd_g = np.array([p.to_good for p in self.forward])
        self._fb_b = np.array([p.to_bad for p in self.feedback])
        self._fb_g = np.array([p.to_good for p in self.feedback])
        self._fwd_steady = np.array([steady_state(p)[1] for p in self.forward])
        self._fb_steady = np.array([steady_state(p)[1] for p in self.feedback])

    def __len__(self):
        return len(self.forward)

    @staticmethod
    def _step(bad, to_bad, to_good, u):
        return np.where(bad, u >= to_good, u < to_bad)

    def advance(self, rng: np.random.Generator) -> None:
        m = len(self.forward)
        self.bad_forward = self._step(self.bad_forward, self._fwd_b, self._fwd_g, rng.random(m))
        if self.coupling is Coupling.RECIPROCAL:
            self.bad_feedback = self.bad_forward
        else:
            self.bad_feedback = self._step(self.bad_feedback, self._fb_b, self._fb_g, rng.random(m))

    def pair(self, i: int) -> ChannelPair:
        """Snapshot of receiver `i` as a :class:`ChannelPair`."""
        return ChannelPair(
            self.forward[i],
            self.feedback[i],
            self.coupling,
            GecState(int(self.bad_forward[i])),
            GecState(int(self.bad_feedback[i])),
        )
