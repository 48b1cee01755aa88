"""Instantly decodable network coding over Gilbert-Elliott channels with lossy TDD feedback."""

from .channel import ChannelBank, ChannelPair, Coupling, GecParams, GecState, LinkParams, k_step_flip_prob
from .graph import Clique, IdncGraph, Vertex, build_graph, exact_max_weight_clique, greedy_select
from .kernels import BACKEND
from .probability import BeliefEstimator, finish_prob, innovative_prob
from .sim import Algorithm, SessionConfig, SessionMetrics, run_session
from .tracking import FrameSchedule, PacketState, SenderView

__all__ = [
    "Algorithm",
    "BACKEND",
    "BeliefEstimator",
    "ChannelBank",
    "ChannelPair",
    "Clique",
    "Coupling",
    "FrameSchedule",
    "GecParams",
    "GecState",
    "IdncGraph",
    "LinkParams",
    "PacketState",
    "SenderView",
    "SessionConfig",
    "SessionMetrics",
    "Vertex",
    "build_graph",
    "exact_max_weight_clique",
    "finish_prob",
    "greedy_select",
    "innovative_prob",
    "k_step_flip_prob",
    "run_session",
]
