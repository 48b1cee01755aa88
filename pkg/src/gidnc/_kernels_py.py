"""Pure-numpy versions of the graph kernels.

Used when the compiled extension is unavailable or GIDNC_PURE_PYTHON=1.
Signatures and results match :mod:`gidnc._ext`.
"""

import numpy as np


def build_adjacency(receiver, packet, has):
    """Adjacency of the coding graph.

    Vertices ``u = (i, j)`` and ``v = (k, l)`` of different receivers are
    joined when ``j == l`` or when ``k`` holds ``j`` and ``i`` holds ``l``.
    """
    receiver = np.asarray(receiver, dtype=np.int64)
    packet = np.asarray(packet, dtype=np.int64)
    has = np.asarray(has, dtype=bool)
    same_packet = packet[:, None] == packet[None, :]
    # has[k, j] for row u=(i, j), column v=(k, l)
    k_has_j = has[receiver[None, :], packet[:, None]]
    i_has_l = has[receiver[:, None], packet[None, :]]
    adj = (same_packet | (k_has_j & i_has_l)) & (receiver[:, None] != receiver[None, :])
    return adj


def connectivity(adj, w0, candidates):
    """Connectivity weight of each candidate within the candidate subgraph."""
    cand = np.asarray(candidates, dtype=np.int64)
    sub = adj[np.ix_(cand, cand)]
    deg = sub.sum(axis=1)
    edges = deg.sum() / 2.0
    if edges == 0:
        return np.zeros(cand.size)
    return (sub.astype(np.float64) @ (w0[cand] * deg)) / edges


def greedy_pass(adj, w0, candidates):
    """Repeatedly pick the max-w* vertex and shrink to its neighbourhood.

    ``candidates`` must be sorted; ties go to the earliest candidate.
    Returns the picked vertex indices in selection order.
    """
    adj = np.asarray(adj, dtype=bool)
    w0 = np.asarray(w0, dtype=np.float64)
    cand = np.asarray(candidates, dtype=np.int64)
    chosen = []
    while cand.size:
        w = connectivity(adj, w0, cand)
        score = (w + 1.0) * w0[cand]
        k = int(np.argmax(score))
        v = int(cand[k])
        chosen.append(v)
        cand = cand[adj[v, cand]]
    return np.array(chosen, dtype=np.int64)
