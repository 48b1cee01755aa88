"""Compare the compiled graph kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--receivers 60] [--packets 30] [--repeat 50]

Kernel timings import both backends directly.  The session timing runs a
full simulation in a subprocess per backend, selected with GIDNC_PURE_PYTHON.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gidnc import _kernels_py

try:
    from gidnc import _ext
except ImportError:
    _ext = None

SESSION_SNIPPET = """
import time
from gidnc.kernels import BACKEND
from gidnc.sim import SessionConfig, run_session
cfg = SessionConfig(receivers={m}, packets={n})
start = time.perf_counter()
for k in range({sessions}):
    run_session(cfg, k)
print(BACKEND, (time.perf_counter() - start) / {sessions})
"""


def random_instance(m, n, rng):
    primary = rng.random((m, n)) < 0.8
    has = ~primary & (rng.random((m, n)) < 0.5)
    wanted = primary | (~has & (rng.random((m, n)) < 0.3))
    receiver, packet = np.nonzero(wanted)
    return receiver.astype(np.int64), packet.astype(np.int64), has, rng.random(receiver.size)


def time_kernels(mod, inst, repeat):
    receiver, packet, has, w0 = inst
    adj = mod.build_adjacency(receiver, packet, has)
    cand = np.arange(receiver.size, dtype=np.int64)
    return {
        "build_adjacency": min(timeit.repeat(lambda: mod.build_adjacency(receiver, packet, has), number=1, repeat=repeat)),
        "connectivity": min(timeit.repeat(lambda: mod.connectivity(adj, w0, cand), number=1, repeat=repeat)),
        "greedy_pass": min(timeit.repeat(lambda: mod.greedy_pass(adj, w0, cand), number=1, repeat=repeat)),
    }


def time_session(pure, m, n, sessions):
    env = dict(os.environ, GIDNC_PURE_PYTHON="1" if pure else "0")
    code = SESSION_SNIPPET.format(m=m, n=n, sessions=sessions)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, seconds = out.stdout.split()
    return backend, float(seconds)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--receivers", type=int, default=60)
    p.add_argument("--packets", type=int, default=30)
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--sessions", type=int, default=10)
    args = p.parse_args(argv)

    inst = random_instance(args.receivers, args.packets, np.random.default_rng(0))
    print(f"graph with {inst[0].size} vertices")
    py = time_kernels(_kernels_py, inst, args.repeat)
    if _ext is None:
        print("compiled extension not built; only the fallback is timed")
    cy = time_kernels(_ext, inst, args.repeat) if _ext is not None else {}
    print(f"{'kernel':<18}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, t_py in py.items():
        t_cy = cy.get(name)
        if t_cy is None:
            print(f"{name:<18}{1e3 * t_py:>12.3f}{'-':>12}{'-':>10}")
        else:
            print(f"{name:<18}{1e3 * t_py:>12.3f}{1e3 * t_cy:>12.3f}{t_py / t_cy:>9.1f}x")

    print(f"\nmean seconds per session (M={args.receivers}, N={args.packets}, {args.sessions} sessions)")
    for pure in (True, False):
        backend, seconds = time_session(pure, args.receivers, args.packets, args.sessions)
        print(f"{backend:<18}{seconds:>12.4f}")


if __name__ == "__main__":
    main()
