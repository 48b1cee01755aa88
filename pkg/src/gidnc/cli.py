"""Command-line experiment harness: parameter sweeps to CSV.

Example::

    gidnc-sim --sweep mu=0,0.4,0.8 --algorithm agu,fve,sve,opt --iterations 300 --out fig5.csv

Options may also come from a ``key=value`` file given with ``--config``;
keys are the long option names without the leading dashes.  Command-line
flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channel import Coupling
from .sim import Algorithm, Session, SessionConfig, Streams, run_session

HEADER = ["axis", "value", "algorithm", "mean_delay", "stderr", "iterations", "capped"]
AXES = ("M", "N", "mu", "Tf", "L")


class ConfigError(ValueError):
    pass


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    base: SessionConfig
    algorithms: tuple[Algorithm, ...]
    iterations: int
    seed: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {', '.join(AXES)}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        if not self.algorithms:
            raise ConfigError("no algorithm selected")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")

    def config_at(self, value: float, algorithm: Algorithm) -> SessionConfig:
        base = replace(self.base, algorithm=algorithm, seed=self.seed, iterations=self.iterations)
        if self.axis == "M":
            return replace(base, receivers=int(value))
        if self.axis == "N":
            return replace(base, packets=int(value))
        if self.axis == "mu":
            return replace(base, memory=float(value))
        if self.axis == "L":
            return replace(base, demand_ratio=float(value))
        t_down = int(value) - base.t_up
        if t_down < 1:
            raise ConfigError(f"frame length {value} leaves no downlink slot with t_up={base.t_up}")
        return replace(base, t_down=t_down)


@dataclass(frozen=True)
class Row:
    axis: str
    value: float
    algorithm: str
    mean_delay: float
    stderr: float
    iterations: int
    capped: int


def _one(args) -> tuple[float, bool]:
    config, iteration = args
    m = run_session(config, iteration)
    return m.mean_delay, m.capped


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[Row]:
    """Mean and standard error of the per-session mean delay for every cell.

    Iteration ``k`` of every cell uses the same random streams, so the
    algorithms are compared on matched demand and channel realizations.
    """
    cells = [(v, a) for v in spec.values for a in spec.algorithms]
    tasks = [(spec.config_at(v, a), k) for v, a in cells for k in range(spec.iterations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [_one(t) for t in tasks]
    rows = []
    for c, (value, alg) in enumerate(cells):
        chunk = results[c * spec.iterations:(c + 1) * spec.iterations]
        delays = np.array([d for d, _ in chunk])
        stderr = float(delays.std(ddof=1) / math.sqrt(delays.size)) if delays.size > 1 else 0.0
        rows.append(
            Row(spec.axis, _sig6(value), alg.value, _sig6(float(delays.mean())), _sig6(stderr),
                spec.iterations, sum(capped for _, capped in chunk))
        )
    return rows


def format_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow([r.axis, f"{r.value:.6g}", r.algorithm, f"{r.mean_delay:.6g}", f"{r.stderr:.6g}",
                         r.iterations, r.capped])
    return buf.getvalue()


def emit_csv(rows: list[Row], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(rows))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> list[Row]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            Row(r["axis"], float(r["value"]), r["algorithm"], float(r["mean_delay"]), float(r["stderr"]),
                int(r["iterations"]), int(r["capped"]))
            for r in reader
        ]


def dump_debug(spec: SweepSpec, directory) -> list[Path]:
    """Write the feedback matrix and graph edge list seen at the first coded slot of iteration 0."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for value in spec.values:
        for alg in spec.algorithms:
            session = Session(spec.config_at(value, alg), Streams.for_iteration(spec.seed, 0))
            session.capture = True
            session.run()
            if session.snapshot is None:
                continue
            stem = f"{spec.axis}_{value:g}_{alg.value}"
            for name, text in zip(("sfm", "graph"), session.snapshot):
                path = directory / f"{name}_{stem}.txt"
                path.write_text(text, encoding="utf-8", newline="\n")
                written.append(path)
    return written


def read_config_file(path) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("_", "-")] = value
    return out


def parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    if "=" not in text:
        raise ConfigError(f"--sweep expects axis=v1,v2,... but got {text!r}")
    axis, values = text.split("=", 1)
    try:
        return axis.strip(), tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad sweep value in {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gidnc-sim", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="key=value file with default options")
    p.add_argument("--receivers", type=int, default=60)
    p.add_argument("--packets", type=int, default=30)
    p.add_argument("--demand-ratio", type=float, default=0.8)
    p.add_argument("--mu", type=float, default=0.4, help="forward channel memory")
    p.add_argument("--feedback-mu", type=float, default=None, help="feedback memory (independent coupling)")
    p.add_argument("--t-down", type=int, default=4)
    p.add_argument("--t-up", type=int, default=1)
    p.add_argument("--b-min", type=float, default=0.1, help="lowest per-receiver erasure rate")
    p.add_argument("--b-max", type=float, default=0.3, help="highest per-receiver erasure rate")
    p.add_argument("--coupling", choices=[c.value for c in Coupling], default="reciprocal")
    p.add_argument("--algorithm", default="agu",
                   help="comma-separated list of " + ", ".join(a.value for a in Algorithm))
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep", help="axis=v1,v2,... with axis one of " + ", ".join(AXES))
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--redraw-per-frame", action="store_true", help="redraw erasure rates every frame")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-dir", help="write the feedback matrix and edge list of each cell's first coded slot here")
    return p


def _apply_file_defaults(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        file_opts = read_config_file(pre.config)
        known = {a.dest: a for a in parser._actions}
        defaults = {}
        for key, value in file_opts.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r}")
            action = known[dest]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[dest] = value.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    defaults[dest] = action.type(value) if action.type else value
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {value!r}") from exc
        parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    try:
        algorithms = tuple(Algorithm(a.strip()) for a in args.algorithm.split(",") if a.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    base = SessionConfig(
        receivers=args.receivers,
        packets=args.packets,
        demand_ratio=args.demand_ratio,
        b_min=args.b_min,
        b_max=args.b_max,
        memory=args.mu,
        feedback_memory=args.feedback_mu,
        coupling=Coupling(args.coupling),
        t_down=args.t_down,
        t_up=args.t_up,
        iterations=args.iterations,
        seed=args.seed,
        redraw_per_frame=args.redraw_per_frame,
    )
    if args.sweep:
        axis, values = parse_sweep(args.sweep)
    else:
        axis, values = "mu", (args.mu,)
    return SweepSpec(axis, values, base, algorithms, args.iterations, args.seed)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_file_defaults(parser, argv)
        spec = spec_from_args(args)
        rows = run_sweep(spec, workers=max(1, args.workers))
        if args.out:
            emit_csv(rows, args.out)
        else:
            sys.stdout.write(format_csv(rows))
        if args.dump_dir:
            dump_debug(spec, args.dump_dir)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
