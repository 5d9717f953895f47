"""Random program generation for property tests and calibration runs.

Programs are generated as source text so the parser is exercised too.  The
shape is deliberately desk scale: a couple of channels, a handful of worker
threads each running a short list of sends and receives, and a main thread
doing the same.  Send/receive counts are roughly balanced per channel so a
fair share of runs terminate; deadlocking runs are fine for every consumer
of this module (a trace is a trace).  Close is never generated: panics
would truncate runs and the validity oracle re-executes schedules.
"""

from __future__ import annotations

import random


def random_program(
    rng: random.Random,
    max_threads: int = 5,
    max_ops_per_thread: int = 4,
    buffered: bool = False,
    max_channels: int = 3,
    with_selects: bool = False,
    with_close: bool = False,
) -> str:
    n_channels = rng.randint(1, max_channels)
    channels = [f"c{i}" for i in range(n_channels)]
    caps = {ch: (rng.choice([0, 1, 2]) if buffered else 0) for ch in channels}
    n_workers = rng.randint(1, max_threads - 1)

    lines = [f"{ch} := make(chan, {caps[ch]})" for ch in channels]

    def one_op() -> str:
        ch = rng.choice(channels)
        if rng.random() < 0.5:
            return f"{ch} <- {rng.randint(0, 9)}"
        return f"<-{ch}"

    def ops(count: int) -> list[str]:
        out = []
        for _ in range(count):
            if with_selects and rng.random() < 0.3:
                cases = "  ".join(f"case {one_op()}:" for _ in range(rng.randint(1, 2)))
                default = "  default:" if rng.random() < 0.5 else ""
                out.append(f"select {{ {cases}{default} }}")
            else:
                out.append(one_op())
        return out

    for _ in range(n_workers):
        body = ops(rng.randint(1, max_ops_per_thread))
        lines.append("spawn { " + "; ".join(body) + " }")
    lines.extend(ops(rng.randint(1, max_ops_per_thread)))
    if with_close:
        lines.append(f"close({rng.choice(channels)})")
    return "\n".join(lines)
