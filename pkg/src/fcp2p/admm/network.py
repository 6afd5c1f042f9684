"""
Simulated synchronous network: immutable messages, per-agent mailboxes, and
schedulers that run one local step on every agent between barriers.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, NamedTuple, Optional, Sequence


class Message(NamedTuple):
    round: int
    phase: str  # "V" or "JACOBI"
    sender: int
    receiver: int
    value: float

    def to_dict(self) -> dict:
        return {"round": self.round, "phase": self.phase, "from": self.sender,
                "to": self.receiver, "value": float(self.value)}


class Network:
    """Routes outbox messages into neighbor mailboxes.

    Only graph neighbors may talk to each other. With ``trace=True`` every
    delivered message is kept in :attr:`log`.
    """

    def __init__(self, neighbors: Sequence[Sequence[int]], trace: bool = False):
        self._allowed = [frozenset(nb) for nb in neighbors]
        self.trace = trace
        self.log: list[Message] = []
        self.delivered = 0

    def route(self, agents) -> None:
        for agent in agents:
            out = agent.outbox
            if not out:
                continue
            allowed = self._allowed[agent.index]
            for msg in out:
                if msg.receiver not in allowed:
                    raise RuntimeError(f"agent {msg.sender} messaged non-neighbor {msg.receiver}")
                agents[msg.receiver].mailbox[msg.phase][msg.sender] = msg.value
            self.delivered += len(out)
            if self.trace:
                self.log.extend(out)
            agent.outbox = []


def _timed(fn: Callable, agent) -> None:
    start = time.perf_counter()
    fn(agent)
    agent.seconds += time.perf_counter() - start


class SequentialScheduler:
    """Runs agents one after another, in index order or a fixed permutation.

    ``shuffle_seed`` reshuffles the order before every round, which the
    determinism tests use to show scheduling order does not matter.
    """

    def __init__(self, order: Optional[Sequence[int]] = None, shuffle_seed: Optional[int] = None):
        self.order = list(order) if order is not None else None
        self._rng = random.Random(shuffle_seed) if shuffle_seed is not None else None

    def run(self, fn: Callable, agents: Sequence) -> None:
        idx = self.order if self.order is not None else range(len(agents))
        if self._rng is not None:
            idx = list(range(len(agents)))
            self._rng.shuffle(idx)
        for i in idx:
            _timed(fn, agents[i])

    def close(self) -> None:
        pass


class ThreadScheduler:
    """Runs the agents of a round concurrently on a thread pool."""

    def __init__(self, max_workers: Optional[int] = None):
        self._pool = ThreadPoolExecutor(max_workers=max_workers)

    def run(self, fn: Callable, agents: Sequence) -> None:
        list(self._pool.map(lambda a: _timed(fn, a), agents))

    def close(self) -> None:
        self._pool.shutdown(wait=True)
