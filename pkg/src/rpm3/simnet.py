"""Deterministic discrete-event simulation of heterogeneous workers.

Each worker holds at most one task.  Dispatch is instantaneous; the result
event fires ``sample_response_time`` later.  Events are ordered by
``(time, worker, seq)`` so equal-time events resolve by worker id.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from rpm3.errors import ConfigurationError, RPM3Error


@dataclass(frozen=True)
class WorkerModel:
    """Response-time model: ``fixed`` latency or ``shifted_exp``.

    ``schedule`` holds ``(from_time, factor)`` pairs; from ``from_time`` on
    the worker runs ``factor`` times faster.
    """

    id: int
    kind: str = "fixed"
    latency: float = 1.0
    shift: float = 0.0
    rate: float = 1.0
    schedule: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "shifted_exp"):
            raise ConfigurationError(f"unknown worker model {self.kind!r}")
        if self.kind == "fixed" and not self.latency > 0:
            raise ConfigurationError(f"worker {self.id}: latency must be positive")
        if self.kind == "shifted_exp" and (self.shift < 0 or not self.rate > 0):
            raise ConfigurationError(f"worker {self.id}: need shift >= 0 and rate > 0")
        times = [t for t, _ in self.schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError(f"worker {self.id}: schedule times must strictly increase")
        if any(not f > 0 for _, f in self.schedule):
            raise ConfigurationError(f"worker {self.id}: speed factors must be positive")

    def factor(self, now: float) -> float:
        f = 1.0
        for start, factor in self.schedule:
            if start <= now:
                f = factor
            else:
                break
        return f


def sample_response_time(model: WorkerModel, now: float, rng: np.random.Generator) -> float:
    factor = model.factor(now)
    if model.kind == "fixed":
        return model.latency / factor
    if math.isinf(model.rate):
        return model.shift
    return model.shift + float(rng.exponential(1.0 / model.rate)) / factor


class SimulationComplete(RPM3Error):
    """Raised by :meth:`EventQueue.step` when no events remain."""


@dataclass(order=True)
class SimEvent:
    time: float
    worker: int
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


class EventQueue:
    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def push(self, time: float, worker: int, kind: str, payload=None) -> SimEvent:
        if time < self.now:
            raise RPM3Error(f"event at {time} scheduled in the past (now={self.now})")
        ev = SimEvent(time, worker, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def peek_time(self) -> float | None:
        return self._heap[0].time if self._heap else None

    def step(self) -> SimEvent:
        if not self._heap:
            raise SimulationComplete("event queue is empty")
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        return ev


class WorkerPool:
    """The simulated workers plus the event queue they report into."""

    def __init__(self, models: Sequence[WorkerModel], rng: np.random.Generator, trace: bool = False):
        self.models = {m.id: m for m in models}
        self.rng = rng
        self.queue = EventQueue()
        self.busy: dict[int, float] = {}
        self.trace: list[dict] | None = [] if trace else None

    @property
    def now(self) -> float:
        return self.queue.now

    def dispatch(self, worker: int, payload, tag: dict | None = None) -> float:
        if worker in self.busy:
            raise RPM3Error(f"worker {worker} already holds a task")
        now = self.queue.now
        duration = sample_response_time(self.models[worker], now, self.rng)
        self.busy[worker] = now
        ev = self.queue.push(now + duration, worker, "result-ready", payload)
        if self.trace is not None:
            self.trace.append({"time": now, "kind": "task-dispatched", "worker": worker, "seq": ev.seq, **(tag or {})})
        return duration

    def next_batch(self) -> list[SimEvent]:
        """Pop every event sharing the earliest timestamp, in tie-break order."""
        first = self.queue.step()
        batch = [first]
        while self.queue.peek_time() == first.time:
            batch.append(self.queue.step())
        for ev in batch:
            del self.busy[ev.worker]
        return batch

    def log_ready(self, ev: SimEvent, tag: dict | None = None) -> None:
        if self.trace is not None:
            self.trace.append({"time": ev.time, "kind": "result-ready", "worker": ev.worker, "seq": ev.seq, **(tag or {})})


def dump_trace(trace: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
