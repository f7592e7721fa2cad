"""Comparison searches: nested Monte Carlo search and UCT.

Both reuse :class:`~rnamcs.search.PlayoutEngine` with the heuristic bias and
no learned weights, so their rollouts are plain NEMO-weighted playouts.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .search import PlayoutEngine, PlayoutResult, stream_rng

_EMPTY: dict = {}


class _Stopper:
    def __init__(self, engine: PlayoutEngine, deadline=None, cancel=None, stop_on_solve=True):
        self.engine, self.deadline, self.cancel, self.stop_on_solve = engine, deadline, cancel, stop_on_solve

    def __call__(self) -> bool:
        best = self.engine.best
        if self.stop_on_solve and best is not None and best.solved:
            return True
        if self.deadline is not None and time.monotonic() >= self.deadline:
            return True
        return self.cancel is not None and self.cancel.is_set()


def nmcs(level: int, engine: PlayoutEngine, rng: random.Random, state=None,
         stopped=None) -> PlayoutResult:
    """Nested Monte Carlo search from ``state`` (the root by default).

    Each level memorizes its best sequence and follows it whenever no
    sampled move beats it.
    """
    state = engine.root() if state is None else state.copy()
    stopped = stopped if stopped is not None else (lambda: False)
    if level == 0:
        return engine.rollout(state, _EMPTY, rng)
    n_slots = len(engine.slots)
    best: Optional[PlayoutResult] = None
    while state.t < n_slots:
        legal = engine.legal[state.t]
        if len(legal) > 1 or best is None:
            for number in legal:
                child = state.copy()
                engine.play(child, number)
                result = nmcs(level - 1, engine, rng, child, stopped)
                if best is None or result.score > best.score:
                    best = result
                if stopped():
                    return best
        engine.play(state, best.choices[state.t])
    return best if best is not None else engine.finish(state)


@dataclass
class UctNode:
    numbers: tuple[int, ...]
    visits: list = field(default_factory=list)
    values: list = field(default_factory=list)
    total: int = 0

    def __post_init__(self):
        if not self.visits:
            self.visits = [0] * len(self.numbers)
            self.values = [0.0] * len(self.numbers)

    def update(self, k: int, value: float) -> None:
        self.visits[k] += 1
        self.values[k] += value
        self.total += 1


@dataclass
class UctResult:
    best: Optional[PlayoutResult]
    iterations: int
    table: dict


def uct_search(engine: PlayoutEngine, budget: Optional[int] = None, c: float = 0.4,
               seed: int = 0, stopped=None, table: Optional[dict] = None) -> UctResult:
    """UCT with a Zobrist-keyed transposition table.

    Untried moves are expanded first, most probable under the bias first;
    tried moves are ranked by mean + c * sqrt(ln(total) / visits).
    ``budget`` counts rollouts; ``None`` runs until ``stopped()``.
    """
    if c < 0:
        raise ValueError("exploration constant must be >= 0")
    if budget is None and stopped is None:
        raise ValueError("uct_search needs a budget or a stop condition")
    stopped = stopped if stopped is not None else (lambda: False)
    table = {} if table is None else table
    rng = random.Random(seed)
    n_slots = len(engine.slots)
    best: Optional[PlayoutResult] = None
    it = 0
    while budget is None or it < budget:
        if it and stopped():
            break
        state = engine.root()
        path = []
        while state.t < n_slots:
            legal = engine.legal[state.t]
            if len(legal) == 1:
                engine.play(state, legal[0])
                continue
            node = table.get(state.h)
            if node is None:
                node = UctNode(tuple(legal))
                table[state.h] = node
            codes, probs = engine.decision(state, _EMPTY)
            untried = [k for k in range(len(legal)) if node.visits[k] == 0]
            if untried:
                k = max(untried, key=lambda j: (probs[j], -j))
            else:
                log_total = math.log(node.total)
                k = max(range(len(legal)),
                        key=lambda j: (node.values[j] / node.visits[j]
                                       + c * math.sqrt(log_total / node.visits[j]), -j))
            path.append((node, k))
            engine.play(state, legal[k], codes[k])
            if untried:
                break
        result = engine.rollout(state, _EMPTY, rng)
        for node, k in path:
            node.update(k, result.score)
        if best is None or result.score > best.score:
            best = result
        it += 1
    return UctResult(best, it, table)


def repeated_nmcs(engine: PlayoutEngine, level: int, seed: int = 0, deadline=None, cancel=None,
                  max_calls: Optional[int] = None) -> Optional[PlayoutResult]:
    """Call NMCS again and again with fresh random streams until stopped."""
    stopped = _Stopper(engine, deadline, cancel)
    calls = 0
    while not stopped() and (max_calls is None or calls < max_calls):
        nmcs(level, engine, stream_rng(seed, calls), stopped=stopped)
        calls += 1
    return engine.best


def timed_uct(engine: PlayoutEngine, c: float = 0.4, seed: int = 0, budget=None, deadline=None,
              cancel=None) -> Optional[PlayoutResult]:
    stopped = _Stopper(engine, deadline, cancel)
    if budget is None and deadline is None and cancel is None:
        raise ValueError("UCT needs a budget, a deadline or a cancel event")
    return uct_search(engine, budget=budget, c=c, seed=seed, stopped=stopped).best
