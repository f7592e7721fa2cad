"""Nested rollout policy adaptation (NRPA / GNRPA) and its level-1 variants.

A policy is a plain ``dict`` from move code to weight; missing codes weigh 0.
At a decision the probability of a legal move is softmax(w + beta) with
beta = 0 for plain NRPA.  Every playout draws from its own random stream,
derived from the run seed and the playout's position in the search tree,
so a batch of playouts gives the same results in any execution order.
"""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

from .bias import DEFAULT_TABLES, BiasModel, BiasTables
from .fold import FoldingOracle, NussinovOracle
from .scoring import CODE_STRIDE, MAX_MOVE_NUMBER, ScoreCache, ScoreRecord, ZobristTable
from .structure import TargetStructure

log = logging.getLogger(__name__)

PerLevel = Union[int, tuple]


def code(index: int, number: int, predecessors: Sequence[int] = (), history: int = 0,
         stride: int = CODE_STRIDE) -> int:
    """Policy code of a move.

    ``predecessors`` holds the numbers of the previous moves, most recent
    first; the first ``history`` of them are folded into the code.
    """
    if not 0 <= index < stride:
        raise ValueError(f"index {index} outside [0, {stride})")
    if not 0 <= number < MAX_MOVE_NUMBER:
        raise ValueError(f"move number {number} outside [0, {MAX_MOVE_NUMBER})")
    c = index + stride * number
    scale = stride * MAX_MOVE_NUMBER
    for prev in list(predecessors)[:history]:
        c += scale * prev
        scale *= MAX_MOVE_NUMBER
    return c


@dataclass(frozen=True)
class SearchConfig:
    level: int = 1
    n: PerLevel = 100
    alpha: float = 1.0
    use_beta: bool = True
    p: int = 1
    beam: int = 1
    diversity: bool = False
    history: int = 0
    start_learning: PerLevel = 0
    restart_divisor: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.p < 1 or self.beam < 1:
            raise ValueError("P and beam must be >= 1")
        if self.history not in (0, 1, 2):
            raise ValueError("history must be 0, 1 or 2")
        if self.restart_divisor is not None and self.restart_divisor <= 0:
            raise ValueError("restart_divisor must be > 0")
        for name in ("n", "start_learning"):
            values = getattr(self, name)
            values = values if isinstance(values, tuple) else (values,)
            if any(v < (1 if name == "n" else 0) for v in values):
                raise ValueError(f"bad {name}: {getattr(self, name)}")

    @staticmethod
    def _at(values: PerLevel, level: int) -> int:
        if not isinstance(values, tuple):
            return values
        return values[min(level, len(values)) - 1]

    def n_at(self, level: int) -> int:
        """Iterations at ``level``; tuples list level 1 first."""
        return self._at(self.n, level)

    def start_at(self, level: int) -> int:
        return self._at(self.start_learning, level)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("n", "start_learning"):
            if isinstance(d[key], tuple):
                d[key] = list(d[key])
        return d


@dataclass(frozen=True)
class PlayoutResult:
    moves: tuple[int, ...]  # policy codes of the non-forced decisions
    sequence: str
    score: float
    choices: tuple[int, ...]  # move number played at every slot
    record: Optional[ScoreRecord] = field(default=None, compare=False)

    @property
    def solved(self) -> bool:
        return self.record is not None and self.record.solved


def stream_rng(*key) -> random.Random:
    """Independent random stream for a playout, keyed by ints."""
    return random.Random(":".join(str(k) for k in key))


class _State:
    __slots__ = ("t", "seq", "h", "choices", "codes")

    def __init__(self, t, seq, h, choices, codes):
        self.t, self.seq, self.h, self.choices, self.codes = t, seq, h, choices, codes

    def copy(self) -> "_State":
        return _State(self.t, list(self.seq), self.h, list(self.choices), list(self.codes))


class PlayoutEngine:
    """Playouts, decisions and policy adaptation for one target."""

    def __init__(self, target: TargetStructure, *, use_beta: bool = True, history: int = 0,
                 tables: BiasTables = DEFAULT_TABLES, bias=None,
                 oracle: Optional[FoldingOracle] = None, cache: Optional[ScoreCache] = None,
                 zobrist: Optional[ZobristTable] = None):
        self.target = target
        self.slots = target.slots
        self.history = history
        self.stride = CODE_STRIDE
        if target.length >= self.stride:
            raise ValueError(f"targets must be shorter than {self.stride}")
        self.bias = (bias if bias is not None else BiasModel(self.slots, tables)) if use_beta else None
        self.oracle = oracle if oracle is not None else NussinovOracle()
        self.cache = cache if cache is not None else ScoreCache()
        self.zobrist = zobrist if zobrist is not None else ZobristTable()
        self.legal = [s.allowed for s in self.slots]
        self.index = [s.index for s in self.slots]
        self._writes = []
        self._zkey = []
        for s in self.slots:
            self._writes.append({n: tuple(zip(s.positions, s.candidates[n])) for n in s.allowed})
            self._zkey.append({n: self.zobrist.key(s.index, n) for n in s.allowed})
        self.playouts = 0
        self.best: Optional[PlayoutResult] = None
        self.on_result: Optional[Callable[[PlayoutResult], None]] = None

    # -- states -----------------------------------------------------------
    def root(self) -> _State:
        return _State(0, ["N"] * self.target.length, 0, [], [])

    def codes_at(self, state: _State) -> list[int]:
        t = state.t
        offset = self.index[t]
        if self.history:
            scale = self.stride * MAX_MOVE_NUMBER
            for prev in state.choices[::-1][: self.history]:
                offset += scale * prev
                scale *= MAX_MOVE_NUMBER
        return [offset + self.stride * n for n in self.legal[t]]

    def decision(self, state: _State, policy: dict) -> tuple[list[int], list[float]]:
        """Codes and probabilities of the legal moves at ``state``."""
        codes = self.codes_at(state)
        logits = [policy.get(c, 0.0) for c in codes]
        if self.bias is not None:
            betas = self.bias.vector(state.t, state.seq)
            logits = [w + b for w, b in zip(logits, betas)]
        top = max(logits)
        ex = [math.exp(x - top) for x in logits]
        z = sum(ex)
        return codes, [e / z for e in ex]

    def play(self, state: _State, number: int, code_: Optional[int] = None) -> None:
        t = state.t
        for pos, base in self._writes[t][number]:
            state.seq[pos] = base
        state.h ^= self._zkey[t][number]
        state.choices.append(number)
        if code_ is not None:
            state.codes.append(code_)
        state.t = t + 1

    def finish(self, state: _State) -> PlayoutResult:
        sequence = "".join(state.seq)
        record = self.cache.get_or_score(state.h, sequence, self.target, self.oracle)
        result = PlayoutResult(tuple(state.codes), sequence, record.score, tuple(state.choices), record)
        self.observe(result)
        return result

    def observe(self, result: PlayoutResult) -> None:
        self.playouts += 1
        if self.best is None or result.score > self.best.score:
            self.best = result
            if self.on_result is not None:
                self.on_result(result)

    # -- playouts -----------------------------------------------------------
    def rollout(self, state: _State, policy: dict, rng: random.Random) -> PlayoutResult:
        """Finish ``state`` (mutated in place) by sampling the policy."""
        n_slots = len(self.slots)
        while state.t < n_slots:
            legal = self.legal[state.t]
            if len(legal) == 1:
                self.play(state, legal[0])
                continue
            codes, probs = self.decision(state, policy)
            u = rng.random()
            k, acc = len(probs) - 1, 0.0
            for idx, p in enumerate(probs):
                acc += p
                if u < acc:
                    k = idx
                    break
            self.play(state, legal[k], codes[k])
        return self.finish(state)

    def playout(self, policy: dict, rng: random.Random) -> PlayoutResult:
        return self.rollout(self.root(), policy, rng)

    def adapt(self, policy: dict, result: PlayoutResult, alpha: float) -> dict:
        """Move the policy toward ``result``; probabilities read the input policy."""
        polp = dict(policy)
        state = self.root()
        for number in result.choices:
            legal = self.legal[state.t]
            if len(legal) > 1:
                codes, probs = self.decision(state, policy)
                chosen = codes[legal.index(number)]
                polp[chosen] = polp.get(chosen, 0.0) + alpha
                for c, p in zip(codes, probs):
                    polp[c] = polp.get(c, 0.0) - alpha * p
            self.play(state, number)
        return polp


@dataclass
class BeamItem:
    policy: dict
    best: Optional[PlayoutResult] = None


def select_beam(items, width: int, diversity: bool = False,
                score: Callable = lambda item: item.best.score) -> list:
    """Top ``width`` items by score; later items win ties.

    With ``diversity`` only the first item of each distinct score is kept.
    """
    order = sorted(range(len(items)), key=lambda k: (-score(items[k]), -k))
    kept, seen = [], set()
    for k in order:
        s = score(items[k])
        if diversity and s in seen:
            continue
        seen.add(s)
        kept.append(items[k])
        if len(kept) == width:
            break
    return kept


class Search:
    """One seeded NRPA/GNRPA search over a target.

    Stops early once a solution is found, the deadline passes or the
    ``cancel`` event is set.
    """

    def __init__(self, target: TargetStructure, config: SearchConfig, *,
                 tables: BiasTables = DEFAULT_TABLES, bias=None,
                 oracle: Optional[FoldingOracle] = None, cache: Optional[ScoreCache] = None,
                 deadline: Optional[float] = None, cancel=None, batch_runner=None,
                 always_beam: bool = False, stop_on_solve: bool = True):
        self.target = target
        self.config = config
        self.engine = PlayoutEngine(target, use_beta=config.use_beta, history=config.history,
                                    tables=tables, bias=bias, oracle=oracle, cache=cache)
        self.deadline = deadline
        self.cancel = cancel
        self.batch_runner = batch_runner
        self.always_beam = always_beam
        self.stop_on_solve = stop_on_solve
        self.adapt_calls = 0
        self.trace: list[tuple[int, float]] = []
        self.restarts_done = 0
        self.engine.on_result = self._improved
        divisor = config.restart_divisor
        self.limit_restart = len(target.slots) / divisor if divisor else math.inf

    def _improved(self, result: PlayoutResult) -> None:
        self.trace.append((self.engine.playouts, result.score))
        log.debug("playout %d best %.6f %s", self.engine.playouts, result.score, result.sequence)

    @property
    def best(self) -> Optional[PlayoutResult]:
        return self.engine.best

    def stopped(self) -> bool:
        best = self.engine.best
        if self.stop_on_solve and best is not None and best.solved:
            return True
        if self.deadline is not None and time.monotonic() >= self.deadline:
            return True
        return self.cancel is not None and self.cancel.is_set()

    def playout(self, policy: dict, key: tuple) -> PlayoutResult:
        return self.engine.playout(policy, stream_rng(self.config.seed, *key))

    def adapt(self, policy: dict, result: PlayoutResult) -> dict:
        self.adapt_calls += 1
        return self.engine.adapt(policy, result, self.config.alpha)

    def _use_beam(self) -> bool:
        cfg = self.config
        return self.always_beam or cfg.beam > 1 or cfg.p > 1 or cfg.diversity

    # -- nested levels --------------------------------------------------------
    def nrpa(self, level: int, policy: Optional[dict] = None, path: tuple = ()) -> Optional[PlayoutResult]:
        policy = {} if policy is None else policy
        if level == 0:
            return self.playout(policy, path + (0, 0))
        if level == 1 and self._use_beam():
            return self.beam_level1(policy, path, self.config.n_at(1))
        best = None
        start = self.config.start_at(level)
        for i in range(self.config.n_at(level)):
            if self.stopped():
                break
            result = self.nrpa(level - 1, policy, path + (i,))
            if result is None:
                break
            if best is None or result.score >= best.score:
                best = result
            if i >= start:
                policy = self.adapt(policy, best)
        return best

    # -- levels with restarts -------------------------------------------------
    def restarts(self, level: int, policy: Optional[dict] = None, path: tuple = ()) -> Optional[PlayoutResult]:
        """Unbounded level loop that returns after ``limit_restart`` stagnant iterations."""
        policy = {} if policy is None else policy
        if level == 0:
            return self.playout(policy, path + (0, 0))
        if level == 1 and self._use_beam():
            return self.beam_level1(policy, path, None)
        best, best_score, last = None, -math.inf, 0
        start = self.config.start_at(level)
        i = 0
        while not self.stopped():
            result = self.restarts(level - 1, policy, path + (i,))
            if result is None:
                break
            if result.score >= best_score:
                if result.score > best_score:
                    last = i
                best_score, best = result.score, result
            if i - last >= self.limit_restart:
                return best
            if i >= start:
                policy = self.adapt(policy, best)
            i += 1
        return best

    # -- level 1 with stabilized playouts and a beam ---------------------
    def run_batch(self, policies: list[dict], keys: list[list[tuple]]) -> list[list[PlayoutResult]]:
        if self.batch_runner is not None:
            batches = self.batch_runner(policies, keys)
            for results in batches:
                for r in results:
                    self.engine.observe(r)
            return batches
        return [[self.playout(pol, k) for k in ks] for pol, ks in zip(policies, keys)]

    def beam_step(self, beam: list[BeamItem], path: tuple, i: int, learn: bool) -> list[BeamItem]:
        """One adapt cycle: B x P playouts, beam selection, then adaptation."""
        cfg = self.config
        keys = [[path + (i, b, p) for p in range(cfg.p)] for b in range(len(beam))]
        batch = self.run_batch([item.policy for item in beam], keys)
        candidates = [item for item in beam if item.best is not None]
        for item, results in zip(beam, batch):
            candidates.extend(BeamItem(item.policy, r) for r in results)
        kept = select_beam(candidates, cfg.beam, cfg.diversity)
        if learn:
            return [BeamItem(self.adapt(item.policy, item.best), item.best) for item in kept]
        return [BeamItem(item.policy, item.best) for item in kept]

    def beam_level1(self, policy: dict, path: tuple = (), iterations: Optional[int] = None) -> Optional[PlayoutResult]:
        """Level-1 loop over beam steps.

        ``iterations=None`` runs the restart rule instead of a fixed count.
        """
        beam = [BeamItem(policy) for _ in range(self.config.beam)]
        start = self.config.start_at(1)
        best_score, last, i = -math.inf, 0, 0
        top = None
        while iterations is None or i < iterations:
            if self.stopped():
                break
            beam = self.beam_step(beam, path, i, learn=i >= start)
            top = beam[0].best
            if iterations is None:
                if top.score > best_score:
                    best_score, last = top.score, i
                if i - last >= self.limit_restart:
                    break
            i += 1
        return top

    # -- drivers -----------------------------------------------------------
    def run(self, repeat: bool = False, max_restarts: Optional[int] = None) -> Optional[PlayoutResult]:
        """Top-level search.

        With a restart divisor, fresh restart searches run until stopped or
        ``max_restarts`` is reached; otherwise one level search runs (again
        and again with ``repeat``).
        """
        r = 0
        if self.config.restart_divisor is not None:
            if max_restarts is None and self.deadline is None and self.cancel is None:
                raise ValueError("restarts need a deadline, a cancel event or max_restarts")
            while not self.stopped() and (max_restarts is None or r < max_restarts):
                self.restarts(self.config.level, {}, (r,))
                r += 1
        else:
            if repeat and self.deadline is None and self.cancel is None:
                raise ValueError("repeat needs a deadline or a cancel event")
            while True:
                self.nrpa(self.config.level, {}, (r,))
                r += 1
                if not repeat or self.stopped():
                    break
        self.restarts_done = r
        return self.engine.best
