"""Design score and a Zobrist-keyed score cache."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fold import FoldingOracle, NussinovOracle
from .structure import TargetStructure

CODE_STRIDE = 2000
MAX_MOVE_NUMBER = 6


@dataclass(frozen=True)
class ScoreRecord:
    score: float
    solved: bool
    bpd: int
    delta_g: float
    mfe_structure: str = ""


def score_value(bpd: int, delta_g: float, num_target_pairs: int) -> float:
    """K / (1 + dG) when K > 0, K * (1 + dG) otherwise.

    K = 1 - BPD / (2 * pairs); a pair-free target uses K = 1 - BPD.
    """
    if num_target_pairs > 0:
        k = 1.0 - bpd / (2.0 * num_target_pairs)
    else:
        k = 1.0 - bpd
    if k > 0:
        return k / (1.0 + delta_g)
    return k * (1.0 + delta_g)


def score(sequence: str, target: TargetStructure, oracle: FoldingOracle) -> ScoreRecord:
    if "N" in sequence:
        raise ValueError("cannot score an incomplete sequence")
    mfe = oracle.fold(sequence)
    target_energy = oracle.energy_of_structure(sequence, target.dotbracket)
    delta_g = target_energy - mfe.mfe_energy
    bpd = oracle.base_pair_distance(mfe.mfe_structure, target.dotbracket)
    return ScoreRecord(score_value(bpd, delta_g, target.num_target_pairs), bpd == 0, bpd,
                       delta_g, mfe.mfe_structure)


class ZobristTable:
    """One 64-bit random value per (index, move number) code."""

    def __init__(self, seed: int = 0x5EED, stride: int = CODE_STRIDE):
        rng = np.random.default_rng(seed)
        values = rng.integers(0, 2**64, size=stride * MAX_MOVE_NUMBER, dtype=np.uint64)
        self.stride = stride
        self._values = [int(v) for v in values]

    def value(self, code: int) -> int:
        return self._values[code]

    def key(self, index: int, number: int) -> int:
        return self._values[index + self.stride * number]


def state_hash(moves, table: ZobristTable) -> int:
    """XOR of the random values of the played (history-free) move codes."""
    h = 0
    for code in moves:
        h ^= table.value(code)
    return h


@dataclass
class ScoreCache:
    """Terminal-state hash -> ScoreRecord.

    Collisions are accepted; with ``paranoid=True`` the sequence is stored
    and a mismatching hit is recomputed instead.
    """

    paranoid: bool = False
    entries: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    oracle_calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def lookup(self, key: int, sequence: str) -> Optional[ScoreRecord]:
        entry = self.entries.get(key)
        if entry is None:
            return None
        if self.paranoid and entry[1] != sequence:
            return None
        return entry[0]

    def get_or_score(self, key: int, sequence: str, target: TargetStructure,
                     oracle: FoldingOracle) -> ScoreRecord:
        record = self.lookup(key, sequence)
        if record is not None:
            self.hits += 1
            return record
        record = score(sequence, target, oracle)
        with self._lock:
            self.misses += 1
            self.oracle_calls += 1
            self.entries[key] = (record, sequence if self.paranoid else None)
        return record

    def stats(self) -> dict:
        total = self.hits + self.misses
        return {"hits": self.hits, "misses": self.misses, "oracle_calls": self.oracle_calls,
                "hit_rate": self.hits / total if total else 0.0, "entries": len(self.entries)}

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


def cached_score(moves, sequence: str, target: TargetStructure, cache: ScoreCache,
                 table: ZobristTable, oracle: Optional[FoldingOracle] = None) -> ScoreRecord:
    """Score a terminal sequence reached by ``moves`` (history-free codes)."""
    oracle = oracle if oracle is not None else NussinovOracle()
    return cache.get_or_score(state_hash(moves, table), sequence, target, oracle)
