"""Simplified-energy folding oracle.

Energies are a sum of per-pair terms (GC < AU < GU < 0) and a pair must
enclose at least ``min_hairpin`` unpaired bases.  The minimum-energy fold is
a Nussinov-style dynamic program compiled with numba.

Anything with ``fold``, ``energy_of_structure`` and ``base_pair_distance``
methods can stand in for :class:`NussinovOracle`.
"""

from __future__ import annotations

import functools
import threading
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numba
import numpy as np

from .structure import StructureError, pair_table, to_dot_bracket

_CODE = np.full(256, -1, dtype=np.int8)
for _k, _b in enumerate("AUGC"):
    _CODE[ord(_b)] = _k


@dataclass(frozen=True)
class EnergyModel:
    e_gc: float = -3.0
    e_au: float = -2.0
    e_gu: float = -1.0
    min_hairpin: int = 3
    penalty: float = 10.0

    def __post_init__(self):
        if not (self.e_gc <= self.e_au <= self.e_gu < 0):
            raise ValueError("pair energies must satisfy e_gc <= e_au <= e_gu < 0")
        if self.min_hairpin < 0:
            raise ValueError("min_hairpin must be >= 0")

    def pair_energy(self, a: str, b: str) -> Optional[float]:
        """Energy of pairing bases a and b, or None if they cannot pair."""
        ab = {a, b}
        if ab == {"G", "C"}:
            return self.e_gc
        if ab == {"A", "U"}:
            return self.e_au
        if ab == {"G", "U"}:
            return self.e_gu
        return None

    def matrix(self) -> np.ndarray:
        m = np.full((4, 4), np.inf)
        for i, a in enumerate("AUGC"):
            for j, b in enumerate("AUGC"):
                e = self.pair_energy(a, b)
                if e is not None:
                    m[i, j] = e
        return m


DEFAULT_MODEL = EnergyModel()


@functools.lru_cache(maxsize=None)
def _matrix(model: EnergyModel) -> np.ndarray:
    return model.matrix()


@dataclass(frozen=True)
class FoldOutcome:
    mfe_structure: str
    mfe_energy: float
    target_energy: Optional[float] = None
    delta_g: Optional[float] = None


@numba.njit(cache=True, nogil=True)
def _fold_pairs(codes, emat, min_hairpin):
    n = codes.shape[0]
    # F[i, j]: minimum energy of the half-open interval [i, j)
    F = np.zeros((n + 1, n + 1))
    for length in range(1, n + 1):
        for i in range(0, n - length + 1):
            j = i + length
            best = F[i + 1, j]
            ci = codes[i]
            for k in range(i + min_hairpin + 1, j):
                e = emat[ci, codes[k]]
                if e < np.inf:
                    cand = e + F[i + 1, k] + F[k + 1, j]
                    if cand < best:
                        best = cand
            F[i, j] = best

    partner = np.full(n, -1, dtype=np.int64)
    stack_i = np.empty(n + 1, dtype=np.int64)
    stack_j = np.empty(n + 1, dtype=np.int64)
    stack_i[0] = 0
    stack_j[0] = n
    top = 1
    while top > 0:
        top -= 1
        i = stack_i[top]
        j = stack_j[top]
        if j - i < 2:
            continue
        best = F[i, j]
        ci = codes[i]
        paired = False
        for k in range(i + min_hairpin + 1, j):
            e = emat[ci, codes[k]]
            if e < np.inf:
                if e + F[i + 1, k] + F[k + 1, j] == best:
                    partner[i] = k
                    partner[k] = i
                    stack_i[top] = i + 1
                    stack_j[top] = k
                    top += 1
                    stack_i[top] = k + 1
                    stack_j[top] = j
                    top += 1
                    paired = True
                    break
        if not paired:
            stack_i[top] = i + 1
            stack_j[top] = j
            top += 1
    return F[0, n], partner


def _encode(sequence: str) -> np.ndarray:
    raw = np.frombuffer(sequence.encode("ascii", "replace"), dtype=np.uint8)
    codes = _CODE[raw]
    if codes.size and codes.min() < 0:
        bad = sequence[int(np.argmin(codes))]
        raise ValueError(f"illegal base {bad!r} in sequence")
    return codes


def fold(sequence: str, model: EnergyModel = DEFAULT_MODEL) -> FoldOutcome:
    """Canonical minimum-energy fold.

    Ties are broken in favour of pairing, then of the smallest partner k
    for the leftmost open position.
    """
    codes = _encode(sequence)
    if codes.size == 0:
        return FoldOutcome("", 0.0)
    energy, partner = _fold_pairs(codes, _matrix(model), model.min_hairpin)
    return FoldOutcome(to_dot_bracket(partner.tolist()), float(energy))


def energy_of_structure(sequence: str, structure: str, model: EnergyModel = DEFAULT_MODEL) -> float:
    """Energy of ``sequence`` forced into ``structure``.

    Non-complementary pairs and pairs enclosing fewer than ``min_hairpin``
    bases each cost ``model.penalty`` instead of failing.
    """
    if len(sequence) != len(structure):
        raise ValueError("sequence and structure lengths differ")
    total = 0.0
    for i, j in enumerate(pair_table(structure)):
        if j <= i:
            continue
        e = model.pair_energy(sequence[i], sequence[j])
        if e is None or j - i - 1 < model.min_hairpin:
            total += model.penalty
        else:
            total += e
    return total


def _pair_set(structure: str) -> set[tuple[int, int]]:
    return {(i, j) for i, j in enumerate(pair_table(structure)) if j > i}


def base_pair_distance(s1: str, s2: str) -> int:
    """Size of the symmetric difference of the two pair sets."""
    if len(s1) != len(s2):
        raise StructureError("structures have different lengths")
    return len(_pair_set(s1) ^ _pair_set(s2))


class FoldingOracle(Protocol):
    def fold(self, sequence: str) -> FoldOutcome: ...

    def energy_of_structure(self, sequence: str, structure: str) -> float: ...

    def base_pair_distance(self, s1: str, s2: str) -> int: ...


@dataclass
class NussinovOracle:
    """Built-in oracle; ``calls`` counts folds."""

    model: EnergyModel = DEFAULT_MODEL
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def fold(self, sequence: str) -> FoldOutcome:
        with self._lock:
            self.calls += 1
        return fold(sequence, self.model)

    def energy_of_structure(self, sequence: str, structure: str) -> float:
        return energy_of_structure(sequence, structure, self.model)

    def base_pair_distance(self, s1: str, s2: str) -> int:
        return base_pair_distance(s1, s2)

    def evaluate(self, sequence: str, target: str) -> FoldOutcome:
        mfe = self.fold(sequence)
        target_energy = self.energy_of_structure(sequence, target)
        return FoldOutcome(mfe.mfe_structure, mfe.mfe_energy, target_energy,
                           target_energy - mfe.mfe_energy)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()
