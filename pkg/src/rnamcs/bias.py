"""NEMO sampling weights and the GNRPA bias derived from them.

The bias of a move is the log of its table probability.  Zero entries are
floored to ``epsilon_floor`` and each row renormalized so every move stays
reachable.  Combined pair masses (GC/CG, AU/UA, GU/UG) are split evenly
between the two orientations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .structure import BASES, JunctionRole, LoopKind, MoveSlot, SlotKind

# raw table rows; paired rows are over (GC/CG, AU/UA, GU/UG), others over (A, U, G, C)
NEMO_ROWS: dict[str, tuple[float, ...]] = {
    "paired_general": (0.60, 0.33, 0.07),
    "paired_leftmost": (0.82, 0.11, 0.07),
    "paired_rightmost": (0.37, 0.56, 0.07),
    "unpaired_general": (0.93, 0.01, 0.05, 0.01),
    "mismatch_paired_A": (0.63, 0.00, 0.25, 0.12),
    "mismatch_paired_U": (0.00, 0.55, 0.09, 0.36),
    "mismatch_paired_G": (0.25, 0.12, 0.63, 0.00),
    "mismatch_paired_C": (0.55, 0.36, 0.00, 0.09),
    "internal_mismatch_N": (0.18, 0.04, 0.74, 0.04),
    "internal_mismatch_A": (0.44, 0.00, 0.44, 0.12),
    "internal_mismatch_U": (0.00, 0.67, 0.11, 0.22),
    "internal_mismatch_G": (0.67, 0.11, 0.22, 0.00),
    "internal_mismatch_C": (0.66, 0.17, 0.00, 0.17),
    "junction_external_mismatch": (0.97, 0.01, 0.01, 0.01),
}


def floor_row(row, epsilon: float) -> tuple[float, ...]:
    raw = [p if p > 0 else epsilon for p in row]
    total = sum(raw)
    return tuple(p / total for p in raw)


def split_pair_row(row) -> tuple[float, ...]:
    """(GC/CG, AU/UA, GU/UG) masses -> probabilities over GC,CG,AU,UA,GU,UG."""
    gc, au, gu = row
    return (gc / 2, gc / 2, au / 2, au / 2, gu / 2, gu / 2)


@dataclass(frozen=True, eq=False)
class BiasTables:
    epsilon_floor: float = 1e-4
    rows: dict = field(default_factory=lambda: dict(NEMO_ROWS))

    def __post_init__(self):
        missing = set(NEMO_ROWS) - set(self.rows)
        if missing:
            raise ValueError(f"missing bias rows: {sorted(missing)}")
        floored = {}
        for name, row in self.rows.items():
            width = 3 if name.startswith("paired_") else 4
            if len(row) != width or any(p < 0 for p in row) or sum(row) <= 0:
                raise ValueError(f"bad bias row {name}: {row}")
            row = floor_row(row, self.epsilon_floor)
            floored[name] = split_pair_row(row) if width == 3 else row
        object.__setattr__(self, "_probs", floored)

    def probs(self, name: str) -> tuple[float, ...]:
        return self._probs[name]

    @classmethod
    def from_file(cls, path) -> "BiasTables":
        """Read ``name = p1 p2 ...`` lines (fractions or percentages).

        Rows not listed keep their defaults; ``epsilon_floor = x`` is allowed.
        """
        rows = dict(NEMO_ROWS)
        epsilon = cls.epsilon_floor
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'name = values'")
                name, _, value = (part.strip() for part in line.partition("="))
                values = [float(v.rstrip("%")) / (100.0 if v.endswith("%") else 1.0)
                          for v in value.replace(",", " ").split()]
                if name == "epsilon_floor":
                    epsilon = values[0]
                elif name in NEMO_ROWS:
                    rows[name] = tuple(values)
                else:
                    raise ValueError(f"{path}:{lineno}: unknown bias row {name!r}")
        return cls(epsilon_floor=epsilon, rows=rows)


DEFAULT_TABLES = BiasTables()


def dependency(slot: MoveSlot) -> Optional[int]:
    """Position whose base the slot's weights may depend on."""
    if slot.kind is SlotKind.PAIRED:
        return None
    ctx = slot.context
    if ctx.loop_kind is LoopKind.INTERNAL and ctx.mismatch_partner is not None:
        return ctx.mismatch_partner
    if ctx.loop_kind is LoopKind.HAIRPIN and ctx.adjacent_pair_position is not None:
        return ctx.adjacent_pair_position
    return None


def row_name(slot: MoveSlot, partial: str) -> str:
    """Most specific table row for ``slot`` given the bases assigned so far."""
    ctx = slot.context
    if slot.kind is SlotKind.PAIRED:
        if not ctx.adjacent_stack:
            if ctx.junction_role is JunctionRole.LEFT_MOST:
                return "paired_leftmost"
            if ctx.junction_role is JunctionRole.RIGHT_MOST:
                return "paired_rightmost"
        return "paired_general"
    if ctx.loop_kind is LoopKind.INTERNAL and ctx.mismatch_partner is not None:
        base = partial[ctx.mismatch_partner]
        return f"internal_mismatch_{base if base in BASES else 'N'}"
    if ctx.loop_kind is LoopKind.HAIRPIN and ctx.adjacent_pair_position is not None:
        base = partial[ctx.adjacent_pair_position]
        if base in BASES:
            return f"mismatch_paired_{base}"
    if ctx.loop_kind in (LoopKind.MULTILOOP, LoopKind.EXTERNAL) and ctx.adjacent_pair_position is not None:
        return "junction_external_mismatch"
    return "unpaired_general"


def beta(slot: MoveSlot, move, partial: str, tables: BiasTables = DEFAULT_TABLES) -> float:
    """log of the table probability of ``move`` (a Move or move number)."""
    number = move if isinstance(move, int) else move.number
    return math.log(tables.probs(row_name(slot, partial))[number])


def beta_vector(slot: MoveSlot, partial: str, tables: BiasTables = DEFAULT_TABLES) -> tuple[float, ...]:
    """Bias of every legal move of ``slot``, in ``slot.allowed`` order."""
    probs = tables.probs(row_name(slot, partial))
    return tuple(math.log(probs[n]) for n in slot.allowed)


def nemo_playout_distribution(slot: MoveSlot, partial: str,
                              tables: BiasTables = DEFAULT_TABLES) -> tuple[float, ...]:
    """Sampling distribution over ``slot.allowed`` with zero learned weights."""
    probs = tables.probs(row_name(slot, partial))
    picked = [probs[n] for n in slot.allowed]
    total = sum(picked)
    return tuple(p / total for p in picked)


class BiasModel:
    """Per-target memo of bias vectors, keyed by slot and dependency base."""

    def __init__(self, slots, tables: BiasTables = DEFAULT_TABLES):
        self.slots = slots
        self.tables = tables
        self._deps = [dependency(s) for s in slots]
        self._memo: dict = {}

    def vector(self, t: int, partial) -> tuple[float, ...]:
        dep = self._deps[t]
        key = (t, partial[dep] if dep is not None else None)
        vec = self._memo.get(key)
        if vec is None:
            vec = beta_vector(self.slots[t], partial, self.tables)
            self._memo[key] = vec
        return vec


class ZeroBias:
    """Bias that is identically zero for every move."""

    def __init__(self, slots):
        self._zeros = [tuple(0.0 for _ in s.allowed) for s in slots]

    def vector(self, t: int, partial) -> tuple[float, ...]:
        return self._zeros[t]
