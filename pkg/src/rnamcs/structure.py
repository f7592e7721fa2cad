"""Dot-bracket targets, loop contexts and move slots.

A target is split into *slots*: one per unpaired position and one per base
pair.  A search fills the slots one at a time, in a fixed order, choosing one
of 4 bases for an unpaired slot or one of 6 ordered pair combinations for a
paired slot.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

BASES = "AUGC"
PAIRS = ("GC", "CG", "AU", "UA", "GU", "UG")


class StructureError(ValueError):
    """Raised for unparseable dot-bracket targets or bad constraints."""


class SlotKind(enum.Enum):
    UNPAIRED = "unpaired"
    PAIRED = "paired"


class LoopKind(enum.Enum):
    HAIRPIN = "hairpin"
    INTERNAL = "internal"
    BULGE = "bulge"
    MULTILOOP = "multiloop"
    EXTERNAL = "external"
    STACK = "stack"


class JunctionRole(enum.Enum):
    LEFT_MOST = "left_most"
    RIGHT_MOST = "right_most"
    OTHER = "other"


class Move(NamedTuple):
    number: int
    bases: str


@dataclass(frozen=True)
class StructuralContext:
    loop_kind: LoopKind
    junction_role: Optional[JunctionRole] = None
    mismatch_partner: Optional[int] = None
    adjacent_pair_position: Optional[int] = None
    # branch helix touching a neighbouring helix with no unpaired base between
    adjacent_stack: bool = False


@dataclass(frozen=True)
class MoveSlot:
    kind: SlotKind
    positions: tuple[int, ...]
    context: StructuralContext
    allowed: tuple[int, ...]
    locked_choice: Optional[Move] = None

    @property
    def index(self) -> int:
        """Position used as the slot's index in move codes."""
        return self.positions[0]

    @property
    def candidates(self) -> tuple[str, ...]:
        return PAIRS if self.kind is SlotKind.PAIRED else tuple(BASES)

    @property
    def locked(self) -> bool:
        return self.locked_choice is not None


@dataclass(frozen=True)
class TargetStructure:
    dotbracket: str
    constraint: str
    pair_of: tuple[int, ...]  # -1 for unpaired positions
    slots: tuple[MoveSlot, ...]
    order: str = "string"
    slot_at: tuple[int, ...] = field(default=(), repr=False)

    @property
    def length(self) -> int:
        return len(self.dotbracket)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in enumerate(self.pair_of) if j > i]

    @property
    def num_target_pairs(self) -> int:
        return sum(1 for i, j in enumerate(self.pair_of) if j > i)

    def unlocked_slots(self) -> int:
        return sum(1 for s in self.slots if not s.locked)


def pair_table(text: str) -> list[int]:
    """Return the partner of every position (-1 if unpaired)."""
    partner = [-1] * len(text)
    stack: list[int] = []
    for pos, ch in enumerate(text):
        if ch == "(":
            stack.append(pos)
        elif ch == ")":
            if not stack:
                raise StructureError(f"unbalanced parentheses: unmatched ')' at {pos}")
            i = stack.pop()
            partner[i] = pos
            partner[pos] = i
        elif ch != ".":
            raise StructureError(f"illegal character {ch!r} at {pos}")
    if stack:
        raise StructureError(f"unbalanced parentheses: unmatched '(' at {stack[-1]}")
    return partner


def to_dot_bracket(pair_of) -> str:
    out = []
    for i, j in enumerate(pair_of):
        if j < 0:
            out.append(".")
        elif j > i:
            out.append("(")
        else:
            out.append(")")
    return "".join(out)


def _loop_members(pair_of, i: int, j: int):
    """Unpaired positions and branch pairs directly inside (i, j).

    Use i=-1, j=len for the exterior loop.
    """
    unpaired, branches = [], []
    k = i + 1
    while k < j:
        partner = pair_of[k]
        if partner > k:
            branches.append((k, partner))
            k = partner + 1
        else:
            unpaired.append(k)
            k += 1
    return unpaired, branches


def classify_contexts(pair_of) -> tuple[dict[int, StructuralContext], dict[tuple[int, int], StructuralContext]]:
    """Structural context of every unpaired position and every pair.

    Returns ``(unpaired_contexts, pair_contexts)``.  Multiloop branches are
    ranked 5' to 3' starting from the multiloop's closing pair, so the first
    branch is LEFT_MOST and the last one RIGHT_MOST.
    """
    n = len(pair_of)
    unpaired_ctx: dict[int, StructuralContext] = {}
    pair_ctx: dict[tuple[int, int], StructuralContext] = {}
    closes: dict[tuple[int, int], LoopKind] = {}
    roles: dict[tuple[int, int], tuple[JunctionRole, bool]] = {}

    loops = [(-1, n)] + [(i, j) for i, j in enumerate(pair_of) if j > i]
    for i, j in loops:
        unpaired, branches = _loop_members(pair_of, i, j)
        if i < 0:
            kind = LoopKind.EXTERNAL
        elif not branches:
            kind = LoopKind.HAIRPIN
        elif len(branches) == 1:
            k, l = branches[0]
            left, right = k - i - 1, j - l - 1
            if left == 0 and right == 0:
                kind = LoopKind.STACK
            elif left == 0 or right == 0:
                kind = LoopKind.BULGE
            else:
                kind = LoopKind.INTERNAL
        else:
            kind = LoopKind.MULTILOOP
        if i >= 0:
            closes[(i, j)] = kind

        if kind is LoopKind.MULTILOOP:
            for rank, (k, l) in enumerate(branches):
                if rank == 0:
                    role = JunctionRole.LEFT_MOST
                elif rank == len(branches) - 1:
                    role = JunctionRole.RIGHT_MOST
                else:
                    role = JunctionRole.OTHER
                prev_end = i if rank == 0 else branches[rank - 1][1]
                next_start = j if rank == len(branches) - 1 else branches[rank + 1][0]
                touching = k == prev_end + 1 or l + 1 == next_start
                roles[(k, l)] = (role, touching)

        for p in unpaired:
            unpaired_ctx[p] = _unpaired_context(pair_of, kind, i, j, branches, p)

    for (i, j), kind in closes.items():
        role, touching = None, False
        if (i, j) in roles:
            role, touching = roles[(i, j)]
        elif kind is LoopKind.MULTILOOP:
            role = JunctionRole.OTHER
        pair_ctx[(i, j)] = StructuralContext(kind, junction_role=role, adjacent_stack=touching)
    return unpaired_ctx, pair_ctx


def _unpaired_context(pair_of, kind, i, j, branches, p) -> StructuralContext:
    n = len(pair_of)
    if kind is LoopKind.HAIRPIN:
        if p == i + 1:
            return StructuralContext(kind, adjacent_pair_position=i)
        if p == j - 1:
            return StructuralContext(kind, adjacent_pair_position=j)
        return StructuralContext(kind)
    if kind is LoopKind.INTERNAL:
        k, l = branches[0]
        # outer closing pair wins for positions touching both pairs
        if p == i + 1:
            return StructuralContext(kind, mismatch_partner=j - 1, adjacent_pair_position=i)
        if p == j - 1:
            return StructuralContext(kind, mismatch_partner=i + 1, adjacent_pair_position=j)
        if p == k - 1:
            return StructuralContext(kind, mismatch_partner=l + 1, adjacent_pair_position=k)
        if p == l + 1:
            return StructuralContext(kind, mismatch_partner=k - 1, adjacent_pair_position=l)
        return StructuralContext(kind)
    if kind in (LoopKind.MULTILOOP, LoopKind.EXTERNAL):
        if p - 1 >= 0 and pair_of[p - 1] >= 0:
            return StructuralContext(kind, adjacent_pair_position=p - 1)
        if p + 1 < n and pair_of[p + 1] >= 0:
            return StructuralContext(kind, adjacent_pair_position=p + 1)
    return StructuralContext(kind)


def legal_moves(slot: MoveSlot) -> list[Move]:
    """Legal moves of a slot in canonical order (A,U,G,C) or (GC,CG,AU,UA,GU,UG)."""
    cands = slot.candidates
    return [Move(n, cands[n]) for n in slot.allowed]


def _allowed(candidates, positions, constraint) -> tuple[int, ...]:
    fixed = [constraint[p] for p in positions]
    allowed = []
    for number, bases in enumerate(candidates):
        if all(f == "N" or f == b for f, b in zip(fixed, bases)):
            allowed.append(number)
    return tuple(allowed)


def parse_dot_bracket(text: str, constraint: Optional[str] = None, order: str = "string") -> TargetStructure:
    """Parse a dot-bracket target.

    ``order`` is ``"string"`` (slots left to right, a pair at its opening
    position) or ``"nemo"`` (all pair slots first, then unpaired slots).
    """
    text = text.strip()
    if not text:
        raise StructureError("empty structure")
    if order not in ("string", "nemo"):
        raise StructureError(f"unknown slot order {order!r}")
    partner = pair_table(text)
    if constraint is None:
        constraint = "N" * len(text)
    constraint = constraint.strip().upper().replace("T", "U")
    if len(constraint) != len(text):
        raise StructureError(
            f"constraint length {len(constraint)} differs from structure length {len(text)}")
    bad = set(constraint) - set("AUGCN")
    if bad:
        raise StructureError(f"illegal constraint characters {''.join(sorted(bad))!r}")

    unpaired_ctx, pair_ctx = classify_contexts(partner)
    paired_slots, unpaired_slots, string_slots = [], [], []
    for pos, mate in enumerate(partner):
        if mate < 0:
            kind, positions, cands = SlotKind.UNPAIRED, (pos,), tuple(BASES)
            ctx = unpaired_ctx[pos]
        elif mate > pos:
            kind, positions, cands = SlotKind.PAIRED, (pos, mate), PAIRS
            ctx = pair_ctx[(pos, mate)]
        else:
            continue
        allowed = _allowed(cands, positions, constraint)
        if not allowed:
            fixed = "".join(constraint[p] for p in positions)
            raise StructureError(f"constraint {fixed!r} at positions {positions} allows no legal move")
        locked = Move(allowed[0], cands[allowed[0]]) if len(allowed) == 1 else None
        slot = MoveSlot(kind, positions, ctx, allowed, locked)
        string_slots.append(slot)
        (paired_slots if kind is SlotKind.PAIRED else unpaired_slots).append(slot)

    slots = tuple(string_slots) if order == "string" else tuple(paired_slots + unpaired_slots)
    slot_at = [0] * len(text)
    for t, slot in enumerate(slots):
        for p in slot.positions:
            slot_at[p] = t
    return TargetStructure(text, constraint, tuple(partner), slots, order, tuple(slot_at))


@dataclass(frozen=True)
class Puzzle:
    id: str
    structure: str
    constraint: Optional[str] = None
    line: int = 0

    def target(self, order: str = "string") -> TargetStructure:
        return parse_dot_bracket(self.structure, self.constraint, order)


def read_puzzles(path) -> list[Puzzle]:
    """Read ``id<TAB>dotbracket[<TAB>constraint]`` lines; '#' starts a comment.

    Every structure is parsed so errors surface with their line number.
    """
    puzzles = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise StructureError(f"line {lineno}: expected id<TAB>structure[<TAB>constraint]")
            constraint = fields[2] if len(fields) > 2 and fields[2].strip() else None
            puzzle = Puzzle(fields[0].strip(), fields[1].strip(), constraint, lineno)
            try:
                puzzle.target()
            except StructureError as exc:
                raise StructureError(f"line {lineno}: {exc}") from None
            puzzles.append(puzzle)
    return puzzles
