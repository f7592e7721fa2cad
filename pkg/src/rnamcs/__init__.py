"""Monte Carlo search (NRPA, GNRPA, NMCS, UCT) for RNA inverse folding."""

from .bias import DEFAULT_TABLES, BiasTables, beta, nemo_playout_distribution
from .fold import DEFAULT_MODEL, EnergyModel, FoldOutcome, NussinovOracle, base_pair_distance, energy_of_structure, fold
from .scoring import ScoreCache, ScoreRecord, ZobristTable, cached_score, score, state_hash
from .search import PlayoutEngine, PlayoutResult, Search, SearchConfig, code
from .structure import MoveSlot, StructureError, TargetStructure, legal_moves, parse_dot_bracket, read_puzzles

__version__ = "0.1.0"
