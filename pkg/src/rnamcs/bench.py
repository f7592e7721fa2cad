"""Benchmark harness: per-puzzle JSONL records and solved-count tables."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .bias import DEFAULT_TABLES, BiasTables
from .fold import DEFAULT_MODEL, EnergyModel
from .parallel import ALGOS, RunOutcome, root_parallel
from .search import SearchConfig
from .structure import Puzzle, read_puzzles

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(SearchConfig)}


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one run besides the puzzle."""

    algo: str = "gnrpa"
    config: SearchConfig = field(default_factory=SearchConfig)
    time_limit: Optional[float] = None
    workers: int = 1
    instances: int = 1
    order: str = "string"
    uct_c: float = 0.4
    budget: Optional[int] = None
    max_restarts: Optional[int] = None

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        cfg = self.config
        if self.algo in ("nmcs", "uct"):
            if cfg.beam > 1 or cfg.p > 1 or cfg.diversity:
                raise ValueError(f"--beam/--p/--diversity do not apply to {self.algo}")
            if self.workers > 1:
                raise ValueError(f"--workers does not apply to {self.algo}")
            if cfg.restart_divisor is not None:
                raise ValueError(f"--restart-divisor does not apply to {self.algo}")
        if self.algo != "uct" and self.budget is not None:
            raise ValueError("--budget only applies to uct")
        if self.algo == "uct" and self.budget is None and self.time_limit is None and self.instances == 1:
            raise ValueError("uct needs --budget or --time-limit")
        if cfg.restart_divisor is not None and self.time_limit is None and self.max_restarts is None:
            raise ValueError("restarts need --time-limit or --max-restarts")
        if self.workers < 1 or self.instances < 1:
            raise ValueError("workers and instances must be >= 1")
        if self.instances > 1 and self.time_limit is None:
            raise ValueError("--instances > 1 needs --time-limit")
        if self.instances > 1 and self.workers > 1:
            raise ValueError("combined root and leaf parallelism is not supported")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("algo", "time_limit", "workers", "instances", "order", "uct_c", "budget", "max_restarts")}
        d["config"] = self.config.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunSpec":
        data = dict(data)
        cfg = dict(data.pop("config", {}))
        for key in list(data):
            if key in _CONFIG_FIELDS:
                cfg[key] = data.pop(key)
        for key in ("n", "start_learning"):
            if isinstance(cfg.get(key), list):
                cfg[key] = tuple(cfg[key])
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown run options: {sorted(unknown)}")
        return cls(config=SearchConfig(**cfg), **data)


def run_puzzle(puzzle: Puzzle, spec: RunSpec, tables: BiasTables = DEFAULT_TABLES,
               model: EnergyModel = DEFAULT_MODEL) -> tuple[RunOutcome, dict]:
    target = puzzle.target(spec.order)
    kwargs = dict(algo=spec.algo, workers=spec.workers, tables=tables, model=model, uct_c=spec.uct_c,
                  budget=spec.budget, max_restarts=spec.max_restarts)
    outcome = root_parallel(puzzle.id, target, spec.config, spec.instances, time_limit=spec.time_limit,
                            **kwargs)
    record = {
        "id": puzzle.id,
        "structure": puzzle.structure,
        "constraint": puzzle.constraint,
        **spec.to_dict(),
        "energy_model": dataclasses.asdict(model),
        "solved": outcome.solved,
        "score": outcome.best_score,
        "sequence": outcome.sequence,
        "time": round(outcome.wall_time, 6),
        "solve_time": None if outcome.solve_time is None else round(outcome.solve_time, 6),
        "playouts": outcome.playouts,
        "solve_playouts": outcome.solve_playouts,
        "cache": {"hits": outcome.cache_hits, "misses": outcome.cache_misses,
                  "oracle_calls": outcome.oracle_calls, "hit_rate": outcome.cache_hit_rate},
        "winner": outcome.winner,
    }
    return outcome, record


# -- summaries ----------------------------------------------------------------

def _levels(value) -> str:
    return ".".join(str(v) for v in value) if isinstance(value, tuple) else str(value)


def bucket_label(edge: float, unit: str) -> str:
    value = int(edge) if float(edge).is_integer() else edge
    return f"{value}{'s' if unit == 'seconds' else 'p'}"


def bucket_counts(records: Iterable[dict], edges, unit: str = "seconds") -> list[int]:
    """Cumulative number of solves within each bucket edge."""
    key = "solve_time" if unit == "seconds" else "solve_playouts"
    stamps = [r[key] for r in records if r["solved"] and r[key] is not None]
    return [sum(1 for s in stamps if s <= edge) for edge in edges]


def summarize(grid: list[RunSpec], records: list[dict], edges=(), unit: str = "seconds") -> list[dict]:
    rows = []
    for k, spec in enumerate(grid):
        cell = [r for r in records if r["cell"] == k]
        cfg = spec.config
        row = {
            "Algo": spec.algo, "Level": cfg.level, "α": f"{cfg.alpha:.1f}", "N": _levels(cfg.n),
            "β": "yes" if cfg.use_beta and spec.algo != "nrpa" else "no", "P": cfg.p, "Beam": cfg.beam,
            "H": cfg.history, "Solved": sum(1 for r in cell if r["solved"]),
        }
        for edge, count in zip(edges, bucket_counts(cell, edges, unit)):
            row[bucket_label(edge, unit)] = count
        rows.append(row)
    return rows


def render_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    headers = list(rows[0])
    cells = [[str(r[h]) for h in headers] for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def render_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_suite(puzzles: list[Puzzle], grid: list[RunSpec], output: Optional[Path] = None,
              edges=(), unit: str = "seconds", tables: BiasTables = DEFAULT_TABLES,
              model: EnergyModel = DEFAULT_MODEL, progress=None) -> list[dict]:
    """Run every (config, puzzle) cell and return the summary rows.

    With ``output`` the directory receives ``results.jsonl`` (one record per
    run, written as runs finish), ``summary.txt`` and ``summary.csv``.
    """
    records = []
    sink = None
    if output is not None:
        output = Path(output)
        output.mkdir(parents=True, exist_ok=True)
        sink = open(output / "results.jsonl", "w", encoding="utf-8")
    try:
        for k, spec in enumerate(grid):
            for puzzle in puzzles:
                _, record = run_puzzle(puzzle, spec, tables, model)
                record["cell"] = k
                records.append(record)
                if sink is not None:
                    sink.write(json.dumps(record, ensure_ascii=False) + "\n")
                    sink.flush()
                if progress is not None:
                    progress(record)
    finally:
        if sink is not None:
            sink.close()
    rows = summarize(grid, records, edges, unit)
    if output is not None:
        (output / "summary.txt").write_text(render_table(rows), encoding="utf-8")
        (output / "summary.csv").write_text(render_csv(rows), encoding="utf-8")
    return rows


def load_grid(path) -> list[RunSpec]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("grid file must hold a JSON list of run specs")
    return [RunSpec.from_dict(d) for d in data]


# -- toy suite -----------------------------------------------------------------

def toy_suite_path() -> Path:
    return Path(str(resources.files("rnamcs") / "data" / "toy_suite.tsv"))


def load_toy_suite() -> list[Puzzle]:
    return read_puzzles(toy_suite_path())


def _stem(rng, inner, lo=2, hi=5):
    k = rng.randint(lo, hi)
    return "(" * k + inner + ")" * k


def _helix(rng, depth):
    roll = rng.random()
    if depth <= 0 or roll < 0.35:
        return _stem(rng, "." * rng.randint(3, 6))
    if roll < 0.7:
        left, right = rng.randint(0, 3), rng.randint(0, 3)
        if left == right == 0:
            left = 1
        return _stem(rng, "." * left + _helix(rng, depth - 1) + "." * right)
    parts = [_helix(rng, depth - 1) for _ in range(2)]
    gaps = ["." * rng.randint(0, 3) for _ in range(3)]
    return _stem(rng, gaps[0] + parts[0] + gaps[1] + parts[1] + gaps[2])


def random_structure(rng: random.Random, lo: int = 6, hi: int = 40) -> str:
    """Hairpins, stems with internal loops/bulges and multiloops."""
    while True:
        n_helices = 1 if rng.random() < 0.7 else 2
        body = "".join("." * rng.randint(0, 2) + _helix(rng, rng.randint(0, 2)) for _ in range(n_helices))
        body += "." * rng.randint(0, 2)
        if lo <= len(body) <= hi:
            return body


def find_witness(structure: str, seeds=range(5), model: EnergyModel = DEFAULT_MODEL) -> Optional[str]:
    """A sequence folding into ``structure``, found by level-2 GNRPA."""
    from .fold import NussinovOracle
    from .search import Search

    target = Puzzle("w", structure).target()
    for seed in seeds:
        search = Search(target, SearchConfig(level=2, n=100, seed=seed), oracle=NussinovOracle(model))
        best = search.run()
        if best is not None and best.solved:
            return best.sequence
    return None


# length strata of the shipped suite: (min, max, count)
TOY_STRATA = ((6, 12, 4), (13, 24, 6), (25, 40, 10))


def generate_toy_suite(seed: int = 7) -> list[tuple[str, str, str]]:
    """Return ``(id, structure, witness)`` for the 20 toy puzzles."""
    rng = random.Random(seed)
    out = []
    seen = set()
    for lo, hi, count in TOY_STRATA:
        found = 0
        while found < count:
            structure = random_structure(rng, lo, hi)
            if structure in seen:
                continue
            seen.add(structure)
            witness = find_witness(structure)
            if witness is None:
                continue
            found += 1
            out.append((f"toy{len(out) + 1:02d}", structure, witness))
    return out
