"""Leaf-parallel playout batches and root-parallel independent searches."""

from __future__ import annotations

import multiprocessing as mp
import queue
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .baselines import repeated_nmcs, timed_uct
from .bias import DEFAULT_TABLES, BiasTables
from .fold import DEFAULT_MODEL, EnergyModel, NussinovOracle, fold
from .scoring import ScoreCache
from .search import PlayoutEngine, PlayoutResult, Search, SearchConfig, stream_rng
from .structure import TargetStructure

ALGOS = ("gnrpa", "nrpa", "diversity", "nmcs", "uct")


@dataclass
class RunOutcome:
    puzzle_id: str
    solved: bool
    best_score: float
    sequence: Optional[str]
    wall_time: float
    playouts: int
    oracle_calls: int
    cache_hits: int
    cache_misses: int
    solve_time: Optional[float] = None
    solve_playouts: Optional[int] = None
    winner: Optional[int] = None
    instances: int = 1
    shutdown_latency: Optional[float] = None

    @property
    def cache_hit_rate(self) -> float:
        total = self.cache_hits + self.cache_misses
        return self.cache_hits / total if total else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cache_hit_rate"] = self.cache_hit_rate
        return d


def _fork_context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


def warm_up(model: EnergyModel = DEFAULT_MODEL) -> None:
    """Compile the fold kernel before forking workers."""
    fold("GGGAAACCC", model)


# -- leaf parallelism ---------------------------------------------------------

_WORKER: dict = {}


def _init_leaf(target, use_beta, history, tables, model, seed):
    _WORKER["engine"] = PlayoutEngine(target, use_beta=use_beta, history=history, tables=tables,
                                      oracle=NussinovOracle(model), cache=ScoreCache())
    _WORKER["seed"] = seed


def _leaf_task(policy, keys):
    engine = _WORKER["engine"]
    cache = engine.cache
    before = (cache.hits, cache.misses, cache.oracle_calls)
    results = [engine.playout(policy, stream_rng(_WORKER["seed"], *k)) for k in keys]
    after = (cache.hits, cache.misses, cache.oracle_calls)
    return results, tuple(a - b for a, b in zip(after, before))


class LeafPool:
    """Runs the B x P playouts of a beam step on worker processes.

    Each beam element's P playouts form one task; results come back in
    (beam index, playout index) order.  Workers keep private score caches
    whose counters are folded into ``cache`` after each batch.
    """

    def __init__(self, target: TargetStructure, config: SearchConfig, workers: int,
                 tables: BiasTables = DEFAULT_TABLES, model: EnergyModel = DEFAULT_MODEL,
                 cache: Optional[ScoreCache] = None):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self.cache = cache
        warm_up(model)
        self._pool = ProcessPoolExecutor(
            max_workers=workers, mp_context=_fork_context(), initializer=_init_leaf,
            initargs=(target, config.use_beta, config.history, tables, model, config.seed))

    def __call__(self, policies, keys):
        futures = [self._pool.submit(_leaf_task, pol, ks) for pol, ks in zip(policies, keys)]
        batches = []
        for fut in futures:
            results, (hits, misses, calls) = fut.result()
            if self.cache is not None:
                self.cache.hits += hits
                self.cache.misses += misses
                self.cache.oracle_calls += calls
            batches.append(results)
        return batches

    def close(self):
        self._pool.shutdown(wait=True, cancel_futures=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def leaf_parallel_batch(search: Search, policies: list[dict], p: int, workers: int = 1,
                        path: tuple = (), iteration: int = 0, pool: Optional[LeafPool] = None):
    """Play ``p`` playouts under each policy, concurrently when ``workers > 1``.

    Returns one list of results per policy, in order; identical for every
    worker count.
    """
    keys = [[path + (iteration, b, k) for k in range(p)] for b in range(len(policies))]
    if workers == 1 and pool is None:
        return [[search.playout(pol, key) for key in ks] for pol, ks in zip(policies, keys)]
    own = pool is None
    pool = pool or LeafPool(search.target, search.config, workers, model=search.engine.oracle.model)
    try:
        batches = pool(policies, keys)
    finally:
        if own:
            pool.close()
    for results in batches:
        for r in results:
            search.engine.observe(r)
    return batches


# -- single timed runs ----------------------------------------------------------

def run_single(puzzle_id: str, target: TargetStructure, config: SearchConfig, *, algo: str = "gnrpa",
               time_limit: Optional[float] = None, workers: int = 1, tables: BiasTables = DEFAULT_TABLES,
               model: EnergyModel = DEFAULT_MODEL, cancel=None, uct_c: float = 0.4,
               budget: Optional[int] = None, max_restarts: Optional[int] = None) -> RunOutcome:
    """Run one search until solved, out of work or past ``time_limit`` seconds.

    With a time limit the level search (or NMCS call) is repeated with fresh
    policies until the deadline.
    """
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}")
    start = time.monotonic()
    deadline = start + time_limit if time_limit is not None else None
    oracle = NussinovOracle(model)
    cache = ScoreCache()
    solve = {}

    def mark(result: PlayoutResult):
        if result.solved and "time" not in solve:
            solve["time"] = time.monotonic() - start

    if algo in ("nmcs", "uct"):
        engine = PlayoutEngine(target, use_beta=config.use_beta, history=config.history, tables=tables,
                               oracle=oracle, cache=cache)
        engine.on_result = mark
        if algo == "nmcs":
            max_calls = None if (deadline is not None or cancel is not None) else 1
            repeated_nmcs(engine, config.level, seed=config.seed, deadline=deadline, cancel=cancel,
                          max_calls=max_calls)
        else:
            timed_uct(engine, c=uct_c, seed=config.seed, budget=budget, deadline=deadline, cancel=cancel)
    else:
        if algo == "nrpa":
            config = replace(config, use_beta=False)
        elif algo == "diversity":
            config = replace(config, diversity=True)
        pool = None
        if workers > 1:
            pool = LeafPool(target, config, workers, tables, model, cache)
        try:
            search = Search(target, config, tables=tables, oracle=oracle, cache=cache, deadline=deadline,
                            cancel=cancel, batch_runner=pool)
            base = search.engine.on_result

            def on_result(result: PlayoutResult):
                base(result)
                mark(result)

            search.engine.on_result = on_result
            search.run(repeat=deadline is not None or cancel is not None, max_restarts=max_restarts)
            engine = search.engine
        finally:
            if pool is not None:
                pool.close()
    best = engine.best
    solved = best is not None and best.solved
    return RunOutcome(
        puzzle_id=puzzle_id, solved=solved,
        best_score=best.score if best is not None else float("-inf"),
        sequence=best.sequence if best is not None else None,
        wall_time=time.monotonic() - start, playouts=engine.playouts,
        oracle_calls=cache.oracle_calls, cache_hits=cache.hits, cache_misses=cache.misses,
        solve_time=solve.get("time"), solve_playouts=engine.playouts if solved else None)


# -- root parallelism -------------------------------------------------------------

def instance_seed(seed: int, instance: int) -> int:
    """Instance 0 keeps the base seed; the others get derived seeds."""
    if instance == 0:
        return seed
    return int(np.random.SeedSequence([seed, instance]).generate_state(1)[0])


def _root_worker(instance, puzzle_id, target, config, kwargs, cancel, mailbox):
    try:
        outcome = run_single(puzzle_id, target, config, cancel=cancel, **kwargs)
    except BaseException as exc:  # report, never hang the parent
        mailbox.put((instance, None, repr(exc)))
        return
    if outcome.solved:
        cancel.set()
    mailbox.put((instance, outcome, time.monotonic()))


def root_parallel(puzzle_id: str, target: TargetStructure, config: SearchConfig, instances: int,
                  time_limit: Optional[float] = None, **kwargs) -> RunOutcome:
    """Race independent seeded searches; the first solution stops them all."""
    if instances < 1:
        raise ValueError("instances must be >= 1")
    if instances == 1:
        return run_single(puzzle_id, target, config, time_limit=time_limit, **kwargs)
    if time_limit is None:
        raise ValueError("root parallel runs need a time limit")
    warm_up(kwargs.get("model", DEFAULT_MODEL))
    ctx = _fork_context()
    cancel = ctx.Event()
    mailbox = ctx.Queue()
    start = time.monotonic()
    kwargs = dict(kwargs, time_limit=time_limit)
    procs = []
    for k in range(instances):
        cfg = replace(config, seed=instance_seed(config.seed, k))
        proc = ctx.Process(target=_root_worker, args=(k, puzzle_id, target, cfg, kwargs, cancel, mailbox),
                           daemon=True)
        proc.start()
        procs.append(proc)

    outcomes: dict[int, RunOutcome] = {}
    errors = []
    first_solve_at = None
    winner = None
    grace = time_limit + 30.0
    while len(outcomes) + len(errors) < instances:
        try:
            k, outcome, stamp = mailbox.get(timeout=max(0.05, start + grace - time.monotonic()))
        except queue.Empty:
            break
        if outcome is None:
            errors.append(stamp)
            continue
        outcomes[k] = outcome
        if outcome.solved and winner is None:
            winner, first_solve_at = k, stamp
            cancel.set()
    for proc in procs:
        proc.join(timeout=5.0)
        if proc.is_alive():
            proc.terminate()
            proc.join()
    done_at = time.monotonic()
    if not outcomes:
        raise RuntimeError(f"all root-parallel instances failed: {errors}")

    pick = winner if winner is not None else max(outcomes, key=lambda k: outcomes[k].best_score)
    best = outcomes[pick]
    return replace(
        best,
        wall_time=done_at - start,
        playouts=sum(o.playouts for o in outcomes.values()),
        oracle_calls=sum(o.oracle_calls for o in outcomes.values()),
        cache_hits=sum(o.cache_hits for o in outcomes.values()),
        cache_misses=sum(o.cache_misses for o in outcomes.values()),
        winner=pick, instances=instances,
        shutdown_latency=(done_at - first_solve_at) if first_solve_at is not None else None)
