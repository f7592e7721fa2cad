import math
import random

import pytest

from rnamcs.bias import ZeroBias
from rnamcs.scoring import ScoreRecord
from rnamcs.search import (
    BeamItem, PlayoutEngine, PlayoutResult, Search, SearchConfig, code, select_beam, stream_rng,
)
from rnamcs.structure import parse_dot_bracket

from conftest import random_balanced

TOY = ["((((...))))", "((..((...))..))", ".((((....)).)).", "((.((...)).((...)).))", "(((...)))..(((...)))"]


def test_code_examples():
    assert code(10, 4) == 8010
    assert code(10, 4, predecessors=[2], history=1) == 32010
    assert code(0, 0) == 0
    assert code(10, 4, predecessors=[2, 3], history=2) == 32010 + 2000 * 36 * 3
    # history beyond H is ignored
    assert code(10, 4, predecessors=[2], history=0) == 8010
    with pytest.raises(ValueError):
        code(2000, 0)
    with pytest.raises(ValueError):
        code(0, 6)


def test_engine_codes_follow_history():
    t = parse_dot_bracket("(...)")
    engine = PlayoutEngine(t, use_beta=False, history=1)
    state = engine.root()
    assert engine.codes_at(state) == [code(0, n) for n in range(6)]
    engine.play(state, 3)
    assert engine.codes_at(state) == [code(1, n, [3], 1) for n in range(4)]


def test_config_validation():
    for bad in (dict(p=0), dict(beam=0), dict(history=3), dict(restart_divisor=0), dict(n=0), dict(level=-1)):
        with pytest.raises(ValueError):
            SearchConfig(**bad)
    cfg = SearchConfig(level=2, n=(100, 50), start_learning=(0, 4))
    assert (cfg.n_at(1), cfg.n_at(2), cfg.start_at(2)) == (100, 50, 4)


def test_uniform_playout_without_bias():
    t = parse_dot_bracket(".")
    engine = PlayoutEngine(t, use_beta=False)
    _, probs = engine.decision(engine.root(), {})
    assert probs == [0.25] * 4


def test_locked_single_slot():
    t = parse_dot_bracket(".", "A")
    engine = PlayoutEngine(t)
    rng = random.Random(0)
    state = rng.getstate()
    result = engine.playout({}, rng)
    assert result.sequence == "A" and result.moves == ()
    assert rng.getstate() == state  # forced slots consume no randomness


def test_probabilities_normalized(rng):
    for _ in range(30):
        t = parse_dot_bracket(random_balanced(rng, 30))
        engine = PlayoutEngine(t, history=rng.choice([0, 1, 2]))
        state = engine.root()
        policy = {c: rng.gauss(0, 3) for c in range(0, 12000, 7)}
        while state.t < len(engine.slots):
            codes, probs = engine.decision(state, policy)
            assert abs(sum(probs) - 1) < 1e-9
            engine.play(state, engine.legal[state.t][0], codes[0])


def test_adapt_two_move_example():
    t = parse_dot_bracket("(...)", "GAAAN")
    engine = PlayoutEngine(t, use_beta=False)
    assert engine.legal[0] == (0, 4)
    res = PlayoutResult((code(0, 0),), "GAAAC", 1.0, (0, 0, 0, 0))
    assert engine.adapt({}, res, 1.0) == {code(0, 0): 0.5, code(0, 4): -0.5}


def test_adapt_single_move_slots_unchanged():
    t = parse_dot_bracket("(...)", "GAAAC")
    engine = PlayoutEngine(t)
    res = engine.playout({}, random.Random(1))
    assert engine.adapt({}, res, 1.0) == {}


def test_adapt_raises_chosen_probability(rng):
    for _ in range(100):
        t = parse_dot_bracket(random_balanced(rng, 25))
        engine = PlayoutEngine(t, use_beta=rng.random() < 0.5, history=rng.choice([0, 1, 2]))
        policy = {c: rng.gauss(0, 1) for c in range(0, 2000 * 6 * 36, 37)}
        res = engine.playout(policy, rng)
        after = engine.adapt(policy, res, rng.uniform(0.1, 2.0))
        state = engine.root()
        for number in res.choices:
            legal = engine.legal[state.t]
            if len(legal) > 1:
                k = legal.index(number)
                before = engine.decision(state, policy)[1][k]
                assert engine.decision(state, after)[1][k] > before
            engine.play(state, number)


def test_level0_is_playout():
    t = parse_dot_bracket(TOY[1])
    search = Search(t, SearchConfig(level=0, seed=4))
    engine = PlayoutEngine(t)
    assert search.nrpa(0, {}, (0,)) == engine.playout({}, stream_rng(4, 0, 0, 0))


def _bests(target, config, **kwargs):
    search = Search(parse_dot_bracket(target), config, stop_on_solve=False, **kwargs)
    search.run()
    return search.best.sequence, search.trace


@pytest.mark.parametrize("target", TOY[:2])
def test_zero_bias_equals_nrpa(target):
    for seed in range(3):
        cfg = SearchConfig(level=1, n=30, seed=seed)
        t = parse_dot_bracket(target)
        zero = _bests(target, cfg, bias=ZeroBias(t.slots))
        plain = _bests(target, SearchConfig(level=1, n=30, seed=seed, use_beta=False))
        assert zero == plain


@pytest.mark.parametrize("target", TOY[:2])
def test_degenerate_beam_equals_plain(target):
    for seed in range(3):
        cfg = SearchConfig(level=2, n=(20, 3), seed=seed)
        assert _bests(target, cfg, always_beam=True) == _bests(target, cfg)


def test_diversity_filter_example():
    items = [BeamItem({}, PlayoutResult((), s, v, ())) for s, v in
             (("a", 0.7), ("b", 0.5), ("c", 0.5), ("d", 0.3))]
    kept = select_beam(items, 3, diversity=True)
    assert [it.best.score for it in kept] == [0.7, 0.5, 0.3]
    assert [it.best.score for it in select_beam(items, 3)] == [0.7, 0.5, 0.5]


def test_beam_playout_count():
    t = parse_dot_bracket(TOY[3])
    search = Search(t, SearchConfig(level=1, n=3, beam=8, p=4), stop_on_solve=False)
    search.run()
    assert search.engine.playouts == 3 * 32
    assert search.adapt_calls == 3 * 8


def test_trace_monotone_and_seed_determinism():
    t = parse_dot_bracket(TOY[4])
    cfg = SearchConfig(level=2, n=(20, 5), seed=9)
    a = Search(t, cfg, stop_on_solve=False)
    a.run()
    scores = [s for _, s in a.trace]
    assert scores == sorted(scores)
    b = Search(t, cfg, stop_on_solve=False)
    b.run()
    assert a.best == b.best and a.trace == b.trace


def test_run_requires_stop_criterion():
    t = parse_dot_bracket("(...)")
    with pytest.raises(ValueError):
        Search(t, SearchConfig(restart_divisor=5)).run()
    with pytest.raises(ValueError):
        Search(t, SearchConfig()).run(repeat=True)


class Scripted(Search):
    """Search whose level-0 calls return a fixed score sequence."""

    def __init__(self, scores, **cfg):
        super().__init__(parse_dot_bracket("..."), SearchConfig(**cfg), stop_on_solve=False)
        self.scores = list(scores)
        self.calls = 0
        self.adapt_at = []

    def playout(self, policy, key):
        value = self.scores[self.calls]
        self.calls += 1
        rec = ScoreRecord(value, value == 1.0, 0, 0.0)
        return PlayoutResult((), f"s{self.calls}", value, (0, 0, 0), rec)

    def adapt(self, policy, result):
        self.adapt_at.append(self.calls - 1)
        return policy


def test_restart_stagnation_returns():
    s = Scripted([0.5] * 10, restart_divisor=1.0)  # 3 slots -> limitRestart 3
    assert s.limit_restart == 3
    best = s.restarts(1)
    assert s.calls == 4 and best.score == 0.5
    assert best.sequence == "s4"  # ties refresh the stored sequence


def test_restart_strict_improvement_resets_last():
    s = Scripted([0.5, 0.5, 0.6, 0.6, 0.6, 0.6, 0.9], restart_divisor=1.0)
    assert s.restarts(1).score == 0.6
    assert s.calls == 6


def test_restart_start_learning_delay():
    # start 4, divisor 3, H 1; 3 slots / 3 -> limitRestart 1
    s = Scripted([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.6], restart_divisor=3.0, start_learning=4, history=1)
    assert s.limit_restart == 1
    s.restarts(1)
    assert s.adapt_at == [4, 5]

    s = Scripted([0.5] * 10, restart_divisor=1 / 3, start_learning=4)
    s.restarts(1)
    assert s.calls == 10 and s.adapt_at == [4, 5, 6, 7, 8]


def test_beam_restarts_stop_on_stagnation():
    t = parse_dot_bracket("(((...)))")
    search = Search(t, SearchConfig(beam=2, restart_divisor=2.0), stop_on_solve=False)
    search.restarts(1)
    assert search.engine.playouts > 0


def test_restart_driver_counts():
    t = parse_dot_bracket("((((...))))")
    search = Search(t, SearchConfig(restart_divisor=5.0, seed=1), stop_on_solve=False)
    search.run(max_restarts=3)
    assert search.restarts_done == 3


def test_simple_hairpin_solved_quickly():
    t = parse_dot_bracket("(((...)))")
    solved = 0
    for seed in range(100):
        search = Search(t, SearchConfig(level=1, n=100, seed=seed))
        best = search.run()
        if best.solved and search.trace[-1][0] <= 100:
            solved += 1
    assert solved >= 95
