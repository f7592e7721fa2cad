import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnamcs.fold import NussinovOracle
from rnamcs.scoring import ScoreCache, ZobristTable, cached_score, score, score_value, state_hash
from rnamcs.search import PlayoutEngine, code, stream_rng
from rnamcs.structure import parse_dot_bracket

from conftest import random_sequence


def test_score_value_examples():
    assert score_value(0, 0.0, 3) == 1.0
    assert score_value(2, 1.0, 4) == pytest.approx(0.375)
    assert score_value(8, 5.0, 4) == 0.0
    # negative K multiplies by (1 + dG)
    assert score_value(12, 1.0, 4) == pytest.approx(-1.0)


def test_zero_pair_target():
    assert score_value(0, 0.0, 0) == 1.0
    assert score_value(1, 0.0, 0) == 0.0
    assert score_value(2, 3.0, 0) == -4.0


def test_score_on_sequences():
    t = parse_dot_bracket("(((...)))")
    rec = score("GGGAAACCC", t, NussinovOracle())
    assert rec.solved and rec.score == 1 and rec.bpd == 0 and rec.delta_g == 0
    bad = score("AAAAAAAAA", t, NussinovOracle())
    assert not bad.solved and bad.bpd == 3 and bad.delta_g == 30
    assert bad.score == pytest.approx(0.5 / 31)
    with pytest.raises(ValueError):
        score("GGGANACCC", t, NussinovOracle())


@given(st.integers(1, 20), st.integers(0, 40), st.just(0.0) | st.floats(1e-6, 50))
@settings(max_examples=300, deadline=None)
def test_score_bounded_and_monotone(pairs, bpd, dg):
    s = score_value(bpd, dg, pairs)
    assert s <= 1
    assert (s == 1) == (bpd == 0 and dg == 0)
    assert score_value(bpd + 1, dg, pairs) <= s


def test_score_one_exactly_on_solved():
    rng = random.Random(3)
    t = parse_dot_bracket("((((....))))")
    oracle = NussinovOracle()
    for _ in range(300):
        rec = score(random_sequence(rng, t.length), t, oracle)
        assert (rec.score == 1) == rec.solved
        if rec.solved:
            assert rec.bpd == 0


def test_state_hash_properties():
    z = ZobristTable()
    a, b = code(3, 1), code(7, 4)
    assert state_hash([], z) == 0
    assert state_hash([a, b], z) == state_hash([b, a], z)
    assert state_hash([a, b, b], z) == state_hash([a], z)
    assert ZobristTable().value(a) == z.value(a)
    assert ZobristTable(seed=1).value(a) != z.value(a)
    assert 0 <= z.value(a) < 2**64


def test_cached_score_hit_and_miss():
    t = parse_dot_bracket("(...)")
    z = ZobristTable()
    cache = ScoreCache()
    oracle = NussinovOracle()
    moves = [code(0, 0), code(1, 0), code(2, 2), code(3, 0)]
    first = cached_score(moves, "GAGAC", t, cache, z, oracle)
    assert (cache.hits, cache.misses, oracle.calls) == (0, 1, 1)
    second = cached_score(moves, "GAGAC", t, cache, z, oracle)
    assert second is first and (cache.hits, oracle.calls) == (1, 1)
    # another move order reaching the same assignment shares the entry
    cached_score(moves[::-1], "GAGAC", t, cache, z, oracle)
    assert len(cache.entries) == 1 and oracle.calls == 1


def test_paranoid_cache_detects_collision():
    t = parse_dot_bracket("(...)")
    cache = ScoreCache(paranoid=True)
    oracle = NussinovOracle()
    cache.get_or_score(42, "GAAAC", t, oracle)
    rec = cache.get_or_score(42, "AAAAA", t, oracle)
    assert oracle.calls == 2 and not rec.solved
    plain = ScoreCache()
    plain.get_or_score(42, "GAAAC", t, oracle)
    assert plain.get_or_score(42, "AAAAA", t, oracle).solved  # collision accepted silently


def test_cache_bit_identical_over_playouts():
    t = parse_dot_bracket("((.((...))..((...)).))")
    cached = PlayoutEngine(t)
    for k in range(1000):
        r = cached.playout({}, stream_rng(11, k))
        fresh = score(r.sequence, t, NussinovOracle())
        assert r.record == fresh
        assert r.score.hex() == fresh.score.hex()
