import functools
import random

import pytest

# independent pair energies for the brute-force oracle
PAIR_ENERGY = {"GC": -3.0, "CG": -3.0, "AU": -2.0, "UA": -2.0, "GU": -1.0, "UG": -1.0}


@functools.lru_cache(maxsize=None)
def all_pair_sets(n, min_hairpin=3):
    """Every nested pair set on n positions whose pairs enclose >= min_hairpin bases."""
    def gen(lo, hi):
        if lo >= hi:
            yield ()
            return
        yield from gen(lo + 1, hi)
        for k in range(lo + min_hairpin + 1, hi):
            for inner in gen(lo + 1, k):
                for outer in gen(k + 1, hi):
                    yield ((lo, k),) + inner + outer

    return tuple(gen(0, n))


def to_text(n, pairs):
    s = ["."] * n
    for i, j in pairs:
        s[i], s[j] = "(", ")"
    return "".join(s)


def brute_force_fold(sequence, min_hairpin=3):
    """(min energy, all minimizing structures) by exhaustive enumeration."""
    best, argmin = 0.0, []
    for pairs in all_pair_sets(len(sequence), min_hairpin):
        energies = [PAIR_ENERGY.get(sequence[i] + sequence[j]) for i, j in pairs]
        if any(e is None for e in energies):
            continue
        e = sum(energies)
        if e < best:
            best, argmin = e, [to_text(len(sequence), pairs)]
        elif e == best:
            argmin.append(to_text(len(sequence), pairs))
    return best, argmin


def random_balanced(rng: random.Random, max_len: int = 30) -> str:
    """Random balanced dot-bracket string from a small grammar."""
    def gen(budget):
        if budget <= 0:
            return ""
        roll = rng.random()
        if roll < 0.4 or budget < 2:
            return "." + gen(budget - 1)
        inner = gen(rng.randint(0, budget - 2))
        return "(" + inner + ")" + gen(budget - 2 - len(inner))

    return gen(rng.randint(1, max_len))


def random_sequence(rng: random.Random, n: int) -> str:
    return "".join(rng.choice("AUGC") for _ in range(n))


@pytest.fixture
def rng():
    return random.Random(1234)
