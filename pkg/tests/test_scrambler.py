import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from seqthin.scrambler import ScrambleBuffer, scramble, selection_probability


def test_capacity_one_is_passthrough():
    data = list(range(50))
    assert list(scramble(data, 1, seed=0)) == data


def test_invalid_capacity():
    with pytest.raises(ValueError):
        ScrambleBuffer(0)


@settings(max_examples=100, deadline=None)
@given(
    data=st.lists(st.integers(-5, 5), max_size=60),
    capacity=st.integers(1, 20),
    seed=st.integers(0, 2**32 - 1),
)
def test_output_is_permutation(data, capacity, seed):
    out = list(scramble(data, capacity, seed=seed))
    assert sorted(out) == sorted(data)


def test_buffer_slot_count():
    buf = ScrambleBuffer(4, seed=1)
    assert buf.fill(range(10)) == 4
    for x in range(10, 30):
        buf.next(x)
        assert len(buf) == 4
    drained = [buf.next() for _ in range(4)]
    assert len(buf) == 0 and None not in drained
    assert buf.next() is None


def test_seeded_reproducibility():
    a = list(scramble(range(1000), 16, seed=42))
    b = list(scramble(range(1000), 16, seed=42))
    c = list(scramble(range(1000), 16, seed=43))
    assert a == b and a != c


def test_probability_law_sums_to_one():
    for B in (1, 2, 4, 7):
        for k in (1, 2, 3, 10):
            total = sum(selection_probability(k, i, B) for i in range(1, B + k + 5))
            assert total == pytest.approx(1.0, abs=1e-12)


def test_first_draw_two_slots():
    assert selection_probability(1, 1, 2) == 0.5
    rng = np.random.default_rng(0)
    hits = sum(next(iter(scramble("abc", 2, seed=int(s)))) == "a" for s in rng.integers(0, 2**31, 4000))
    assert abs(hits / 4000 - 0.5) < 3 * np.sqrt(0.25 / 4000)


def _third_output_counts(trials, B=4, k=3):
    counts = np.zeros(B + k, dtype=int)
    seeds = np.random.SeedSequence(7).spawn(trials)
    for ss in seeds:
        buf = ScrambleBuffer(B, seed=ss)
        buf.fill(range(1, B + 1))
        out = None
        for j in range(k):
            out = buf.next(B + 1 + j)
        counts[out] += 1
    return counts


def test_monte_carlo_selection_law():
    B, k, trials = 4, 3, 100_000
    counts = _third_output_counts(trials, B, k)
    p1 = selection_probability(k, 1, B)
    assert p1 == pytest.approx(0.140625)
    sigma = np.sqrt(p1 * (1 - p1) / trials)
    assert abs(counts[1] / trials - p1) < 3 * sigma
    # chi-square goodness of fit over every reachable input position
    probs = np.array([selection_probability(k, i, B) for i in range(1, B + k)])
    obs = counts[1 : B + k]
    assert obs.sum() == trials
    res = stats.chisquare(obs, probs * trials)
    assert res.pvalue > 1e-3
