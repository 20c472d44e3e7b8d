from __future__ import annotations

import random
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_maximal_matches
from msr_audit.matching import (
    FrequencyArray,
    MaximalMatch,
    frequency_array,
    longest_common_substring_len,
    maximal_common_substrings,
    sum_arrays,
)

token_lists = st.lists(st.sampled_from("abc"), max_size=14)


def test_known_matches_small_example():
    ref = "the cat sat on the mat".split()
    gen = "the cat on the mat".split()
    assert maximal_common_substrings(ref, gen) == [
        MaximalMatch(length=2, pos_ref=0, pos_gen=0),  # "the cat"
        MaximalMatch(length=1, pos_ref=0, pos_gen=3),  # lone "the"
        MaximalMatch(length=3, pos_ref=3, pos_gen=2),  # "on the mat"
        MaximalMatch(length=1, pos_ref=4, pos_gen=0),  # lone "the"
    ]


def test_inserted_word_splits_a_match():
    assert maximal_common_substrings("a b c d".split(), "a b x c d".split()) == [
        MaximalMatch(2, 0, 0),
        MaximalMatch(2, 2, 3),
    ]


def test_identical_distinct_sequences_single_match():
    tokens = [f"w{i}" for i in range(30)]
    assert maximal_common_substrings(tokens, tokens) == [MaximalMatch(30, 0, 0)]


def test_disjoint_sequences_no_matches():
    assert maximal_common_substrings(["a", "b"], ["c", "d"]) == []


def test_empty_inputs():
    assert maximal_common_substrings([], ["a"]) == []
    assert maximal_common_substrings(["a"], []) == []
    assert maximal_common_substrings([], []) == []


def test_repeated_token_yields_every_occurrence_pair():
    matches = maximal_common_substrings(["x", "y", "x"], ["x"])
    assert matches == [MaximalMatch(1, 0, 0), MaximalMatch(1, 2, 0)]


def test_matches_are_sorted_and_unique_by_position():
    rng = random.Random(7)
    ref = [rng.choice("ab") for _ in range(50)]
    gen = [rng.choice("ab") for _ in range(50)]
    matches = maximal_common_substrings(ref, gen)
    keys = [(m.pos_ref, m.pos_gen) for m in matches]
    assert keys == sorted(keys)
    assert len(keys) == len(set(keys))


def test_oracle_equivalence_random_pairs():
    rng = random.Random(42)
    for _ in range(200):
        ref = [rng.choice("abcde") for _ in range(rng.randrange(0, 41))]
        gen = [rng.choice("abcde") for _ in range(rng.randrange(0, 41))]
        assert maximal_common_substrings(ref, gen) == oracle_maximal_matches(ref, gen)


@given(token_lists, token_lists)
def test_oracle_equivalence_property(ref, gen):
    assert maximal_common_substrings(ref, gen) == oracle_maximal_matches(ref, gen)


@given(token_lists, token_lists)
def test_every_match_is_maximal(ref, gen):
    for m in maximal_common_substrings(ref, gen):
        i, j, k = m.pos_ref, m.pos_gen, m.length
        assert k >= 1
        assert ref[i : i + k] == gen[j : j + k]
        if i > 0 and j > 0:
            assert ref[i - 1] != gen[j - 1]
        if i + k < len(ref) and j + k < len(gen):
            assert ref[i + k] != gen[j + k]


def test_longest_common_substring_len():
    assert longest_common_substring_len("a b c".split(), "b c d".split()) == 2
    assert longest_common_substring_len(["a"], ["b"]) == 0


def test_kernel_is_fast_on_512_tokens():
    rng = random.Random(3)
    ref = [f"t{rng.randrange(50)}" for _ in range(512)]
    gen = [f"t{rng.randrange(50)}" for _ in range(512)]
    maximal_common_substrings(ref, gen)  # warm-up
    best = min(
        _timed(lambda: maximal_common_substrings(ref, gen)) for _ in range(3)
    )
    assert best < 0.010, f"512-token match took {best * 1e3:.2f} ms"


def _timed(fn):
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def _m(*lengths):
    return [MaximalMatch(length=k, pos_ref=0, pos_gen=0) for k in lengths]


def test_frequency_array_threshold_semantics():
    arr = frequency_array(_m(5, 3, 12, 7), l_min=5, l_max=12)
    # matches >= k for k = 5..12: lengths {5, 7, 12} qualify progressively
    assert arr.counts == (3, 2, 2, 1, 1, 1, 1, 1)
    assert arr.l_min == 5 and arr.l_max == 12


def test_frequency_array_counts_above_l_max_once_per_threshold():
    arr = frequency_array(_m(40), l_min=5, l_max=8)
    assert arr.counts == (1, 1, 1, 1)


def test_frequency_array_ignores_short_matches():
    arr = frequency_array(_m(1, 2, 4), l_min=5, l_max=6)
    assert arr.counts == (0, 0)


def test_frequency_array_exact_mode():
    arr = frequency_array(_m(5, 5, 6, 12, 40), l_min=5, l_max=12, exact=True)
    assert arr.counts == (2, 1, 0, 0, 0, 0, 0, 1)  # 40 exceeds l_max: not counted


def test_frequency_array_threshold_counts_are_non_increasing():
    rng = random.Random(11)
    matches = _m(*[rng.randrange(1, 20) for _ in range(100)])
    counts = frequency_array(matches, l_min=2, l_max=15).counts
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_frequency_array_validates_bounds():
    with pytest.raises(ValueError):
        frequency_array([], l_min=0, l_max=5)
    with pytest.raises(ValueError):
        frequency_array([], l_min=6, l_max=5)


def test_frequency_array_dataclass_validation():
    with pytest.raises(ValueError):
        FrequencyArray(l_min=5, l_max=12, counts=(1, 2))  # wrong width
    with pytest.raises(ValueError):
        FrequencyArray(l_min=5, l_max=5, counts=(-1,))
    with pytest.raises(ValueError):
        FrequencyArray(l_min=0, l_max=3, counts=(0, 0, 0, 0))


def test_sum_arrays():
    a = FrequencyArray(5, 7, (3, 2, 1))
    b = FrequencyArray(5, 7, (1, 1, 0))
    assert sum_arrays([a, b]).counts == (4, 3, 1)
    assert sum_arrays([a]).counts == a.counts
    with pytest.raises(ValueError, match="empty"):
        sum_arrays([])
    with pytest.raises(ValueError, match="mismatch"):
        sum_arrays([a, FrequencyArray(5, 8, (1, 1, 0, 0))])


@given(st.lists(st.integers(min_value=1, max_value=30), max_size=40))
def test_threshold_array_is_suffix_sum_of_exact_array(lengths):
    matches = _m(*lengths)
    thresh = frequency_array(matches, 2, 10).counts
    exact = frequency_array(matches, 2, 10, exact=True).counts
    overflow = sum(1 for k in lengths if k > 10)
    tail = overflow
    for idx in range(len(exact) - 1, -1, -1):
        tail += exact[idx]
        assert thresh[idx] == tail
