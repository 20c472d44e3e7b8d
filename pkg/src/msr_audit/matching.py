"""Word-level maximal common substring enumeration and threshold-counted
frequency arrays comparing a reference segment with a generated completion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class MaximalMatch(NamedTuple):
    """A shared contiguous token run extendable in neither direction.

    ``pos_ref``/``pos_gen`` are the start token indices of the run in the
    reference and generated sequences; ``length`` is the run length in words.
    """

    length: int
    pos_ref: int
    pos_gen: int


@dataclass(frozen=True)
class FrequencyArray:
    """Match counts per length threshold k in [l_min, l_max].

    Under the default threshold semantics counts[k - l_min] is the number of
    maximal matches of length >= k, which makes the array non-increasing.
    """

    l_min: int
    l_max: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.l_min < 1:
            raise ValueError(f"l_min must be >= 1, got {self.l_min}")
        if self.l_min > self.l_max:
            raise ValueError(f"l_min ({self.l_min}) must be <= l_max ({self.l_max})")
        if len(self.counts) != self.l_max - self.l_min + 1:
            raise ValueError(
                f"counts has {len(self.counts)} entries, expected {self.l_max - self.l_min + 1}"
            )
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")


def _intern(ref_tokens: Sequence[str], gen_tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    ids: dict[str, int] = {}
    a = np.fromiter((ids.setdefault(t, len(ids)) for t in ref_tokens), np.int64, len(ref_tokens))
    b = np.fromiter((ids.setdefault(t, len(ids)) for t in gen_tokens), np.int64, len(gen_tokens))
    return a, b


def maximal_common_substrings(
    ref_tokens: Sequence[str], gen_tokens: Sequence[str]
) -> list[MaximalMatch]:
    """Enumerate every maximal common token run between two sequences.

    A run is maximal when it cannot be extended left or right at its pair of
    positions. Each distinct (pos_ref, pos_gen) start appears exactly once.
    Results are sorted by (pos_ref, pos_gen).

    Runs a dynamic-programming diagonal scan over the token equality matrix;
    O(len(ref) * len(gen)) time, vectorized row by row.
    """
    n_ref, n_gen = len(ref_tokens), len(gen_tokens)
    if n_ref == 0 or n_gen == 0:
        return []
    a, b = _intern(ref_tokens, gen_tokens)
    eq = a[:, None] == b[None, :]
    if not eq.any():
        return []

    # run[i, j] = length of the common run ending at (i, j); 0 where unequal.
    run = np.zeros((n_ref, n_gen), dtype=np.int32)
    run[0] = eq[0]
    prev = run[0]
    for i in range(1, n_ref):
        row_eq = eq[i]
        row = run[i]
        row[0] = row_eq[0]
        np.multiply(prev[:-1] + 1, row_eq[1:], out=row[1:], casting="unsafe")
        prev = row

    # A run ends at (i, j) when (i+1, j+1) is off-grid or unequal.
    continues = np.zeros((n_ref, n_gen), dtype=bool)
    continues[:-1, :-1] = eq[1:, 1:]
    end_i, end_j = np.nonzero(eq & ~continues)
    lengths = run[end_i, end_j]

    matches = [
        MaximalMatch(length=int(k), pos_ref=int(i - k + 1), pos_gen=int(j - k + 1))
        for i, j, k in zip(end_i, end_j, lengths)
    ]
    matches.sort(key=lambda m: (m.pos_ref, m.pos_gen))
    return matches


def longest_common_substring_len(ref_tokens: Sequence[str], gen_tokens: Sequence[str]) -> int:
    """Length in words of the longest contiguous run present in both sequences."""
    return max((m.length for m in maximal_common_substrings(ref_tokens, gen_tokens)), default=0)


def frequency_array(
    matches: Iterable[MaximalMatch],
    l_min: int,
    l_max: int,
    exact: bool = False,
) -> FrequencyArray:
    """Count matches per length threshold k in [l_min, l_max].

    By default counts[k - l_min] is the number of matches of length >= k.
    With ``exact=True`` it counts matches of length exactly k instead (the
    resulting array is then not necessarily non-increasing).
    """
    if l_min < 1 or l_min > l_max:
        raise ValueError(f"need 1 <= l_min <= l_max, got l_min={l_min}, l_max={l_max}")
    width = l_max - l_min + 1
    exact_counts = [0] * width
    at_least_max = 0
    for m in matches:
        if m.length >= l_max:
            at_least_max += 1
            if m.length == l_max:
                exact_counts[-1] += 1
        elif m.length >= l_min:
            exact_counts[m.length - l_min] += 1
    if exact:
        return FrequencyArray(l_min=l_min, l_max=l_max, counts=tuple(exact_counts))
    counts = [0] * width
    counts[-1] = at_least_max
    for i in range(width - 2, -1, -1):
        counts[i] = counts[i + 1] + exact_counts[i]
    return FrequencyArray(l_min=l_min, l_max=l_max, counts=tuple(counts))


def sum_arrays(arrays: Sequence[FrequencyArray]) -> FrequencyArray:
    """Element-wise sum of frequency arrays sharing the same thresholds."""
    if not arrays:
        raise ValueError("cannot sum an empty sequence of frequency arrays")
    first = arrays[0]
    for arr in arrays[1:]:
        if (arr.l_min, arr.l_max) != (first.l_min, first.l_max):
            raise ValueError(
                f"threshold mismatch: [{arr.l_min}, {arr.l_max}] vs [{first.l_min}, {first.l_max}]"
            )
    counts = tuple(sum(col) for col in zip(*(arr.counts for arr in arrays)))
    return FrequencyArray(l_min=first.l_min, l_max=first.l_max, counts=counts)
