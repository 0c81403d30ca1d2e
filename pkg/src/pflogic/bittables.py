"""Bit-parallel formula evaluation across every valuation of a finite frame.

A valuation of ``v`` variables over ``n`` worlds is an index in
``range(2**(v*n))``; bit ``i*n + w`` gives the truth of variable ``i`` at
world ``w``.  Truth tables pack 64 valuations per uint64 word, so checking a
formula on all valuations of a small frame is a handful of vectorised ops.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .formula import And, Bot, BoxF, BoxP, Formula, Imp, Not, Or, Top, Var

_ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def word_count(nbits: int) -> int:
    """Words needed for 2**nbits packed valuation slots."""
    return 1 if nbits < 6 else 1 << (nbits - 6)


def tail_mask(nbits: int) -> int:
    """Mask of the used bits in the last word (all-ones when it is full)."""
    if nbits >= 6:
        return 0xFFFFFFFFFFFFFFFF
    return (1 << (1 << nbits)) - 1


def _var_bit_column(nbits: int, b: int) -> np.ndarray:
    """Packed truth of bit ``b`` of the valuation index."""
    w = word_count(nbits)
    if b < 6:
        word = sum(1 << j for j in range(64) if (j >> b) & 1)
        return np.full(w, np.uint64(word), dtype=np.uint64)
    out = np.zeros(w, dtype=np.uint64)
    out[((np.arange(w) >> (b - 6)) & 1) == 1] = _ALL_ONES
    return out


def truth_tables(
    formula: Formula,
    n: int,
    succ_p: Sequence[Sequence[int]],
    succ_f: Sequence[Sequence[int]],
    var_index: Mapping[str, int],
    nbits: int,
) -> np.ndarray:
    """Truth of ``formula`` at every world under every valuation.

    Returns an ``(n, words)`` uint64 array; row ``w`` packs the truth values
    at world ``w``.  Bits beyond ``2**nbits`` are garbage and must be masked
    with :func:`tail_mask` before reading.
    """
    w = word_count(nbits)

    def rec(a: Formula) -> np.ndarray:
        if isinstance(a, Var):
            i = var_index[a.name]
            return np.stack([_var_bit_column(nbits, i * n + wd) for wd in range(n)])
        if isinstance(a, Top):
            return np.full((n, w), _ALL_ONES, dtype=np.uint64)
        if isinstance(a, Bot):
            return np.zeros((n, w), dtype=np.uint64)
        if isinstance(a, Not):
            return ~rec(a.sub)
        if isinstance(a, And):
            return rec(a.left) & rec(a.right)
        if isinstance(a, Or):
            return rec(a.left) | rec(a.right)
        if isinstance(a, Imp):
            return ~rec(a.left) | rec(a.right)
        succ = succ_p if isinstance(a, BoxP) else succ_f
        sub = rec(a.sub)
        out = np.empty((n, w), dtype=np.uint64)
        for wd in range(n):
            if succ[wd]:
                out[wd] = np.bitwise_and.reduce(sub[list(succ[wd])], axis=0)
            else:
                out[wd] = _ALL_ONES
        return out

    return rec(formula)


def holds_everywhere(tables: np.ndarray, nbits: int) -> bool:
    """True when every world row is all-true on every valuation."""
    combined = np.bitwise_and.reduce(tables, axis=0)
    mask = np.uint64(tail_mask(nbits))
    combined = combined.copy()
    combined[-1] &= mask
    full = np.full_like(combined, _ALL_ONES)
    full[-1] = mask
    return bool(np.array_equal(combined, full))


def first_false_index(row: np.ndarray, nbits: int) -> int | None:
    """Lowest valuation index where the packed row is false, if any."""
    bad = (~row).copy()
    bad[-1] &= np.uint64(tail_mask(nbits))
    nz = np.nonzero(bad)[0]
    if nz.size == 0:
        return None
    wd = int(nz[0])
    word = int(bad[wd])
    return wd * 64 + ((word & -word).bit_length() - 1)
