"""Exhaustive and randomized verification of the tristate-number domain.

The width-6 tests enumerate all 3**6 = 729 abstract values (every bit
independently known-0 / known-1 / unknown) and check every transfer
function against brute force over the concretizations.  numpy is used only
to enumerate concrete pairs quickly; the abstract results always come from
the real implementation.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mirsim import knownbits as kb
from mirsim.knownbits import (
    MASK64,
    TristateNumber,
    from_constant,
    join,
    known_eq_zero,
    top,
)

WIDTH = 6
LOW = (1 << WIDTH) - 1


def all_tnums(width=WIDTH):
    limit = 1 << width
    res = []
    for mask in range(limit):
        free = ~mask & (limit - 1)
        value = free
        # iterate over all submasks of `free`, including 0
        while True:
            res.append(TristateNumber(value, mask))
            if value == 0:
                break
            value = (value - 1) & free
    return res


TNUMS = all_tnums()


def members(t, width=WIDTH):
    return [c for c in range(1 << width) if t.contains(c)]


def test_enumeration_is_complete():
    assert len(TNUMS) == 3**WIDTH
    sizes = sum(len(members(t)) for t in TNUMS)
    assert sizes == 4096  # sum over tnums of 2**popcount(mask)


# ---------------------------------------------------------------------------
# spec'd point values


def test_from_constant():
    t = from_constant(0b1010)
    assert (t.value, t.mask) == (0b1010, 0)
    assert t.is_constant()


def test_join_of_two_constants():
    # brute-force minimal tnum containing {4, 6} is (0b100, 0b010)
    t = join(from_constant(0b100), from_constant(0b110))
    assert (t.value, t.mask) == (0b100, 0b010)


def test_join_with_top_absorbs():
    t = join(TristateNumber(0b101, 0b010), top())
    assert (t.value, t.mask) == (0, MASK64)


def test_and_with_constant_mask():
    t = kb.transfer_and(top(), from_constant(0b011))
    assert (t.value, t.mask) == (0, 0b011)


def test_add_constants():
    assert kb.transfer_add(from_constant(2), from_constant(3)) == from_constant(5)


def test_alignment_masking_pattern():
    # masking any value with ...1000 makes the low 3 bits known zero
    t = kb.transfer_and(top(), from_constant(MASK64 & ~0b111))
    assert t.value == 0
    assert t.mask == MASK64 & ~0b111
    assert known_eq_zero(t, 0b111) == kb.YES


def test_known_eq_zero():
    aligned = kb.transfer_and(top(), from_constant(MASK64 & ~0b111))
    assert known_eq_zero(aligned, 0b111) == kb.YES
    assert known_eq_zero(from_constant(4), 0b100) == kb.NO
    assert known_eq_zero(top(), 0b1) == kb.UNKNOWN


# ---------------------------------------------------------------------------
# width-6 exhaustive soundness


def u64(x):
    return np.asarray(x, dtype=np.uint64)


# (tnum index, member) pairs, flattened: 4096 entries
PAIR_IDX = np.array(
    [i for i, t in enumerate(TNUMS) for _ in members(t)], dtype=np.intp
)
PAIR_X = u64([c for t in TNUMS for c in members(t)])

BINARY_OPS = [
    (kb.transfer_and, lambda x, y: x & y),
    (kb.transfer_or, lambda x, y: x | y),
    (kb.transfer_xor, lambda x, y: x ^ y),
    (kb.transfer_add, lambda x, y: x + y),
    (kb.transfer_sub, lambda x, y: x - y),
]


@pytest.mark.parametrize("transfer,concrete", BINARY_OPS, ids=lambda f: getattr(f, "__name__", "op"))
def test_exhaustive_soundness_binary(transfer, concrete):
    n = len(TNUMS)
    res_value = np.empty((n, n), dtype=np.uint64)
    res_nmask = np.empty((n, n), dtype=np.uint64)
    for i, a in enumerate(TNUMS):
        for j, b in enumerate(TNUMS):
            r = transfer(a, b)
            res_value[i, j] = r.value
            res_nmask[i, j] = ~r.mask & MASK64
    # check op(x, y) in gamma(transfer(a, b)) for every x in gamma(a), y in gamma(b)
    chunk = 512
    with np.errstate(over="ignore"):
        for lo in range(0, len(PAIR_X), chunk):
            hi = lo + chunk
            xs = PAIR_X[lo:hi, None]
            ys = PAIR_X[None, :]
            cx = concrete(xs, ys)
            rv = res_value[PAIR_IDX[lo:hi, None], PAIR_IDX[None, :]]
            rm = res_nmask[PAIR_IDX[lo:hi, None], PAIR_IDX[None, :]]
            assert ((cx & rm) == rv).all()


UNARY_OPS = [
    (kb.transfer_not, lambda x: ~x & MASK64),
] + [
    (lambda a, s=s: kb.transfer_shl_const(a, s), lambda x, s=s: (x << s) & MASK64)
    for s in range(0, 7)
] + [
    (lambda a, s=s: kb.transfer_lshr_const(a, s), lambda x, s=s: x >> s)
    for s in range(0, 7)
] + [
    (lambda a, s=s: kb.transfer_ashr_const(a, s), lambda x, s=s: ((x - ((x >> 63) << 64)) >> s) & MASK64)
    for s in range(0, 7)
]


@pytest.mark.parametrize("transfer,concrete", UNARY_OPS)
def test_exhaustive_soundness_unary(transfer, concrete):
    for i, a in enumerate(TNUMS):
        r = transfer(a)
        for x in members(a):
            assert r.contains(concrete(x)), (a, x, r)


@pytest.mark.parametrize("transfer,concrete", BINARY_OPS, ids=lambda f: getattr(f, "__name__", "op"))
def test_exactness_on_constants(transfer, concrete):
    with np.errstate(over="ignore"):
        for x in range(1 << WIDTH):
            for y in range(1 << WIDTH):
                r = transfer(from_constant(x), from_constant(y))
                expected = int(concrete(np.uint64(x), np.uint64(y)))
                assert r == from_constant(expected), (x, y)


def test_known_eq_zero_sound_exhaustive():
    for t in TNUMS:
        for bitmask in range(1 << WIDTH):
            verdict = known_eq_zero(t, bitmask)
            concrete = {c & bitmask == 0 for c in members(t)}
            if verdict == kb.YES:
                assert concrete == {True}
            elif verdict == kb.NO:
                assert concrete == {False}


# ---------------------------------------------------------------------------
# join is the exact least upper bound at width 6; lub of a semilattice is
# commutative, associative and idempotent, and we double-check associativity
# directly at width 4 plus randomized at full width.


def test_join_is_exact_lub_width6():
    for a in TNUMS:
        ms_a = members(a)
        for b in TNUMS:
            j = join(a, b)
            everyone = ms_a + members(b)
            ored = 0
            anded = LOW
            for c in everyone:
                ored |= c
                anded &= c
            agree = ~(ored ^ anded) & MASK64
            hull = TristateNumber(anded & agree, ~agree & MASK64)
            assert j == hull, (a, b)


def test_join_commutative_idempotent_width6():
    for a in TNUMS:
        assert join(a, a) == a
    for a in TNUMS:
        for b in TNUMS:
            assert join(a, b) == join(b, a)


def test_join_associative_width4_exhaustive():
    small = all_tnums(4)
    for a in small:
        for b in small:
            ab = join(a, b)
            for c in small:
                assert join(ab, c) == join(a, join(b, c))


# ---------------------------------------------------------------------------
# randomized 64-bit properties


def build_tnum_and_member(concrete, mask):
    return TristateNumber(concrete & ~mask & MASK64, mask & MASK64), concrete & MASK64


tnum_and_member = st.builds(
    build_tnum_and_member,
    st.integers(0, MASK64),
    st.integers(0, MASK64),
)


@given(tnum_and_member)
def test_hyp_contains(tm):
    t, x = tm
    assert t.contains(x)


@given(tnum_and_member, tnum_and_member)
def test_hyp_binary_sound(tm1, tm2):
    t1, x1 = tm1
    t2, x2 = tm2
    assert kb.transfer_and(t1, t2).contains(x1 & x2)
    assert kb.transfer_or(t1, t2).contains(x1 | x2)
    assert kb.transfer_xor(t1, t2).contains(x1 ^ x2)
    assert kb.transfer_add(t1, t2).contains((x1 + x2) & MASK64)
    assert kb.transfer_sub(t1, t2).contains((x1 - x2) & MASK64)


@given(tnum_and_member, st.integers(0, 63))
def test_hyp_shifts_sound(tm, amount):
    t, x = tm
    assert kb.transfer_shl_const(t, amount).contains((x << amount) & MASK64)
    assert kb.transfer_lshr_const(t, amount).contains(x >> amount)
    signed = x - ((x >> 63) << 64)
    assert kb.transfer_ashr_const(t, amount).contains((signed >> amount) & MASK64)


@given(tnum_and_member)
def test_hyp_not_sound(tm):
    t, x = tm
    assert kb.transfer_not(t).contains(~x & MASK64)


@given(tnum_and_member, tnum_and_member)
def test_hyp_join_contains_both(tm1, tm2):
    t1, x1 = tm1
    t2, x2 = tm2
    j = join(t1, t2)
    assert j.contains(x1)
    assert j.contains(x2)


@given(tnum_and_member, tnum_and_member, tnum_and_member)
def test_hyp_join_associative(tm1, tm2, tm3):
    a, b, c = tm1[0], tm2[0], tm3[0]
    assert join(join(a, b), c) == join(a, join(b, c))
