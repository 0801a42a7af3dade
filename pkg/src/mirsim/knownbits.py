"""Known-bits abstract domain over 64-bit quantities.

A :class:`TristateNumber` describes a set of 64-bit values by classifying
every bit position as known-0, known-1, or unknown.  We store two 64-bit
patterns:

- ``value``: the values of the known bits,
- ``mask``: a 1 in every position whose bit is unknown.

A position may not be both known-1 and unknown, so ``value & mask == 0``
always holds.  The concretization is ``{c | c & ~mask == value}``, i.e. a
tristate number with k unknown bits describes 2**k concrete values.

The transfer functions are sound (the abstract result contains every
concrete result) and the bitwise ones are exact on fully-known inputs.  The
test suite verifies both claims against a brute-force oracle, exhaustively
at width 6; the formulas here are never trusted on their own.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TristateNumber:
    value: int
    mask: int

    def __post_init__(self):
        assert 0 <= self.value <= MASK64
        assert 0 <= self.mask <= MASK64
        assert self.value & self.mask == 0, "a bit cannot be both known-1 and unknown"

    @property
    def knowns(self):
        """Pattern with a 1 wherever the bit is known (either 0 or 1)."""
        return ~self.mask & MASK64

    @property
    def known_zeros(self):
        """Pattern with a 1 wherever the bit is known to be 0."""
        return ~(self.value | self.mask) & MASK64

    def is_constant(self):
        return self.mask == 0

    def contains(self, concrete):
        """Is the concrete 64-bit value a member of this set?"""
        return concrete & self.knowns == self.value

    def __str__(self):
        return "⟨%x,%x⟩" % (self.value, self.mask)


def from_constant(c):
    return TristateNumber(c & MASK64, 0)


def top():
    """The tristate number containing every 64-bit value."""
    return TristateNumber(0, MASK64)


TOP = top()


def join(a, b):
    """Smallest tristate number containing both operands' sets."""
    disagree = (a.value ^ b.value) | a.mask | b.mask
    return TristateNumber(a.value & b.value & ~disagree & MASK64, disagree)


def transfer_and(a, b):
    ones = a.value & b.value
    knowns = a.known_zeros | b.known_zeros | ones
    return TristateNumber(ones, ~knowns & MASK64)


def transfer_or(a, b):
    ones = a.value | b.value
    knowns = (a.known_zeros & b.known_zeros) | ones
    return TristateNumber(ones, ~knowns & MASK64)


def transfer_xor(a, b):
    mu = a.mask | b.mask
    return TristateNumber((a.value ^ b.value) & ~mu & MASK64, mu)


def transfer_not(a):
    return TristateNumber(a.known_zeros, a.mask)


def transfer_add(a, b):
    # Carry smearing: a carry out of any position that involves an unknown
    # bit makes all positions the carry can reach unknown.
    sv = (a.value + b.value) & MASK64
    sm = (a.mask + b.mask) & MASK64
    carries = ((sv + sm) ^ sv) & MASK64
    mu = a.mask | b.mask | carries
    return TristateNumber(sv & ~mu & MASK64, mu)


def transfer_sub(a, b):
    dv = (a.value - b.value) & MASK64
    borrows = ((dv + a.mask) ^ (dv - b.mask)) & MASK64
    mu = a.mask | b.mask | borrows
    return TristateNumber(dv & ~mu & MASK64, mu)


def transfer_shl_const(a, amount):
    assert 0 <= amount <= 63
    return TristateNumber((a.value << amount) & MASK64, (a.mask << amount) & MASK64)


def transfer_lshr_const(a, amount):
    assert 0 <= amount <= 63
    return TristateNumber(a.value >> amount, a.mask >> amount)


def transfer_ashr_const(a, amount):
    assert 0 <= amount <= 63
    # The sign bit smears into the vacated positions: known sign replicates,
    # unknown sign makes them unknown.
    fill = ((1 << amount) - 1) << (64 - amount) & MASK64
    value = a.value >> amount
    mask = a.mask >> amount
    if a.mask >> 63:
        mask |= fill
    elif a.value >> 63:
        value |= fill
    return TristateNumber(value & MASK64, mask & MASK64)


YES, NO, UNKNOWN = "yes", "no", "unknown"


def known_eq_zero(t, bitmask):
    """Are all bits of ``t`` selected by ``bitmask`` zero: yes/no/unknown.

    ``yes`` and ``no`` answers hold for every member of the concretization.
    """
    if t.value & bitmask:
        return NO
    if t.mask & bitmask:
        return UNKNOWN
    return YES
