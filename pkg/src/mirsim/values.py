"""Runtime representations of model values and the builtin operation suite.

Two bitvector representations mirror the IR type split: fixed-width values
(width statically known, 1..64) and generic values (width only known at
runtime).  Integers likewise come as plain machine integers (held in the
signed 64-bit range) and generic integers with a runtime-switchable
small/big representation.

Creating a generic bitvector or a big integer bumps the allocation counter
of the owning :class:`Runtime`; that counter is the deterministic stand-in
for heap-allocation cost used throughout the benchmarks.
"""

from __future__ import annotations

I64_MIN = -(1 << 63)
I64_MAX = (1 << 63) - 1


class ModelTrap(Exception):
    """Raised when simulated code performs an illegal operation."""

    def __init__(self, message, coords=None, guest_pc=None):
        super().__init__(message)
        self.message = message
        self.coords = coords
        self.guest_pc = guest_pc


def mask(width):
    return (1 << width) - 1


def to_signed(bits, width):
    if bits >> (width - 1):
        return bits - (1 << width)
    return bits


def fits_i64(v):
    return I64_MIN <= v <= I64_MAX


class BvF:
    """Fixed-width bitvector value, width 1..64, bits masked to width."""

    __slots__ = ("width", "bits")

    def __init__(self, width, bits):
        self.width = width
        self.bits = bits & mask(width)

    def __eq__(self, other):
        return (
            isinstance(other, BvF)
            and self.width == other.width
            and self.bits == other.bits
        )

    def __hash__(self):
        return hash(("BvF", self.width, self.bits))

    def __repr__(self):
        return "BvF(%d, 0x%x)" % (self.width, self.bits)


class BvG:
    """Generic (runtime-width) bitvector value.  Create via Runtime.bv_generic."""

    __slots__ = ("width", "bits")

    def __init__(self, width, bits):
        self.width = width
        self.bits = bits

    def __eq__(self, other):
        return (
            isinstance(other, BvG)
            and self.width == other.width
            and self.bits == other.bits
        )

    def __hash__(self):
        return hash(("BvG", self.width, self.bits))

    def __repr__(self):
        return "BvG(%d, 0x%x)" % (self.width, self.bits)


class IntG:
    """Generic integer; `big` tells whether it was heap-allocated."""

    __slots__ = ("val", "big")

    def __init__(self, val, big):
        self.val = val
        self.big = big

    def __eq__(self, other):
        return isinstance(other, IntG) and self.val == other.val

    def __hash__(self):
        return hash(("IntG", self.val))

    def __repr__(self):
        return "IntG(%d)" % self.val


class UnionV:
    __slots__ = ("union", "tag", "payload")

    def __init__(self, union, tag, payload):
        self.union = union
        self.tag = tag  # variant index in declaration order
        self.payload = payload

    def __eq__(self, other):
        return (
            isinstance(other, UnionV)
            and self.union == other.union
            and self.tag == other.tag
            and self.payload == other.payload
        )

    def __repr__(self):
        return "UnionV(%s, %d, %r)" % (self.union, self.tag, self.payload)


class RecordV:
    __slots__ = ("record", "fields")

    def __init__(self, record, fields):
        self.record = record
        self.fields = fields  # tuple, declaration order

    def __eq__(self, other):
        return (
            isinstance(other, RecordV)
            and self.record == other.record
            and self.fields == other.fields
        )

    def __repr__(self):
        return "RecordV(%s, %r)" % (self.record, self.fields)


class Runtime:
    """Value factory with allocation accounting, one per simulator."""

    def __init__(self, int_switchable=True):
        self.int_switchable = int_switchable
        self.allocations = 0

    def bv_generic(self, width, bits):
        self.allocations += 1
        return BvG(width, bits)

    def int_generic(self, val):
        if self.int_switchable and fits_i64(val):
            return IntG(val, False)
        self.allocations += 1
        return IntG(val, True)

    def allocation_count(self):
        return self.allocations

    def reset_allocation_count(self):
        self.allocations = 0


# ---------------------------------------------------------------------------
# operation semantics
#
# Every implementation takes (rt, static_args, operand_values) and returns
# the result value.  The same table backs the interpreter, the constant
# folder and the trace executor, so the three can never disagree.



def _ival(x):
    """Numeric value of a generic-integer operand; traces drop the
    representation casts, so plain machine ints appear here too."""
    return x.val if isinstance(x, IntG) else x


def _want_width(a, b):
    if a.width != b.width:
        raise ModelTrap("bitvector width mismatch: %d vs %d" % (a.width, b.width))
    return a.width


def _shift_amount(n):
    if n < 0:
        raise ModelTrap("negative shift amount")
    return n


def op_add_bits(rt, s, a, b):
    w = _want_width(a, b)
    return rt.bv_generic(w, (a.bits + b.bits) & mask(w))


def op_sub_bits(rt, s, a, b):
    w = _want_width(a, b)
    return rt.bv_generic(w, (a.bits - b.bits) & mask(w))


def op_and_bits(rt, s, a, b):
    return rt.bv_generic(_want_width(a, b), a.bits & b.bits)


def op_or_bits(rt, s, a, b):
    return rt.bv_generic(_want_width(a, b), a.bits | b.bits)


def op_xor_bits(rt, s, a, b):
    return rt.bv_generic(_want_width(a, b), a.bits ^ b.bits)


def op_not_bits(rt, s, a):
    return rt.bv_generic(a.width, ~a.bits & mask(a.width))


def op_eq_bits(rt, s, a, b):
    _want_width(a, b)
    return a.bits == b.bits


def op_shiftl(rt, s, a, n):
    amt = _shift_amount(_ival(n))
    if amt >= a.width:
        return rt.bv_generic(a.width, 0)
    return rt.bv_generic(a.width, (a.bits << amt) & mask(a.width))


def op_shiftr(rt, s, a, n):
    amt = _shift_amount(_ival(n))
    if amt >= a.width:
        return rt.bv_generic(a.width, 0)
    return rt.bv_generic(a.width, a.bits >> amt)


def op_arith_shiftr(rt, s, a, n):
    amt = min(_shift_amount(_ival(n)), a.width)
    return rt.bv_generic(a.width, (to_signed(a.bits, a.width) >> amt) & mask(a.width))


def op_sign_extend(rt, s, a, n):
    n = _ival(n)
    if n < a.width:
        raise ModelTrap("sign_extend target %d below width %d" % (n, a.width))
    return rt.bv_generic(n, to_signed(a.bits, a.width) & mask(n))


def op_zero_extend(rt, s, a, n):
    n = _ival(n)
    if n < a.width:
        raise ModelTrap("zero_extend target %d below width %d" % (n, a.width))
    return rt.bv_generic(n, a.bits)


def op_vector_subrange(rt, s, a, hi, lo):
    hi, lo = _ival(hi), _ival(lo)
    if not (0 <= lo <= hi < a.width):
        raise ModelTrap("subrange [%d..%d] out of width %d" % (hi, lo, a.width))
    return rt.bv_generic(hi - lo + 1, (a.bits >> lo) & mask(hi - lo + 1))


def op_bitvector_concat(rt, s, a, b):
    return rt.bv_generic(a.width + b.width, (a.bits << b.width) | b.bits)


def op_bitvector_length(rt, s, a):
    return rt.int_generic(a.width)


def op_signed(rt, s, a):
    return rt.int_generic(to_signed(a.bits, a.width))


def op_unsigned(rt, s, a):
    return rt.int_generic(a.bits)


def op_add_int(rt, s, a, b):
    return rt.int_generic(_ival(a) + _ival(b))


def op_sub_int(rt, s, a, b):
    return rt.int_generic(_ival(a) - _ival(b))


def op_mul_int(rt, s, a, b):
    return rt.int_generic(_ival(a) * _ival(b))


def op_neg_int(rt, s, a):
    return rt.int_generic(-_ival(a))


def op_eq_int(rt, s, a, b):
    return _ival(a) == _ival(b)


def op_lt_int(rt, s, a, b):
    return _ival(a) < _ival(b)


def op_lteq_int(rt, s, a, b):
    return _ival(a) <= _ival(b)


def op_gt_int(rt, s, a, b):
    return _ival(a) > _ival(b)


def op_gteq_int(rt, s, a, b):
    return _ival(a) >= _ival(b)


def op_int_to_bits(rt, s, n, v):
    n = _ival(n)
    if n < 1:
        raise ModelTrap("int_to_bits length %d" % n)
    return rt.bv_generic(n, _ival(v) & mask(n))


def op_cast_bv_to_generic(rt, s, a):
    return rt.bv_generic(s[0], a.bits)


def op_cast_bv_from_generic(rt, s, a):
    if a.width != s[0]:
        raise ModelTrap("generic bitvector has width %d, expected %d" % (a.width, s[0]))
    return BvF(s[0], a.bits)


def op_cast_i64_to_int(rt, s, a):
    return rt.int_generic(_ival(a))


def op_cast_int_to_i64(rt, s, a):
    v = _ival(a)
    if not fits_i64(v):
        raise ModelTrap("integer %d out of 64-bit range" % v)
    return v


# specialized fixed-width / machine-int variants


def op_add_bits_bv_c(rt, s, a, b):
    return BvF(s[0], a.bits + b.bits)


def op_sub_bits_bv_c(rt, s, a, b):
    return BvF(s[0], a.bits - b.bits)


def op_and_bits_bv_c(rt, s, a, b):
    return BvF(s[0], a.bits & b.bits)


def op_or_bits_bv_c(rt, s, a, b):
    return BvF(s[0], a.bits | b.bits)


def op_xor_bits_bv_c(rt, s, a, b):
    return BvF(s[0], a.bits ^ b.bits)


def op_not_bits_bv_c(rt, s, a):
    return BvF(s[0], ~a.bits)


def op_eq_bits_bv_c(rt, s, a, b):
    return a.bits == b.bits


def op_shiftl_bv_c(rt, s, a, n):
    n = _ival(n)
    if _shift_amount(n) >= s[0]:
        return BvF(s[0], 0)
    return BvF(s[0], a.bits << n)


def op_shiftr_bv_c(rt, s, a, n):
    n = _ival(n)
    if _shift_amount(n) >= s[0]:
        return BvF(s[0], 0)
    return BvF(s[0], a.bits >> n)


def op_arith_shiftr_bv_c(rt, s, a, n):
    amt = min(_shift_amount(_ival(n)), s[0])
    return BvF(s[0], to_signed(a.bits, s[0]) >> amt)


def op_sign_extend_bv_c(rt, s, a):
    return BvF(s[1], to_signed(a.bits, s[0]))


def op_zero_extend_bv_c(rt, s, a):
    return BvF(s[1], a.bits)


def op_vector_subrange_bv_c(rt, s, a):
    w, hi, lo = s
    return BvF(hi - lo + 1, a.bits >> lo)


def op_bitvector_concat_bv_c(rt, s, a, b):
    return BvF(s[0] + s[1], (a.bits << s[1]) | b.bits)


def op_bitvector_length_bv_c(rt, s, a):
    return s[0]


def op_signed_bv_c(rt, s, a):
    return to_signed(a.bits, s[0])


def op_unsigned_bv_c(rt, s, a):
    return a.bits


def _check_i64(v):
    if not fits_i64(v):
        raise ModelTrap("machine integer overflow: %d" % v)
    return v


def op_add_int_i64(rt, s, a, b):
    return _check_i64(_ival(a) + _ival(b))


def op_sub_int_i64(rt, s, a, b):
    return _check_i64(_ival(a) - _ival(b))


def op_mul_int_i64(rt, s, a, b):
    return _check_i64(_ival(a) * _ival(b))


def op_neg_int_i64(rt, s, a):
    return _check_i64(-_ival(a))


def op_eq_int_i64(rt, s, a, b):
    return _ival(a) == _ival(b)


def op_lt_int_i64(rt, s, a, b):
    return _ival(a) < _ival(b)


def op_lteq_int_i64(rt, s, a, b):
    return _ival(a) <= _ival(b)


def op_gt_int_i64(rt, s, a, b):
    return _ival(a) > _ival(b)


def op_gteq_int_i64(rt, s, a, b):
    return _ival(a) >= _ival(b)


def op_int_to_bits_bv_c(rt, s, v):
    return BvF(s[0], _ival(v))


def op_eq_enum(rt, s, a, b):
    return a == b


# aggregate forms; static args carry names resolved by the verifier


def op_make_union(rt, s, payload):
    return UnionV(s[0], s[-1], payload)


def op_union_tag(rt, s, u):
    return u.tag


def op_union_field(rt, s, u):
    if u.tag != s[-1]:
        raise ModelTrap("union %s holds tag %d, expected %s" % (s[0], u.tag, s[1]))
    return u.payload


def op_record_make(rt, s, *fields):
    return RecordV(s[0], tuple(fields))


def op_record_get(rt, s, r):
    return r.fields[s[-1]]


def op_record_set(rt, s, r, v):
    fields = list(r.fields)
    fields[s[-1]] = v
    return RecordV(r.record, tuple(fields))


OP_IMPLS = {
    name[3:]: fn
    for name, fn in list(globals().items())
    if name.startswith("op_")
}
