"""Intra-procedural interval analysis over integer values and the narrowing
pass that retypes generic integers to machine integers where the analysis
proves the 64-bit signed range.

Intervals use None for an unbounded endpoint.  Block parameters join by
interval hull and widen to unbounded after three joins, so loops terminate.
Narrowing rewrites `add_int`/`sub_int`/`mul_int`/`neg_int` and the integer
comparisons to their machine variants; a rewritten producer keeps its users
working through an inserted cast_i64_to_int, which later rewrite rounds and
dead-code elimination collapse.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (
    Branch,
    Goto,
    IntGeneric,
    IntMachine,
    Literal,
    Op,
    Return,
    Statement,
    VarRef,
    is_generic,
    iter_statements,
    predecessors,
    reverse_postorder,
)

I64 = IntMachine()
INTG = IntGeneric()
I64_MIN = -(1 << 63)
I64_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class IntRange:
    lo: int | None  # None = -inf
    hi: int | None  # None = +inf

    def __post_init__(self):
        if self.lo is not None and self.hi is not None:
            assert self.lo <= self.hi

    def fits_i64(self):
        return (
            self.lo is not None
            and self.hi is not None
            and self.lo >= I64_MIN
            and self.hi <= I64_MAX
        )

    def __str__(self):
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "+inf" if self.hi is None else str(self.hi)
        return "%s..%s" % (lo, hi)


TOP = IntRange(None, None)
I64_RANGE = IntRange(I64_MIN, I64_MAX)


def exact(v):
    return IntRange(v, v)


def hull(a, b):
    lo = None if a.lo is None or b.lo is None else min(a.lo, b.lo)
    hi = None if a.hi is None or b.hi is None else max(a.hi, b.hi)
    return IntRange(lo, hi)


def add(a, b):
    lo = None if a.lo is None or b.lo is None else a.lo + b.lo
    hi = None if a.hi is None or b.hi is None else a.hi + b.hi
    return IntRange(lo, hi)


def sub(a, b):
    lo = None if a.lo is None or b.hi is None else a.lo - b.hi
    hi = None if a.hi is None or b.lo is None else a.hi - b.lo
    return IntRange(lo, hi)


def mul(a, b):
    if None in (a.lo, a.hi, b.lo, b.hi):
        return TOP
    products = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi]
    return IntRange(min(products), max(products))


def neg(a):
    return IntRange(
        None if a.hi is None else -a.hi,
        None if a.lo is None else -a.lo,
    )


def signed_range(width):
    return IntRange(-(1 << width - 1), (1 << width - 1) - 1)


def unsigned_range(width):
    return IntRange(0, (1 << width) - 1)


WIDEN_AFTER = 3


def _int_typed(ty):
    return isinstance(ty, (IntGeneric, IntMachine))


def analyze(program, func):
    """Forward interval analysis; returns {value name: IntRange} covering
    every integer-typed value of the function."""
    ranges = {}
    join_counts = {}

    def get(a):
        if isinstance(a, Literal):
            return exact(a.value)
        return ranges.get(a.name, TOP)

    def setr(name, r, joining=False):
        old = ranges.get(name)
        if old is None:
            ranges[name] = r
            return True
        if joining:
            new = hull(old, r)
        else:
            new = r
        if new == old:
            return False
        if joining:
            join_counts[name] = join_counts.get(name, 0) + 1
            if join_counts[name] >= WIDEN_AFTER:
                new = TOP
        ranges[name] = new
        return new != old

    for pname, pty in func.params:
        if isinstance(pty, IntMachine):
            ranges[pname] = I64_RANGE
        elif isinstance(pty, IntGeneric):
            ranges[pname] = TOP

    defs = {s.dest: s for _, s in iter_statements(func)}
    rpo = reverse_postorder(func)
    changed = True
    guard = 0
    while changed:
        changed = False
        guard += 1
        assert guard <= 4 * (len(defs) + 8), "range analysis diverged"
        for label in rpo:
            block = func.blocks[label]
            for stmt in block.stmts:
                if not _int_typed(stmt.ty):
                    continue
                if setr(stmt.dest, _transfer(stmt, defs, get)):
                    changed = True
            t = block.term
            if isinstance(t, Goto):
                target = func.blocks[t.label]
                for (pname, pty), arg in zip(target.params, t.args):
                    if _int_typed(pty):
                        if setr(pname, get(arg), joining=True):
                            changed = True
    return ranges


def _transfer(stmt, defs, get):
    name = stmt.op.name
    args = stmt.args
    if name == "add_int" or name == "add_int_i64":
        return add(get(args[0]), get(args[1]))
    if name == "sub_int" or name == "sub_int_i64":
        return sub(get(args[0]), get(args[1]))
    if name == "mul_int" or name == "mul_int_i64":
        return mul(get(args[0]), get(args[1]))
    if name == "neg_int" or name == "neg_int_i64":
        return neg(get(args[0]))
    if name == "signed_bv_c":
        return signed_range(stmt.op.static[0])
    if name == "unsigned_bv_c":
        return unsigned_range(stmt.op.static[0])
    if name == "signed":
        w = _generic_width(args[0], defs)
        return signed_range(w) if w else TOP
    if name == "unsigned":
        w = _generic_width(args[0], defs)
        return unsigned_range(w) if w else IntRange(0, None)
    if name == "bitvector_length":
        return IntRange(1, None)
    if name == "bitvector_length_bv_c":
        return exact(stmt.op.static[0])
    if name == "cast_i64_to_int":
        return get(args[0])
    if name == "cast_int_to_i64":
        r = get(args[0])
        lo = I64_MIN if r.lo is None else max(r.lo, I64_MIN)
        hi = I64_MAX if r.hi is None else min(r.hi, I64_MAX)
        if lo > hi:  # cast always traps; keep it typed but unhelpful
            return I64_RANGE
        return IntRange(lo, hi)
    if name == COPY_NAME:
        return get(args[0])
    if isinstance(stmt.ty, IntMachine):
        return I64_RANGE
    return TOP


COPY_NAME = "copy"


def _generic_width(a, defs):
    if isinstance(a, Literal):
        return a.width
    d = defs.get(a.name)
    if d is not None and d.op.name == "cast_bv_to_generic":
        return d.op.static[0]
    return None


# ---------------------------------------------------------------------------
# narrowing

NARROWABLE_ARITH = {
    "add_int": "add_int_i64",
    "sub_int": "sub_int_i64",
    "mul_int": "mul_int_i64",
    "neg_int": "neg_int_i64",
}
NARROWABLE_COMPARE = {
    "eq_int": "eq_int_i64",
    "lt_int": "lt_int_i64",
    "lteq_int": "lteq_int_i64",
    "gt_int": "gt_int_i64",
    "gteq_int": "gteq_int_i64",
}


class _Namer:
    def __init__(self, func):
        self.taken = {p for p, _ in func.params}
        for block in func.blocks.values():
            self.taken.update(p for p, _ in block.params)
            self.taken.update(s.dest for s in block.stmts)
        self.n = 0

    def fresh(self, base):
        while True:
            name = "%s.n%d" % (base, self.n)
            self.n += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def narrow(program, func, ranges=None):
    """Rewrite generic-integer operations whose ranges fit a machine integer
    to the _i64 variants.  Returns the number of rewrites."""
    if ranges is None:
        ranges = analyze(program, func)
    changes = 0
    namer = _Namer(func)
    defs = {s.dest: s for _, s in iter_statements(func)}

    def i64_operand(a, out, base):
        """Rewrite an IntGeneric operand into an I64 one, or None."""
        if isinstance(a, Literal):
            if isinstance(a.value, int) and I64_MIN <= a.value <= I64_MAX:
                return Literal(a.value, ty=I64)
            return None
        d = defs.get(a.name)
        if d is not None and d.op.name == "cast_i64_to_int":
            return d.args[0]
        r = ranges.get(a.name, TOP)
        if r.fits_i64():
            tmp = namer.fresh(a.name)
            out.append(Statement(tmp, I64, Op("cast_int_to_i64"), [a]))
            return VarRef(tmp)
        return None

    for block in func.blocks.values():
        out = []
        for stmt in block.stmts:
            name = stmt.op.name
            if name in NARROWABLE_ARITH:
                result_range = ranges.get(stmt.dest, TOP)
                pre = []
                narrowed = [i64_operand(a, pre, stmt.dest) for a in stmt.args]
                if result_range.fits_i64() and all(n is not None for n in narrowed):
                    out.extend(pre)
                    tmp = namer.fresh(stmt.dest)
                    out.append(
                        Statement(tmp, I64, Op(NARROWABLE_ARITH[name]), narrowed, stmt.span)
                    )
                    stmt.op = Op("cast_i64_to_int")
                    stmt.args = [VarRef(tmp)]
                    out.append(stmt)
                    ranges[tmp] = result_range
                    defs[tmp] = out[-2]
                    changes += 1
                    continue
            elif name in NARROWABLE_COMPARE:
                pre = []
                narrowed = [i64_operand(a, pre, stmt.dest) for a in stmt.args]
                if all(n is not None for n in narrowed):
                    out.extend(pre)
                    stmt.op = Op(NARROWABLE_COMPARE[name])
                    stmt.args = narrowed
                    out.append(stmt)
                    changes += 1
                    continue
            out.append(stmt)
        block.stmts = out
    return changes


def format_ranges(func, ranges):
    lines = []
    for label, block in func.blocks.items():
        for pname, pty in block.params:
            if pname in ranges:
                lines.append("%s:%s:%s %s" % (func.name, label, pname, ranges[pname]))
        for stmt in block.stmts:
            if stmt.dest in ranges:
                lines.append(
                    "%s:%s:%s %s" % (func.name, label, stmt.dest, ranges[stmt.dest])
                )
    return "\n".join(lines)
