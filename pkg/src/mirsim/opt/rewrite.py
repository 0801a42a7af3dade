"""Peephole specialization of generic bitvector/integer operations.

Two rule families, applied to a local fixpoint:

  (a) cast_bv_from_generic<w>(cast_bv_to_generic<w>(x))  ->  x
  (b) a generic operation whose operand widths are all statically visible
      (operands are casts from fixed-width values, or literals) is replaced
      by its fixed-width variant; the result is re-wrapped in a
      cast_bv_to_generic so existing users still see a generic value, and
      rule (a) plus dead-code elimination clean those up.

`signed`/`unsigned` produce machine integers (wrapped in cast_i64_to_int);
`unsigned` only specializes below width 64 since the full range would not
fit.  Machine-integer narrowing of generic integer arithmetic lives in the
range analysis pass, which has the interval facts to justify it.
"""

from __future__ import annotations

from ..ir import (
    BvFixed,
    BvGeneric,
    IntGeneric,
    IntMachine,
    Literal,
    Op,
    Statement,
    VarRef,
    iter_statements,
)

I64 = IntMachine()


class _Namer:
    def __init__(self, func):
        self.taken = {p for p, _ in func.params}
        for block in func.blocks.values():
            self.taken.update(p for p, _ in block.params)
            self.taken.update(s.dest for s in block.stmts)
        self.n = 0

    def fresh(self, base):
        while True:
            name = "%s.s%d" % (base, self.n)
            self.n += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def _defs_of(func):
    return {stmt.dest: stmt for _, stmt in iter_statements(func)}


def _fixed_source(a, defs):
    """(width, operand) when `a` is statically a fixed-width bitvector:
    either a literal or the result of cast_bv_to_generic<w>."""
    if isinstance(a, Literal):
        if a.width is not None:
            return a.width, Literal(a.value, width=a.width, ty=BvFixed(a.width))
        return None
    d = defs.get(a.name)
    if d is not None and d.op.name == "cast_bv_to_generic":
        return d.op.static[0], d.args[0]
    return None


def _i64_source(a, defs):
    """Operand as a machine integer, if statically available."""
    if isinstance(a, Literal):
        if a.width is None and isinstance(a.value, int) and not isinstance(a.value, bool):
            if -(1 << 63) <= a.value < (1 << 63):
                return Literal(a.value, ty=I64)
        return None
    d = defs.get(a.name)
    if d is not None and d.op.name == "cast_i64_to_int":
        return d.args[0]
    return None


def _int_literal(a):
    if isinstance(a, Literal) and a.width is None and isinstance(a.value, int) \
            and not isinstance(a.value, bool):
        return a.value
    return None


BV_BINARY = {"add_bits", "sub_bits", "and_bits", "or_bits", "xor_bits"}
BV_SHIFTS = {"shiftl", "shiftr", "arith_shiftr"}
BV_EXTENDS = {"sign_extend", "zero_extend"}


def rewrite_bv_int(program, func):
    changes = 0
    namer = _Namer(func)
    while True:
        round_changes = _rewrite_round(func, namer)
        changes += round_changes
        if not round_changes:
            return changes


def _rewrite_round(func, namer):
    changes = 0
    defs = _defs_of(func)
    subs = {}

    for block in func.blocks.values():
        out = []
        for stmt in block.stmts:
            name = stmt.op.name
            replaced = _try_rewrite(stmt, defs, namer, subs, out)
            if replaced:
                changes += 1
            else:
                out.append(stmt)
        block.stmts = out

    if subs:
        from ..ir import substitute_operands

        substitute_operands(func, subs)
        changes += len(subs)
    return changes


def _try_rewrite(stmt, defs, namer, subs, out):
    """Emit replacement statements into `out` and/or record a substitution;
    returns True when `stmt` itself is consumed."""
    op = stmt.op
    name = op.name

    if name == "cast_bv_from_generic":
        src = defs.get(stmt.args[0].name) if isinstance(stmt.args[0], VarRef) else None
        if src is not None and src.op.name == "cast_bv_to_generic" \
                and src.op.static[0] == op.static[0]:
            subs[stmt.dest] = src.args[0]
            return True
        if isinstance(stmt.args[0], Literal) and stmt.args[0].width == op.static[0]:
            lit = stmt.args[0]
            subs[stmt.dest] = Literal(lit.value, width=lit.width, ty=BvFixed(op.static[0]))
            return True
        return False

    if name == "cast_int_to_i64":
        src = defs.get(stmt.args[0].name) if isinstance(stmt.args[0], VarRef) else None
        if src is not None and src.op.name == "cast_i64_to_int":
            subs[stmt.dest] = src.args[0]
            return True
        return False

    def wrap_bv(width, inner_op, inner_args):
        tmp = namer.fresh(stmt.dest)
        out.append(Statement(tmp, BvFixed(width), inner_op, inner_args, stmt.span))
        stmt.op = Op("cast_bv_to_generic", (width,))
        stmt.args = [VarRef(tmp)]
        out.append(stmt)

    def wrap_i64(inner_op, inner_args):
        tmp = namer.fresh(stmt.dest)
        out.append(Statement(tmp, I64, inner_op, inner_args, stmt.span))
        stmt.op = Op("cast_i64_to_int", ())
        stmt.args = [VarRef(tmp)]
        out.append(stmt)

    if name in BV_BINARY:
        s0 = _fixed_source(stmt.args[0], defs)
        s1 = _fixed_source(stmt.args[1], defs)
        if s0 and s1 and s0[0] == s1[0]:
            wrap_bv(s0[0], Op(name + "_bv_c", (s0[0],)), [s0[1], s1[1]])
            return True
        return False

    if name == "not_bits":
        s0 = _fixed_source(stmt.args[0], defs)
        if s0:
            wrap_bv(s0[0], Op("not_bits_bv_c", (s0[0],)), [s0[1]])
            return True
        return False

    if name == "eq_bits":
        s0 = _fixed_source(stmt.args[0], defs)
        s1 = _fixed_source(stmt.args[1], defs)
        if s0 and s1 and s0[0] == s1[0]:
            stmt.op = Op("eq_bits_bv_c", (s0[0],))
            stmt.args = [s0[1], s1[1]]
            out.append(stmt)
            return True
        return False

    if name in BV_SHIFTS:
        s0 = _fixed_source(stmt.args[0], defs)
        amount = _i64_source(stmt.args[1], defs)
        if s0 and amount is not None:
            wrap_bv(s0[0], Op(name + "_bv_c", (s0[0],)), [s0[1], amount])
            return True
        return False

    if name in BV_EXTENDS:
        s0 = _fixed_source(stmt.args[0], defs)
        target = _int_literal(stmt.args[1])
        if s0 and target is not None and s0[0] <= target <= 64:
            wrap_bv(target, Op(name + "_bv_c", (s0[0], target)), [s0[1]])
            return True
        return False

    if name == "vector_subrange":
        s0 = _fixed_source(stmt.args[0], defs)
        hi = _int_literal(stmt.args[1])
        lo = _int_literal(stmt.args[2])
        if s0 and hi is not None and lo is not None and 0 <= lo <= hi < s0[0]:
            wrap_bv(hi - lo + 1, Op("vector_subrange_bv_c", (s0[0], hi, lo)), [s0[1]])
            return True
        return False

    if name == "bitvector_concat":
        s0 = _fixed_source(stmt.args[0], defs)
        s1 = _fixed_source(stmt.args[1], defs)
        if s0 and s1 and s0[0] + s1[0] <= 64:
            wrap_bv(s0[0] + s1[0], Op("bitvector_concat_bv_c", (s0[0], s1[0])), [s0[1], s1[1]])
            return True
        return False

    if name == "bitvector_length":
        s0 = _fixed_source(stmt.args[0], defs)
        if s0:
            subs[stmt.dest] = Literal(s0[0], ty=IntGeneric())
            return True
        return False

    if name == "signed":
        s0 = _fixed_source(stmt.args[0], defs)
        if s0 and s0[0] <= 64:
            wrap_i64(Op("signed_bv_c", (s0[0],)), [s0[1]])
            return True
        return False

    if name == "unsigned":
        s0 = _fixed_source(stmt.args[0], defs)
        if s0 and s0[0] <= 63:
            wrap_i64(Op("unsigned_bv_c", (s0[0],)), [s0[1]])
            return True
        return False

    if name == "int_to_bits":
        length = _int_literal(stmt.args[0])
        v = _i64_source(stmt.args[1], defs)
        if length is not None and 1 <= length <= 64 and v is not None:
            wrap_bv(length, Op("int_to_bits_bv_c", (length,)), [v])
            return True
        return False

    return False
