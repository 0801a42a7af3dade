"""Function-local optimization passes: constant folding, dead code
elimination, common subexpression elimination, scalar replacement of
aggregates.

Every pass mutates the given function in place and returns a change count;
the public single-function entry points in :mod:`mirsim.opt` wrap them with
a clone.
"""

from __future__ import annotations

from ..ir import (
    BOOL,
    Branch,
    BvFixed,
    BvGeneric,
    EnumT,
    Goto,
    IntGeneric,
    IntMachine,
    Literal,
    Return,
    UnitT,
    VarRef,
    dominators,
    is_pure,
    is_removable,
    iter_statements,
    predecessors,
    reverse_postorder,
    substitute_operands,
)
from ..values import BvF, BvG, IntG, ModelTrap, OP_IMPLS, Runtime
from ..interp import literal_value

# aggregate results have no literal form, and state/call results are not
# compile-time computable
UNFOLDABLE = frozenset(
    ["make_union", "record_make", "record_set", "union_field", "read_reg",
     "write_reg", "mem_read", "mem_write", "fetch", "call", "halt_check",
     "copy"]
)


def value_to_literal(value, ty):
    if isinstance(value, BvF):
        return Literal(value.bits, width=value.width, ty=ty)
    if isinstance(value, BvG):
        return Literal(value.bits, width=value.width, ty=ty)
    if isinstance(value, IntG):
        return Literal(value.val, ty=ty)
    if isinstance(value, bool):
        return Literal(value, ty=ty)
    if isinstance(value, int):
        return Literal(value, ty=ty)
    if value is None:
        return Literal(None, ty=ty)
    return None


def constant_fold(program, func):
    """Evaluate pure statements whose operands are all literals; rewrite
    branches on literal conditions into gotos."""
    changes = 0
    scratch = Runtime()
    while True:
        subs = {}
        for block in func.blocks.values():
            kept = []
            for stmt in block.stmts:
                name = stmt.op.name
                if (
                    name in UNFOLDABLE
                    or not is_pure(stmt.op)
                    or not all(isinstance(a, Literal) for a in stmt.args)
                ):
                    kept.append(stmt)
                    continue
                try:
                    vals = [literal_value(scratch, a) for a in stmt.args]
                    result = OP_IMPLS[name](scratch, stmt.op.static, *vals)
                except ModelTrap:
                    kept.append(stmt)  # folding must not hide the trap
                    continue
                lit = value_to_literal(result, stmt.ty)
                if lit is None:
                    kept.append(stmt)
                    continue
                subs[stmt.dest] = lit
                changes += 1
            block.stmts = kept
        for block in func.blocks.values():
            t = block.term
            if isinstance(t, Branch) and isinstance(t.cond, Literal):
                target = t.then_label if t.cond.value else t.else_label
                if not func.blocks[target].params:
                    block.term = Goto(target, [], t.span)
                    changes += 1
        if not subs:
            break
        substitute_operands(func, subs)
    return changes


def dead_code_elim(program, func):
    """Remove unreachable blocks, unused pure statements, and unused block
    parameters.  State accesses, calls and checked casts always stay."""
    changes = 0
    while True:
        round_changes = 0
        reachable = set(reverse_postorder(func))
        for label in list(func.blocks):
            if label not in reachable:
                del func.blocks[label]
                round_changes += 1

        used = set()

        def mark(a):
            if isinstance(a, VarRef):
                used.add(a.name)

        # transitive liveness from effectful statements and terminators
        defs = {}
        for block, stmt in iter_statements(func):
            defs[stmt.dest] = stmt
        roots = []
        for block in func.blocks.values():
            for stmt in block.stmts:
                if not is_removable(stmt.op):
                    roots.append(stmt)
            t = block.term
            if isinstance(t, Goto):
                for a in t.args:
                    mark(a)
            elif isinstance(t, Branch):
                mark(t.cond)
            elif isinstance(t, Return):
                mark(t.value)
        work = list(used)
        for stmt in roots:
            for a in stmt.args:
                if isinstance(a, VarRef) and a.name not in used:
                    used.add(a.name)
                    work.append(a.name)
        while work:
            name = work.pop()
            stmt = defs.get(name)
            if stmt is None:
                continue
            for a in stmt.args:
                if isinstance(a, VarRef) and a.name not in used:
                    used.add(a.name)
                    work.append(a.name)

        for block in func.blocks.values():
            kept = []
            for stmt in block.stmts:
                if stmt.dest in used or not is_removable(stmt.op):
                    kept.append(stmt)
                else:
                    round_changes += 1
            block.stmts = kept

        # unused block parameters (and their goto arguments)
        preds = predecessors(func)
        for label, block in func.blocks.items():
            if not block.params:
                continue
            drop = [
                i
                for i, (pname, _) in enumerate(block.params)
                if pname not in used
            ]
            if not drop:
                continue
            for i in reversed(drop):
                del block.params[i]
                for p in preds[label]:
                    del func.blocks[p].term.args[i]
                round_changes += 1

        changes += round_changes
        if not round_changes:
            return changes


def _operand_key(a):
    if isinstance(a, VarRef):
        return ("v", a.name)
    ty = a.ty
    if isinstance(ty, BvFixed):
        tytag = "bv%d" % ty.width
    elif isinstance(ty, BvGeneric):
        tytag = "bvg%d" % (a.width or 0)
    elif isinstance(ty, IntMachine):
        tytag = "i64"
    elif isinstance(ty, IntGeneric):
        tytag = "i"
    elif isinstance(ty, EnumT):
        tytag = "enum:" + ty.name
    elif isinstance(ty, UnitT):
        tytag = "unit"
    else:
        tytag = "bool"
    return ("l", tytag, a.value)


def cse(program, func):
    """Dominator-scoped common subexpression elimination over pure ops."""
    changes = 0
    idom = dominators(func)
    children = {}
    for label in func.blocks:
        if label != func.entry and label in idom:
            children.setdefault(idom[label], []).append(label)

    subs = {}

    def resolve(a):
        if isinstance(a, VarRef) and a.name in subs:
            return subs[a.name]
        return a

    def walk(label, available):
        nonlocal changes
        block = func.blocks[label]
        added = []
        kept = []
        for stmt in block.stmts:
            stmt.args = [resolve(a) for a in stmt.args]
            if not is_pure(stmt.op):
                kept.append(stmt)
                continue
            key = (stmt.op, tuple(_operand_key(a) for a in stmt.args))
            prev = available.get(key)
            if prev is not None:
                subs[stmt.dest] = VarRef(prev)
                changes += 1
            else:
                available[key] = stmt.dest
                added.append(key)
                kept.append(stmt)
        block.stmts = kept
        t = block.term
        if isinstance(t, Goto):
            t.args = [resolve(a) for a in t.args]
        elif isinstance(t, Branch):
            t.cond = resolve(t.cond)
        elif isinstance(t, Return):
            t.value = resolve(t.value)
        for child in children.get(label, []):
            walk(child, available)
        for key in added:
            del available[key]

    walk(func.entry, {})
    substitute_operands(func, subs)
    return changes


ESCAPING_USES = frozenset(
    ["call", "write_reg", "mem_write", "make_union", "record_make", "record_set"]
)


def scalar_replace(program, func):
    """Forward aggregate construction into its local uses: union_tag becomes
    the tag constant, union_field/record_get become the stored operand.  An
    aggregate that escapes (call/return/state/aggregate payload or a control
    edge) is left alone."""
    changes = 0
    uses = {}
    for block, stmt in iter_statements(func):
        for a in stmt.args:
            if isinstance(a, VarRef):
                uses.setdefault(a.name, []).append(stmt)
    escaped = set()
    for block in func.blocks.values():
        t = block.term
        operands = []
        if isinstance(t, Goto):
            operands = t.args
        elif isinstance(t, Return):
            operands = [t.value]
        for a in operands:
            if isinstance(a, VarRef):
                escaped.add(a.name)

    subs = {}
    for block, stmt in iter_statements(func):
        op = stmt.op
        if op.name not in ("make_union", "record_make"):
            continue
        dest = stmt.dest
        if dest in escaped:
            continue
        ok = True
        for use in uses.get(dest, []):
            uname = use.op.name
            if uname in ESCAPING_USES:
                ok = False
            elif uname == "union_tag":
                pass
            elif uname == "union_field":
                if op.name != "make_union" or use.op.static[:2] != op.static[:2]:
                    ok = False  # mismatched variant would trap at runtime
            elif uname == "record_get":
                if op.name != "record_make":
                    ok = False
            else:
                ok = False
        if not ok:
            continue
        for use in uses.get(dest, []):
            uname = use.op.name
            if uname == "union_tag":
                subs[use.dest] = Literal(op.static[2], ty=IntMachine())
                changes += 1
            elif uname == "union_field":
                subs[use.dest] = stmt.args[0]
                changes += 1
            elif uname == "record_get":
                subs[use.dest] = stmt.args[use.op.static[1]]
                changes += 1

    # drop the forwarded accessors, then let liveness take the constructors
    if subs:
        for block in func.blocks.values():
            block.stmts = [s for s in block.stmts if s.dest not in subs]
        substitute_operands(func, subs)
    return changes
