"""Call-site function specialization.

Calls that pass generic-typed arguments which are statically more specific
(literals, or values cast from fixed-width/machine types) are retargeted to
a clone of the callee whose parameters take the specific types.  The clone
compensates with casts at entry so its body stays well-typed; later rewrite
rounds then specialize the body, and if every return of a clone turns out
to produce a cast from a specific value the clone's return type is narrowed
too, letting callers optimize further.
"""

from __future__ import annotations

from ..ir import (
    Block,
    BvFixed,
    BvGeneric,
    Goto,
    IntGeneric,
    IntMachine,
    Literal,
    Op,
    Return,
    Statement,
    VarRef,
    clone_function,
    iter_statements,
)

I64 = IntMachine()


class SpecializationCache:
    """Shared clone registry; also enforces the per-function variant cap."""

    def __init__(self, max_variants=8):
        self.max_variants = max_variants
        self.clones = {}  # key -> clone name
        self.per_base = {}  # base function name -> variant count

    def base_of(self, name):
        return name.split("@", 1)[0]


def _arg_speciality(arg, defs):
    """(narrowed type, replacement operand) or None."""
    if isinstance(arg, Literal):
        if arg.width is not None:
            ty = BvFixed(arg.width)
            return ty, Literal(arg.value, width=arg.width, ty=ty), "c%x" % arg.value
        if isinstance(arg.value, int) and not isinstance(arg.value, bool):
            if -(1 << 63) <= arg.value < (1 << 63):
                return I64, Literal(arg.value, ty=I64), "c%d" % arg.value
        return None
    d = defs.get(arg.name)
    if d is None:
        return None
    if d.op.name == "cast_bv_to_generic":
        w = d.op.static[0]
        return BvFixed(w), d.args[0], "bv%d" % w
    if d.op.name == "cast_i64_to_int":
        return I64, d.args[0], "i64"
    return None


def specialize_functions(program, config, cache):
    changes = 0
    for func in list(program.functions.values()):
        changes += _specialize_sites(program, func, config, cache)
    changes += _narrow_clone_returns(program)
    return changes


def _specialize_sites(program, caller, config, cache):
    changes = 0
    defs = {s.dest: s for _, s in iter_statements(caller)}
    for block in caller.blocks.values():
        for stmt in block.stmts:
            if stmt.op.name != "call":
                continue
            callee_name = stmt.op.static[0]
            callee = program.functions[callee_name]
            plan = []
            tags = []
            for (pname, pty), arg in zip(callee.params, stmt.args):
                if isinstance(pty, (BvGeneric, IntGeneric)):
                    spec = _arg_speciality(arg, defs)
                else:
                    spec = None
                plan.append(spec)
                tags.append(spec[2] if spec else "_")
            if not any(plan):
                continue
            key = (callee_name, tuple(tags))
            clone_name = cache.clones.get(key)
            if clone_name is None:
                base = cache.base_of(callee_name)
                if cache.per_base.get(base, 0) >= cache.max_variants:
                    continue
                clone_name = _make_clone(program, callee, plan, tags)
                cache.clones[key] = clone_name
                cache.per_base[base] = cache.per_base.get(base, 0) + 1
            stmt.op = Op("call", (clone_name,))
            stmt.args = [
                spec[1] if spec else arg for spec, arg in zip(plan, stmt.args)
            ]
            changes += 1
    return changes


def _make_clone(program, callee, plan, tags):
    name = "%s@%s" % (callee.name, "_".join(tags))
    n = 0
    while name in program.functions:
        n += 1
        name = "%s@%s.%d" % (callee.name, "_".join(tags), n)
    clone = clone_function(callee)
    clone.name = name

    # retype specialized parameters and rebind their uses through casts (or
    # the literal itself); rewrite rounds clean these up
    entry = clone.blocks[clone.entry]
    pre = []
    subs = {}
    params = []
    for (pname, pty), spec in zip(clone.params, plan):
        if spec is None:
            params.append((pname, pty))
            continue
        new_ty = spec[0]
        params.append((pname, new_ty))
        if isinstance(spec[1], Literal):
            subs[pname] = spec[1]
        elif isinstance(new_ty, BvFixed):
            tmp = pname + ".g"
            pre.append(
                Statement(tmp, pty, Op("cast_bv_to_generic", (new_ty.width,)), [VarRef(pname)])
            )
            subs[pname] = VarRef(tmp)
        else:
            tmp = pname + ".g"
            pre.append(Statement(tmp, pty, Op("cast_i64_to_int"), [VarRef(pname)]))
            subs[pname] = VarRef(tmp)
    clone.params = params

    from ..ir import substitute_operands

    substitute_operands(clone, subs)
    entry.stmts = pre + entry.stmts
    program.functions[name] = clone
    return name


def _narrow_clone_returns(program):
    """If every return of a clone yields a cast from one specific type,
    narrow the clone's return type and patch all call sites."""
    changes = 0
    for func in list(program.functions.values()):
        if "@" not in func.name or not isinstance(func.ret, (BvGeneric, IntGeneric)):
            continue
        defs = {s.dest: s for _, s in iter_statements(func)}
        narrowed = None
        sources = {}
        ok = True
        for label, block in func.blocks.items():
            t = block.term
            if not isinstance(t, Return):
                continue
            if not isinstance(t.value, VarRef):
                ok = False
                break
            d = defs.get(t.value.name)
            if d is None:
                ok = False
                break
            if d.op.name == "cast_bv_to_generic":
                ty = BvFixed(d.op.static[0])
            elif d.op.name == "cast_i64_to_int":
                ty = I64
            else:
                ok = False
                break
            if narrowed is None:
                narrowed = ty
            elif narrowed != ty:
                ok = False
                break
            sources[label] = d.args[0]
        if not ok or narrowed is None:
            continue
        for label, block in func.blocks.items():
            if isinstance(block.term, Return):
                block.term = Return(sources[label], block.term.span)
        old_ret = func.ret
        func.ret = narrowed
        changes += 1
        _patch_callers(program, func.name, narrowed, old_ret)
    return changes


def _patch_callers(program, fname, new_ty, old_ty):
    for caller in program.functions.values():
        taken = {s.dest for _, s in iter_statements(caller)}
        for block in caller.blocks.values():
            out = []
            for stmt in block.stmts:
                if stmt.op.name == "call" and stmt.op.static[0] == fname \
                        and stmt.ty == old_ty:
                    tmp = stmt.dest + ".r"
                    while tmp in taken:
                        tmp += "r"
                    taken.add(tmp)
                    out.append(Statement(tmp, new_ty, stmt.op, stmt.args, stmt.span))
                    if isinstance(new_ty, BvFixed):
                        wrap = Op("cast_bv_to_generic", (new_ty.width,))
                    else:
                        wrap = Op("cast_i64_to_int")
                    stmt.op = wrap
                    stmt.args = [VarRef(tmp)]
                    out.append(stmt)
                else:
                    out.append(stmt)
            block.stmts = out
