"""SSA construction: mutable locals become block parameters at join points.

Copy statements disappear during renaming, branch edges into join blocks are
split so that only ``goto`` terminators carry arguments, and trivial
parameters (all incoming arguments identical) are cleaned up afterwards.
"""

from __future__ import annotations

from .ir import (
    COPY,
    Block,
    Branch,
    Function,
    Goto,
    Halt,
    Literal,
    Program,
    Return,
    Statement,
    TrapTerm,
    VarRef,
    predecessors,
    reverse_postorder,
    successors,
)


class SsaError(Exception):
    pass


def _same_operand(a, b):
    if isinstance(a, VarRef) and isinstance(b, VarRef):
        return a.name == b.name
    if isinstance(a, Literal) and isinstance(b, Literal):
        return a.value == b.value and a.width == b.width and a.enum == b.enum
    return False


def to_ssa(func):
    """Translate one mutable-local function to SSA form."""
    local_types = dict(func.params)
    for block in func.blocks.values():
        for stmt in block.stmts:
            local_types.setdefault(stmt.dest, stmt.ty)

    blocks = _prepare_cfg(func)
    entry = next(iter(blocks))
    preds = _preds_of(blocks)
    rpo = _rpo_of(blocks, entry)

    source_names = set(local_types)
    ssa_names = set()
    counters = {}

    def fresh(var):
        # the first version keeps the source name, later ones get var.N
        n = counters.get(var, 0)
        if n == 0:
            counters[var] = 1
            ssa_names.add(var)
            return var
        while True:
            name = "%s.%d" % (var, n)
            n += 1
            if name not in source_names and name not in ssa_names:
                counters[var] = n
                ssa_names.add(name)
                return name

    out_blocks = {label: Block(label) for label in rpo}
    params = {label: [] for label in rpo}  # [(var, param name, type)]
    current = {}  # (var, label) -> operand
    sealed = set()
    filled = set()
    incomplete = {label: [] for label in rpo}

    for pname, _ in func.params:
        current[(pname, entry)] = VarRef(pname)
        ssa_names.add(pname)
        counters[pname] = 1

    def new_param(var, label):
        name = fresh(var)
        params[label].append((var, name, local_types[var]))
        return name

    def read_var(var, label):
        if (var, label) in current:
            return current[(var, label)]
        ps = preds[label]
        if label not in sealed:
            name = new_param(var, label)
            incomplete[label].append((var, name))
            val = VarRef(name)
        elif len(ps) == 1:
            val = read_var(var, ps[0])
        elif not ps:
            raise SsaError(
                "local %r may be read before assignment in %s" % (var, func.name)
            )
        else:
            name = new_param(var, label)
            current[(var, label)] = VarRef(name)
            add_param_args(var, label)
            val = VarRef(name)
        current[(var, label)] = val
        return val

    def add_param_args(var, label):
        for p in preds[label]:
            term = out_blocks[p].term
            assert isinstance(term, Goto) and term.label == label
            term.args.append(read_var(var, p))

    def seal(label):
        for var, _ in incomplete[label]:
            add_param_args(var, label)
        incomplete[label].clear()
        sealed.add(label)

    def try_seal():
        for label in rpo:
            if label not in sealed and all(p in filled for p in preds[label]):
                seal(label)

    seal(entry)
    for label in rpo:
        src = blocks[label]
        out = out_blocks[label]

        def resolve(a):
            if isinstance(a, VarRef):
                return read_var(a.name, label)
            return a

        for stmt in src.stmts:
            if stmt.op.name == COPY:
                current[(stmt.dest, label)] = resolve(stmt.args[0])
                continue
            args = [resolve(a) for a in stmt.args]
            name = fresh(stmt.dest)
            out.stmts.append(Statement(name, stmt.ty, stmt.op, args, stmt.span))
            current[(stmt.dest, label)] = VarRef(name)
        t = src.term
        if isinstance(t, Goto):
            out.term = Goto(t.label, [], t.span)
        elif isinstance(t, Branch):
            out.term = Branch(resolve(t.cond), t.then_label, t.else_label, t.span)
        elif isinstance(t, Return):
            out.term = Return(resolve(t.value), t.span)
        else:
            out.term = t
        filled.add(label)
        try_seal()

    assert len(sealed) == len(rpo), "unsealed blocks remain"

    for label in rpo:
        out_blocks[label].params = [(n, t) for _, n, t in params[label]]
    _remove_trivial_params(out_blocks, preds)

    result = Function(func.name, list(func.params), func.ret, out_blocks, ssa=True)
    return result


def _prepare_cfg(func):
    """Reachable blocks only, fresh entry if the entry has predecessors, and
    branch edges into multi-predecessor blocks split through trampolines."""
    reachable = reverse_postorder(func)
    blocks = {}
    for label in reachable:
        b = func.blocks[label]
        nb = Block(label, [], list(b.stmts), _copy_term(b.term))
        blocks[label] = nb

    preds = _preds_of(blocks)
    entry = func.entry
    if preds[entry]:
        new_entry = _fresh_label(blocks, entry + ".entry")
        eb = Block(new_entry, [], [], Goto(entry))
        blocks = {new_entry: eb, **blocks}
        preds = _preds_of(blocks)
        entry = new_entry

    splits = {}
    for label in list(blocks):
        term = blocks[label].term
        if not isinstance(term, Branch):
            continue
        for attr in ("then_label", "else_label"):
            target = getattr(term, attr)
            if len(preds[target]) < 2:
                continue
            split = _fresh_label(blocks, "%s.via.%s" % (target, label))
            splits[split] = Block(split, [], [], Goto(target))
            setattr(term, attr, split)
    blocks.update(splits)

    ordered = {}
    for label in _rpo_of(blocks, entry):
        ordered[label] = blocks[label]
    return ordered


def _copy_term(t):
    if isinstance(t, Goto):
        return Goto(t.label, list(t.args), t.span)
    if isinstance(t, Branch):
        return Branch(t.cond, t.then_label, t.else_label, t.span)
    if isinstance(t, Return):
        return Return(t.value, t.span)
    if isinstance(t, Halt):
        return Halt(t.span)
    if isinstance(t, TrapTerm):
        return TrapTerm(t.message, t.span)
    raise AssertionError("missing terminator")


def _fresh_label(blocks, base):
    label = base
    n = 0
    while label in blocks:
        n += 1
        label = "%s.%d" % (base, n)
    return label


def _preds_of(blocks):
    preds = {label: [] for label in blocks}
    for label, block in blocks.items():
        for succ in successors(block):
            preds[succ].append(label)
    return preds


def _rpo_of(blocks, entry):
    seen = set()
    order = []

    def walk(label):
        if label in seen:
            return
        seen.add(label)
        for succ in successors(blocks[label]):
            walk(succ)
        order.append(label)

    walk(entry)
    order.reverse()
    return order


def _remove_trivial_params(blocks, preds):
    changed = True
    while changed:
        changed = False
        for label, block in blocks.items():
            if not block.params:
                continue
            incoming = [blocks[p].term for p in preds[label]]
            for idx in reversed(range(len(block.params))):
                pname = block.params[idx][0]
                vals = []
                for term in incoming:
                    arg = term.args[idx]
                    if isinstance(arg, VarRef) and arg.name == pname:
                        continue
                    vals.append(arg)
                if not vals:
                    continue
                if all(_same_operand(vals[0], v) for v in vals[1:]):
                    replacement = vals[0]
                    del block.params[idx]
                    for term in incoming:
                        del term.args[idx]
                    _replace_uses(blocks, pname, replacement)
                    changed = True


def _replace_uses(blocks, name, replacement):
    def sub(a):
        if isinstance(a, VarRef) and a.name == name:
            return replacement
        return a

    for block in blocks.values():
        for stmt in block.stmts:
            stmt.args = [sub(a) for a in stmt.args]
        t = block.term
        if isinstance(t, Goto):
            t.args = [sub(a) for a in t.args]
        elif isinstance(t, Branch):
            t.cond = sub(t.cond)
        elif isinstance(t, Return):
            t.value = sub(t.value)


def program_to_ssa(program):
    """SSA-convert every function, leaving declarations shared."""
    out = Program(
        header=program.header,
        enums=program.enums,
        unions=program.unions,
        records=program.records,
        registers=program.registers,
        functions={},
    )
    for name, func in program.functions.items():
        out.functions[name] = to_ssa(func)
    return out
