"""Call-site inlining.

A callee is inlined when it is small enough (statement and block budgets
from the pipeline configuration) and not recursive.  The caller block is
split at the call; the return value arrives through a block parameter of
the continuation block, so SSA form is preserved without a renaming pass
over the caller.
"""

from __future__ import annotations

from ..ir import (
    Block,
    Branch,
    Goto,
    Halt,
    Return,
    Statement,
    TrapTerm,
    VarRef,
    iter_statements,
    substitute_operands,
)


def _call_targets(func):
    return {
        stmt.op.static[0]
        for _, stmt in iter_statements(func)
        if stmt.op.name == "call"
    }


def recursive_functions(program):
    """Names of functions on a call-graph cycle (including self-calls)."""
    graph = {name: _call_targets(f) for name, f in program.functions.items()}
    recursive = set()
    for start in graph:
        seen = set()
        stack = list(graph[start])
        while stack:
            cur = stack.pop()
            if cur == start:
                recursive.add(start)
                break
            if cur in seen or cur not in graph:
                continue
            seen.add(cur)
            stack.extend(graph[cur])
    return recursive


def _inlinable(func, config):
    nstmts = sum(len(b.stmts) for b in func.blocks.values())
    return nstmts <= config.inline_max_ops and len(func.blocks) <= config.inline_max_blocks


def inline_calls(program, config):
    """Inline every eligible call site in the program; returns change count."""
    recursive = recursive_functions(program)
    changes = 0
    for func in program.functions.values():
        changes += _inline_into(program, func, config, recursive)
    return changes


def _inline_into(program, caller, config, recursive):
    changes = 0
    counter = [0]
    while True:
        site = None
        for label, block in list(caller.blocks.items()):
            for i, stmt in enumerate(block.stmts):
                if stmt.op.name != "call":
                    continue
                callee = program.functions[stmt.op.static[0]]
                if callee.name == caller.name or callee.name in recursive:
                    continue
                if not _inlinable(callee, config):
                    continue
                site = (label, i, callee)
                break
            if site:
                break
        if site is None:
            return changes
        _inline_site(caller, site, counter)
        changes += 1


def _inline_site(caller, site, counter):
    label, index, callee = site
    block = caller.blocks[label]
    call = block.stmts[index]
    n = counter[0]
    counter[0] += 1
    prefix = "inl%d.%s." % (n, callee.name)

    cont_label = prefix + "cont"
    cont = Block(
        cont_label,
        [(call.dest, callee.ret)],
        block.stmts[index + 1 :],
        block.term,
    )
    block.stmts = block.stmts[:index]

    # clone the callee with renamed labels/values; parameters are substituted
    # by the actual arguments directly
    param_sub = {
        pname: arg for (pname, _), arg in zip(callee.params, call.args)
    }

    def rename(a):
        if isinstance(a, VarRef):
            if a.name in param_sub:
                return param_sub[a.name]
            return VarRef(prefix + a.name)
        return a

    cloned = {}
    for clabel, cblock in callee.blocks.items():
        nb = Block(
            prefix + clabel,
            [(prefix + p, t) for p, t in cblock.params],
            [
                Statement(prefix + s.dest, s.ty, s.op, [rename(a) for a in s.args], s.span)
                for s in cblock.stmts
            ],
            None,
        )
        t = cblock.term
        if isinstance(t, Goto):
            nb.term = Goto(prefix + t.label, [rename(a) for a in t.args], t.span)
        elif isinstance(t, Branch):
            nb.term = Branch(rename(t.cond), prefix + t.then_label, prefix + t.else_label, t.span)
        elif isinstance(t, Return):
            nb.term = Goto(cont_label, [rename(t.value)], t.span)
        elif isinstance(t, Halt):
            nb.term = Halt(t.span)
        else:
            nb.term = TrapTerm(t.message, t.span)
        cloned[nb.label] = nb

    block.term = Goto(prefix + callee.entry, [])

    # keep block order: caller blocks up to the split, clone, continuation
    rebuilt = {}
    for l, b in caller.blocks.items():
        rebuilt[l] = b
        if l == label:
            rebuilt.update(cloned)
            rebuilt[cont_label] = cont
    caller.blocks = rebuilt
