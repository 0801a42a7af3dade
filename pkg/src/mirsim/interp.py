"""MIR interpreter and the fetch-decode-execute driver.

Functions are pre-compiled to per-statement closures once per program; the
closure path runs when no trace recording is active.  While a trace is
being recorded, a generic statement walker interprets instead and feeds
every executed operation to the recorder, so both paths share the operation
semantics from :mod:`mirsim.values`.

Statistics are deterministic: one micro-op per executed statement (or trace
op), terminators free, plus the allocation counter from the value runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .ir import (
    COPY,
    Branch,
    BvFixed,
    BvGeneric,
    EnumT,
    Goto,
    Halt,
    IntGeneric,
    IntMachine,
    Literal,
    Return,
    TrapTerm,
    VarRef,
)
from .memory import SimMemory
from .values import BvF, IntG, ModelTrap, OP_IMPLS, Runtime, fits_i64


class HaltSignal(Exception):
    pass


@dataclass
class RunStats:
    guest_instructions: int = 0
    executed_micro_ops: int = 0
    generic_allocations: int = 0
    traces_compiled: int = 0
    traces_invalidated: int = 0
    trace_guard_exits: int = 0
    trace_aborts: int = 0

    def as_dict(self):
        return self.__dict__.copy()


@dataclass
class RunConfig:
    budget: int | None = None
    tick_interval: int = 100
    tracing: bool = False
    hot_threshold: int = 57
    trace_limit: int = 20000
    entry_pc: int = 0x80000000
    int_switchable: bool = True


def zero_value(rt, ty):
    if isinstance(ty, BvFixed):
        return BvF(ty.width, 0)
    if isinstance(ty, BvGeneric):
        return rt.bv_generic(1, 0)
    if isinstance(ty, IntMachine):
        return 0
    if isinstance(ty, IntGeneric):
        return rt.int_generic(0)
    if isinstance(ty, ir.BoolT):
        return False
    if isinstance(ty, EnumT):
        return 0
    return None


def literal_value(rt, lit):
    ty = lit.ty
    if isinstance(ty, BvFixed):
        return BvF(ty.width, lit.value)
    if isinstance(ty, BvGeneric):
        return rt.bv_generic(lit.width, lit.value)
    if isinstance(ty, (IntMachine, ir.BoolT, EnumT)):
        return lit.value
    if isinstance(ty, IntGeneric):
        return rt.int_generic(lit.value)
    if isinstance(ty, ir.UnitT):
        return None
    raise AssertionError("untyped literal %r; verify the program first" % (lit,))


VALID_ACCESS_SIZES = (1, 2, 4, 8)


class ExecContext:
    """Mutable simulator state shared by interpreter and trace engine."""

    def __init__(self, execprog, memory, config=None):
        config = config or RunConfig()
        self.execprog = execprog
        self.program = execprog.program
        self.memory = memory
        self.rt = Runtime(int_switchable=config.int_switchable)
        self.config = config
        self.regs = {
            name: zero_value(self.rt, ty)
            for name, ty in self.program.registers.items()
        }
        self.pc_name = self.program.header.pc
        self.tick_name = self.program.header.tick
        self.count = 0
        self.micro_ops = 0
        self.budget = config.budget
        self.tick_interval = config.tick_interval
        self.engine = None
        self.recorder = None

    # -- register helpers

    def pc_bits(self):
        return self.regs[self.pc_name].bits

    def set_pc(self, bits):
        self.regs[self.pc_name] = BvF(64, bits)

    def write_reg(self, name, value):
        if name == self.pc_name:
            old = self.regs[name]
            self.regs[name] = value
            eng = self.engine
            if eng is not None and self.recorder is None:
                eng.observe_jump(old.bits, value.bits)
        else:
            self.regs[name] = value

    # -- instruction boundary: budget check, count, clock tick

    def boundary(self):
        """Returns True when the instruction budget is exhausted; otherwise
        counts the next instruction and ticks the model clock when due."""
        if self.budget is not None and self.count >= self.budget:
            return True
        self.count += 1
        if self.tick_name is not None and self.count % self.tick_interval == 0:
            self.call(self.tick_name, [])
        return False

    # -- calls

    def call(self, fname, args):
        rec = self.recorder
        if rec is not None and rec.active:
            tvs = [rec.const_tv(a) for a in args]
            value, _ = record_call(self, self.program.functions[fname], args, tvs)
            return value
        return call_fast(self, self.execprog.functions[fname], args)

    def stats(self):
        eng = self.engine
        return RunStats(
            guest_instructions=self.count,
            executed_micro_ops=self.micro_ops,
            generic_allocations=self.rt.allocations,
            traces_compiled=eng.traces_compiled if eng else 0,
            traces_invalidated=eng.traces_invalidated if eng else 0,
            trace_guard_exits=eng.guard_exits if eng else 0,
            trace_aborts=eng.aborts if eng else 0,
        )


# ---------------------------------------------------------------------------
# closure compiler (fast path)


def _compile_getter(a):
    if isinstance(a, VarRef):
        name = a.name
        return lambda ctx, frame: frame[name]
    ty = a.ty
    if isinstance(ty, BvGeneric):
        width, value = a.width, a.value
        return lambda ctx, frame: ctx.rt.bv_generic(width, value)
    if isinstance(ty, IntGeneric):
        # hoisted compile-time constant; only big ones count as allocations
        value = a.value
        if fits_i64(value):
            const = IntG(value, False)
            return lambda ctx, frame: const
        return lambda ctx, frame: ctx.rt.int_generic(value)
    const = literal_value(Runtime(), a)
    return lambda ctx, frame: const


def _compile_stmt(stmt, program):
    op = stmt.op
    name = op.name
    static = op.static
    dest = stmt.dest
    getters = [_compile_getter(a) for a in stmt.args]

    if name == "read_reg":
        reg = static[0]

        def thunk(ctx, frame):
            frame[dest] = ctx.regs[reg]

    elif name == "write_reg":
        reg = static[0]
        g0 = getters[0]
        if reg == program.header.pc:

            def thunk(ctx, frame):
                ctx.write_reg(reg, g0(ctx, frame))
                frame[dest] = None

        else:

            def thunk(ctx, frame):
                ctx.regs[reg] = g0(ctx, frame)
                frame[dest] = None

    elif name == "mem_read":
        g0, g1 = getters

        def thunk(ctx, frame):
            n = g1(ctx, frame)
            if n not in VALID_ACCESS_SIZES:
                raise ModelTrap("memory access size %r" % (n,))
            raw = ctx.memory.read(g0(ctx, frame).bits, n)
            frame[dest] = ctx.rt.bv_generic(8 * n, raw)

    elif name == "mem_write":
        g0, g1, g2 = getters

        def thunk(ctx, frame):
            n = g1(ctx, frame)
            if n not in VALID_ACCESS_SIZES:
                raise ModelTrap("memory access size %r" % (n,))
            v = g2(ctx, frame)
            if v.width != 8 * n:
                raise ModelTrap(
                    "store of %d-bit value with %d-byte access" % (v.width, n)
                )
            ctx.memory.write(g0(ctx, frame).bits, n, v.bits)
            frame[dest] = None

    elif name == "fetch":
        g0 = getters[0]
        nbytes = stmt.args[1].value
        width = 8 * nbytes

        def thunk(ctx, frame):
            raw, _ = ctx.memory.fetch(g0(ctx, frame).bits, nbytes)
            frame[dest] = BvF(width, raw)

    elif name == "call":
        callee = static[0]

        def thunk(ctx, frame):
            frame[dest] = call_fast(
                ctx,
                ctx.execprog.functions[callee],
                [g(ctx, frame) for g in getters],
            )

    elif name == "halt_check":

        def thunk(ctx, frame):
            frame[dest] = ctx.boundary()

    elif name == COPY:
        g0 = getters[0]

        def thunk(ctx, frame):
            frame[dest] = g0(ctx, frame)

    else:
        impl = OP_IMPLS[name]
        if len(getters) == 1:
            g0 = getters[0]

            def thunk(ctx, frame):
                frame[dest] = impl(ctx.rt, static, g0(ctx, frame))

        elif len(getters) == 2:
            g0, g1 = getters

            def thunk(ctx, frame):
                frame[dest] = impl(ctx.rt, static, g0(ctx, frame), g1(ctx, frame))

        elif len(getters) == 3:
            g0, g1, g2 = getters

            def thunk(ctx, frame):
                frame[dest] = impl(
                    ctx.rt, static, g0(ctx, frame), g1(ctx, frame), g2(ctx, frame)
                )

        else:
            def thunk(ctx, frame):
                frame[dest] = impl(
                    ctx.rt, static, *[g(ctx, frame) for g in getters]
                )

    return thunk


def _compile_term(term, func):
    if isinstance(term, Goto):
        label = term.label
        params = [p for p, _ in func.blocks[label].params]
        if not params:
            return lambda ctx, frame: label
        getters = [_compile_getter(a) for a in term.args]

        def goto_term(ctx, frame):
            vals = [g(ctx, frame) for g in getters]
            for p, v in zip(params, vals):
                frame[p] = v
            return label

        return goto_term
    if isinstance(term, Branch):
        g = _compile_getter(term.cond)
        then_label, else_label = term.then_label, term.else_label

        def branch_term(ctx, frame):
            return then_label if g(ctx, frame) else else_label

        return branch_term
    if isinstance(term, Return):
        g = _compile_getter(term.value)

        def return_term(ctx, frame):
            frame["$ret"] = g(ctx, frame)
            return None

        return return_term
    if isinstance(term, Halt):
        def halt_term(ctx, frame):
            raise HaltSignal()

        return halt_term
    if isinstance(term, TrapTerm):
        message = term.message

        def trap_term(ctx, frame):
            raise ModelTrap(message, coords=(func.name,))

        return trap_term
    raise AssertionError("missing terminator")


class ExecFunction:
    __slots__ = ("func", "param_names", "entry", "blocks")

    def __init__(self, func, program):
        self.func = func
        self.param_names = [p for p, _ in func.params]
        self.entry = func.entry
        self.blocks = {
            label: (
                [_compile_stmt(s, program) for s in block.stmts],
                _compile_term(block.term, func),
                len(block.stmts),
            )
            for label, block in func.blocks.items()
        }


class ExecProgram:
    def __init__(self, program):
        self.program = program
        self.functions = {
            name: ExecFunction(func, program)
            for name, func in program.functions.items()
        }


def compile_program(program):
    return ExecProgram(program)


def call_fast(ctx, execfn, args):
    frame = {}
    for name, value in zip(execfn.param_names, args):
        frame[name] = value
    blocks = execfn.blocks
    label = execfn.entry
    while True:
        stmts, term, nstmts = blocks[label]
        for thunk in stmts:
            thunk(ctx, frame)
        ctx.micro_ops += nstmts
        label = term(ctx, frame)
        if label is None:
            return frame.get("$ret")


# ---------------------------------------------------------------------------
# generic walker, used while recording a trace


def record_call(ctx, func, args, arg_tvs):
    """Interpret `func` while reporting every executed operation to
    ctx.recorder.  Returns (value, trace value)."""
    rec = ctx.recorder
    frame = {}
    tvf = {}
    for (pname, _), value, tv in zip(func.params, args, arg_tvs):
        frame[pname] = value
        tvf[pname] = tv

    def resolve(a):
        if isinstance(a, VarRef):
            return frame[a.name], tvf[a.name]
        v = literal_value(ctx.rt, a)
        return v, rec.const_tv(v)

    label = func.entry
    while True:
        block = func.blocks[label]
        for stmt in block.stmts:
            pairs = [resolve(a) for a in stmt.args]
            vals = [p[0] for p in pairs]
            tvs = [p[1] for p in pairs]
            name = stmt.op.name
            ctx.micro_ops += 1
            if name == "call":
                callee = ctx.program.functions[stmt.op.static[0]]
                value, tv = record_call(ctx, callee, vals, tvs)
            elif name == "read_reg":
                value = ctx.regs[stmt.op.static[0]]
                tv = rec.emit_stmt(stmt, tvs, value)
            elif name == "write_reg":
                ctx.regs[stmt.op.static[0]] = vals[0]
                value = None
                tv = rec.emit_stmt(stmt, tvs, value)
            elif name == "mem_read":
                n = vals[1]
                if n not in VALID_ACCESS_SIZES:
                    raise ModelTrap("memory access size %r" % (n,))
                value = ctx.rt.bv_generic(8 * n, ctx.memory.read(vals[0].bits, n))
                tv = rec.emit_stmt(stmt, tvs, value)
            elif name == "mem_write":
                n = vals[1]
                if n not in VALID_ACCESS_SIZES:
                    raise ModelTrap("memory access size %r" % (n,))
                if vals[2].width != 8 * n:
                    raise ModelTrap(
                        "store of %d-bit value with %d-byte access"
                        % (vals[2].width, n)
                    )
                ctx.memory.write(vals[0].bits, n, vals[2].bits)
                value = None
                tv = rec.emit_stmt(stmt, tvs, value)
            elif name == "fetch":
                nbytes = stmt.args[1].value
                raw, was_immutable = ctx.memory.fetch(vals[0].bits, nbytes)
                value = BvF(8 * nbytes, raw)
                tv = rec.emit_fetch(stmt, tvs, value, was_immutable)
            elif name == "halt_check":
                value = ctx.boundary()
                tv = rec.emit_stmt(stmt, tvs, value)
            else:
                value = OP_IMPLS[name](ctx.rt, stmt.op.static, *vals)
                tv = rec.emit_stmt(stmt, tvs, value)
            frame[stmt.dest] = value
            tvf[stmt.dest] = tv
        term = block.term
        if isinstance(term, Goto):
            target = func.blocks[term.label]
            pairs = [resolve(a) for a in term.args]
            for (pname, _), (v, tv) in zip(target.params, pairs):
                frame[pname] = v
                tvf[pname] = tv
            label = term.label
        elif isinstance(term, Branch):
            cond, cond_tv = resolve(term.cond)
            rec.emit_guard(cond_tv, bool(cond))
            label = term.then_label if cond else term.else_label
        elif isinstance(term, Return):
            return resolve(term.value)
        elif isinstance(term, Halt):
            raise HaltSignal()
        else:
            raise ModelTrap(term.message, coords=(func.name,))


# ---------------------------------------------------------------------------
# top-level driver


@dataclass
class RunResult:
    outcome: str
    stats: RunStats
    registers: dict = field(repr=False, default_factory=dict)
    memory: SimMemory | None = field(repr=False, default=None)
    engine: object = field(repr=False, default=None)

    def register_dump(self):
        return format_registers(self.registers)


def format_registers(regs):
    lines = []
    for name in sorted(regs):
        v = regs[name]
        if isinstance(v, BvF):
            lines.append("%s=0x%0*x" % (name, (v.width + 3) // 4, v.bits))
        elif isinstance(v, bool):
            lines.append("%s=%s" % (name, "0x1" if v else "0x0"))
        elif isinstance(v, int):
            lines.append("%s=0x%x" % (name, v & ((1 << 64) - 1)))
        else:
            lines.append("%s=%r" % (name, v))
    return "\n".join(lines) + "\n"


def run(execprog, memory, config=None):
    """Drive the fetch-decode-execute loop of a loaded model program."""
    config = config or RunConfig()
    program = execprog.program
    header = program.header
    if header.loop is None or header.pc is None:
        raise ValueError("program header must designate loop function and pc register")
    ctx = ExecContext(execprog, memory, config)
    ctx.set_pc(config.entry_pc)
    engine = None
    if config.tracing:
        from . import trace as trace_mod

        engine = trace_mod.TraceEngine(config)
        ctx.engine = engine
        memory.invalidation_sink = engine.on_invalidated_word
    step = header.loop
    outcome = "budget"
    try:
        while True:
            if engine is not None:
                if engine.recording is not None:
                    engine.boundary_check(ctx)
                if engine.recording is None:
                    tr = engine.lookup(ctx.pc_bits())
                    if tr is not None:
                        engine.execute(ctx, tr)
                        continue
                    engine.maybe_begin_recording(ctx)
                if engine.recording is not None:
                    engine.begin_instruction(ctx)
            if ctx.boundary():
                outcome = "budget"
                break
            ctx.call(step, [])
    except HaltSignal:
        outcome = "halt"
    except ModelTrap as t:
        outcome = "trap: %s @0x%x" % (t.message, ctx.pc_bits())
    finally:
        if engine is not None and engine.recording is not None:
            ctx.recorder = None
            engine.abort_recording("run ended")
    return RunResult(outcome, ctx.stats(), dict(ctx.regs), memory, engine)
