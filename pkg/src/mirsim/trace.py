"""Runtime specialization: hot-loop detection, trace recording, trace
optimization and guarded trace execution.

A trace covers one iteration of a guest-program loop, recorded through the
interpreter (through calls, with branches turned into guards).  The
optimizer walks the linear operation list once, carrying forwarded
register values, constants and known-bits facts:

  * instruction fetches from immutable memory words fold to constants (the
    fetched words become the trace's dependencies, wired to the memory
    invalidation registry),
  * operations on values of known width are swapped for their fixed-width
    variants and casts disappear,
  * guards whose condition is proven (constant or known bits, e.g. the
    alignment pattern eq(and(addr, 2^k-1), 0)) or already guarded are
    dropped; surviving guards refine the known bits of their operands,
  * a final liveness pass removes unused pure operations.

Execution applies state effects eagerly but snapshots registers (plus an
undo log for memory) at every guest-instruction boundary; a failing guard
restores the last boundary so the interpreter resumes cleanly, which keeps
traced runs bit-identical to pure interpretation even across guard exits,
clock ticks and self-modifying stores.
"""

from __future__ import annotations

from . import knownbits as kb
from .values import BvF, BvG, IntG, ModelTrap, OP_IMPLS, RecordV, Runtime, UnionV
from .ir import BvFixed, BvGeneric, IntMachine, IntGeneric, Literal, VarRef


GUARD_KINDS = ("guard_pc_eq", "guard_true", "guard_value_eq")


class TraceOp:
    __slots__ = ("kind", "static", "args", "ty", "dep_words", "nbytes")

    def __init__(self, kind, static=(), args=(), ty=None, dep_words=None, nbytes=None):
        self.kind = kind
        self.static = static
        self.args = args  # tuple of ("v", idx) | ("k", runtime value)
        self.ty = ty
        self.dep_words = dep_words
        self.nbytes = nbytes

    def __repr__(self):
        return "TraceOp(%s)" % self.kind


class Trace:
    def __init__(self, anchor):
        self.anchor = anchor
        self.raw = []
        self.opt = []
        self.deps = set()
        self.valid = True
        self.tnums = {}

    def raw_length(self):
        return len(self.raw)

    def opt_length(self):
        return len(self.opt)


class RecordAborted:
    pass


class Recorder:
    """Collects trace ops during interpretation; see interp.record_call."""

    def __init__(self, anchor, limit, tracking):
        self.anchor = anchor
        self.limit = limit
        self.tracking = tracking
        self.ops = []
        self.aborted = None
        self.active = True

    def _abort(self, reason):
        self.aborted = reason
        self.active = False
        self.ops = []

    def _push(self, op):
        if not self.active:
            return ("k", None)
        self.ops.append(op)
        if len(self.ops) > self.limit:
            self._abort("trace length limit")
            return ("k", None)
        return ("v", len(self.ops) - 1)

    def const_tv(self, value):
        return ("k", value)

    def emit_stmt(self, stmt, tvs, result):
        return self._push(
            TraceOp(stmt.op.name, stmt.op.static, tuple(tvs), stmt.ty)
        )

    def emit_fetch(self, stmt, tvs, value, was_immutable):
        if not self.active:
            return ("k", None)
        if self.tracking and not was_immutable:
            self._abort("fetch from mutable word")
            return ("k", None)
        return self._push(
            TraceOp(
                "fetch",
                stmt.op.static,
                tuple(tvs),
                stmt.ty,
                nbytes=stmt.args[1].value,
            )
        )

    def emit_guard(self, cond_tv, taken):
        if cond_tv[0] == "k":
            return  # constant condition needs no guard
        if taken:
            self._push(TraceOp("guard_true", (), (cond_tv,)))
        else:
            self._push(TraceOp("guard_value_eq", (), (cond_tv, ("k", False))))

    def begin_instruction(self):
        self._push(TraceOp("halt_check"))


class TraceEngine:
    def __init__(self, config):
        self.hot_threshold = config.hot_threshold
        self.trace_limit = config.trace_limit
        self.traces = {}
        self.hot = {}
        self.abort_counts = {}
        self.pending_anchor = None
        self.recording = None  # Recorder
        self.traces_compiled = 0
        self.traces_invalidated = 0
        self.guard_exits = 0
        self.aborts = 0
        self.knownbits_enabled = True

    # -- hot loop detection

    def observe_jump(self, from_pc, to_pc):
        if to_pc >= from_pc:
            return False
        if to_pc in self.traces or self.abort_counts.get(to_pc, 0) >= 3:
            return False
        n = self.hot.get(to_pc, 0) + 1
        self.hot[to_pc] = n
        if n >= self.hot_threshold:
            self.pending_anchor = to_pc
            return True
        return False

    # -- recording lifecycle (driven from the run loop at boundaries)

    def maybe_begin_recording(self, ctx):
        pc = ctx.pc_bits()
        if self.pending_anchor != pc or pc in self.traces:
            return
        self.pending_anchor = None
        if self.abort_counts.get(pc, 0) >= 3:
            return
        rec = Recorder(pc, self.trace_limit, ctx.memory.tracking)
        rec._push(TraceOp("guard_pc_eq", (pc,)))
        self.recording = rec
        ctx.recorder = rec

    def begin_instruction(self, ctx):
        self.recording.begin_instruction()

    def boundary_check(self, ctx):
        rec = self.recording
        if rec.aborted is not None:
            self.abort_recording(rec.aborted)
            return
        if ctx.pc_bits() == rec.anchor:
            self._compile(ctx, rec)
            self.recording = None
            ctx.recorder = None

    def abort_recording(self, reason):
        rec = self.recording
        if rec is None:
            return
        self.recording = None
        self.aborts += 1
        self.abort_counts[rec.anchor] = self.abort_counts.get(rec.anchor, 0) + 1
        self.hot.pop(rec.anchor, None)

    def _compile(self, ctx, rec):
        trace = Trace(rec.anchor)
        trace.raw = rec.ops
        optimize(trace, ctx.memory, ctx.program, self.knownbits_enabled)
        for word in trace.deps:
            ctx.memory.register_invalidation(word, rec.anchor)
        self.traces[rec.anchor] = trace
        self.traces_compiled += 1
        self.hot.pop(rec.anchor, None)

    # -- invalidation

    def on_invalidated_word(self, word, anchors):
        self.invalidate_anchors(word, anchors)

    def invalidate_anchors(self, word, anchors):
        count = 0
        for anchor in anchors:
            trace = self.traces.get(anchor)
            if trace is not None and word in trace.deps:
                trace.valid = False
                del self.traces[anchor]
                self.hot.pop(anchor, None)
                count += 1
        self.traces_invalidated += count
        return count

    def invalidate_on_write(self, word):
        anchors = [a for a, t in self.traces.items() if word in t.deps]
        return self.invalidate_anchors(word, anchors)

    # -- dispatch

    def lookup(self, pc):
        trace = self.traces.get(pc)
        if trace is not None and trace.valid:
            return trace
        return None

    def execute(self, ctx, trace):
        execute_trace(ctx, trace, self)


# ---------------------------------------------------------------------------
# trace optimization

BV_SPECIALIZE = {
    "add_bits": "add_bits_bv_c",
    "sub_bits": "sub_bits_bv_c",
    "and_bits": "and_bits_bv_c",
    "or_bits": "or_bits_bv_c",
    "xor_bits": "xor_bits_bv_c",
}

TNUM_MASKED_BINARY = {
    "and_bits_bv_c": kb.transfer_and,
    "or_bits_bv_c": kb.transfer_or,
    "xor_bits_bv_c": kb.transfer_xor,
    "add_bits_bv_c": kb.transfer_add,
    "sub_bits_bv_c": kb.transfer_sub,
}

INT_TNUM_BINARY = {
    "add_int_i64": kb.transfer_add,
    "sub_int_i64": kb.transfer_sub,
}


def _pattern_of(value):
    if isinstance(value, (BvF, BvG)):
        return value.bits
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value & kb.MASK64
    if isinstance(value, IntG):
        return value.val & kb.MASK64
    return None


class _Opt:
    """Single forward walk over the raw ops with value forwarding."""

    def __init__(self, trace, memory, program, use_knownbits):
        self.trace = trace
        self.memory = memory
        self.program = program
        self.use_knownbits = use_knownbits
        self.rt = Runtime()  # scratch; allocation counts are discarded
        self.out = []
        self.mapping = {}  # raw index -> operand
        self.forward = {}  # out index -> operand (guard_value_eq refinement)
        self.defs = {}  # out index -> TraceOp
        self.tnums = {}  # out index -> TristateNumber
        self.widths = {}  # out index -> bit width of bv value
        self.reg_env = {}  # register -> operand
        self.guarded = set()
        self.tick_kills = _tick_written_regs(program)

    # operand plumbing

    def resolve(self, arg):
        if arg[0] == "v":
            arg = self.mapping[arg[1]]
        while arg[0] == "v" and arg[1] in self.forward:
            arg = self.forward[arg[1]]
        return arg

    def emit(self, op):
        self.out.append(op)
        idx = len(self.out) - 1
        self.defs[idx] = op
        return ("v", idx)

    def const_of(self, arg):
        return arg[1] if arg[0] == "k" else None

    def all_const(self, args):
        return all(a[0] == "k" for a in args)

    def tnum_of(self, arg):
        if arg[0] == "k":
            p = _pattern_of(arg[1])
            return kb.from_constant(p) if p is not None else kb.TOP
        return self.tnums.get(arg[1], kb.TOP)

    def width_of(self, arg):
        if arg[0] == "k":
            v = arg[1]
            if isinstance(v, (BvF, BvG)):
                return v.width
            return None
        return self.widths.get(arg[1])

    def set_info(self, operand, width=None, tnum=None):
        if operand[0] != "v":
            return
        if width is not None:
            self.widths[operand[1]] = width
        if tnum is not None and self.use_knownbits:
            self.tnums[operand[1]] = tnum
            self.trace.tnums[operand[1]] = tnum

    # the walk

    def run(self):
        for raw_index, op in enumerate(self.trace.raw):
            args = tuple(self.resolve(a) for a in op.args)
            result = self.visit(op, args)
            self.mapping[raw_index] = result
        self.trace.opt = self.out
        _liveness(self.trace)

    def visit(self, op, args):
        kind = op.kind

        if kind == "guard_pc_eq":
            pc_name = self.program.header.pc
            self.reg_env[pc_name] = ("k", BvF(64, op.static[0]))
            return self.emit(TraceOp("guard_pc_eq", op.static))

        if kind == "halt_check":
            for reg in self.tick_kills:
                self.reg_env.pop(reg, None)
            return self.emit(TraceOp("halt_check"))

        if kind == "read_reg":
            reg = op.static[0]
            known = self.reg_env.get(reg)
            if known is not None:
                return known
            res = self.emit(TraceOp("read_reg", op.static, (), op.ty))
            if isinstance(op.ty, BvFixed):
                self.set_info(res, width=op.ty.width)
            self.reg_env[reg] = res
            return res

        if kind == "write_reg":
            self.reg_env[op.static[0]] = args[0]
            return self.emit(TraceOp("write_reg", op.static, args))

        if kind == "fetch":
            addr = args[0]
            bits = self.const_of(addr)
            base = bits.bits if isinstance(bits, (BvF, BvG)) else None
            if (
                self.memory.tracking
                and base is not None
            ):
                nbytes = op.nbytes
                words = tuple(range(base >> 3, (base + nbytes - 1 >> 3) + 1))
                from .memory import STATUS_IMMUTABLE

                if all(self.memory.status_of(w) == STATUS_IMMUTABLE for w in words):
                    raw = self.memory.read(base, nbytes)
                    self.trace.deps.update(words)
                    return ("k", BvF(8 * nbytes, raw))
            res = self.emit(TraceOp("fetch", op.static, args, op.ty, nbytes=op.nbytes))
            self.set_info(res, width=8 * op.nbytes)
            return res

        if kind == "mem_read":
            res = self.emit(TraceOp("mem_read", (), args, op.ty))
            n = self.const_of(args[1])
            if isinstance(n, int):
                self.set_info(res, width=8 * n)
            return res

        if kind == "mem_write":
            return self.emit(TraceOp("mem_write", (), args))

        if kind == "guard_true":
            cond = args[0]
            c = self.const_of(cond)
            if c is not None:
                assert c is True or c == 1, "recorded guard would always fail"
                return ("k", None)
            key = ("t", cond)
            if key in self.guarded:
                return ("k", None)
            self.guarded.add(key)
            res = self.emit(TraceOp("guard_true", (), (cond,)))
            self._refine_from_guard(cond)
            return res

        if kind == "guard_value_eq":
            val, expect = args
            c = self.const_of(val)
            if c is not None:
                assert c == expect[1], "recorded guard would always fail"
                return ("k", None)
            key = ("eq", val, repr(expect[1]))
            if key in self.guarded:
                return ("k", None)
            self.guarded.add(key)
            res = self.emit(TraceOp("guard_value_eq", (), (val, expect)))
            if val[0] == "v":
                self.forward[val[1]] = expect
            return res

        # pure and aggregate operations
        return self.visit_pure(op, args)

    def visit_pure(self, op, args):
        kind = op.kind

        if kind == "cast_bv_to_generic":
            self.set_info(args[0], width=op.static[0])
            return args[0]
        if kind == "cast_i64_to_int":
            return args[0]
        if kind == "cast_int_to_i64":
            v = self.const_of(args[0])
            if v is not None:
                if isinstance(v, IntG) and -(1 << 63) <= v.val < (1 << 63):
                    return ("k", v.val)
                if isinstance(v, int) and -(1 << 63) <= v < (1 << 63):
                    return ("k", v)
            # trace integers are exact; the range check passed at record time
            # and any later overflow shows up in the producing operation
            return args[0]
        if kind == "cast_bv_from_generic":
            w = self.width_of(args[0])
            if w == op.static[0]:
                return args[0]
            res = self.emit(TraceOp(kind, op.static, args, op.ty))
            self.set_info(res, width=op.static[0])
            return res

        # constant folding through the shared op implementations
        if self.all_const(args) and kind in OP_IMPLS:
            try:
                value = OP_IMPLS[kind](self.rt, op.static, *[a[1] for a in args])
                return ("k", value)
            except ModelTrap:
                pass  # keep the op; it traps identically at run time

        kind, op_static, args = self._specialize(op, kind, args)

        fw = self._identity(kind, op_static, args)
        if fw is not None:
            return fw
        folded = self._fold_via_tnums(kind, op_static, args)
        if folded is not None:
            return folded
        forwarded = self._forward_aggregates(kind, op_static, args)
        if forwarded is not None:
            return forwarded

        res = self.emit(TraceOp(kind, op_static, args, op.ty))
        self._annotate(res, kind, op_static, args)
        return res

    def _specialize(self, op, kind, args):
        """Swap generic operations for fixed-width variants when operand
        widths are statically known inside the trace."""
        static = op.static
        if kind in BV_SPECIALIZE:
            w0, w1 = self.width_of(args[0]), self.width_of(args[1])
            if w0 is not None and w0 == w1:
                return BV_SPECIALIZE[kind], (w0,), args
        elif kind == "not_bits":
            w = self.width_of(args[0])
            if w is not None:
                return "not_bits_bv_c", (w,), args
        elif kind == "eq_bits":
            w0, w1 = self.width_of(args[0]), self.width_of(args[1])
            if w0 is not None and w0 == w1:
                return "eq_bits_bv_c", (w0,), args
        elif kind in ("shiftl", "shiftr", "arith_shiftr"):
            w = self.width_of(args[0])
            amt = self.const_of(args[1])
            if w is not None and amt is not None:
                amt_i = amt.val if isinstance(amt, IntG) else amt
                return kind + "_bv_c", (w,), (args[0], ("k", amt_i))
        elif kind in ("sign_extend", "zero_extend"):
            w = self.width_of(args[0])
            target = self.const_of(args[1])
            if target is not None:
                target = target.val if isinstance(target, IntG) else target
            if w is not None and isinstance(target, int) and w <= target <= 64:
                return kind + "_bv_c", (w, target), (args[0],)
        elif kind == "vector_subrange":
            w = self.width_of(args[0])
            hi = self.const_of(args[1])
            lo = self.const_of(args[2])
            hi = hi.val if isinstance(hi, IntG) else hi
            lo = lo.val if isinstance(lo, IntG) else lo
            if w is not None and isinstance(hi, int) and isinstance(lo, int) \
                    and 0 <= lo <= hi < w:
                return "vector_subrange_bv_c", (w, hi, lo), (args[0],)
        elif kind == "bitvector_concat":
            w0, w1 = self.width_of(args[0]), self.width_of(args[1])
            if w0 is not None and w1 is not None and w0 + w1 <= 64:
                return "bitvector_concat_bv_c", (w0, w1), args
        elif kind == "bitvector_length":
            w = self.width_of(args[0])
            if w is not None:
                return "bitvector_length_bv_c", (w,), args
        elif kind == "signed":
            w = self.width_of(args[0])
            if w is not None and w <= 64:
                return "signed_bv_c", (w,), args
        elif kind == "unsigned":
            w = self.width_of(args[0])
            if w is not None and w <= 63:
                return "unsigned_bv_c", (w,), args
        elif kind == "int_to_bits":
            length = self.const_of(args[0])
            length = length.val if isinstance(length, IntG) else length
            if isinstance(length, int) and 1 <= length <= 64:
                return "int_to_bits_bv_c", (length,), (args[1],)
        elif kind in ("add_int", "sub_int", "mul_int", "eq_int", "lt_int",
                      "lteq_int", "gt_int", "gteq_int", "neg_int"):
            # trace integers are exact; run the generic implementation
            return kind, static, args
        return kind, static, args

    def _annotate(self, res, kind, static, args):
        if kind in TNUM_MASKED_BINARY:
            w = static[0]
            t = TNUM_MASKED_BINARY[kind](self.tnum_of(args[0]), self.tnum_of(args[1]))
            t = kb.transfer_and(t, kb.from_constant((1 << w) - 1))
            self.set_info(res, width=w, tnum=t)
        elif kind == "not_bits_bv_c":
            w = static[0]
            t = kb.transfer_and(
                kb.transfer_not(self.tnum_of(args[0])),
                kb.from_constant((1 << w) - 1),
            )
            self.set_info(res, width=w, tnum=t)
        elif kind in ("shiftl_bv_c", "shiftr_bv_c"):
            w = static[0]
            amt = args[1][1] if args[1][0] == "k" else None
            if isinstance(amt, int) and 0 <= amt <= 63:
                f = kb.transfer_shl_const if kind == "shiftl_bv_c" else kb.transfer_lshr_const
                t = kb.transfer_and(
                    f(self.tnum_of(args[0]), amt), kb.from_constant((1 << w) - 1)
                )
                self.set_info(res, width=w, tnum=t)
            else:
                self.set_info(res, width=w)
        elif kind == "arith_shiftr_bv_c":
            self.set_info(res, width=static[0])
        elif kind == "vector_subrange_bv_c":
            w, hi, lo = static
            t = kb.transfer_and(
                kb.transfer_lshr_const(self.tnum_of(args[0]), lo),
                kb.from_constant((1 << (hi - lo + 1)) - 1),
            )
            self.set_info(res, width=hi - lo + 1, tnum=t)
        elif kind == "bitvector_concat_bv_c":
            w0, w1 = static
            t = kb.transfer_or(
                kb.transfer_shl_const(self.tnum_of(args[0]), w1),
                self.tnum_of(args[1]),
            )
            self.set_info(res, width=w0 + w1, tnum=t)
        elif kind in ("sign_extend_bv_c", "zero_extend_bv_c"):
            f, target = static
            t = self.tnum_of(args[0])
            if kind == "sign_extend_bv_c" and f < 64:
                sign_known_zero = bool(t.known_zeros >> (f - 1) & 1)
                sign_known_one = bool(t.value >> (f - 1) & 1)
                upper = ((1 << target) - 1) & ~((1 << f) - 1) & kb.MASK64
                if sign_known_one:
                    t = kb.TristateNumber(t.value | upper, t.mask)
                elif not sign_known_zero:
                    t = kb.TristateNumber(t.value, t.mask | upper)
            self.set_info(res, width=target, tnum=t)
        elif kind == "unsigned_bv_c":
            self.set_info(res, tnum=self.tnum_of(args[0]))
        elif kind in INT_TNUM_BINARY:
            t = INT_TNUM_BINARY[kind](self.tnum_of(args[0]), self.tnum_of(args[1]))
            self.set_info(res, tnum=t)

    def _identity(self, kind, static, args):
        if kind in ("add_bits_bv_c", "sub_bits_bv_c", "or_bits_bv_c", "xor_bits_bv_c"):
            c1 = self.const_of(args[1])
            if isinstance(c1, (BvF, BvG)) and c1.bits == 0:
                return args[0]
            if kind in ("add_bits_bv_c", "or_bits_bv_c", "xor_bits_bv_c"):
                c0 = self.const_of(args[0])
                if isinstance(c0, (BvF, BvG)) and c0.bits == 0:
                    return args[1]
        if kind == "and_bits_bv_c":
            w = static[0]
            c1 = self.const_of(args[1])
            if isinstance(c1, (BvF, BvG)) and c1.bits == (1 << w) - 1:
                return args[0]
        if kind in ("add_int_i64", "sub_int_i64"):
            c1 = self.const_of(args[1])
            if c1 == 0:
                return args[0]
        return None

    def _fold_via_tnums(self, kind, static, args):
        if not self.use_knownbits:
            return None
        if kind == "eq_bits_bv_c":
            w = static[0]
            diff = kb.transfer_xor(self.tnum_of(args[0]), self.tnum_of(args[1]))
            verdict = kb.known_eq_zero(diff, (1 << w) - 1)
            if verdict == kb.YES:
                return ("k", True)
            if verdict == kb.NO:
                return ("k", False)
        return None

    def _forward_aggregates(self, kind, static, args):
        if kind == "union_tag":
            d = self._def_of(args[0])
            if d is not None and d.kind == "make_union":
                return ("k", d.static[2])
        elif kind == "union_field":
            d = self._def_of(args[0])
            if d is not None and d.kind == "make_union" and d.static[:2] == static[:2]:
                return d.args[0]
        elif kind == "record_get":
            d = self._def_of(args[0])
            if d is not None and d.kind == "record_make":
                return d.args[static[1]]
        return None

    def _def_of(self, arg):
        if arg[0] != "v":
            return None
        return self.defs.get(arg[1])

    def _refine_from_guard(self, cond):
        """guard_true(eq(and(x, 2^k-1), 0)) proves x's low bits zero."""
        if not self.use_knownbits:
            # even without knownbits the condition itself is now known true
            if cond[0] == "v":
                self.forward[cond[1]] = ("k", True)
            return
        if cond[0] == "v":
            self.forward[cond[1]] = ("k", True)
        d = self._def_of(cond)
        if d is None or d.kind != "eq_bits_bv_c":
            return
        a, b = d.args
        cb = self.const_of(b)
        if not isinstance(cb, (BvF, BvG)) or cb.bits != 0:
            a, b = b, a
            cb = self.const_of(b)
        if not isinstance(cb, (BvF, BvG)) or cb.bits != 0:
            return
        da = self._def_of(a)
        if da is None or da.kind != "and_bits_bv_c":
            return
        x, m = da.args
        cm = self.const_of(m)
        if not isinstance(cm, (BvF, BvG)):
            x, m = m, x
            cm = self.const_of(m)
        if not isinstance(cm, (BvF, BvG)) or x[0] != "v":
            return
        # bits selected by the mask are zero in x
        old = self.tnums.get(x[1], kb.TOP)
        refined = kb.TristateNumber(old.value & ~cm.bits, old.mask & ~cm.bits & kb.MASK64)
        self.tnums[x[1]] = refined
        self.trace.tnums[x[1]] = refined


def _tick_written_regs(program):
    tick = program.header.tick
    if tick is None:
        return frozenset()
    written = set()
    seen = set()
    work = [tick]
    while work:
        fname = work.pop()
        if fname in seen or fname not in program.functions:
            continue
        seen.add(fname)
        for block in program.functions[fname].blocks.values():
            for stmt in block.stmts:
                if stmt.op.name == "write_reg":
                    written.add(stmt.op.static[0])
                elif stmt.op.name == "call":
                    work.append(stmt.op.static[0])
    return frozenset(written)


ALWAYS_LIVE = frozenset(
    ["guard_pc_eq", "guard_true", "guard_value_eq", "halt_check",
     "write_reg", "mem_write", "mem_read", "fetch",
     "cast_bv_from_generic", "cast_int_to_i64"]
)


def _liveness(trace):
    ops = trace.opt
    live = [op.kind in ALWAYS_LIVE for op in ops]
    for i in reversed(range(len(ops))):
        if not live[i]:
            continue
        for a in ops[i].args:
            if a[0] == "v":
                live[a[1]] = True
    remap = {}
    kept = []
    for i, op in enumerate(ops):
        if not live[i]:
            continue
        op.args = tuple(
            ("v", remap[a[1]]) if a[0] == "v" else a for a in op.args
        )
        remap[i] = len(kept)
        kept.append(op)
    trace.opt = kept
    trace.tnums = {
        remap[i]: t for i, t in trace.tnums.items() if i in remap
    }


def optimize(trace, memory, program, use_knownbits=True):
    """Optimize trace.raw into trace.opt; fills dependency words."""
    trace.deps = set()
    trace.tnums = {}
    _Opt(trace, memory, program, use_knownbits).run()
    return trace


# ---------------------------------------------------------------------------
# trace execution


def execute_trace(ctx, trace, engine):
    memory = ctx.memory
    rt = ctx.rt
    anchor = trace.anchor
    pc_name = ctx.pc_name
    ops = trace.opt
    while True:
        if not trace.valid or ctx.regs[pc_name].bits != anchor:
            return
        snapshot = dict(ctx.regs)
        snap_count = ctx.count
        undo = []
        vals = [None] * len(ops)
        micro = 0

        def restore():
            ctx.regs = dict(snapshot)
            ctx.count = snap_count
            for addr, n, old in reversed(undo):
                memory.poke(addr, n, old)

        def guard_exit():
            restore()
            engine.guard_exits += 1

        i = 0
        try:
            for i, op in enumerate(ops):
                micro += 1
                kind = op.kind
                args = op.args
                if kind == "halt_check":
                    snapshot = dict(ctx.regs)
                    snap_count = ctx.count
                    undo = []
                    if ctx.boundary():
                        ctx.micro_ops += micro
                        return  # budget stop at a clean boundary
                    continue
                if kind == "read_reg":
                    vals[i] = ctx.regs[op.static[0]]
                    continue
                if kind == "write_reg":
                    a = args[0]
                    v = vals[a[1]] if a[0] == "v" else a[1]
                    # casts are elided inside traces, so restore the declared
                    # register representation here
                    if type(v) is BvG:
                        if isinstance(ctx.program.registers[op.static[0]], BvFixed):
                            v = BvF(v.width, v.bits)
                    elif type(v) is IntG:
                        if isinstance(ctx.program.registers[op.static[0]], IntMachine):
                            v = v.val
                    ctx.regs[op.static[0]] = v
                    continue
                if kind == "guard_true":
                    a = args[0]
                    if not (vals[a[1]] if a[0] == "v" else a[1]):
                        ctx.micro_ops += micro
                        guard_exit()
                        return
                    continue
                if kind == "guard_value_eq":
                    a, b = args
                    va = vals[a[1]] if a[0] == "v" else a[1]
                    vb = vals[b[1]] if b[0] == "v" else b[1]
                    if va != vb:
                        ctx.micro_ops += micro
                        guard_exit()
                        return
                    continue
                if kind == "guard_pc_eq":
                    if ctx.regs[pc_name].bits != op.static[0]:
                        ctx.micro_ops += micro
                        guard_exit()
                        return
                    continue
                if kind == "fetch":
                    a = args[0]
                    addr = vals[a[1]] if a[0] == "v" else a[1]
                    raw, _ = memory.fetch(addr.bits, op.nbytes)
                    vals[i] = BvF(8 * op.nbytes, raw)
                    continue
                if kind == "mem_read":
                    a, bn = args
                    addr = vals[a[1]] if a[0] == "v" else a[1]
                    n = vals[bn[1]] if bn[0] == "v" else bn[1]
                    n = n.val if isinstance(n, IntG) else n
                    if n not in (1, 2, 4, 8):
                        raise ModelTrap("memory access size %r" % (n,))
                    vals[i] = rt.bv_generic(8 * n, memory.read(addr.bits, n))
                    continue
                if kind == "mem_write":
                    a, bn, c = args
                    addr = vals[a[1]] if a[0] == "v" else a[1]
                    n = vals[bn[1]] if bn[0] == "v" else bn[1]
                    n = n.val if isinstance(n, IntG) else n
                    v = vals[c[1]] if c[0] == "v" else c[1]
                    if n not in (1, 2, 4, 8):
                        raise ModelTrap("memory access size %r" % (n,))
                    if v.width != 8 * n:
                        raise ModelTrap(
                            "store of %d-bit value with %d-byte access" % (v.width, n)
                        )
                    undo.append((addr.bits, n, memory.read(addr.bits, n)))
                    memory.write(addr.bits, n, v.bits)
                    if not trace.valid:
                        # the store invalidated this very trace; undo and let
                        # the interpreter redo the instruction on fresh code
                        ctx.micro_ops += micro
                        guard_exit()
                        return
                    continue
                # pure operation
                impl = OP_IMPLS[kind]
                resolved = [
                    vals[a[1]] if a[0] == "v" else a[1] for a in args
                ]
                vals[i] = impl(rt, op.static, *resolved)
        except ModelTrap:
            ctx.micro_ops += micro
            raise
        ctx.micro_ops += micro
