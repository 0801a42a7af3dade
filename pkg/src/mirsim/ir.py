"""Typed basic-block IR for ISA models: types, operation catalog, verifier.

Programs come in two flavours sharing one representation: the parsed
*mutable-local* form (locals may be assigned repeatedly, plain ``copy``
statements allowed, blocks carry no parameters) and *SSA* form (every value
assigned exactly once, joins expressed as block parameters fed by ``goto``
arguments).  ``Function.ssa`` records which contract a function obeys and
:func:`verify` checks the corresponding invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class MirType:
    pass


@dataclass(frozen=True)
class BvFixed(MirType):
    width: int

    def __str__(self):
        return "%%bv%d" % self.width


@dataclass(frozen=True)
class BvGeneric(MirType):
    def __str__(self):
        return "%bv"


@dataclass(frozen=True)
class IntMachine(MirType):
    def __str__(self):
        return "%i64"


@dataclass(frozen=True)
class IntGeneric(MirType):
    def __str__(self):
        return "%i"


@dataclass(frozen=True)
class BoolT(MirType):
    def __str__(self):
        return "%bool"


@dataclass(frozen=True)
class UnitT(MirType):
    def __str__(self):
        return "%unit"


@dataclass(frozen=True)
class EnumT(MirType):
    name: str

    def __str__(self):
        return "%%enum %s" % self.name


@dataclass(frozen=True)
class UnionT(MirType):
    name: str

    def __str__(self):
        return "%%union %s" % self.name


@dataclass(frozen=True)
class RecordT(MirType):
    name: str

    def __str__(self):
        return "%%record %s" % self.name


BVG = BvGeneric()
I64 = IntMachine()
INTG = IntGeneric()
BOOL = BoolT()
UNIT = UnitT()
BV64 = BvFixed(64)


def is_generic(ty):
    """Allocating result classification: generic bitvectors and integers."""
    return isinstance(ty, (BvGeneric, IntGeneric))


# ---------------------------------------------------------------------------
# source positions


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int

    def __str__(self):
        return "%s:%d:%d" % (self.file, self.line, self.column)


NO_SPAN = SourceSpan("<none>", 1, 1, 0)


# ---------------------------------------------------------------------------
# operations and operands


@dataclass(frozen=True)
class Op:
    """One builtin operation instance: catalog name plus static arguments
    (widths, register/field/variant/function names)."""

    name: str
    static: tuple = ()

    def __str__(self):
        if not self.static:
            return self.name
        shown = [s for s in self.static if not isinstance(s, int) or s >= 0]
        return "%s<%s>" % (self.name, ",".join(str(s) for s in self.static))


@dataclass
class Literal:
    """Constant operand.  ``width`` is set for 0b/0x spellings; ``ty`` is
    resolved against the expected operand slot during verification."""

    value: object
    width: int | None = None
    ty: MirType | None = field(default=None, compare=False)
    enum: tuple | None = None  # (enum name, member name) before resolution

    def __repr__(self):
        return "Literal(%r, width=%r, ty=%r)" % (self.value, self.width, self.ty)


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass
class Statement:
    dest: str
    ty: MirType
    op: Op
    args: list
    span: SourceSpan = field(default=NO_SPAN, compare=False)


# terminators


@dataclass
class Goto:
    label: str
    args: list = field(default_factory=list)
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass
class Branch:
    cond: object
    then_label: str
    else_label: str
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass
class Return:
    value: object
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass
class Halt:
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass
class TrapTerm:
    message: str = "trap"
    span: SourceSpan = field(default=NO_SPAN, compare=False)


@dataclass
class Block:
    label: str
    params: list = field(default_factory=list)  # [(name, type)]
    stmts: list = field(default_factory=list)
    term: object = None


@dataclass
class Function:
    name: str
    params: list  # [(name, type)]
    ret: MirType
    blocks: dict  # label -> Block, entry first
    ssa: bool = False

    @property
    def entry(self):
        return next(iter(self.blocks))

    def block_list(self):
        return list(self.blocks.values())


@dataclass
class Header:
    loop: str | None = None
    pc: str | None = None
    tick: str | None = None


@dataclass
class Program:
    header: Header = field(default_factory=Header)
    enums: dict = field(default_factory=dict)  # name -> [member...]
    unions: dict = field(default_factory=dict)  # name -> [(variant, type)...]
    records: dict = field(default_factory=dict)  # name -> [(field, type)...]
    registers: dict = field(default_factory=dict)  # name -> type
    functions: dict = field(default_factory=dict)  # name -> Function

    def union_variants(self, name):
        return [v for v, _ in self.unions[name]]

    def record_fields(self, name):
        return self.records[name]


# ---------------------------------------------------------------------------
# operation catalog

COPY = "copy"  # mutable-local form only; eliminated by SSA construction

GENERIC_BV_BINARY = ("add_bits", "sub_bits", "and_bits", "or_bits", "xor_bits")
GENERIC_SHIFTS = ("shiftl", "shiftr", "arith_shiftr")
GENERIC_EXTENDS = ("sign_extend", "zero_extend")
GENERIC_INT_BINARY = ("add_int", "sub_int", "mul_int")
INT_COMPARES = ("eq_int", "lt_int", "lteq_int", "gt_int", "gteq_int")

# generic op -> specialized suffix form
SPECIALIZED_OF = {name: name + "_bv_c" for name in GENERIC_BV_BINARY}
SPECIALIZED_OF.update({name: name + "_bv_c" for name in GENERIC_SHIFTS})
SPECIALIZED_OF.update({name: name + "_bv_c" for name in GENERIC_EXTENDS})
SPECIALIZED_OF.update(
    {
        "not_bits": "not_bits_bv_c",
        "eq_bits": "eq_bits_bv_c",
        "vector_subrange": "vector_subrange_bv_c",
        "bitvector_concat": "bitvector_concat_bv_c",
        "bitvector_length": "bitvector_length_bv_c",
        "signed": "signed_bv_c",
        "unsigned": "unsigned_bv_c",
        "int_to_bits": "int_to_bits_bv_c",
        "add_int": "add_int_i64",
        "sub_int": "sub_int_i64",
        "mul_int": "mul_int_i64",
        "neg_int": "neg_int_i64",
        "eq_int": "eq_int_i64",
        "lt_int": "lt_int_i64",
        "lteq_int": "lteq_int_i64",
        "gt_int": "gt_int_i64",
        "gteq_int": "gteq_int_i64",
    }
)

STATE_OPS = frozenset(
    ["read_reg", "write_reg", "mem_read", "mem_write", "fetch"]
)
# ops kept by dead-code elimination even when unused: state access, calls,
# the budget check, and checked conversions (their trap is observable)
CHECKED_OPS = frozenset(["cast_bv_from_generic", "cast_int_to_i64", "union_field"])
EFFECT_OPS = STATE_OPS | frozenset(["call", "halt_check"])


def is_pure(op):
    return op.name not in EFFECT_OPS and op.name != COPY


def is_removable(op):
    return is_pure(op) and op.name not in CHECKED_OPS


ALL_OPS = frozenset(
    list(GENERIC_BV_BINARY)
    + list(GENERIC_SHIFTS)
    + list(GENERIC_EXTENDS)
    + list(GENERIC_INT_BINARY)
    + list(INT_COMPARES)
    + list(SPECIALIZED_OF.values())
    + [
        "not_bits",
        "eq_bits",
        "vector_subrange",
        "bitvector_concat",
        "bitvector_length",
        "signed",
        "unsigned",
        "neg_int",
        "int_to_bits",
        "cast_bv_to_generic",
        "cast_bv_from_generic",
        "cast_i64_to_int",
        "cast_int_to_i64",
        "eq_enum",
        "read_reg",
        "write_reg",
        "mem_read",
        "mem_write",
        "fetch",
        "make_union",
        "union_tag",
        "union_field",
        "record_make",
        "record_get",
        "record_set",
        "call",
        "halt_check",
    ]
)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class Diagnostic:
    function: str
    block: str | None
    stmt: int | None
    message: str
    span: SourceSpan = NO_SPAN

    def __str__(self):
        where = self.function
        if self.block is not None:
            where += ":" + self.block
        if self.stmt is not None:
            where += ":%d" % self.stmt
        return "%s: %s" % (where, self.message)


class TypeError_(Exception):
    pass


def _fail(msg):
    raise TypeError_(msg)


def _valid_width(w):
    return isinstance(w, int) and 1 <= w <= 64


def check_statement(program, stmt, env):
    """Type-check one statement against the catalog, resolving literal slot
    types and name-to-index static arguments in place.

    ``env`` maps in-scope variable names to their types.  Raises
    :class:`TypeError_` with a message on any violation; on success the
    declared result type has been checked against the op signature.
    """
    op = stmt.op
    name = op.name
    s = op.static

    def operand_ty(i):
        a = stmt.args[i]
        if isinstance(a, VarRef):
            if a.name not in env:
                _fail("use of undefined value %r" % a.name)
            return env[a.name]
        return None  # literal: typed against the slot

    def want(i, expected):
        a = stmt.args[i]
        if isinstance(a, VarRef):
            actual = env[a.name] if a.name in env else _fail(
                "use of undefined value %r" % a.name
            )
            if actual != expected:
                _fail(
                    "operand %d of %s has type %s, expected %s"
                    % (i, name, actual, expected)
                )
            return
        _type_literal(program, a, expected, name)

    def arity(n):
        if len(stmt.args) != n:
            _fail("%s takes %d operands, got %d" % (name, n, len(stmt.args)))

    def statics(n):
        if len(s) != n:
            _fail("%s takes %d static arguments, got %d" % (name, n, len(s)))

    def result(expected):
        if stmt.ty != expected:
            _fail(
                "result of %s declared %s, expected %s" % (name, stmt.ty, expected)
            )

    if name in GENERIC_BV_BINARY or name == "bitvector_concat":
        statics(0), arity(2), want(0, BVG), want(1, BVG), result(BVG)
    elif name == "not_bits":
        statics(0), arity(1), want(0, BVG), result(BVG)
    elif name == "eq_bits":
        statics(0), arity(2), want(0, BVG), want(1, BVG), result(BOOL)
    elif name in GENERIC_SHIFTS or name in GENERIC_EXTENDS:
        statics(0), arity(2), want(0, BVG), want(1, INTG), result(BVG)
    elif name == "vector_subrange":
        statics(0), arity(3), want(0, BVG), want(1, INTG), want(2, INTG), result(BVG)
    elif name == "bitvector_length":
        statics(0), arity(1), want(0, BVG), result(INTG)
    elif name in ("signed", "unsigned"):
        statics(0), arity(1), want(0, BVG), result(INTG)
    elif name in GENERIC_INT_BINARY:
        statics(0), arity(2), want(0, INTG), want(1, INTG), result(INTG)
    elif name == "neg_int":
        statics(0), arity(1), want(0, INTG), result(INTG)
    elif name in INT_COMPARES:
        statics(0), arity(2), want(0, INTG), want(1, INTG), result(BOOL)
    elif name == "int_to_bits":
        statics(0), arity(2), want(0, INTG), want(1, INTG), result(BVG)
    elif name == "cast_bv_to_generic":
        statics(1)
        _valid_width(s[0]) or _fail("bad width %r" % (s[0],))
        arity(1), want(0, BvFixed(s[0])), result(BVG)
    elif name == "cast_bv_from_generic":
        statics(1)
        _valid_width(s[0]) or _fail("bad width %r" % (s[0],))
        arity(1), want(0, BVG), result(BvFixed(s[0]))
    elif name == "cast_i64_to_int":
        statics(0), arity(1), want(0, I64), result(INTG)
    elif name == "cast_int_to_i64":
        statics(0), arity(1), want(0, INTG), result(I64)
    elif name in (
        "add_bits_bv_c",
        "sub_bits_bv_c",
        "and_bits_bv_c",
        "or_bits_bv_c",
        "xor_bits_bv_c",
    ):
        statics(1)
        _valid_width(s[0]) or _fail("bad width %r" % (s[0],))
        t = BvFixed(s[0])
        arity(2), want(0, t), want(1, t), result(t)
    elif name == "not_bits_bv_c":
        statics(1), arity(1), want(0, BvFixed(s[0])), result(BvFixed(s[0]))
    elif name == "eq_bits_bv_c":
        statics(1)
        _valid_width(s[0]) or _fail("bad width %r" % (s[0],))
        arity(2), want(0, BvFixed(s[0])), want(1, BvFixed(s[0])), result(BOOL)
    elif name in ("shiftl_bv_c", "shiftr_bv_c", "arith_shiftr_bv_c"):
        statics(1), arity(2), want(0, BvFixed(s[0])), want(1, I64)
        result(BvFixed(s[0]))
    elif name in ("sign_extend_bv_c", "zero_extend_bv_c"):
        statics(2)
        (_valid_width(s[0]) and _valid_width(s[1]) and s[0] <= s[1]) or _fail(
            "bad extend widths %r" % (s,)
        )
        arity(1), want(0, BvFixed(s[0])), result(BvFixed(s[1]))
    elif name == "vector_subrange_bv_c":
        statics(3)
        w, hi, lo = s
        (_valid_width(w) and 0 <= lo <= hi < w) or _fail("bad subrange %r" % (s,))
        arity(1), want(0, BvFixed(w)), result(BvFixed(hi - lo + 1))
    elif name == "bitvector_concat_bv_c":
        statics(2)
        (_valid_width(s[0]) and _valid_width(s[1]) and s[0] + s[1] <= 64) or _fail(
            "bad concat widths %r" % (s,)
        )
        arity(2), want(0, BvFixed(s[0])), want(1, BvFixed(s[1]))
        result(BvFixed(s[0] + s[1]))
    elif name == "bitvector_length_bv_c":
        statics(1), arity(1), want(0, BvFixed(s[0])), result(I64)
    elif name == "signed_bv_c":
        statics(1)
        _valid_width(s[0]) or _fail("bad width %r" % (s[0],))
        arity(1), want(0, BvFixed(s[0])), result(I64)
    elif name == "unsigned_bv_c":
        statics(1)
        (_valid_width(s[0]) and s[0] <= 63) or _fail(
            "unsigned_bv_c requires width <= 63, got %r" % (s[0],)
        )
        arity(1), want(0, BvFixed(s[0])), result(I64)
    elif name in ("add_int_i64", "sub_int_i64", "mul_int_i64"):
        statics(0), arity(2), want(0, I64), want(1, I64), result(I64)
    elif name == "neg_int_i64":
        statics(0), arity(1), want(0, I64), result(I64)
    elif name in ("eq_int_i64", "lt_int_i64", "lteq_int_i64", "gt_int_i64", "gteq_int_i64"):
        statics(0), arity(2), want(0, I64), want(1, I64), result(BOOL)
    elif name == "int_to_bits_bv_c":
        statics(1)
        _valid_width(s[0]) or _fail("bad width %r" % (s[0],))
        arity(1), want(0, I64), result(BvFixed(s[0]))
    elif name == "eq_enum":
        statics(0), arity(2)
        t0 = operand_ty(0) or operand_ty(1)
        if not isinstance(t0, EnumT):
            _fail("eq_enum needs enum operands")
        want(0, t0), want(1, t0), result(BOOL)
    elif name == "read_reg":
        statics(1), arity(0)
        if s[0] not in program.registers:
            _fail("unknown register %r" % (s[0],))
        result(program.registers[s[0]])
    elif name == "write_reg":
        statics(1), arity(1)
        if s[0] not in program.registers:
            _fail("unknown register %r" % (s[0],))
        want(0, program.registers[s[0]]), result(UNIT)
    elif name == "mem_read":
        statics(0), arity(2), want(0, BV64), want(1, I64), result(BVG)
    elif name == "mem_write":
        statics(0), arity(3), want(0, BV64), want(1, I64), want(2, BVG)
        result(UNIT)
    elif name == "fetch":
        statics(0), arity(2), want(0, BV64)
        nb = stmt.args[1]
        if not isinstance(nb, Literal) or nb.value not in (1, 2, 4, 8):
            _fail("fetch size must be a literal in {1,2,4,8}")
        _type_literal(program, nb, I64, name)
        result(BvFixed(8 * nb.value))
    elif name == "make_union":
        if len(s) < 2:
            _fail("make_union<union::variant> needs two static arguments")
        union, variant = s[0], s[1]
        if union not in program.unions:
            _fail("unknown union %r" % (union,))
        variants = program.unions[union]
        for idx, (vname, vty) in enumerate(variants):
            if vname == variant:
                stmt.op = Op(name, (union, variant, idx))
                arity(1), want(0, vty), result(UnionT(union))
                break
        else:
            _fail("union %s has no variant %r" % (union, variant))
    elif name == "union_tag":
        statics(0), arity(1)
        t0 = operand_ty(0)
        if not isinstance(t0, UnionT):
            _fail("union_tag needs a union operand")
        result(I64)
    elif name == "union_field":
        if len(s) < 2:
            _fail("union_field<union::variant> needs two static arguments")
        union, variant = s[0], s[1]
        if union not in program.unions:
            _fail("unknown union %r" % (union,))
        for idx, (vname, vty) in enumerate(program.unions[union]):
            if vname == variant:
                stmt.op = Op(name, (union, variant, idx))
                arity(1), want(0, UnionT(union)), result(vty)
                break
        else:
            _fail("union %s has no variant %r" % (union, variant))
    elif name == "record_make":
        statics(1)
        if s[0] not in program.records:
            _fail("unknown record %r" % (s[0],))
        fields = program.records[s[0]]
        arity(len(fields))
        for i, (_, fty) in enumerate(fields):
            want(i, fty)
        result(RecordT(s[0]))
    elif name in ("record_get", "record_set"):
        if not s:
            _fail("%s<field> needs a static argument" % name)
        t0 = operand_ty(0)
        if not isinstance(t0, RecordT):
            _fail("%s needs a record operand" % name)
        fields = program.records[t0.name]
        for idx, (fname, fty) in enumerate(fields):
            if fname == s[0]:
                stmt.op = Op(name, (s[0], idx))
                break
        else:
            _fail("record %s has no field %r" % (t0.name, s[0]))
        if name == "record_get":
            arity(1), result(fty)
        else:
            arity(2), want(1, fty), result(t0)
    elif name == "call":
        statics(1)
        if s[0] not in program.functions:
            _fail("call of unknown function %r" % (s[0],))
        callee = program.functions[s[0]]
        arity(len(callee.params))
        for i, (_, pty) in enumerate(callee.params):
            want(i, pty)
        result(callee.ret)
    elif name == "halt_check":
        statics(0), arity(0), result(BOOL)
    elif name == COPY:
        arity(1), want(0, stmt.ty)
    else:
        _fail("unknown operation %r" % (name,))


def _type_literal(program, lit, expected, opname):
    """Resolve a literal against the slot type it is used at."""
    if lit.enum is not None:
        ename, member = lit.enum
        if not isinstance(expected, EnumT) or expected.name != ename:
            _fail("enum literal %s::%s used where %s expected" % (ename, member, expected))
        if ename not in program.enums:
            _fail("unknown enum %r" % (ename,))
        members = program.enums[ename]
        if member not in members:
            _fail("enum %s has no member %r" % (ename, member))
        lit.value = members.index(member)
        lit.ty = expected
        return
    if isinstance(expected, BvFixed):
        if lit.width is None or not isinstance(lit.value, int):
            _fail("%s expects a bitvector literal (0b/0x)" % opname)
        if lit.width != expected.width:
            _fail(
                "bitvector literal has width %d, expected %d"
                % (lit.width, expected.width)
            )
        lit.ty = expected
    elif isinstance(expected, BvGeneric):
        if lit.width is None or not isinstance(lit.value, int):
            _fail("%s expects a bitvector literal (0b/0x)" % opname)
        lit.ty = BVG
    elif isinstance(expected, IntMachine):
        if not isinstance(lit.value, int) or isinstance(lit.value, bool):
            _fail("%s expects an integer literal" % opname)
        if not -(1 << 63) <= lit.value < (1 << 63):
            _fail("integer literal out of 64-bit range")
        lit.ty = I64
    elif isinstance(expected, IntGeneric):
        if not isinstance(lit.value, int) or isinstance(lit.value, bool):
            _fail("%s expects an integer literal" % opname)
        lit.ty = INTG
    elif isinstance(expected, BoolT):
        if not isinstance(lit.value, bool):
            _fail("%s expects a boolean literal" % opname)
        lit.ty = BOOL
    elif isinstance(expected, UnitT):
        if lit.value is not None:
            _fail("%s expects the unit literal ()" % opname)
        lit.ty = UNIT
    else:
        _fail("literal cannot have type %s" % expected)


# ---------------------------------------------------------------------------
# control-flow helpers


def successors(block):
    t = block.term
    if isinstance(t, Goto):
        return [t.label]
    if isinstance(t, Branch):
        return [t.then_label, t.else_label]
    return []


def predecessors(func):
    preds = {label: [] for label in func.blocks}
    for label, block in func.blocks.items():
        for succ in successors(block):
            if succ in preds:
                preds[succ].append(label)
    return preds


def reverse_postorder(func):
    seen = set()
    order = []

    def walk(label):
        if label in seen or label not in func.blocks:
            return
        seen.add(label)
        for succ in successors(func.blocks[label]):
            walk(succ)
        order.append(label)

    walk(func.entry)
    order.reverse()
    return order


def dominators(func):
    """idom map (entry maps to itself), iterative over reverse postorder."""
    rpo = reverse_postorder(func)
    index = {label: i for i, label in enumerate(rpo)}
    preds = predecessors(func)
    idom = {func.entry: func.entry}

    def intersect(a, b):
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for label in rpo:
            if label == func.entry:
                continue
            new = None
            for p in preds[label]:
                if p in idom and p in index:
                    new = p if new is None else intersect(new, p)
            if new is not None and idom.get(label) != new:
                idom[label] = new
                changed = True
    return idom


def make_dominates(idom, entry):
    def dominates(a, b):
        while True:
            if a == b:
                return True
            if b == entry:
                return False
            nxt = idom.get(b)
            if nxt is None or nxt == b:
                return False
            b = nxt

    return dominates


# ---------------------------------------------------------------------------
# verifier


def _check_type_exists(program, ty):
    if isinstance(ty, BvFixed) and not _valid_width(ty.width):
        return "bitvector width %r out of 1..64" % (ty.width,)
    if isinstance(ty, EnumT) and ty.name not in program.enums:
        return "unknown enum %r" % (ty.name,)
    if isinstance(ty, UnionT) and ty.name not in program.unions:
        return "unknown union %r" % (ty.name,)
    if isinstance(ty, RecordT) and ty.name not in program.records:
        return "unknown record %r" % (ty.name,)
    return None


def verify(program, ssa=True):
    """Check program invariants; returns a list of diagnostics, empty on
    success.  With ``ssa=False`` only the weaker mutable-local contract is
    enforced (labels resolve, types check, no block parameters)."""
    diags = []

    def bad(fn, block, stmt, msg, span=NO_SPAN):
        diags.append(Diagnostic(fn, block, stmt, msg, span))

    for tname, decls in list(program.unions.items()) + list(program.records.items()):
        for member, ty in decls:
            msg = _check_type_exists(program, ty)
            if msg:
                bad("<types>", tname, None, msg)
    for rname, ty in program.registers.items():
        msg = _check_type_exists(program, ty)
        if msg:
            bad("<registers>", rname, None, msg)
    h = program.header
    if h.loop is not None and h.loop not in program.functions:
        bad("<header>", None, None, "loop function %r not defined" % h.loop)
    if h.tick is not None and h.tick not in program.functions:
        bad("<header>", None, None, "tick function %r not defined" % h.tick)
    if h.pc is not None and h.pc not in program.registers:
        bad("<header>", None, None, "pc register %r not declared" % h.pc)

    for fname, func in program.functions.items():
        diags.extend(_verify_function(program, func, ssa and func.ssa))
    return diags


def _verify_function(program, func, ssa):
    diags = []

    def bad(block, stmt, msg, span=NO_SPAN):
        diags.append(Diagnostic(func.name, block, stmt, msg, span))

    if not func.blocks:
        bad(None, None, "function has no blocks")
        return diags

    for _, ty in func.params:
        msg = _check_type_exists(program, ty)
        if msg:
            bad(None, None, msg)

    # label resolution and block-parameter policy
    for label, block in func.blocks.items():
        if block.term is None:
            bad(label, None, "block has no terminator")
            return diags
        for succ in successors(block):
            if succ not in func.blocks:
                bad(label, None, "jump to unknown block %r" % succ)
        if block.params and not ssa:
            bad(label, None, "block parameters are only allowed in SSA form")
        if block.params and label == func.entry:
            bad(label, None, "entry block cannot have parameters")
    if diags:
        return diags

    if ssa:
        diags.extend(_verify_ssa(program, func))
    else:
        diags.extend(_verify_mutable(program, func))
    return diags


def _verify_mutable(program, func):
    diags = []
    env = dict(func.params)

    # first pass: collect local types, demand consistency
    for label, block in func.blocks.items():
        for i, stmt in enumerate(block.stmts):
            prev = env.get(stmt.dest)
            if prev is not None and prev != stmt.ty:
                diags.append(
                    Diagnostic(
                        func.name,
                        label,
                        i,
                        "local %r reassigned at type %s, was %s"
                        % (stmt.dest, stmt.ty, prev),
                        stmt.span,
                    )
                )
            env[stmt.dest] = stmt.ty
            msg = _check_type_exists(program, stmt.ty)
            if msg:
                diags.append(Diagnostic(func.name, label, i, msg, stmt.span))
    if diags:
        return diags

    for label, block in func.blocks.items():
        for i, stmt in enumerate(block.stmts):
            try:
                check_statement(program, stmt, env)
            except TypeError_ as e:
                diags.append(Diagnostic(func.name, label, i, str(e), stmt.span))
        diags.extend(_check_terminator(program, func, label, block, env, ssa=False))
    return diags


def _check_terminator(program, func, label, block, env, ssa):
    diags = []
    t = block.term

    def bad(msg):
        diags.append(
            Diagnostic(func.name, label, None, msg, getattr(t, "span", NO_SPAN))
        )

    def operand_check(operand, expected, what):
        if isinstance(operand, VarRef):
            ty = env.get(operand.name)
            if ty is None:
                bad("%s uses undefined value %r" % (what, operand.name))
            elif ty != expected:
                bad("%s has type %s, expected %s" % (what, ty, expected))
        else:
            try:
                _type_literal(program, operand, expected, what)
            except TypeError_ as e:
                bad(str(e))

    if isinstance(t, Goto):
        target = func.blocks[t.label]
        if not ssa:
            if t.args:
                bad("goto arguments are only allowed in SSA form")
        else:
            if len(t.args) != len(target.params):
                bad(
                    "goto %s passes %d arguments, target takes %d"
                    % (t.label, len(t.args), len(target.params))
                )
            else:
                for arg, (pname, pty) in zip(t.args, target.params):
                    operand_check(arg, pty, "goto argument for %r" % pname)
    elif isinstance(t, Branch):
        operand_check(t.cond, BOOL, "branch condition")
        if ssa:
            for tl in (t.then_label, t.else_label):
                if func.blocks[tl].params:
                    bad("branch target %r has parameters; split the edge" % tl)
    elif isinstance(t, Return):
        operand_check(t.value, func.ret, "return value")
    return diags


def _verify_ssa(program, func):
    diags = []
    env = dict(func.params)
    defs = {}  # name -> (label, index or None for params)

    for pname, _ in func.params:
        defs[pname] = (func.entry, None)
    for label, block in func.blocks.items():
        for pname, pty in block.params:
            if pname in defs:
                diags.append(
                    Diagnostic(func.name, label, None, "value %r defined twice" % pname)
                )
            defs[pname] = (label, None)
            env[pname] = pty
            msg = _check_type_exists(program, pty)
            if msg:
                diags.append(Diagnostic(func.name, label, None, msg))
        for i, stmt in enumerate(block.stmts):
            if stmt.op.name == COPY:
                diags.append(
                    Diagnostic(
                        func.name, label, i, "copy statements are not SSA", stmt.span
                    )
                )
            if stmt.dest in defs:
                diags.append(
                    Diagnostic(
                        func.name,
                        label,
                        i,
                        "value %r defined twice" % stmt.dest,
                        stmt.span,
                    )
                )
            defs[stmt.dest] = (label, i)
            env[stmt.dest] = stmt.ty
            msg = _check_type_exists(program, stmt.ty)
            if msg:
                diags.append(Diagnostic(func.name, label, i, msg, stmt.span))
    if diags:
        return diags

    for label, block in func.blocks.items():
        for i, stmt in enumerate(block.stmts):
            try:
                check_statement(program, stmt, env)
            except TypeError_ as e:
                diags.append(Diagnostic(func.name, label, i, str(e), stmt.span))
        diags.extend(_check_terminator(program, func, label, block, env, ssa=True))
    if diags:
        return diags

    # dominance: every use is reached by its definition
    idom = dominators(func)
    dominates = make_dominates(idom, func.entry)
    reachable = set(reverse_postorder(func))

    def use_ok(operand, label, index):
        if not isinstance(operand, VarRef):
            return True
        dloc = defs.get(operand.name)
        if dloc is None:
            return False
        dlabel, dindex = dloc
        if dlabel == label:
            return dindex is None or (index is None or dindex < index)
        return dominates(dlabel, label)

    for label, block in func.blocks.items():
        if label not in reachable:
            continue
        for i, stmt in enumerate(block.stmts):
            for a in stmt.args:
                if not use_ok(a, label, i):
                    diags.append(
                        Diagnostic(
                            func.name,
                            label,
                            i,
                            "use of %r is not dominated by its definition"
                            % a.name,
                            stmt.span,
                        )
                    )
        t = block.term
        operands = []
        if isinstance(t, Goto):
            operands = t.args
        elif isinstance(t, Branch):
            operands = [t.cond]
        elif isinstance(t, Return):
            operands = [t.value]
        for a in operands:
            if not use_ok(a, label, None):
                diags.append(
                    Diagnostic(
                        func.name,
                        label,
                        None,
                        "use of %r is not dominated by its definition" % a.name,
                    )
                )
    return diags


def clone_term(t):
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


def clone_function(func):
    """Structural copy; operands (VarRef/Literal) are shared, statement and
    block containers are fresh so passes can rewrite in place."""
    blocks = {}
    for label, block in func.blocks.items():
        blocks[label] = Block(
            label,
            list(block.params),
            [Statement(s.dest, s.ty, s.op, list(s.args), s.span) for s in block.stmts],
            clone_term(block.term),
        )
    return Function(func.name, list(func.params), func.ret, blocks, func.ssa)


def clone_program(program):
    return Program(
        header=program.header,
        enums=program.enums,
        unions=program.unions,
        records=program.records,
        registers=program.registers,
        functions={name: clone_function(f) for name, f in program.functions.items()},
    )


def iter_statements(func):
    for block in func.blocks.values():
        for stmt in block.stmts:
            yield block, stmt


def substitute_operands(func, subs):
    """Replace VarRef operands per subs (name -> operand) everywhere."""
    if not subs:
        return

    def sub(a):
        if isinstance(a, VarRef):
            return subs.get(a.name, a)
        return a

    for block in func.blocks.values():
        for stmt in block.stmts:
            stmt.args = [sub(a) for a in stmt.args]
        t = block.term
        if isinstance(t, Goto):
            t.args = [sub(a) for a in t.args]
        elif isinstance(t, Branch):
            t.cond = sub(t.cond)
        elif isinstance(t, Return):
            t.value = sub(t.value)


def count_generic_ops(func):
    """Number of statements producing a generic (allocating) value."""
    n = 0
    for block in func.blocks.values():
        for stmt in block.stmts:
            if is_generic(stmt.ty):
                n += 1
    return n
