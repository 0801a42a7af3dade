"""Textual front-end and pretty-printer for `.mir` model files.

The surface syntax is one statement per operation over named values:

    fn decode(instr: %bv32) -> %union ast {
    entry:
      gi: %bv = cast_bv_to_generic<32>(instr)
      opc: %bv = vector_subrange(gi, 6, 0)
      ...
      branch is_itype d_itype d_next
    }

Bitvector literals are written 0b/0x and carry their width from the digit
count; `//` comments run to end of line.  ``parse_program`` produces the
mutable-local form unless the text already uses SSA block parameters.
"""

from __future__ import annotations

from .ir import (
    ALL_OPS,
    BOOL,
    BVG,
    COPY,
    I64,
    INTG,
    UNIT,
    Block,
    Branch,
    BvFixed,
    EnumT,
    Function,
    Goto,
    Halt,
    Header,
    Literal,
    Op,
    Program,
    RecordT,
    Return,
    SourceSpan,
    Statement,
    TrapTerm,
    UnionT,
    VarRef,
)


class MirParseError(Exception):
    def __init__(self, message, span):
        super().__init__("%s: %s" % (span, message))
        self.message = message
        self.span = span


KEYWORDS = {
    "program",
    "enum",
    "union",
    "record",
    "register",
    "fn",
    "goto",
    "branch",
    "return",
    "halt",
    "trap",
    "true",
    "false",
}

PUNCT = ("->", "::", "{", "}", "(", ")", "<", ">", ",", ":", "=", "%")


class Token:
    __slots__ = ("kind", "text", "value", "width", "span")

    def __init__(self, kind, text, span, value=None, width=None):
        self.kind = kind  # name | int | bv | string | punct | eof
        self.text = text
        self.span = span
        self.value = value
        self.width = width

    def __repr__(self):
        return "Token(%s, %r)" % (self.kind, self.text)


def tokenize(text, filename):
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)

    def span(length):
        return SourceSpan(filename, line, col, length)

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(text[j + 1], text[j + 1]))
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise MirParseError("unterminated string", span(n - i))
            tokens.append(Token("string", text[i : j + 1], span(j + 1 - i), value="".join(out)))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1 if c == "-" else i
            if text.startswith("0x", j) or text.startswith("0b", j):
                base = 16 if text[j + 1] == "x" else 2
                k = j + 2
                while k < n and (text[k].isalnum() or text[k] == "_"):
                    k += 1
                digits = text[j + 2 : k].replace("_", "")
                if not digits:
                    raise MirParseError("empty numeric literal", span(k - i))
                try:
                    value = int(digits, base)
                except ValueError:
                    raise MirParseError("bad numeric literal %r" % text[i:k], span(k - i))
                width = len(digits) * (4 if base == 16 else 1)
                if c == "-":
                    raise MirParseError("bitvector literals cannot be negative", span(k - i))
                tokens.append(Token("bv", text[i:k], span(k - i), value=value, width=width))
                col += k - i
                i = k
                continue
            k = j
            while k < n and (text[k].isdigit() or text[k] == "_"):
                k += 1
            value = int(text[i:k].replace("_", ""))
            tokens.append(Token("int", text[i:k], span(k - i), value=value))
            col += k - i
            i = k
            continue
        if c.isalpha() or c == "_":
            k = i
            while k < n and (text[k].isalnum() or text[k] in "_.@"):
                k += 1
            tokens.append(Token("name", text[i:k], span(k - i)))
            col += k - i
            i = k
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, span(len(p))))
                col += len(p)
                i += len(p)
                break
        else:
            raise MirParseError("unexpected character %r" % c, span(1))
    tokens.append(Token("eof", "", SourceSpan(filename, line, col, 0)))
    return tokens


class Parser:
    def __init__(self, text, filename):
        self.tokens = tokenize(text, filename)
        self.pos = 0

    # token plumbing

    def peek(self, ahead=0):
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise MirParseError(msg, tok.span)

    def expect(self, kind, text=None):
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            self.error("expected %s, found %r" % (text or kind, tok.text or "end of input"), tok)
        return tok

    def at_punct(self, text):
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    def eat_punct(self, text):
        if self.at_punct(text):
            self.next()
            return True
        return False

    def name(self, what="name"):
        tok = self.expect("name")
        if tok.text in KEYWORDS:
            self.error("%r cannot be used as a %s" % (tok.text, what), tok)
        return tok

    # grammar

    def parse_program(self):
        program = Program()
        if self.peek().kind == "eof":
            self.error("empty program")
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind != "name":
                self.error("expected a declaration", tok)
            if tok.text == "program":
                self.parse_header(program)
            elif tok.text == "enum":
                self.parse_enum(program)
            elif tok.text == "union":
                self.parse_union(program)
            elif tok.text == "record":
                self.parse_record(program)
            elif tok.text == "register":
                self.parse_register(program)
            elif tok.text == "fn":
                self.parse_function(program)
            else:
                self.error("expected a declaration, found %r" % tok.text, tok)
        return program

    def parse_header(self, program):
        self.expect("name", "program")
        self.expect("punct", "{")
        while not self.eat_punct("}"):
            key = self.expect("name")
            self.expect("punct", ":")
            val = self.expect("name").text
            if key.text == "loop":
                program.header.loop = val
            elif key.text == "pc":
                program.header.pc = val
            elif key.text == "tick":
                program.header.tick = val
            else:
                self.error("unknown header key %r" % key.text, key)
            self.eat_punct(",")

    def parse_enum(self, program):
        self.expect("name", "enum")
        name = self.name("type name")
        if name.text in program.enums:
            self.error("enum %r declared twice" % name.text, name)
        self.expect("punct", "{")
        members = []
        while not self.eat_punct("}"):
            members.append(self.name("enum member").text)
            self.eat_punct(",")
        program.enums[name.text] = members

    def parse_union(self, program):
        self.expect("name", "union")
        name = self.name("type name")
        if name.text in program.unions:
            self.error("union %r declared twice" % name.text, name)
        self.expect("punct", "{")
        variants = []
        while not self.eat_punct("}"):
            vname = self.name("variant").text
            self.expect("punct", ":")
            variants.append((vname, self.parse_type()))
            self.eat_punct(",")
        program.unions[name.text] = variants

    def parse_record(self, program):
        self.expect("name", "record")
        name = self.name("type name")
        if name.text in program.records:
            self.error("record %r declared twice" % name.text, name)
        self.expect("punct", "{")
        fields = []
        while not self.eat_punct("}"):
            fname = self.name("field").text
            self.expect("punct", ":")
            fields.append((fname, self.parse_type()))
            self.eat_punct(",")
        program.records[name.text] = fields

    def parse_register(self, program):
        self.expect("name", "register")
        name = self.name("register name")
        if name.text in program.registers:
            self.error("register %r declared twice" % name.text, name)
        self.expect("punct", ":")
        program.registers[name.text] = self.parse_type()

    def parse_type(self):
        self.expect("punct", "%")
        tok = self.expect("name")
        t = tok.text
        if t == "bv":
            return BVG
        if t.startswith("bv") and t[2:].isdigit():
            width = int(t[2:])
            if not 1 <= width <= 64:
                self.error("bitvector width %d out of 1..64" % width, tok)
            return BvFixed(width)
        if t == "i64":
            return I64
        if t == "i":
            return INTG
        if t == "bool":
            return BOOL
        if t == "unit":
            return UNIT
        if t == "enum":
            return EnumT(self.name("enum name").text)
        if t == "union":
            return UnionT(self.name("union name").text)
        if t == "record":
            return RecordT(self.name("record name").text)
        self.error("unknown type %%%s" % t, tok)

    def parse_function(self, program):
        self.expect("name", "fn")
        name = self.name("function name")
        if name.text in program.functions:
            self.error("function %r declared twice" % name.text, name)
        self.expect("punct", "(")
        params = []
        while not self.eat_punct(")"):
            pname = self.name("parameter").text
            self.expect("punct", ":")
            params.append((pname, self.parse_type()))
            self.eat_punct(",")
        self.expect("punct", "->")
        ret = self.parse_type()
        self.expect("punct", "{")
        blocks = {}
        while not self.eat_punct("}"):
            block = self.parse_block()
            if block.label in blocks:
                self.error("block %r defined twice" % block.label)
            blocks[block.label] = block
        if not blocks:
            self.error("function %r has no blocks" % name.text, name)
        func = Function(name.text, params, ret, blocks)
        func.ssa = _looks_like_ssa(func)
        program.functions[name.text] = func

    def parse_block(self):
        label = self.name("block label")
        params = []
        if self.eat_punct("("):
            while not self.eat_punct(")"):
                pname = self.name("block parameter").text
                self.expect("punct", ":")
                params.append((pname, self.parse_type()))
                self.eat_punct(",")
        self.expect("punct", ":")
        block = Block(label.text, params)
        while True:
            tok = self.peek()
            if tok.kind != "name":
                self.error("expected a statement or terminator", tok)
            if tok.text in ("goto", "branch", "return", "halt", "trap"):
                block.term = self.parse_terminator()
                return block
            block.stmts.append(self.parse_statement())

    def parse_statement(self):
        dest = self.name("value name")
        self.expect("punct", ":")
        ty = self.parse_type()
        self.expect("punct", "=")
        tok = self.peek()
        if tok.kind == "name" and tok.text not in ("true", "false"):
            after = self.peek(1)
            if after.kind == "punct" and after.text in ("<", "("):
                opname = self.next()
                if opname.text not in ALL_OPS:
                    self.error("unknown operation %r" % opname.text, opname)
                static = []
                if self.eat_punct("<"):
                    while not self.eat_punct(">"):
                        arg = self.parse_static_arg()
                        if isinstance(arg, tuple):
                            static.extend(arg)  # qualified name like ast::ITYPE
                        else:
                            static.append(arg)
                        self.eat_punct(",")
                self.expect("punct", "(")
                args = []
                while not self.eat_punct(")"):
                    args.append(self.parse_operand())
                    self.eat_punct(",")
                return Statement(
                    dest.text, ty, Op(opname.text, tuple(static)), args, dest.span
                )
        # copy form: dest: ty = operand
        operand = self.parse_operand()
        return Statement(dest.text, ty, Op(COPY), [operand], dest.span)

    def parse_static_arg(self):
        tok = self.peek()
        if tok.kind == "int":
            return self.next().value
        name = self.name("static argument").text
        if self.eat_punct("::"):
            return (name, self.name("variant").text)
        return name

    def parse_operand(self):
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Literal(tok.value)
        if tok.kind == "bv":
            self.next()
            return Literal(tok.value, width=tok.width)
        if tok.kind == "punct" and tok.text == "(":
            self.next()
            self.expect("punct", ")")
            return Literal(None)
        if tok.kind == "name":
            if tok.text == "true":
                self.next()
                return Literal(True)
            if tok.text == "false":
                self.next()
                return Literal(False)
            name = self.name("operand")
            if self.eat_punct("::"):
                member = self.name("enum member")
                return Literal(None, enum=(name.text, member.text))
            return VarRef(name.text)
        self.error("expected an operand", tok)

    def parse_terminator(self):
        tok = self.next()
        if tok.text == "goto":
            label = self.name("block label").text
            args = []
            if self.eat_punct("("):
                while not self.eat_punct(")"):
                    args.append(self.parse_operand())
                    self.eat_punct(",")
            return Goto(label, args, tok.span)
        if tok.text == "branch":
            cond = self.parse_operand()
            then_label = self.name("block label").text
            else_label = self.name("block label").text
            return Branch(cond, then_label, else_label, tok.span)
        if tok.text == "return":
            return Return(self.parse_operand(), tok.span)
        if tok.text == "halt":
            return Halt(tok.span)
        if tok.text == "trap":
            message = "trap"
            if self.peek().kind == "string":
                message = self.next().value
            return TrapTerm(message, tok.span)
        self.error("expected a terminator", tok)


def _looks_like_ssa(func):
    """A parsed function is SSA when nothing is assigned twice and there are
    no copy statements; otherwise it is in mutable-local form."""
    seen = {p for p, _ in func.params}
    for block in func.blocks.values():
        for pname, _ in block.params:
            if pname in seen:
                return False
            seen.add(pname)
        for stmt in block.stmts:
            if stmt.op.name == COPY or stmt.dest in seen:
                return False
            seen.add(stmt.dest)
    return True


def parse_program(text, filename="<input>"):
    return Parser(text, filename).parse_program()


# ---------------------------------------------------------------------------
# pretty printer


def _format_bv(value, width):
    if width % 4 == 0:
        return "0x%0*x" % (width // 4, value)
    return "0b" + format(value, "0%db" % width)


def format_literal(lit, program=None):
    ty = lit.ty
    if isinstance(ty, EnumT) and program is not None:
        return "%s::%s" % (ty.name, program.enums[ty.name][lit.value])
    if lit.enum is not None:
        return "%s::%s" % lit.enum
    if lit.width is not None:
        return _format_bv(lit.value, lit.width)
    if lit.value is None:
        return "()"
    if isinstance(lit.value, bool):
        return "true" if lit.value else "false"
    return str(lit.value)


def format_operand(a, program=None):
    if isinstance(a, VarRef):
        return a.name
    return format_literal(a, program)


def format_op(op):
    name = op.name
    static = op.static
    if name in ("make_union", "union_field"):
        return "%s<%s::%s>" % (name, static[0], static[1])
    if name in ("record_get", "record_set"):
        return "%s<%s>" % (name, static[0])
    if not static:
        return name
    return "%s<%s>" % (name, ",".join(str(x) for x in static))


def format_statement(stmt, program=None):
    if stmt.op.name == COPY:
        return "%s: %s = %s" % (stmt.dest, stmt.ty, format_operand(stmt.args[0], program))
    args = ", ".join(format_operand(a, program) for a in stmt.args)
    return "%s: %s = %s(%s)" % (stmt.dest, stmt.ty, format_op(stmt.op), args)


def format_terminator(term, program=None):
    if isinstance(term, Goto):
        if term.args:
            return "goto %s(%s)" % (
                term.label,
                ", ".join(format_operand(a, program) for a in term.args),
            )
        return "goto %s" % term.label
    if isinstance(term, Branch):
        return "branch %s %s %s" % (
            format_operand(term.cond, program),
            term.then_label,
            term.else_label,
        )
    if isinstance(term, Return):
        return "return %s" % format_operand(term.value, program)
    if isinstance(term, Halt):
        return "halt"
    if isinstance(term, TrapTerm):
        return 'trap "%s"' % term.message.replace("\\", "\\\\").replace('"', '\\"')
    raise AssertionError("missing terminator")


def format_function(func, program=None):
    lines = []
    params = ", ".join("%s: %s" % (n, t) for n, t in func.params)
    lines.append("fn %s(%s) -> %s {" % (func.name, params, func.ret))
    for block in func.blocks.values():
        if block.params:
            ps = ", ".join("%s: %s" % (n, t) for n, t in block.params)
            lines.append("%s(%s):" % (block.label, ps))
        else:
            lines.append("%s:" % block.label)
        for stmt in block.stmts:
            lines.append("  " + format_statement(stmt, program))
        lines.append("  " + format_terminator(block.term, program))
    lines.append("}")
    return "\n".join(lines)


def pretty_print(program):
    """Render a program as canonical `.mir` text; reparses to an equal
    program (spans aside)."""
    parts = []
    h = program.header
    if h.loop or h.pc or h.tick:
        fields = []
        if h.loop:
            fields.append("loop: %s" % h.loop)
        if h.pc:
            fields.append("pc: %s" % h.pc)
        if h.tick:
            fields.append("tick: %s" % h.tick)
        parts.append("program { %s }" % ", ".join(fields))
    for name, members in program.enums.items():
        parts.append("enum %s { %s }" % (name, ", ".join(members)))
    for name, variants in program.unions.items():
        body = ", ".join("%s: %s" % (v, t) for v, t in variants)
        parts.append("union %s { %s }" % (name, body))
    for name, fields in program.records.items():
        body = ", ".join("%s: %s" % (f, t) for f, t in fields)
        parts.append("record %s { %s }" % (name, body))
    for name, ty in program.registers.items():
        parts.append("register %s: %s" % (name, ty))
    for func in program.functions.values():
        parts.append(format_function(func, program))
    return "\n\n".join(parts) + "\n"
