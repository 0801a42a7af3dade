"""Mini-assembler for the simulated RV64 subset.

Two passes: lay out labels, then encode 4-byte little-endian words.  `.word
N` embeds raw data (used by the self-modifying-code demo).  Output is a
flat binary for a fixed origin plus the symbol table.
"""

from __future__ import annotations

REG_NAMES = {}
for _i in range(32):
    REG_NAMES["x%d" % _i] = _i
_ABI = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 "
    "a6 a7 s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()
for _i, _n in enumerate(_ABI):
    REG_NAMES[_n] = _i
REG_NAMES["fp"] = 8

ITYPE_F3 = {"addi": 0b000, "slti": 0b010, "sltiu": 0b011, "xori": 0b100, "ori": 0b110, "andi": 0b111}
RTYPE_F3 = {
    "add": (0b000, 0b0000000),
    "sub": (0b000, 0b0100000),
    "sll": (0b001, 0b0000000),
    "slt": (0b010, 0b0000000),
    "sltu": (0b011, 0b0000000),
    "xor": (0b100, 0b0000000),
    "srl": (0b101, 0b0000000),
    "sra": (0b101, 0b0100000),
    "or": (0b110, 0b0000000),
    "and": (0b111, 0b0000000),
}
LOAD_F3 = {"lb": 0b000, "lh": 0b001, "lw": 0b010, "ld": 0b011, "lbu": 0b100, "lhu": 0b101, "lwu": 0b110}
STORE_F3 = {"sb": 0b000, "sh": 0b001, "sw": 0b010, "sd": 0b011}
BRANCH_F3 = {"beq": 0b000, "bne": 0b001, "blt": 0b100, "bge": 0b101, "bltu": 0b110, "bgeu": 0b111}

OP_IMM = 0b0010011
OP_REG = 0b0110011
OP_LOAD = 0b0000011
OP_STORE = 0b0100011
OP_BRANCH = 0b1100011
OP_JAL = 0b1101111
OP_LUI = 0b0110111
OP_32 = 0b0111011
OP_SYSTEM = 0b1110011

EBREAK_WORD = (1 << 20) | OP_SYSTEM


class AsmError(Exception):
    def __init__(self, message, line):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


def _reg(tok, line):
    r = REG_NAMES.get(tok.lower())
    if r is None:
        raise AsmError("unknown register %r" % tok, line)
    return r


def _int(tok, line):
    try:
        return int(tok, 0)
    except ValueError:
        raise AsmError("bad integer %r" % tok, line)


def _imm_or_label(tok, labels, here, line, what):
    if tok in labels:
        return labels[tok] - here
    try:
        return int(tok, 0)
    except ValueError:
        raise AsmError("unknown label or bad %s %r" % (what, tok), line)


def _fit_signed(value, bits, line, what):
    if not -(1 << bits - 1) <= value < (1 << bits - 1):
        raise AsmError("%s %d out of signed %d-bit range" % (what, value, bits), line)
    return value & ((1 << bits) - 1)


def enc_i(opcode, f3, rd, rs1, imm12):
    return (imm12 & 0xFFF) << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opcode


def enc_r(opcode, f3, f7, rd, rs1, rs2):
    return f7 << 25 | rs2 << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opcode


def enc_s(f3, rs1, rs2, imm12):
    return (
        (imm12 >> 5 & 0x7F) << 25
        | rs2 << 20
        | rs1 << 15
        | f3 << 12
        | (imm12 & 0x1F) << 7
        | OP_STORE
    )


def enc_b(f3, rs1, rs2, imm13):
    return (
        (imm13 >> 12 & 1) << 31
        | (imm13 >> 5 & 0x3F) << 25
        | rs2 << 20
        | rs1 << 15
        | f3 << 12
        | (imm13 >> 1 & 0xF) << 8
        | (imm13 >> 11 & 1) << 7
        | OP_BRANCH
    )


def enc_u(opcode, rd, imm20):
    return (imm20 & 0xFFFFF) << 12 | rd << 7 | opcode


def enc_j(rd, imm21):
    return (
        (imm21 >> 20 & 1) << 31
        | (imm21 >> 1 & 0x3FF) << 21
        | (imm21 >> 11 & 1) << 20
        | (imm21 >> 12 & 0xFF) << 12
        | rd << 7
        | OP_JAL
    )


def _split_line(line):
    code = line.split("#", 1)[0].split("//", 1)[0].strip()
    return code


def _operands(rest, line):
    # memory operands like 8(a0) become two fields: offset and base
    parts = []
    for field in rest.replace(",", " ").split():
        if "(" in field:
            off, base = field.split("(", 1)
            if not base.endswith(")"):
                raise AsmError("bad memory operand %r" % field, line)
            parts.append(off or "0")
            parts.append(base[:-1])
        else:
            parts.append(field)
    return parts


def assemble(text, origin=0x80000000):
    """Assemble subset source text; returns (binary bytes, symbol map)."""
    lines = text.splitlines()
    items = []  # (lineno, mnemonic, operand list)
    labels = {}
    addr = origin
    for lineno, raw in enumerate(lines, 1):
        code = _split_line(raw)
        while code:
            if ":" in code.split()[0] or (code.split()[0].endswith(":")):
                head, _, rest = code.partition(":")
                head = head.strip()
                if not head or not head.replace("_", "").replace(".", "").isalnum():
                    raise AsmError("bad label %r" % head, lineno)
                if head in labels:
                    raise AsmError("duplicate label %r" % head, lineno)
                labels[head] = addr
                code = rest.strip()
                continue
            fields = code.split(None, 1)
            mnemonic = fields[0].lower()
            rest = fields[1] if len(fields) > 1 else ""
            items.append((lineno, addr, mnemonic, _operands(rest, lineno)))
            addr += 4
            code = ""

    words = []
    for lineno, here, m, ops in items:
        words.append(_encode_one(m, ops, labels, here, lineno))

    blob = b"".join(w.to_bytes(4, "little") for w in words)
    return blob, labels


def _encode_one(m, ops, labels, here, line):
    def need(n):
        if len(ops) != n:
            raise AsmError("%s takes %d operands, got %d" % (m, n, len(ops)), line)

    if m == ".word":
        need(1)
        return _int(ops[0], line) & 0xFFFFFFFF
    if m in ITYPE_F3:
        need(3)
        imm = _fit_signed(_int(ops[2], line), 12, line, "immediate")
        return enc_i(OP_IMM, ITYPE_F3[m], _reg(ops[0], line), _reg(ops[1], line), imm)
    if m in RTYPE_F3:
        need(3)
        f3, f7 = RTYPE_F3[m]
        return enc_r(OP_REG, f3, f7, _reg(ops[0], line), _reg(ops[1], line), _reg(ops[2], line))
    if m in LOAD_F3:
        need(3)
        imm = _fit_signed(_int(ops[1], line), 12, line, "offset")
        return enc_i(OP_LOAD, LOAD_F3[m], _reg(ops[0], line), _reg(ops[2], line), imm)
    if m in STORE_F3:
        need(3)
        imm = _fit_signed(_int(ops[1], line), 12, line, "offset")
        return enc_s(STORE_F3[m], _reg(ops[2], line), _reg(ops[0], line), imm)
    if m in BRANCH_F3:
        need(3)
        off = _imm_or_label(ops[2], labels, here, line, "branch target")
        if off % 2:
            raise AsmError("branch offset must be even", line)
        return enc_b(BRANCH_F3[m], _reg(ops[0], line), _reg(ops[1], line), _fit_signed(off, 13, line, "branch offset"))
    if m == "jal":
        need(2)
        off = _imm_or_label(ops[1], labels, here, line, "jump target")
        if off % 2:
            raise AsmError("jump offset must be even", line)
        return enc_j(_reg(ops[0], line), _fit_signed(off, 21, line, "jump offset"))
    if m == "j":
        need(1)
        off = _imm_or_label(ops[0], labels, here, line, "jump target")
        return enc_j(0, _fit_signed(off, 21, line, "jump offset"))
    if m == "lui":
        need(2)
        imm = _int(ops[1], line)
        if not -(1 << 19) <= imm < (1 << 20):
            raise AsmError("lui immediate out of 20-bit range", line)
        return enc_u(OP_LUI, _reg(ops[0], line), imm)
    if m == "mulw":
        need(3)
        return enc_r(OP_32, 0b000, 0b0000001, _reg(ops[0], line), _reg(ops[1], line), _reg(ops[2], line))
    if m in ("ebreak", "halt"):
        need(0)
        return EBREAK_WORD
    if m == "nop":
        need(0)
        return enc_i(OP_IMM, 0, 0, 0, 0)
    if m == "li":
        need(2)
        imm = _fit_signed(_int(ops[1], line), 12, line, "immediate")
        return enc_i(OP_IMM, 0, _reg(ops[0], line), 0, imm)
    if m == "mv":
        need(2)
        return enc_i(OP_IMM, 0, _reg(ops[0], line), _reg(ops[1], line), 0)
    raise AsmError("unknown mnemonic %r" % m, line)


def format_symbols(labels):
    return "".join("%s 0x%x\n" % (name, addr) for name, addr in sorted(labels.items()))
