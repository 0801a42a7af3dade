"""Deterministic random guest-program generator.

Generated programs are always halting and memory-safe: stores stay inside a
scratch window addressed off a dedicated base register, every loop is a
counted countdown, forward branches only skip ahead, and the program ends
in halt.  The generator fuels the differential test suite, so it aims for
breadth (all subset instructions, loop nesting, hot loops that cross the
trace threshold) rather than realism.
"""

from __future__ import annotations

import random

SCRATCH_BASE = "a0"  # never written after the prologue
SCRATCH_LUI = 0x00100  # scratch window at 0x00100000
DATA_REGS = [
    "t0", "t1", "t2", "t3", "t4", "t5", "t6",
    "a1", "a2", "a3", "a4", "a5",
    "s2", "s3", "s4", "s5", "s6",
]
COUNTER_REGS = ["s7", "s8", "s9"]

ALU_RR = ["add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and"]
ALU_RI = ["addi", "slti", "sltiu", "xori", "ori", "andi"]
BRANCHES = ["beq", "bne", "blt", "bge", "bltu", "bgeu"]
LOADS = {"lb": 1, "lh": 2, "lw": 4, "ld": 8, "lbu": 1, "lhu": 2, "lwu": 4}
STORES = {"sb": 1, "sh": 2, "sw": 4, "sd": 8}


class _Gen:
    def __init__(self, seed, length, hot_loops):
        self.rng = random.Random(seed)
        self.length = length
        self.hot_loops = hot_loops
        self.lines = []
        self.emitted = 0
        self.est_cost = 0.0
        self.mult = 1  # product of enclosing loop counts
        self.label_n = 0
        self.depth = 0

    def emit(self, text):
        self.lines.append("  " + text)
        self.emitted += 1
        self.est_cost += self.mult

    def label(self, base):
        self.label_n += 1
        name = "%s_%d" % (base, self.label_n)
        self.lines.append(name + ":")
        return name

    def reg(self):
        return self.rng.choice(DATA_REGS)

    def dest(self):
        # a sprinkle of writes to x0 keeps the hardwired-zero path covered
        if self.rng.random() < 0.03:
            return "x0"
        return self.rng.choice(DATA_REGS)

    def run(self):
        self.emit("lui %s, 0x%x" % (SCRATCH_BASE, SCRATCH_LUI))
        for r in DATA_REGS:
            kind = self.rng.random()
            if kind < 0.5:
                self.emit("li %s, %d" % (r, self.rng.randint(-2048, 2047)))
            elif kind < 0.8:
                self.emit("lui %s, 0x%x" % (r, self.rng.randint(0, 0xFFFFF)))
            else:
                self.emit("li %s, %d" % (r, self.rng.choice([0, 1, -1, 7, 64])))
        while self.emitted < self.length and self.est_cost < 4000:
            self.chunk()
        self.lines.append("  halt")
        return "\n".join(self.lines) + "\n"

    def chunk(self):
        roll = self.rng.random()
        if roll < 0.35:
            self.arith_run(self.rng.randint(1, 6))
        elif roll < 0.55:
            self.memory_pair()
        elif roll < 0.75 and self.depth == 0:
            self.loop()
        elif roll < 0.85:
            self.forward_branch()
        elif roll < 0.93:
            self.emit("mulw %s, %s, %s" % (self.dest(), self.reg(), self.reg()))
        else:
            self.jal_skip()

    def arith_run(self, n):
        for _ in range(n):
            if self.rng.random() < 0.5:
                self.emit(
                    "%s %s, %s, %s"
                    % (self.rng.choice(ALU_RR), self.dest(), self.reg(), self.reg())
                )
            else:
                self.emit(
                    "%s %s, %s, %d"
                    % (
                        self.rng.choice(ALU_RI),
                        self.dest(),
                        self.reg(),
                        self.rng.randint(-2048, 2047),
                    )
                )

    def memory_pair(self):
        store = self.rng.choice(list(STORES))
        size = STORES[store]
        offset = self.rng.randrange(0, 2040 // size) * size
        self.emit("%s %s, %d(%s)" % (store, self.reg(), offset, SCRATCH_BASE))
        load = self.rng.choice([m for m, s in LOADS.items() if s <= size])
        loff = self.rng.randrange(0, (offset // LOADS[load]) + 1) * LOADS[load]
        self.emit("%s %s, %d(%s)" % (load, self.dest(), loff, SCRATCH_BASE))

    def loop(self):
        counter = COUNTER_REGS[self.depth]
        if self.depth > 0:
            count = self.rng.randint(2, 8)
        elif self.hot_loops and self.rng.random() < 0.3:
            count = self.rng.randint(60, 140)
        else:
            count = self.rng.randint(2, 25)
        if self.est_cost + count * 6 * self.mult > 4500:
            self.arith_run(2)
            return
        self.emit("li %s, %d" % (counter, count))
        head = self.label("loop")
        self.depth += 1
        self.mult *= count
        body = self.rng.randint(1, 5)
        for _ in range(body):
            roll = self.rng.random()
            if roll < 0.55:
                self.arith_run(1)
            elif roll < 0.8:
                self.memory_pair()
            elif self.depth < 2 and roll < 0.9:
                self.loop()
            else:
                self.emit("mulw %s, %s, %s" % (self.dest(), self.reg(), self.reg()))
        self.mult //= count
        self.depth -= 1
        self.emit("addi %s, %s, -1" % (counter, counter))
        self.emit("bne %s, x0, %s" % (counter, head))

    def forward_branch(self):
        skip = self.rng.randint(1, 4)
        target = "skip_%d" % (self.label_n + 1)
        self.emit(
            "%s %s, %s, %s"
            % (self.rng.choice(BRANCHES), self.reg(), self.reg(), target)
        )
        self.arith_run(skip)
        self.label("skip")

    def jal_skip(self):
        target = "jover_%d" % (self.label_n + 1)
        self.emit("jal %s, %s" % (self.rng.choice(["ra", "x0", "t6"]), target))
        self.arith_run(self.rng.randint(1, 3))
        self.label("jover")


def gen_random_program(seed, length=60, hot_loops=True):
    """Assembly text for a random halting subset program; deterministic per
    (seed, length, hot_loops)."""
    assert length >= 1
    return _Gen(seed, length, hot_loops).run()
