"""Ablation variants and the deterministic benchmark harness.

The variant ladder mirrors the optimization stack: each named variant
disables everything its predecessor disables plus one more stage, except
`no-opt-with-jit`, which sits outside the ladder (all static optimization
off, runtime specialization kept).  The primary metric is executed
micro-ops per guest instruction; wall time is reported but non-normative.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .asm import assemble
from .interp import RunConfig, compile_program, run
from .memory import SimMemory
from .opt import PipelineConfig, run_pipeline

VARIANT_ORDER = [
    "full",
    "no-mem-immutability",
    "no-jit",
    "no-bv-int-opts",
    "no-spec",
    "no-static-opt",
    "no-opt-with-jit",
]

# the nested ladder (each disables strictly more than its predecessor)
NESTED_VARIANTS = VARIANT_ORDER[:6]


@dataclass(frozen=True)
class Variant:
    name: str
    tracing: bool
    mem_tracking: bool
    pipeline: PipelineConfig


def variant(name):
    if name == "full":
        return Variant(name, True, True, PipelineConfig())
    if name == "no-mem-immutability":
        return Variant(name, True, False, PipelineConfig())
    if name == "no-jit":
        return Variant(name, False, False, PipelineConfig())
    if name == "no-bv-int-opts":
        return Variant(
            name,
            False,
            False,
            PipelineConfig(enable_bv_int_rewrites=False, enable_range_narrowing=False),
        )
    if name == "no-spec":
        return Variant(
            name,
            False,
            False,
            PipelineConfig(
                enable_bv_int_rewrites=False,
                enable_range_narrowing=False,
                enable_inlining=False,
                enable_specialization=False,
            ),
        )
    if name == "no-static-opt":
        return Variant(name, False, False, PipelineConfig.all_disabled())
    if name == "no-opt-with-jit":
        return Variant(name, True, True, PipelineConfig.all_disabled())
    raise ValueError("unknown variant %r" % name)


def disabled_flags(v):
    """Pipeline/runtime switches a variant turns off, for nesting checks."""
    off = set()
    cfg = v.pipeline
    for flag in (
        "enable_const_fold",
        "enable_dce",
        "enable_cse",
        "enable_inlining",
        "enable_scalar_replacement",
        "enable_bv_int_rewrites",
        "enable_range_narrowing",
        "enable_specialization",
    ):
        if not getattr(cfg, flag):
            off.add(flag)
    if not v.tracing:
        off.add("tracing")
    if not v.mem_tracking:
        off.add("mem_tracking")
    return off


class ModelBundle:
    """A verified SSA model plus per-variant compiled forms, built lazily and
    cached so a differential suite pays for each pipeline once."""

    def __init__(self, program):
        self.program = program
        self._execs = {}
        self._reports = {}

    def exec_for(self, name):
        if name == "reference":
            name_key = "reference"
            if name_key not in self._execs:
                self._execs[name_key] = compile_program(self.program)
            return self._execs[name_key]
        if name not in self._execs:
            v = variant(name)
            optimized, report = run_pipeline(self.program, v.pipeline)
            self._reports[name] = report
            self._execs[name] = compile_program(optimized)
        return self._execs[name]

    def report_for(self, name):
        self.exec_for(name)
        return self._reports.get(name)


def run_variant(bundle, name, blob, budget=None, origin=0x80000000, config=None):
    """Run one program under one variant; returns (RunResult, memory)."""
    if name == "reference":
        tracing, tracking = False, True
    else:
        v = variant(name)
        tracing, tracking = v.tracing, v.mem_tracking
    execprog = bundle.exec_for(name)
    memory = SimMemory(tracking=tracking)
    memory.load_image(blob, origin)
    base = config or RunConfig()
    cfg = RunConfig(
        budget=budget,
        tick_interval=base.tick_interval,
        tracing=tracing,
        hot_threshold=base.hot_threshold,
        trace_limit=base.trace_limit,
        entry_pc=origin,
        int_switchable=base.int_switchable,
    )
    result = run(execprog, memory, cfg)
    return result, memory


@dataclass
class BenchRow:
    program: str
    variant: str
    guest_instructions: int
    micro_ops: int
    allocations: int
    traces_compiled: int
    traces_invalidated: int
    guard_exits: int
    wall_time: float

    @property
    def ops_per_instruction(self):
        if not self.guest_instructions:
            return 0.0
        return self.micro_ops / self.guest_instructions


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def row(self, program, name):
        for r in self.rows:
            if r.program == program and r.variant == name:
                return r
        return None

    def format_table(self):
        header = (
            "program",
            "variant",
            "instructions",
            "micro-ops",
            "ops/instr",
            "allocs",
            "traces",
            "invalidated",
            "guard-exits",
            "seconds",
        )
        table = [header]
        for r in self.rows:
            table.append(
                (
                    r.program,
                    r.variant,
                    str(r.guest_instructions),
                    str(r.micro_ops),
                    "%.2f" % r.ops_per_instruction,
                    str(r.allocations),
                    str(r.traces_compiled),
                    str(r.traces_invalidated),
                    str(r.guard_exits),
                    "%.3f" % r.wall_time,
                )
            )
        widths = [max(len(row[i]) for row in table) for i in range(len(header))]
        lines = []
        for row in table:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        return "\n".join(lines)

    def format_csv(self):
        lines = [
            "program,variant,instructions,micro_ops,ops_per_instruction,"
            "allocations,traces_compiled,traces_invalidated,guard_exits,seconds"
        ]
        for r in self.rows:
            lines.append(
                "%s,%s,%d,%d,%.4f,%d,%d,%d,%d,%.3f"
                % (
                    r.program,
                    r.variant,
                    r.guest_instructions,
                    r.micro_ops,
                    r.ops_per_instruction,
                    r.allocations,
                    r.traces_compiled,
                    r.traces_invalidated,
                    r.guard_exits,
                    r.wall_time,
                )
            )
        return "\n".join(lines)


def run_bench(bundle, programs, variants, budget=None, config=None):
    """programs: [(name, assembly text or bytes)]; returns a BenchReport."""
    report = BenchReport()
    for pname, source in programs:
        if isinstance(source, bytes):
            blob = source
        else:
            blob, _ = assemble(source)
        for vname in variants:
            t0 = time.perf_counter()
            result, _ = run_variant(bundle, vname, blob, budget=budget, config=config)
            dt = time.perf_counter() - t0
            s = result.stats
            report.rows.append(
                BenchRow(
                    pname,
                    vname,
                    s.guest_instructions,
                    s.executed_micro_ops,
                    s.generic_allocations,
                    s.traces_compiled,
                    s.traces_invalidated,
                    s.trace_guard_exits,
                    dt,
                )
            )
    return report
