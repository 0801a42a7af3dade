"""Static optimization pipeline, driven to a fixpoint.

Pass order inside one round: constant folding, CSE, bitvector/integer
rewrites, range narrowing, scalar replacement, dead code elimination,
inlining, then function specialization, so each round of inlining and
specialization exposes widths for the next round's rewrites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..ir import clone_function, clone_program, count_generic_ops, verify
from ..ranges import analyze, narrow
from .inline import inline_calls
from .passes import constant_fold, cse, dead_code_elim, scalar_replace
from .rewrite import rewrite_bv_int
from .specialize import SpecializationCache, specialize_functions

__all__ = [
    "PipelineConfig",
    "PipelineReport",
    "run_pipeline",
    "constant_fold_fn",
    "dce_fn",
    "cse_fn",
    "scalar_replace_fn",
    "rewrite_bv_int_fn",
    "narrow_fn",
    "inline_calls",
    "specialize_functions",
]


@dataclass
class PipelineConfig:
    enable_const_fold: bool = True
    enable_dce: bool = True
    enable_cse: bool = True
    enable_inlining: bool = True
    inline_max_ops: int = 25
    inline_max_blocks: int = 4
    enable_scalar_replacement: bool = True
    enable_bv_int_rewrites: bool = True
    enable_range_narrowing: bool = True
    enable_specialization: bool = True
    max_fixpoint_rounds: int = 50

    def __post_init__(self):
        assert self.inline_max_ops >= 1
        assert self.inline_max_blocks >= 1
        assert self.max_fixpoint_rounds >= 1

    @classmethod
    def all_disabled(cls):
        return cls(
            enable_const_fold=False,
            enable_dce=False,
            enable_cse=False,
            enable_inlining=False,
            enable_scalar_replacement=False,
            enable_bv_int_rewrites=False,
            enable_range_narrowing=False,
            enable_specialization=False,
        )


@dataclass
class PipelineReport:
    rounds: int = 0
    reached_fixpoint: bool = True
    entries: list = field(default_factory=list)  # (round, function, pass, changes)
    generic_before: dict = field(default_factory=dict)
    generic_after: dict = field(default_factory=dict)

    def total_changes(self):
        return sum(e[3] for e in self.entries)

    def format_table(self):
        lines = ["function pass round changes generic_before generic_after"]
        for rnd, fn, pass_name, changes in self.entries:
            if not changes:
                continue
            lines.append(
                "%s %s %d %d %d %d"
                % (
                    fn,
                    pass_name,
                    rnd,
                    changes,
                    self.generic_before.get(fn, 0),
                    self.generic_after.get(fn, 0),
                )
            )
        lines.append(
            "total - %d %d %d %d"
            % (
                self.rounds,
                self.total_changes(),
                sum(self.generic_before.values()),
                sum(self.generic_after.values()),
            )
        )
        return "\n".join(lines)


class PipelineError(Exception):
    pass


def _range_pass(program, func):
    return narrow(program, func)


FUNCTION_PASSES = [
    ("const_fold", "enable_const_fold", constant_fold),
    ("cse", "enable_cse", cse),
    ("rewrite_bv_int", "enable_bv_int_rewrites", rewrite_bv_int),
    ("range_narrowing", "enable_range_narrowing", _range_pass),
    ("scalar_replace", "enable_scalar_replacement", scalar_replace),
    ("dce", "enable_dce", dead_code_elim),
]


def run_pipeline(program, config=None):
    """Optimize a verified SSA program; returns (program, PipelineReport)."""
    config = config or PipelineConfig()
    program = clone_program(program)
    report = PipelineReport()
    for name, func in program.functions.items():
        report.generic_before[name] = count_generic_ops(func)

    cache = SpecializationCache()
    for rnd in range(1, config.max_fixpoint_rounds + 1):
        round_changes = 0
        for name in list(program.functions):
            func = program.functions[name]
            for pass_name, flag, fn in FUNCTION_PASSES:
                if not getattr(config, flag):
                    continue
                changes = fn(program, func)
                if changes:
                    report.entries.append((rnd, name, pass_name, changes))
                    round_changes += changes
        if config.enable_inlining:
            changes = inline_calls(program, config)
            if changes:
                report.entries.append((rnd, "*", "inline", changes))
                round_changes += changes
        if config.enable_specialization:
            changes = specialize_functions(program, config, cache)
            if changes:
                report.entries.append((rnd, "*", "specialize", changes))
                round_changes += changes
        report.rounds = rnd
        if not round_changes:
            break
    else:
        report.reached_fixpoint = False

    for name, func in program.functions.items():
        report.generic_after[name] = count_generic_ops(func)
        report.generic_before.setdefault(name, report.generic_before.get(name, 0))

    diags = verify(program)
    if diags:
        raise PipelineError(
            "pipeline produced an invalid program:\n%s"
            % "\n".join(str(d) for d in diags[:10])
        )
    return program, report


# single-function convenience wrappers (pure: clone, run, return)


def _wrap(pass_fn):
    def run_one(program, func, **kw):
        out = clone_function(func)
        pass_fn(program, out, **kw)
        return out

    return run_one


constant_fold_fn = _wrap(constant_fold)
dce_fn = _wrap(dead_code_elim)
cse_fn = _wrap(cse)
scalar_replace_fn = _wrap(scalar_replace)
rewrite_bv_int_fn = _wrap(rewrite_bv_int)
narrow_fn = _wrap(narrow)
