"""Loading of shipped and external MIR model corpora."""

from __future__ import annotations

import os
from importlib import resources

from .ir import verify
from .parser import parse_program
from .ssa import program_to_ssa

DEFAULT_MODEL = "rv64mini"


class ModelError(Exception):
    pass


def model_dir(name=DEFAULT_MODEL):
    return os.path.join(os.path.dirname(__file__), "models", name)


def read_model_text(path=None):
    """Concatenate the `.mir` files of a model directory (or read one file)."""
    if path is None:
        path = model_dir()
    if os.path.isfile(path):
        with open(path) as f:
            return f.read(), path
    files = sorted(fn for fn in os.listdir(path) if fn.endswith(".mir"))
    if not files:
        raise ModelError("no .mir files under %s" % path)
    parts = []
    for fn in files:
        with open(os.path.join(path, fn)) as f:
            parts.append(f.read())
    return "\n".join(parts), path


def load_model(path=None, ssa=True):
    """Parse, check and (by default) SSA-convert a model; raises ModelError
    on any diagnostic."""
    text, where = read_model_text(path)
    program = parse_program(text, filename=where)
    diags = verify(program, ssa=False)
    if diags:
        raise ModelError(
            "model %s failed verification:\n%s"
            % (where, "\n".join(str(d) for d in diags[:20]))
        )
    if not ssa:
        return program
    program = program_to_ssa(program)
    diags = verify(program)
    if diags:
        raise ModelError(
            "model %s failed SSA verification:\n%s"
            % (where, "\n".join(str(d) for d in diags[:20]))
        )
    return program


def program_path(name):
    """Path of a shipped guest assembly program."""
    return os.path.join(os.path.dirname(__file__), "programs", name)
