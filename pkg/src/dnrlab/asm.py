"""Text assembler for toy machine programs, plus a shelf of stock programs.

The source format is one instruction per line (see docs/formats.md):

    # comments run to end of line
    loop:                 # labels name the next instruction
        jz r2, done       # registers are r0..r15, constants are naturals
        sub r2, r2, r3
        jmp loop
    done:
        halt r0

Jump targets may be labels or raw instruction numbers.  A label may point
one past the last instruction; jumping there diverges, which is the idiom
for "reject" branches.
"""

from __future__ import annotations

import re
from functools import lru_cache

from .machine import (
    OP_BY_NAME,
    OP_JMP,
    OP_JZ,
    OP_NAMES,
    OP_SIGNATURE,
    ProgramIndex,
    ToyProgram,
    encode,
    program,
)


class AsmError(ValueError):
    """Malformed assembly source."""


_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _tokenize_operands(text: str) -> list[str]:
    return [tok for tok in re.split(r"[,\s]+", text.strip()) if tok]


def assemble(source: str) -> ToyProgram:
    """Assemble source text into a canonical program."""
    # first pass: strip comments, collect labels and raw instructions
    raw: list[tuple[int, str, list[str]]] = []  # (line no, opcode name, operand tokens)
    labels: dict[str, int] = {}
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        while ":" in line:
            name, _, rest = line.partition(":")
            name = name.strip()
            if not _LABEL_RE.match(name):
                raise AsmError(f"line {lineno}: bad label {name!r}")
            if name in labels:
                raise AsmError(f"line {lineno}: duplicate label {name!r}")
            labels[name] = len(raw)
            line = rest.strip()
        if not line:
            continue
        parts = line.split(None, 1)
        opname = parts[0].lower()
        if opname not in OP_BY_NAME:
            raise AsmError(f"line {lineno}: unknown opcode {opname!r}")
        raw.append((lineno, opname, _tokenize_operands(parts[1]) if len(parts) > 1 else []))

    # second pass: resolve operands
    instructions = []
    for lineno, opname, tokens in raw:
        op = OP_BY_NAME[opname]
        sig = OP_SIGNATURE[op]
        if len(tokens) != len(sig):
            raise AsmError(
                f"line {lineno}: {opname} takes {len(sig)} operand(s), got {len(tokens)}")
        operands = []
        for kind, tok in zip(sig, tokens):
            if kind == "r":
                if not re.fullmatch(r"[rR](\d+)", tok):
                    raise AsmError(f"line {lineno}: expected register, got {tok!r}")
                n = int(tok[1:])
                if n >= 16:
                    raise AsmError(f"line {lineno}: register {tok!r} out of range")
                operands.append(n)
            else:
                if tok.isdigit():
                    operands.append(int(tok))
                elif tok in labels:
                    operands.append(labels[tok])
                else:
                    raise AsmError(f"line {lineno}: unknown label or constant {tok!r}")
        instructions.append((op, *operands))

    for name, target in labels.items():
        if target > len(instructions):
            raise AsmError(f"label {name!r} beyond one-past-end")
    return program(instructions)


def assemble_index(source: str) -> ProgramIndex:
    return encode(assemble(source))


def disassemble(prog: ToyProgram) -> str:
    """Numeric-target source text; assemble(disassemble(p)) == p."""
    lines = []
    for ins in prog.instructions:
        sig = OP_SIGNATURE[ins[0]]
        ops = ", ".join(
            f"r{val}" if kind == "r" else str(val)
            for kind, val in zip(sig, ins[1:]))
        lines.append(f"{OP_NAMES[ins[0]]} {ops}".rstrip())
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Stock programs.

DIVERGE_INDEX = 0  # the empty program: everywhere undefined

IDENTITY = assemble("halt r0")
IDENTITY_INDEX = encode(IDENTITY)  # == 23

ZERO = assemble("halt r1")  # r1 is never written, so the value is 0
ZERO_INDEX = encode(ZERO)

PROJ_LEFT = assemble("left r1, r0\nhalt r1")
PROJ_LEFT_INDEX = encode(PROJ_LEFT)

PROJ_RIGHT = assemble("right r1, r0\nhalt r1")
PROJ_RIGHT_INDEX = encode(PROJ_RIGHT)

# Halts exactly on even inputs; the odd branch hits a jump with no path to
# halt, which the interpreter classifies as divergence immediately.
EVEN_HALT = assemble("""
    load r1, 2
    mod r2, r0, r1
    jz r2, ok
    jmp stuck
ok: halt r0
stuck:
""")
EVEN_HALT_INDEX = encode(EVEN_HALT)


@lru_cache(maxsize=4096)
def const_index(c: int) -> ProgramIndex:
    """Index of the total constant-c function."""
    if c == 0:
        return ZERO_INDEX
    return assemble_index(f"load r1, {c}\nhalt r1")


@lru_cache(maxsize=1024)
def residue_index(k: int, r: int) -> ProgramIndex:
    """Index whose domain is exactly the residue class r mod k (k >= 1)."""
    if k < 1 or not 0 <= r < k:
        raise ValueError("need k >= 1 and 0 <= r < k")
    return assemble_index(f"""
        load r1, {k}
        mod r2, r0, r1
        load r3, {r}
        sub r4, r2, r3
        sub r5, r3, r2
        add r4, r4, r5
        jz r4, ok
        jmp stuck
    ok: halt r0
    stuck:
    """)


@lru_cache(maxsize=1024)
def finite_set_index(members: frozenset[int]) -> ProgramIndex:
    """Index whose domain is exactly the given finite set (bit-probe loop)."""
    code = 0
    for x in members:
        code |= 1 << x
    # shift the code right x times, test the low bit
    return assemble_index(f"""
        load r1, {code}
        load r2, 2
        mov r3, r0
    loop:
        jz r3, test
        div r1, r1, r2
        load r4, 1
        sub r3, r3, r4
        jmp loop
    test:
        mod r5, r1, r2
        jz r5, stuck
        halt r0
    stuck:
    """)
