"""Data model, parsing, validation, and rendering of QDMR decompositions.

A decomposition is an ordered list of natural-language steps; a step may
reference earlier answers with ``#k`` tokens and carries a reasoning-type
operator label. The surface format accepted here is the BREAK export style:
steps separated by ";" with an optional leading "return " keyword.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

KNOWN_OPERATORS = (
    "select",
    "filter",
    "project",
    "aggregate",
    "group",
    "superlative",
    "comparative",
    "union",
    "intersection",
    "discard",
    "sort",
    "boolean",
    "arithmetic",
    "comparison",
)

REF_TOKEN = re.compile(r"#(\d+)")
_RETURN_PREFIX = re.compile(r"^return\s+", re.IGNORECASE)


class DecompositionError(ValueError):
    """Base class for decomposition parse failures."""


class EmptyLabel(DecompositionError):
    pass


class EmptyDecomposition(DecompositionError):
    pass


class ForwardReference(DecompositionError):
    def __init__(self, step: int, ref: int):
        super().__init__(f"step {step} references #{ref}, which is not an earlier step")
        self.step = step
        self.ref = ref


class OperatorCountMismatch(DecompositionError):
    def __init__(self, n_operators: int, n_steps: int):
        super().__init__(f"{n_operators} operator labels for {n_steps} steps")
        self.n_operators = n_operators
        self.n_steps = n_steps


@dataclass(frozen=True)
class OperatorKind:
    """A reasoning-type label; unrecognized labels are preserved lowercased."""

    name: str

    @property
    def is_known(self) -> bool:
        return self.name in KNOWN_OPERATORS

    def __str__(self) -> str:
        return self.name


UNKNOWN_OPERATOR = OperatorKind("unknown")


def parse_operator(label: str) -> OperatorKind:
    """Parse an operator label case-insensitively; never fails on non-empty input."""
    trimmed = label.strip()
    if not trimmed:
        raise EmptyLabel("operator label is empty")
    return OperatorKind(trimmed.lower())


@dataclass(frozen=True)
class DecompStep:
    index: int  # 1-based
    text: str  # leading "return " already stripped
    refs: tuple[int, ...]  # #k tokens in textual order, duplicates preserved
    operator: OperatorKind


@dataclass(frozen=True)
class Decomposition:
    question_id: str
    question_text: str
    steps: tuple[DecompStep, ...]

    @property
    def operators(self) -> tuple[OperatorKind, ...]:
        return tuple(s.operator for s in self.steps)


def find_refs(text: str) -> list[int]:
    """All ``#k`` tokens in textual order (k = maximal digit run after '#')."""
    return [int(m.group(1)) for m in REF_TOKEN.finditer(text)]


def parse_decomposition(
    question_id: str,
    question_text: str,
    raw: str,
    operators: Optional[Sequence[str]] = None,
) -> Decomposition:
    """Parse a ";"-delimited decomposition string into a Decomposition.

    Whitespace-only segments (trailing or doubled delimiters) are dropped.
    When ``operators`` is omitted every step gets the "unknown" operator.
    """
    texts = []
    for segment in raw.split(";"):
        text = _RETURN_PREFIX.sub("", segment.strip(), count=1).strip()
        if text:
            texts.append(text)
    if not texts:
        raise EmptyDecomposition(f"{question_id}: no steps after splitting")

    if operators is None:
        ops = [UNKNOWN_OPERATOR] * len(texts)
    else:
        if len(operators) != len(texts):
            raise OperatorCountMismatch(len(operators), len(texts))
        ops = [parse_operator(label) for label in operators]

    steps = []
    for i, (text, op) in enumerate(zip(texts, ops), start=1):
        refs = find_refs(text)
        for ref in refs:
            if not 1 <= ref < i:
                raise ForwardReference(i, ref)
        steps.append(DecompStep(index=i, text=text, refs=tuple(refs), operator=op))
    return Decomposition(question_id=question_id, question_text=question_text, steps=tuple(steps))


def render_decomposition(d: Decomposition) -> str:
    """Render back to the BREAK surface form; round-trips through parse_decomposition."""
    return " ;".join(f"return {step.text}" for step in d.steps)


@dataclass(frozen=True)
class Violation:
    rule: str
    step: Optional[int]
    message: str


def validate(d: Decomposition) -> list[Violation]:
    """Check every type invariant; returns violations instead of raising."""
    violations = []
    if not d.steps:
        return [Violation("no_steps", None, "decomposition has no steps")]
    for position, step in enumerate(d.steps, start=1):
        if step.index != position:
            violations.append(
                Violation("gap_in_indices", step.index, f"step at position {position} has index {step.index}")
            )
        if not step.text.strip():
            violations.append(Violation("empty_step_text", step.index, f"step {step.index} has empty text"))
        for ref in step.refs:
            if not 1 <= ref < step.index:
                violations.append(
                    Violation("forward_reference", step.index, f"step {step.index} references #{ref}")
                )
        if list(step.refs) != find_refs(step.text):
            violations.append(
                Violation("ref_mismatch", step.index, f"step {step.index} refs field disagrees with its text")
            )
    return violations
