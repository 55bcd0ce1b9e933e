"""Reader-input construction for the eight decomposition strategies.

Single-input strategies (no_decomp and the implicit family) produce one
template per question; explicit-family strategies produce one template per
decomposition step, rendered later once the answers a template depends on
are available.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .qdmr import Decomposition


class StrategyKind(Enum):
    NO_DECOMP = "no_decomp"
    EXPLICIT = "explicit"
    EXPLICIT_W_DECOMP = "explicit_w_decomp"
    EXPLICIT_EVERYTHING = "explicit_everything"
    IMPLICIT = "implicit"
    IMPLICIT_UNORDERED = "implicit_unordered"
    IMPLICIT_W_DUPL = "implicit_w_dupl"
    EXPLICIT_PLUS_IMPLICIT = "explicit_plus_implicit"

    @classmethod
    def from_name(cls, name: str) -> "StrategyKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise UnknownStrategy(f"unknown strategy {name!r}; valid names: {valid}") from None


class UnknownStrategy(ValueError):
    pass


class UnsupportedVariant(ValueError):
    pass


PREFIXED_VARIANTS = frozenset(
    {
        StrategyKind.IMPLICIT,
        StrategyKind.IMPLICIT_UNORDERED,
        StrategyKind.IMPLICIT_W_DUPL,
        StrategyKind.EXPLICIT_PLUS_IMPLICIT,
    }
)

EXPLICIT_FAMILY = frozenset(
    {
        StrategyKind.EXPLICIT,
        StrategyKind.EXPLICIT_W_DECOMP,
        StrategyKind.EXPLICIT_EVERYTHING,
        StrategyKind.EXPLICIT_PLUS_IMPLICIT,
    }
)


def operator_token(name: str) -> str:
    return f"<op:{name}>"


def operator_prefix(d: Decomposition, variant: StrategyKind, seed: int) -> list[str]:
    """Operator-token prefix for the implicit-family variants.

    implicit / explicit_plus_implicit: first-occurrence-ordered dedup;
    implicit_w_dupl: full operator sequence in step order;
    implicit_unordered: seeded permutation of the deduplicated list.
    """
    if variant not in PREFIXED_VARIANTS:
        raise UnsupportedVariant(f"{variant.value} takes no operator prefix")
    names = [step.operator.name for step in d.steps]
    if variant is StrategyKind.IMPLICIT_W_DUPL:
        return [operator_token(n) for n in names]
    deduped = []
    seen = set()
    for n in names:
        if n not in seen:
            seen.add(n)
            deduped.append(n)
    if variant is StrategyKind.IMPLICIT_UNORDERED:
        random.Random(seed).shuffle(deduped)
    return [operator_token(n) for n in deduped]


@dataclass(frozen=True)
class RenderOptions:
    block_separator: str = "\n"
    token_separator: str = " "
    context_budget: int = 12000


@dataclass(frozen=True)
class ReaderInput:
    prefix_tokens: tuple[str, ...]
    question_part: str
    auxiliary_part: str
    context_part: str
    rendered: str

    @property
    def query_text(self) -> str:
        """Everything except the context block (what a reader sees as the question)."""
        blocks = [" ".join(self.prefix_tokens), self.question_part, self.auxiliary_part]
        return "\n".join(b for b in blocks if b)


def build_reader_input(
    prefix_tokens: tuple[str, ...],
    question_part: str,
    auxiliary_part: str,
    context_part: str,
    options: RenderOptions = RenderOptions(),
) -> ReaderInput:
    """Join the non-empty parts in prefix/question/auxiliary/context order.

    Inputs longer than the context budget are cut at the end of the context
    part only; the question is never truncated.
    """

    def render(ctx: str) -> str:
        blocks = [options.token_separator.join(prefix_tokens), question_part, auxiliary_part, ctx]
        return options.block_separator.join(b for b in blocks if b)

    rendered = render(context_part)
    if len(rendered) > options.context_budget and context_part:
        overhead = len(rendered) - len(context_part)
        context_part = context_part[: max(0, options.context_budget - overhead)]
        rendered = render(context_part)
    return ReaderInput(
        prefix_tokens=tuple(prefix_tokens),
        question_part=question_part,
        auxiliary_part=auxiliary_part,
        context_part=context_part,
        rendered=rendered,
    )


@dataclass(frozen=True)
class StepTemplate:
    """One reader call to be rendered once the answers in `requires` exist."""

    step_index: int
    prefix_tokens: tuple[str, ...]
    question_text: str
    substitute_question: bool
    aux_step_texts: tuple[tuple[int, str], ...] = ()
    substitute_aux: bool = False
    show_prior_answers: bool = False
    requires: frozenset[int] = field(default_factory=frozenset)


@dataclass(frozen=True)
class StepPlan:
    strategy: StrategyKind
    question: str
    context: str
    templates: tuple[StepTemplate, ...]
    options: RenderOptions = RenderOptions()


def plan_inputs(
    question: str,
    d: Decomposition,
    context: str,
    strategy: StrategyKind,
    seed: int,
    options: RenderOptions = RenderOptions(),
) -> StepPlan:
    """Build the per-step input templates for one instance under a strategy."""
    if strategy in PREFIXED_VARIANTS:
        prefix = tuple(operator_prefix(d, strategy, seed))
    else:
        prefix = ()

    if strategy not in EXPLICIT_FAMILY:
        template = StepTemplate(
            step_index=1,
            prefix_tokens=prefix,
            question_text=question,
            substitute_question=False,
        )
        return StepPlan(strategy, question, context, (template,), options)

    templates = []
    seen_refs: set[int] = set()
    for step in d.steps:
        seen_refs.update(step.refs)
        if strategy is StrategyKind.EXPLICIT_W_DECOMP:
            aux = tuple((prev.index, prev.text) for prev in d.steps[: step.index - 1])
            requires = frozenset(seen_refs)
            substitute_aux = True
            show_answers = False
        elif strategy is StrategyKind.EXPLICIT_EVERYTHING:
            aux = tuple((s.index, s.text) for s in d.steps)
            requires = frozenset(range(1, step.index))
            substitute_aux = False
            show_answers = True
        else:  # explicit, explicit_plus_implicit
            aux = ()
            requires = frozenset(step.refs)
            substitute_aux = False
            show_answers = False
        templates.append(
            StepTemplate(
                step_index=step.index,
                prefix_tokens=prefix if strategy is StrategyKind.EXPLICIT_PLUS_IMPLICIT else (),
                question_text=step.text,
                substitute_question=True,
                aux_step_texts=aux,
                substitute_aux=substitute_aux,
                show_prior_answers=show_answers,
                requires=requires,
            )
        )
    return StepPlan(strategy, question, context, tuple(templates), options)
