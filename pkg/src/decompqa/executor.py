"""Iterative execution of step plans against a reader, recording full traces."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from . import evalstats
from .qdmr import REF_TOKEN, Decomposition
from .readers import Reader, ReaderError, ReaderRequest
from .strategy import ReaderInput, RenderOptions, StepPlan, StepTemplate, StrategyKind, build_reader_input, plan_inputs

logger = logging.getLogger(__name__)


class UnresolvedReference(ValueError):
    def __init__(self, ref: int):
        super().__init__(f"no answer recorded for #{ref}")
        self.ref = ref


def substitute_refs(step_text: str, answers_by_index: Mapping[int, str]) -> str:
    """Replace every ``#k`` token with the predicted answer for step k.

    Tokens are matched as maximal digit runs, so "#12" is never read as
    "#1" followed by "2"; inserted answers are never re-scanned.
    """

    def replace(match):
        ref = int(match.group(1))
        if ref not in answers_by_index:
            raise UnresolvedReference(ref)
        return answers_by_index[ref]

    return REF_TOKEN.sub(replace, step_text)


@dataclass(frozen=True)
class StepPrediction:
    step_index: int
    input_rendered: str
    answer: str
    score: Optional[float]


@dataclass(frozen=True)
class ExecutionTrace:
    question_id: str
    strategy: StrategyKind
    steps: tuple[StepPrediction, ...]
    final_answer: str
    gold_answers: tuple[str, ...]
    em: int
    f1: float
    seed: int
    failed: bool = False


def derive_seed(seed: int, question_id: str) -> int:
    """Stable per-instance 64-bit seed; independent of process hash randomization."""
    digest = hashlib.blake2b(f"{seed}\x1f{question_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def render_step_input(plan: StepPlan, template: StepTemplate, answers: Mapping[int, str]) -> ReaderInput:
    """Materialize one template against the answers resolved so far."""
    question = template.question_text
    if template.substitute_question:
        question = substitute_refs(question, answers)
    aux_lines = []
    for index, text in template.aux_step_texts:
        aux_lines.append(f"#{index}: {substitute_refs(text, answers) if template.substitute_aux else text}")
    if template.show_prior_answers:
        for index in sorted(i for i in answers if i < template.step_index):
            aux_lines.append(f"#{index}: {answers[index]}")
    return build_reader_input(
        template.prefix_tokens, question, "\n".join(aux_lines), plan.context, plan.options
    )


def execute(
    question: str,
    d: Decomposition,
    context: str,
    strategy: StrategyKind,
    reader: Reader,
    gold: Sequence[str],
    seed: int,
    options: RenderOptions = RenderOptions(),
) -> ExecutionTrace:
    """Run one instance: templates strictly in order, answers fed forward.

    A reader error aborts the instance and yields a trace marked failed;
    failed traces score 0 and are excluded from aggregation by summarize().
    """
    instance_seed = derive_seed(seed, d.question_id)
    plan = plan_inputs(question, d, context, strategy, instance_seed, options)
    answers: dict[int, str] = {}
    steps = []
    for template in plan.templates:
        reader_input = render_step_input(plan, template, answers)
        request = ReaderRequest(question=reader_input.query_text, context=reader_input.context_part)
        try:
            response = reader.answer(request)
        except ReaderError as exc:
            logger.warning("reader failed on %s step %d: %s", d.question_id, template.step_index, exc)
            return ExecutionTrace(
                question_id=d.question_id,
                strategy=strategy,
                steps=tuple(steps),
                final_answer="",
                gold_answers=tuple(gold),
                em=0,
                f1=0.0,
                seed=seed,
                failed=True,
            )
        steps.append(
            StepPrediction(
                step_index=template.step_index,
                input_rendered=reader_input.rendered,
                answer=response.answer,
                score=response.score,
            )
        )
        answers[template.step_index] = response.answer

    final_answer = steps[-1].answer
    return ExecutionTrace(
        question_id=d.question_id,
        strategy=strategy,
        steps=tuple(steps),
        final_answer=final_answer,
        gold_answers=tuple(gold),
        em=evalstats.exact_match(final_answer, gold),
        f1=evalstats.token_f1(final_answer, gold),
        seed=seed,
        failed=False,
    )


def run_dataset(
    instances: Sequence,
    strategy: StrategyKind,
    reader: Reader,
    parallelism: int = 1,
    seed: int = 0,
    options: RenderOptions = RenderOptions(),
) -> list[ExecutionTrace]:
    """Execute every instance; output order equals input order at any parallelism."""

    def run_one(instance) -> ExecutionTrace:
        return execute(
            instance.question_text,
            instance.decomposition,
            instance.context,
            strategy,
            reader,
            instance.gold_answers,
            seed,
            options,
        )

    if parallelism <= 1 or len(instances) <= 1:
        return [run_one(instance) for instance in instances]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run_one, instances))


def trace_to_dict(trace: ExecutionTrace) -> dict:
    return {
        "question_id": trace.question_id,
        "strategy": trace.strategy.value,
        "seed": trace.seed,
        "failed": trace.failed,
        "steps": [
            {
                "step_index": s.step_index,
                "input_rendered": s.input_rendered,
                "answer": s.answer,
                "score": s.score,
            }
            for s in trace.steps
        ],
        "final_answer": trace.final_answer,
        "gold_answers": list(trace.gold_answers),
        "em": trace.em,
        "f1": trace.f1,
    }


def trace_from_dict(record: dict) -> ExecutionTrace:
    return ExecutionTrace(
        question_id=record["question_id"],
        strategy=StrategyKind(record["strategy"]),
        steps=tuple(
            StepPrediction(s["step_index"], s["input_rendered"], s["answer"], s.get("score"))
            for s in record["steps"]
        ),
        final_answer=record["final_answer"],
        gold_answers=tuple(record["gold_answers"]),
        em=record["em"],
        f1=record["f1"],
        seed=record["seed"],
        failed=record["failed"],
    )


def write_traces(path: str | Path, traces: Iterable[ExecutionTrace]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for trace in traces:
            f.write(json.dumps(trace_to_dict(trace), ensure_ascii=False) + "\n")


def read_traces(path: str | Path) -> list[ExecutionTrace]:
    traces = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                traces.append(trace_from_dict(json.loads(line)))
    return traces
