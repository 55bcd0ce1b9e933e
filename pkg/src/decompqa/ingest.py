"""Load BREAK annotations plus HotpotQA/DROP sources and join them into instances."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from . import qdmr


class Source(Enum):
    HOTPOTQA = "HotpotQA"
    DROP = "DROP"


DATASET_TAGS = {"HOTPOT": Source.HOTPOTQA, "DROP": Source.DROP}

BREAK_COLUMNS = ("question_id", "question_text", "decomposition", "operators")


class IngestError(ValueError):
    pass


class MissingColumn(IngestError):
    pass


class MalformedRow(IngestError):
    pass


class UnparseableId(IngestError):
    pass


class MalformedRecord(IngestError):
    pass


class EmptyAnswer(IngestError):
    pass


@dataclass(frozen=True)
class BreakRow:
    question_id: str
    question_text: str
    decomposition_raw: str
    operators_raw: str


def load_break(path: str | Path) -> list[BreakRow]:
    """Read a BREAK-format CSV (question_id, question_text, decomposition, operators)."""
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in BREAK_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        for record in reader:
            values = [record.get(c) for c in BREAK_COLUMNS]
            if any(v is None for v in values):
                raise MalformedRow(f"{path}: line {reader.line_num} has too few fields")
            rows.append(BreakRow(*values))
    return rows


def parse_operator_labels(operators_raw: str) -> list[str]:
    """Parse the BREAK operators column: strip brackets and quotes, split on commas."""
    stripped = operators_raw.strip().strip("[]")
    if not stripped:
        return []
    return [label.strip().strip("'\"") for label in stripped.split(",")]


def source_id(question_id: str) -> tuple[Source, str, str]:
    """Split a BREAK id into (dataset, split, source id); underscores in the id survive."""
    parts = question_id.split("_", 2)
    if len(parts) != 3:
        raise UnparseableId(f"cannot split {question_id!r} into dataset_split_id")
    tag, split, rest = parts
    if tag not in DATASET_TAGS:
        raise UnparseableId(f"unknown dataset tag {tag!r} in {question_id!r}")
    return DATASET_TAGS[tag], split, rest


def load_hotpot(path: str | Path, gold_paragraphs_only: bool = False) -> dict[str, tuple[str, list[str]]]:
    """HotpotQA JSON array -> map _id -> (context string, gold answers).

    Context is every paragraph as "title: sentences", newline-joined; with
    gold_paragraphs_only, paragraphs are limited to supporting-fact titles.
    """
    with open(path, encoding="utf-8") as f:
        records = json.load(f)
    out = {}
    for record in records:
        record_id = record.get("_id", "<missing _id>")
        try:
            paragraphs = record["context"]
            if gold_paragraphs_only and record.get("supporting_facts"):
                gold_titles = {title for title, _ in record["supporting_facts"]}
                paragraphs = [p for p in paragraphs if p[0] in gold_titles]
            context = "\n".join(f"{title}: {''.join(sentences)}" for title, sentences in paragraphs)
            out[record["_id"]] = (context, [record["answer"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"hotpot record {record_id}: {exc}") from exc
    return out


def _drop_gold(answer: dict, query_id: str) -> list[str]:
    number = str(answer.get("number", "") or "").strip()
    if number:
        return [number]
    spans = [s for s in answer.get("spans", []) if s]
    if spans:
        golds = [", ".join(spans)]
        for span in spans:
            if span not in golds:
                golds.append(span)
        return golds
    date = answer.get("date", {}) or {}
    date_parts = [str(date.get(k, "") or "").strip() for k in ("day", "month", "year")]
    date_parts = [p for p in date_parts if p]
    if date_parts:
        return [" ".join(date_parts)]
    raise EmptyAnswer(f"drop answer for {query_id} has no number, spans, or date")


def load_drop(path: str | Path) -> dict[str, tuple[str, list[str]]]:
    """DROP JSON object -> map query_id -> (passage text, gold answers)."""
    with open(path, encoding="utf-8") as f:
        passages = json.load(f)
    out = {}
    for passage_id, record in passages.items():
        try:
            passage = record["passage"]
            qa_pairs = record["qa_pairs"]
        except (KeyError, TypeError) as exc:
            raise MalformedRecord(f"drop passage {passage_id}: {exc}") from exc
        for qa in qa_pairs:
            query_id = qa.get("query_id", "<missing query_id>")
            try:
                out[qa["query_id"]] = (passage, _drop_gold(qa["answer"], query_id))
            except (KeyError, TypeError) as exc:
                raise MalformedRecord(f"drop qa {query_id}: {exc}") from exc
    return out


@dataclass(frozen=True)
class Instance:
    question_id: str
    question_text: str
    decomposition: qdmr.Decomposition
    context: str
    gold_answers: tuple[str, ...]
    source: Source


@dataclass(frozen=True)
class JoinDiagnostic:
    question_id: str
    kind: str  # "unmatched" | "invalid"
    message: str


def join_instances(
    break_rows: Iterable[BreakRow],
    hotpot_map: dict[str, tuple[str, list[str]]],
    drop_map: dict[str, tuple[str, list[str]]],
) -> tuple[list[Instance], list[JoinDiagnostic]]:
    """Join each BREAK row to its source; every row becomes an instance or a diagnostic."""
    instances = []
    diagnostics = []
    for row in break_rows:
        try:
            dataset, _split, sid = source_id(row.question_id)
        except UnparseableId as exc:
            diagnostics.append(JoinDiagnostic(row.question_id, "unmatched", str(exc)))
            continue
        source_map = hotpot_map if dataset is Source.HOTPOTQA else drop_map
        if sid not in source_map:
            diagnostics.append(
                JoinDiagnostic(row.question_id, "unmatched", f"no {dataset.value} record for {sid}")
            )
            continue
        context, gold = source_map[sid]
        labels = parse_operator_labels(row.operators_raw)
        try:
            decomposition = qdmr.parse_decomposition(
                row.question_id, row.question_text, row.decomposition_raw, labels or None
            )
        except qdmr.DecompositionError as exc:
            diagnostics.append(JoinDiagnostic(row.question_id, "invalid", str(exc)))
            continue
        violations = qdmr.validate(decomposition)
        if violations:
            summary = "; ".join(f"{v.rule}@{v.step}" for v in violations)
            diagnostics.append(JoinDiagnostic(row.question_id, "invalid", summary))
            continue
        instances.append(
            Instance(
                question_id=row.question_id,
                question_text=row.question_text,
                decomposition=decomposition,
                context=context,
                gold_answers=tuple(gold),
                source=dataset,
            )
        )
    return instances, diagnostics


def instance_to_dict(instance: Instance) -> dict:
    return {
        "question_id": instance.question_id,
        "question_text": instance.question_text,
        "decomposition": qdmr.render_decomposition(instance.decomposition),
        "operators": [op.name for op in instance.decomposition.operators],
        "context": instance.context,
        "gold_answers": list(instance.gold_answers),
        "source": instance.source.value,
    }


def instance_from_dict(record: dict) -> Instance:
    decomposition = qdmr.parse_decomposition(
        record["question_id"],
        record["question_text"],
        record["decomposition"],
        record.get("operators") or None,
    )
    return Instance(
        question_id=record["question_id"],
        question_text=record["question_text"],
        decomposition=decomposition,
        context=record["context"],
        gold_answers=tuple(record["gold_answers"]),
        source=Source(record["source"]),
    )


def write_instances(path: str | Path, instances: Iterable[Instance]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for instance in instances:
            f.write(json.dumps(instance_to_dict(instance), ensure_ascii=False) + "\n")


def read_instances(path: str | Path) -> list[Instance]:
    instances = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                instances.append(instance_from_dict(json.loads(line)))
    return instances
