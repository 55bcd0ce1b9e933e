"""Error-analysis triage: serve failing traces, persist annotations, aggregate counts.

The annotation log is append-only JSONL; the latest annotation per
(question_id, annotator) wins at read time, so restarts and merges never
lose or double-count labels.
"""
from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .executor import ExecutionTrace, trace_to_dict


class ErrorCategory(Enum):
    WRONG_LAST_STEP = "wrong_last_step"
    ERROR_PROPAGATION = "error_propagation"
    INVALID_ANNOTATION = "invalid_annotation"


class UnknownInstance(ValueError):
    pass


class NoAnnotations(ValueError):
    pass


@dataclass(frozen=True)
class Annotation:
    question_id: str
    category: ErrorCategory
    note: Optional[str]
    annotator: str
    timestamp: str  # UTC ISO-8601

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "category": self.category.value,
            "note": self.note,
            "annotator": self.annotator,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "Annotation":
        return cls(
            question_id=record["question_id"],
            category=ErrorCategory(record["category"]),
            note=record.get("note"),
            annotator=record["annotator"],
            timestamp=record["timestamp"],
        )


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def error_traces(traces: Iterable[ExecutionTrace]) -> list[ExecutionTrace]:
    """Model errors only (em = 0 and not failed), stably ordered by question_id."""
    return sorted((t for t in traces if t.em == 0 and not t.failed), key=lambda t: t.question_id)


def list_error_instances(
    traces: Iterable[ExecutionTrace], page: int = 1, page_size: int = 50
) -> list[ExecutionTrace]:
    errors = error_traces(traces)
    start = (page - 1) * page_size
    return errors[start : start + page_size]


def sample_error_instances(
    traces: Iterable[ExecutionTrace], k: int, seed: int
) -> tuple[list[ExecutionTrace], bool]:
    """Seeded sample of k error instances; short_sample flags k > available."""
    errors = error_traces(traces)
    if k >= len(errors):
        return errors, k > len(errors)
    sampled = random.Random(seed).sample(errors, k)
    return sorted(sampled, key=lambda t: t.question_id), False


def active_annotations(annotations: Iterable[Annotation]) -> list[Annotation]:
    """Apply supersession: the last annotation per (question_id, annotator) wins."""
    latest: dict[tuple[str, str], Annotation] = {}
    for annotation in annotations:
        latest[(annotation.question_id, annotation.annotator)] = annotation
    return list(latest.values())


@dataclass(frozen=True)
class ErrorSummary:
    total: int
    counts: dict  # category value -> count

    def to_dict(self) -> dict:
        # count/total is the exact rational; percent is display-rounded
        return {
            "total": self.total,
            "categories": {
                category.value: {
                    "count": self.counts.get(category.value, 0),
                    "percent": round(100 * self.counts.get(category.value, 0) / self.total),
                }
                for category in ErrorCategory
            },
        }


def summarize_errors(annotations: Iterable[Annotation]) -> ErrorSummary:
    active = active_annotations(annotations)
    if not active:
        raise NoAnnotations("no annotations recorded")
    counts: dict[str, int] = {}
    for annotation in active:
        counts[annotation.category.value] = counts.get(annotation.category.value, 0) + 1
    return ErrorSummary(total=len(active), counts=counts)


class AnnotationLog:
    """Append-only JSONL annotation store with single-writer discipline."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._annotations: list[Annotation] = []
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        self._annotations.append(Annotation.from_dict(json.loads(line)))

    def append(self, annotation: Annotation) -> Annotation:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(annotation.to_dict(), ensure_ascii=False) + "\n")
            self._annotations.append(annotation)
        return annotation

    def annotations(self) -> list[Annotation]:
        with self._lock:
            return list(self._annotations)

    def active(self) -> list[Annotation]:
        return active_annotations(self.annotations())


def read_annotations(path: str | Path) -> list[Annotation]:
    annotations = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                annotations.append(Annotation.from_dict(json.loads(line)))
    return annotations


class AnnotationBody(BaseModel):
    question_id: str
    category: str
    note: Optional[str] = None
    annotator: str = "anonymous"


def build_app(
    traces: Sequence[ExecutionTrace],
    annotation_log: AnnotationLog,
    instances: Optional[Sequence] = None,
    ui_dir: Optional[str | Path] = None,
) -> FastAPI:
    """Assemble the triage HTTP API (and optionally mount the static UI)."""
    from fastapi.staticfiles import StaticFiles

    traces_by_id = {t.question_id: t for t in traces}
    instances_by_id = {i.question_id: i for i in instances} if instances else {}

    app = FastAPI(title="decompqa triage")

    def annotation_for(question_id: str) -> Optional[dict]:
        matches = [a for a in annotation_log.active() if a.question_id == question_id]
        if not matches:
            return None
        return max(matches, key=lambda a: a.timestamp).to_dict()

    @app.get("/api/instances")
    def get_instances(
        errors_only: bool = True,
        page: int = 1,
        size: int = 50,
        sample_k: Optional[int] = None,
        sample_seed: int = 0,
    ):
        if errors_only:
            pool = error_traces(traces)
        else:
            pool = sorted(traces, key=lambda t: t.question_id)
        short_sample = False
        if sample_k is not None:
            pool, short_sample = sample_error_instances(pool, sample_k, sample_seed)
        start = (page - 1) * size
        items = pool[start : start + size]
        annotated = {a.question_id for a in annotation_log.active()}
        return {
            "instances": [
                {**trace_to_dict(t), "annotated": t.question_id in annotated} for t in items
            ],
            "page": page,
            "size": size,
            "total": len(pool),
            "short_sample": short_sample,
        }

    @app.get("/api/instances/{question_id}")
    def get_instance(question_id: str):
        trace = traces_by_id.get(question_id)
        if trace is None:
            raise HTTPException(status_code=404, detail=f"unknown instance {question_id}")
        payload = trace_to_dict(trace)
        instance = instances_by_id.get(question_id)
        if instance is not None:
            from .qdmr import render_decomposition

            payload["question_text"] = instance.question_text
            payload["decomposition"] = render_decomposition(instance.decomposition)
            payload["context"] = instance.context
        else:
            payload["question_text"] = None
            payload["decomposition"] = None
            payload["context"] = None
        payload["annotation"] = annotation_for(question_id)
        return payload

    @app.post("/api/annotations")
    def post_annotation(body: AnnotationBody):
        if body.question_id not in traces_by_id:
            raise HTTPException(status_code=404, detail=f"unknown instance {body.question_id}")
        try:
            category = ErrorCategory(body.category)
        except ValueError:
            valid = ", ".join(c.value for c in ErrorCategory)
            raise HTTPException(status_code=400, detail=f"category must be one of: {valid}") from None
        annotation = Annotation(
            question_id=body.question_id,
            category=category,
            note=body.note,
            annotator=body.annotator,
            timestamp=utc_now(),
        )
        annotation_log.append(annotation)
        return annotation.to_dict()

    @app.get("/api/summary")
    def get_summary():
        try:
            summary = summarize_errors(annotation_log.annotations()).to_dict()
        except NoAnnotations:
            return {"no_annotations": True, "total": 0, "categories": {}, "annotated_question_ids": []}
        summary["no_annotations"] = False
        summary["annotated_question_ids"] = sorted({a.question_id for a in annotation_log.active()})
        return summary

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
