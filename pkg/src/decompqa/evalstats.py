"""Answer normalization, EM/F1 scoring, aggregation, curves, and significance tests."""
from __future__ import annotations

import random
import re
import statistics
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from scipy import stats as _scipy_stats

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(s: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    s = s.lower().translate(_PUNCT_TABLE)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def exact_match(prediction: str, golds: Sequence[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold alias."""
    norm_pred = normalize_answer(prediction)
    return int(any(norm_pred == normalize_answer(g) for g in golds))


def _bag_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(prediction: str, golds: Sequence[str]) -> float:
    """Token-bag F1 against the best-matching gold alias."""
    pred_tokens = normalize_answer(prediction).split()
    return max(_bag_f1(pred_tokens, normalize_answer(g).split()) for g in golds)


class NoScorableTraces(ValueError):
    pass


@dataclass(frozen=True)
class MetricSummary:
    n: int  # scored traces across all seeds
    em_mean: float
    f1_mean: float
    em_std: float  # sample std across seeds; 0.0 when n_seeds == 1
    per_seed: tuple[tuple[int, float, float], ...]  # (seed, em, f1)
    n_seeds: int
    n_failed: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "em_mean": self.em_mean,
            "f1_mean": self.f1_mean,
            "em_std": self.em_std,
            "per_seed": [list(row) for row in self.per_seed],
            "n_seeds": self.n_seeds,
            "n_failed": self.n_failed,
        }


def summarize(traces: Iterable) -> MetricSummary:
    """Per-seed EM/F1 means, then cross-seed mean and sample (n-1) std.

    Failed traces are excluded from scoring and counted separately.
    """
    by_seed: dict[int, list] = {}
    n_failed = 0
    for trace in traces:
        if trace.failed:
            n_failed += 1
            continue
        by_seed.setdefault(trace.seed, []).append(trace)
    if not by_seed:
        raise NoScorableTraces("no scorable traces (all failed or none given)")

    per_seed = []
    for seed in sorted(by_seed):
        group = by_seed[seed]
        em = statistics.mean(t.em for t in group)
        f1 = statistics.mean(t.f1 for t in group)
        per_seed.append((seed, em, f1))
    em_means = [row[1] for row in per_seed]
    em_std = statistics.stdev(em_means) if len(per_seed) > 1 else 0.0
    return MetricSummary(
        n=sum(len(g) for g in by_seed.values()),
        em_mean=statistics.mean(em_means),
        f1_mean=statistics.mean(row[2] for row in per_seed),
        em_std=em_std,
        per_seed=tuple(per_seed),
        n_seeds=len(per_seed),
        n_failed=n_failed,
    )


class DegenerateSample(ValueError):
    pass


@dataclass
class StatResult:
    pair: tuple[str, str]
    t: float
    df: float
    p_value: float
    significant_at: Optional[float] = None  # adjusted threshold, set by the caller
    decision: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "t": self.t,
            "df": self.df,
            "p_value": self.p_value,
            "significant_at": self.significant_at,
            "decision": self.decision,
        }


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float], pair: tuple[str, str] = ("a", "b")) -> StatResult:
    """Welch's unequal-variance two-sample t-test, two-sided."""
    na, nb = len(sample_a), len(sample_b)
    if na < 2 or nb < 2:
        raise DegenerateSample(f"need >=2 values per sample, got {na} and {nb}")
    va = statistics.variance(sample_a)
    vb = statistics.variance(sample_b)
    if va == 0 and vb == 0:
        raise DegenerateSample("both samples have zero variance")
    sa, sb = va / na, vb / nb
    t = (statistics.mean(sample_a) - statistics.mean(sample_b)) / (sa + sb) ** 0.5
    df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = 2 * float(_scipy_stats.t.sf(abs(t), df))
    return StatResult(pair=pair, t=t, df=df, p_value=p)


def bonferroni(p_values: Sequence[float], alpha: float) -> list[bool]:
    """decision_i = p_i < alpha / m over m comparisons."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    m = len(p_values)
    return [p < alpha / m for p in p_values]


class SizeExceedsCorpus(ValueError):
    pass


@dataclass(frozen=True)
class CurvePoint:
    train_size: int
    seed: int
    em: float
    f1: float
    reader_id: str

    def to_dict(self) -> dict:
        return {
            "train_size": self.train_size,
            "seed": self.seed,
            "em": self.em,
            "f1": self.f1,
            "reader_id": self.reader_id,
        }


@dataclass(frozen=True)
class CurveResult:
    points: tuple[CurvePoint, ...]
    baseline: tuple[CurvePoint, ...]  # zero-shot, train_size 0
    crossover: Optional[int]  # smallest size whose mean em exceeds the zero-shot mean


def nested_subset(instances: Sequence, size: int, seed: int) -> list:
    """Seeded subsample; for a fixed seed the size-s subset is a prefix of the size-s' one."""
    if size > len(instances):
        raise SizeExceedsCorpus(f"size {size} exceeds corpus of {len(instances)}")
    order = random.Random(seed).sample(range(len(instances)), len(instances))
    return [instances[i] for i in order[:size]]


def _reader_id(reader) -> str:
    return getattr(reader, "reader_id", type(reader).__name__)


def learning_curve(
    instances: Sequence,
    sizes: Sequence[int],
    seeds: Sequence[int],
    strategy,
    reader_factory: Mapping[int, object],
    zero_shot_reader,
    eval_instances: Sequence,
    parallelism: int = 1,
    subset_dir: Optional[Path] = None,
) -> CurveResult:
    """Size-experiment harness: nested training subsets vs a zero-shot baseline.

    For each (size, seed) the training subset is subsampled from `instances`
    (and emitted under subset_dir for external fine-tuning) and the
    size-specific reader is evaluated on the fixed `eval_instances` split.
    """
    from . import executor, ingest  # deferred: executor/ingest depend on this module's scorers

    for size in sizes:
        if size > len(instances):
            raise SizeExceedsCorpus(f"size {size} exceeds corpus of {len(instances)}")

    def eval_reader(reader, seed: int) -> tuple[float, float]:
        traces = executor.run_dataset(eval_instances, strategy, reader, parallelism=parallelism, seed=seed)
        scored = [t for t in traces if not t.failed]
        if not scored:
            raise NoScorableTraces(f"no scorable eval traces for reader {_reader_id(reader)}")
        return (
            statistics.mean(t.em for t in scored),
            statistics.mean(t.f1 for t in scored),
        )

    points = []
    for size in sizes:
        reader = reader_factory[size]
        for seed in seeds:
            subset = nested_subset(instances, size, seed)
            if subset_dir is not None:
                subset_dir = Path(subset_dir)
                subset_dir.mkdir(parents=True, exist_ok=True)
                ingest.write_instances(subset_dir / f"train_size{size}_seed{seed}.jsonl", subset)
            em, f1 = eval_reader(reader, seed)
            points.append(CurvePoint(train_size=size, seed=seed, em=em, f1=f1, reader_id=_reader_id(reader)))

    baseline = []
    for seed in seeds:
        em, f1 = eval_reader(zero_shot_reader, seed)
        baseline.append(CurvePoint(train_size=0, seed=seed, em=em, f1=f1, reader_id=_reader_id(zero_shot_reader)))

    zero_shot_mean = statistics.mean(p.em for p in baseline)
    crossover = None
    for size in sorted(set(sizes)):
        mean_em = statistics.mean(p.em for p in points if p.train_size == size)
        if mean_em > zero_shot_mean:
            crossover = size
            break
    return CurveResult(points=tuple(points), baseline=tuple(baseline), crossover=crossover)


SUMMARY_CSV_HEADER = "strategy,n,em_mean,em_std,f1_mean"


def summary_csv_row(strategy_name: str, summary: MetricSummary) -> str:
    return f"{strategy_name},{summary.n},{summary.em_mean:.6f},{summary.em_std:.6f},{summary.f1_mean:.6f}"
