import random
import string
from dataclasses import dataclass

import pytest

from decompqa import evalstats, ingest, qdmr
from decompqa.strategy import StrategyKind


def test_normalize_answer_examples():
    assert evalstats.normalize_answer("The Usual Suspects") == "usual suspects"
    assert evalstats.normalize_answer("Kevin Elliot Pollak") == "kevin elliot pollak"
    assert evalstats.normalize_answer("  7  October,  1980 ") == "7 october 1980"


def test_normalize_answer_idempotent():
    rng = random.Random(3)
    alphabet = string.ascii_letters + string.digits + string.punctuation + "  "
    for _ in range(300):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 30)))
        once = evalstats.normalize_answer(s)
        assert evalstats.normalize_answer(once) == once


def test_exact_match_and_f1_examples():
    assert evalstats.exact_match("Kevin Elliot Pollak", ["Kevin Elliot Pollak"]) == 1
    assert evalstats.token_f1("Kevin Elliot Pollak", ["Kevin Elliot Pollak"]) == 1.0
    assert evalstats.exact_match("Kevin Pollak", ["Kevin Elliot Pollak"]) == 0
    assert evalstats.token_f1("Kevin Pollak", ["Kevin Elliot Pollak"]) == pytest.approx(0.8)
    assert evalstats.exact_match("Edison Chen", ["Edison Chen", "Edison Koon-hei Chen"]) == 1


def test_empty_prediction_rules():
    assert evalstats.exact_match("", ["the"]) == 1  # both normalize to empty
    assert evalstats.token_f1("", ["the"]) == 1.0
    assert evalstats.exact_match("", ["x"]) == 0
    assert evalstats.token_f1("", ["x"]) == 0.0
    assert evalstats.token_f1("x", ["the"]) == 0.0


# Independent oracle: character-level normalization and counting, no shared helpers.
def _oracle_normalize(s):
    kept = []
    for ch in s.lower():
        if ch not in string.punctuation:
            kept.append(ch)
    tokens = [t for t in "".join(kept).split() if t not in ("a", "an", "the")]
    return tokens


def _oracle_em(pred, golds):
    return int(any(_oracle_normalize(pred) == _oracle_normalize(g) for g in golds))


def _oracle_f1(pred, golds):
    best = 0.0
    p = _oracle_normalize(pred)
    for g in golds:
        gt = _oracle_normalize(g)
        if not p and not gt:
            best = max(best, 1.0)
            continue
        overlap = 0
        remaining = list(gt)
        for token in p:
            if token in remaining:
                remaining.remove(token)
                overlap += 1
        if overlap == 0:
            continue
        precision = overlap / len(p)
        recall = overlap / len(gt)
        best = max(best, 2 * precision * recall / (precision + recall))
    return best


def _random_answer(rng):
    vocabulary = ["kevin", "pollak", "the", "a", "7", "october", "1980", "band", "rock", "No.", "ch-en"]
    return " ".join(rng.choice(vocabulary) for _ in range(rng.randrange(0, 6)))


def test_metrics_match_brute_force_oracle():
    rng = random.Random(29)
    for _ in range(500):
        pred = _random_answer(rng)
        golds = [_random_answer(rng) for _ in range(rng.randrange(1, 4))]
        assert evalstats.exact_match(pred, golds) == _oracle_em(pred, golds)
        assert evalstats.token_f1(pred, golds) == pytest.approx(_oracle_f1(pred, golds), abs=1e-12)


def test_em_implies_f1():
    rng = random.Random(31)
    for _ in range(300):
        pred = _random_answer(rng)
        golds = [_random_answer(rng) for _ in range(rng.randrange(1, 3))]
        em = evalstats.exact_match(pred, golds)
        f1 = evalstats.token_f1(pred, golds)
        assert 0.0 <= f1 <= 1.0 and em in (0, 1)
        if em == 1:
            assert f1 == 1.0


@dataclass
class _Trace:
    seed: int
    em: int
    f1: float
    failed: bool = False


def test_summarize_single_seed():
    summary = evalstats.summarize([_Trace(0, 1, 1.0), _Trace(0, 0, 0.0)])
    assert summary.em_mean == 0.5
    assert summary.em_std == 0.0
    assert summary.n_seeds == 1
    assert summary.n == 2


def test_summarize_three_seeds_matches_reported_spread():
    traces = []
    for seed, correct in ((0, 328), (1, 337), (2, 346)):
        traces.extend(_Trace(seed, 1, 1.0) for _ in range(correct))
        traces.extend(_Trace(seed, 0, 0.0) for _ in range(1000 - correct))
    summary = evalstats.summarize(traces)
    assert summary.em_mean == pytest.approx(0.337, abs=1e-12)
    assert summary.em_std == pytest.approx(0.009, abs=1e-12)
    assert summary.per_seed[0][0] == 0 and len(summary.per_seed) == 3


def test_summarize_counts_failures():
    summary = evalstats.summarize([_Trace(0, 1, 1.0), _Trace(0, 0, 0.0, failed=True)])
    assert summary.n == 1 and summary.n_failed == 1


def test_summarize_all_failed():
    with pytest.raises(evalstats.NoScorableTraces):
        evalstats.summarize([_Trace(0, 0, 0.0, failed=True)])
    with pytest.raises(evalstats.NoScorableTraces):
        evalstats.summarize([])


def test_welch_reference_values():
    result = evalstats.welch_t([1, 2, 3], [2, 3, 4])
    assert result.t == pytest.approx(-1.2247, abs=1e-3)
    assert result.df == pytest.approx(4.0, abs=1e-9)
    assert result.p_value == pytest.approx(0.2878, abs=1e-3)


def test_welch_identical_samples():
    result = evalstats.welch_t([1, 2, 3], [1, 2, 3])
    assert result.t == 0.0
    assert result.p_value == pytest.approx(1.0)


def test_welch_swap_negates_t():
    ab = evalstats.welch_t([1, 2, 3], [2, 3, 4])
    ba = evalstats.welch_t([2, 3, 4], [1, 2, 3])
    assert ba.t == pytest.approx(-ab.t)
    assert ba.p_value == pytest.approx(ab.p_value)


def test_welch_degenerate_samples():
    with pytest.raises(evalstats.DegenerateSample):
        evalstats.welch_t([1], [2, 3])
    with pytest.raises(evalstats.DegenerateSample):
        evalstats.welch_t([1, 1], [2, 2])


def test_bonferroni_thresholds():
    assert evalstats.bonferroni([0.001, 0.02], alpha=0.05) == [True, True]
    assert evalstats.bonferroni([0.02] + [0.9] * 6, alpha=0.05) == [False] + [False] * 6
    assert 0.05 / 7 == pytest.approx(0.0071428, abs=1e-6)


def test_bonferroni_monotone():
    rng = random.Random(5)
    for _ in range(100):
        ps = [rng.random() for _ in range(rng.randrange(1, 9))]
        base = evalstats.bonferroni(ps, 0.05)
        i = rng.randrange(len(ps))
        lowered = list(ps)
        lowered[i] = ps[i] * rng.random()
        after = evalstats.bonferroni(lowered, 0.05)
        if base[i]:
            assert after[i]


def test_nested_subset_properties():
    pool = list(range(100))
    for seed in range(5):
        previous = None
        for size in (10, 25, 60, 100):
            subset = evalstats.nested_subset(pool, size, seed)
            assert len(subset) == len(set(subset)) == size
            assert subset == evalstats.nested_subset(pool, size, seed)
            if previous is not None:
                assert set(previous) <= set(subset)
            previous = subset
    assert set(evalstats.nested_subset(pool, 100, 0)) == set(pool)
    with pytest.raises(evalstats.SizeExceedsCorpus):
        evalstats.nested_subset(pool, 101, 0)


def make_probe_instances(n, tag="probe"):
    instances = []
    for k in range(n):
        question = f"{tag} {k} of {n}"
        d = qdmr.parse_decomposition(f"HOTPOT_dev_{tag}{k:04d}", question, f"return {question}")
        instances.append(
            ingest.Instance(
                question_id=d.question_id,
                question_text=question,
                decomposition=d,
                context="probe sheet",
                gold_answers=(f"answer {k}",),
                source=ingest.Source.HOTPOTQA,
            )
        )
    return instances


class ThresholdReader:
    """Answers probe k correctly iff k < limit; exact accuracy limit/n on a full probe set."""

    def __init__(self, limit):
        self.limit = limit
        self.reader_id = f"threshold-{limit}"

    def answer(self, request):
        from decompqa.readers import ReaderResponse

        k = int(request.question.split()[1])
        return ReaderResponse(answer=f"answer {k}" if k < self.limit else "wrong")


def test_learning_curve_crossover_is_strict(tmp_path):
    train = make_probe_instances(10, tag="train")
    eval_split = make_probe_instances(10, tag="eval")
    sizes = [2, 5, 8]
    result = evalstats.learning_curve(
        train,
        sizes,
        seeds=[0, 1],
        strategy=StrategyKind.NO_DECOMP,
        reader_factory={s: ThresholdReader(s) for s in sizes},
        zero_shot_reader=ThresholdReader(5),
        eval_instances=eval_split,
        subset_dir=tmp_path / "subsets",
    )
    assert [p.em for p in result.baseline] == [0.5, 0.5]
    # em(5) == 0.5 equals the baseline, so the crossover must skip it
    assert result.crossover == 8
    assert len(result.points) == len(sizes) * 2
    for size in sizes:
        for seed in (0, 1):
            assert (tmp_path / "subsets" / f"train_size{size}_seed{seed}.jsonl").exists()


def test_learning_curve_size_exceeds_corpus():
    train = make_probe_instances(3)
    with pytest.raises(evalstats.SizeExceedsCorpus):
        evalstats.learning_curve(
            train,
            [5],
            [0],
            StrategyKind.NO_DECOMP,
            {5: ThresholdReader(5)},
            ThresholdReader(1),
            eval_instances=train,
        )


def test_summary_csv_row():
    summary = evalstats.summarize([_Trace(0, 1, 1.0), _Trace(1, 0, 0.5)])
    row = evalstats.summary_csv_row("no_decomp", summary)
    assert row.startswith("no_decomp,2,0.500000,")
    assert evalstats.SUMMARY_CSV_HEADER == "strategy,n,em_mean,em_std,f1_mean"
