import json

import pytest

from decompqa import ingest, qdmr


def test_load_break_fixture(break_rows):
    assert len(break_rows) == 10
    first = break_rows[0]
    assert first.question_id == "HOTPOT_dev_5a8b57f25542995d1e6f1371"
    assert first.decomposition_raw.startswith("return when was Kwok Kin Pong born?")


def test_parse_operator_labels():
    assert ingest.parse_operator_labels("['select', 'select', 'intersection']") == [
        "select",
        "select",
        "intersection",
    ]
    assert ingest.parse_operator_labels('["boolean"]') == ["boolean"]
    assert ingest.parse_operator_labels("") == []
    assert ingest.parse_operator_labels("[]") == []


def test_load_break_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("question_id,question_text,operators\nq,text,[]\n")
    with pytest.raises(ingest.MissingColumn) as excinfo:
        ingest.load_break(path)
    assert "decomposition" in str(excinfo.value)


def test_load_break_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("question_id,question_text,decomposition,operators\n")
    assert ingest.load_break(path) == []


def test_load_break_short_row(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("question_id,question_text,decomposition,operators\nq1,only two fields\n")
    with pytest.raises(ingest.MalformedRow):
        ingest.load_break(path)


def test_source_id_hotpot():
    assert ingest.source_id("HOTPOT_train_5a8b57f25542995d1e6f1371") == (
        ingest.Source.HOTPOTQA,
        "train",
        "5a8b57f25542995d1e6f1371",
    )


def test_source_id_drop_preserves_underscores():
    assert ingest.source_id("DROP_train_history_388_abcd") == (
        ingest.Source.DROP,
        "train",
        "history_388_abcd",
    )


def test_source_id_unparseable():
    with pytest.raises(ingest.UnparseableId):
        ingest.source_id("X")
    with pytest.raises(ingest.UnparseableId):
        ingest.source_id("CWQ_train_whatever")


def test_load_hotpot_context_layout(fixtures_dir):
    hotpot = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json")
    context, gold = hotpot["5a8b57f25542995d1e6f1371"]
    assert gold == ["Edison Chen"]
    lines = context.split("\n")
    assert lines[0].startswith("Edison Chen: Edison Koon-hei Chen (born 7 October 1980)")
    assert lines[1].startswith("Kwok Kin Pong: ")
    assert context.index("Edison Chen:") < context.index("Kwok Kin Pong:")


def test_load_hotpot_gold_paragraphs_only(fixtures_dir):
    everything = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json")
    gold_only = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json", gold_paragraphs_only=True)
    full_context, _ = everything["5a7a06935542990198eaf050"]
    filtered_context, _ = gold_only["5a7a06935542990198eaf050"]
    assert "Willow (film):" in full_context
    assert "Willow (film):" not in filtered_context
    assert "Kevin Pollak:" in filtered_context


def test_load_hotpot_malformed_record(tmp_path):
    path = tmp_path / "hotpot.json"
    path.write_text(json.dumps([{"_id": "x1", "question": "q"}]))
    with pytest.raises(ingest.MalformedRecord) as excinfo:
        ingest.load_hotpot(path)
    assert "x1" in str(excinfo.value)


def test_load_drop_answer_precedence(fixtures_dir, tmp_path):
    drop = ingest.load_drop(fixtures_dir / "drop_fixture.json")
    assert drop["history_1204_f3a9"][1] == ["23"]
    assert drop["nfl_3310_7b21"][1] == ["Ravens"]
    assert drop["history_2288_c4d0"][1] == ["12 March 1921"]
    assert drop["nfl_4407_91aa"][1] == ["Avery Lane, Theo Brandt", "Avery Lane", "Theo Brandt"]

    # number wins over spans and date
    path = tmp_path / "drop.json"
    path.write_text(
        json.dumps(
            {
                "p1": {
                    "passage": "text",
                    "qa_pairs": [
                        {
                            "question": "q",
                            "query_id": "p1_q1",
                            "answer": {
                                "number": "7",
                                "spans": ["ignored"],
                                "date": {"day": "1", "month": "May", "year": "2000"},
                            },
                        }
                    ],
                }
            }
        )
    )
    assert ingest.load_drop(path)["p1_q1"][1] == ["7"]


def test_load_drop_empty_answer(tmp_path):
    path = tmp_path / "drop.json"
    path.write_text(
        json.dumps(
            {
                "p1": {
                    "passage": "text",
                    "qa_pairs": [
                        {
                            "question": "q",
                            "query_id": "p1_q1",
                            "answer": {"number": "", "spans": [], "date": {"day": "", "month": "", "year": ""}},
                        }
                    ],
                }
            }
        )
    )
    with pytest.raises(ingest.EmptyAnswer):
        ingest.load_drop(path)


def test_join_reports_unmatched(break_rows, fixtures_dir):
    hotpot = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json")
    instances, diagnostics = ingest.join_instances(break_rows, hotpot, {})
    assert len(instances) == 6
    assert len(diagnostics) == 4
    assert all(d.kind == "unmatched" for d in diagnostics)
    assert all(d.question_id.startswith("DROP_") for d in diagnostics)


def test_join_reports_invalid_decomposition(fixtures_dir):
    rows = [
        ingest.BreakRow("HOTPOT_dev_5a8b57f25542995d1e6f1371", "q?", "return #2 that is red", ""),
    ]
    hotpot = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json")
    instances, diagnostics = ingest.join_instances(rows, hotpot, {})
    assert instances == []
    assert diagnostics[0].kind == "invalid"
    assert "#2" in diagnostics[0].message


def test_join_accounting_is_lossless(break_rows, fixtures_dir):
    hotpot = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json")
    drop = ingest.load_drop(fixtures_dir / "drop_fixture.json")
    rows = list(break_rows) + [
        ingest.BreakRow("HOTPOT_dev_nowhere", "q?", "return something", ""),
        ingest.BreakRow("HOTPOT_dev_5a8b57f25542995d1e6f1371", "q?", "return #5", ""),
        ingest.BreakRow("garbage", "q?", "return x", ""),
    ]
    instances, diagnostics = ingest.join_instances(rows, hotpot, drop)
    assert len(instances) + len(diagnostics) == len(rows)
    kinds = sorted(d.kind for d in diagnostics)
    assert kinds == ["invalid", "unmatched", "unmatched"]


def test_join_sets_source(corpus):
    by_id = {i.question_id: i.source for i in corpus}
    assert by_id["HOTPOT_dev_5a8b57f25542995d1e6f1371"] is ingest.Source.HOTPOTQA
    assert by_id["DROP_dev_history_1204_f3a9"] is ingest.Source.DROP


def test_instances_file_round_trip(tmp_path, corpus):
    path_a = tmp_path / "a.jsonl"
    path_b = tmp_path / "b.jsonl"
    ingest.write_instances(path_a, corpus)
    ingest.write_instances(path_b, corpus)
    assert path_a.read_bytes() == path_b.read_bytes()
    loaded = ingest.read_instances(path_a)
    assert loaded == list(corpus)
    record = json.loads(path_a.read_text().splitlines()[0])
    assert list(record) == [
        "question_id",
        "question_text",
        "decomposition",
        "operators",
        "context",
        "gold_answers",
        "source",
    ]


def test_every_emitted_instance_validates(corpus):
    for instance in corpus:
        assert qdmr.validate(instance.decomposition) == []
        assert instance.context
        assert instance.gold_answers
