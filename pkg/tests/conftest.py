import json
from importlib import resources
from pathlib import Path

import pytest

from decompqa import ingest, readers

ERROR_ANALYSIS_IDS = (
    "HOTPOT_dev_5a8b57f25542995d1e6f1371",  # born-first comparison
    "HOTPOT_dev_5a8c7595554299585d9e36b6",  # both-bands boolean
    "HOTPOT_dev_5a7a06935542990198eaf050",  # Willow / Usual Suspects filter
)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return Path(str(resources.files("decompqa").joinpath("fixtures")))


@pytest.fixture(scope="session")
def break_rows(fixtures_dir):
    return ingest.load_break(fixtures_dir / "break_fixture.csv")


@pytest.fixture(scope="session")
def corpus(fixtures_dir, break_rows):
    hotpot = ingest.load_hotpot(fixtures_dir / "hotpot_fixture.json")
    drop = ingest.load_drop(fixtures_dir / "drop_fixture.json")
    instances, diagnostics = ingest.join_instances(break_rows, hotpot, drop)
    assert not diagnostics, diagnostics
    return instances


@pytest.fixture(scope="session")
def error_analysis_instances(corpus):
    by_id = {i.question_id: i for i in corpus}
    return [by_id[qid] for qid in ERROR_ANALYSIS_IDS]


@pytest.fixture(scope="session")
def error_analysis_reader(fixtures_dir):
    return readers.ScriptedReader.from_file(fixtures_dir / "error_analysis_reader.json")


@pytest.fixture(scope="session")
def triage_traces(fixtures_dir):
    from decompqa import executor

    return executor.read_traces(fixtures_dir / "triage_traces.jsonl")


@pytest.fixture(scope="session")
def triage_labels(fixtures_dir):
    from decompqa import triage

    return triage.read_annotations(fixtures_dir / "triage_labels.jsonl")
