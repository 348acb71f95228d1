import time
from pathlib import Path

import pytest

from convlink.kg_backend import KgEntity, SnapshotIndex, build_snapshot
from convlink.pipeline import Linker, PipelineConfig
from convlink.text_norm import default_stoplist

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"

SITH_UTTERANCE = "i think my favorite star wars movie is revenge of the sith"
SITH_NAME = "Star Wars: Episode III - Revenge of the Sith"

# constituency parse of "i think my favorite star wars is revenge of the sith"
FIGURE3_PARSE = (
    "(ROOT (S (NP (PRP i)) (VP (VBP think) (SBAR (S (NP (PRP$ my) (JJ favorite) (NNP star) (NNPS wars))"
    " (VP (VBZ is) (NP (NP (NN revenge)) (PP (IN of) (NP (DT the) (NN sith))))))))))"
)


@pytest.fixture(scope="session")
def stops():
    return default_stoplist()


@pytest.fixture(scope="session")
def sith6():
    return build_snapshot(DATA / "sith6.jsonl")


@pytest.fixture(scope="session")
def snapshot():
    return build_snapshot(DATA / "snapshot.jsonl")


@pytest.fixture
def sith_linker(sith6):
    return Linker(PipelineConfig(), sith6)


@pytest.fixture
def linker(snapshot):
    return Linker(PipelineConfig(), snapshot)


def entity(eid, name, types=("Thing",), score=100.0, url=None):
    return KgEntity(eid, name, tuple(types), score, source_url=url)


def index(*entities):
    return SnapshotIndex.from_entities(entities)


# acceptance bookkeeping: one pass/fail line per criterion in the terminal summary
SUITE_BUDGET_S = 30.0
_started = time.perf_counter()
_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "tests": 0})
    if report.when == "call":
        entry["tests"] += 1
    if report.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    elapsed = time.perf_counter() - _started
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        ok = entry["ok"]
        extra = ""
        if number == 10:
            ok = ok and elapsed < SUITE_BUDGET_S
            extra = f"; suite wall-clock {elapsed:.1f}s (budget {SUITE_BUDGET_S:.0f}s)"
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {entry['title']}"
                                    f" [{entry['tests']} test(s){extra}]")
