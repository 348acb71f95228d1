import pytest
from hypothesis import given, strategies as st

from convlink.context_expect import (EMPTY, ActiveExpectations, ExpectationRule, _parse_lexicon,
                                     default_lexicon, extract_expectations, load_lexicon,
                                     merge_synonym_table, num_matches)
from convlink.errors import ConfigError, ParseError, ValidationError
from convlink.text_norm import normalize, tokenize

from conftest import entity


def toks(text):
    return tokenize(normalize(text))


def rule(trigger, kind="verb", types=("Movie",), weight=1.0):
    return ExpectationRule(trigger, kind, frozenset(types), weight)


def test_parse_row_and_merge():
    rules = _parse_lexicon("# c\nseen\tverb\tMovie,MovieSeries\t0.9\nseen\tverb\tTVSeries\t0.5\n", "t")
    assert rules == [rule("seen", types=("Movie", "MovieSeries", "TVSeries"), weight=0.9)]


@pytest.mark.parametrize("text,exc", [
    ("seen\tverb\tMovie\t1.5\n", ValidationError),
    ("seen\tverb\tMovie\t0\n", ValidationError),
    ("seen\tverb\tMovie\n", ParseError),
    ("seen\tnoun\tMovie\t0.5\n", ParseError),
    ("seen\tverb\t \t0.5\n", ParseError),
    ("seen\tverb\tMovie\tlots\n", ParseError),
    ("!!\tverb\tMovie\t0.5\n", ParseError),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        _parse_lexicon(text, "t")


def test_weight_error_reports_line(tmp_path):
    p = tmp_path / "lex.tsv"
    p.write_text("seen\tverb\tMovie\t0.9\nread\tverb\tBook\t1.5\n")
    with pytest.raises(ValidationError) as info:
        load_lexicon(p)
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        load_lexicon(tmp_path / "missing.tsv")


def test_rule_validation():
    with pytest.raises(ValueError):
        rule("Seen")
    with pytest.raises(ValueError):
        rule("seen", weight=2)


def test_default_lexicon_examples():
    rules = default_lexicon()
    seen = extract_expectations(toks("have you seen it"), rules)
    assert {"Movie", "MovieSeries"} <= seen.expected_types
    reading = extract_expectations(toks("i am reading mockingjay"), rules)
    assert "Book" in reading.expected_types
    assert extract_expectations(toks("hello there"), rules) == EMPTY
    assert not any("Thing" in r.target_types for r in rules)


def test_extract_phrase_contiguous_and_once():
    rules = [rule("box office", "phrase"), rule("seen")]
    act = extract_expectations(toks("seen seen box office"), rules)
    assert [(r.trigger, p) for r, p in act.triggered] == [("box office", 2), ("seen", 0)]
    assert extract_expectations(toks("box the office"), rules) == EMPTY


def test_min_weight_filter():
    rules = [rule("saw", weight=0.4), rule("seen", weight=0.5)]
    act = extract_expectations(toks("saw seen"), rules, min_weight=0.5)
    assert [r.trigger for r, _ in act.triggered] == ["seen"]


def test_num_matches_counts_rules():
    act = ActiveExpectations(((rule("seen", types=("Movie", "MovieSeries")), 0), (rule("movie", "keyword"), 3),
                              (rule("read", types=("Book",)), 5)))
    assert num_matches(entity("m", "X", ("Movie",)), act) == 2
    assert num_matches(entity("b", "X", ("Book",)), act) == 1
    assert num_matches(entity("t", "X"), act) == 0


def test_combine_keeps_first():
    a = ActiveExpectations(((rule("seen"), 0),))
    b = ActiveExpectations(((rule("seen"), 4), (rule("read", types=("Book",)), 1)))
    assert [(r.trigger, p) for r, p in a.combine(b).triggered] == [("seen", 0), ("read", 1)]


def test_synonym_merge(tmp_path):
    syn = tmp_path / "syn.tsv"
    syn.write_text("watch\tview,catch up\nmovie\tpicture\n")
    rules = merge_synonym_table([rule("watch", weight=0.8), rule("movie", "keyword")], syn)
    by = {r.trigger: r for r in rules}
    assert by["view"].weight == pytest.approx(0.72)
    assert by["catch up"].kind == "phrase"
    assert by["picture"].kind == "keyword"
    with pytest.raises(ConfigError):
        merge_synonym_table([], tmp_path / "nope.tsv")
    bad = tmp_path / "bad.tsv"
    bad.write_text("watch\n")
    with pytest.raises(ParseError):
        merge_synonym_table([], bad)


WORDS = ["seen", "movie", "reading", "watching", "the", "book", "play", "team", "halo", "x"]


@given(st.lists(st.sampled_from(WORDS), max_size=10), st.lists(st.sampled_from(WORDS), max_size=4))
def test_adding_words_never_removes_expectations(words, extra):
    rules = default_lexicon()
    base = extract_expectations(tokenize(" ".join(words)), rules).expected_types
    more = extract_expectations(tokenize(" ".join(words + extra)), rules).expected_types
    assert base <= more
