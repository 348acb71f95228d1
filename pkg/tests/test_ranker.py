import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from convlink.context_expect import ActiveExpectations, ExpectationRule
from convlink.ranker import (ScoredCandidate, WordVector, align, best_chain, context_score, merge,
                             overlap_score, prune, rank_span, score_entity)
from convlink.segmenter import CandidateSpan
from convlink.text_norm import default_stoplist, normalize, tokenize

STOPS = default_stoplist()

from conftest import SITH_NAME, SITH_UTTERANCE, entity


def toks(text):
    return tokenize(normalize(text), STOPS)


def oracle_vector(cand, utt, penalty=Fraction(3, 4)):
    """Exhaustive search over every order-preserving set of equal-token pairs."""
    pairs = [(i, j) for i, a in enumerate(cand) for j, b in enumerate(utt) if a.surface == b.surface]
    chains = []

    def extend(chain):
        chains.append(chain)
        for p in pairs:
            if not chain or (p[0] > chain[-1][0] and p[1] > chain[-1][1]):
                extend(chain + (p,))

    extend(())

    def key(combo):
        gap = sum((q[0] - p[0] - 1) + (q[1] - p[1] - 1) for p, q in zip(combo, combo[1:]))
        return (-len(combo), gap, [j for _, j in combo], [i for i, _ in combo])

    best = (None, min(chains, key=key)) if len(chains) > 1 else None
    out = [Fraction(0)] * len(cand)
    if best is None:
        return out
    combo = best[1]
    for n, (i, j) in enumerate(combo):
        v = Fraction(1)
        if n:
            pi, pj = combo[n - 1]
            v = Fraction(1, i - pi) * Fraction(1, j - pj)
        if cand[i].is_stop:
            v *= penalty
        out[i] = v
    return out


def test_golden_vector():
    vec = align(toks(SITH_NAME), toks(SITH_UTTERANCE))
    expected = [1, 1, 0, 0, 1 / 9, 0.75, 0.75, 1]
    assert len(vec) == 8
    assert all(abs(a - b) <= 0.005 for a, b in zip(vec.elements, expected))
    assert vec.zero_count == 2


def test_golden_overlap():
    vec = align(toks(SITH_NAME), toks(SITH_UTTERANCE))
    # (1+1+1/9+.75+.75+1) / 3 * 795.59
    assert overlap_score(vec, 795.59) == pytest.approx(float(Fraction(83, 18) / 3 * Fraction("795.59")))
    assert abs(overlap_score(vec, 795.59) - 1222.9) <= 0.5


def test_stop_word_elements():
    vec = align(toks("the lord of the rings"), toks("the lord of the rings"))
    assert vec.elements == (0.75, 1.0, 0.75, 0.75, 1.0)


def test_no_match():
    vec = align(toks("halo"), toks("star wars"))
    assert vec.elements == (0.0,) and vec.pairs == ()
    assert overlap_score(vec, 100.0) == 0.0
    with pytest.raises(ValueError):
        align([], toks("x"))


def test_context_score():
    assert context_score(100.0, 0) == 100.0
    assert context_score(100.0, 2) == 300.0


WORDS = ["a", "b", "c", "the", "of", "x"]


@settings(max_examples=300)
@given(st.lists(st.sampled_from(WORDS), min_size=1, max_size=6), st.lists(st.sampled_from(WORDS), max_size=7))
def test_alignment_matches_exhaustive_oracle(cand, utt):
    c, u = tokenize(" ".join(cand), STOPS), tokenize(" ".join(utt), STOPS)
    vec = align(c, u)
    want = oracle_vector(c, u)
    assert all(abs(a - float(b)) < 1e-12 for a, b in zip(vec.elements, want))
    assert all(0.0 <= x <= 1.0 for x in vec.elements)


@given(st.lists(st.sampled_from(WORDS), min_size=1, max_size=6), st.lists(st.sampled_from(WORDS), max_size=7),
       st.floats(0, 1e4), st.floats(0.01, 100))
def test_overlap_linear_in_base(cand, utt, base, c):
    vec = align(tokenize(" ".join(cand), STOPS), tokenize(" ".join(utt), STOPS))
    assert overlap_score(vec, base * c) == pytest.approx(overlap_score(vec, base) * c, rel=1e-9, abs=1e-9)


def test_best_chain_prefers_compact():
    # "b" occurs twice; the compact pairing keeps the gap at zero
    assert best_chain(["a", "b"], ["b", "x", "a", "b"]) == ((0, 2), (1, 3))


def span(start, end, text="", source="noun-cluster"):
    return CandidateSpan(start, end, text or f"s{start}-{end}", source)


def test_score_entity_tightens_span():
    utt = toks("i love star wars so much")
    sc = score_entity(span(0, 6, "i love star wars so much"), entity("sw", "Star Wars", score=100.0), utt)
    assert (sc.span.start, sc.span.end, sc.span.text) == (2, 4, "star wars")
    assert sc.overlap_score == pytest.approx(200.0)


def test_scoring_modes():
    utt = toks("seen halo")
    active = ActiveExpectations(((ExpectationRule("seen", "verb", frozenset({"Movie"}), 0.9), 0),))
    e = entity("h", "Halo Wars", ("Movie",), 100.0)
    s = span(1, 2, "halo")
    assert score_entity(s, e, utt, active, scoring="segmentation").final_score == 100.0
    assert score_entity(s, e, utt, active, scoring="overlap").final_score == pytest.approx(50.0)
    ctx = score_entity(s, e, utt, active, scoring="context")
    assert ctx.matches == 1 and ctx.final_score == pytest.approx(100.0)


def test_rank_span_tie_breaks():
    utt = toks("halo")
    a, b = entity("b", "Halo", score=10.0), entity("a", "Halo", score=10.0)
    assert rank_span(span(0, 1, "halo"), [a, b], utt).entity.id == "a"
    assert rank_span(span(0, 1, "halo"), [], utt) is None


def scored(start, end, eid, final, overlap=None):
    e = entity(eid, eid, score=1.0)
    return ScoredCandidate(span(start, end), e, WordVector((1.0,)), final if overlap is None else overlap, 0, final)


def test_prune_stages():
    cands = [scored(0, 1, "a", 200, overlap=100), scored(1, 2, "b", 150), scored(2, 3, "c", 151, overlap=151)]
    assert [c.entity.id for c in prune(cands, 150)] == ["a", "c"]
    assert [c.entity.id for c in prune(cands, 150, "pre-context")] == ["c"]
    assert len(prune(cands, 0)) == 3
    with pytest.raises(ValueError):
        prune(cands, -1)
    with pytest.raises(ValueError):
        prune(cands, 1, "later")


def test_merge_nested_same_entity_takes_wider():
    out = merge([scored(2, 4, "sw", 500), scored(1, 4, "sw", 300)])
    assert [(m.span.start, m.span.end, m.entity.id, m.final_score) for m in out] == [(1, 4, "sw", 500)]


def test_merge_conflict_drops_lower():
    out = merge([scored(0, 3, "a", 100), scored(2, 5, "b", 400), scored(6, 7, "c", 1)])
    assert [m.entity.id for m in out] == ["b", "c"]


def test_merge_same_entity_keeps_wider_span_and_best_score():
    out = merge([scored(0, 4, "a", 100), scored(1, 2, "a", 400)])
    assert [(m.span.start, m.span.end, m.final_score) for m in out] == [(0, 4, 400)]
    out = merge([scored(0, 4, "a", 400), scored(1, 2, "a", 100)])
    assert [(m.span.start, m.span.end) for m in out] == [(0, 4)]


@st.composite
def candidate_sets(draw):
    n = draw(st.integers(1, 12))
    out = []
    for k in range(n):
        start = draw(st.integers(0, 9))
        end = draw(st.integers(start + 1, 10))
        out.append(scored(start, end, draw(st.sampled_from("abc")), draw(st.integers(1, 500))))
    return out


@settings(max_examples=300)
@given(candidate_sets())
def test_merge_output_disjoint(cands):
    out = merge(cands)
    for m, n in itertools.combinations(out, 2):
        assert not m.span.overlaps(n.span)
    assert {(m.span.start, m.span.end) for m in out} <= {(c.span.start, c.span.end) for c in cands}
    assert max(c.final_score for c in cands) == max(m.final_score for m in out)


@given(st.lists(st.sampled_from(["alpha", "beta", "gamma", "delta"]), min_size=1, max_size=5),
       st.integers(0, 4), st.floats(1, 1e4))
def test_exact_name_scores_length_times_base(name, offset, base):
    utt = tokenize(" ".join(["pad"] * offset + name + ["pad"]), STOPS)
    vec = align(tokenize(" ".join(name), STOPS), utt)
    assert overlap_score(vec, base) == pytest.approx(len(name) * base)
