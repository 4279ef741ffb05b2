import math

import pytest
from hypothesis import given, strategies as st

from droidflow.apimine import (
    ApiDoc,
    CorpusDocument,
    CriticalApiSet,
    EmptyCorpusError,
    match_critical_apis,
    merge_tool_lists,
    rank_keywords,
    select_top,
    tokenize,
)


def brute_force_scores(docs_tokens, weights):
    """Independent TF-IDF oracle: plain nested loops, no shared helpers."""
    n = len(docs_tokens)
    vocab = sorted({t for toks in docs_tokens for t in toks})
    scores = {}
    for term in vocab:
        df = sum(1 for toks in docs_tokens if term in toks)
        idf = math.log((1 + n) / (1 + df)) + 1.0
        total = 0.0
        for toks, w in zip(docs_tokens, weights):
            tf = toks.count(term) / len(toks)
            total += w * tf * idf
        scores[term] = total
    return scores


def test_rank_matches_brute_force_oracle():
    corpus = [
        CorpusDocument("d1", "send sms sms"),
        CorpusDocument("d2", "read file"),
    ]
    ranked = rank_keywords(corpus)
    oracle = brute_force_scores([["send", "sms", "sms"], ["read", "file"]], [1.0, 1.0])
    assert ranked[0].keyword == "sms"
    assert ranked[0].score == pytest.approx(oracle["sms"], rel=1e-12)
    # frozen from the oracle: 2/3 * (ln(3/2) + 1)
    assert ranked[0].score == pytest.approx(0.9369767387387762, rel=1e-12)
    for ks in ranked:
        assert ks.score == pytest.approx(oracle[ks.keyword], rel=1e-12)


def test_idf_smoothing_identity():
    # a term present in the single document of a 1-doc corpus: idf = ln(2/2)+1 = 1
    corpus = [CorpusDocument("d", "foo")]
    ranked = rank_keywords(corpus)
    assert ranked[0].score == pytest.approx(1.0)  # tf = 1, idf = 1


def test_verified_weight_doubles_score():
    base = [CorpusDocument("d1", "send sms sms"), CorpusDocument("d2", "read file")]
    heavy = [
        CorpusDocument("d1", "send sms sms", source_kind="exploitdb_verified"),
        CorpusDocument("d2", "read file"),
    ]
    r1 = {k.keyword: k.score for k in rank_keywords(base)}
    r2 = {k.keyword: k.score for k in rank_keywords(heavy)}
    assert r2["sms"] == pytest.approx(2 * r1["sms"])
    assert [k.keyword for k in rank_keywords(heavy)][:1] == ["sms"]


def test_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        rank_keywords([])


def test_stopwords_excluded_and_order_preserved():
    corpus = [CorpusDocument("d1", "alpha beta gamma beta"), CorpusDocument("d2", "alpha gamma")]
    before = [k.keyword for k in rank_keywords(corpus)]
    after = [k.keyword for k in rank_keywords(corpus, stopwords={"beta"})]
    assert "beta" not in after
    assert after == [k for k in before if k != "beta"]


@given(st.floats(min_value=0.01, max_value=100.0))
def test_weight_scaling_leaves_order_unchanged(c):
    corpus = [
        CorpusDocument("d1", "send sms sms intent", weight=1.0),
        CorpusDocument("d2", "read file intent", weight=3.0),
        CorpusDocument("d3", "camera sms file", weight=0.5),
    ]
    scaled = [
        CorpusDocument(d.doc_id, d.text, weight=d.weight * c) for d in corpus
    ]
    assert [k.keyword for k in rank_keywords(corpus)] == [
        k.keyword for k in rank_keywords(scaled)
    ]


def test_select_top_basic_and_tie_rule():
    ranked = rank_keywords(
        [CorpusDocument("d1", "aa bb"), CorpusDocument("d2", "cc dd")]
    )
    # all four tie on score; lexicographic order decides the cut
    assert select_top(ranked, 2) == ["aa", "bb"]
    assert select_top(ranked, 3) == ["aa", "bb", "cc"]


def test_select_top_150_of_10782():
    vocab = [f"kw{i:05d}" for i in range(10_782)]
    docs = [
        CorpusDocument(f"d{j}", " ".join(vocab[j::4])) for j in range(4)
    ]
    ranked = rank_keywords(docs)
    assert len(ranked) == 10_782
    top = select_top(ranked, 150)
    assert len(top) == 150
    assert top == [k.keyword for k in ranked[:150]]


def test_select_top_overlong_warns():
    ranked = rank_keywords([CorpusDocument("d", "one two three")])
    with pytest.warns(UserWarning):
        out = select_top(ranked, 150)
    assert len(out) == 3


def test_match_needs_two_distinct_keywords():
    docs = [
        ApiDoc("SmsManager.sendTextMessage", "send an sms message"),
        ApiDoc("File.read", "sms sms sms"),  # one keyword repeated: no match
        ApiDoc("Camera.open", "open the camera"),
    ]
    got = match_critical_apis(docs, {"sms", "send"}, min_matches=2)
    assert list(got) == ["SmsManager.sendTextMessage"]


def test_match_single_keyword_excluded():
    docs = [ApiDoc("Reader.read", "reads sms")]
    assert len(match_critical_apis(docs, {"sms", "send"}, min_matches=2)) == 0


def test_merge_tool_lists_filter_and_union():
    mined = CriticalApiSet.of(["La;->known()V"])
    merged = merge_tool_lists(
        ["Lsms/M;->sendTextMessage(Ljava/lang/String;)V", "Lx/Y;->irrelevant()V"],
        {"send"},
        mined,
    )
    assert "Lsms/M;->sendTextMessage(Ljava/lang/String;)V" in merged
    assert "Lx/Y;->irrelevant()V" not in merged
    assert "La;->known()V" in merged


def test_merge_idempotent_and_monotone():
    mined = CriticalApiSet.of(["La;->known()V", "Lsms/M;->send()V"])
    tool = ["Lsms/M;->send()V", "Lb;->sendMoney()V"]
    once = merge_tool_lists(tool, {"send"}, mined)
    twice = merge_tool_lists(tool, {"send"}, once)
    assert once == twice
    assert set(mined) <= set(once)


@given(st.lists(st.sampled_from(["send", "sms", "read", "file", "exec"]), min_size=1))
def test_merge_monotone_property(extra):
    mined = CriticalApiSet.of(["La;->base()V"])
    tool = [f"Lt/T;->{w}Thing()V" for w in extra]
    out = merge_tool_lists(tool, {"send", "sms"}, mined)
    assert set(mined) <= set(out)
    assert out == merge_tool_lists(tool, {"send", "sms"}, out)


def test_tokenizer_lowercase_dot():
    assert tokenize("Send.SMS, now!") == ["send.sms", "now"]
