import pytest
from hypothesis import given, strategies as st

from personabench.text import UNK, build_vocab, decode, encode

words = st.lists(st.sampled_from(list("abcdefgh")), min_size=1, max_size=6)


def test_first_occurrence_order():
    v = build_vocab([["a", "b"], ["b", "c"]])
    assert v.index == {"a": 0, "b": 1, "c": 2}


def test_single_sentence():
    assert build_vocab([["x"]]).size == 1


def test_empty_input_raises():
    with pytest.raises(ValueError):
        build_vocab([])


def test_encode_in_order():
    v = build_vocab([["a", "b"]])
    assert encode(v, ["b", "a"]) == [1, 0]


def test_encode_omits_oov():
    assert encode(build_vocab([["a"]]), ["z"]) == []


def test_unk_policy_maps_oov_to_zero():
    v = build_vocab([["a"]], oov_policy="unk")
    assert v.words[0] == UNK
    assert encode(v, ["a", "z"]) == [1, 0]


def test_vocab_size_matches_distinct_tokens(synthetic_corpus):
    oracle = len({t for s in synthetic_corpus.train for t in s.tokens})
    assert build_vocab(synthetic_corpus.train).size == oracle


@given(st.lists(words, min_size=1, max_size=5), words)
def test_decode_encode_drops_only_oov(corpus, tokens):
    v = build_vocab(corpus)
    assert decode(v, encode(v, tokens)) == [t for t in tokens if t in v]
    assert len(encode(v, tokens)) <= len(tokens)


@given(st.lists(words, min_size=1, max_size=5))
def test_rebuild_is_identical(corpus):
    assert build_vocab(corpus) == build_vocab(corpus)
    assert build_vocab(corpus).index == build_vocab(corpus).index
