import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntsimp.errors import InvalidArgument
from ntsimp.textpipe import (
    BOS,
    EOS,
    ORDINARY,
    SPECIALS,
    UNK,
    Corpus,
    Vocabulary,
    build_vocab,
    dedup,
    detokenize,
    filter_by_length,
    numericalize,
    preprocess_text,
    read_corpus,
    read_parallel,
    sample,
    split_sentences,
    tokenize,
    write_corpus,
)


def sent(n, word="w"):
    return tuple(f"{word}{i}" for i in range(n))


class TestSplitSentences:
    def test_two_sentences(self):
        assert split_sentences("A cat. A dog.") == ["A cat.", "A dog."]

    def test_empty(self):
        assert split_sentences("") == []
        assert split_sentences("   \n ") == []

    def test_abbreviation_is_protected(self):
        assert split_sentences("Mr. X runs. It rains.") == ["Mr. X runs.", "It rains."]

    def test_lowercase_after_period_does_not_split(self):
        assert split_sentences("It is 3 p.m. now. Yes!") == ["It is 3 p.m. now.", "Yes!"]

    def test_question_and_exclamation(self):
        assert split_sentences("Why? Because! Fine") == ["Why?", "Because!", "Fine"]

    @settings(max_examples=200, deadline=None)
    @given(st.text(alphabet="aAbB .!?\n", max_size=60))
    def test_preserves_non_whitespace(self, text):
        joined = "".join(split_sentences(text))
        assert "".join(joined.split()) == "".join(text.split())


class TestTokenize:
    def test_terminal_period(self):
        assert tokenize("The cat sat.") == ("the", "cat", "sat", ".")

    def test_apostrophe(self):
        assert tokenize("Don't stop") == ("don", "'", "t", "stop")

    def test_whitespace_collapse(self):
        assert tokenize("a  b") == ("a", "b")

    def test_all_punctuation(self):
        assert tokenize('(x), "y"; z: w!?') == (
            "(", "x", ")", ",", '"', "y", '"', ";", "z", ":", "w", "!", "?",
        )

    def test_empty(self):
        assert tokenize("") == ()

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=40))
    def test_idempotent_on_rejoined_output(self, text):
        toks = tokenize(text)
        assert tokenize(" ".join(toks)) == toks


class TestFilterByLength:
    @pytest.mark.parametrize("n,kept", [(9, False), (10, True), (40, True), (41, False)])
    def test_boundaries(self, n, kept):
        out = filter_by_length(Corpus([sent(n)]))
        assert (len(out) == 1) is kept

    def test_order_preserved_and_side_kept(self):
        c = Corpus([sent(12, "a"), sent(3), sent(15, "b")], ORDINARY)
        out = filter_by_length(c)
        assert out.sentences == (sent(12, "a"), sent(15, "b"))
        assert out.side == ORDINARY

    def test_min_above_max(self):
        with pytest.raises(InvalidArgument):
            filter_by_length(Corpus([]), 5, 4)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 50), max_size=20), st.integers(0, 30), st.integers(0, 30))
    def test_idempotent(self, lengths, lo, span):
        c = Corpus([sent(n) for n in lengths])
        once = filter_by_length(c, lo, lo + span)
        assert filter_by_length(once, lo, lo + span) == once


class TestDedup:
    def test_exact_repeat(self):
        s1, s2 = ("a", "b"), ("c",)
        assert dedup(Corpus([s1, s2, s1])).sentences == (s1, s2)

    def test_empty(self):
        assert dedup(Corpus([])).sentences == ()

    def test_near_duplicate_kept(self):
        s1, s1b = ("a", "b", "c"), ("a", "b", "d")
        assert dedup(Corpus([s1, s1b, s1])).sentences == (s1, s1b)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("abc"), max_size=3), max_size=15))
    def test_idempotent_and_shrinking(self, sentences):
        c = Corpus(sentences)
        once = dedup(c)
        assert dedup(once) == once
        assert len(once) <= len(c)
        assert set(once.sentences) == set(c.sentences)


class TestBuildVocab:
    def test_most_frequent_kept(self):
        v = build_vocab([tokenize("a a a b b c")], 6)
        assert v.token_of == list(SPECIALS) + ["a", "b"]

    def test_empty_corpus(self):
        assert build_vocab([], 10).token_of == list(SPECIALS)

    def test_lexicographic_tie(self):
        assert build_vocab([("y", "x")], 5).token_of == list(SPECIALS) + ["x"]

    def test_too_small(self):
        with pytest.raises(InvalidArgument):
            build_vocab([("a",)], 4)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("abcdefgh"), max_size=6), max_size=10),
           st.integers(5, 12))
    def test_frequency_ordering(self, sentences, max_size):
        v = build_vocab(sentences, max_size)
        freq = {}
        for s in sentences:
            for t in s:
                freq[t] = freq.get(t, 0) + 1
        counts = [freq[t] for t in v.token_of[4:]]
        assert counts == sorted(counts, reverse=True)
        assert len(v) <= max_size


class TestNumericalize:
    def test_unk(self):
        v = Vocabulary(["the"])
        assert numericalize(("the", "zyzzyva"), v) == [v.lookup("the"), UNK]

    def test_empty_with_bounds(self):
        assert numericalize((), Vocabulary(), add_bounds=True) == [BOS, EOS]

    def test_round_trip(self):
        v = build_vocab([("a", "b", "c")], 10)
        s = ("c", "a", "b", "a")
        assert detokenize(numericalize(s, v, add_bounds=True), v) == s

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("abcdefgh"), max_size=6), max_size=6),
           st.lists(st.sampled_from("abcdefghijk"), max_size=10))
    def test_ids_in_range(self, corpus, sentence):
        v = build_vocab(corpus, 7)
        assert all(0 <= i < len(v) for i in numericalize(sentence, v, add_bounds=True))


class TestSample:
    corpus = Corpus([sent(3, c) for c in "abcdefghij"])

    def test_zero(self):
        assert len(sample(self.corpus, 0, 1)) == 0

    def test_full_is_permutation(self):
        out = sample(self.corpus, len(self.corpus), 7)
        assert sorted(out.sentences) == sorted(self.corpus.sentences)

    def test_deterministic_files(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        write_corpus(sample(self.corpus, 5, 3), a)
        write_corpus(sample(self.corpus, 5, 3), b)
        assert a.read_bytes() == b.read_bytes()

    def test_distinct_draws(self):
        out = sample(self.corpus, 6, 11)
        assert len(set(out.sentences)) == 6

    def test_too_many(self):
        with pytest.raises(InvalidArgument):
            sample(self.corpus, 11, 0)


class TestFiles:
    def test_vocab_round_trip(self, tmp_path):
        v = build_vocab([("x", "y", "y", "z")], 20)
        v.save(tmp_path / "v.txt")
        loaded = Vocabulary.load(tmp_path / "v.txt")
        assert loaded == v
        assert loaded.fingerprint() == v.fingerprint()
        assert (tmp_path / "v.txt").read_text().splitlines()[4] == "y\t4"

    def test_vocab_bad_file(self, tmp_path):
        (tmp_path / "v.txt").write_text("<pad>\t0\nfoo\t5\n")
        with pytest.raises(InvalidArgument):
            Vocabulary.load(tmp_path / "v.txt")

    def test_corpus_round_trip(self, tmp_path):
        c = Corpus([("a", "b"), ("c",)])
        write_corpus(c, tmp_path / "c.txt")
        assert read_corpus(tmp_path / "c.txt") == c

    def test_parallel_length_mismatch(self, tmp_path):
        (tmp_path / "x.ord").write_text("a\nb\n")
        (tmp_path / "x.simp").write_text("a\n")
        with pytest.raises(InvalidArgument):
            read_parallel(tmp_path / "x.ord", tmp_path / "x.simp")


def test_preprocess_text_pipeline():
    long_ = "Word " + " ".join(["word"] * 10) + "."
    short = "Too short."
    text = f"{long_} {short} {long_} Another one with quite a few words in it ok."
    corpus, n_in = preprocess_text(text)
    assert n_in == 4
    assert corpus.sentences == (tokenize(long_), tokenize("Another one with quite a few words in it ok."))
