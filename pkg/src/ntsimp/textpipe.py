"""Corpus ingestion: splitting, tokenization, filtering, vocabularies, sampling."""

import hashlib
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<s>", "</s>")

ORDINARY = "ordinary"
SIMPLIFIED = "simplified"

# Abbreviations whose trailing period never ends a sentence.
ABBREVIATIONS = frozenset(
    {"mr.", "mrs.", "ms.", "dr.", "st.", "prof.", "sr.", "jr.", "mt.", "vs.", "e.g.", "i.e."}
)

PUNCTUATION = ".,!?;:\"'()"
_PUNCT_RE = re.compile("([" + re.escape(PUNCTUATION) + "])")
_BOUNDARY_RE = re.compile(r"[.!?](?=\s+[A-Z]|\s*$)")

# A sentence is an immutable sequence of surface tokens.
Sentence = tuple


@dataclass(frozen=True)
class Corpus:
    sentences: tuple
    side: str = SIMPLIFIED

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(tuple(s) for s in self.sentences))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def with_sentences(self, sentences):
        return Corpus(sentences, self.side)


def split_sentences(text):
    """Split raw text after ``. ! ?`` followed by whitespace and a capital, or at the end.

    >>> split_sentences("Mr. X runs. It rains.")
    ['Mr. X runs.', 'It rains.']
    """
    sentences = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        words = text[start:end].split()
        if words and words[-1].lower() in ABBREVIATIONS:
            continue
        chunk = text[start:end].strip()
        if chunk:
            sentences.append(chunk)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(sentence):
    """Lowercase, detach punctuation characters, split on whitespace."""
    return tuple(_PUNCT_RE.sub(r" \1 ", sentence.lower()).split())


def filter_by_length(corpus, min_len=10, max_len=40):
    if min_len > max_len:
        raise InvalidArgument(f"min_len {min_len} exceeds max_len {max_len}")
    return corpus.with_sentences(s for s in corpus if min_len <= len(s) <= max_len)


def dedup(corpus):
    seen = set()
    kept = []
    for s in corpus:
        if s not in seen:
            seen.add(s)
            kept.append(s)
    return corpus.with_sentences(kept)


def sample(corpus, n, seed):
    """Draw ``n`` sentences without replacement; the draw depends only on (corpus, n, seed)."""
    if n < 0 or n > len(corpus):
        raise InvalidArgument(f"cannot sample {n} sentences from a corpus of {len(corpus)}")
    rng = np.random.default_rng(seed)
    picks = rng.permutation(len(corpus))[:n]
    return corpus.with_sentences(corpus.sentences[i] for i in picks)


class Vocabulary:
    """Bidirectional token/id map; ids 0-3 are PAD, UNK, BOS, EOS."""

    def __init__(self, tokens=()):
        self.token_of = list(SPECIALS)
        self.id_of = {t: i for i, t in enumerate(SPECIALS)}
        for tok in tokens:
            if tok in self.id_of:
                raise InvalidArgument(f"duplicate vocabulary token {tok!r}")
            self.id_of[tok] = len(self.token_of)
            self.token_of.append(tok)

    def __len__(self):
        return len(self.token_of)

    def __contains__(self, token):
        return token in self.id_of

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.token_of == other.token_of

    def lookup(self, token):
        return self.id_of.get(token, UNK)

    def to_text(self):
        return "".join(f"{tok}\t{i}\n" for i, tok in enumerate(self.token_of))

    def fingerprint(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path):
        entries = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, idx = line.rpartition("\t")
                if not tok or not idx.isdigit() or int(idx) != len(entries):
                    raise InvalidArgument(f"{path}:{lineno}: malformed vocabulary entry")
                entries.append(tok)
        if tuple(entries[:4]) != SPECIALS:
            raise InvalidArgument(f"{path}: special tokens missing or out of order")
        return cls(entries[4:])


def build_vocab(corpus, max_size):
    """Specials plus the ``max_size - 4`` most frequent tokens (ties lexicographic)."""
    if max_size < 5:
        raise InvalidArgument(f"max_size must be at least 5, got {max_size}")
    counts = Counter(tok for s in corpus for tok in s if tok not in SPECIALS)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(tok for tok, _ in ranked[: max_size - len(SPECIALS)])


def numericalize(sentence, vocab, add_bounds=False):
    ids = [vocab.lookup(tok) for tok in sentence]
    if add_bounds:
        ids = [BOS] + ids + [EOS]
    return ids


def detokenize(ids, vocab):
    """Map ids back to tokens, dropping PAD/BOS/EOS."""
    return tuple(vocab.token_of[i] for i in ids if i not in (PAD, BOS, EOS))


def read_corpus(path, side=SIMPLIFIED):
    """Read a tokenized corpus file (one sentence per line). Blank lines give empty sentences."""
    with open(path, encoding="utf-8") as f:
        return Corpus([tuple(line.split()) for line in f], side)


def write_corpus(corpus, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in corpus:
            f.write(" ".join(s) + "\n")


def read_parallel(ord_path, simp_path):
    ordinary = read_corpus(ord_path, ORDINARY)
    simplified = read_corpus(simp_path, SIMPLIFIED)
    if len(ordinary) != len(simplified):
        raise InvalidArgument(
            f"parallel files differ in length: {ord_path} has {len(ordinary)} lines, "
            f"{simp_path} has {len(simplified)}"
        )
    return ordinary, simplified


def preprocess_text(text, min_len=10, max_len=40, side=SIMPLIFIED):
    """Split, tokenize, length-filter and deduplicate a raw document.

    Returns the cleaned corpus and the number of sentences found before filtering.
    """
    raw = Corpus([tokenize(s) for s in split_sentences(text)], side)
    raw = raw.with_sentences(s for s in raw if s)
    return dedup(filter_by_length(raw, min_len, max_len)), len(raw)
