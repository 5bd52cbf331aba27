"""Back-translation augmentation.

A reverse model (simplified -> ordinary) is trained on the parallel data and
used with greedy decoding to give sampled simplified-only sentences a
synthetic ordinary side. The synthetic pairs are mixed with the original
pairs and the forward model is trained from scratch on the mixture.
"""

import hashlib
import logging
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from . import textpipe
from .decoder import DecodeConfig, decode_corpus, greedy_decode
from .errors import InvalidArgument, NtsError, StageError
from .evalmetrics import evaluate, render_table
from .seq2seq import ModelConfig
from .textpipe import UNK, Vocabulary, build_vocab, numericalize
from .trainer import TrainConfig, save_checkpoint, train

log = logging.getLogger(__name__)

ORIGINAL = "original"
SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class SentencePair:
    """Ordinary-side ids, simplified-side ids, and where the pair came from.

    Both sides hold bare token ids; the model adds BOS/EOS where it needs them.
    """

    src_ids: tuple
    tgt_ids: tuple
    origin: str = ORIGINAL

    def __post_init__(self):
        object.__setattr__(self, "src_ids", tuple(int(i) for i in self.src_ids))
        object.__setattr__(self, "tgt_ids", tuple(int(i) for i in self.tgt_ids))
        if not self.src_ids or not self.tgt_ids:
            raise InvalidArgument("both sides of a sentence pair must be non-empty")
        if self.origin not in (ORIGINAL, SYNTHETIC):
            raise InvalidArgument(f"unknown pair origin {self.origin!r}")

    def swapped(self):
        return SentencePair(self.tgt_ids, self.src_ids, self.origin)


def derive_seed(global_seed, stage):
    """Per-stage seed: the stage name hashed together with the global seed."""
    digest = hashlib.sha256(f"{global_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def make_pairs(ordinary, simplified, ord_vocab, simp_vocab):
    if len(ordinary) != len(simplified):
        raise InvalidArgument(
            f"parallel corpora differ in length ({len(ordinary)} vs {len(simplified)})"
        )
    pairs = []
    for lineno, (o, s) in enumerate(zip(ordinary, simplified), 1):
        if not o or not s:
            raise InvalidArgument(f"line {lineno}: empty side in parallel data")
        pairs.append(SentencePair(numericalize(o, ord_vocab), numericalize(s, simp_vocab)))
    return pairs


def reverse_config(model_config):
    return replace(
        model_config,
        src_vocab_size=model_config.tgt_vocab_size,
        tgt_vocab_size=model_config.src_vocab_size,
    )


def train_reverse(pairs, train_config, model_config, ord_vocab=None, simp_vocab=None):
    """Train the simplified -> ordinary model on the parallel pairs, sides swapped."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidArgument("reverse training needs at least one parallel pair")
    return train(
        [p.swapped() for p in pairs], train_config, reverse_config(model_config),
        src_vocab=simp_vocab, tgt_vocab=ord_vocab,
    )


def backtranslate(simplified, reverse_ckpt, n, seed, simp_vocab, ord_vocab, max_len=50):
    """Greedy back-translation of ``n`` sampled simplified sentences.

    Returns ``(pairs, n_dropped)``; outputs that are empty or all-UNK are dropped.
    """
    reverse_ckpt.check_vocab(simp_vocab, ord_vocab)
    chosen = textpipe.sample(simplified, n, seed)
    params = reverse_ckpt.params()
    cfg = reverse_ckpt.model_config.with_dropout(0.0)
    decode_cfg = DecodeConfig(beam_size=1, max_len=max_len, length_norm=False)
    pairs, dropped = [], 0
    for sentence in chosen:
        simp_ids = numericalize(sentence, simp_vocab)
        if not simp_ids:
            dropped += 1
            continue
        out = greedy_decode(simp_ids, params, cfg, decode_cfg).output_ids()
        if not out or all(i == UNK for i in out):
            dropped += 1
            continue
        pairs.append(SentencePair(out, simp_ids, SYNTHETIC))
    return pairs, dropped


def mix(original, synthetic, shuffle_seed):
    """Original plus synthetic pairs in a seeded random order.

    With no synthetic pairs the original order is returned untouched, so a
    zero-sample run trains on exactly the baseline's data stream.
    """
    original, synthetic = list(original), list(synthetic)
    if not synthetic:
        return original
    combined = original + synthetic
    perm = np.random.default_rng(shuffle_seed).permutation(len(combined))
    return [combined[i] for i in perm]


@dataclass
class AugmentManifest:
    sample_size: int
    sample_seed: int
    shuffle_seed: int
    reverse_ckpt_hash: str
    n_original: int
    n_synthetic: int
    n_dropped: int
    created: str = field(default="", compare=False)

    KEYS = ("sample_size", "sample_seed", "shuffle_seed", "reverse_ckpt_hash",
            "n_original", "n_synthetic", "n_dropped")

    def to_text(self):
        # creation time goes to the run log, not here, so reruns stay byte-identical
        return "".join(f"{k} = {getattr(self, k)}\n" for k in self.KEYS)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path):
        values = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    k, _, v = line.partition("=")
                    values[k.strip()] = v.strip()
        missing = [k for k in cls.KEYS if k not in values]
        if missing:
            raise InvalidArgument(f"{path}: manifest lacks {', '.join(missing)}")
        return cls(**{k: values[k] if k == "reverse_ckpt_hash" else int(values[k])
                      for k in cls.KEYS})


def write_dataset(pairs, prefix, ord_vocab, simp_vocab):
    """Write ``prefix.ord``, ``prefix.simp`` and ``prefix.origin`` (one pair per line)."""
    with open(f"{prefix}.ord", "w", encoding="utf-8", newline="\n") as fo, \
            open(f"{prefix}.simp", "w", encoding="utf-8", newline="\n") as fs, \
            open(f"{prefix}.origin", "w", encoding="utf-8", newline="\n") as fg:
        for p in pairs:
            fo.write(" ".join(ord_vocab.token_of[i] for i in p.src_ids) + "\n")
            fs.write(" ".join(simp_vocab.token_of[i] for i in p.tgt_ids) + "\n")
            fg.write(p.origin + "\n")


def read_dataset(prefix, ord_vocab, simp_vocab):
    ordinary, simplified = textpipe.read_parallel(f"{prefix}.ord", f"{prefix}.simp")
    with open(f"{prefix}.origin", encoding="utf-8") as f:
        origins = f.read().split()
    if len(origins) != len(ordinary):
        raise InvalidArgument(f"{prefix}.origin has {len(origins)} tags for {len(ordinary)} pairs")
    return [
        SentencePair(numericalize(o, ord_vocab), numericalize(s, simp_vocab), g)
        for o, s, g in zip(ordinary, simplified, origins)
    ]


@dataclass
class PipelineConfig:
    sample_n: int
    seed: int = 0
    src_vocab_size: int = 50000
    tgt_vocab_size: int = 50000
    embed_dim: int = 32
    hidden_dim: int = 32
    attention_dim: int = 32
    train: TrainConfig = field(default_factory=TrainConfig)
    reverse_train: TrainConfig = None
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    greedy: bool = False
    unk_replace: bool = True

    def __post_init__(self):
        if self.sample_n is None or self.sample_n < 0:
            raise InvalidArgument("sample_n is required and must be >= 0")


@dataclass
class PipelineResult:
    checkpoint: object
    manifest: AugmentManifest
    report: object
    paths: dict


def _stage(name, fn, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except (NtsError, OSError) as exc:
        raise StageError(name, exc) from exc


def load_or_build_vocabs(ordinary, simplified_sides, config, src_vocab_path=None,
                         tgt_vocab_path=None):
    """Ordinary vocab from the parallel ordinary side; simplified vocab from every simplified text."""
    if src_vocab_path:
        ord_vocab = Vocabulary.load(src_vocab_path)
    else:
        ord_vocab = build_vocab(ordinary, config.src_vocab_size)
    if tgt_vocab_path:
        simp_vocab = Vocabulary.load(tgt_vocab_path)
    else:
        simp_vocab = build_vocab([s for side in simplified_sides for s in side],
                                 config.tgt_vocab_size)
    return ord_vocab, simp_vocab


def run_pipeline(parallel, simplified_path, config, out_dir, test=None, references=None,
                 src_vocab_path=None, tgt_vocab_path=None):
    """Reverse training, back-translation, mixing, forward training, evaluation.

    ``parallel`` and ``test`` are ``(ordinary_path, simplified_path)`` tuples;
    ``references`` optionally replaces the test simplified file with several
    reference files. Every artifact is written under ``out_dir``.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in (
        "vocab.ord", "vocab.simp", "reverse.ckpt", "model.ckpt", "manifest.txt",
        "test.out", "report.txt", "report.kv",
    )}
    paths["dataset"] = os.path.join(out_dir, "train.mixed")

    ordinary, simp_side = _stage("read", textpipe.read_parallel, *parallel)
    mono = _stage("read", textpipe.read_corpus, simplified_path, textpipe.SIMPLIFIED)
    ord_vocab, simp_vocab = _stage(
        "vocab", load_or_build_vocabs, ordinary, (simp_side, mono), config,
        src_vocab_path, tgt_vocab_path,
    )
    ord_vocab.save(paths["vocab.ord"])
    simp_vocab.save(paths["vocab.simp"])
    original = _stage("pairs", make_pairs, ordinary, simp_side, ord_vocab, simp_vocab)

    model_config = ModelConfig(len(ord_vocab), len(simp_vocab), config.embed_dim,
                               config.hidden_dim, config.attention_dim)
    reverse_train = replace(config.reverse_train or config.train,
                            seed=derive_seed(config.seed, "reverse"))
    forward_train = replace(config.train, seed=derive_seed(config.seed, "train"))
    sample_seed = derive_seed(config.seed, "sample")
    shuffle_seed = derive_seed(config.seed, "shuffle")

    reverse_ckpt = _stage("train_reverse", train_reverse, original, reverse_train,
                          model_config, ord_vocab, simp_vocab)
    save_checkpoint(reverse_ckpt, paths["reverse.ckpt"])

    synthetic, dropped = _stage("backtranslate", backtranslate, mono, reverse_ckpt,
                                config.sample_n, sample_seed, simp_vocab, ord_vocab,
                                config.decode.max_len)
    dataset = mix(original, synthetic, shuffle_seed)
    write_dataset(dataset, paths["dataset"], ord_vocab, simp_vocab)

    manifest = AugmentManifest(
        sample_size=config.sample_n,
        sample_seed=sample_seed,
        shuffle_seed=shuffle_seed,
        reverse_ckpt_hash=reverse_ckpt.digest(),
        n_original=len(original),
        n_synthetic=len(synthetic),
        n_dropped=dropped,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    manifest.save(paths["manifest.txt"])

    ckpt = _stage("train", train, dataset, forward_train, model_config, ord_vocab, simp_vocab)
    save_checkpoint(ckpt, paths["model.ckpt"])

    report = None
    if test is not None:
        refs = list(references) if references else [test[1]]
        _stage("translate", decode_corpus, test[0], ckpt, ord_vocab, simp_vocab, config.decode,
               paths["test.out"], config.greedy, config.unk_replace)
        report = _stage("evaluate", evaluate, paths["test.out"], test[0], refs, "NMT+synthetic")
        with open(paths["report.txt"], "w", encoding="utf-8", newline="\n") as f:
            f.write(render_table([report]))
        with open(paths["report.kv"], "w", encoding="utf-8", newline="\n") as f:
            f.write(report.to_kv())
    return PipelineResult(ckpt, manifest, report, paths)
