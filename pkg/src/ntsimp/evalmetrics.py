"""Automatic evaluation: corpus BLEU, Flesch-Kincaid grade level, SARI."""

import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import InvalidArgument

MAX_ORDER = 4
_VOWEL_GROUP = re.compile(r"[aeiouy]+")
_NON_ALPHA_EDGES = re.compile(r"^[^A-Za-z]+|[^A-Za-z]+$")


def ngrams(tokens, n):
    """Multiset of the n-grams of ``tokens``."""
    tokens = tuple(tokens)
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


# -- BLEU --------------------------------------------------------------------


def bleu(hypotheses, *reference_sets):
    """Corpus-level BLEU-4 on a 0-100 scale, without smoothing.

    Each element of ``reference_sets`` is a list of references aligned with
    ``hypotheses``; with several sets, n-gram counts are clipped by the
    per-reference maximum and the closest reference length is used for the
    brevity penalty.
    """
    if not reference_sets:
        raise InvalidArgument("bleu needs at least one reference set")
    if not hypotheses:
        raise InvalidArgument("bleu needs at least one hypothesis")
    for k, refs in enumerate(reference_sets):
        if len(refs) != len(hypotheses):
            raise InvalidArgument(
                f"reference set {k} has {len(refs)} sentences, expected {len(hypotheses)}"
            )

    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for i, hyp in enumerate(hypotheses):
        refs = [rs[i] for rs in reference_sets]
        hyp_len += len(hyp)
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, MAX_ORDER + 1):
            counts = ngrams(hyp, n)
            max_ref = Counter()
            for r in refs:
                max_ref |= ngrams(r, n)
            matches[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            totals[n - 1] += max(0, len(hyp) - n + 1)

    if hyp_len == 0 or 0 in matches:
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matches, totals)) / MAX_ORDER
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


# -- FKGL --------------------------------------------------------------------


def _word(token):
    core = _NON_ALPHA_EDGES.sub("", token)
    return core.lower() if core.isalpha() else None


def count_syllables(word):
    """Vowel-group syllable estimate; 0 for tokens that are not words."""
    w = _word(word)
    if w is None:
        return 0
    groups = _VOWEL_GROUP.findall(w)
    count = len(groups)
    # a lone final 'e' is taken as silent
    if count > 1 and w.endswith("e") and groups[-1] == "e" and not w.endswith(("ee", "ye")):
        count -= 1
    return max(count, 1)


def fkgl(sentences):
    """Flesch-Kincaid grade level over a list of tokenized sentences."""
    if not sentences:
        raise InvalidArgument("fkgl needs at least one sentence")
    words = syllables = 0
    for s in sentences:
        for tok in s:
            n = count_syllables(tok)
            if n:
                words += 1
                syllables += n
    if words == 0:
        raise InvalidArgument("fkgl needs at least one word")
    return 0.39 * words / len(sentences) + 11.8 * syllables / words - 15.59


# -- SARI --------------------------------------------------------------------


def _ratio(num, den):
    # an empty operation set counts as a perfect score
    return num / den if den else 1.0


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _sari_order(src, out, refs):
    num_refs = len(refs)
    ref_all = Counter()
    for r in refs:
        ref_all += r
    src_rep = Counter({g: c * num_refs for g, c in src.items()})
    out_rep = Counter({g: c * num_refs for g, c in out.items()})

    keep = src_rep & out_rep
    keep_good = keep & ref_all
    keep_all = src_rep & ref_all
    keep_p = _ratio(sum(keep_good[g] / keep[g] for g in keep_good), len(keep))
    keep_r = _ratio(sum(keep_good[g] / keep_all[g] for g in keep_good), len(keep_all))

    deleted = src_rep - out_rep
    del_good = deleted - ref_all
    del_p = _ratio(sum(del_good[g] / deleted[g] for g in del_good), len(deleted))

    added = set(out) - set(src)
    add_good = added & set(ref_all)
    add_all = set(ref_all) - set(src)
    add_p = _ratio(len(add_good), len(added))
    add_r = _ratio(len(add_good), len(add_all))

    return _f1(keep_p, keep_r), del_p, _f1(add_p, add_r)


def sari_sentence(source, output, references):
    """SARI of one sentence on a 0-1 scale."""
    if not references:
        raise InvalidArgument("sari needs at least one reference per sentence")
    total = 0.0
    for n in range(1, MAX_ORDER + 1):
        keep, delete, add = _sari_order(
            ngrams(source, n), ngrams(output, n), [ngrams(r, n) for r in references]
        )
        total += (keep + delete + add) / 3
    return total / MAX_ORDER


def sari(sources, hypotheses, references):
    """Corpus SARI (0-100): mean of sentence scores. ``references[i]`` lists the refs of sentence i."""
    if not (len(sources) == len(hypotheses) == len(references)):
        raise InvalidArgument(
            f"misaligned inputs: {len(sources)} sources, {len(hypotheses)} outputs, "
            f"{len(references)} reference lists"
        )
    if not sources:
        raise InvalidArgument("sari needs at least one sentence")
    scores = [sari_sentence(s, h, r) for s, h, r in zip(sources, hypotheses, references)]
    return 100.0 * math.fsum(scores) / len(scores)


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    system_name: str
    bleu: float
    fkgl: float
    sari: float
    sentence_count: int

    def __post_init__(self):
        if self.sentence_count <= 0:
            raise InvalidArgument("a report needs at least one sentence")

    def to_kv(self):
        return (
            f"system={self.system_name}\n"
            f"bleu={self.bleu:.2f}\nfkgl={self.fkgl:.2f}\nsari={self.sari:.2f}\n"
            f"sentences={self.sentence_count}\n"
        )


def render_table(reports):
    """Plain-text table in the style of the usual BLEU/FKGL/SARI result tables."""
    header = ("System", "BLEU", "FKGL", "SARI")
    rows = [(r.system_name, f"{r.bleu:.2f}", f"{r.fkgl:.2f}", f"{r.sari:.2f}") for r in reports]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(4)]

    def fmt(row):
        return " | ".join(
            cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))
        )

    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(r) for r in rows]) + "\n"


def _read_lines(path):
    with open(path, encoding="utf-8") as f:
        return [tuple(line.split()) for line in f.read().splitlines()]


def _check_aligned(expected, lines, path):
    if len(lines) != expected:
        line = min(len(lines), expected) + 1
        raise InvalidArgument(
            f"{path}: line {line}: file has {len(lines)} lines but {expected} are expected"
        )


def evaluate_sentences(outputs, sources, reference_sets, name="system"):
    refs_per_sentence = [list(rs) for rs in zip(*reference_sets)]
    return EvalReport(
        system_name=name,
        bleu=bleu(outputs, *reference_sets),
        fkgl=fkgl(outputs),
        sari=sari(sources, outputs, refs_per_sentence),
        sentence_count=len(outputs),
    )


def evaluate(outputs_path, sources_path, reference_paths, name="system"):
    """Score a system output file against its sources and one or more reference files."""
    if isinstance(reference_paths, (str, bytes)) or hasattr(reference_paths, "__fspath__"):
        reference_paths = [reference_paths]
    outputs = _read_lines(outputs_path)
    sources = _read_lines(sources_path)
    _check_aligned(len(sources), outputs, outputs_path)
    reference_sets = []
    for path in reference_paths:
        refs = _read_lines(path)
        _check_aligned(len(sources), refs, path)
        reference_sets.append(refs)
    return evaluate_sentences(outputs, sources, reference_sets, name)
