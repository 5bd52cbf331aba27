"""Greedy and beam-search inference, attention-based UNK replacement, corpus decoding."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .seq2seq import decode_step, encode, initial_state, params_from_arrays
from .textpipe import BOS, EOS, PAD, UNK, numericalize

BANNED = (PAD, BOS)


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 5
    max_len: int = 50
    length_norm: bool = True

    def __post_init__(self):
        if self.beam_size < 1:
            raise InvalidArgument("beam_size must be >= 1")
        if self.max_len < 1:
            raise InvalidArgument("max_len must be >= 1")


@dataclass
class Hypothesis:
    ids: tuple = ()
    log_prob: float = 0.0
    state: object = None
    attn_trace: list = field(default_factory=list)
    finished: bool = False

    def score(self, length_norm):
        if length_norm and self.ids:
            return self.log_prob / len(self.ids)
        return self.log_prob

    def output_ids(self):
        """Emitted ids without the closing EOS."""
        return self.ids[:-1] if self.finished else self.ids


def _ranked(hyps, length_norm):
    return sorted(hyps, key=lambda h: (-h.score(length_norm), h.ids))


def beam_search(step, init_state, beam_size, max_len, length_norm=True, start=BOS, eos=EOS,
                banned=BANNED, top_k=1):
    """Beam search over an abstract step function.

    ``step(y_prev, state)`` returns ``(log_probs, new_state, attention)``.
    Finished hypotheses leave the beam, which shrinks by one slot for each.
    Returns the ``top_k`` best completed hypotheses, best first.
    """
    live = [Hypothesis((), 0.0, init_state, [], False)]
    completed = []
    for t in range(max_len):
        width = beam_size - len(completed)
        if width <= 0 or not live:
            break
        candidates = []
        for hyp in live:
            y_prev = hyp.ids[-1] if hyp.ids else start
            logp, new_state, attn = step(y_prev, hyp.state)
            logp = np.array(logp, dtype=np.float64)
            logp[list(banned)] = -np.inf
            # only a hypothesis' own top `width` continuations can survive the global cut
            best = np.argsort(-logp, kind="stable")[:width]
            for k in best:
                if logp[k] == -np.inf:
                    continue
                candidates.append(
                    (hyp.log_prob + float(logp[k]), hyp.ids + (int(k),), hyp, new_state, attn)
                )
        candidates.sort(key=lambda c: (-c[0], c[1]))
        live = []
        for score, ids, parent, new_state, attn in candidates[:width]:
            hyp = Hypothesis(ids, score, new_state, parent.attn_trace + [attn], ids[-1] == eos)
            if hyp.finished or len(ids) == max_len:
                completed.append(hyp)
            else:
                live.append(hyp)
    if not completed:
        completed = live
    return _ranked(completed, length_norm)[:top_k]


def greedy_search(step, init_state, max_len, start=BOS, eos=EOS, banned=BANNED):
    """Argmax decoding (ties go to the lowest id) until EOS or ``max_len`` tokens."""
    hyp = Hypothesis((), 0.0, init_state, [], False)
    y_prev = start
    for _ in range(max_len):
        logp, state, attn = step(y_prev, hyp.state)
        logp = np.array(logp, dtype=np.float64)
        logp[list(banned)] = -np.inf
        k = int(np.argmax(logp))
        hyp = Hypothesis(hyp.ids + (k,), hyp.log_prob + float(logp[k]), state,
                         hyp.attn_trace + [attn], k == eos)
        if hyp.finished:
            break
        y_prev = k
    return hyp


def _frozen(params):
    # decoding never needs gradients; constant tensors skip graph bookkeeping
    if not params.src_embed.requires_grad:
        return params
    frozen = params_from_arrays({k: t.data for k, t in params.named().items()})
    for t in frozen.tensors():
        t.requires_grad = False
    return frozen


def model_step(src_ids, params, model_config):
    """Encode ``src_ids`` and return ``(step, s_0)`` for the search routines."""
    params = _frozen(params)
    ann = encode(list(src_ids), params, model_config, training=False)

    def step(y_prev, state):
        probs, new_state, attn = decode_step(y_prev, state, ann, params)
        with np.errstate(divide="ignore"):
            return np.log(probs.data), new_state, attn.data

    return step, initial_state(ann, params)


def greedy_decode(src_ids, params, model_config, config=DecodeConfig()):
    if len(src_ids) == 0:
        raise InvalidArgument("cannot decode an empty source sentence")
    step, s0 = model_step(src_ids, params, model_config)
    return greedy_search(step, s0, config.max_len)


def beam_decode(src_ids, params, model_config, config=DecodeConfig(), top_k=1):
    """Best hypothesis, or the ``top_k`` best as a list when ``top_k > 1``."""
    if len(src_ids) == 0:
        raise InvalidArgument("cannot decode an empty source sentence")
    step, s0 = model_step(src_ids, params, model_config)
    found = beam_search(step, s0, config.beam_size, config.max_len, config.length_norm,
                        top_k=top_k)
    return found if top_k > 1 else found[0]


def replace_unk(hyp, src_tokens, tgt_vocab):
    """Target tokens of ``hyp``; each UNK becomes the source token it attended to most."""
    out = []
    for pos, i in enumerate(hyp.output_ids()):
        if i == UNK and src_tokens:
            weights = np.asarray(hyp.attn_trace[pos])[: len(src_tokens)]
            out.append(src_tokens[int(np.argmax(weights))])
        else:
            out.append(tgt_vocab.token_of[i])
    return tuple(out)


def hypothesis_tokens(hyp, tgt_vocab, src_tokens=None, unk_replace=True):
    if unk_replace and src_tokens is not None:
        return replace_unk(hyp, src_tokens, tgt_vocab)
    return tuple(tgt_vocab.token_of[i] for i in hyp.output_ids())


def translate_sentence(tokens, params, model_config, src_vocab, tgt_vocab,
                       config=DecodeConfig(), greedy=False, unk_replace=True):
    tokens = tuple(tokens)
    if not tokens:
        return ()
    src_ids = numericalize(tokens, src_vocab)
    if greedy:
        hyp = greedy_decode(src_ids, params, model_config, config)
    else:
        hyp = beam_decode(src_ids, params, model_config, config)
    return hypothesis_tokens(hyp, tgt_vocab, tokens, unk_replace)


def decode_corpus(src_path, checkpoint, src_vocab, tgt_vocab, config, out_path,
                  greedy=False, unk_replace=True):
    """Decode ``src_path`` line by line into ``out_path``; blank lines stay blank."""
    checkpoint.check_vocab(src_vocab, tgt_vocab)
    params = _frozen(checkpoint.params())
    cfg = checkpoint.model_config.with_dropout(0.0)
    with open(src_path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    outputs = [
        " ".join(translate_sentence(line.split(), params, cfg, src_vocab, tgt_vocab,
                                    config, greedy, unk_replace))
        for line in lines
    ]
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(o + "\n" for o in outputs)
    return len(outputs)
