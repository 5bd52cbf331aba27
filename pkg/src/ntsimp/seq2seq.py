"""Attention-based GRU encoder-decoder.

The encoder is a bidirectional GRU whose per-position annotations concatenate
the forward and backward states. The decoder is a single GRU fed with
``[embedding(y_prev); context]``; attention scores are additive,
``v . tanh(W s_prev + U h_j)``, and the output distribution is a softmax over
one affine map of ``[s_t; c_t; embedding(y_prev)]``.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import IndexOutOfRange, InvalidArgument, ShapeError
from .textpipe import BOS, EOS

INIT_RANGE = 0.08


@dataclass(frozen=True)
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 32
    attention_dim: int = 32
    dropout_rate: float = 0.0

    def __post_init__(self):
        for f in ("src_vocab_size", "tgt_vocab_size", "embed_dim", "hidden_dim", "attention_dim"):
            if int(getattr(self, f)) < 1:
                raise InvalidArgument(f"{f} must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidArgument("dropout_rate must lie in [0, 1)")

    def with_dropout(self, rate):
        return ModelConfig(
            self.src_vocab_size, self.tgt_vocab_size, self.embed_dim,
            self.hidden_dim, self.attention_dim, rate,
        )


@dataclass
class GruWeights:
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @property
    def input_dim(self):
        return self.W_z.shape[1]

    @property
    def hidden_dim(self):
        return self.U_z.shape[0]


GRU_FIELDS = tuple(f.name for f in fields(GruWeights))


@dataclass
class ModelParams:
    src_embed: Tensor
    tgt_embed: Tensor
    encoder_fwd: GruWeights
    encoder_bwd: GruWeights
    decoder: GruWeights
    attn_W: Tensor
    attn_U: Tensor
    attn_v: Tensor
    bridge: Tensor
    out_proj: Tensor
    out_bias: Tensor

    def named(self):
        """All learnable tensors keyed by a stable dotted name, in a fixed order."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, GruWeights):
                for g in GRU_FIELDS:
                    out[f"{f.name}.{g}"] = getattr(value, g)
            else:
                out[f.name] = value
        return out

    def tensors(self):
        return list(self.named().values())

    def zero_grads(self):
        ad.zero_grads(self.tensors())

    def copy(self):
        return params_from_arrays({k: t.data for k, t in self.named().items()})

    @property
    def config_dims(self):
        return self.src_embed.shape[0], self.tgt_embed.shape[0]


def param_shapes(config):
    """Expected shape of every named parameter for ``config``."""
    e, h, a = config.embed_dim, config.hidden_dim, config.attention_dim
    shapes = {
        "src_embed": (config.src_vocab_size, e),
        "tgt_embed": (config.tgt_vocab_size, e),
    }
    for prefix, in_dim in (("encoder_fwd", e), ("encoder_bwd", e), ("decoder", e + 2 * h)):
        for gate in "zrh":
            shapes[f"{prefix}.W_{gate}"] = (h, in_dim)
            shapes[f"{prefix}.U_{gate}"] = (h, h)
            shapes[f"{prefix}.b_{gate}"] = (h,)
    shapes.update({
        "attn_W": (a, h),
        "attn_U": (a, 2 * h),
        "attn_v": (a,),
        "bridge": (h, h),
        "out_proj": (config.tgt_vocab_size, h + 2 * h + e),
        "out_bias": (config.tgt_vocab_size,),
    })
    # order must follow ModelParams.named()
    order = ["src_embed", "tgt_embed"]
    for prefix in ("encoder_fwd", "encoder_bwd", "decoder"):
        order += [f"{prefix}.{g}" for g in GRU_FIELDS]
    order += ["attn_W", "attn_U", "attn_v", "bridge", "out_proj", "out_bias"]
    return {k: shapes[k] for k in order}


def params_from_arrays(arrays):
    """Build ModelParams from a name -> array mapping (arrays are copied)."""
    def t(name):
        return Tensor(arrays[name], requires_grad=True, name=name)

    def gru(prefix):
        return GruWeights(**{g: t(f"{prefix}.{g}") for g in GRU_FIELDS})

    return ModelParams(
        src_embed=t("src_embed"),
        tgt_embed=t("tgt_embed"),
        encoder_fwd=gru("encoder_fwd"),
        encoder_bwd=gru("encoder_bwd"),
        decoder=gru("decoder"),
        attn_W=t("attn_W"),
        attn_U=t("attn_U"),
        attn_v=t("attn_v"),
        bridge=t("bridge"),
        out_proj=t("out_proj"),
        out_bias=t("out_bias"),
    )


def init_params(config, seed, init_range=INIT_RANGE):
    """Uniform(-init_range, init_range) weights, zero biases."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(config).items():
        if name.rsplit(".", 1)[-1].startswith("b_") or name == "out_bias":
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.uniform(-init_range, init_range, size=shape)
    return params_from_arrays(arrays)


def zero_params(config):
    return params_from_arrays({k: np.zeros(s) for k, s in param_shapes(config).items()})


def check_params(params, config):
    expected = param_shapes(config)
    named = params.named()
    if list(named) != list(expected):
        raise ShapeError("parameter names do not match the model layout")
    for name, shape in expected.items():
        if named[name].shape != shape:
            raise ShapeError(f"{name}: shape {named[name].shape}, expected {shape}")


# -- model pieces ------------------------------------------------------------


def gru_cell(x, h_prev, w):
    """One GRU step; the new state interpolates h_prev and the candidate by the update gate."""
    if x.shape != (w.input_dim,) or h_prev.shape != (w.hidden_dim,):
        raise ShapeError(
            f"gru_cell: got x{x.shape}, h{h_prev.shape}; "
            f"weights expect ({w.input_dim},), ({w.hidden_dim},)"
        )
    z = ad.sigmoid(ad.add_n((ad.matmul(w.W_z, x), ad.matmul(w.U_z, h_prev), w.b_z)))
    r = ad.sigmoid(ad.add_n((ad.matmul(w.W_r, x), ad.matmul(w.U_r, h_prev), w.b_r)))
    cand = ad.tanh(ad.add_n((ad.matmul(w.W_h, x), ad.matmul(w.U_h, ad.mul(r, h_prev)), w.b_h)))
    return ad.add(ad.mul(ad.one_minus(z), h_prev), ad.mul(z, cand))


class Annotations:
    """Encoder output: one ``2*hidden`` vector per source position."""

    def __init__(self, fwd, bwd):
        if len(fwd) != len(bwd) or not fwd:
            raise InvalidArgument("annotations need equal, non-zero numbers of states")
        self.fwd = list(fwd)
        self.bwd = list(bwd)
        self.h = [ad.concat(f, b) for f, b in zip(self.fwd, self.bwd)]
        self.matrix = ad.stack(self.h)
        self._keys = None

    @classmethod
    def from_vectors(cls, vectors):
        """Annotations from raw ``2*hidden`` vectors (split evenly into fwd/bwd halves)."""
        vectors = [v if isinstance(v, Tensor) else Tensor(v) for v in vectors]
        half = vectors[0].shape[0] // 2
        return cls(
            [ad.slice_(v, 0, half) for v in vectors],
            [ad.slice_(v, half, 2 * half) for v in vectors],
        )

    def __len__(self):
        return len(self.h)

    def keys(self, params):
        """``U h_j`` for every position; independent of the decode step, so computed once."""
        if self._keys is None or self._keys[0] is not params.attn_U:
            self._keys = (params.attn_U, ad.matmul(self.matrix, ad.transpose(params.attn_U)))
        return self._keys[1]


def _check_ids(ids, vocab_size, what):
    for i in ids:
        if not 0 <= i < vocab_size:
            raise IndexOutOfRange(f"{what} id {i} outside [0, {vocab_size})")


def encode(src_ids, params, config, training=False, rng=None):
    if len(src_ids) == 0:
        raise InvalidArgument("cannot encode an empty source sentence")
    _check_ids(src_ids, config.src_vocab_size, "source")
    emb = ad.gather_rows(params.src_embed, src_ids)
    emb = ad.dropout(emb, config.dropout_rate, training, rng)
    xs = [ad.row(emb, i) for i in range(len(src_ids))]
    h = config.hidden_dim
    state = Tensor(np.zeros(h))
    fwd = []
    for x in xs:
        state = gru_cell(x, state, params.encoder_fwd)
        fwd.append(state)
    state = Tensor(np.zeros(h))
    bwd = []
    for x in reversed(xs):
        state = gru_cell(x, state, params.encoder_bwd)
        bwd.append(state)
    bwd.reverse()
    return Annotations(fwd, bwd)


def attention(s_prev, ann, params):
    """Context vector and attention weights for decoder state ``s_prev``."""
    n = len(ann)
    query = ad.matmul(params.attn_W, s_prev)
    scores = ad.matmul(ad.tanh(ad.add(ad.tile_rows(query, n), ann.keys(params))), params.attn_v)
    weights = ad.softmax(scores)
    context = ad.matmul(weights, ann.matrix)
    return context, weights


def initial_state(ann, params):
    return ad.tanh(ad.matmul(params.bridge, ann.bwd[0]))


def decode_step(y_prev, s_prev, ann, params, training=False, rng=None, dropout_rate=0.0):
    """One decoder step: returns (probabilities over target vocab, new state, attention weights)."""
    vocab = params.tgt_embed.shape[0]
    if not 0 <= y_prev < vocab:
        raise IndexOutOfRange(f"target id {y_prev} outside [0, {vocab})")
    context, weights = attention(s_prev, ann, params)
    emb = ad.dropout(ad.row(params.tgt_embed, y_prev), dropout_rate, training, rng)
    state = gru_cell(ad.concat(emb, context), s_prev, params.decoder)
    logits = ad.add(ad.matmul(params.out_proj, ad.concat(state, context, emb)), params.out_bias)
    return ad.softmax(logits), state, weights


def forward_loss(pair, params, config, training=False, rng=None):
    """Mean per-token negative log-likelihood of the target under teacher forcing.

    ``pair.tgt_ids`` holds the bare target; BOS/EOS are added here, so the
    average runs over every target token plus the closing EOS.
    """
    src, tgt = list(pair.src_ids), list(pair.tgt_ids)
    if not src or not tgt:
        raise InvalidArgument("both sides of a training pair must be non-empty")
    _check_ids(tgt, config.tgt_vocab_size, "target")
    if training and config.dropout_rate > 0 and not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    ann = encode(src, params, config, training, rng)
    state = initial_state(ann, params)
    gold = [BOS] + tgt + [EOS]
    terms = []
    for t in range(1, len(gold)):
        probs, state, _ = decode_step(
            gold[t - 1], state, ann, params, training, rng, config.dropout_rate
        )
        terms.append(ad.cross_entropy(probs, gold[t]))
    return ad.scale(ad.add_n(terms), 1.0 / len(terms))
