"""SGD training loop and the binary checkpoint format."""

import hashlib
import logging
import math
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .errors import (
    CorruptCheckpoint,
    InvalidArgument,
    TrainingDiverged,
    UnsupportedVersion,
    VocabMismatch,
)
from .seq2seq import ModelConfig, check_params, forward_loss, init_params, params_from_arrays

log = logging.getLogger(__name__)

MAGIC = b"NTSCKPT1"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 1.0
    lr_decay: float = 0.5
    decay_start_epoch: int = 8
    clip_norm: float = 5.0
    dropout: float = 0.3
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgument("epochs must be >= 0")
        if self.learning_rate < 0:
            raise InvalidArgument("learning_rate must be >= 0")
        if not 0.0 < self.lr_decay <= 1.0:
            raise InvalidArgument("lr_decay must lie in (0, 1]")
        if self.clip_norm <= 0:
            raise InvalidArgument("clip_norm must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgument("dropout must lie in [0, 1)")


@dataclass
class Checkpoint:
    model_config: ModelConfig
    tensors: dict
    src_vocab_hash: str = ""
    tgt_vocab_hash: str = ""
    epoch: int = 0
    final_loss: float = float("nan")
    seed: int = 0
    loss_history: list = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    def params(self):
        params = params_from_arrays(self.tensors)
        check_params(params, self.model_config)
        return params

    def check_vocab(self, src_vocab, tgt_vocab):
        """Raise VocabMismatch unless both vocabularies are the ones this model was trained with."""
        for side, vocab, expected_hash, expected_size in (
            ("source", src_vocab, self.src_vocab_hash, self.model_config.src_vocab_size),
            ("target", tgt_vocab, self.tgt_vocab_hash, self.model_config.tgt_vocab_size),
        ):
            if len(vocab) != expected_size or vocab.fingerprint() != expected_hash:
                raise VocabMismatch(
                    f"{side} vocabulary (size {len(vocab)}) does not match the checkpoint "
                    f"(size {expected_size})"
                )

    def to_bytes(self):
        return checkpoint_bytes(self)

    def digest(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()


def clip_gradients(tensors, clip_norm):
    """Rescale gradients in place so their global L2 norm is at most ``clip_norm``.

    Returns the scale factor that was applied.
    """
    grads = [t.grad for t in tensors if t.grad is not None]
    norm = math.sqrt(sum(float(np.dot(g.ravel(), g.ravel())) for g in grads))
    if norm <= clip_norm:
        return 1.0
    factor = clip_norm / norm
    for g in grads:
        g *= factor
    return factor


def train(pairs, config, model_config, src_vocab=None, tgt_vocab=None, params=None,
          on_epoch=None):
    """Train with per-pair SGD updates and return a checkpoint of the final parameters.

    ``on_epoch(epoch, mean_loss, lr)`` is called after every epoch.
    """
    pairs = list(pairs)
    if not pairs:
        raise InvalidArgument("training needs at least one pair")
    model_config = model_config.with_dropout(config.dropout)
    if params is None:
        params = init_params(model_config, config.seed)
    check_params(params, model_config)
    tensors = params.tensors()
    order_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    training = config.dropout > 0

    lr = config.learning_rate
    history = []
    for epoch in range(1, config.epochs + 1):
        order = order_rng.permutation(len(pairs)) if config.shuffle else range(len(pairs))
        total, tokens = 0.0, 0
        for idx in order:
            pair = pairs[idx]
            loss = forward_loss(pair, params, model_config, training, dropout_rng)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(epoch, int(idx), value)
            ad.backward(loss)
            clip_gradients(tensors, config.clip_norm)
            for t in tensors:
                if t.grad is not None:
                    t.data -= lr * t.grad
                t.grad = None
            n_tok = len(pair.tgt_ids) + 1
            total += value * n_tok
            tokens += n_tok
        mean = total / tokens
        history.append(mean)
        log.info("epoch %d  lr %.6g  mean per-token loss %.6f", epoch, lr, mean)
        if on_epoch is not None:
            on_epoch(epoch, mean, lr)
        if epoch >= config.decay_start_epoch:
            lr *= config.lr_decay

    return Checkpoint(
        model_config=model_config,
        tensors={k: t.data.copy() for k, t in params.named().items()},
        src_vocab_hash=src_vocab.fingerprint() if src_vocab is not None else "",
        tgt_vocab_hash=tgt_vocab.fingerprint() if tgt_vocab is not None else "",
        epoch=config.epochs,
        final_loss=history[-1] if history else float("nan"),
        seed=config.seed,
        loss_history=history,
    )


def evaluate_loss(pairs, params, model_config):
    """Mean per-token loss over ``pairs`` with dropout off."""
    model_config = model_config.with_dropout(0.0)
    total, tokens = 0.0, 0
    for pair in pairs:
        n_tok = len(pair.tgt_ids) + 1
        total += float(forward_loss(pair, params, model_config).data) * n_tok
        tokens += n_tok
    return total / tokens


# -- serialization -------------------------------------------------------------


def _metadata(ckpt):
    meta = {f"model.{k}": repr(v) for k, v in asdict(ckpt.model_config).items()}
    meta.update({
        "src_vocab_size": str(ckpt.model_config.src_vocab_size),
        "tgt_vocab_size": str(ckpt.model_config.tgt_vocab_size),
        "src_vocab_hash": ckpt.src_vocab_hash,
        "tgt_vocab_hash": ckpt.tgt_vocab_hash,
        "epoch": str(ckpt.epoch),
        "final_loss": repr(float(ckpt.final_loss)),
        "seed": str(ckpt.seed),
        "loss_history": ",".join(repr(float(x)) for x in ckpt.loss_history),
    })
    return meta


def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def checkpoint_bytes(ckpt):
    out = [MAGIC, struct.pack("<I", ckpt.format_version)]
    meta = _metadata(ckpt)
    out.append(struct.pack("<I", len(meta)))
    for k, v in meta.items():
        out += [_pack_str(k), _pack_str(v)]

    payloads = []
    offset = 0
    out.append(struct.pack("<I", len(ckpt.tensors)))
    for name, arr in ckpt.tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        out += [_pack_str(name), struct.pack("<I", arr.ndim)]
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(struct.pack("<Q", offset))
        payloads.append(data)
        offset += len(data)
    return b"".join(out + payloads)


def save_checkpoint(ckpt, path):
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(ckpt))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CorruptCheckpoint("checkpoint is truncated")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptCheckpoint("invalid UTF-8 in checkpoint") from exc


def checkpoint_from_bytes(buf):
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpoint("bad magic bytes; not a checkpoint file")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"checkpoint version {version}, expected {FORMAT_VERSION}")
    (n_meta,) = r.unpack("<I")
    meta = {}
    for _ in range(n_meta):
        k = r.string()
        meta[k] = r.string()

    (n_tensors,) = r.unpack("<I")
    directory = []
    for _ in range(n_tensors):
        name = r.string()
        (rank,) = r.unpack("<I")
        dims = r.unpack(f"<{rank}Q")
        (offset,) = r.unpack("<Q")
        directory.append((name, dims, offset))
    payload = buf[r.pos:]
    expected = sum(4 * int(np.prod(d, dtype=np.int64)) for _, d, _ in directory)
    if len(payload) != expected:
        raise CorruptCheckpoint(f"payload is {len(payload)} bytes, directory implies {expected}")
    tensors = {}
    for name, dims, offset in directory:
        n = int(np.prod(dims, dtype=np.int64))
        if offset + 4 * n > len(payload):
            raise CorruptCheckpoint(f"tensor {name} extends past end of payload")
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        tensors[name] = arr.astype(np.float64).reshape(dims)

    try:
        cfg_kwargs = {}
        for f in fields(ModelConfig):
            raw = meta[f"model.{f.name}"]
            cfg_kwargs[f.name] = float(raw) if f.type in (float, "float") else int(raw)
        history = meta.get("loss_history", "")
        return Checkpoint(
            model_config=ModelConfig(**cfg_kwargs),
            tensors=tensors,
            src_vocab_hash=meta["src_vocab_hash"],
            tgt_vocab_hash=meta["tgt_vocab_hash"],
            epoch=int(meta["epoch"]),
            final_loss=float(meta["final_loss"]),
            seed=int(meta["seed"]),
            loss_history=[float(x) for x in history.split(",")] if history else [],
            format_version=version,
        )
    except (KeyError, ValueError) as exc:
        raise CorruptCheckpoint(f"incomplete checkpoint metadata: {exc}") from exc


def load_checkpoint(path):
    with open(path, "rb") as f:
        return checkpoint_from_bytes(f.read())
