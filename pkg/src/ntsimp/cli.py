"""Command-line entry point: ``ntsimp <command> [--config FILE] [flags]``.

Settings come from a sectioned key-value config file; command-line flags
override it. Every command writes ``run.log`` in its output directory with the
command line, the fully resolved configuration and the derived seeds, so a run
can be repeated from the log alone.
"""

import argparse
import configparser
import logging
import os
import shlex
import sys

from . import textpipe
from .augment import (
    AugmentManifest,
    PipelineConfig,
    backtranslate,
    derive_seed,
    load_or_build_vocabs,
    make_pairs,
    run_pipeline,
    train_reverse,
    write_dataset,
)
from .decoder import DecodeConfig, decode_corpus
from .errors import ConfigError, NtsError
from .evalmetrics import evaluate, render_table
from .seq2seq import ModelConfig
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train

log = logging.getLogger("ntsimp")


def _positive(v):
    return v >= 1


def _non_negative(v):
    return v >= 0


# section -> key -> (type, default, validator, flag)
SCHEMA = {
    "global": {
        "seed": (int, 0, None, "--seed"),
    },
    "textpipe": {
        "min_len": (int, 10, _non_negative, "--min-len"),
        "max_len": (int, 40, _non_negative, "--max-len"),
        "vocab_size": (int, 50000, lambda v: v >= 5, "--vocab-size"),
    },
    "model": {
        "embed_dim": (int, 32, _positive, "--embed-dim"),
        "hidden_dim": (int, 32, _positive, "--hidden-dim"),
        "attention_dim": (int, 32, _positive, "--attention-dim"),
    },
    "train": {
        "epochs": (int, 10, _non_negative, "--epochs"),
        "learning_rate": (float, 1.0, _non_negative, "--learning-rate"),
        "lr_decay": (float, 0.5, lambda v: 0 < v <= 1, "--lr-decay"),
        "decay_start_epoch": (int, 8, _non_negative, "--decay-start-epoch"),
        "clip_norm": (float, 5.0, lambda v: v > 0, "--clip-norm"),
        "dropout": (float, 0.3, lambda v: 0 <= v < 1, "--dropout"),
        "shuffle": (bool, True, None, "--shuffle"),
    },
    "decode": {
        "beam_size": (int, 5, _positive, "--beam-size"),
        "max_len": (int, 50, _positive, "--decode-max-len"),
        "length_norm": (bool, True, None, "--length-norm"),
        "greedy": (bool, False, None, "--greedy"),
        "unk_replace": (bool, True, None, "--unk-replace"),
    },
    "augment": {
        "sample_n": (int, None, _non_negative, "--sample-n"),
    },
    "eval": {
        "system_name": (str, "system", None, "--system-name"),
    },
}

COMMAND_SECTIONS = {
    "preprocess": ("global", "textpipe"),
    "train": ("global", "textpipe", "model", "train"),
    "translate": ("global", "decode"),
    "backtranslate": ("global", "decode", "augment"),
    "evaluate": ("global", "eval"),
    "pipeline": ("global", "textpipe", "model", "train", "decode", "augment", "eval"),
}

_BOOLEANS = {"1": True, "yes": True, "true": True, "on": True,
             "0": False, "no": False, "false": False, "off": False}


def _convert(section, key, raw):
    typ, _, check, _ = SCHEMA[section][key]
    name = f"{section}.{key}"
    if typ is bool and not isinstance(raw, bool):
        value = _BOOLEANS.get(str(raw).strip().lower())
        if value is None:
            raise ConfigError(name, f"expected a boolean, got {raw!r}")
    else:
        try:
            value = typ(raw)
        except (TypeError, ValueError):
            raise ConfigError(name, f"expected {typ.__name__}, got {raw!r}") from None
    if check is not None and not check(value):
        raise ConfigError(name, f"value {value!r} is out of range")
    return value


class RunConfig:
    """Resolved, validated settings: ``cfg['train']['epochs']``."""

    def __init__(self, values):
        self.values = values

    def __getitem__(self, section):
        return self.values[section]

    @classmethod
    def resolve(cls, sections, config_path=None, overrides=None):
        values = {s: {k: spec[1] for k, spec in SCHEMA[s].items()} for s in sections}
        if config_path:
            parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
            try:
                with open(config_path, encoding="utf-8") as f:
                    parser.read_file(f)
            except configparser.Error as exc:
                raise ConfigError(str(config_path), f"unparseable config: {exc}") from exc
            for section in parser.sections():
                if section not in SCHEMA:
                    raise ConfigError(section, "unknown config section")
                for key, raw in parser.items(section):
                    if key not in SCHEMA[section]:
                        raise ConfigError(f"{section}.{key}", "unknown config key")
                    if section in values:
                        values[section][key] = _convert(section, key, raw)
        for (section, key), raw in (overrides or {}).items():
            if section in values and raw is not None:
                values[section][key] = _convert(section, key, raw)
        for section, keys in values.items():
            for key, value in keys.items():
                if value is None:
                    raise ConfigError(f"{section}.{key}", "a value is required")
        if "textpipe" in values and values["textpipe"]["min_len"] > values["textpipe"]["max_len"]:
            raise ConfigError("textpipe.min_len", "min_len exceeds max_len")
        return cls(values)

    def to_ini(self):
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for key, value in keys.items():
                lines.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
            lines.append("")
        return "\n".join(lines)

    def model_config(self, src_vocab_size, tgt_vocab_size):
        m = self["model"]
        return ModelConfig(src_vocab_size, tgt_vocab_size, m["embed_dim"], m["hidden_dim"],
                           m["attention_dim"])

    def train_config(self, seed):
        return TrainConfig(seed=seed, **self["train"])

    def decode_config(self):
        d = self["decode"]
        return DecodeConfig(beam_size=d["beam_size"], max_len=d["max_len"],
                            length_norm=d["length_norm"])


# -- commands ----------------------------------------------------------------


def cmd_preprocess(args, cfg, out):
    with open(args.input, encoding="utf-8") as f:
        text = f.read()
    tp = cfg["textpipe"]
    corpus, n_in = textpipe.preprocess_text(text, tp["min_len"], tp["max_len"], args.side)
    vocab = textpipe.build_vocab(corpus, tp["vocab_size"])
    textpipe.write_corpus(corpus, os.path.join(out, "corpus.txt"))
    vocab.save(os.path.join(out, "vocab.txt"))
    print(f"sentences_in={n_in} sentences_out={len(corpus)} vocab_size={len(vocab)}")


def cmd_train(args, cfg, out):
    ordinary, simplified = textpipe.read_parallel(args.train_ord, args.train_simp)
    mono = textpipe.read_corpus(args.simplified) if args.simplified else textpipe.Corpus(())
    size = cfg["textpipe"]["vocab_size"]
    ord_vocab, simp_vocab = load_or_build_vocabs(
        ordinary, (simplified, mono),
        PipelineConfig(sample_n=0, src_vocab_size=size, tgt_vocab_size=size),
        args.src_vocab, args.tgt_vocab,
    )
    ord_vocab.save(os.path.join(out, "vocab.ord"))
    simp_vocab.save(os.path.join(out, "vocab.simp"))
    pairs = make_pairs(ordinary, simplified, ord_vocab, simp_vocab)
    model_config = cfg.model_config(len(ord_vocab), len(simp_vocab))
    if args.direction == "reverse":
        seed = derive_seed(cfg["global"]["seed"], "reverse")
        log.info("derived seed reverse=%d", seed)
        ckpt = train_reverse(pairs, cfg.train_config(seed), model_config, ord_vocab, simp_vocab)
    else:
        seed = derive_seed(cfg["global"]["seed"], "train")
        log.info("derived seed train=%d", seed)
        ckpt = train(pairs, cfg.train_config(seed), model_config, ord_vocab, simp_vocab)
    save_checkpoint(ckpt, os.path.join(out, "model.ckpt"))
    print(f"pairs={len(pairs)} final_loss={ckpt.final_loss:.6f}")


def cmd_translate(args, cfg, out):
    ckpt = load_checkpoint(args.checkpoint)
    src_vocab = textpipe.Vocabulary.load(args.src_vocab)
    tgt_vocab = textpipe.Vocabulary.load(args.tgt_vocab)
    d = cfg["decode"]
    n = decode_corpus(args.input, ckpt, src_vocab, tgt_vocab, cfg.decode_config(),
                      os.path.join(out, "translations.txt"), d["greedy"], d["unk_replace"])
    print(f"sentences={n}")


def cmd_backtranslate(args, cfg, out):
    ckpt = load_checkpoint(args.checkpoint)
    simp_vocab = textpipe.Vocabulary.load(args.src_vocab)
    ord_vocab = textpipe.Vocabulary.load(args.tgt_vocab)
    mono = textpipe.read_corpus(args.simplified)
    sample_seed = derive_seed(cfg["global"]["seed"], "sample")
    log.info("derived seed sample=%d", sample_seed)
    n = cfg["augment"]["sample_n"]
    pairs, dropped = backtranslate(mono, ckpt, n, sample_seed, simp_vocab, ord_vocab,
                                   cfg["decode"]["max_len"])
    write_dataset(pairs, os.path.join(out, "synthetic"), ord_vocab, simp_vocab)
    AugmentManifest(n, sample_seed, derive_seed(cfg["global"]["seed"], "shuffle"),
                    ckpt.digest(), 0, len(pairs), dropped).save(os.path.join(out, "manifest.txt"))
    print(f"sampled={n} synthetic={len(pairs)} dropped={dropped}")


def cmd_evaluate(args, cfg, out):
    report = evaluate(args.system, args.sources, args.references, cfg["eval"]["system_name"])
    table = render_table([report])
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(table)
    with open(os.path.join(out, "report.kv"), "w", encoding="utf-8", newline="\n") as f:
        f.write(report.to_kv())
    print(table, end="")


def cmd_pipeline(args, cfg, out):
    seed = cfg["global"]["seed"]
    for stage in ("reverse", "sample", "shuffle", "train"):
        log.info("derived seed %s=%d", stage, derive_seed(seed, stage))
    size = cfg["textpipe"]["vocab_size"]
    m, d = cfg["model"], cfg["decode"]
    config = PipelineConfig(
        sample_n=cfg["augment"]["sample_n"], seed=seed,
        src_vocab_size=size, tgt_vocab_size=size,
        embed_dim=m["embed_dim"], hidden_dim=m["hidden_dim"], attention_dim=m["attention_dim"],
        train=cfg.train_config(0), decode=cfg.decode_config(),
        greedy=d["greedy"], unk_replace=d["unk_replace"],
    )
    test = (args.test_ord, args.test_simp) if args.test_ord else None
    result = run_pipeline((args.train_ord, args.train_simp), args.simplified, config, out,
                          test=test, references=args.references,
                          src_vocab_path=args.src_vocab, tgt_vocab_path=args.tgt_vocab)
    log.info("manifest created %s", result.manifest.created)
    m = result.manifest
    print(f"original={m.n_original} synthetic={m.n_synthetic} dropped={m.n_dropped}")
    if result.report is not None:
        print(render_table([result.report]), end="")


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "translate": cmd_translate,
    "backtranslate": cmd_backtranslate,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


# -- argument parsing ----------------------------------------------------------


def _add_config_flags(parser, sections):
    group = parser.add_argument_group("configuration overrides")
    for section in sections:
        for key, (typ, _, _, flag) in SCHEMA[section].items():
            dest = f"cfg__{section}__{key}"
            names = [flag]
            if flag == "--beam-size":
                names.append("--beam")
            if flag == "--system-name":
                names.append("--name")
            if typ is bool:
                group.add_argument(*names, dest=dest, action=argparse.BooleanOptionalAction,
                                   default=None, help=f"{section}.{key}")
            else:
                group.add_argument(*names, dest=dest, type=str, default=None,
                                   help=f"{section}.{key}")


def build_parser():
    parser = argparse.ArgumentParser(prog="ntsimp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="sectioned key-value config file")
        p.add_argument("--out", required=True, help="output directory")
        _add_config_flags(p, COMMAND_SECTIONS[name])
        return p

    p = command("preprocess", "split, tokenize, filter and deduplicate a raw document")
    p.add_argument("--input", required=True)
    p.add_argument("--side", choices=(textpipe.ORDINARY, textpipe.SIMPLIFIED),
                   default=textpipe.SIMPLIFIED)

    p = command("train", "train a model on parallel data (the baseline system)")
    p.add_argument("--train-ord", required=True)
    p.add_argument("--train-simp", required=True)
    p.add_argument("--simplified", help="extra simplified text for the target vocabulary")
    p.add_argument("--src-vocab")
    p.add_argument("--tgt-vocab")
    p.add_argument("--direction", choices=("forward", "reverse"), default="forward")

    p = command("translate", "decode a tokenized file with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--src-vocab", required=True)
    p.add_argument("--tgt-vocab", required=True)

    p = command("backtranslate", "back-translate a sample of simplified sentences")
    p.add_argument("--checkpoint", required=True, help="reverse (simplified->ordinary) model")
    p.add_argument("--simplified", required=True)
    p.add_argument("--src-vocab", required=True, help="simplified-side vocabulary")
    p.add_argument("--tgt-vocab", required=True, help="ordinary-side vocabulary")

    p = command("evaluate", "score system output with BLEU, FKGL and SARI")
    p.add_argument("--system", required=True)
    p.add_argument("--sources", required=True)
    p.add_argument("--references", required=True, nargs="+")

    p = command("pipeline", "reverse model, back-translation, mixing and forward training")
    p.add_argument("--train-ord", required=True)
    p.add_argument("--train-simp", required=True)
    p.add_argument("--simplified", required=True)
    p.add_argument("--test-ord")
    p.add_argument("--test-simp")
    p.add_argument("--references", nargs="+")
    p.add_argument("--src-vocab")
    p.add_argument("--tgt-vocab")
    return parser


def _overrides(args):
    out = {}
    for dest, value in vars(args).items():
        if dest.startswith("cfg__"):
            _, section, key = dest.split("__")
            out[(section, key)] = value
    return out


def _attach_run_log(path):
    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("# %(levelname)s %(name)s: %(message)s"))
    logging.getLogger("ntsimp").addHandler(handler)
    return handler


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    root = logging.getLogger("ntsimp")
    root.setLevel(logging.INFO)
    handler = None
    try:
        if args.command == "pipeline" and bool(args.test_ord) != bool(args.test_simp):
            raise ConfigError("--test-ord/--test-simp", "give both or neither")
        cfg = RunConfig.resolve(COMMAND_SECTIONS[args.command], args.config, _overrides(args))
        os.makedirs(args.out, exist_ok=True)
        log_path = os.path.join(args.out, "run.log")
        with open(log_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# command: ntsimp {shlex.join(argv)}\n")
            f.write("# resolved configuration (usable as --config)\n")
            f.write(cfg.to_ini())
            f.write("\n")
        handler = _attach_run_log(log_path)
        COMMANDS[args.command](args, cfg, args.out)
    except (NtsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if handler is not None:
            root.removeHandler(handler)
            handler.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
