import configparser

import pytest

from ntsimp.cli import RunConfig, main
from ntsimp.errors import ConfigError
from toydata import BijectiveLanguage, write_lines

# Ten raw lines. Kept after tokenize/filter/dedup: 1, 3, 6, 7, 9, 10.
#  2 has 3 tokens, 4 repeats 1, 5 has 9 tokens, 8 has 41 tokens.
PREPROCESS_DOC = "\n".join([
    "The quick brown fox jumps over the lazy dog near the river.",
    "It rains.",
    "Dr. Smith visited the small town on a cold and windy day.",
    "The quick brown fox jumps over the lazy dog near the river.",
    "One two three four five six seven eight.",
    "One two three four five six seven eight nine.",
    "Go" + " go" * 38 + ".",
    "Go" + " go" * 39 + ".",
    "Why would anyone do that to a poor old cat like him?",
    "Mrs. Jones, however, said no; she left (quietly) at noon today.",
]) + "\n"

TINY = ["--embed-dim", "6", "--hidden-dim", "6", "--attention-dim", "6", "--epochs", "2",
        "--learning-rate", "0.1", "--dropout", "0", "--seed", "5"]


@pytest.fixture
def toy(tmp_path):
    lang = BijectiveLanguage(6, seed=0)
    o, s = lang.corpora(8, 1)
    _, mono = lang.corpora(10, 2)
    to, ts = lang.corpora(3, 3)
    files = {}
    for name, corpus in (("train.ord", o), ("train.simp", s), ("mono.simp", mono),
                         ("test.ord", to), ("test.simp", ts)):
        files[name] = str(write_lines(tmp_path / name, corpus))
    return files


def run(*argv):
    return main([str(a) for a in argv])


class TestPreprocess:
    def test_fixture_counts(self, tmp_path, capsys):
        (tmp_path / "doc.txt").write_text(PREPROCESS_DOC)
        assert run("preprocess", "--input", tmp_path / "doc.txt", "--out", tmp_path / "o") == 0
        assert capsys.readouterr().out.strip() == "sentences_in=10 sentences_out=6 vocab_size=63"
        lines = (tmp_path / "o" / "corpus.txt").read_text().splitlines()
        assert [len(line.split()) for line in lines] == [13, 14, 10, 40, 13, 18]
        assert lines[1].startswith("dr . smith")

    def test_defaults_are_ten_and_forty(self):
        cfg = RunConfig.resolve(("global", "textpipe"))
        assert (cfg["textpipe"]["min_len"], cfg["textpipe"]["max_len"]) == (10, 40)

    def test_rerun_identical_and_log_replayable(self, tmp_path):
        (tmp_path / "doc.txt").write_text(PREPROCESS_DOC)
        assert run("preprocess", "--input", tmp_path / "doc.txt", "--out", tmp_path / "a",
                   "--min-len", "3", "--vocab-size", "20") == 0
        log = tmp_path / "a" / "run.log"
        assert run("preprocess", "--input", tmp_path / "doc.txt", "--out", tmp_path / "b",
                   "--config", log) == 0
        for name in ("corpus.txt", "vocab.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert len((tmp_path / "a" / "corpus.txt").read_text().splitlines()) == 8

        parsed = configparser.ConfigParser()
        parsed.read(log)
        assert parsed["textpipe"]["min_len"] == "3"
        assert parsed["textpipe"]["max_len"] == "40"
        assert parsed["global"]["seed"] == "0"

    def test_missing_input(self, tmp_path, capsys):
        assert run("preprocess", "--input", tmp_path / "nope", "--out", tmp_path / "o") == 1
        assert "nope" in capsys.readouterr().err


class TestConfig:
    def test_unknown_key_named(self, tmp_path, capsys):
        (tmp_path / "c.ini").write_text("[train]\nepochz = 3\n")
        (tmp_path / "doc.txt").write_text("x\n")
        code = run("preprocess", "--input", tmp_path / "doc.txt", "--out", tmp_path / "o",
                   "--config", tmp_path / "c.ini")
        assert code == 1
        assert "train.epochz" in capsys.readouterr().err

    def test_unknown_section(self, tmp_path):
        (tmp_path / "c.ini").write_text("[trainer]\nepochs = 3\n")
        with pytest.raises(ConfigError):
            RunConfig.resolve(("train",), tmp_path / "c.ini")

    def test_bad_value_named(self, tmp_path):
        (tmp_path / "c.ini").write_text("[train]\ndropout = 1.5\n")
        with pytest.raises(ConfigError) as err:
            RunConfig.resolve(("train",), tmp_path / "c.ini")
        assert err.value.key == "train.dropout"

    def test_flags_override_file(self, tmp_path):
        (tmp_path / "c.ini").write_text("[train]\nepochs = 3\nshuffle = no\n")
        cfg = RunConfig.resolve(("train",), tmp_path / "c.ini", {("train", "epochs"): "7"})
        assert cfg["train"]["epochs"] == 7 and cfg["train"]["shuffle"] is False

    def test_sample_n_required(self):
        with pytest.raises(ConfigError) as err:
            RunConfig.resolve(("augment",))
        assert err.value.key == "augment.sample_n"


class TestCommands:
    def test_pipeline_with_zero_sample_matches_train(self, tmp_path, toy):
        common = ["--train-ord", toy["train.ord"], "--train-simp", toy["train.simp"],
                  "--simplified", toy["mono.simp"], *TINY]
        assert run("train", "--out", tmp_path / "base", *common) == 0
        assert run("pipeline", "--out", tmp_path / "pipe", "--sample-n", "0", *common) == 0
        base = (tmp_path / "base" / "model.ckpt").read_bytes()
        assert base == (tmp_path / "pipe" / "model.ckpt").read_bytes()
        assert "n_synthetic = 0" in (tmp_path / "pipe" / "manifest.txt").read_text()

    def test_translate_beam_one_equals_greedy(self, tmp_path, toy):
        assert run("train", "--out", tmp_path / "m", "--train-ord", toy["train.ord"],
                   "--train-simp", toy["train.simp"], *TINY) == 0
        common = ["--checkpoint", tmp_path / "m" / "model.ckpt", "--input", toy["test.ord"],
                  "--src-vocab", tmp_path / "m" / "vocab.ord",
                  "--tgt-vocab", tmp_path / "m" / "vocab.simp", "--decode-max-len", "12"]
        assert run("translate", "--out", tmp_path / "beam", "--beam", "1", *common) == 0
        assert run("translate", "--out", tmp_path / "greedy", "--greedy", *common) == 0
        beam = (tmp_path / "beam" / "translations.txt").read_text()
        assert beam == (tmp_path / "greedy" / "translations.txt").read_text()
        assert len(beam.splitlines()) == 3

    def test_translate_vocab_mismatch_fails(self, tmp_path, toy, capsys):
        assert run("train", "--out", tmp_path / "m", "--train-ord", toy["train.ord"],
                   "--train-simp", toy["train.simp"], *TINY) == 0
        code = run("translate", "--out", tmp_path / "t", "--checkpoint", tmp_path / "m" / "model.ckpt",
                   "--input", toy["test.ord"], "--src-vocab", tmp_path / "m" / "vocab.simp",
                   "--tgt-vocab", tmp_path / "m" / "vocab.ord")
        assert code == 1
        assert "vocabulary" in capsys.readouterr().err

    def test_backtranslate(self, tmp_path, toy, capsys):
        assert run("train", "--out", tmp_path / "r", "--direction", "reverse",
                   "--train-ord", toy["train.ord"], "--train-simp", toy["train.simp"],
                   "--simplified", toy["mono.simp"], *TINY) == 0
        args = ["--checkpoint", tmp_path / "r" / "model.ckpt", "--simplified", toy["mono.simp"],
                "--src-vocab", tmp_path / "r" / "vocab.simp", "--tgt-vocab", tmp_path / "r" / "vocab.ord"]
        assert run("backtranslate", "--out", tmp_path / "bt", *args) == 1
        assert "augment.sample_n" in capsys.readouterr().err
        assert run("backtranslate", "--out", tmp_path / "bt", "--sample-n", "6", *args) == 0
        manifest = (tmp_path / "bt" / "manifest.txt").read_text()
        n_syn = len((tmp_path / "bt" / "synthetic.ord").read_text().splitlines())
        assert f"n_synthetic = {n_syn}" in manifest
        assert "sample_size = 6" in manifest

    def test_evaluate_identity(self, tmp_path, toy, capsys):
        assert run("evaluate", "--out", tmp_path / "e", "--system", toy["test.simp"],
                   "--sources", toy["test.ord"], "--references", toy["test.simp"],
                   "--name", "oracle") == 0
        out = capsys.readouterr().out
        assert "100.00" in out and "oracle" in out
        kv = (tmp_path / "e" / "report.kv").read_text()
        assert "bleu=100.00" in kv and "sari=100.00" in kv

    def test_pipeline_reproducible_with_report(self, tmp_path, toy):
        args = ["--train-ord", toy["train.ord"], "--train-simp", toy["train.simp"],
                "--simplified", toy["mono.simp"], "--test-ord", toy["test.ord"],
                "--test-simp", toy["test.simp"], "--sample-n", "4", "--beam", "2",
                "--decode-max-len", "10", *TINY]
        assert run("pipeline", "--out", tmp_path / "a", *args) == 0
        assert run("pipeline", "--out", tmp_path / "b", *args) == 0
        for name in ("model.ckpt", "reverse.ckpt", "manifest.txt", "test.out", "report.kv",
                     "report.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        log = (tmp_path / "a" / "run.log").read_text()
        assert log.startswith("# command: ntsimp pipeline")
        assert "derived seed train=" in log

    def test_pipeline_needs_both_test_files(self, tmp_path, toy):
        assert run("pipeline", "--out", tmp_path / "p", "--train-ord", toy["train.ord"],
                   "--train-simp", toy["train.simp"], "--simplified", toy["mono.simp"],
                   "--sample-n", "1", "--test-ord", toy["test.ord"]) == 1

    def test_argparse_errors_exit_nonzero(self):
        with pytest.raises(SystemExit) as err:
            main(["translate", "--out", "x"])
        assert err.value.code != 0
