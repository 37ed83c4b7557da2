import pytest

from cslm.config import (
    DEFAULT_SEED,
    SEED_ENV,
    ConfigError,
    RunConfig,
    default_seed,
    parse_value,
)
from cslm.corpus import EOS, UNK, Vocabulary
from cslm.models.rnnlm import RnnConfig


def test_text_round_trip():
    config = RunConfig(
        hidden_size=32,
        factors=("cs",),
        use_word_input=False,
        lr0=0.25,
        smoothing="mle",
        floor=0.1,
        train="data/train.txt",
    )

    assert RunConfig.from_text(config.to_text()) == config


def test_to_text_is_sorted_and_complete():
    lines = RunConfig(seed=5).to_text().splitlines()
    keys = [line.split(" = ")[0] for line in lines]

    assert keys == sorted(keys)
    assert "factors = pos,cs" in lines
    assert "carry_state = false" in lines
    assert "seed = 5" in lines
    assert "train = " in lines


def test_from_text_ignores_comments_and_blank_lines():
    text = "# tuned on the dev set\n\nhidden_size = 64  # larger\nfactors = cs, pos\n"
    config = RunConfig.from_text(text)

    assert config.hidden_size == 64
    assert config.factors == ("pos", "cs")
    assert config.n_classes == 50


def test_from_text_keeps_hash_inside_values():
    text = "train = data/run#2/train.txt\ntest = data/test.txt # held out\n#model = x\n"
    config = RunConfig.from_text(text)

    assert config.train == "data/run#2/train.txt"
    assert config.test == "data/test.txt"
    assert config.model is None
    assert RunConfig.from_text(config.to_text()) == config


@pytest.mark.parametrize(
    "text, message",
    [
        ("hidden = 3", "unknown config key"),
        ("hidden_size 3", "expected key = value"),
        ("hidden_size = 3\nhidden_size = 4", "set twice"),
        ("hidden_size = many", "must be of type int"),
        ("carry_state = yes", "true or false"),
        ("factors = lemma", "Unknown factors"),
        ("smoothing = add-one", "add-one"),
        ("floor = 0.1", "floor only applies"),
        ("k = 1", "k must be at least 2"),
    ],
)
def test_invalid_config(text, message):
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_text(text)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "42")
    assert default_seed() == 42
    assert RunConfig().seed == 42
    assert RunConfig.from_text("seed = 7").seed == 7

    monkeypatch.delenv(SEED_ENV)
    assert RunConfig().seed == DEFAULT_SEED

    monkeypatch.setenv(SEED_ENV, "abc")
    with pytest.raises(ConfigError):
        default_seed()


def test_precedence_of_overrides(tmp_path):
    path = tmp_path / "run.conf"
    RunConfig(hidden_size=64, bptt_steps=3).write(path)
    config = RunConfig.read(path).with_overrides({"bptt_steps": 9})

    assert (config.hidden_size, config.bptt_steps) == (64, 9)
    with pytest.raises(ConfigError):
        config.with_overrides({"learning_rate": 1.0})


def test_rnn_config_view():
    config = RunConfig(hidden_size=16, n_classes=4, factors=("cs",), seed=3)

    assert config.rnn_config() == RnnConfig(
        hidden_size=16, n_classes=4, factors=("cs",), seed=3
    )


def test_check_vocab():
    vocab = Vocabulary([EOS, UNK, "a"], [1, 0, 1])

    RunConfig(n_classes=3).check_vocab(vocab)
    with pytest.raises(ConfigError, match="exceeds the vocabulary size 3"):
        RunConfig(n_classes=4).check_vocab(vocab)


def test_fingerprint_ignores_paths():
    base = RunConfig(seed=1)

    assert base.fingerprint() == RunConfig(seed=1, train="x.txt").fingerprint()
    assert base.fingerprint() != RunConfig(seed=2).fingerprint()
    assert len(base.fingerprint()) == 16


@pytest.mark.parametrize(
    "key, text, value",
    [
        ("hidden_size", "12", 12),
        ("lr0", "0.5", 0.5),
        ("carry_state", "TRUE", True),
        ("factors", "pos, cs", ("pos", "cs")),
        ("factors", "", ()),
        ("train", "", None),
        ("smoothing", "wb", "wb"),
    ],
)
def test_parse_value(key, text, value):
    assert parse_value(key, text) == value
