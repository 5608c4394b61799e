"""Shared fixtures: the example lexicon, a toy model, and tiny record sets."""

import pytest

from conceptlm import model, tokenizer
from conceptlm.lexicon import load_lexicon
from conceptlm.records import ConceptRecord

EXAMPLE_LEXICON_TSV = (
    "cake\tsyn:pie,cookie\thyp:dessert,baked goods\n"
    "pie\tsyn:cake,cookie\thyp:dessert,baked goods\n"
    "cookie\tsyn:cake,pie\thyp:dessert,baked goods\n"
    "dog\tsyn:hound\thyp:animal\n"
    "hound\tsyn:dog\thyp:animal\n"
)

TOY_CORPUS = [
    "the cat sat on the mat .",
    "a dog ran to the cat .",
]


@pytest.fixture()
def example_lexicon(tmp_path):
    path = tmp_path / "lexicon.tsv"
    path.write_text(EXAMPLE_LEXICON_TSV, encoding="utf-8")
    return load_lexicon(path, "native-tsv")


@pytest.fixture(scope="session")
def toy_vocab():
    return tokenizer.train_vocab(TOY_CORPUS, 20, "word")


@pytest.fixture(scope="session")
def toy_record():
    return ConceptRecord(
        sentence=tuple("the cat sat on the mat .".split()),
        target_span=(1, 2),
        original="cat",
        completions=("cat", "dog", "mat"),
        level="synonym",
        source="context_free",
    )


@pytest.fixture(scope="session")
def toy_cmap(toy_vocab, toy_record):
    return tokenizer.build_completion_map(toy_vocab, [toy_record])


@pytest.fixture(scope="session")
def toy_config(toy_vocab):
    return model.ModelConfig(
        vocab_size=len(toy_vocab), context_len=12, d_model=8,
        n_layers=1, n_heads=2, d_ff=16, seed=3,
    )


@pytest.fixture()
def toy_state(toy_config):
    return model.init(toy_config)
