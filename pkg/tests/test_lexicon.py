"""Lexicon loading, lookup semantics, and the WordNet database importer."""

import pytest

from conceptlm.errors import DataError
from conceptlm.lexicon import (
    Lexicon,
    load_lexicon,
    lookup,
    save_lexicon,
    serialize_lexicon,
)

# A 10-synset noun database in the standard data.noun/index.noun layout.
# Oracle expectations below were read off this sample by eye.
WN_DATA_NOUN = """\
  1 This is a license header line and must be skipped by the parser.
00001001 03 n 01 entity 0 000 | that which exists
00002001 03 n 02 animal 0 creature 0 001 @ 00001001 n 0000 | a living organism
00003001 03 n 02 dog 0 domestic_dog 0 001 @ 00002001 n 0000 | a domesticated canine
00004001 03 n 02 cat 0 true_cat 0 001 @ 00002001 n 0000 | a small feline
00005001 03 n 02 food 0 nutrient 0 001 @ 00001001 n 0000 | something edible
00006001 03 n 03 dessert 0 sweet 0 afters 0 001 @ 00005001 n 0000 | the sweet course
00007001 03 n 01 cake 0 002 @ 00006001 n 0000 @ 00009001 n 0000 | a baked sweet
00008001 03 n 01 pie 0 001 @ 00006001 n 0000 | a filled pastry
00009001 03 n 01 baked_goods 0 001 @ 00005001 n 0000 | foods baked from dough
00010001 03 n 02 dog 1 firedog 0 001 @ 00001001 n 0000 | an andiron
"""

WN_INDEX_NOUN = """\
  1 This is a license header line and must be skipped by the parser.
entity n 1 0 1 0 00001001
animal n 1 1 @ 1 0 00002001
creature n 1 1 @ 1 0 00002001
dog n 2 1 @ 2 1 00003001 00010001
domestic_dog n 1 1 @ 1 0 00003001
cat n 1 1 @ 1 0 00004001
true_cat n 1 1 @ 1 0 00004001
food n 1 1 @ 1 0 00005001
nutrient n 1 1 @ 1 0 00005001
dessert n 1 1 @ 1 0 00006001
sweet n 1 1 @ 1 0 00006001
afters n 1 1 @ 1 0 00006001
cake n 1 1 @ 1 0 00007001
pie n 1 1 @ 1 0 00008001
baked_goods n 1 1 @ 1 0 00009001
firedog n 1 1 @ 1 0 00010001
"""

# Hand-built oracle over the sample: first sense only, synset mates are
# synonyms, members of direct-hypernym synsets are hypernyms.
WN_ORACLE = {
    "entity": ((), ()),
    "animal": (("creature",), ("entity",)),
    "creature": (("animal",), ("entity",)),
    "dog": (("domestic dog",), ("animal", "creature")),  # first sense wins
    "domestic dog": (("dog",), ("animal", "creature")),
    "cat": (("true cat",), ("animal", "creature")),
    "true cat": (("cat",), ("animal", "creature")),
    "food": (("nutrient",), ("entity",)),
    "nutrient": (("food",), ("entity",)),
    "dessert": (("afters", "sweet"), ("food", "nutrient")),
    "sweet": (("afters", "dessert"), ("food", "nutrient")),
    "afters": (("dessert", "sweet"), ("food", "nutrient")),
    "cake": ((), ("afters", "baked goods", "dessert", "sweet")),
    "pie": ((), ("afters", "dessert", "sweet")),
    "baked goods": ((), ("food", "nutrient")),
    "firedog": (("dog",), ("entity",)),
}


@pytest.fixture()
def wordnet_dir(tmp_path):
    (tmp_path / "data.noun").write_text(WN_DATA_NOUN, encoding="utf-8")
    (tmp_path / "index.noun").write_text(WN_INDEX_NOUN, encoding="utf-8")
    return tmp_path


class TestNativeTsv:
    def test_example_line(self, example_lexicon):
        entry = example_lexicon.entries["cake"]
        assert entry.synonyms == ("cookie", "pie")
        assert entry.hypernyms == ("baked goods", "dessert")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("", encoding="utf-8")
        assert len(load_lexicon(path)) == 0

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("cake\tsyn:pie\n", encoding="utf-8")  # missing hyp field
        with pytest.raises(DataError, match=r":1:"):
            load_lexicon(path)

    def test_wrong_prefix_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("cake\tsynonyms:pie\thyp:\n", encoding="utf-8")
        with pytest.raises(DataError, match="syn:"):
            load_lexicon(path)

    def test_unknown_format_tag(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("cake\tsyn:\thyp:\n", encoding="utf-8")
        with pytest.raises(DataError, match="unknown lexicon format"):
            load_lexicon(path, "csv")

    def test_empty_lists_round_trip(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("cake\tsyn:\thyp:\n", encoding="utf-8")
        lex = load_lexicon(path)
        assert lex.entries["cake"].synonyms == ()
        assert serialize_lexicon(lex) == "cake\tsyn:\thyp:\n"

    def test_duplicate_lemma_lines_merge(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text(
            "cake\tsyn:pie\thyp:dessert\ncake\tsyn:cookie\thyp:\n", encoding="utf-8"
        )
        lex = load_lexicon(path)
        assert lex.entries["cake"].synonyms == ("cookie", "pie")

    def test_self_mention_dropped_and_normalized(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("Cake\tsyn:CAKE, Pie \thyp:baked   goods\n", encoding="utf-8")
        lex = load_lexicon(path)
        assert lex.entries["cake"].synonyms == ("pie",)
        assert lex.entries["cake"].hypernyms == ("baked goods",)


class TestLookup:
    def test_synonym_example(self, example_lexicon):
        assert lookup(example_lexicon, "cake", "synonym") == ("cookie", "pie")

    def test_hypernym_example(self, example_lexicon):
        assert lookup(example_lexicon, "cake", "hypernym") == ("baked goods", "dessert")

    def test_unknown_lemma_is_empty(self, example_lexicon):
        assert lookup(example_lexicon, "zzzz_unknown", "synonym") == ()

    def test_query_is_lowercased(self, example_lexicon):
        assert lookup(example_lexicon, "CAKE", "synonym") == ("cookie", "pie")

    def test_bad_level_rejected(self, example_lexicon):
        with pytest.raises(ValueError):
            lookup(example_lexicon, "cake", "meronym")

    def test_self_exclusion_all_lemmas(self, example_lexicon):
        for lemma in example_lexicon.entries:
            for level in ("synonym", "hypernym"):
                assert lemma not in lookup(example_lexicon, lemma, level)


class TestRoundTrip:
    def test_serialize_load_round_trip(self, example_lexicon, tmp_path):
        path = tmp_path / "again.tsv"
        save_lexicon(example_lexicon, path)
        again = load_lexicon(path)
        assert again.entries == example_lexicon.entries

    def test_two_loads_serialize_identically(self, tmp_path, example_lexicon):
        p1, p2 = tmp_path / "a.tsv", tmp_path / "b.tsv"
        save_lexicon(example_lexicon, p1)
        lex1 = load_lexicon(p1)
        save_lexicon(lex1, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestWordnetImport:
    def test_sample_matches_hand_oracle(self, wordnet_dir):
        lex = load_lexicon(wordnet_dir, "wordnet-db")
        assert set(lex.entries) == set(WN_ORACLE)
        for lemma, (syn, hyp) in WN_ORACLE.items():
            assert lex.entries[lemma].synonyms == syn, lemma
            assert lex.entries[lemma].hypernyms == hyp, lemma

    def test_import_is_deterministic(self, wordnet_dir):
        a = serialize_lexicon(load_lexicon(wordnet_dir, "wordnet-db"))
        b = serialize_lexicon(load_lexicon(wordnet_dir, "wordnet-db"))
        assert a == b

    def test_missing_pair_file(self, tmp_path):
        (tmp_path / "data.noun").write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="index.noun"):
            load_lexicon(tmp_path, "wordnet-db")

    def test_malformed_data_line(self, tmp_path):
        (tmp_path / "data.noun").write_text("00000001 03 n ZZ cake\n", encoding="utf-8")
        (tmp_path / "index.noun").write_text("cake n 1 0 1 0 00000001\n", encoding="utf-8")
        with pytest.raises(DataError, match="data.noun:1"):
            load_lexicon(tmp_path, "wordnet-db")


def test_lookup_is_total_on_empty_lexicon():
    assert lookup(Lexicon(), "anything", "synonym") == ()
