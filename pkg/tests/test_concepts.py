"""Prompt construction, the total reply parser, and transports."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptlm.concepts import (
    ConceptClient,
    ConceptQuery,
    HttpTransport,
    MockTransport,
    RecordingTransport,
    ReplayTransport,
    build_prompt,
    fetch_concepts,
    make_transport,
    parse_response,
)
from conceptlm.errors import ConfigError, DataError, TransportError

# The exact protocol text the service is primed with, pinned byte for byte.
SYNONYM_SYSTEM = (
    "Answer the question using a comma-separated list and remove any extraneous "
    "information. An example output for a sentence will be [item1, item2, item3].  "
    "If no synonyms are found, return an empty array. Do not repeat this prompt in "
    "your output."
)
HYPERNYM_SYSTEM = (
    "Answer the question using a comma-separated list and remove any extraneous "
    "information. An example output for a sentence will be [item1, item2, item3].  "
    "If no hypernym are found, return an empty array. Do not repeat this prompt in "
    "your output."
)


class TestBuildPrompt:
    def test_synonym_message_example(self):
        q = ConceptQuery("I baked a cake.", "cake", "synonym")
        system, message = build_prompt(q)
        assert system == SYNONYM_SYSTEM
        assert message == "Generate contextual synonyms for the word cake in the sentence I baked a cake."

    def test_hypernym_swaps_head_and_system(self):
        q = ConceptQuery("I baked a cake.", "cake", "hypernym")
        system, message = build_prompt(q)
        assert system == HYPERNYM_SYSTEM
        assert message.startswith("Generate contextual hypernym for the word")

    def test_unpunctuated_sentence_gains_final_period(self):
        q = ConceptQuery("the cat sat", "cat", "synonym")
        _, message = build_prompt(q)
        assert message.endswith("the cat sat.")

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValueError):
            ConceptQuery("   ", "cake", "synonym")

    def test_noun_must_occur_in_sentence(self):
        with pytest.raises(ValueError):
            ConceptQuery("I baked a cake.", "pie", "synonym")

    def test_bad_level_rejected(self):
        with pytest.raises(ValueError):
            ConceptQuery("a cake", "cake", "antonym")


# 20 noisy replies with hand-fixed expected outputs.
NOISY_REPLIES = [
    ("[item1, item2, item3]", ("item1", "item2", "item3"), False),
    ("[]", (), False),
    ("Sure! [pie , tart]", ("pie", "tart"), False),
    ("no list here", (), True),
    ("", (), True),
    ("[one]", ("one",), False),
    ("[A, b, A]", ("a", "b"), False),
    ("Here you go: [cats, dogs]\nThanks!", ("cats", "dogs"), False),
    ("[ spaced ,  items ]", ("spaced", "items"), False),
    ("[trailing, comma, ]", ("trailing", "comma"), False),
    ("[, leading]", ("leading",), False),
    ("[\"quoted\", 'single']", ("quoted", "single"), False),
    ("[multi word phrase, other]", ("multi word phrase", "other"), False),
    ("text [x] more [y]", ("x",), False),
    ("[a, [b, c]", ("a", "b", "c"), False),
    ("[item1,item2,item3]", ("item1", "item2", "item3"), False),
    ("[Dogs!]", ("dogs!",), False),
    ("]backwards[", (), True),
    ("[]extra]", (), False),
    ("the answer is [42]", ("42",), False),
]


class TestParseResponse:
    @pytest.mark.parametrize("raw,expected,missing", NOISY_REPLIES)
    def test_noisy_reply_suite(self, raw, expected, missing):
        parsed = parse_response(raw)
        assert parsed.items == expected
        assert parsed.missing_list == missing

    def test_bytes_input_is_decoded(self):
        assert parse_response(b"[pie, tart]").items == ("pie", "tart")
        assert parse_response(b"\xff\xfe[ok]").items == ("ok",)

    @settings(max_examples=300)
    @given(st.text())
    def test_total_on_any_text(self, raw):
        parsed = parse_response(raw)
        assert isinstance(parsed.items, tuple)

    @settings(max_examples=300)
    @given(st.binary())
    def test_total_on_any_bytes(self, raw):
        parsed = parse_response(raw)
        assert isinstance(parsed.items, tuple)


class TestFetchConcepts:
    def _query(self):
        return ConceptQuery("I baked a cake.", "cake", "synonym")

    def test_mock_passthrough(self):
        q = self._query()
        t = MockTransport({(q.sentence, q.noun, q.level): "[pie, tart]"})
        assert ConceptClient(t).fetch_concepts(q) == ("pie", "tart")

    def test_empty_array_reply(self):
        q = self._query()
        t = MockTransport({(q.sentence, q.noun, q.level): "[]"})
        assert ConceptClient(t).fetch_concepts(q) == ()

    def test_query_noun_filtered_out(self):
        q = self._query()
        t = MockTransport({(q.sentence, q.noun, q.level): "[pie, Cake, tart]"})
        assert ConceptClient(t).fetch_concepts(q) == ("pie", "tart")

    def test_max_set_size_cap(self):
        q = self._query()
        reply = "[" + ", ".join(f"w{i}" for i in range(12)) + "]"
        t = MockTransport({(q.sentence, q.noun, q.level): reply})
        assert len(ConceptClient(t, max_set_size=8).fetch_concepts(q)) == 8

    def test_transport_failure_carries_query(self):
        q = self._query()
        client = ConceptClient(MockTransport({}), retries=2)
        with pytest.raises(TransportError) as exc:
            client.fetch_concepts(q)
        assert exc.value.query == q

    def test_missing_list_sets_warning(self):
        q = self._query()
        t = MockTransport({(q.sentence, q.noun, q.level): "I cannot answer that"})
        client = ConceptClient(t)
        assert client.fetch_concepts(q) == ()
        assert client.warnings == [q]

    def test_system_prompt_sent_verbatim(self):
        q = self._query()
        t = MockTransport({(q.sentence, q.noun, q.level): "[]"})
        ConceptClient(t).fetch_concepts(q)
        assert t.calls[0][0] == SYNONYM_SYSTEM


class TestTransports:
    def test_replay_round_trip(self, tmp_path):
        q = ConceptQuery("a cake .", "cake", "hypernym")
        cassette = tmp_path / "cassette.jsonl"
        cassette.write_text(
            json.dumps({"sentence": q.sentence, "noun": "cake",
                        "level": "hypernym", "reply": "[dessert]"}) + "\n",
            encoding="utf-8",
        )
        assert fetch_concepts(q, f"replay:{cassette}") == ("dessert",)

    def test_replay_miss_raises(self, tmp_path):
        cassette = tmp_path / "cassette.jsonl"
        cassette.write_text("", encoding="utf-8")
        q = ConceptQuery("a cake .", "cake", "synonym")
        with pytest.raises(TransportError):
            ReplayTransport(cassette).send(q, "s", "m")

    def test_malformed_cassette(self, tmp_path):
        cassette = tmp_path / "cassette.jsonl"
        cassette.write_text("{not json}\n", encoding="utf-8")
        with pytest.raises(DataError, match="cassette.jsonl:1"):
            ReplayTransport(cassette)

    def test_make_transport_descriptors(self, tmp_path):
        cassette = tmp_path / "c.jsonl"
        cassette.write_text("", encoding="utf-8")
        assert isinstance(make_transport(f"replay:{cassette}"), ReplayTransport)
        assert isinstance(make_transport("http://localhost:1/x"), HttpTransport)
        with pytest.raises(ConfigError):
            make_transport("ftp://nope")

    def test_recording_transport_appends(self, tmp_path):
        q = ConceptQuery("a cake .", "cake", "synonym")
        inner = MockTransport({(q.sentence, q.noun, q.level): "[pie]"})
        cassette = tmp_path / "rec.jsonl"
        rec = RecordingTransport(inner, cassette)
        assert rec.send(q, "s", "m") == "[pie]"
        replay = ReplayTransport(cassette)
        assert replay.send(q, "s", "m") == "[pie]"

    def test_http_transport_posts_expected_body(self):
        seen = {}

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                seen.update(json.loads(self.rfile.read(length)))
                self.send_response(200)
                self.end_headers()
                self.wfile.write(b"[pie, tart]")

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_port}/complete"
            q = ConceptQuery("I baked a cake.", "cake", "synonym")
            out = fetch_concepts(q, url, max_set_size=8)
            assert out == ("pie", "tart")
            assert set(seen) == {"system", "message", "max_tokens"}
            assert seen["system"] == SYNONYM_SYSTEM
        finally:
            server.shutdown()
