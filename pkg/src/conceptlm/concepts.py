"""Context-aware concept extraction via an external completion service.

A query names a sentence and one noun inside it; the service is asked for
contextual synonyms or hypernyms and must answer with a bracketed
comma-separated list (``[item1, item2, item3]``, or ``[]`` when it finds
none).  The reply parser is total: any byte string maps to a (possibly
empty) word list plus a flag marking replies that carried no list at all.

Transports are pluggable.  ``ReplayTransport`` serves scripted replies from
a line-delimited cassette keyed on (sentence, noun, level) so the whole
pipeline runs offline and deterministically; ``HttpTransport`` posts a JSON
body ``{"system", "message", "max_tokens"}`` and reads the UTF-8 text reply.
"""

from __future__ import annotations

import json
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataError, TransportError

SYNONYM_SYSTEM_PROMPT = (
    "Answer the question using a comma-separated list and remove any extraneous "
    "information. An example output for a sentence will be [item1, item2, item3].  "
    "If no synonyms are found, return an empty array. Do not repeat this prompt in "
    "your output."
)

HYPERNYM_SYSTEM_PROMPT = (
    "Answer the question using a comma-separated list and remove any extraneous "
    "information. An example output for a sentence will be [item1, item2, item3].  "
    "If no hypernym are found, return an empty array. Do not repeat this prompt in "
    "your output."
)

_MESSAGE_HEAD = {
    "synonym": "Generate contextual synonyms for the word",
    "hypernym": "Generate contextual hypernym for the word",
}


@dataclass(frozen=True)
class ConceptQuery:
    """One extraction request: a sentence, a target noun in it, and a level."""

    sentence: str
    noun: str
    level: str  # "synonym" | "hypernym"

    def __post_init__(self):
        if self.level not in _MESSAGE_HEAD:
            raise ValueError(f"level must be 'synonym' or 'hypernym', got {self.level!r}")
        if not self.sentence.strip():
            raise ValueError("query sentence must be non-empty")
        # Accept attached punctuation ("a cake." carries the token "cake").
        tokens = set(self.sentence.split())
        tokens |= {t.strip(".,;:!?\"'()[]") for t in tokens}
        if self.noun not in tokens:
            raise ValueError(f"noun {self.noun!r} does not occur as a token in the sentence")


def build_prompt(q: ConceptQuery) -> tuple[str, str]:
    """Return (system_text, message_text) for a query.

    The system text is the fixed protocol prompt for the level.  The message
    substitutes the noun and sentence into the request template; a final
    period is added only when the sentence does not already end with
    sentence-final punctuation, so the sentence's own period is not doubled.
    """
    system = SYNONYM_SYSTEM_PROMPT if q.level == "synonym" else HYPERNYM_SYSTEM_PROMPT
    message = f"{_MESSAGE_HEAD[q.level]} {q.noun} in the sentence {q.sentence}"
    if not message.endswith((".", "!", "?")):
        message += "."
    return system, message


@dataclass(frozen=True)
class ParsedReply:
    """Word list recovered from a raw service reply.

    ``missing_list`` is set when the reply contained no bracketed list at
    all (as opposed to an explicit empty ``[]``).
    """

    items: tuple[str, ...]
    missing_list: bool = False


def parse_response(raw: str | bytes) -> ParsedReply:
    """Extract the bracketed comma-separated list from a reply.

    Total on any input: no bracketed list yields an empty result with the
    ``missing_list`` flag set.  Items are trimmed, stripped of stray
    quotes/brackets, lowercased, and deduplicated in order of appearance.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    start = raw.find("[")
    end = raw.find("]", start + 1) if start >= 0 else -1
    if start < 0 or end < 0:
        return ParsedReply((), missing_list=True)
    body = raw[start + 1:end]
    items: list[str] = []
    for part in body.split(","):
        word = part.strip().strip("\"'`[]").strip().lower()
        if word and word not in items:
            items.append(word)
    return ParsedReply(tuple(items))


# --- transports --------------------------------------------------------------


class ReplayTransport:
    """Read-only cassette of scripted replies keyed on (sentence, noun, level).

    Cassette file: one JSON object per line with fields
    ``sentence``, ``noun``, ``level``, ``reply``.
    """

    def __init__(self, cassette_path: str | Path):
        self.path = Path(cassette_path)
        self._replies: dict[tuple[str, str, str], str] = {}
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read cassette {self.path}: {e}") from e
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["sentence"], rec["noun"], rec["level"])
                self._replies[key] = rec["reply"]
            except (KeyError, TypeError, json.JSONDecodeError) as e:
                raise DataError(f"{self.path}:{lineno}: malformed cassette record: {e}") from e

    def send(self, q: ConceptQuery, system: str, message: str) -> str:
        key = (q.sentence, q.noun, q.level)
        if key not in self._replies:
            raise TransportError(f"cassette has no reply for {key!r}", query=q)
        return self._replies[key]


class MockTransport:
    """In-memory scripted replies, for tests."""

    def __init__(self, replies: dict[tuple[str, str, str], str]):
        self._replies = dict(replies)
        self.calls: list[tuple[str, str]] = []

    def send(self, q: ConceptQuery, system: str, message: str) -> str:
        self.calls.append((system, message))
        key = (q.sentence, q.noun, q.level)
        if key not in self._replies:
            raise TransportError(f"no scripted reply for {key!r}", query=q)
        return self._replies[key]


class HttpTransport:
    """POST the prompt to an HTTP endpoint and read the text reply."""

    def __init__(self, url: str, max_tokens: int = 64, timeout: float = 30.0):
        self.url = url
        self.max_tokens = max_tokens
        self.timeout = timeout

    def send(self, q: ConceptQuery, system: str, message: str) -> str:
        body = json.dumps(
            {"system": system, "message": message, "max_tokens": self.max_tokens}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except OSError as e:
            raise TransportError(f"concept service request failed: {e}", query=q) from e


def make_transport(url: str, max_tokens: int = 64):
    """Build a transport from an endpoint descriptor.

    ``replay:<path>`` selects a cassette; ``http://``/``https://`` a live
    endpoint.  Anything else is a configuration error.
    """
    if url.startswith("replay:"):
        return ReplayTransport(url[len("replay:"):])
    if url.startswith(("http://", "https://")):
        return HttpTransport(url, max_tokens=max_tokens)
    raise ConfigError(f"malformed concept-service endpoint descriptor: {url!r}")


class RecordingTransport:
    """Wrap a live transport and append every exchange to a cassette file."""

    def __init__(self, inner, cassette_path: str | Path):
        self.inner = inner
        self.path = Path(cassette_path)

    def send(self, q: ConceptQuery, system: str, message: str) -> str:
        reply = self.inner.send(q, system, message)
        rec = {"sentence": q.sentence, "noun": q.noun, "level": q.level, "reply": reply}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        return reply


# --- client ------------------------------------------------------------------


@dataclass
class ConceptClient:
    """Stateless client: build prompt, send, parse, post-filter.

    ``max_set_size`` caps the returned set to bound augmentation blowup;
    ``retries`` re-sends on TransportError with a short backoff (the replay
    transport fails deterministically, so retries only matter live).
    """

    transport: object
    max_set_size: int = 8
    retries: int = 2
    retry_wait: float = 0.5
    warnings: list[ConceptQuery] = field(default_factory=list)

    def fetch_concepts(self, q: ConceptQuery) -> tuple[str, ...]:
        system, message = build_prompt(q)
        last_error: TransportError | None = None
        for attempt in range(self.retries + 1):
            try:
                raw = self.transport.send(q, system, message)
                break
            except TransportError as e:
                last_error = e
                if attempt < self.retries and self.retry_wait > 0 and not isinstance(
                    self.transport, (ReplayTransport, MockTransport)
                ):
                    time.sleep(self.retry_wait)
        else:
            raise TransportError(
                f"concept service failed after {self.retries + 1} attempts: {last_error}",
                query=q,
            )
        parsed = parse_response(raw)
        if parsed.missing_list:
            self.warnings.append(q)
        noun = q.noun.lower()
        items = tuple(w for w in parsed.items if w != noun)
        return items[: self.max_set_size]


def fetch_concepts(q: ConceptQuery, endpoint, **kwargs) -> tuple[str, ...]:
    """One-shot fetch. ``endpoint`` is a transport object or a descriptor string."""
    transport = make_transport(endpoint) if isinstance(endpoint, str) else endpoint
    return ConceptClient(transport, **kwargs).fetch_concepts(q)
