"""Vocabulary training, tokenization, and completion-span machinery.

Two schemes:

* ``word`` -- whitespace tokens, most-frequent-first.  Keeps most
  completions single-token, which isolates objective logic in tests.
* ``bpe`` -- byte-pair merges *within* words.  The last character of each
  word carries an ``</w>`` end marker, so detokenization can restore word
  boundaries; encoding is greedy longest-match over the trained symbol
  inventory, which makes a saved vocabulary file self-contained.

The completion map precomputes ``word -> token-id span`` for every target
and completion seen in a record stream, so training never re-tokenizes and
a target span can be swapped wholesale for a completion span that may be
longer or shorter.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .records import ConceptRecord

BOS, EOS, UNK = "<bos>", "<eos>", "<unk>"
_SPECIALS = (BOS, EOS, UNK)
_END = "</w>"


@dataclass(frozen=True)
class Vocab:
    """Bijection between token strings and ids, plus the scheme that built it."""

    token_of: tuple[str, ...]
    scheme: str  # "word" | "bpe"

    def __post_init__(self):
        if len(set(self.token_of)) != len(self.token_of):
            raise DataError("vocabulary tokens are not unique")
        for s in _SPECIALS:
            if s not in self.token_of:
                raise DataError(f"vocabulary is missing special token {s}")
        object.__setattr__(self, "id_of", {t: i for i, t in enumerate(self.token_of)})

    def __len__(self) -> int:
        return len(self.token_of)

    @property
    def bos_id(self) -> int:
        return self.id_of[BOS]

    @property
    def eos_id(self) -> int:
        return self.id_of[EOS]

    @property
    def unk_id(self) -> int:
        return self.id_of[UNK]

    # -- encoding ------------------------------------------------------------

    def encode_word(self, word: str) -> tuple[int, ...]:
        """Token ids for one whitespace-free word."""
        if self.scheme == "word":
            return (self.id_of.get(word, self.unk_id),)
        ids = []
        base = _symbolize(word)
        i = 0
        while i < len(base):
            match = None
            for j in range(len(base), i, -1):
                cand = "".join(base[i:j])
                if cand in self.id_of:
                    match = (j, self.id_of[cand])
                    break
            if match is None:
                ids.append(self.unk_id)
                i += 1
            else:
                ids.append(match[1])
                i = match[0]
        return tuple(ids)

    def encode_text(self, text: str | Sequence[str]) -> tuple[int, ...]:
        """Token ids for a sentence (string or pre-split word sequence)."""
        words = text.split() if isinstance(text, str) else list(text)
        out: list[int] = []
        for w in words:
            out.extend(self.encode_word(w))
        return tuple(out)

    def encode_words(self, words: Sequence[str]) -> "SentenceEncoding":
        """Encode a word sequence and keep per-word token spans."""
        ids: list[int] = []
        spans: list[tuple[int, int]] = []
        for w in words:
            piece = self.encode_word(w)
            spans.append((len(ids), len(ids) + len(piece)))
            ids.extend(piece)
        return SentenceEncoding(tuple(ids), tuple(spans))

    def decode(self, ids: Sequence[int]) -> str:
        """Inverse of encode_text for in-vocabulary text (words joined by single spaces)."""
        toks = [self.token_of[i] for i in ids]
        if self.scheme == "word":
            return " ".join(toks)
        return " ".join(w for w in "".join(toks).split(_END) if w)


@dataclass(frozen=True)
class SentenceEncoding:
    ids: tuple[int, ...]
    word_spans: tuple[tuple[int, int], ...]

    def token_span(self, word_span: tuple[int, int]) -> tuple[int, int]:
        """Map a word-index span onto token-id indices."""
        start, end = word_span
        return (self.word_spans[start][0], self.word_spans[end - 1][1])


def _symbolize(word: str) -> list[str]:
    if not word:
        raise DataError("cannot tokenize an empty word")
    return list(word[:-1]) + [word[-1] + _END]


def _pair_counts(seqs: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in seqs.items():
        for a, b in zip(symbols, symbols[1:]):
            counts[(a, b)] += freq
    return counts


def train_vocab(corpus: Iterable[str], size: int, scheme: str = "word") -> Vocab:
    """Train a vocabulary of at most ``size`` tokens over a line stream.

    Deterministic: word candidates rank by (frequency desc, word asc); BPE
    merges pick the most frequent adjacent pair, ties broken by the
    lexicographically smallest pair.
    """
    if scheme not in ("word", "bpe"):
        raise DataError(f"unknown tokenizer scheme {scheme!r}")
    if size < len(_SPECIALS) + 1:
        raise DataError(f"vocab size must be at least {len(_SPECIALS) + 1}, got {size}")
    counts: Counter = Counter()
    for line in corpus:
        counts.update(line.split())
    if not counts:
        raise DataError("cannot train a vocabulary on an empty corpus")

    if scheme == "word":
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        words = [w for w, _ in ranked[: size - len(_SPECIALS)]]
        return Vocab(_SPECIALS + tuple(words), "word")

    seqs = {tuple(_symbolize(w)): f for w, f in counts.items()}
    base = sorted({s for symbols in seqs for s in symbols})
    if len(_SPECIALS) + len(base) > size:
        raise DataError(f"vocab size {size} cannot cover {len(base)} base symbols")
    tokens = list(_SPECIALS) + base
    while len(tokens) < size:
        pairs = _pair_counts(seqs)
        if not pairs:
            break
        best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        merged = best[0] + best[1]
        tokens.append(merged)
        new_seqs: dict[tuple[str, ...], int] = {}
        for symbols, freq in seqs.items():
            out = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == best:
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            new_seqs[tuple(out)] = new_seqs.get(tuple(out), 0) + freq
        seqs = new_seqs
    return Vocab(tuple(tokens), "bpe")


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    """Write ``id<TAB>token`` lines in id order."""
    lines = [f"{i}\t{t}" for i, t in enumerate(vocab.token_of)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocab:
    path = Path(path)
    tokens: list[str] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line:
            continue
        try:
            id_str, token = line.split("\t")
            if int(id_str) != len(tokens):
                raise ValueError(f"non-contiguous id {id_str}")
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: malformed vocab line: {e}") from e
        tokens.append(token)
    # The </w> marker is reserved for BPE word-final symbols, so its presence
    # identifies the scheme.
    scheme = "bpe" if any(t.endswith(_END) for t in tokens) else "word"
    return Vocab(tuple(tokens), scheme)


# --- completion map -----------------------------------------------------------


@dataclass(frozen=True)
class CompletionMap:
    """Precomputed ``word -> token-id span`` for targets and completions."""

    spans: dict[str, tuple[int, ...]]

    def __contains__(self, word: str) -> bool:
        return word in self.spans

    def __getitem__(self, word: str) -> tuple[int, ...]:
        try:
            return self.spans[word]
        except KeyError:
            raise DataError(f"completion {word!r} missing from completion map") from None

    def __len__(self) -> int:
        return len(self.spans)


def build_completion_map(vocab: Vocab, records: Iterable[ConceptRecord]) -> CompletionMap:
    """Map every original and completion in ``records`` to its token span, once."""
    spans: dict[str, tuple[int, ...]] = {}
    for rec in records:
        for word in sorted({rec.original, *rec.completions}):
            if word not in spans:
                spans[word] = vocab.encode_text(word)
    return CompletionMap(spans)


def save_completion_map(cmap: CompletionMap, path: str | Path) -> None:
    """Write ``word<TAB>id,id,...`` lines in insertion order."""
    lines = [f"{w}\t{','.join(str(i) for i in ids)}" for w, ids in cmap.spans.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_completion_map(path: str | Path) -> CompletionMap:
    path = Path(path)
    spans: dict[str, tuple[int, ...]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line:
            continue
        try:
            word, ids_str = line.split("\t")
            ids = tuple(int(s) for s in ids_str.split(","))
            if not ids:
                raise ValueError("empty span")
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: malformed completion-map line: {e}") from e
        spans[word] = ids
    return CompletionMap(spans)


def substitute_span(
    tokens: Sequence[int],
    span: tuple[int, int],
    completion: str,
    cmap: CompletionMap,
) -> tuple[int, ...]:
    """Replace ``tokens[span]`` with the completion's precomputed span.

    The output length is ``len(tokens) - (end - start) + len(cmap[completion])``,
    so substitutions may lengthen or shorten the sequence.
    """
    start, end = span
    if not (0 <= start < end <= len(tokens)):
        raise DataError(f"substitution span {span} out of range for {len(tokens)} tokens")
    repl = cmap[completion]
    return tuple(tokens[:start]) + repl + tuple(tokens[end:])
