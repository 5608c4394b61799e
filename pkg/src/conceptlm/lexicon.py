"""Dictionary-backed synonym/hypernym lexicon.

Two on-disk formats are supported:

* ``native-tsv`` -- one lemma per line::

      cake<TAB>syn:pie,cookie<TAB>hyp:dessert,baked goods

  Both tagged lists are mandatory; an empty list is written as ``syn:``
  with nothing after the colon.

* ``wordnet-db`` -- a directory holding the standard ``data.noun`` /
  ``index.noun`` pair.  Import uses the first listed sense of each lemma:
  the other members of that synset become synonyms and the members of its
  direct hypernym synsets (``@`` and ``@i`` pointers) become hypernyms.

Lookups are total: unknown lemmas yield empty results.  All lemmas and
values are lowercased, whitespace-normalized, and returned in
lexicographic order, and a word is never listed among its own synonyms
or hypernyms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

LEVELS = ("synonym", "hypernym")

_FORMATS = ("native-tsv", "wordnet-db")


def _norm_word(word: str) -> str:
    """Lowercase and collapse internal whitespace to single spaces."""
    return " ".join(word.lower().split())


@dataclass(frozen=True)
class LexEntry:
    """Synonym and hypernym lists for one lemma, deduplicated and sorted."""

    synonyms: tuple[str, ...] = ()
    hypernyms: tuple[str, ...] = ()


@dataclass
class Lexicon:
    """Immutable-after-load mapping from lemma to its concept alternatives."""

    entries: dict[str, LexEntry] = field(default_factory=dict)

    def __contains__(self, lemma: str) -> bool:
        return _norm_word(lemma) in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def lookup(lex: Lexicon, lemma: str, level: str) -> tuple[str, ...]:
    """Return the synonym or hypernym set for ``lemma``.

    The query is lowercased first; unknown lemmas give ``()``.  The result
    never contains the query word itself.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    key = _norm_word(lemma)
    entry = lex.entries.get(key)
    if entry is None:
        return ()
    values = entry.synonyms if level == "synonym" else entry.hypernyms
    return tuple(v for v in values if v != key)


def _make_entry(lemma: str, synonyms, hypernyms) -> LexEntry:
    syn = sorted({_norm_word(w) for w in synonyms if _norm_word(w)} - {lemma})
    hyp = sorted({_norm_word(w) for w in hypernyms if _norm_word(w)} - {lemma})
    return LexEntry(tuple(syn), tuple(hyp))


def build_lexicon(raw: dict[str, tuple[list[str], list[str]]]) -> Lexicon:
    """Build a Lexicon from ``{lemma: (synonyms, hypernyms)}``."""
    entries = {}
    for lemma in sorted(raw):
        key = _norm_word(lemma)
        if not key:
            raise DataError("empty lemma in lexicon input")
        syn, hyp = raw[lemma]
        entries[key] = _make_entry(key, syn, hyp)
    return Lexicon(entries)


def load_lexicon(path: str | Path, format: str = "native-tsv") -> Lexicon:
    """Load a lexicon from ``path`` in the declared format.

    Raises DataError with a line number on malformed input, and on an
    unknown format tag.
    """
    if format not in _FORMATS:
        raise DataError(f"unknown lexicon format {format!r}; expected one of {_FORMATS}")
    path = Path(path)
    if format == "native-tsv":
        return _load_native_tsv(path)
    return _load_wordnet_db(path)


def _parse_tagged_list(fragment: str, tag: str, path: Path, lineno: int) -> list[str]:
    prefix = tag + ":"
    if not fragment.startswith(prefix):
        raise DataError(f"{path}:{lineno}: expected '{prefix}...' field, got {fragment!r}")
    body = fragment[len(prefix):]
    return [w for w in (part.strip() for part in body.split(",")) if w]


def _load_native_tsv(path: Path) -> Lexicon:
    raw: dict[str, tuple[list[str], list[str]]] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read lexicon file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        lemma = _norm_word(fields[0])
        if not lemma:
            raise DataError(f"{path}:{lineno}: empty lemma")
        syn = _parse_tagged_list(fields[1], "syn", path, lineno)
        hyp = _parse_tagged_list(fields[2], "hyp", path, lineno)
        if lemma in raw:
            # Duplicate lemma lines merge by union.
            old_syn, old_hyp = raw[lemma]
            raw[lemma] = (old_syn + syn, old_hyp + hyp)
        else:
            raw[lemma] = (syn, hyp)
    return build_lexicon(raw)


def serialize_lexicon(lex: Lexicon) -> str:
    """Render a Lexicon in the native TSV format, lemmas in sorted order."""
    lines = []
    for lemma in sorted(lex.entries):
        entry = lex.entries[lemma]
        lines.append(f"{lemma}\tsyn:{','.join(entry.synonyms)}\thyp:{','.join(entry.hypernyms)}")
    return "\n".join(lines) + ("\n" if lines else "")


def save_lexicon(lex: Lexicon, path: str | Path) -> None:
    Path(path).write_text(serialize_lexicon(lex), encoding="utf-8")


# --- WordNet database-file import -------------------------------------------

_HYPERNYM_PTRS = ("@", "@i")


def _wn_word(raw: str) -> str:
    # WordNet writes multi-word lemmas with underscores and may append a
    # syntactic marker in parentheses (adjectives only, but strip anyway).
    word = raw.split("(")[0].replace("_", " ")
    return _norm_word(word)


def _parse_wn_data(path: Path) -> dict[int, tuple[list[str], list[int]]]:
    """Parse data.noun into ``{offset: (member words, hypernym offsets)}``."""
    synsets: dict[int, tuple[list[str], list[int]]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith(" ") or not line.strip():
                continue  # license header
            fields = line.split("|")[0].split()
            try:
                offset = int(fields[0])
                n_words = int(fields[3], 16)
                words = [_wn_word(fields[4 + 2 * i]) for i in range(n_words)]
                ptr_base = 4 + 2 * n_words
                n_ptrs = int(fields[ptr_base])
                hypernyms = []
                for i in range(n_ptrs):
                    sym, target, pos, _src = fields[ptr_base + 1 + 4 * i: ptr_base + 5 + 4 * i]
                    if sym in _HYPERNYM_PTRS and pos == "n":
                        hypernyms.append(int(target))
            except (IndexError, ValueError) as e:
                raise DataError(f"{path}:{lineno}: malformed data line: {e}") from e
            synsets[offset] = (words, hypernyms)
    return synsets


def _parse_wn_index(path: Path) -> dict[str, int]:
    """Parse index.noun into ``{lemma: first-sense synset offset}``."""
    first_sense: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith(" ") or not line.strip():
                continue
            fields = line.split()
            try:
                lemma = _wn_word(fields[0])
                if fields[1] != "n":
                    continue
                n_synsets = int(fields[2])
                n_ptrs = int(fields[3])
                # lemma pos synset_cnt p_cnt ptrs... sense_cnt tagsense_cnt offsets...
                offsets = fields[6 + n_ptrs: 6 + n_ptrs + n_synsets]
                first_sense[lemma] = int(offsets[0])
            except (IndexError, ValueError) as e:
                raise DataError(f"{path}:{lineno}: malformed index line: {e}") from e
    return first_sense


def _load_wordnet_db(path: Path) -> Lexicon:
    """Import the data.noun/index.noun pair under ``path`` (a directory)."""
    data_path = path / "data.noun"
    index_path = path / "index.noun"
    for p in (data_path, index_path):
        if not p.exists():
            raise DataError(f"wordnet-db layout requires {p.name} under {path}")
    synsets = _parse_wn_data(data_path)
    first_sense = _parse_wn_index(index_path)

    raw: dict[str, tuple[list[str], list[str]]] = {}
    for lemma, offset in first_sense.items():
        if offset not in synsets:
            raise DataError(f"{index_path}: lemma {lemma!r} points at unknown synset {offset}")
        members, hyper_offsets = synsets[offset]
        synonyms = [w for w in members if w != lemma]
        hypernyms = []
        for h in hyper_offsets:
            if h not in synsets:
                raise DataError(f"{data_path}: synset {offset} points at unknown hypernym {h}")
            hypernyms.extend(synsets[h][0])
        raw[lemma] = (synonyms, hypernyms)
    return build_lexicon(raw)
