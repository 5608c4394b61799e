"""Corpus ingestion and per-variant dataset construction.

The pipeline detects target nouns in tokenized sentences, resolves each
one's completion set through the chosen extraction source (dictionary
lookup, context-aware service, or none), and derives the per-variant
training files:

* ``augment`` expands a record into one singleton-set record per
  completion, substituting the completion's words into the sentence.
* ``inflate`` replaces a record with repeated no-concept copies so plain
  baselines train on the same number of datapoints as a matched
  concept variant.
* ``split`` shuffles sentence groups by seed and writes disjoint
  train/val/test files with exact record counts plus a manifest.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .concepts import ConceptClient, ConceptQuery
from .errors import DataError
from .lexicon import Lexicon, lookup
from .records import ConceptRecord, SplitManifest, write_manifest, write_records

Sentence = tuple[str, ...]
Span = tuple[int, int]


def load_corpus(path: str | Path) -> list[Sentence]:
    """Read a whitespace-tokenized corpus, one sentence per line."""
    sentences = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        words = tuple(line.split())
        if words:
            sentences.append(words)
    if not sentences:
        raise DataError(f"corpus {path} contains no sentences")
    return sentences


def lexicon_noun_detector(lex: Lexicon) -> Callable[[str], bool]:
    """Desk-scale noun detection: a token is a target iff the lexicon knows it."""
    return lambda word: word in lex


def extract_targets(sentence: Sequence[str], noun_detector: Callable[[str], bool]) -> list[Span]:
    """Spans of detected nouns, left to right, one span per occurrence."""
    if not sentence:
        raise DataError("cannot extract targets from an empty sentence")
    return [(i, i + 1) for i, word in enumerate(sentence) if noun_detector(word)]


def load_annotations(path: str | Path) -> dict[Sentence, list[Span]]:
    """Optional user-supplied span annotations: JSONL of {sentence, spans}."""
    out: dict[Sentence, list[Span]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            sentence = tuple(d["sentence"])
            spans = [(int(s), int(e)) for s, e in d["spans"]]
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}:{lineno}: malformed annotation: {e}") from e
        out[sentence] = spans
    return out


def resolve_record(
    sentence: Sequence[str],
    span: Span,
    level: str,
    source: str,
    lex: Lexicon | None = None,
    client: ConceptClient | None = None,
) -> ConceptRecord:
    """Build one ConceptRecord for a target span under the chosen source.

    Completion sets always include the original word and are stored in
    lexicographic order.  ``no_concept`` ignores the level and yields the
    singleton set.
    """
    sentence = tuple(sentence)
    start, end = span
    original = " ".join(sentence[start:end])
    if source == "no_concept":
        return ConceptRecord(sentence, span, original, (original,), "none", source)
    if source == "context_free":
        if lex is None:
            raise DataError("context_free resolution requires a lexicon")
        alts = lookup(lex, original, level)
    elif source == "context_aware":
        if client is None:
            raise DataError("context_aware resolution requires a concept client")
        q = ConceptQuery(" ".join(sentence), original, level)
        alts = client.fetch_concepts(q)
    else:
        raise DataError(f"unknown concept source {source!r}")
    completions = tuple(sorted({original, *alts}))
    return ConceptRecord(sentence, span, original, completions, level, source)


def extract_records(
    sentences: Iterable[Sentence],
    level: str,
    source: str,
    lex: Lexicon | None = None,
    client: ConceptClient | None = None,
    annotations: dict[Sentence, list[Span]] | None = None,
) -> list[ConceptRecord]:
    """Resolve every detected target in corpus order, then span order."""
    detector = lexicon_noun_detector(lex) if lex is not None else None
    out = []
    for sentence in sentences:
        if annotations is not None and sentence in annotations:
            spans = annotations[sentence]
        elif detector is not None:
            spans = extract_targets(sentence, detector)
        else:
            raise DataError("record extraction needs a lexicon or span annotations")
        for span in spans:
            out.append(resolve_record(sentence, span, level, source, lex=lex, client=client))
    return out


def augment(records: Iterable[ConceptRecord]) -> list[ConceptRecord]:
    """Expand each record into one training instance per completion.

    The completion's words replace the target span in the sentence, so each
    output record is a singleton-set record targeting that completion.  A
    record with n completions yields n records; singleton records pass
    through unchanged.
    """
    out = []
    for rec in records:
        start, end = rec.target_span
        for completion in rec.completions:
            words = completion.split(" ")
            sentence = rec.sentence[:start] + tuple(words) + rec.sentence[end:]
            out.append(
                ConceptRecord(
                    sentence=sentence,
                    target_span=(start, start + len(words)),
                    original=completion,
                    completions=(completion,),
                    level=rec.level,
                    source=rec.source,
                )
            )
    return out


def inflate(
    records: Iterable[ConceptRecord],
    copies_per_record: Callable[[ConceptRecord], int] | None = None,
) -> list[ConceptRecord]:
    """Repeat each record as no-concept copies targeting the original word.

    By default each record is copied once per member of its completion set,
    which matches the datapoint volume of ``augment`` on the same records.
    """
    if copies_per_record is None:
        copies_per_record = lambda rec: len(rec.completions)
    out = []
    for rec in records:
        copies = copies_per_record(rec)
        if copies < 1:
            raise DataError(f"copies_per_record must be >= 1, got {copies}")
        plain = ConceptRecord(
            sentence=rec.sentence,
            target_span=rec.target_span,
            original=rec.original,
            completions=(rec.original,),
            level="none",
            source="no_concept",
        )
        out.extend([plain] * copies)
    return out


def split(
    records: Sequence[ConceptRecord],
    manifest_request: tuple[int, int, int, int],
    out_dir: str | Path,
    name: str,
    domain: str = "",
) -> SplitManifest:
    """Write seed-shuffled, sentence-disjoint train/val/test record files.

    ``manifest_request`` is (train_n, val_n, test_n, seed); counts are exact
    record counts per split.  Records sharing a sentence stay together; the
    shuffled sentence groups fill train, then val, then test, skipping
    groups that would overshoot a split's remaining capacity.  Surplus
    records are dropped (downsampling), but a split that cannot be filled
    exactly raises an error naming the shortfall.
    """
    train_n, val_n, test_n, seed = manifest_request
    if train_n + val_n + test_n > len(records):
        raise DataError(
            f"split request needs {train_n + val_n + test_n} records, "
            f"only {len(records)} available"
        )
    groups: dict[Sentence, list[ConceptRecord]] = {}
    for rec in records:
        groups.setdefault(rec.sentence, []).append(rec)
    keys = list(groups)
    order = np.random.default_rng(seed).permutation(len(keys))

    want = {"train": train_n, "val": val_n, "test": test_n}
    buckets: dict[str, list[ConceptRecord]] = {"train": [], "val": [], "test": []}
    for idx in order:
        group = groups[keys[int(idx)]]
        for split_name in ("train", "val", "test"):
            if len(buckets[split_name]) + len(group) <= want[split_name]:
                buckets[split_name].extend(group)
                break
    for split_name in ("train", "val", "test"):
        got = len(buckets[split_name])
        if got != want[split_name]:
            raise DataError(
                f"cannot fill {split_name} split: requested {want[split_name]} records, "
                f"placed {got} (short by {want[split_name] - got})"
            )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {s: out_dir / f"{name}.{s}.jsonl" for s in ("train", "val", "test")}
    for split_name, path in paths.items():
        write_records(buckets[split_name], path)
    manifest = SplitManifest(
        domain=domain,
        seed=seed,
        train_path=str(paths["train"]),
        val_path=str(paths["val"]),
        test_path=str(paths["test"]),
        train_n=train_n,
        val_n=val_n,
        test_n=test_n,
    )
    write_manifest(manifest, out_dir / f"{name}.manifest.json")
    return manifest
