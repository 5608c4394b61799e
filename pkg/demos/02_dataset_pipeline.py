#!/usr/bin/env python3
"""Build per-variant training data from a raw corpus.

Resolves concept records for one domain of the bundled grammar, then shows
the two dataset derivations: augmentation (one instance per completion,
substituted into the sentence) and inflation (repeated no-concept copies,
matching the augmented datapoint volume), plus seeded splitting.
"""

import tempfile
from pathlib import Path

from conceptlm.dataset import augment, extract_records, inflate, split
from conceptlm.grammar import default_grammar

grammar = default_grammar()
lex = grammar.lexicon()
sentences = grammar.training_sentences("cafe")
print(f"cafe corpus: {len(sentences)} sentences, e.g. {' '.join(sentences[0])!r}")

records = extract_records(sentences, "synonym", "context_free", lex=lex)
print(f"\nresolved {len(records)} synonym records (context-free)")
rec = records[0]
print("first record:")
print("  sentence   :", " ".join(rec.sentence))
print("  target span:", rec.target_span, "->", rec.original)
print("  completions:", rec.completions)

augmented = augment(records)
print(f"\naugment: {len(records)} records -> {len(augmented)} instances")
for inst in augment([rec]):
    print("  ", " ".join(inst.sentence), "| target:", inst.original)

inflated = inflate(records)
print(f"\ninflate: {len(records)} records -> {len(inflated)} no-concept copies")
print("matched volume:", len(inflated) == len(augmented))

with tempfile.TemporaryDirectory() as tmp:
    manifest = split(records, (12, 3, 3, 7), Path(tmp), "demo", domain="cafe")
    print(f"\nsplit with seed {manifest.seed}: "
          f"train={manifest.train_n} val={manifest.val_n} test={manifest.test_n}")
    again = split(records, (12, 3, 3, 7), Path(tmp) / "again", "demo", domain="cafe")
    same = (Path(manifest.train_path).read_bytes()
            == Path(again.train_path).read_bytes())
    print("same seed, same shuffle:", same)
