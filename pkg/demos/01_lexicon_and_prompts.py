#!/usr/bin/env python3
"""Walk through concept-set extraction: dictionary lookups and service prompts.

Shows the two extraction sources side by side on one sentence:
the context-free path (lexicon lookup at both resolution levels) and the
context-aware path (prompt construction, a scripted reply, and the total
reply parser working through noisy outputs).
"""

from pathlib import Path

from conceptlm.concepts import (
    ConceptClient,
    ConceptQuery,
    MockTransport,
    build_prompt,
    parse_response,
)
from conceptlm.lexicon import load_lexicon, lookup

demo_dir = Path(__file__).parent.parent / "demo"
lex = load_lexicon(demo_dir / "lexicon.tsv")
print(f"loaded lexicon with {len(lex)} lemmas from {demo_dir / 'lexicon.tsv'}")

sentence = "the baker served the cake today ."
noun = "cake"
print(f"\nsentence: {sentence!r}, target noun: {noun!r}")
print("context-free synonyms :", lookup(lex, noun, "synonym"))
print("context-free hypernyms:", lookup(lex, noun, "hypernym"))

print("\n--- context-aware prompt protocol ---")
for level in ("synonym", "hypernym"):
    system, message = build_prompt(ConceptQuery(sentence, noun, level))
    print(f"\n[{level}] system: {system}")
    print(f"[{level}] message: {message}")

print("\n--- reply parsing is total ---")
for raw in ["[pie, tart, strudel]", "Sure! [pie , tart]", "[]", "no list at all"]:
    parsed = parse_response(raw)
    flag = "  (no bracketed list)" if parsed.missing_list else ""
    print(f"{raw!r:35} -> {list(parsed.items)}{flag}")

print("\n--- full fetch through a scripted transport ---")
query = ConceptQuery(sentence, noun, "synonym")
client = ConceptClient(MockTransport({(sentence, noun, "synonym"): "[pie, cake, tart]"}))
print("fetched (query noun filtered out):", client.fetch_concepts(query))
