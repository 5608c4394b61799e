"""Synthetic concept grammar: a templated demo corpus with known concept sets.

Each domain owns a few noun groups whose members are interchangeable in
their slots, plus sentence templates that place a slot after a fixed
prefix.  Training sentences always use the first member of a group, so the
remaining members are held-out continuations with known concept structure,
which makes desk-scale checks exact: entropy over a slot's group, coverage
of the group in top-k lists, and perplexity on held-out members all have
ground truth.

``write_demo`` materializes everything an offline pipeline run needs:
corpus files, the matching lexicon, a replay cassette for the
context-aware source, and a ready-to-run flat config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .lexicon import Lexicon, build_lexicon

Sentence = tuple[str, ...]


@dataclass(frozen=True)
class ConceptGroup:
    name: str
    members: tuple[str, ...]  # members[0] is the training surface form
    hypernyms: tuple[str, ...]
    # Differences between the two extraction sources, served by the cassette:
    context_extra: tuple[str, ...] = ()  # extra context-aware synonyms
    context_hypernyms_empty: bool = False  # context-aware hypernym reply is []


@dataclass(frozen=True)
class SlotTemplate:
    prefixes: tuple[tuple[str, ...], ...]
    group: str
    tails: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class DomainGrammar:
    name: str
    groups: tuple[ConceptGroup, ...]
    templates: tuple[SlotTemplate, ...]

    def group(self, name: str) -> ConceptGroup:
        return next(g for g in self.groups if g.name == name)


@dataclass(frozen=True)
class ConceptGrammar:
    domains: tuple[DomainGrammar, ...]

    def domain(self, name: str) -> DomainGrammar:
        return next(d for d in self.domains if d.name == name)

    def domain_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.domains)

    # -- sentence generation ---------------------------------------------------

    def training_sentences(self, domain: str) -> list[Sentence]:
        """All distinct template instances, slots filled with the first member."""
        d = self.domain(domain)
        out = []
        for t in d.templates:
            member = d.group(t.group).members[0]
            for prefix in t.prefixes:
                for tail in t.tails:
                    out.append(prefix + (member,) + tail)
        return out

    def heldout_sentences(self, domain: str) -> list[Sentence]:
        """The same contexts with each held-out member substituted in."""
        d = self.domain(domain)
        out = []
        for t in d.templates:
            for member in d.group(t.group).members[1:]:
                for prefix in t.prefixes:
                    for tail in t.tails:
                        out.append(prefix + (member,) + tail)
        return out

    def slot_prompts(self, domain: str) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
        """(prefix words, concept set) pairs for every slot context."""
        d = self.domain(domain)
        out = []
        for t in d.templates:
            members = d.group(t.group).members
            for prefix in t.prefixes:
                out.append((prefix, members))
        return out

    # -- companion artifacts -----------------------------------------------------

    def lexicon(self) -> Lexicon:
        """Symmetric entries: every member maps to its group mates and hypernyms."""
        raw: dict[str, tuple[list[str], list[str]]] = {}
        for d in self.domains:
            for g in d.groups:
                for m in g.members:
                    mates = [w for w in g.members if w != m]
                    raw[m] = (mates, list(g.hypernyms))
        return build_lexicon(raw)

    def cassette_entries(self) -> list[dict]:
        """Scripted context-aware replies for every slot noun in every sentence."""
        entries = []
        for d in self.domains:
            for t in d.templates:
                g = d.group(t.group)
                for member in g.members:
                    syn = [w for w in g.members if w != member] + list(g.context_extra)
                    hyp = [] if g.context_hypernyms_empty else list(g.hypernyms)
                    for prefix in t.prefixes:
                        for tail in t.tails:
                            sentence = " ".join(prefix + (member,) + tail)
                            entries.append(
                                {"sentence": sentence, "noun": member,
                                 "level": "synonym", "reply": f"[{', '.join(syn)}]"}
                            )
                            entries.append(
                                {"sentence": sentence, "noun": member,
                                 "level": "hypernym", "reply": f"[{', '.join(hyp)}]"}
                            )
        return entries

    def write_demo(self, out_dir: str | Path) -> dict[str, Path]:
        """Write corpus files, lexicon, cassette, and a runnable config."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths: dict[str, Path] = {}
        for d in self.domains:
            p = out_dir / f"{d.name}.txt"
            lines = [" ".join(s) for s in self.training_sentences(d.name)]
            p.write_text("\n".join(lines) + "\n", encoding="utf-8")
            paths[f"corpus.{d.name}"] = p
        from .lexicon import save_lexicon

        lex_path = out_dir / "lexicon.tsv"
        save_lexicon(self.lexicon(), lex_path)
        paths["lexicon"] = lex_path
        cassette_path = out_dir / "cassette.jsonl"
        with cassette_path.open("w", encoding="utf-8") as fh:
            for entry in self.cassette_entries():
                fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
        paths["cassette"] = cassette_path
        cfg_path = out_dir / "demo.cfg"
        cfg_path.write_text(self._demo_config(), encoding="utf-8")
        paths["config"] = cfg_path
        return paths

    def _demo_config(self) -> str:
        lines = [
            "# demo pipeline configuration (paths are relative to this file)",
            "seed = 7",
            "out = out",
        ]
        for d in self.domains:
            lines.append(f"corpus.{d.name} = {d.name}.txt")
        lines += [
            "lexicon.path = lexicon.tsv",
            "lexicon.format = native-tsv",
            "concept_service.url = replay:cassette.jsonl",
            "concept_service.max_set_size = 8",
            "concept_service.retries = 2",
            "concept_service.max_tokens = 64",
            "tokenizer.scheme = word",
            "tokenizer.size = 160",
            "split.train = 12",
            "split.val = 3",
            "split.test = 3",
            "model.d_model = 32",
            "model.n_layers = 2",
            "model.n_heads = 4",
            "model.d_ff = 64",
            "model.context_len = 24",
            "train.learning_rate = 0.003",
            "train.batch_size = 6",
            "train.epochs = 6",
            "train.optimizer = adam",
            "variants = base,ntp/synonym,ntp/hypernym,ncp-loss/synonym/context-free,"
            "ncp-aug/synonym/context-free",
            "eval.prefixes = the baker served the|she ordered some",
            "eval.topk = 5",
        ]
        return "\n".join(lines) + "\n"


def default_grammar() -> ConceptGrammar:
    """Two lexically disjoint domains with three concept groups each."""
    cafe = DomainGrammar(
        name="cafe",
        groups=(
            ConceptGroup(
                name="sweets",
                members=("cake", "pie", "cookie"),
                hypernyms=("dessert", "baked goods"),
                context_extra=("tart",),
            ),
            ConceptGroup(
                name="drinks",
                members=("coffee", "espresso", "tea"),
                hypernyms=("beverage",),
            ),
            ConceptGroup(
                name="staff",
                members=("waiter", "server"),
                hypernyms=("employee",),
                context_hypernyms_empty=True,
            ),
        ),
        templates=(
            SlotTemplate(
                prefixes=(("the", "baker", "served", "the"),
                          ("the", "chef", "plated", "the")),
                group="sweets",
                tails=(("today", "."), ("again", "."), ("with", "pride", ".")),
            ),
            SlotTemplate(
                prefixes=(("she", "ordered", "some"),
                          ("he", "brewed", "some")),
                group="drinks",
                tails=(("after", "lunch", "."), ("this", "morning", "."), ("at", "noon", ".")),
            ),
            SlotTemplate(
                prefixes=(("the", "manager", "praised", "the"),
                          ("the", "guest", "tipped", "the")),
                group="staff",
                tails=(("for", "the", "effort", "."), ("after", "closing", "."),
                       ("once", "more", ".")),
            ),
        ),
    )
    garage = DomainGrammar(
        name="garage",
        groups=(
            ConceptGroup(
                name="vehicles",
                members=("car", "truck", "van"),
                hypernyms=("vehicle", "motor vehicle"),
                context_extra=("pickup",),
            ),
            ConceptGroup(
                name="tools",
                members=("wrench", "hammer"),
                hypernyms=("tool",),
            ),
            ConceptGroup(
                name="crew",
                members=("mechanic", "technician"),
                hypernyms=("worker",),
            ),
        ),
        templates=(
            SlotTemplate(
                prefixes=(("the", "apprentice", "repaired", "the"),
                          ("the", "customer", "collected", "the")),
                group="vehicles",
                tails=(("today", "."), ("again", "."), ("by", "hand", ".")),
            ),
            SlotTemplate(
                prefixes=(("the", "foreman", "borrowed", "the"),
                          ("the", "welder", "dropped", "the")),
                group="tools",
                tails=(("from", "the", "bench", "."), ("before", "noon", "."),
                       ("one", "more", "time", ".")),
            ),
            SlotTemplate(
                prefixes=(("the", "owner", "thanked", "the"),
                          ("the", "driver", "called", "the")),
                group="crew",
                tails=(("for", "the", "work", "."), ("after", "hours", "."),
                       ("once", "more", ".")),
            ),
        ),
    )
    return ConceptGrammar(domains=(cafe, garage))
