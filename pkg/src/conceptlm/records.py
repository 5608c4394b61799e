"""Training-record and variant-registry types.

A ConceptRecord is one training sentence with a marked target-noun span and
the set of completions treated as conceptually equivalent at that span.
Records are written as line-delimited JSON with fields
``sentence`` (token array), ``target_span``, ``original``, ``completions``,
``level``, ``source`` and validated both on write and on read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError

LEVELS = ("synonym", "hypernym", "none")
SOURCES = ("context_free", "context_aware", "no_concept")
OBJECTIVES = ("ntp_baseline", "ncp_loss", "ncp_augmentation")


@dataclass(frozen=True)
class ConceptRecord:
    """One sentence, one target span, one completion set."""

    sentence: tuple[str, ...]
    target_span: tuple[int, int]
    original: str
    completions: tuple[str, ...]
    level: str
    source: str

    def __post_init__(self):
        start, end = self.target_span
        if not (0 <= start < end <= len(self.sentence)):
            raise DataError(f"target span {self.target_span} out of range for sentence of "
                            f"length {len(self.sentence)}")
        spelled = " ".join(self.sentence[start:end])
        if spelled != self.original:
            raise DataError(f"span tokens {spelled!r} do not spell original {self.original!r}")
        if not self.completions:
            raise DataError("completions must be non-empty")
        if len(set(self.completions)) != len(self.completions):
            raise DataError(f"duplicate completions in {self.completions}")
        if self.original not in self.completions:
            raise DataError(f"original {self.original!r} missing from completions")
        if self.level not in LEVELS:
            raise DataError(f"level must be one of {LEVELS}, got {self.level!r}")
        if self.source not in SOURCES:
            raise DataError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "no_concept" and self.completions != (self.original,):
            raise DataError("no_concept records must have completions == (original,)")


def record_to_json(rec: ConceptRecord) -> str:
    d = asdict(rec)
    d["sentence"] = list(rec.sentence)
    d["target_span"] = list(rec.target_span)
    d["completions"] = list(rec.completions)
    return json.dumps(d, sort_keys=True, ensure_ascii=False)


def record_from_json(line: str) -> ConceptRecord:
    try:
        d = json.loads(line)
        return ConceptRecord(
            sentence=tuple(d["sentence"]),
            target_span=tuple(d["target_span"]),
            original=d["original"],
            completions=tuple(d["completions"]),
            level=d["level"],
            source=d["source"],
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DataError):
            raise
        raise DataError(f"malformed record line: {e}") from e


def write_records(records: Iterable[ConceptRecord], path: str | Path) -> int:
    """Write records as JSONL; returns the count written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")
            n += 1
    return n


def read_records(path: str | Path) -> list[ConceptRecord]:
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(record_from_json(line))
        except DataError as e:
            raise DataError(f"{path}:{lineno}: {e}") from e
    return out


def iter_records(path: str | Path) -> Iterator[ConceptRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield record_from_json(line)


# --- split manifests ----------------------------------------------------------


@dataclass(frozen=True)
class SplitManifest:
    """Paths and record counts of one train/val/test split."""

    domain: str
    seed: int
    train_path: str
    val_path: str
    test_path: str
    train_n: int
    val_n: int
    test_n: int

    def path_for(self, split: str) -> str:
        return {"train": self.train_path, "val": self.val_path, "test": self.test_path}[split]

    def count_for(self, split: str) -> int:
        return {"train": self.train_n, "val": self.val_n, "test": self.test_n}[split]


def write_manifest(manifest: SplitManifest, path: str | Path) -> None:
    """Write a manifest with file paths relative to its own directory."""
    path = Path(path)
    d = asdict(manifest)
    for key in ("train_path", "val_path", "test_path"):
        p = Path(d[key])
        d[key] = p.name if p.parent == path.parent or not p.is_absolute() else str(p)
    path.write_text(json.dumps(d, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> SplitManifest:
    """Read a manifest, resolving relative file paths against its location."""
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
        for key in ("train_path", "val_path", "test_path"):
            p = Path(d[key])
            d[key] = str(p if p.is_absolute() else path.parent / p)
        return SplitManifest(**d)
    except (OSError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"cannot read split manifest {path}: {e}") from e


# --- variant registry ---------------------------------------------------------


@dataclass(frozen=True)
class VariantSpec:
    """One training variant: objective x concept level x concept source.

    The ``base`` sentinel (no post-training) is represented by
    ``objective="base"`` with empty level/source.
    """

    objective: str
    level: str = ""
    source: str = ""

    @property
    def variant_id(self) -> str:
        if self.objective == "base":
            return "base"
        if self.objective == "ntp_baseline":
            return f"ntp/{self.level}"
        tag = "ncp-loss" if self.objective == "ncp_loss" else "ncp-aug"
        return f"{tag}/{self.level}/{self.source.replace('_', '-')}"


def _build_registry() -> dict[str, VariantSpec]:
    variants = []
    for objective in ("ncp_loss", "ncp_augmentation"):
        for level in ("synonym", "hypernym"):
            for source in ("context_free", "context_aware"):
                variants.append(VariantSpec(objective, level, source))
    for level in ("synonym", "hypernym"):
        variants.append(VariantSpec("ntp_baseline", level))
    variants.append(VariantSpec("base"))
    return {v.variant_id: v for v in variants}


#: The eight concept variants, the two plain baselines, and the base sentinel.
VARIANTS: dict[str, VariantSpec] = _build_registry()


def parse_variant_id(text: str, domains: Iterable[str] = ()) -> tuple[VariantSpec, str | None]:
    """Parse ``<variant-id>[/<domain>]`` against the registry.

    Returns the VariantSpec and the domain suffix (None when omitted, as is
    normal for ``base``).  Raises DataError listing valid ids otherwise.
    """
    domains = tuple(domains)
    if text in VARIANTS:
        return VARIANTS[text], None
    head, _, tail = text.rpartition("/")
    if head in VARIANTS and (not domains or tail in domains):
        return VARIANTS[head], tail
    valid = ", ".join(sorted(VARIANTS))
    raise DataError(f"unknown variant id {text!r}; valid ids: {valid} "
                    f"(optionally suffixed with /<domain>)")
