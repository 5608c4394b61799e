"""Flat key=value run configuration with dotted section prefixes.

One file drives the whole pipeline; every key can be overridden on the
command line by a flag of the same dotted name (``--train.epochs 3``), and
``CONCEPT_SERVICE_URL`` in the environment overrides the configured
endpoint (command-line flags beat both).  Relative paths resolve against
the config file's directory so a config travels with its data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .records import VARIANTS, parse_variant_id
from .training import TrainConfig

ENV_SERVICE_URL = "CONCEPT_SERVICE_URL"

_DEFAULTS = {
    "lexicon.format": "native-tsv",
    "concept_service.max_set_size": "8",
    "concept_service.retries": "2",
    "concept_service.max_tokens": "64",
    "tokenizer.scheme": "word",
    "train.optimizer": "adam",
    "train.batch_size": "8",
    "eval.prefixes": "",
    "eval.topk": "5",
}

_REQUIRED = (
    "seed",
    "out",
    "lexicon.path",
    "concept_service.url",
    "tokenizer.size",
    "split.train",
    "split.val",
    "split.test",
    "model.d_model",
    "model.n_layers",
    "model.n_heads",
    "model.d_ff",
    "model.context_len",
    "train.learning_rate",
    "train.epochs",
    "variants",
)


def parse_kv_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{origin}:{lineno}: empty key")
        out[key] = value.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    seed: int
    base_dir: Path
    out_dir: Path
    corpora: dict[str, Path]  # domain -> corpus path, config order
    lexicon_path: Path
    lexicon_format: str
    concept_url: str
    concept_max_set_size: int
    concept_retries: int
    concept_max_tokens: int
    tokenizer_scheme: str
    tokenizer_size: int
    split_sizes: tuple[int, int, int]
    d_model: int
    n_layers: int
    n_heads: int
    d_ff: int
    context_len: int
    learning_rate: float
    batch_size: int
    epochs: int
    optimizer: str
    grad_clip: float | None
    variants: tuple[str, ...]
    eval_prefixes: tuple[str, ...]
    eval_topk: int

    def domains(self) -> tuple[str, ...]:
        return tuple(self.corpora)

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            context_len=self.context_len,
            d_model=self.d_model,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            d_ff=self.d_ff,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            optimizer=self.optimizer,
            grad_clip=self.grad_clip,
        )


def _to_int(kv: dict[str, str], key: str) -> int:
    try:
        return int(kv[key])
    except ValueError as e:
        raise ConfigError(f"config key {key} must be an integer, got {kv[key]!r}") from e


def _to_float(kv: dict[str, str], key: str) -> float:
    try:
        return float(kv[key])
    except ValueError as e:
        raise ConfigError(f"config key {key} must be a number, got {kv[key]!r}") from e


def load_config(
    path: str | Path,
    overrides: dict[str, str] | None = None,
    env: dict[str, str] | None = None,
) -> RunConfig:
    """Load, override, and validate a run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    kv = dict(_DEFAULTS)
    kv.update(parse_kv_text(path.read_text(encoding="utf-8"), origin=str(path)))
    env = os.environ if env is None else env
    if env.get(ENV_SERVICE_URL):
        kv["concept_service.url"] = env[ENV_SERVICE_URL]
    if overrides:
        kv.update(overrides)

    missing = [k for k in _REQUIRED if k not in kv]
    if missing:
        raise ConfigError(f"config is missing required keys: {', '.join(missing)}")

    base_dir = path.parent
    corpora: dict[str, Path] = {}
    for key, value in kv.items():
        if key.startswith("corpus."):
            domain = key[len("corpus."):]
            if not domain:
                raise ConfigError("corpus.<domain> key has an empty domain name")
            corpus_path = (base_dir / value).resolve()
            if not corpus_path.exists():
                raise ConfigError(f"corpus file for domain {domain!r} not found: {corpus_path}")
            corpora[domain] = corpus_path
    if not corpora:
        raise ConfigError("config must declare at least one corpus.<domain> key")

    lexicon_path = (base_dir / kv["lexicon.path"]).resolve()
    if not lexicon_path.exists():
        raise ConfigError(f"lexicon path not found: {lexicon_path}")

    variants = tuple(v.strip() for v in kv["variants"].split(",") if v.strip())
    if not variants:
        raise ConfigError("config key 'variants' must list at least one variant id")
    for v in variants:
        if v not in VARIANTS:
            try:
                parse_variant_id(v, domains=corpora)
            except Exception as e:
                raise ConfigError(str(e)) from e

    prefixes = tuple(p.strip() for p in kv["eval.prefixes"].split("|") if p.strip())
    grad_clip = _to_float(kv, "train.grad_clip") if "train.grad_clip" in kv else None

    return RunConfig(
        seed=_to_int(kv, "seed"),
        base_dir=base_dir,
        out_dir=(base_dir / kv["out"]).resolve(),
        corpora=corpora,
        lexicon_path=lexicon_path,
        lexicon_format=kv["lexicon.format"],
        concept_url=kv["concept_service.url"]
        if not kv["concept_service.url"].startswith("replay:")
        else "replay:" + str((base_dir / kv["concept_service.url"][len("replay:"):]).resolve()),
        concept_max_set_size=_to_int(kv, "concept_service.max_set_size"),
        concept_retries=_to_int(kv, "concept_service.retries"),
        concept_max_tokens=_to_int(kv, "concept_service.max_tokens"),
        tokenizer_scheme=kv["tokenizer.scheme"],
        tokenizer_size=_to_int(kv, "tokenizer.size"),
        split_sizes=(_to_int(kv, "split.train"), _to_int(kv, "split.val"),
                     _to_int(kv, "split.test")),
        d_model=_to_int(kv, "model.d_model"),
        n_layers=_to_int(kv, "model.n_layers"),
        n_heads=_to_int(kv, "model.n_heads"),
        d_ff=_to_int(kv, "model.d_ff"),
        context_len=_to_int(kv, "model.context_len"),
        learning_rate=_to_float(kv, "train.learning_rate"),
        batch_size=_to_int(kv, "train.batch_size"),
        epochs=_to_int(kv, "train.epochs"),
        optimizer=kv["train.optimizer"],
        grad_clip=grad_clip,
        variants=variants,
        eval_prefixes=prefixes,
        eval_topk=_to_int(kv, "eval.topk"),
    )
