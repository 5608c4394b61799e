"""Pipeline orchestration: extract, augment, train, eval, inspect, gradcheck.

Every command reads one flat config file; any config key can be overridden
with a flag of the same dotted name (``--train.epochs 3``).  Exit codes:
0 success, 2 configuration error, 3 data error, 4 runtime failure.

Run layout under the configured output directory::

    vocab.tsv  completion_map.tsv
    <domain>/records/records-<level>-<source>.jsonl
    <domain>/splits/records-<level>-<source>.{train,val,test}.jsonl (+manifest)
    <domain>/train_files/{ntp-<level>,ncp-aug-<level>-<source>}.{train,val}.jsonl
    checkpoints/<variant>.ckpt (+.meta.json)   logs/<variant>.log.jsonl
    reports/results.jsonl  transfer_matrix.{txt,csv}  inspect.txt  scores/
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, evaluation, model, tokenizer, training
from .concepts import ConceptClient, make_transport
from .config import RunConfig, load_config
from .errors import ConceptLMError, ConfigError, DataError
from .lexicon import load_lexicon
from .records import (
    VARIANTS,
    VariantSpec,
    parse_variant_id,
    read_records,
    write_records,
)

LEVEL_SOURCES = (
    ("synonym", "context_free"),
    ("synonym", "context_aware"),
    ("hypernym", "context_free"),
    ("hypernym", "context_aware"),
)


def _records_name(level: str, source: str) -> str:
    return f"records-{level}-{source.replace('_', '-')}"


def _fid(variant_id: str, domain: str | None) -> str:
    full = variant_id if domain is None else f"{variant_id}/{domain}"
    return full.replace("/", "+")


def _paths(cfg: RunConfig) -> dict[str, Path]:
    out = cfg.out_dir
    return {
        "out": out,
        "vocab": out / "vocab.tsv",
        "cmap": out / "completion_map.tsv",
        "checkpoints": out / "checkpoints",
        "logs": out / "logs",
        "reports": out / "reports",
    }


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DataError(f"{what} not found: {path} (run the earlier pipeline stages first)")
    return path


# --- extract -----------------------------------------------------------------


def cmd_extract(cfg: RunConfig, only_domain: str | None = None) -> None:
    """Resolve records for every (level, source) combination and split them."""
    paths = _paths(cfg)
    lex = load_lexicon(cfg.lexicon_path, cfg.lexicon_format)
    client = ConceptClient(
        make_transport(cfg.concept_url, max_tokens=cfg.concept_max_tokens),
        max_set_size=cfg.concept_max_set_size,
        retries=cfg.concept_retries,
    )
    domains = [only_domain] if only_domain else list(cfg.domains())
    for d in domains:
        if d not in cfg.corpora:
            raise ConfigError(f"unknown domain {d!r}; configured: {', '.join(cfg.corpora)}")

    all_records = []
    corpus_lines: list[str] = []
    per_domain: dict[str, dict[str, list]] = {}
    for d in domains:
        sentences = dataset.load_corpus(cfg.corpora[d])
        corpus_lines.extend(" ".join(s) for s in sentences)
        sets: dict[str, list] = {}
        for level, source in LEVEL_SOURCES:
            recs = dataset.extract_records(sentences, level, source, lex=lex, client=client)
            sets[_records_name(level, source)] = recs
        sets[_records_name("none", "no_concept")] = dataset.extract_records(
            sentences, "none", "no_concept", lex=lex
        )
        per_domain[d] = sets
        for recs in sets.values():
            all_records.extend(recs)

    completion_words = sorted({w for rec in all_records for w in rec.completions})
    vocab = tokenizer.train_vocab(
        corpus_lines + completion_words, cfg.tokenizer_size, cfg.tokenizer_scheme
    )
    paths["out"].mkdir(parents=True, exist_ok=True)
    tokenizer.save_vocab(vocab, paths["vocab"])
    cmap = tokenizer.build_completion_map(vocab, all_records)
    tokenizer.save_completion_map(cmap, paths["cmap"])

    train_n, val_n, test_n = cfg.split_sizes
    for d in domains:
        summary = {}
        for name, recs in per_domain[d].items():
            n = write_records(recs, paths["out"] / d / "records" / f"{name}.jsonl")
            manifest = dataset.split(
                recs,
                (train_n, val_n, test_n, cfg.seed),
                paths["out"] / d / "splits",
                name,
                domain=d,
            )
            summary[name] = {
                "records": n,
                "train": manifest.train_n,
                "val": manifest.val_n,
                "test": manifest.test_n,
            }
        (paths["out"] / d / "extract.json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"extract: domain {d}: "
              + ", ".join(f"{k}={v['records']}" for k, v in sorted(summary.items())))


# --- augment -----------------------------------------------------------------


def cmd_augment(cfg: RunConfig, only_domain: str | None = None) -> None:
    """Derive augmented concept files and volume-matched baseline files."""
    paths = _paths(cfg)
    domains = [only_domain] if only_domain else list(cfg.domains())
    for d in domains:
        split_dir = paths["out"] / d / "splits"
        train_dir = paths["out"] / d / "train_files"
        for level, source in LEVEL_SOURCES:
            name = _records_name(level, source)
            for part in ("train", "val"):
                recs = read_records(_require(split_dir / f"{name}.{part}.jsonl", "split file"))
                out_name = f"ncp-aug-{level}-{source.replace('_', '-')}.{part}.jsonl"
                write_records(dataset.augment(recs), train_dir / out_name)
        for level in ("synonym", "hypernym"):
            # Baselines match the context-free variant's datapoint volume.
            name = _records_name(level, "context_free")
            for part in ("train", "val"):
                recs = read_records(_require(split_dir / f"{name}.{part}.jsonl", "split file"))
                write_records(dataset.inflate(recs), train_dir / f"ntp-{level}.{part}.jsonl")
        n_files = len(list(train_dir.glob("*.jsonl")))
        print(f"augment: domain {d}: wrote {n_files} training files")


# --- train -------------------------------------------------------------------


def _train_files(cfg: RunConfig, variant: VariantSpec, domain: str) -> tuple[Path, Path]:
    base = cfg.out_dir / domain
    if variant.objective == "ncp_loss":
        name = _records_name(variant.level, variant.source)
        folder = base / "splits"
        return folder / f"{name}.train.jsonl", folder / f"{name}.val.jsonl"
    if variant.objective == "ncp_augmentation":
        name = f"ncp-aug-{variant.level}-{variant.source.replace('_', '-')}"
    else:
        name = f"ntp-{variant.level}"
    folder = base / "train_files"
    return folder / f"{name}.train.jsonl", folder / f"{name}.val.jsonl"


def _load_tokenizer(cfg: RunConfig):
    paths = _paths(cfg)
    vocab = tokenizer.load_vocab(_require(paths["vocab"], "vocabulary"))
    cmap = tokenizer.load_completion_map(_require(paths["cmap"], "completion map"))
    return vocab, cmap


def cmd_train(cfg: RunConfig, variant_arg: str, domain_flag: str | None = None) -> None:
    """Train one variant (or 'all' from the config list) and write checkpoints."""
    if variant_arg == "all":
        for vid in cfg.variants:
            variant, dom = parse_variant_id(vid, cfg.domains())
            if variant.objective == "base":
                _train_one(cfg, variant, None)
            else:
                for d in ([dom] if dom else cfg.domains()):
                    _train_one(cfg, variant, d)
        return
    variant, dom = parse_variant_id(variant_arg, cfg.domains())
    dom = dom or domain_flag
    if variant.objective != "base" and dom is None:
        raise ConfigError(
            f"variant {variant.variant_id!r} needs a training domain: pass "
            f"--domain or use '<variant>/<domain>'"
        )
    _train_one(cfg, variant, dom if variant.objective != "base" else None)


def _train_one(cfg: RunConfig, variant: VariantSpec, domain: str | None) -> None:
    paths = _paths(cfg)
    vocab, cmap = _load_tokenizer(cfg)
    state = model.init(cfg.model_config(len(vocab)))
    fid = _fid(variant.variant_id, domain)
    ckpt_path = paths["checkpoints"] / f"{fid}.ckpt"

    if variant.objective == "base":
        # The base sentinel ships the initialized model untouched.
        model.save_checkpoint(state, ckpt_path)
        log: list[dict] = []
    else:
        assert domain is not None
        train_path, val_path = _train_files(cfg, variant, domain)
        records = read_records(_require(train_path, "training file"))
        val_records = read_records(_require(val_path, "validation file"))
        trained, log = training.train(
            state, records, variant, cfg.train_config(), cmap, vocab, val_records
        )
        model.save_checkpoint(trained, ckpt_path)
    meta = {"variant_id": variant.variant_id, "domain": domain}
    ckpt_path.with_suffix(".meta.json").write_text(
        json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8"
    )
    training.write_training_log(log, paths["logs"] / f"{fid}.log.jsonl")
    final = log[-1]["loss"] if log else float("nan")
    print(f"train: {fid}: checkpoint {ckpt_path.name}, final val loss {final:.6f}"
          if log else f"train: {fid}: checkpoint {ckpt_path.name} (no training)")


# --- eval ----------------------------------------------------------------------


def _eval_record_set(cfg: RunConfig, variant_id: str, eval_domain: str):
    """Which annotated test split scores a model: its own level/source."""
    if variant_id == "base":
        level, source = "synonym", "context_free"
    else:
        variant = VARIANTS[variant_id]
        level = variant.level
        source = variant.source or "context_free"
    name = _records_name(level, source)
    path = cfg.out_dir / eval_domain / "splits" / f"{name}.test.jsonl"
    return read_records(_require(path, "test split"))


def _relevant_metric(variant_id: str) -> str:
    """Ratio series use the objective-matched metric: plain for baselines."""
    return "ntp_ppl" if variant_id == "base" or variant_id.startswith("ntp/") else "ncp_ppl"


def cmd_eval(
    cfg: RunConfig,
    checkpoints: list[str] | None = None,
    only_domain: str | None = None,
) -> None:
    """Score every checkpoint on every domain; emit reports and the transfer matrix."""
    paths = _paths(cfg)
    vocab, cmap = _load_tokenizer(cfg)
    ckpt_dir = paths["checkpoints"]
    if checkpoints:
        ckpt_paths = [Path(c) for c in checkpoints]
        for p in ckpt_paths:
            _require(p, "checkpoint")
    else:
        _require(ckpt_dir, "checkpoint directory")
        ckpt_paths = sorted(ckpt_dir.glob("*.ckpt"))
        if not ckpt_paths:
            raise DataError(f"no checkpoints under {ckpt_dir}")
    eval_domains = [only_domain] if only_domain else list(cfg.domains())

    results = []
    reports = paths["reports"]
    for ckpt_path in ckpt_paths:
        meta_path = _require(ckpt_path.with_suffix(".meta.json"), "checkpoint metadata")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        state = model.load_checkpoint(ckpt_path)
        variant_id = meta["variant_id"]
        model_id = variant_id if meta["domain"] is None else f"{variant_id}@{meta['domain']}"
        for d in eval_domains:
            recs = _eval_record_set(cfg, variant_id, d)
            for metric in ("ntp_ppl", "ncp_ppl"):
                units = evaluation.score_units(state, recs, metric, cmap, vocab)
                evaluation.write_score_dump(
                    units, reports / "scores" / f"{_fid(model_id, None)}-{d}-{metric}.jsonl"
                )
                total = sum(u.nll for u in units)
                count = sum(u.count for u in units)
                results.append(
                    evaluation.PerplexityResult(
                        value=float(np.exp(total / count)),
                        metric=metric,
                        domain=d,
                        model_id=model_id,
                        token_count=count,
                    )
                )
    results.sort(key=lambda r: (r.model_id, r.domain, r.metric))
    evaluation.write_results(results, reports / "results.jsonl")

    matrix_inputs = [
        r for r in results
        if "@" in r.model_id and r.metric == _relevant_metric(r.model_id.split("@")[0])
    ]
    train_domains = {evaluation.split_model_id(r.model_id)[1] for r in matrix_inputs}
    if matrix_inputs and train_domains == set(eval_domains):
        matrix = evaluation.build_transfer_matrix(matrix_inputs)
        (reports / "transfer_matrix.txt").write_text(
            evaluation.render_matrix_text(matrix), encoding="utf-8"
        )
        (reports / "transfer_matrix.csv").write_text(
            evaluation.render_matrix_csv(matrix), encoding="utf-8"
        )
        print(f"eval: wrote {len(results)} results and a "
              f"{len(matrix.train_domains)}x{len(matrix.eval_domains)} transfer matrix")
    else:
        print(f"eval: wrote {len(results)} results (transfer matrix skipped: need "
              "in-domain checkpoints for every eval domain)")

    if cfg.eval_prefixes:
        lines = []
        for ckpt_path in ckpt_paths:
            meta = json.loads(
                ckpt_path.with_suffix(".meta.json").read_text(encoding="utf-8")
            )
            state = model.load_checkpoint(ckpt_path)
            model_id = (meta["variant_id"] if meta["domain"] is None
                        else f"{meta['variant_id']}@{meta['domain']}")
            for prefix in cfg.eval_prefixes:
                ranked = evaluation.inspect_topk(state, prefix, cfg.eval_topk, cmap, vocab)
                shown = ", ".join(f"{w}={p:.6f}" for w, p in ranked)
                lines.append(f"{model_id} | {prefix} -> {shown}")
        (reports / "inspect.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- inspect / gradcheck --------------------------------------------------------


def cmd_inspect(cfg: RunConfig, checkpoint: str, prefix: str, k: int, words: bool) -> None:
    """Print the top-k next-step candidates for a prefix."""
    vocab, cmap = _load_tokenizer(cfg)
    state = model.load_checkpoint(_require(Path(checkpoint), "checkpoint"))
    ranked = evaluation.inspect_topk(state, prefix, k, cmap if words else None, vocab)
    for word, prob in ranked:
        print(f"{prob:.6f}  {word}")


def cmd_gradcheck(cfg: RunConfig) -> int:
    """Finite-difference check of both objectives on a built-in toy setup."""
    from .records import ConceptRecord

    corpus = ["the cat sat on the mat .", "a dog ran to the cat ."]
    vocab = tokenizer.train_vocab(corpus, 20, "word")
    rec = ConceptRecord(
        sentence=tuple("the cat sat on the mat .".split()),
        target_span=(1, 2),
        original="cat",
        completions=("cat", "dog", "mat"),
        level="synonym",
        source="context_free",
    )
    cmap = tokenizer.build_completion_map(vocab, [rec])
    toy = model.ModelConfig(
        vocab_size=len(vocab), context_len=12, d_model=8, n_layers=1,
        n_heads=2, d_ff=16, seed=cfg.seed,
    )
    state = model.init(toy)
    worst = 0.0
    for objective in ("ntp", "ncp"):
        err = training.grad_check(state, rec, objective, cmap, vocab)
        print(f"gradcheck: {objective} max relative error {err:.3e}")
        worst = max(worst, err)
    if worst >= 1e-5:
        print("gradcheck: FAILED (threshold 1e-5)")
        return 4
    print("gradcheck: OK")
    return 0


# --- argument parsing -------------------------------------------------------------


def _split_overrides(extras: list[str]) -> dict[str, str]:
    """Interpret leftover ``--dotted.key value`` (or ``=value``) flags."""
    overrides: dict[str, str] = {}
    i = 0
    while i < len(extras):
        arg = extras[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(extras):
                raise ConfigError(f"override flag {arg!r} is missing a value")
            value = extras[i + 1]
            i += 1
        if "." not in key and key not in ("seed", "out", "variants"):
            raise ConfigError(f"unknown flag --{key}")
        overrides[key] = value
        i += 1
    return overrides


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conceptlm",
        description="Concept-level next-word training pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")

    p = sub.add_parser("extract", help="resolve records for all level/source combinations")
    common(p)
    p.add_argument("--domain", help="restrict to one configured domain")

    p = sub.add_parser("augment", help="derive augmented and volume-matched training files")
    common(p)
    p.add_argument("--domain", help="restrict to one configured domain")

    p = sub.add_parser("train", help="post-train one variant (or 'all')")
    common(p)
    p.add_argument("--variant", required=True,
                   help="variant id, optionally '<id>/<domain>', or 'all'")
    p.add_argument("--domain", help="training domain when not part of --variant")

    p = sub.add_parser("eval", help="perplexity reports and the transfer matrix")
    common(p)
    p.add_argument("--domain", help="restrict evaluation to one domain")
    p.add_argument("--checkpoint", action="append",
                   help="explicit checkpoint path (repeatable); default: all")

    p = sub.add_parser("inspect", help="top-k next-step candidates for a prefix")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--prefix", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--tokens", action="store_true",
                   help="rank single tokens instead of completion-map words")

    p = sub.add_parser("gradcheck", help="finite-difference check of both objectives")
    common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args, extras = parser.parse_known_args(argv)
        overrides = _split_overrides(extras)
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out:
            overrides["out"] = args.out
        cfg = load_config(args.config, overrides)
        if args.command == "extract":
            cmd_extract(cfg, args.domain)
        elif args.command == "augment":
            cmd_augment(cfg, args.domain)
        elif args.command == "train":
            cmd_train(cfg, args.variant, args.domain)
        elif args.command == "eval":
            cmd_eval(cfg, args.checkpoint, args.domain)
        elif args.command == "inspect":
            cmd_inspect(cfg, args.checkpoint, args.prefix, args.k, not args.tokens)
        elif args.command == "gradcheck":
            return cmd_gradcheck(cfg)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except ConceptLMError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
