"""Perplexity, cross-domain transfer ratios, and prediction inspection.

Metric definitions (pinned here because they drive every report):

* ``ntp_ppl`` -- exp of the mean, over all held-out token positions, of the
  negative log-probability of each token given its prefix.  Sentences are
  deduplicated first so repeated datapoints do not double-count.
* ``ncp_ppl`` -- like ``ntp_ppl`` but each record's target span is scored as
  one unit whose value is the concept-level loss (mean span NLL over the
  record's completion set); non-target positions score as plain next-token
  NLL.

A transfer ratio divides an out-of-domain-trained model's perplexity on an
eval split by the same variant's in-domain-trained perplexity on that
split; lower means more robust to domain shift, and the in-domain diagonal
is exactly 1.  Result model ids take the form ``<variant-id>@<train-domain>``
so the matrix builder can recover the training domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .model import ModelState, forward, log_softmax
from .records import ConceptRecord
from .tokenizer import CompletionMap, Vocab
from .training import ncp_loss, prepare_record

METRICS = ("ntp_ppl", "ncp_ppl")


@dataclass(frozen=True)
class PerplexityResult:
    value: float
    metric: str
    domain: str
    model_id: str
    token_count: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise DataError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not np.isfinite(self.value) or self.value <= 0:
            raise DataError(f"perplexity value must be positive and finite, got {self.value}")


@dataclass(frozen=True)
class ScoredUnit:
    """One aggregation unit: a summed NLL over ``count`` scored positions."""

    index: int
    nll: float
    count: int


def _sentence_nlls(state: ModelState, vocab: Vocab, sentence: Sequence[str]) -> np.ndarray:
    """Per-position NLL of each sentence token given its prefix (bos-anchored)."""
    ids = vocab.encode_text(sentence)
    trace = forward(state, (vocab.bos_id,) + ids)
    logp = log_softmax(trace.logits)
    return np.array([-logp[i, t] for i, t in enumerate(ids)])


def _unique_sentences(records: Iterable[ConceptRecord]) -> list[tuple[str, ...]]:
    return list(dict.fromkeys(rec.sentence for rec in records))


def score_units(
    state: ModelState,
    records: Sequence[ConceptRecord],
    metric: str,
    cmap: CompletionMap | None,
    vocab: Vocab,
) -> list[ScoredUnit]:
    """Per-unit score dump backing a perplexity value (re-derivable totals)."""
    units: list[ScoredUnit] = []
    if metric == "ntp_ppl":
        for i, sentence in enumerate(_unique_sentences(records)):
            nlls = _sentence_nlls(state, vocab, sentence)
            units.append(ScoredUnit(index=i, nll=float(nlls.sum()), count=int(nlls.size)))
        return units
    if cmap is None:
        raise DataError("ncp_ppl scoring requires a completion map")
    for i, rec in enumerate(records):
        prep = prepare_record(vocab, rec)
        nlls = _sentence_nlls(state, vocab, rec.sentence)
        start, end = prep.token_span
        context_nll = float(nlls.sum() - nlls[start:end].sum())
        trace = forward(state, prep.input_ids)
        span_value = ncp_loss(trace, rec, cmap, vocab).total
        units.append(
            ScoredUnit(index=i, nll=context_nll + span_value,
                       count=int(nlls.size - (end - start) + 1))
        )
    return units


def perplexity(
    state: ModelState,
    split: Sequence[ConceptRecord],
    metric: str,
    cmap: CompletionMap | None,
    vocab: Vocab,
    domain: str = "",
    model_id: str = "",
) -> PerplexityResult:
    """Perplexity of a held-out record split under the chosen metric."""
    if metric not in METRICS:
        raise DataError(f"metric must be one of {METRICS}, got {metric!r}")
    if not split:
        raise DataError("cannot compute perplexity of an empty split")
    units = score_units(state, split, metric, cmap, vocab)
    total = sum(u.nll for u in units)
    count = sum(u.count for u in units)
    return PerplexityResult(
        value=float(np.exp(total / count)),
        metric=metric,
        domain=domain,
        model_id=model_id,
        token_count=count,
    )


# --- transfer ratios ---------------------------------------------------------------


def _value_of(x) -> float:
    return x.value if isinstance(x, PerplexityResult) else float(x)


def transfer_ratio(out_of_domain, in_domain) -> float:
    """Out-of-domain perplexity divided by the in-domain reference.

    Accepts PerplexityResult pairs (metric and eval domain must agree) or
    raw positive numbers.  Lower is more robust to the domain shift.
    """
    if isinstance(out_of_domain, PerplexityResult) and isinstance(in_domain, PerplexityResult):
        if out_of_domain.metric != in_domain.metric:
            raise DataError(
                f"transfer ratio across metrics: {out_of_domain.metric} vs {in_domain.metric}"
            )
        if out_of_domain.domain != in_domain.domain:
            raise DataError(
                f"transfer ratio across eval domains: {out_of_domain.domain!r} "
                f"vs {in_domain.domain!r}"
            )
    denom = _value_of(in_domain)
    if denom <= 0:
        raise DataError("in-domain perplexity must be positive")
    return _value_of(out_of_domain) / denom


def split_model_id(model_id: str) -> tuple[str, str]:
    """Split ``<variant-id>@<train-domain>``."""
    variant, sep, train_domain = model_id.rpartition("@")
    if not sep or not variant or not train_domain:
        raise DataError(
            f"model id {model_id!r} does not encode a training domain "
            "(expected '<variant>@<domain>')"
        )
    return variant, train_domain


@dataclass(frozen=True)
class TransferMatrix:
    """Transfer ratios per (train, eval) domain cell.

    ``mean_ratio`` averages across variants; ``best`` holds the minimum
    ratio and the variant achieving it (ties broken lexicographically).
    Both aggregations are emitted because either could back a
    best-model-per-cell summary.
    """

    train_domains: tuple[str, ...]
    eval_domains: tuple[str, ...]
    mean_ratio: dict[tuple[str, str], float]
    best: dict[tuple[str, str], tuple[str, float]]
    per_variant: dict[tuple[str, str], dict[str, float]]


def build_transfer_matrix(results: Sequence[PerplexityResult]) -> TransferMatrix:
    """Ratio matrix over every (train domain, eval domain) pair present.

    Each (variant, metric) series contributes ratios against its own
    in-domain reference; a series missing the in-domain score for an eval
    domain is an error naming the domain.
    """
    series: dict[tuple[str, str], dict[tuple[str, str], float]] = {}
    for r in results:
        variant, train_domain = split_model_id(r.model_id)
        cell = series.setdefault((variant, r.metric), {})
        if (train_domain, r.domain) in cell:
            raise DataError(f"duplicate result for {r.model_id} on {r.domain}")
        cell[(train_domain, r.domain)] = r.value

    train_domains = sorted({t for cell in series.values() for t, _ in cell})
    eval_domains = sorted({e for cell in series.values() for _, e in cell})
    per_variant: dict[tuple[str, str], dict[str, float]] = {}
    for (variant, metric), cell in sorted(series.items()):
        for (t, e), value in sorted(cell.items()):
            if (e, e) not in cell:
                raise DataError(
                    f"missing in-domain reference for variant {variant!r} "
                    f"({metric}) on eval domain {e!r}"
                )
            ratio = transfer_ratio(value, cell[(e, e)])
            per_variant.setdefault((t, e), {})[variant] = ratio

    mean_ratio = {}
    best = {}
    for key, ratios in per_variant.items():
        mean_ratio[key] = float(np.mean(sorted(ratios.values())))
        v, name = min((v, name) for name, v in ratios.items())
        best[key] = (name, v)
    return TransferMatrix(
        train_domains=tuple(train_domains),
        eval_domains=tuple(eval_domains),
        mean_ratio=mean_ratio,
        best=best,
        per_variant=per_variant,
    )


def render_matrix_text(matrix: TransferMatrix) -> str:
    """Aligned plain-text table: mean ratios plus the best variant per cell."""
    lines = ["transfer ratios (mean across variants; diagonal = 1.0)", ""]
    width = max([len(d) for d in matrix.eval_domains + matrix.train_domains] + [12])
    header = "train\\eval".ljust(width) + "".join(e.rjust(width + 2) for e in matrix.eval_domains)
    lines.append(header)
    for t in matrix.train_domains:
        row = t.ljust(width)
        for e in matrix.eval_domains:
            v = matrix.mean_ratio.get((t, e))
            row += (f"{v:.8f}" if v is not None else "-").rjust(width + 2)
        lines.append(row)
    lines.append("")
    lines.append("best variant per cell (minimum ratio)")
    for t in matrix.train_domains:
        for e in matrix.eval_domains:
            entry = matrix.best.get((t, e))
            if entry is not None:
                lines.append(f"  train={t} eval={e}: {entry[0]} ({entry[1]:.8f})")
    return "\n".join(lines) + "\n"


def render_matrix_csv(matrix: TransferMatrix) -> str:
    lines = ["train_domain,eval_domain,mean_ratio,best_variant,best_ratio"]
    for t in matrix.train_domains:
        for e in matrix.eval_domains:
            if (t, e) in matrix.mean_ratio:
                name, v = matrix.best[(t, e)]
                lines.append(f"{t},{e},{matrix.mean_ratio[(t, e)]!r},{name},{v!r}")
    return "\n".join(lines) + "\n"


# --- inspection ----------------------------------------------------------------------


def inspect_topk(
    state: ModelState,
    prefix: str | Sequence[str],
    k: int,
    cmap: CompletionMap | None,
    vocab: Vocab,
) -> list[tuple[str, float]]:
    """Top-k next-step candidates after ``prefix``, by probability descending.

    Without a completion map the candidates are single tokens (ties broken
    by token id).  With one, each mapped word is scored as the product of
    its teacher-forced span probabilities (ties broken lexicographically);
    span likelihoods of words sharing a prefix can overlap, so they form a
    ranking rather than a sub-distribution.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    words = prefix.split() if isinstance(prefix, str) else list(prefix)
    base = (vocab.bos_id,) + vocab.encode_text(words)
    if cmap is None:
        trace = forward(state, base)
        probs = np.exp(log_softmax(trace.logits[-1]))
        order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
        return [(vocab.token_of[i], float(probs[i])) for i in order[:k]]
    scored = []
    for word in sorted(cmap.spans):
        scored.append((word, word_probability(state, vocab, cmap, words, word)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def word_probability(
    state: ModelState,
    vocab: Vocab,
    cmap: CompletionMap,
    prefix_words: Sequence[str],
    word: str,
) -> float:
    """Probability of ``word``'s full token span directly after the prefix."""
    span = cmap[word]
    ids = (vocab.bos_id,) + vocab.encode_text(prefix_words) + span
    trace = forward(state, ids)
    logp = log_softmax(trace.logits)
    row0 = len(ids) - len(span) - 1
    total = sum(float(logp[row0 + i, t]) for i, t in enumerate(span))
    return float(np.exp(total))


def concept_entropy(
    state: ModelState,
    vocab: Vocab,
    cmap: CompletionMap,
    prefix_words: Sequence[str],
    concept_set: Sequence[str],
) -> float:
    """Entropy (nats) of the model's choice among a concept set after a prefix.

    Probabilities of the set members are renormalized over the set, so the
    value ranges from 0 (all mass on one member) to ln(set size).
    """
    probs = np.array(
        [word_probability(state, vocab, cmap, prefix_words, w) for w in concept_set]
    )
    total = probs.sum()
    if total <= 0:
        return 0.0
    q = probs / total
    q = q[q > 0]
    return float(-(q * np.log(q)).sum())


# --- report files --------------------------------------------------------------------


def write_results(results: Sequence[PerplexityResult], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def read_results(path: str | Path) -> list[PerplexityResult]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(PerplexityResult(**json.loads(line)))
    return out


def write_score_dump(units: Sequence[ScoredUnit], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for u in units:
            fh.write(json.dumps(asdict(u), sort_keys=True) + "\n")
