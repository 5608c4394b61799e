"""Training objectives and the post-training loop.

Two objectives over a marked target span:

* token-level (``ntp``): negative log-likelihood of the original target
  span given its left context; multi-token spans sum their per-token
  log-probabilities under teacher forcing.
* concept-level (``ncp``): the mean of that span NLL over every completion
  in the record's set, each scored after substituting its token span in
  place of the target.  A singleton completion set collapses to the
  token-level value bit-for-bit.

Variants that train by data augmentation expand each record into one
singleton-set record per completion and then use the token-level loss, so
their expected objective equals the concept-level loss on the parent
record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import augment
from .errors import ConfigError, DataError
from .model import ForwardTrace, ModelState, backward, forward, log_softmax, softmax, zero_grads
from .records import ConceptRecord, SplitManifest, VariantSpec, read_records
from .tokenizer import CompletionMap, Vocab, substitute_span


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss plus its per-span contributions.

    ``per_position`` holds one (token position, value) entry per scored
    span: a single entry for the token-level objective, one per completion
    for the concept-level objective.  ``total`` is their mean.
    """

    total: float
    per_position: tuple[tuple[int, float], ...]
    objective: str  # "ntp" | "ncp"

    def __post_init__(self):
        if not np.isfinite(self.total):
            raise DataError(f"non-finite loss total {self.total}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    epochs: int
    seed: int
    optimizer: str = "adam"  # "sgd" | "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ConfigError("train config: learning_rate, batch_size, epochs must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"train config: unknown optimizer {self.optimizer!r}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("train config: grad_clip must be positive when set")


@dataclass(frozen=True)
class PreparedRecord:
    """A record resolved against a vocabulary: model input plus span indices."""

    record: ConceptRecord
    input_ids: tuple[int, ...]  # bos + sentence token ids
    token_span: tuple[int, int]  # target span in sentence-token coordinates


def prepare_record(vocab: Vocab, record: ConceptRecord) -> PreparedRecord:
    enc = vocab.encode_words(record.sentence)
    return PreparedRecord(
        record=record,
        input_ids=(vocab.bos_id,) + enc.ids,
        token_span=enc.token_span(record.target_span),
    )


def _completion_inputs(prep: PreparedRecord, completion: str, cmap: CompletionMap):
    """Model input with the completion substituted, plus its scored rows/targets.

    Logits row r predicts input position r+1, so with a bos offset of one the
    first scored row index equals the span's sentence-token start.
    """
    start, _ = prep.token_span
    sent_ids = prep.input_ids[1:]
    sub = substitute_span(sent_ids, prep.token_span, completion, cmap)
    targets = cmap[completion]
    return (prep.input_ids[0],) + sub, start, targets


def _span_nll(logits: np.ndarray, row_start: int, targets: Sequence[int]) -> float:
    logp = log_softmax(logits)
    nll = 0.0
    for k, t in enumerate(targets):
        nll -= logp[row_start + k, t]
    return float(nll)


def _span_dlogits(logits: np.ndarray, row_start: int, targets: Sequence[int]) -> np.ndarray:
    """Gradient of the span NLL w.r.t. the logits (softmax minus one-hot on scored rows)."""
    d = np.zeros_like(logits)
    probs = softmax(logits)
    for k, t in enumerate(targets):
        d[row_start + k] = probs[row_start + k]
        d[row_start + k, t] -= 1.0
    return d


def _trace_for(trace: ForwardTrace, input_ids: tuple[int, ...]) -> ForwardTrace:
    if trace.tokens == input_ids:
        return trace
    return forward(trace.state, input_ids)


def _require_matching_trace(trace: ForwardTrace, prep: PreparedRecord) -> None:
    if trace.tokens != prep.input_ids:
        raise DataError("trace tokens do not match the record's encoded sentence")


def ntp_loss(
    trace: ForwardTrace, record: ConceptRecord, cmap: CompletionMap, vocab: Vocab
) -> LossBreakdown:
    """Negative log-likelihood of the original target span given its left context."""
    prep = prepare_record(vocab, record)
    _require_matching_trace(trace, prep)
    start, _ = prep.token_span
    nll = _span_nll(trace.logits, start, cmap[record.original])
    return LossBreakdown(total=nll, per_position=((start, nll),), objective="ntp")


def ncp_loss(
    trace: ForwardTrace, record: ConceptRecord, cmap: CompletionMap, vocab: Vocab
) -> LossBreakdown:
    """Mean span NLL over the record's completion set.

    Each completion is scored on the sequence with its span substituted for
    the target span, teacher-forcing the completion's tokens.  Completions
    whose substituted sequence equals the trace reuse the trace's logits, so
    a singleton set reproduces the token-level value exactly.
    """
    prep = prepare_record(vocab, record)
    _require_matching_trace(trace, prep)
    start, _ = prep.token_span
    values = []
    for completion in prep.record.completions:
        input_ids, row_start, targets = _completion_inputs(prep, completion, cmap)
        sub_trace = _trace_for(trace, input_ids)
        values.append(_span_nll(sub_trace.logits, row_start, targets))
    return LossBreakdown(
        total=float(np.mean(values)),
        per_position=tuple((start, v) for v in values),
        objective="ncp",
    )


# --- gradients -----------------------------------------------------------------


def record_loss(
    state: ModelState,
    record: ConceptRecord,
    cmap: CompletionMap,
    vocab: Vocab,
    objective: str,
) -> LossBreakdown:
    """Forward-only loss of one record under the chosen objective."""
    prep = prepare_record(vocab, record)
    trace = forward(state, prep.input_ids)
    fn = ntp_loss if objective == "ntp" else ncp_loss
    return fn(trace, record, cmap, vocab)


def record_grads(
    state: ModelState,
    record: ConceptRecord,
    cmap: CompletionMap,
    vocab: Vocab,
    objective: str,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss total and exact parameter gradients for one record."""
    if objective not in ("ntp", "ncp"):
        raise ConfigError(f"unknown objective {objective!r}")
    prep = prepare_record(vocab, record)
    completions = (record.original,) if objective == "ntp" else record.completions
    weight = 1.0 / len(completions)
    grads = zero_grads(state.config)
    values = []
    for completion in completions:
        input_ids, row_start, targets = _completion_inputs(prep, completion, cmap)
        trace = forward(state, input_ids)
        values.append(_span_nll(trace.logits, row_start, targets))
        dlogits = _span_dlogits(trace.logits, row_start, targets)
        if objective == "ncp":
            dlogits *= weight
        for name, g in backward(state, trace, dlogits).items():
            grads[name] += g
    total = float(values[0]) if objective == "ntp" else float(np.mean(values))
    return total, grads


# --- optimizers ------------------------------------------------------------------


class _SGD:
    def __init__(self, tc: TrainConfig):
        self.lr = tc.learning_rate

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name in params:
            params[name] -= self.lr * grads[name]


class _Adam:
    def __init__(self, tc: TrainConfig):
        self.lr = tc.learning_rate
        self.b1, self.b2, self.eps = tc.adam_beta1, tc.adam_beta2, tc.adam_eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name in sorted(params):
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            params[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _make_optimizer(tc: TrainConfig):
    return _SGD(tc) if tc.optimizer == "sgd" else _Adam(tc)


def _clip_grads(grads: dict[str, np.ndarray], clip: float) -> None:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if norm > clip:
        scale = clip / norm
        for g in grads.values():
            g *= scale


def objective_for(variant: VariantSpec) -> str:
    """Loss dispatch: only the loss-function variants use the concept-level loss."""
    if variant.objective == "ncp_loss":
        return "ncp"
    if variant.objective in ("ntp_baseline", "ncp_augmentation"):
        return "ntp"
    raise ConfigError(f"variant {variant.variant_id!r} is not trainable")


def _mean_loss(state, records, cmap, vocab, objective) -> float:
    values = [record_loss(state, r, cmap, vocab, objective).total for r in records]
    return float(np.mean(values))


def train(
    state: ModelState,
    manifest: SplitManifest | Sequence[ConceptRecord],
    variant: VariantSpec,
    tc: TrainConfig,
    cmap: CompletionMap,
    vocab: Vocab,
    val_records: Sequence[ConceptRecord] | None = None,
) -> tuple[ModelState, list[dict]]:
    """Post-train a copy of ``state`` on the variant's records.

    ``manifest`` may be a SplitManifest (train/val files are read from it)
    or an in-memory record sequence.  Augmentation variants expand records
    with multi-member completion sets before training; expansion of already
    singleton records is the identity, so pre-augmented files pass through
    unchanged.  Returns the trained state and a per-epoch train/val log.
    """
    objective = objective_for(variant)
    if isinstance(manifest, SplitManifest):
        records = read_records(manifest.train_path)
        if val_records is None:
            records_val = read_records(manifest.val_path)
        else:
            records_val = list(val_records)
    else:
        records = list(manifest)
        records_val = list(val_records) if val_records is not None else []
    if variant.objective == "ncp_augmentation":
        records = augment(records)
        records_val = augment(records_val)
    if not records:
        raise DataError(f"no training records for variant {variant.variant_id}")

    state = state.copy()
    rng = np.random.default_rng(tc.seed)
    opt = _make_optimizer(tc)
    log: list[dict] = []
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(records))
        loss_sum = 0.0
        for batch_no, lo in enumerate(range(0, len(order), tc.batch_size)):
            batch = order[lo: lo + tc.batch_size]
            grads = zero_grads(state.config)
            for j in batch:
                loss, g = record_grads(state, records[int(j)], cmap, vocab, objective)
                if not np.isfinite(loss):
                    raise DataError(
                        f"non-finite loss at epoch {epoch}, batch {batch_no}, "
                        f"record index {int(j)}"
                    )
                loss_sum += loss
                for name in grads:
                    grads[name] += g[name]
            for name in grads:
                grads[name] /= len(batch)
            if tc.grad_clip is not None:
                _clip_grads(grads, tc.grad_clip)
            opt.step(state.params, grads)
        log.append(
            {"epoch": epoch, "split": "train", "objective": objective,
             "loss": loss_sum / len(records)}
        )
        if records_val:
            log.append(
                {"epoch": epoch, "split": "val", "objective": objective,
                 "loss": _mean_loss(state, records_val, cmap, vocab, objective)}
            )
    return state, log


def write_training_log(log: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


# --- gradient checking ------------------------------------------------------------


def grad_check(
    state: ModelState,
    record: ConceptRecord,
    objective: str,
    cmap: CompletionMap,
    vocab: Vocab,
    eps: float = 1e-4,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every element of every named parameter array is perturbed by +/-eps.
    The relative error uses ``|a - n| / max(|a|, |n|, 1.0)``: gradients below
    unit scale compare on an absolute scale, which keeps the check immune to
    the O(eps^2) truncation noise of the difference quotient while still
    catching sign flips and missing terms.  Intended for toy-sized models.
    """
    _, analytic = record_grads(state, record, cmap, vocab, objective)

    def loss_at() -> float:
        return record_loss(state, record, cmap, vocab, objective).total

    worst = 0.0
    for name in state.param_names():
        arr = state.params[name]
        grad = analytic[name]
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lo_plus = loss_at()
            flat[idx] = orig - eps
            lo_minus = loss_at()
            flat[idx] = orig
            numeric = (lo_plus - lo_minus) / (2 * eps)
            a = float(gflat[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, err)
    return worst
