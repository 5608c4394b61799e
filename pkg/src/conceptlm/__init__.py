"""Concept-level next-word training for tiny autoregressive language models.

The package covers the whole desk-scale pipeline: lexicon-backed and
service-backed completion-set extraction, per-variant dataset construction
(augmented concept files and volume-matched baselines), a float64
transformer with exact manual gradients, token-level and concept-level
training objectives, and perplexity plus cross-domain transfer evaluation.
"""

from .concepts import ConceptClient, ConceptQuery, build_prompt, fetch_concepts, parse_response
from .dataset import augment, extract_records, extract_targets, inflate, resolve_record, split
from .errors import ConceptLMError, ConfigError, DataError, TransportError
from .evaluation import (
    PerplexityResult,
    TransferMatrix,
    build_transfer_matrix,
    concept_entropy,
    inspect_topk,
    perplexity,
    transfer_ratio,
)
from .grammar import ConceptGrammar, default_grammar
from .lexicon import Lexicon, LexEntry, load_lexicon, lookup, save_lexicon, serialize_lexicon
from .model import (
    ForwardTrace,
    ModelConfig,
    ModelState,
    backward,
    forward,
    init,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .records import ConceptRecord, SplitManifest, VARIANTS, VariantSpec, parse_variant_id
from .tokenizer import (
    CompletionMap,
    Vocab,
    build_completion_map,
    load_vocab,
    save_vocab,
    substitute_span,
    train_vocab,
)
from .training import LossBreakdown, TrainConfig, grad_check, ncp_loss, ntp_loss, train

__version__ = "0.1.0"
