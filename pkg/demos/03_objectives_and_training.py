#!/usr/bin/env python3
"""Train the token-level baseline against both concept-level paradigms.

Starts three models from one initialization on the same underlying
datapoints: the plain baseline on inflated records, the augmentation
variant, and the concept-loss variant.  Then inspects what each model
predicts after a slot prefix, reproducing the qualitative spread of
probability mass across the concept set.
"""

import numpy as np

from conceptlm import dataset, model, tokenizer, training
from conceptlm.evaluation import concept_entropy, inspect_topk
from conceptlm.grammar import default_grammar
from conceptlm.records import VARIANTS

grammar = default_grammar()
lex = grammar.lexicon()
sentences = grammar.training_sentences("cafe")
records = dataset.extract_records(sentences, "synonym", "context_free", lex=lex)
lines = [" ".join(s) for s in sentences]
completions = sorted({w for r in records for w in r.completions})
vocab = tokenizer.train_vocab(lines + completions, 160, "word")
cmap = tokenizer.build_completion_map(vocab, records)

mc = model.ModelConfig(vocab_size=len(vocab), context_len=24, d_model=32,
                       n_layers=2, n_heads=4, d_ff=64, seed=0)
tc = training.TrainConfig(learning_rate=3e-3, batch_size=6, epochs=30, seed=0)
start = model.init(mc)

print("training three variants from one initialization ...")
baseline, log = training.train(start, dataset.inflate(records),
                               VARIANTS["ntp/synonym"], tc, cmap, vocab)
print(f"  ntp baseline       final loss {log[-1]['loss']:.4f}")
aug_model, log = training.train(start, records,
                                VARIANTS["ncp-aug/synonym/context-free"], tc, cmap, vocab)
print(f"  ncp augmentation   final loss {log[-1]['loss']:.4f}")
loss_model, log = training.train(start, records,
                                 VARIANTS["ncp-loss/synonym/context-free"], tc, cmap, vocab)
print(f"  ncp loss           final loss {log[-1]['loss']:.4f}")

prefix = ("the", "baker", "served", "the")
members = ("cake", "pie", "cookie")
print(f"\ntop predictions after {' '.join(prefix)!r}:")
for name, m in [("ntp baseline", baseline), ("ncp augmentation", aug_model),
                ("ncp loss", loss_model)]:
    top = inspect_topk(m, prefix, 4, cmap, vocab)
    shown = ", ".join(f"{w}={p:.3f}" for w, p in top)
    h = concept_entropy(m, vocab, cmap, prefix, members)
    print(f"  {name:16} -> {shown}   entropy over {members}: {h:.3f} nats")

print(f"\n(max possible entropy over a 3-member set: {np.log(3):.3f} nats)")
print("the baseline commits to the single observed surface form; both")
print("concept-trained models spread mass across the interchangeable set.")
