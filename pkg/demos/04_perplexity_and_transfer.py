#!/usr/bin/env python3
"""Two-domain perplexity evaluation and the cross-domain transfer matrix.

Trains the plain baseline and the concept-loss variant on both bundled
domains, scores every model on every domain's held-out synonym
continuations, and derives the transfer-ratio matrix (out-of-domain
perplexity divided by the same variant's in-domain perplexity; the
diagonal is 1 by construction and lower off-diagonal is more robust).
"""

from conceptlm import dataset, model, tokenizer, training
from conceptlm.evaluation import build_transfer_matrix, perplexity, render_matrix_text
from conceptlm.grammar import default_grammar
from conceptlm.records import VARIANTS

grammar = default_grammar()
lex = grammar.lexicon()
domains = grammar.domain_names()

corpora = {d: grammar.training_sentences(d) for d in domains}
records = {d: dataset.extract_records(corpora[d], "synonym", "context_free", lex=lex)
           for d in domains}
heldout = {d: dataset.extract_records(grammar.heldout_sentences(d), "none",
                                      "no_concept", lex=lex)
           for d in domains}

lines = [" ".join(s) for d in domains for s in corpora[d]]
completions = sorted({w for d in domains for r in records[d] for w in r.completions})
vocab = tokenizer.train_vocab(lines + completions, 160, "word")
cmap = tokenizer.build_completion_map(
    vocab, [r for d in domains for r in records[d]]
)

mc = model.ModelConfig(vocab_size=len(vocab), context_len=24, d_model=32,
                       n_layers=2, n_heads=4, d_ff=64, seed=0)
tc = training.TrainConfig(learning_rate=3e-3, batch_size=6, epochs=30, seed=0)
start = model.init(mc)

models = {}
for d in domains:
    models[f"ntp/synonym@{d}"], _ = training.train(
        start, dataset.inflate(records[d]), VARIANTS["ntp/synonym"], tc, cmap, vocab)
    models[f"ncp-loss/synonym/context-free@{d}"], _ = training.train(
        start, records[d], VARIANTS["ncp-loss/synonym/context-free"], tc, cmap, vocab)
print(f"trained {len(models)} models ({', '.join(sorted(models))})")

results = []
print("\nheld-out perplexity per (model, eval domain):")
for model_id in sorted(models):
    for d in domains:
        res = perplexity(models[model_id], heldout[d], "ntp_ppl", None, vocab,
                         domain=d, model_id=model_id)
        results.append(res)
        print(f"  {model_id:40} on {d:7} ppl={res.value:10.2f}")

print()
print(render_matrix_text(build_transfer_matrix(results)))
