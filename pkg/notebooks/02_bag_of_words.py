"""
Bag of words over contract descriptions
=======================================

Tokenize the free-text object description, prune by document frequency and
look at the resulting sparse count matrix.
"""

import io

import numpy as np

from procuraudit.ingest import parse_csv
from procuraudit.synth import SynthConfig, generate
from procuraudit.text import VectorizerParams, build_vocabulary, tokenize, vectorize

print(tokenize("Prestación de Servicios"))
print(tokenize("OBRA-2010 civil"))

# %%
text, _ = generate(SynthConfig(n_contracts=500, anomaly_rate=0.02, seed=5))
records, _ = parse_csv(io.BytesIO(text.encode("utf-8")))
docs = [tokenize(r.detalle_objeto) for r in records]

# %%
# Defaults: keep tokens present in more than 0.01% and fewer than 50% of the
# documents, after removing Spanish stopwords.
params = VectorizerParams()
vocab = build_vocabulary(docs, params)
print(len(vocab), "tokens kept out of", len({t for d in docs for t in d}), "distinct")

# %%
# Tokens that appear in half the corpus or more are dropped as uninformative.
df = {t: sum(t in set(d) for d in docs) / len(docs) for t in {t for d in docs for t in d}}
common = sorted((t for t, f in df.items() if f >= 0.5 and t not in params.stopword_list))
print("too common:", common)

# %%
counts = vectorize(docs, vocab)
dense = counts.to_dense()
print("matrix", dense.shape, "non-zero cells", int(np.count_nonzero(dense)))
top = np.argsort(-dense.sum(axis=0), kind="stable")[:10]
for j in top:
    print(f"{vocab.tokens[j]:>16s} {int(dense[:, j].sum()):5d} (df {vocab.doc_freq[vocab.tokens[j]]})")

# %%
# The rare words planted into anomalous descriptions survive the min_df cut.
rare = [t for t in vocab.tokens if vocab.doc_freq[t] <= 3]
print("rare tokens:", rare[:15])
