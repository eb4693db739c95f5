"""
Reading a procurement extract and building numeric features
===========================================================

Generate a small synthetic extract, parse it, drop duplicate rows and turn
each contract into log amounts, red-flag indicators and one-hot categories.
"""

import io

import numpy as np

from procuraudit.features import assemble_matrix, contract_features, one_hot, pearson
from procuraudit.ingest import deduplicate, parse_csv
from procuraudit.synth import SynthConfig, generate

# %%
# A synthetic extract with 5% duplicated rows and 5% creation dates that
# fall after the award date.
text, truth = generate(SynthConfig(n_contracts=400, duplicate_rate=0.05, date_inversion_rate=0.05, seed=3))
records, diagnostics = parse_csv(io.BytesIO(text.encode("utf-8")))
print(len(records), "rows parsed,", len(diagnostics), "cell diagnostics")

# %%
# Duplicates share the contract id and the creation timestamp.
records, removed = deduplicate(records)
print("removed", removed, "duplicates; ground truth says", sum(t["kind"] == "duplicate" for t in truth))

# %%
# Per-contract features. Amounts go through log1p; the overdraw and
# date-inconsistency flags come straight from the raw values.
feats = [contract_features(r) for r in records]
print("overdrawn contracts:", sum(f.overdraw_flag for f in feats))
print("created after award:", sum(f.date_inconsistency_flag for f in feats))

log_c = [f.log_cuantia for f in feats]
log_v = [f.log_valor_definitivo for f in feats]
print("Pearson(log cuantia, log valor definitivo) =", round(pearson(log_c, log_v), 4))

# %%
# Categorical columns become one-hot blocks; rare values fold into __OTHER__.
cats = {name: one_hot([r.get(name) for r in records]) for name in ("TIPO_CONTRATO", "TIPO_MODALIDAD")}
matrix = assemble_matrix(feats, cats)
print(matrix.shape, dict(matrix.blocks))
print(matrix.column_names[:8])

# %%
# Column medians of the numeric block, as a quick sanity check.
num = np.column_stack([matrix.column(c) for c in matrix.column_names if c.startswith("num:")])
print(np.round(np.median(num, axis=0), 3))
